//! Python bindings: velocity fields, flow-map samples, deformation grids and
//! reduced lines. Vectors cross the boundary as tuples, matrices as nested
//! row lists.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use lcs3d::integrator::{flow_map_sample, IntegratorConfig};
use lcs3d::lines::{extract_lines, LineConfig, LineKind};
use lcs3d::oracle::AnalyticCg;
use lcs3d::strain::{gradient_eigen_frame, sample_plane, DeformationGrid, GridConfig, PlaneSpec};
use lcs3d::{flow, LcsError, Mat3, Vec3};

type Triple = (f64, f64, f64);
type Rows = [[f64; 3]; 3];

fn err(e: LcsError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn vec3(v: Triple) -> Vec3 {
    Vec3::new(v.0, v.1, v.2)
}

fn triple(v: &Vec3) -> Triple {
    (v.x, v.y, v.z)
}

fn rows(m: &Mat3) -> Rows {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

fn kind(label: &str) -> PyResult<LineKind> {
    LineKind::from_label(label).ok_or_else(|| {
        PyValueError::new_err(format!(
            "unknown line kind {label:?}, expected strain, stretch, shear+ or shear-"
        ))
    })
}

#[pyclass(name = "VelocityField", module = "lcs3d", frozen)]
struct PyVelocityField(flow::VelocityField);

#[pymethods]
impl PyVelocityField {
    #[staticmethod]
    fn steady_abc() -> Self {
        PyVelocityField(flow::VelocityField::steady_abc())
    }

    #[staticmethod]
    fn periodic_abc() -> Self {
        PyVelocityField(flow::VelocityField::periodic_abc())
    }

    /// `v = M x` with `M` given as rows.
    #[staticmethod]
    fn linear(m: Rows) -> Self {
        let m = Mat3::from_fn(|i, j| m[i][j]);
        PyVelocityField(flow::VelocityField::linear(m))
    }

    /// `x' = slope * z`, `y' = 0`, `z' = 1`.
    #[staticmethod]
    fn linear_shear(slope: f64) -> Self {
        PyVelocityField(flow::VelocityField::parallel_shear(
            flow::ShearProfiles::linear_u(slope),
        ))
    }

    #[getter]
    fn label(&self) -> &str {
        &self.0.label
    }

    fn eval(&self, x: Triple, t: f64) -> PyResult<Triple> {
        self.0.eval(&vec3(x), t).map(|v| triple(&v)).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("VelocityField({})", self.0.label)
    }
}

/// Flow map over `[t0, t1]` from one point, with its Cauchy-Green spectrum.
#[pyclass(name = "FlowMap", module = "lcs3d", frozen, get_all)]
struct PyFlowMap {
    final_position: Triple,
    gradient: Rows,
    cauchy_green: Rows,
    /// Ascending.
    eigenvalues: [f64; 3],
    eigenvectors: [Triple; 3],
}

#[pyfunction]
#[pyo3(signature = (field, x0, t0, t1, dt = 0.01))]
fn flow_map(
    py: Python<'_>,
    field: &PyVelocityField,
    x0: Triple,
    t0: f64,
    t1: f64,
    dt: f64,
) -> PyResult<PyFlowMap> {
    let cfg = IntegratorConfig {
        dt,
        ..IntegratorConfig::default()
    };
    let (s, frame) = py
        .detach(|| {
            let s = flow_map_sample(&field.0, &vec3(x0), t0, t1, &cfg)?;
            let frame = gradient_eigen_frame(&s.grad_f, s.grad_b.as_ref(), 0.0)?;
            Ok((s, frame))
        })
        .map_err(err)?;
    Ok(PyFlowMap {
        final_position: triple(&s.f_val),
        gradient: rows(&s.grad_f),
        cauchy_green: rows(&s.c),
        eigenvalues: frame.lambda,
        eigenvectors: frame.xi.map(|v| triple(&v)),
    })
}

/// Closed-form Cauchy-Green eigenvalues of a parallel shear with shear
/// integrals `a` and `b`.
#[pyfunction]
fn parallel_shear_eigenvalues(a: f64, b: f64) -> [f64; 3] {
    AnalyticCg::from_ab(a, b).eigenvalues()
}

#[pyclass(name = "ReducedLine", module = "lcs3d", frozen, get_all)]
struct PyReducedLine {
    kind: String,
    s1: f64,
    vertices: Vec<Triple>,
    helicity: Vec<f64>,
    closed: bool,
    length: f64,
    mean_radius: f64,
}

#[pymethods]
impl PyReducedLine {
    fn __len__(&self) -> usize {
        self.vertices.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "ReducedLine({}, {} vertices, closed={})",
            self.kind,
            self.vertices.len(),
            self.closed
        )
    }
}

/// Flow-map samples on a plane `z = s1`, with the helicity fields.
#[pyclass(name = "DeformationGrid", module = "lcs3d", frozen)]
struct PyDeformationGrid(DeformationGrid);

#[pymethods]
impl PyDeformationGrid {
    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.0.nx, self.0.ny)
    }

    #[getter]
    fn s1(&self) -> f64 {
        self.0.s1
    }

    fn x(&self) -> Vec<f64> {
        (0..self.0.nx).map(|i| self.0.x(i)).collect()
    }

    fn y(&self) -> Vec<f64> {
        (0..self.0.ny).map(|j| self.0.y(j)).collect()
    }

    /// Helicity of the normal field of `kind` lines, row-major with `x`
    /// fastest; `nan` where the frame is degenerate.
    fn helicity(&self, kind: &str) -> PyResult<Vec<f64>> {
        let which = self::kind(kind)?.helicity_field();
        Ok(self.0.helicity.get(which).to_vec())
    }

    fn max_volume_error(&self) -> f64 {
        self.0.max_volume_error()
    }

    fn masked_fraction(&self) -> f64 {
        self.0.masked_fraction()
    }

    #[pyo3(signature = (kind, eps0 = 1e-2, seeds = (100, 100), step = None))]
    fn lines(
        &self,
        py: Python<'_>,
        kind: &str,
        eps0: f64,
        seeds: (usize, usize),
        step: Option<f64>,
    ) -> PyResult<Vec<PyReducedLine>> {
        let kind = self::kind(kind)?;
        let mut cfg = step.map(LineConfig::with_step).unwrap_or_default();
        cfg.eps0 = eps0;
        (cfg.seed_nx, cfg.seed_ny) = seeds;
        let lines = py
            .detach(|| extract_lines(&self.0, kind, &cfg))
            .map_err(err)?;
        Ok(lines
            .into_iter()
            .map(|l| PyReducedLine {
                kind: l.kind.label().to_string(),
                s1: l.s1,
                length: l.length(),
                mean_radius: l.mean_radius(),
                vertices: l.vertices.iter().map(triple).collect(),
                helicity: l.helicity,
                closed: l.closed,
            })
            .collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "DeformationGrid({}x{} at z={}, t0={}, t={})",
            self.0.nx, self.0.ny, self.0.s1, self.0.t0, self.0.t
        )
    }
}

#[pyfunction]
#[pyo3(signature = (field, s1, shape, x_range, y_range, t, t0 = 0.0, dt = 0.01))]
#[allow(clippy::too_many_arguments)]
fn sample_grid(
    py: Python<'_>,
    field: &PyVelocityField,
    s1: f64,
    shape: (usize, usize),
    x_range: [f64; 2],
    y_range: [f64; 2],
    t: f64,
    t0: f64,
    dt: f64,
) -> PyResult<PyDeformationGrid> {
    let plane = PlaneSpec::new(s1, shape.0, shape.1, x_range, y_range);
    let mut cfg = GridConfig::default();
    cfg.integrator.dt = dt;
    py.detach(|| sample_plane(&field.0, &plane, t0, t, &cfg))
        .map(PyDeformationGrid)
        .map_err(err)
}

#[pymodule]
#[pyo3(name = "lcs3d")]
fn lcs3d_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyVelocityField>()?;
    m.add_class::<PyFlowMap>()?;
    m.add_class::<PyDeformationGrid>()?;
    m.add_class::<PyReducedLine>()?;
    m.add_function(wrap_pyfunction!(flow_map, m)?)?;
    m.add_function(wrap_pyfunction!(sample_grid, m)?)?;
    m.add_function(wrap_pyfunction!(parallel_shear_eigenvalues, m)?)?;
    Ok(())
}
