//! Deformation grids: flow-map samples, eigen-frames and helicity scalars
//! on a lattice over an axis-aligned plane `z = s1`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{gradient_eigen_frame, shear_normals_from, EigenFrame};
use crate::error::{LcsError, Result};
use crate::flow::VelocityField;
use crate::helicity::{frobenius_from_jacobians, helicity_from_jacobian, jacobian_at, Lattice3};
use crate::integrator::{flow_map_sample, IntegratorConfig};
use crate::{Mat3, Vec3};

/// Per-point classification, stored as the grid file's mask value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointStatus {
    InU = 0,
    OutsideU = 1,
    EigenFailure = 2,
}

impl PointStatus {
    pub fn code(self) -> f64 {
        self as u8 as f64
    }

    pub fn from_code(v: f64) -> Option<Self> {
        match v {
            0.0 => Some(PointStatus::InU),
            1.0 => Some(PointStatus::OutsideU),
            2.0 => Some(PointStatus::EigenFailure),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointRecord {
    pub x0: Vec3,
    pub f_val: Vec3,
    pub grad_f: Mat3,
    pub lambda: [f64; 3],
    pub xi: [Vec3; 3],
    pub status: PointStatus,
}

impl PointRecord {
    fn failed(x0: Vec3, f_val: Vec3, grad_f: Mat3) -> Self {
        PointRecord {
            x0,
            f_val,
            grad_f,
            lambda: [f64::NAN; 3],
            xi: [Vec3::repeat(f64::NAN); 3],
            status: PointStatus::EigenFailure,
        }
    }

    /// The eigen-frame if the point lies in the distinct-spectrum set.
    pub fn frame(&self) -> Option<EigenFrame> {
        (self.status == PointStatus::InU).then_some(EigenFrame {
            lambda: self.lambda,
            xi: self.xi,
            in_u: true,
        })
    }

    pub fn cauchy_green(&self) -> Mat3 {
        crate::integrator::cauchy_green(&self.grad_f)
    }
}

/// Vector fields derived from an eigen-frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameVector {
    Xi1,
    Xi2,
    Xi3,
    NPlus,
    NMinus,
    NPlusCrossXi2,
    NMinusCrossXi2,
}

impl FrameVector {
    pub fn of(self, f: &EigenFrame) -> Vec3 {
        let n = || shear_normals_from(f.lambda1(), f.lambda3(), &f.xi1(), &f.xi3());
        match self {
            FrameVector::Xi1 => f.xi1(),
            FrameVector::Xi2 => f.xi2(),
            FrameVector::Xi3 => f.xi3(),
            FrameVector::NPlus => n().n_plus,
            FrameVector::NMinus => n().n_minus,
            FrameVector::NPlusCrossXi2 => n().n_plus.cross(&f.xi2()),
            FrameVector::NMinusCrossXi2 => n().n_minus.cross(&f.xi2()),
        }
    }
}

/// Re-sign each eigenvector of `f` to agree with the matching eigenvector of
/// `reference`. Derived fields built from the result keep the reference's
/// `n+`/`n-` labelling.
pub fn align_frame(f: &EigenFrame, reference: &EigenFrame) -> EigenFrame {
    let mut out = *f;
    for i in 0..3 {
        if out.xi[i].dot(&reference.xi[i]) < 0.0 {
            out.xi[i] = -out.xi[i];
        }
    }
    out
}

/// Which helicity scalar a grid field holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HelicityField {
    Xi3,
    Xi1,
    NPlus,
    NMinus,
}

impl HelicityField {
    pub const ALL: [HelicityField; 4] = [
        HelicityField::Xi3,
        HelicityField::Xi1,
        HelicityField::NPlus,
        HelicityField::NMinus,
    ];

    pub fn vector(self) -> FrameVector {
        match self {
            HelicityField::Xi3 => FrameVector::Xi3,
            HelicityField::Xi1 => FrameVector::Xi1,
            HelicityField::NPlus => FrameVector::NPlus,
            HelicityField::NMinus => FrameVector::NMinus,
        }
    }
}

/// Frame triples `(X, Y, Z)` for the Frobenius scalar.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrobeniusTriple {
    /// `(xi1, xi2, xi3)`
    Strain,
    /// `(xi2, xi3, xi1)`
    Stretch,
    /// `(xi2, n+ × xi2, n+)`
    ShearPlus,
    /// `(xi2, n- × xi2, n-)`
    ShearMinus,
}

impl FrobeniusTriple {
    pub fn vectors(self) -> [FrameVector; 3] {
        use FrameVector::*;
        match self {
            FrobeniusTriple::Strain => [Xi1, Xi2, Xi3],
            FrobeniusTriple::Stretch => [Xi2, Xi3, Xi1],
            FrobeniusTriple::ShearPlus => [Xi2, NPlusCrossXi2, NPlus],
            FrobeniusTriple::ShearMinus => [Xi2, NMinusCrossXi2, NMinus],
        }
    }
}

/// Axis-aligned sampling plane `z = s1` with a rectangular window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneSpec {
    pub s1: f64,
    pub nx: usize,
    pub ny: usize,
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
}

impl PlaneSpec {
    pub fn new(s1: f64, nx: usize, ny: usize, x_range: [f64; 2], y_range: [f64; 2]) -> Self {
        PlaneSpec {
            s1,
            nx,
            ny,
            x_range,
            y_range,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 8 || self.ny < 8 {
            return Err(LcsError::InvalidArgument(format!(
                "grid dimensions must be at least 8, got {}x{}",
                self.nx, self.ny
            )));
        }
        if !(self.x_range[1] > self.x_range[0] && self.y_range[1] > self.y_range[0]) {
            return Err(LcsError::InvalidArgument("empty sampling window".into()));
        }
        if !self.s1.is_finite() {
            return Err(LcsError::InvalidArgument(
                "non-finite plane position".into(),
            ));
        }
        Ok(())
    }

    pub fn hx(&self) -> f64 {
        (self.x_range[1] - self.x_range[0]) / (self.nx - 1) as f64
    }

    pub fn hy(&self) -> f64 {
        (self.y_range[1] - self.y_range[0]) / (self.ny - 1) as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub integrator: IntegratorConfig,
    /// Relative eigenvalue gap below which a point is treated as degenerate,
    /// measured against the larger eigenvalue of each adjacent pair.
    pub gap_tol: f64,
    /// Out-of-plane spacing of the auxiliary layers; defaults to `min(hx, hy)`.
    pub hz: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            integrator: IntegratorConfig::default(),
            gap_tol: 1e-6,
            hz: None,
        }
    }
}

/// Helicity scalars over the main layer, `NaN` where unavailable.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HelicitySet {
    pub xi3: Vec<f64>,
    pub xi1: Vec<f64>,
    pub n_plus: Vec<f64>,
    pub n_minus: Vec<f64>,
}

impl HelicitySet {
    pub fn get(&self, which: HelicityField) -> &[f64] {
        match which {
            HelicityField::Xi3 => &self.xi3,
            HelicityField::Xi1 => &self.xi1,
            HelicityField::NPlus => &self.n_plus,
            HelicityField::NMinus => &self.n_minus,
        }
    }

    fn set(&mut self, which: HelicityField, v: Vec<f64>) {
        match which {
            HelicityField::Xi3 => self.xi3 = v,
            HelicityField::Xi1 => self.xi1 = v,
            HelicityField::NPlus => self.n_plus = v,
            HelicityField::NMinus => self.n_minus = v,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeformationGrid {
    pub s1: f64,
    pub t0: f64,
    /// Integration time `T`; samples map `t0 -> t0 + T`.
    pub t: f64,
    pub nx: usize,
    pub ny: usize,
    pub x_min: f64,
    pub y_min: f64,
    pub hx: f64,
    pub hy: f64,
    pub hz: f64,
    /// Row-major (`i + nx j`) records on `z = s1`.
    pub main: Vec<PointRecord>,
    /// Auxiliary layers at `z = s1 - hz` and `z = s1 + hz`; empty when the
    /// grid was loaded from disk.
    pub below: Vec<PointRecord>,
    pub above: Vec<PointRecord>,
    pub helicity: HelicitySet,
}

impl DeformationGrid {
    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.nx * j
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.hx
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y_min + j as f64 * self.hy
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.nx - 1)
    }

    pub fn y_max(&self) -> f64 {
        self.y(self.ny - 1)
    }

    pub fn record(&self, i: usize, j: usize) -> &PointRecord {
        &self.main[self.index(i, j)]
    }

    pub fn has_aux_layers(&self) -> bool {
        self.below.len() == self.main.len() && self.above.len() == self.main.len()
    }

    pub fn masked_fraction(&self) -> f64 {
        let masked = self
            .main
            .iter()
            .filter(|r| r.status != PointStatus::InU)
            .count();
        masked as f64 / self.main.len() as f64
    }

    /// Largest `|lambda1 lambda2 lambda3 - 1|` over points with a valid
    /// spectrum, on all layers.
    pub fn max_volume_error(&self) -> f64 {
        self.main
            .iter()
            .chain(&self.below)
            .chain(&self.above)
            .filter(|r| r.status != PointStatus::EigenFailure)
            .map(|r| (r.lambda[0] * r.lambda[1] * r.lambda[2] - 1.0).abs())
            .fold(0.0, f64::max)
    }

    fn lattice(&self) -> Lattice3 {
        let nz = if self.has_aux_layers() { 3 } else { 1 };
        Lattice3 {
            dims: [self.nx, self.ny, nz],
            spacing: [self.hx, self.hy, self.hz],
            origin: Vec3::new(self.x_min, self.y_min, self.s1 - self.hz),
        }
    }

    fn layer_record(&self, p: [usize; 3]) -> &PointRecord {
        let n = self.index(p[0], p[1]);
        if !self.has_aux_layers() {
            return &self.main[n];
        }
        match p[2] {
            0 => &self.below[n],
            1 => &self.main[n],
            _ => &self.above[n],
        }
    }

    fn main_layer_k(&self) -> usize {
        usize::from(self.has_aux_layers())
    }

    fn frame_jacobian(&self, p: [usize; 3], center: &EigenFrame, v: FrameVector) -> Option<Mat3> {
        jacobian_at(&self.lattice(), p, |q| {
            let f = self.layer_record(q).frame()?;
            Some(v.of(&align_frame(&f, center)))
        })
    }
}

impl DeformationGrid {
    /// Grid built directly from analytic frames and helicity values
    /// `[H_xi3, H_xi1, H_n+, H_n-]`; `None` marks a masked point. Flow-map
    /// entries are left as identity. Used for synthetic tests and for
    /// feeding externally computed frames to the line extraction.
    pub fn from_frames(
        plane: &PlaneSpec,
        f: impl Fn(f64, f64) -> Option<(EigenFrame, [f64; 4])>,
    ) -> Result<Self> {
        plane.validate()?;
        let (hx, hy) = (plane.hx(), plane.hy());
        let mut main = Vec::with_capacity(plane.nx * plane.ny);
        let mut helicity = HelicitySet::default();
        for j in 0..plane.ny {
            for i in 0..plane.nx {
                let x0 = Vec3::new(
                    plane.x_range[0] + i as f64 * hx,
                    plane.y_range[0] + j as f64 * hy,
                    plane.s1,
                );
                let rec = match f(x0[0], x0[1]) {
                    Some((frame, h)) => {
                        helicity.xi3.push(h[0]);
                        helicity.xi1.push(h[1]);
                        helicity.n_plus.push(h[2]);
                        helicity.n_minus.push(h[3]);
                        PointRecord {
                            x0,
                            f_val: x0,
                            grad_f: Mat3::identity(),
                            lambda: frame.lambda,
                            xi: frame.xi,
                            status: if frame.in_u {
                                PointStatus::InU
                            } else {
                                PointStatus::OutsideU
                            },
                        }
                    }
                    None => {
                        for v in [
                            &mut helicity.xi3,
                            &mut helicity.xi1,
                            &mut helicity.n_plus,
                            &mut helicity.n_minus,
                        ] {
                            v.push(f64::NAN);
                        }
                        PointRecord::failed(x0, x0, Mat3::identity())
                    }
                };
                main.push(rec);
            }
        }
        Ok(DeformationGrid {
            s1: plane.s1,
            t0: 0.0,
            t: 0.0,
            nx: plane.nx,
            ny: plane.ny,
            x_min: plane.x_range[0],
            y_min: plane.y_range[0],
            hx,
            hy,
            hz: hx.min(hy),
            main,
            below: Vec::new(),
            above: Vec::new(),
            helicity,
        })
    }
}

/// Helicity of a frame-derived field over the main layer. Neighbor frames
/// are aligned to the center frame before differencing.
pub fn helicity_grid(grid: &DeformationGrid, which: HelicityField) -> Vec<f64> {
    let k = grid.main_layer_k();
    let v = which.vector();
    (0..grid.main.len())
        .into_par_iter()
        .map(|n| {
            let p = [n % grid.nx, n / grid.nx, k];
            grid.main[n]
                .frame()
                .and_then(|f| {
                    let j = grid.frame_jacobian(p, &f, v)?;
                    Some(helicity_from_jacobian(&j, &v.of(&f)))
                })
                .unwrap_or(f64::NAN)
        })
        .collect()
}

/// Frobenius scalar of a frame triple over the main layer.
pub fn frobenius_grid(grid: &DeformationGrid, triple: FrobeniusTriple) -> Vec<f64> {
    let k = grid.main_layer_k();
    let [vx, vy, vz] = triple.vectors();
    (0..grid.main.len())
        .into_par_iter()
        .map(|n| {
            let p = [n % grid.nx, n / grid.nx, k];
            grid.main[n]
                .frame()
                .and_then(|f| {
                    let jx = grid.frame_jacobian(p, &f, vx)?;
                    let jy = grid.frame_jacobian(p, &f, vy)?;
                    Some(frobenius_from_jacobians(
                        &jx,
                        &jy,
                        &vx.of(&f),
                        &vy.of(&f),
                        &vz.of(&f),
                    ))
                })
                .unwrap_or(f64::NAN)
        })
        .collect()
}

fn sample_point(
    field: &VelocityField,
    x0: Vec3,
    t0: f64,
    t: f64,
    cfg: &GridConfig,
) -> Result<PointRecord> {
    let s = match flow_map_sample(field, &x0, t0, t0 + t, &cfg.integrator) {
        Ok(s) => s,
        Err(LcsError::NonFinite(_)) => {
            return Ok(PointRecord::failed(
                x0,
                Vec3::repeat(f64::NAN),
                Mat3::repeat(f64::NAN),
            ))
        }
        Err(e) => return Err(e),
    };
    Ok(
        match gradient_eigen_frame(&s.grad_f, s.grad_b.as_ref(), cfg.gap_tol) {
            Ok(f) => PointRecord {
                x0,
                f_val: s.f_val,
                grad_f: s.grad_f,
                lambda: f.lambda,
                xi: f.xi,
                status: if f.in_u {
                    PointStatus::InU
                } else {
                    PointStatus::OutsideU
                },
            },
            Err(_) => PointRecord::failed(x0, s.f_val, s.grad_f),
        },
    )
}

fn sample_layer(
    field: &VelocityField,
    plane: &PlaneSpec,
    z: f64,
    t0: f64,
    t: f64,
    cfg: &GridConfig,
) -> Result<Vec<PointRecord>> {
    let (hx, hy) = (plane.hx(), plane.hy());
    (0..plane.nx * plane.ny)
        .into_par_iter()
        .map(|n| {
            let (i, j) = (n % plane.nx, n / plane.nx);
            let x0 = Vec3::new(
                plane.x_range[0] + i as f64 * hx,
                plane.y_range[0] + j as f64 * hy,
                z,
            );
            sample_point(field, x0, t0, t, cfg)
        })
        .collect()
}

/// Sample the flow map over `t0 -> t0 + t` on a plane and its two
/// auxiliary layers, then fill the helicity fields. Runs on the current
/// rayon pool; output is independent of the pool size.
pub fn sample_plane(
    field: &VelocityField,
    plane: &PlaneSpec,
    t0: f64,
    t: f64,
    cfg: &GridConfig,
) -> Result<DeformationGrid> {
    plane.validate()?;
    cfg.integrator.validate()?;
    if !(cfg.gap_tol >= 0.0) {
        return Err(LcsError::InvalidArgument(
            "gap_tol must be non-negative".into(),
        ));
    }
    if let Some((start, end)) = field.time_span() {
        for tt in [t0, t0 + t] {
            if !(tt >= start && tt <= end) {
                return Err(LcsError::TimeOutOfRange { t: tt, start, end });
            }
        }
    }
    let (hx, hy) = (plane.hx(), plane.hy());
    let hz = cfg.hz.unwrap_or(hx.min(hy));
    if !(hz > 0.0) {
        return Err(LcsError::InvalidArgument("hz must be positive".into()));
    }
    let main = sample_layer(field, plane, plane.s1, t0, t, cfg)?;
    let below = sample_layer(field, plane, plane.s1 - hz, t0, t, cfg)?;
    let above = sample_layer(field, plane, plane.s1 + hz, t0, t, cfg)?;
    let mut grid = DeformationGrid {
        s1: plane.s1,
        t0,
        t,
        nx: plane.nx,
        ny: plane.ny,
        x_min: plane.x_range[0],
        y_min: plane.y_range[0],
        hx,
        hy,
        hz,
        main,
        below,
        above,
        helicity: HelicitySet::default(),
    };
    for which in HelicityField::ALL {
        let h = helicity_grid(&grid, which);
        grid.helicity.set(which, h);
    }
    Ok(grid)
}
