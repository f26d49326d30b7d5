use crate::error::{LcsError, Result};
use crate::flow::VelocityField;
use crate::integrator::{advect_point, flow_map_sample, IntegratorConfig};
use crate::lines::{LineKind, ReducedLine};
use crate::strain::{singular_values, DeformationGrid, PointStatus};
use crate::Vec3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
}

/// Edge incidence counts of a triangle mesh.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EdgeReport {
    /// Edges used by one face.
    pub boundary: usize,
    /// Edges shared by exactly two faces.
    pub interior: usize,
    /// Edges used by more than two faces.
    pub non_manifold: usize,
    /// Faces with a repeated vertex index.
    pub degenerate_faces: usize,
}

impl Mesh {
    pub fn triangle_area(&self, f: &[usize; 3]) -> f64 {
        let [a, b, c] = f.map(|i| self.vertices[i]);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn area(&self) -> f64 {
        self.faces.iter().map(|f| self.triangle_area(f)).sum()
    }

    pub fn edge_report(&self) -> EdgeReport {
        let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
        let mut report = EdgeReport::default();
        for f in &self.faces {
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                report.degenerate_faces += 1;
                continue;
            }
            for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                *counts.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        for &n in counts.values() {
            match n {
                1 => report.boundary += 1,
                2 => report.interior += 1,
                _ => report.non_manifold += 1,
            }
        }
        report
    }

    pub fn is_manifold(&self) -> bool {
        let r = self.edge_report();
        r.non_manifold == 0 && r.degenerate_faces == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum Embedding {
    Physical,
    Toroidal { r1: f64, r2: f64 },
}

/// Strain data attached to a surface vertex.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VertexStrain {
    pub lambda: [f64; 3],
    pub det: f64,
}

/// Which area formula [`predicted_area`] applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AreaModel {
    /// Weight `sqrt|det| λ2^(1/4)`, which is `λ2^(1/4)` for volume-preserving flows.
    Shear,
    /// Weight `|det| / sqrt(λ3)`.
    Repelling,
    /// Weight `|det| / sqrt(λ1)`.
    Attracting,
}

impl AreaModel {
    pub fn for_kind(kind: LineKind) -> Self {
        match kind {
            LineKind::Strain => AreaModel::Repelling,
            LineKind::Stretch => AreaModel::Attracting,
            LineKind::ShearPlus | LineKind::ShearMinus => AreaModel::Shear,
        }
    }

    fn weight(self, s: &VertexStrain) -> f64 {
        let [l1, l2, l3] = s.lambda;
        match self {
            AreaModel::Shear => s.det.abs().sqrt() * l2.powf(0.25),
            AreaModel::Repelling => s.det.abs() / l3.sqrt(),
            AreaModel::Attracting => s.det.abs() / l1.sqrt(),
        }
    }
}

/// A stack of curves, each resampled to `m` vertices, stitched into a
/// triangle strip (open curves) or tube (closed curves). Row `k` of the
/// mesh holds the vertices of curve `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct BarrierSurface {
    pub kind: LineKind,
    pub s1: Vec<f64>,
    pub m: usize,
    pub closed: bool,
    pub mesh: Mesh,
    /// Helicity resampled from the source lines, NaN where unknown.
    pub helicity: Vec<f64>,
    pub strain: Option<Vec<VertexStrain>>,
    /// Flow-map window the source curves were extracted from.
    pub t0: f64,
    pub t: f64,
    /// Time at which the vertices are given.
    pub time: f64,
    pub embedding: Embedding,
}

impl BarrierSurface {
    pub fn rows(&self) -> usize {
        self.s1.len()
    }

    pub fn curve(&self, k: usize) -> &[Vec3] {
        &self.mesh.vertices[k * self.m..(k + 1) * self.m]
    }
}

/// Resample a polyline to `m` vertices equally spaced in arclength, with
/// per-vertex `values` interpolated linearly. A closed polyline (first and
/// last vertex equal, or `closed` set) gets `m` vertices around the loop
/// without repeating the start.
pub fn resample_polyline(
    points: &[Vec3],
    values: &[f64],
    closed: bool,
    m: usize,
) -> Result<(Vec<Vec3>, Vec<f64>)> {
    if points.len() < 2 || m < 2 {
        return Err(LcsError::DegenerateCurve("polyline has no length".into()));
    }
    let mut pts = points.to_vec();
    let mut vals: Vec<f64> = if values.len() == points.len() {
        values.to_vec()
    } else {
        vec![f64::NAN; points.len()]
    };
    if closed && (pts[0] - pts[pts.len() - 1]).norm() > 0.0 {
        pts.push(pts[0]);
        vals.push(vals[0]);
    }
    let mut s = vec![0.0; pts.len()];
    for k in 1..pts.len() {
        s[k] = s[k - 1] + (pts[k] - pts[k - 1]).norm();
    }
    let total = s[s.len() - 1];
    if !(total > 1e-12) {
        return Err(LcsError::DegenerateCurve("polyline has no length".into()));
    }
    let denom = if closed { m } else { m - 1 } as f64;
    let mut out = Vec::with_capacity(m);
    let mut out_v = Vec::with_capacity(m);
    let mut seg = 0;
    for k in 0..m {
        let target = total * k as f64 / denom;
        while seg + 2 < pts.len() && s[seg + 1] < target {
            seg += 1;
        }
        let len = s[seg + 1] - s[seg];
        let u = if len > 0.0 {
            ((target - s[seg]) / len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(pts[seg] + u * (pts[seg + 1] - pts[seg]));
        out_v.push(vals[seg] + u * (vals[seg + 1] - vals[seg]));
    }
    Ok((out, out_v))
}

/// Reorder `curve` to best match `prev`: cyclic shifts and reversal for
/// closed curves, reversal only for open ones. Returns the permutation.
fn seam_permutation(prev: &[Vec3], curve: &[Vec3], closed: bool) -> Vec<usize> {
    let m = curve.len();
    let mut best = (f64::INFINITY, Vec::new());
    let shifts = if closed { m } else { 1 };
    for reverse in [false, true] {
        for shift in 0..shifts {
            let perm: Vec<usize> = (0..m)
                .map(|k| {
                    let j = if reverse { (m - k) % m } else { k };
                    if closed {
                        (j + shift) % m
                    } else if reverse {
                        m - 1 - k
                    } else {
                        k
                    }
                })
                .collect();
            let cost: f64 = perm
                .iter()
                .zip(prev)
                .map(|(&j, p)| (curve[j] - p).norm_squared())
                .sum();
            if cost < best.0 {
                best = (cost, perm);
            }
        }
    }
    best.1
}

fn stitch(rows: usize, m: usize, closed: bool) -> Vec<[usize; 3]> {
    let mut faces = Vec::new();
    let cols = if closed { m } else { m - 1 };
    for r in 0..rows.saturating_sub(1) {
        let (a, b) = (r * m, (r + 1) * m);
        for k in 0..cols {
            let k1 = (k + 1) % m;
            faces.push([a + k, b + k, b + k1]);
            faces.push([a + k, b + k1, a + k1]);
        }
    }
    faces
}

/// Stitch a stack of polylines into a surface. Each polyline is resampled
/// to `m` vertices and aligned to the previous one before stitching.
#[allow(clippy::too_many_arguments)]
pub fn surface_from_curves(
    kind: LineKind,
    s1: &[f64],
    curves: &[Vec<Vec3>],
    helicity: &[Vec<f64>],
    closed: bool,
    m: usize,
    t0: f64,
    t: f64,
) -> Result<BarrierSurface> {
    if curves.len() < 2 || s1.len() != curves.len() {
        return Err(LcsError::InvalidArgument(
            "a surface needs at least two curves, one per s1 value".into(),
        ));
    }
    if m < 3 {
        return Err(LcsError::InvalidArgument(
            "resample count must be at least 3".into(),
        ));
    }
    let mut vertices = Vec::with_capacity(curves.len() * m);
    let mut hel = Vec::with_capacity(curves.len() * m);
    let mut prev: Option<Vec<Vec3>> = None;
    for (k, c) in curves.iter().enumerate() {
        let h = helicity.get(k).map(|h| h.as_slice()).unwrap_or(&[]);
        let (pts, vals) = resample_polyline(c, h, closed, m)?;
        let (pts, vals) = match &prev {
            Some(p) => {
                let perm = seam_permutation(p, &pts, closed);
                (
                    perm.iter().map(|&j| pts[j]).collect::<Vec<_>>(),
                    perm.iter().map(|&j| vals[j]).collect::<Vec<_>>(),
                )
            }
            None => (pts, vals),
        };
        vertices.extend_from_slice(&pts);
        hel.extend_from_slice(&vals);
        prev = Some(pts);
    }
    Ok(BarrierSurface {
        kind,
        s1: s1.to_vec(),
        m,
        closed,
        mesh: Mesh {
            faces: stitch(curves.len(), m, closed),
            vertices,
        },
        helicity: hel,
        strain: None,
        t0,
        t,
        time: t0,
        embedding: Embedding::Physical,
    })
}

/// Surface through a chain of reduced lines on consecutive planes.
pub fn build_surface(chain: &[&ReducedLine], m: usize, t0: f64, t: f64) -> Result<BarrierSurface> {
    let Some(first) = chain.first() else {
        return Err(LcsError::InvalidArgument("empty chain".into()));
    };
    let closed = first.closed;
    if chain
        .iter()
        .any(|l| l.closed != closed || l.kind != first.kind)
    {
        return Err(LcsError::InvalidArgument(
            "chain mixes open and closed lines or line kinds".into(),
        ));
    }
    if chain.windows(2).any(|w| w[1].s1 <= w[0].s1) {
        return Err(LcsError::InvalidArgument(
            "chain planes must increase".into(),
        ));
    }
    let s1: Vec<f64> = chain.iter().map(|l| l.s1).collect();
    let curves: Vec<Vec<Vec3>> = chain.iter().map(|l| l.vertices.clone()).collect();
    let hel: Vec<Vec<f64>> = chain.iter().map(|l| l.helicity.clone()).collect();
    surface_from_curves(first.kind, &s1, &curves, &hel, closed, m, t0, t)
}

/// Advect a line as a material curve from `t0` to `t1` and stitch `rows`
/// equally spaced snapshots into a surface. Row `k` carries the time of its
/// snapshot in `s1`. Also returns the raw snapshots (each with `m`
/// vertices, in resampled order before seam alignment).
#[allow(clippy::too_many_arguments)]
pub(crate) fn sweep_snapshots(
    field: &VelocityField,
    line: &ReducedLine,
    t0: f64,
    t1: f64,
    m: usize,
    rows: usize,
    cfg: &IntegratorConfig,
) -> Result<(BarrierSurface, Vec<Vec<Vec3>>)> {
    if !(t1 > t0) || rows < 2 {
        return Err(LcsError::InvalidArgument(
            "need t1 > t0 and at least two rows".into(),
        ));
    }
    let (start, hel) = resample_polyline(&line.vertices, &line.helicity, line.closed, m)?;
    let times: Vec<f64> = (0..rows)
        .map(|k| t0 + (t1 - t0) * k as f64 / (rows - 1) as f64)
        .collect();
    let mut snaps = vec![start];
    for k in 1..rows {
        let next: Result<Vec<Vec3>> = snaps[k - 1]
            .par_iter()
            .map(|p| advect_point(field, p, times[k - 1], times[k], cfg))
            .collect();
        snaps.push(next?);
    }
    let h = vec![hel; rows];
    let s = surface_from_curves(line.kind, &times, &snaps, &h, line.closed, m, t0, t1 - t0)?;
    Ok((s, snaps))
}

/// Surface swept by a line advected from `t0` to `t1`; see
/// [`sweep_snapshots`] for the row layout. For steady flows this is the
/// invariant surface through the line.
pub fn sweep_surface(
    field: &VelocityField,
    line: &ReducedLine,
    t0: f64,
    t1: f64,
    m: usize,
    rows: usize,
    cfg: &IntegratorConfig,
) -> Result<BarrierSurface> {
    sweep_snapshots(field, line, t0, t1, m, rows, cfg).map(|(s, _)| s)
}

pub fn mesh_area(surface: &BarrierSurface) -> f64 {
    surface.mesh.area()
}

/// Rows of an `n x n` lattice on the square of half width `half` centered
/// at `center` and orthogonal to `normal`, ready for
/// [`surface_from_curves`].
pub fn plane_patch(center: &Vec3, normal: &Vec3, half: f64, n: usize) -> Result<Vec<Vec<Vec3>>> {
    let nn = normal.norm();
    if !(nn > 0.0 && nn.is_finite()) || n < 2 || !(half > 0.0) {
        return Err(LcsError::DegenerateCurve("empty patch".into()));
    }
    let nrm = normal / nn;
    // Any axis not parallel to the normal spans the first tangent.
    let axis = if nrm.x.abs() < 0.9 {
        Vec3::x()
    } else {
        Vec3::y()
    };
    let e1 = nrm.cross(&axis).normalize();
    let e2 = nrm.cross(&e1);
    let step = 2.0 * half / (n - 1) as f64;
    Ok((0..n)
        .map(|r| {
            (0..n)
                .map(|c| center + (c as f64 * step - half) * e1 + (r as f64 * step - half) * e2)
                .collect()
        })
        .collect())
}

/// Bilinear interpolation of the stored eigenvalues and gradient
/// determinant. `None` outside the grid or next to a failed point.
pub fn grid_strain_at(grid: &DeformationGrid, x: f64, y: f64) -> Option<VertexStrain> {
    let fx = (x - grid.x_min) / grid.hx;
    let fy = (y - grid.y_min) / grid.hy;
    let eps = 1e-9;
    if !(fx >= -eps
        && fy >= -eps
        && fx <= (grid.nx - 1) as f64 + eps
        && fy <= (grid.ny - 1) as f64 + eps)
    {
        return None;
    }
    let i = (fx.floor().max(0.0) as usize).min(grid.nx - 2);
    let j = (fy.floor().max(0.0) as usize).min(grid.ny - 2);
    let (u, v) = (
        (fx - i as f64).clamp(0.0, 1.0),
        (fy - j as f64).clamp(0.0, 1.0),
    );
    let mut lambda = [0.0; 3];
    let mut det = 0.0;
    for (di, dj, w) in [
        (0, 0, (1.0 - u) * (1.0 - v)),
        (1, 0, u * (1.0 - v)),
        (0, 1, (1.0 - u) * v),
        (1, 1, u * v),
    ] {
        let r = grid.record(i + di, j + dj);
        if r.status == PointStatus::EigenFailure {
            return None;
        }
        for (l, rl) in lambda.iter_mut().zip(r.lambda) {
            *l += w * rl;
        }
        det += w * r.grad_f.determinant();
    }
    Some(VertexStrain { lambda, det })
}

/// Attach strain data by interpolating, for each row, the grid of the same
/// plane.
pub fn attach_grid_strain(surface: &mut BarrierSurface, grids: &[&DeformationGrid]) -> Result<()> {
    let mut out = Vec::with_capacity(surface.mesh.vertices.len());
    for (k, &s1) in surface.s1.iter().enumerate() {
        let grid = grids
            .iter()
            .find(|g| (g.s1 - s1).abs() <= 1e-9 * (1.0 + s1.abs()))
            .ok_or_else(|| LcsError::InvalidArgument(format!("no grid for plane s1={s1}")))?;
        for p in surface.curve(k) {
            out.push(
                grid_strain_at(grid, p[0], p[1]).ok_or(LcsError::DegeneratePoint {
                    x: p[0],
                    y: p[1],
                    reason: "no strain data",
                })?,
            );
        }
    }
    surface.strain = Some(out);
    Ok(())
}

/// Attach strain data by sampling the flow map over the surface's window
/// at every vertex.
pub fn attach_flow_strain(
    surface: &mut BarrierSurface,
    field: &VelocityField,
    cfg: &IntegratorConfig,
) -> Result<()> {
    let (t0, t1) = (surface.t0, surface.t0 + surface.t);
    let strain: Result<Vec<VertexStrain>> = surface
        .mesh
        .vertices
        .par_iter()
        .map(|p| {
            let s = flow_map_sample(field, p, t0, t1, cfg)?;
            let (sigma, _) = singular_values(&s.grad_f);
            Ok(VertexStrain {
                lambda: sigma.map(|v| v * v),
                det: s.grad_f.determinant(),
            })
        })
        .collect();
    surface.strain = Some(strain?);
    Ok(())
}

/// Area of the advected surface predicted from strain data on the initial
/// surface: each triangle's area weighted by the mean vertex weight.
pub fn predicted_area(surface: &BarrierSurface, model: AreaModel) -> Result<f64> {
    let strain = surface
        .strain
        .as_ref()
        .ok_or_else(|| LcsError::InvalidArgument("surface has no strain data".into()))?;
    let mut total = 0.0;
    for f in &surface.mesh.faces {
        let w = f.iter().map(|&i| model.weight(&strain[i])).sum::<f64>() / 3.0;
        if !w.is_finite() {
            return Err(LcsError::NonFinite("area weight"));
        }
        total += w * surface.mesh.triangle_area(f);
    }
    Ok(total)
}

/// Advect every vertex from the surface's current time to `t1`.
pub fn advect_surface(
    field: &VelocityField,
    surface: &BarrierSurface,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<BarrierSurface> {
    let vertices: Result<Vec<Vec3>> = surface
        .mesh
        .vertices
        .par_iter()
        .map(|p| advect_point(field, p, surface.time, t1, cfg))
        .collect();
    let mut out = surface.clone();
    out.mesh.vertices = vertices?;
    out.time = t1;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::ShearProfiles;
    use std::f64::consts::{PI, TAU};

    fn ring(r: f64, z: f64, n: usize, phase: f64) -> Vec<Vec3> {
        (0..=n)
            .map(|k| {
                let a = phase + TAU * k as f64 / n as f64;
                Vec3::new(r * a.cos(), r * a.sin(), z)
            })
            .collect()
    }

    #[test]
    fn cylinder_area_and_topology() {
        let h = 0.3;
        let m = 200;
        let s = surface_from_curves(
            LineKind::ShearPlus,
            &[0.0, h],
            &[ring(1.0, 0.0, 97, 0.0), ring(1.0, h, 131, 0.4)],
            &[],
            true,
            m,
            0.0,
            1.0,
        )
        .unwrap();
        assert_eq!(s.mesh.faces.len(), 2 * m);
        let expected = TAU * h;
        // inscribed polygon deficit is O(m^-2)
        assert!((s.mesh.area() - expected).abs() / expected < 1e-3);
        let r = s.mesh.edge_report();
        assert_eq!(r.non_manifold, 0);
        assert_eq!(r.boundary, 2 * m);
        assert!(s.mesh.is_manifold());
    }

    #[test]
    fn seam_alignment_undoes_shift_and_reversal() {
        let m = 64;
        let a = ring(1.0, 0.0, 64, 0.0);
        let mut b = ring(1.0, 0.1, 64, 1.3);
        b.reverse();
        let s = surface_from_curves(
            LineKind::ShearPlus,
            &[0.0, 0.1],
            &[a, b],
            &[],
            true,
            m,
            0.0,
            1.0,
        )
        .unwrap();
        for k in 0..m {
            let d = s.curve(1)[k] - s.curve(0)[k];
            assert!((d[0].powi(2) + d[1].powi(2)).sqrt() < 0.06, "vertex {k}");
        }
    }

    #[test]
    fn strip_area() {
        let a = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)];
        let b = vec![Vec3::new(1.0, 0.5, 0.0), Vec3::new(0.0, 0.5, 0.0)];
        let s = surface_from_curves(
            LineKind::Strain,
            &[0.0, 1.0],
            &[a, b],
            &[],
            false,
            11,
            0.0,
            1.0,
        )
        .unwrap();
        assert!((mesh_area(&s) - 0.5).abs() < 1e-12);
        assert_eq!(s.mesh.faces.len(), 20);
        assert!(s.mesh.is_manifold());
    }

    #[test]
    fn degenerate_curve_rejected() {
        let a = vec![Vec3::zeros(); 3];
        let b = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)];
        let r = surface_from_curves(
            LineKind::Strain,
            &[0.0, 1.0],
            &[a, b],
            &[],
            false,
            5,
            0.0,
            1.0,
        );
        assert!(matches!(r, Err(LcsError::DegenerateCurve(_))));
    }

    #[test]
    fn resample_is_uniform() {
        let pts = ring(2.0, 0.0, 10, 0.0);
        let (r, _) = resample_polyline(&pts, &[], true, 40).unwrap();
        let d: Vec<f64> = (0..40).map(|k| (r[(k + 1) % 40] - r[k]).norm()).collect();
        let mean = d.iter().sum::<f64>() / 40.0;
        // chords straddling a corner of the decagon are slightly shorter
        assert!(d.iter().all(|x| (x - mean).abs() < 0.05 * mean));
    }

    #[test]
    fn identity_flow_predicts_initial_area() {
        let a = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)];
        let b = vec![Vec3::new(0.0, 1.0, 0.0), Vec3::new(1.0, 1.0, 0.0)];
        let mut s = surface_from_curves(
            LineKind::Strain,
            &[0.0, 1.0],
            &[a, b],
            &[],
            false,
            5,
            0.0,
            1.0,
        )
        .unwrap();
        attach_flow_strain(&mut s, &VelocityField::zero(), &IntegratorConfig::default()).unwrap();
        for model in [
            AreaModel::Shear,
            AreaModel::Repelling,
            AreaModel::Attracting,
        ] {
            assert!((predicted_area(&s, model).unwrap() - 1.0).abs() < 1e-12);
        }
        s.strain = None;
        assert!(predicted_area(&s, AreaModel::Shear).is_err());
    }

    #[test]
    fn shear_patch_keeps_area() {
        let field = VelocityField::parallel_shear(ShearProfiles::new(
            |z: f64, t: f64| z.sin() + 0.3 * t.cos(),
            |z: f64, _| 0.5 * z * z,
            |t: f64| 0.2 * (PI * t).sin(),
        ));
        let rows: Vec<Vec<Vec3>> = (0..5)
            .map(|r| {
                (0..5)
                    .map(|c| Vec3::new(c as f64 * 0.25, r as f64 * 0.25, 0.7))
                    .collect()
            })
            .collect();
        let s1: Vec<f64> = (0..5).map(|r| r as f64).collect();
        let s =
            surface_from_curves(LineKind::ShearPlus, &s1, &rows, &[], false, 9, 0.0, 2.0).unwrap();
        let moved = advect_surface(&field, &s, 2.0, &IntegratorConfig::default()).unwrap();
        assert_eq!(moved.mesh.faces, s.mesh.faces);
        assert!((mesh_area(&moved) - mesh_area(&s)).abs() < 1e-9);
    }

    #[test]
    fn tilted_shear_patch_keeps_area() {
        let field = VelocityField::parallel_shear(ShearProfiles::linear_u(0.8));
        let cfg = IntegratorConfig::default();
        let center = Vec3::new(0.3, -0.2, 0.5);
        let sample = crate::integrator::flow_map_sample(&field, &center, 0.0, 2.0, &cfg).unwrap();
        let frame = crate::strain::eigen_frame(&sample.c, 1e-9).unwrap();
        let normals = crate::strain::shear_normals(&frame).unwrap();
        let area_ratio = |normal: &Vec3| {
            let rows = plane_patch(&center, normal, 0.5, 6).unwrap();
            let s1: Vec<f64> = (0..rows.len()).map(|r| r as f64).collect();
            let s = surface_from_curves(LineKind::ShearPlus, &s1, &rows, &[], false, 6, 0.0, 2.0)
                .unwrap();
            let moved = advect_surface(&field, &s, 2.0, &cfg).unwrap();
            mesh_area(&moved) / mesh_area(&s)
        };
        for n in [normals.n_plus, normals.n_minus] {
            assert!((area_ratio(&n) - 1.0).abs() < 1e-9);
        }
        // A patch normal to the strongest stretching shrinks by 1/sqrt(lambda3).
        let expected = 1.0 / frame.lambda3().sqrt();
        assert!((area_ratio(&frame.xi3()) - expected).abs() < 1e-9);
        assert!(expected < 0.9);
    }

    #[test]
    fn patch_is_orthogonal_to_normal() {
        let n = Vec3::new(1.0, 2.0, -0.5);
        let rows = plane_patch(&Vec3::new(1.0, 1.0, 1.0), &n, 0.2, 3).unwrap();
        for p in rows.iter().flatten() {
            assert!((p - Vec3::new(1.0, 1.0, 1.0)).dot(&n).abs() < 1e-12);
        }
        assert!(((rows[0][0] - rows[2][2]).norm() - 0.4 * 2f64.sqrt()).abs() < 1e-12);
        assert!(plane_patch(&Vec3::zeros(), &Vec3::zeros(), 0.1, 3).is_err());
    }

    #[test]
    fn zero_field_leaves_surface() {
        let s = surface_from_curves(
            LineKind::ShearPlus,
            &[0.0, 0.2],
            &[ring(1.0, 0.0, 20, 0.0), ring(1.0, 0.2, 20, 0.0)],
            &[],
            true,
            16,
            0.0,
            1.0,
        )
        .unwrap();
        let moved = advect_surface(
            &VelocityField::zero(),
            &s,
            3.0,
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert_eq!(moved.mesh.vertices, s.mesh.vertices);
        assert_eq!(moved.time, 3.0);
    }
}
