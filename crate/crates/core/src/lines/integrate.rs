//! Reduced-line integration on a deformation grid.

use rayon::prelude::*;

use super::geometry::{closing_partner, turn_at, VertexIndex};
use super::{dedup_lines, LineConfig, LineKind, ReducedLine, TerminationReason};
use crate::error::{LcsError, Result};
use crate::strain::{align_frame, shear_weights, DeformationGrid, EigenFrame, HelicityField};
use crate::Vec3;

const OUTSIDE: &str = "outside the sampled window";
const MASKED: &str = "masked frame data in the interpolation cell";
const VANISHING: &str = "reduced vector vanishes";

/// Frame data bilinearly interpolated inside one grid cell. Corner frames
/// are aligned to the cell's lower-left corner before interpolation.
#[derive(Clone, Copy, Debug)]
pub struct InterpolatedFrame {
    pub xi1: Vec3,
    pub xi3: Vec3,
    pub lambda1: f64,
    pub lambda3: f64,
    corners: [usize; 4],
    weights: [f64; 4],
    /// Product of the `xi1` and `xi3` flips applied at each corner; relates
    /// the interpolated `n±` labelling to each corner's stored one.
    flips: [f64; 4],
}

impl InterpolatedFrame {
    /// Interpolated helicity for `kind`. For shear kinds `family` is `+1`
    /// for `n+` of this frame and `-1` for `n-`.
    pub fn helicity(&self, grid: &DeformationGrid, kind: LineKind, family: f64) -> f64 {
        let mut h = 0.0;
        for c in 0..4 {
            let field = match kind {
                LineKind::Strain | LineKind::Stretch => kind.helicity_field(),
                _ if family * self.flips[c] > 0.0 => HelicityField::NPlus,
                _ => HelicityField::NMinus,
            };
            h += self.weights[c] * grid.helicity.get(field)[self.corners[c]];
        }
        h
    }
}

fn outside(x: f64, y: f64) -> LcsError {
    LcsError::DegeneratePoint {
        x,
        y,
        reason: OUTSIDE,
    }
}

pub fn interpolate_frame(grid: &DeformationGrid, x: f64, y: f64) -> Result<InterpolatedFrame> {
    let fx = (x - grid.x_min) / grid.hx;
    let fy = (y - grid.y_min) / grid.hy;
    let (mx, my) = ((grid.nx - 1) as f64, (grid.ny - 1) as f64);
    if !(fx >= 0.0 && fx <= mx && fy >= 0.0 && fy <= my) {
        return Err(outside(x, y));
    }
    let i = (fx.floor() as usize).min(grid.nx - 2);
    let j = (fy.floor() as usize).min(grid.ny - 2);
    let (u, v) = (fx - i as f64, fy - j as f64);
    let corners = [
        grid.index(i, j),
        grid.index(i + 1, j),
        grid.index(i, j + 1),
        grid.index(i + 1, j + 1),
    ];
    let weights = [(1.0 - u) * (1.0 - v), u * (1.0 - v), (1.0 - u) * v, u * v];
    let masked = || LcsError::DegeneratePoint {
        x,
        y,
        reason: MASKED,
    };
    let reference: EigenFrame = grid.main[corners[0]].frame().ok_or_else(masked)?;
    let mut xi1 = Vec3::zeros();
    let mut xi3 = Vec3::zeros();
    let (mut l1, mut l3) = (0.0, 0.0);
    let mut flips = [1.0; 4];
    for c in 0..4 {
        let f = grid.main[corners[c]].frame().ok_or_else(masked)?;
        let a = align_frame(&f, &reference);
        let s1 = if a.xi[0] == f.xi[0] { 1.0 } else { -1.0 };
        let s3 = if a.xi[2] == f.xi[2] { 1.0 } else { -1.0 };
        flips[c] = s1 * s3;
        xi1 += weights[c] * a.xi[0];
        xi3 += weights[c] * a.xi[2];
        l1 += weights[c] * f.lambda[0];
        l3 += weights[c] * f.lambda[2];
    }
    let xi3 = xi3.try_normalize(1e-12).ok_or_else(masked)?;
    let xi1 = (xi1 - xi3 * xi3.dot(&xi1))
        .try_normalize(1e-12)
        .ok_or_else(masked)?;
    Ok(InterpolatedFrame {
        xi1,
        xi3,
        lambda1: l1,
        lambda3: l3,
        corners,
        weights,
        flips,
    })
}

/// `n_Π × v` for the plane normal `e_z`.
fn cross_normal(v: &Vec3) -> Vec3 {
    Vec3::new(-v[1], v[0], 0.0)
}

/// Unnormalized reduced vector at `(x, y)`: `n_Π × xi3`, `n_Π × xi1` or
/// `n_Π × n±` of the interpolated frame.
pub fn reduced_vector(kind: LineKind, grid: &DeformationGrid, x: f64, y: f64) -> Result<Vec3> {
    let f = interpolate_frame(grid, x, y)?;
    let (a, b) = shear_weights(f.lambda1, f.lambda3);
    let v = match kind {
        LineKind::Strain => cross_normal(&f.xi3),
        LineKind::Stretch => cross_normal(&f.xi1),
        LineKind::ShearPlus => cross_normal(&(a * f.xi1 + b * f.xi3)),
        LineKind::ShearMinus => cross_normal(&(a * f.xi1 - b * f.xi3)),
    };
    if v.norm() < 1e-9 {
        return Err(LcsError::DegeneratePoint {
            x,
            y,
            reason: VANISHING,
        });
    }
    Ok(v)
}

/// Unit candidate directions with their `n±` family (`+1`/`-1`; always `+1`
/// for strain and stretch kinds), in a fixed order.
fn candidates(kind: LineKind, f: &InterpolatedFrame) -> Option<Vec<(Vec3, f64)>> {
    let unit = |v: Vec3| v.try_normalize(1e-9);
    match kind {
        LineKind::Strain | LineKind::Stretch => {
            let xi = if kind == LineKind::Strain {
                f.xi3
            } else {
                f.xi1
            };
            let t = unit(cross_normal(&xi))?;
            Some(vec![(t, 1.0), (-t, 1.0)])
        }
        LineKind::ShearPlus | LineKind::ShearMinus => {
            let (a, b) = shear_weights(f.lambda1, f.lambda3);
            let tp = unit(cross_normal(&(a * f.xi1 + b * f.xi3)))?;
            let tm = unit(cross_normal(&(a * f.xi1 - b * f.xi3)))?;
            Some(vec![(tp, 1.0), (tm, -1.0), (-tp, 1.0), (-tm, -1.0)])
        }
    }
}

struct Direction {
    dir: Vec3,
    family: f64,
    frame: InterpolatedFrame,
}

/// Candidate with maximal dot product against `prev`; the first candidate
/// in the fixed order wins exact ties.
fn matched_direction(
    grid: &DeformationGrid,
    kind: LineKind,
    p: &Vec3,
    prev: &Vec3,
) -> Result<Direction> {
    let frame = interpolate_frame(grid, p[0], p[1])?;
    let cands = candidates(kind, &frame).ok_or(LcsError::DegeneratePoint {
        x: p[0],
        y: p[1],
        reason: VANISHING,
    })?;
    let mut best = 0;
    for k in 1..cands.len() {
        if cands[k].0.dot(prev) > cands[best].0.dot(prev) {
            best = k;
        }
    }
    Ok(Direction {
        dir: cands[best].0,
        family: cands[best].1,
        frame,
    })
}

fn reason_of(e: &LcsError) -> TerminationReason {
    match e {
        LcsError::DegeneratePoint { reason, .. } if *reason == OUTSIDE => {
            TerminationReason::LeftDomain
        }
        _ => TerminationReason::Degenerate,
    }
}

/// A seed point with the helicity of its initial direction field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Seed {
    pub position: Vec3,
    pub helicity: f64,
}

/// Initial unit direction, family and helicity at a seed.
fn initial_direction(grid: &DeformationGrid, kind: LineKind, p: &Vec3) -> Result<(Vec3, f64, f64)> {
    let frame = interpolate_frame(grid, p[0], p[1])?;
    let cands = candidates(kind, &frame).ok_or(LcsError::DegeneratePoint {
        x: p[0],
        y: p[1],
        reason: VANISHING,
    })?;
    let (dir, family) = match kind {
        LineKind::ShearMinus => cands[1],
        _ => cands[0],
    };
    Ok((dir, family, frame.helicity(grid, kind, family)))
}

/// Cell-centred seed lattice of `nx × ny` points over the grid window.
pub fn seed_lattice(grid: &DeformationGrid, nx: usize, ny: usize) -> Vec<Vec3> {
    let (w, h) = (grid.x_max() - grid.x_min, grid.y_max() - grid.y_min);
    let mut out = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            out.push(Vec3::new(
                grid.x_min + (i as f64 + 0.5) * w / nx as f64,
                grid.y_min + (j as f64 + 0.5) * h / ny as f64,
                grid.s1,
            ));
        }
    }
    out
}

/// Seeds with interpolated `|H| < eps0`; masked seeds are dropped.
pub fn seed_filter(grid: &DeformationGrid, seeds: &[Vec3], kind: LineKind, eps0: f64) -> Vec<Seed> {
    seeds
        .iter()
        .filter_map(|p| {
            let (_, _, h) = initial_direction(grid, kind, p).ok()?;
            (h.abs() < eps0).then_some(Seed {
                position: Vec3::new(p[0], p[1], grid.s1),
                helicity: h,
            })
        })
        .collect()
}

struct Branch {
    vertices: Vec<Vec3>,
    helicity: Vec<f64>,
    reason: TerminationReason,
    closure: Option<(usize, usize)>,
}

fn integrate_branch(
    grid: &DeformationGrid,
    kind: LineKind,
    cfg: &LineConfig,
    seed: Vec3,
    dir0: Vec3,
    h0: f64,
) -> Branch {
    let step = cfg.step;
    let w = cfg.window_vertices();
    let closure = cfg.closure();
    let mut b = Branch {
        vertices: vec![seed],
        helicity: vec![h0],
        reason: TerminationReason::MaxLength,
        closure: None,
    };
    let mut turning = vec![0.0];
    let mut index = VertexIndex::new(cfg.closure_tol);
    index.insert(&seed, 0);
    let mut window_sum = h0.abs();
    let mut prev = dir0;
    let mut arclength = 0.0;
    let mut next_d1: Option<Vec3> = None;
    loop {
        if arclength + step > cfg.max_arclength * (1.0 + 1e-12) {
            b.reason = TerminationReason::MaxLength;
            return b;
        }
        let x = *b.vertices.last().unwrap();
        let stage = |p: Vec3, prev: &Vec3| matched_direction(grid, kind, &p, prev).map(|d| d.dir);
        let rk = (|| -> Result<Vec3> {
            let d1 = match next_d1 {
                Some(d) => d,
                None => stage(x, &prev)?,
            };
            let d2 = stage(x + 0.5 * step * d1, &d1)?;
            let d3 = stage(x + 0.5 * step * d2, &d2)?;
            let d4 = stage(x + step * d3, &d3)?;
            (d1 + 2.0 * d2 + 2.0 * d3 + d4)
                .try_normalize(1e-12)
                .ok_or(LcsError::DegeneratePoint {
                    x: x[0],
                    y: x[1],
                    reason: VANISHING,
                })
        })();
        let dir = match rk {
            Ok(d) => d,
            Err(e) => {
                b.reason = reason_of(&e);
                return b;
            }
        };
        let mut xn = x + step * dir;
        xn[2] = grid.s1;
        let at_new = match matched_direction(grid, kind, &xn, &dir) {
            Ok(d) => d,
            Err(e) => {
                b.reason = reason_of(&e);
                return b;
            }
        };
        let h = at_new.frame.helicity(grid, kind, at_new.family);
        if !h.is_finite() {
            b.reason = TerminationReason::Degenerate;
            return b;
        }
        let n = b.vertices.len();
        let dropped = if n >= w { b.helicity[n - w].abs() } else { 0.0 };
        let avg = (window_sum + h.abs() - dropped) / (n + 1).min(w) as f64;
        if avg > cfg.eps0 {
            b.reason = TerminationReason::HelicityExceeded;
            return b;
        }
        window_sum += h.abs() - dropped;
        b.vertices.push(xn);
        b.helicity.push(h);
        arclength += step;
        let j = b.vertices.len() - 1;
        let t = if j >= 2 {
            turning[j - 1] + turn_at(&b.vertices, j - 1)
        } else {
            0.0
        };
        turning.push(t);
        if let Some(i) = closing_partner(&b.vertices, &turning, &index, j, &closure) {
            b.closure = Some((i, j));
            b.reason = TerminationReason::Closed;
            return b;
        }
        index.insert(&xn, j);
        prev = dir;
        next_d1 = Some(at_new.dir);
    }
}

fn closed_line(kind: LineKind, s1: f64, b: Branch, (i, j): (usize, usize)) -> ReducedLine {
    let mut vertices = b.vertices[i..=j].to_vec();
    let mut helicity = b.helicity[i..=j].to_vec();
    *vertices.last_mut().unwrap() = vertices[0];
    *helicity.last_mut().unwrap() = helicity[0];
    ReducedLine {
        kind,
        s1,
        vertices,
        helicity,
        closed: true,
        termination: TerminationReason::Closed,
        start_termination: TerminationReason::Closed,
        seed: None,
    }
}

/// Integrate a reduced line through `seed` in both directions with RK4 in
/// arclength, matching each stage direction to the previous one.
pub fn integrate_line(
    grid: &DeformationGrid,
    seed: &Vec3,
    kind: LineKind,
    cfg: &LineConfig,
) -> ReducedLine {
    let s = Vec3::new(seed[0], seed[1], grid.s1);
    let (dir0, _, h0) = match initial_direction(grid, kind, &s) {
        Ok(v) => v,
        Err(e) => return ReducedLine::empty(kind, grid.s1, reason_of(&e)),
    };
    if !h0.is_finite() {
        return ReducedLine::empty(kind, grid.s1, TerminationReason::Degenerate);
    }
    let fwd = integrate_branch(grid, kind, cfg, s, dir0, h0);
    if let Some(c) = fwd.closure {
        return closed_line(kind, grid.s1, fwd, c);
    }
    let bwd = integrate_branch(grid, kind, cfg, s, -dir0, h0);
    if let Some(c) = bwd.closure {
        return closed_line(kind, grid.s1, bwd, c);
    }
    let seed = bwd.vertices.len() - 1;
    let mut vertices: Vec<Vec3> = bwd.vertices[1..].iter().rev().copied().collect();
    let mut helicity: Vec<f64> = bwd.helicity[1..].iter().rev().copied().collect();
    vertices.extend_from_slice(&fwd.vertices);
    helicity.extend_from_slice(&fwd.helicity);
    ReducedLine {
        kind,
        s1: grid.s1,
        vertices,
        helicity,
        closed: false,
        termination: fwd.reason,
        start_termination: bwd.reason,
        seed: Some(seed),
    }
}

const BATCH: usize = 64;

/// Full extraction on one plane: seed lattice, helicity filter, batched
/// parallel integration and deduplication. Seeds within `d0` of a line from
/// an earlier batch are skipped; batches are fixed so the result does not
/// depend on the worker count.
pub fn extract_lines(
    grid: &DeformationGrid,
    kind: LineKind,
    cfg: &LineConfig,
) -> Result<Vec<ReducedLine>> {
    cfg.validate()?;
    let lattice = seed_lattice(grid, cfg.seed_nx, cfg.seed_ny);
    let seeds = seed_filter(grid, &lattice, kind, cfg.eps0);
    let mut lines: Vec<ReducedLine> = Vec::new();
    let mut index = VertexIndex::new(cfg.d0);
    let mut all_vertices: Vec<Vec3> = Vec::new();
    for batch in seeds.chunks(BATCH) {
        let todo: Vec<&Seed> = batch
            .iter()
            .filter(|s| {
                !index
                    .near(&s.position)
                    .any(|k| (all_vertices[k] - s.position).norm() <= cfg.d0)
            })
            .collect();
        let new: Vec<ReducedLine> = todo
            .par_iter()
            .map(|s| integrate_line(grid, &s.position, kind, cfg))
            .collect();
        for l in new {
            if l.len() < 2 {
                continue;
            }
            for p in &l.vertices {
                index.insert(p, all_vertices.len());
                all_vertices.push(*p);
            }
            lines.push(l);
        }
    }
    log::debug!(
        "{} seeds passed the helicity filter, {} lines before dedup",
        seeds.len(),
        lines.len()
    );
    Ok(dedup_lines(lines, cfg.d0, cfg.hausdorff))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strain::{canonical_sign, PlaneSpec};
    use std::f64::consts::TAU;

    fn frame(xi1: Vec3, xi3: Vec3) -> EigenFrame {
        let xi2 = xi3.cross(&xi1);
        EigenFrame {
            lambda: [0.5, 1.0, 2.0],
            xi: [
                canonical_sign(xi1),
                canonical_sign(xi2),
                canonical_sign(xi3),
            ],
            in_u: true,
        }
    }

    fn constant_grid() -> DeformationGrid {
        let plane = PlaneSpec::new(0.0, 11, 11, [0.0, 1.0], [0.0, 1.0]);
        DeformationGrid::from_frames(&plane, |_, _| Some((frame(Vec3::z(), Vec3::x()), [0.0; 4])))
            .unwrap()
    }

    fn circle_grid() -> DeformationGrid {
        let plane = PlaneSpec::new(0.0, 41, 41, [-1.0, 1.0], [-1.0, 1.0]);
        DeformationGrid::from_frames(&plane, |x, y| {
            let r = Vec3::new(x, y, 0.0);
            let radial = r.try_normalize(1e-9).unwrap_or(Vec3::x());
            Some((frame(Vec3::z(), radial), [0.0; 4]))
        })
        .unwrap()
    }

    #[test]
    fn reduced_vector_basics() {
        let g = constant_grid();
        let v = reduced_vector(LineKind::Strain, &g, 0.5, 0.5).unwrap();
        assert!((v - Vec3::y()).norm() < 1e-14);
        assert!(reduced_vector(LineKind::Strain, &g, 1.5, 0.5).is_err());
        let plane = PlaneSpec::new(0.0, 8, 8, [0.0, 1.0], [0.0, 1.0]);
        let vertical = DeformationGrid::from_frames(&plane, |_, _| {
            Some((frame(Vec3::x(), Vec3::z()), [0.0; 4]))
        })
        .unwrap();
        assert!(matches!(
            reduced_vector(LineKind::Strain, &vertical, 0.5, 0.5),
            Err(LcsError::DegeneratePoint { .. })
        ));
    }

    #[test]
    fn constant_field_gives_straight_line() {
        let g = constant_grid();
        let cfg = LineConfig::with_step(0.01);
        let l = integrate_line(&g, &Vec3::new(0.5, 0.5, 0.0), LineKind::Strain, &cfg);
        assert!(!l.closed);
        assert_eq!(l.termination, TerminationReason::LeftDomain);
        assert_eq!(l.start_termination, TerminationReason::LeftDomain);
        for p in &l.vertices {
            assert!((p[0] - 0.5).abs() < 1e-12);
        }
        assert!(l.vertices.first().unwrap()[1] < 0.02);
        assert!(l.vertices.last().unwrap()[1] > 0.98);
        for w in l.vertices.windows(2) {
            assert!(((w[1] - w[0]).norm() - 0.01).abs() < 1e-12);
        }
    }

    #[test]
    fn circle_field_closes() {
        let g = circle_grid();
        let cfg = LineConfig::with_step(0.005);
        let l = integrate_line(&g, &Vec3::new(0.5, 0.0, 0.0), LineKind::Strain, &cfg);
        assert!(l.closed);
        assert!((l.winding().abs() - TAU).abs() < 0.2, "{}", l.winding());
        for p in &l.vertices {
            assert!((p.norm() - 0.5).abs() < 5e-3, "{}", p.norm());
        }
        let mut copy = l.clone();
        assert!(copy.detect_closed(&cfg));
    }

    #[test]
    fn helicity_threshold_stops_lines() {
        let plane = PlaneSpec::new(0.0, 21, 21, [0.0, 1.0], [0.0, 1.0]);
        let g = DeformationGrid::from_frames(&plane, |_, y| {
            Some((frame(Vec3::z(), Vec3::x()), [y, y, y, y]))
        })
        .unwrap();
        let mut cfg = LineConfig::with_step(0.01);
        cfg.eps0 = 0.3;
        let l = integrate_line(&g, &Vec3::new(0.5, 0.1, 0.0), LineKind::Strain, &cfg);
        assert_eq!(l.termination, TerminationReason::HelicityExceeded);
        assert!(super::super::running_average_max(&l.helicity, cfg.window_vertices()) <= 0.3);
        let seeds = seed_lattice(&g, 4, 4);
        assert_eq!(
            seed_filter(&g, &seeds, LineKind::Strain, f64::INFINITY).len(),
            16
        );
        assert_eq!(seed_filter(&g, &seeds, LineKind::Strain, 0.0).len(), 0);
        assert_eq!(seed_filter(&g, &seeds, LineKind::Strain, 0.5).len(), 8);
    }

    #[test]
    fn masked_seed_gives_empty_line() {
        let plane = PlaneSpec::new(0.0, 8, 8, [0.0, 1.0], [0.0, 1.0]);
        let g = DeformationGrid::from_frames(&plane, |x, _| {
            (x > 0.5).then(|| (frame(Vec3::z(), Vec3::x()), [0.0; 4]))
        })
        .unwrap();
        let l = integrate_line(
            &g,
            &Vec3::new(0.2, 0.5, 0.0),
            LineKind::Strain,
            &LineConfig::with_step(0.01),
        );
        assert!(l.is_empty());
        assert_eq!(l.termination, TerminationReason::Degenerate);
    }

    #[test]
    fn shear_lines_on_circle_field() {
        // xi1 tangential, xi3 radial with equal weights rotated by 45 degrees
        let plane = PlaneSpec::new(0.0, 41, 41, [-1.0, 1.0], [-1.0, 1.0]);
        let g = DeformationGrid::from_frames(&plane, |x, y| {
            let radial = Vec3::new(x, y, 0.0)
                .try_normalize(1e-9)
                .unwrap_or(Vec3::x());
            let tangential = Vec3::z().cross(&radial);
            Some((frame(tangential, radial), [0.0; 4]))
        })
        .unwrap();
        let cfg = LineConfig::with_step(0.01);
        let l = integrate_line(&g, &Vec3::new(0.3, 0.0, 0.0), LineKind::ShearPlus, &cfg);
        assert!(l.len() > 10);
        // away from the singular centre, consecutive segments never turn by
        // more than 30 degrees
        for w in l
            .vertices
            .windows(3)
            .filter(|w| w.iter().all(|p| p.norm() > 0.15))
        {
            let a = (w[1] - w[0]).normalize();
            let b = (w[2] - w[1]).normalize();
            assert!(a.dot(&b) > 30f64.to_radians().cos());
        }
    }

    #[test]
    fn extraction_dedups_and_is_deterministic() {
        let g = circle_grid();
        let mut cfg = LineConfig::with_step(0.01);
        cfg.seed_nx = 12;
        cfg.seed_ny = 12;
        cfg.eps0 = 1.0;
        let a = extract_lines(&g, LineKind::Strain, &cfg).unwrap();
        assert!(!a.is_empty());
        assert!(a
            .iter()
            .all(|l| l.closed || l.termination != TerminationReason::Closed));
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        let b = pool.install(|| extract_lines(&g, LineKind::Strain, &cfg).unwrap());
        assert_eq!(a, b);
        let again = dedup_lines(a.clone(), cfg.d0, cfg.hausdorff);
        assert_eq!(again, a);
    }
}
