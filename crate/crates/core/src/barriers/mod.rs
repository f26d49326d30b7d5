//! Barrier surfaces assembled from reduced lines on a family of planes,
//! plus the verification experiments run on them.

mod experiments;
mod export;
mod surface;
mod torus;

pub use experiments::{
    perturbed_strainline_experiment, poincare_return, tracer_experiment, DriftStats,
    PerturbedStrainline, ReturnStats, SeedClass, TracerConfig, TracerExperiment, TracerSummary,
};
pub use export::{write_ply, write_trajectories_csv, write_vtk};
pub use surface::{
    advect_surface, attach_flow_strain, attach_grid_strain, build_surface, grid_strain_at,
    mesh_area, plane_patch, predicted_area, resample_polyline, surface_from_curves, sweep_surface,
    AreaModel, BarrierSurface, EdgeReport, Embedding, Mesh, VertexStrain,
};
pub use torus::{torus_embed, torus_map, torus_unmap, CenterCurve};

use crate::error::{LcsError, Result};
use crate::flow::VelocityField;
use crate::lines::{
    extract_lines, hausdorff_distance, HausdorffForm, LineConfig, LineKind, ReducedLine,
};
use crate::strain::{sample_plane, GridConfig, PlaneSpec};
use crate::Vec3;
use serde::{Deserialize, Serialize};

/// Ordered `z = s1` planes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneFamily {
    s1: Vec<f64>,
}

impl PlaneFamily {
    pub fn new(s1: Vec<f64>) -> Result<Self> {
        if s1.is_empty() {
            return Err(LcsError::InvalidArgument("plane family is empty".into()));
        }
        if s1.iter().any(|s| !s.is_finite()) || s1.windows(2).any(|w| w[1] <= w[0]) {
            return Err(LcsError::InvalidArgument(
                "plane values must be finite and strictly increasing".into(),
            ));
        }
        Ok(PlaneFamily { s1 })
    }

    /// `count` planes `start, start + step, ...`.
    pub fn uniform(start: f64, step: f64, count: usize) -> Result<Self> {
        Self::new((0..count).map(|k| start + k as f64 * step).collect())
    }

    /// `count` planes evenly covering one period `[0, 2π)`.
    pub fn periodic(count: usize) -> Result<Self> {
        let step = std::f64::consts::TAU / count.max(1) as f64;
        Self::uniform(0.0, step, count)
    }

    pub fn values(&self) -> &[f64] {
        &self.s1
    }

    pub fn len(&self) -> usize {
        self.s1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s1.is_empty()
    }
}

/// Lines extracted on one plane, or the reason the plane failed.
#[derive(Clone, Debug)]
pub struct PlaneOutcome {
    pub s1: f64,
    pub lines: std::result::Result<Vec<ReducedLine>, String>,
}

/// Run grid sampling and line extraction on every plane of `family`. The
/// plane geometry comes from `template`; its `s1` is replaced per plane.
/// Failures are recorded per plane and the sweep continues.
#[allow(clippy::too_many_arguments)]
pub fn sweep_planes(
    field: &VelocityField,
    family: &PlaneFamily,
    template: &PlaneSpec,
    kind: LineKind,
    grid_cfg: &GridConfig,
    line_cfg: &LineConfig,
    t0: f64,
    t: f64,
) -> Vec<PlaneOutcome> {
    family
        .values()
        .iter()
        .map(|&s1| {
            let plane = PlaneSpec { s1, ..*template };
            let lines = sample_plane(field, &plane, t0, t, grid_cfg)
                .and_then(|g| extract_lines(&g, kind, line_cfg))
                .map_err(|e| {
                    log::warn!("plane s1={s1}: {e}");
                    e.to_string()
                });
            PlaneOutcome { s1, lines }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    /// Maximal centroid jump between planes, relative to the mean radius of
    /// the current curve.
    pub jump_factor: f64,
    pub hausdorff: HausdorffForm,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            jump_factor: 0.2,
            hausdorff: HausdorffForm::Sum,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainEnd {
    /// Reached the last plane.
    LastPlane,
    /// The next plane had no unused curve of the same type.
    NoCandidate,
    /// The nearest candidate was farther than the jump threshold.
    JumpExceeded,
}

/// Curves matched across consecutive planes, as `(plane, line)`
/// indices into the input.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chain {
    pub members: Vec<(usize, usize)>,
    pub end: ChainEnd,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn lines<'a>(&self, planes: &'a [Vec<ReducedLine>]) -> Vec<&'a ReducedLine> {
        self.members.iter().map(|&(p, l)| &planes[p][l]).collect()
    }
}

fn canonical_order(lines: &[ReducedLine], closed: bool) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..lines.len())
        .filter(|&i| lines[i].closed == closed)
        .collect();
    let keys: Vec<(f64, f64, f64)> = lines
        .iter()
        .map(|l| {
            let c = l.centroid();
            (c[0], c[1], l.length())
        })
        .collect();
    idx.sort_by(|&a, &b| {
        let (ka, kb) = (keys[a], keys[b]);
        ka.0.total_cmp(&kb.0)
            .then(ka.1.total_cmp(&kb.1))
            .then(ka.2.total_cmp(&kb.2))
    });
    idx
}

fn flat(p: Vec3) -> Vec3 {
    Vec3::new(p[0], p[1], 0.0)
}

/// Chain closed curves plane by plane. Each chain starts at a closed curve
/// of the first plane and takes, on every following plane, the unused
/// closed curve with the nearest centroid (in the plane coordinates). All
/// candidates within the jump threshold count as tied and the smallest
/// Hausdorff distance wins. Chains
/// are grown one after another in a canonical (centroid, length) order, so
/// the result does not depend on how lines are listed within a plane.
pub fn match_closed_curves(planes: &[Vec<ReducedLine>], cfg: &MatchConfig) -> Vec<Chain> {
    match_curves(planes, cfg, true)
}

/// [`match_closed_curves`] for open lines (reduced strainlines); closed
/// lines are ignored.
pub fn match_open_curves(planes: &[Vec<ReducedLine>], cfg: &MatchConfig) -> Vec<Chain> {
    match_curves(planes, cfg, false)
}

fn match_curves(planes: &[Vec<ReducedLine>], cfg: &MatchConfig, closed: bool) -> Vec<Chain> {
    if planes.is_empty() {
        return Vec::new();
    }
    let order: Vec<Vec<usize>> = planes.iter().map(|p| canonical_order(p, closed)).collect();
    let mut used: Vec<Vec<bool>> = planes.iter().map(|p| vec![false; p.len()]).collect();
    let mut chains = Vec::new();
    for &start in &order[0] {
        used[0][start] = true;
        let mut members = vec![(0, start)];
        let mut end = ChainEnd::LastPlane;
        for p in 1..planes.len() {
            let (cp, cl) = *members.last().unwrap();
            let current = &planes[cp][cl];
            let c0 = flat(current.centroid());
            let current_flat: Vec<Vec3> = current.vertices.iter().map(|&p| flat(p)).collect();
            let threshold = cfg.jump_factor * current.mean_radius();
            let cands: Vec<(usize, f64)> = order[p]
                .iter()
                .filter(|&&i| !used[p][i])
                .map(|&i| (i, (flat(planes[p][i].centroid()) - c0).norm()))
                .collect();
            if cands.is_empty() {
                end = ChainEnd::NoCandidate;
                break;
            }
            let nearest = cands.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
            if nearest > threshold {
                end = ChainEnd::JumpExceeded;
                break;
            }
            let mut best: Option<(f64, usize)> = None;
            for &(i, d) in &cands {
                if d > threshold {
                    continue;
                }
                let cand: Vec<Vec3> = planes[p][i].vertices.iter().map(|&q| flat(q)).collect();
                let h = hausdorff_distance(&current_flat, &cand, cfg.hausdorff);
                if best.is_none_or(|(bh, _)| h < bh) {
                    best = Some((h, i));
                }
            }
            let (_, pick) = best.expect("nearest candidate is within the threshold");
            used[p][pick] = true;
            members.push((p, pick));
        }
        chains.push(Chain { members, end });
    }
    chains
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lines::TerminationReason;
    use std::f64::consts::TAU;

    pub(crate) fn circle(c: [f64; 2], r: f64, z: f64, n: usize) -> ReducedLine {
        let mut vertices: Vec<Vec3> = (0..n)
            .map(|k| {
                let a = TAU * k as f64 / n as f64;
                Vec3::new(c[0] + r * a.cos(), c[1] + r * a.sin(), z)
            })
            .collect();
        vertices.push(vertices[0]);
        ReducedLine {
            kind: LineKind::ShearPlus,
            s1: z,
            helicity: vec![0.0; vertices.len()],
            vertices,
            closed: true,
            termination: TerminationReason::Closed,
            start_termination: TerminationReason::Closed,
            seed: None,
        }
    }

    #[test]
    fn family_rejects_unordered() {
        assert!(PlaneFamily::new(vec![0.0, 0.0]).is_err());
        assert!(PlaneFamily::new(vec![]).is_err());
        let f = PlaneFamily::uniform(0.0, 0.005, 21).unwrap();
        assert_eq!(f.len(), 21);
        assert!((f.values()[20] - 0.1).abs() < 1e-15);
        assert_eq!(PlaneFamily::periodic(150).unwrap().len(), 150);
    }

    #[test]
    fn identical_circles_form_one_chain() {
        let planes: Vec<Vec<ReducedLine>> = (0..5)
            .map(|k| vec![circle([1.0, 1.0], 0.5, k as f64 * 0.1, 64)])
            .collect();
        let chains = match_closed_curves(&planes, &MatchConfig::default());
        assert_eq!(chains.len(), 1);
        assert_eq!(chains[0].len(), 5);
        assert_eq!(chains[0].end, ChainEnd::LastPlane);
    }

    #[test]
    fn nested_circles_stay_pure() {
        let planes: Vec<Vec<ReducedLine>> = (0..4)
            .map(|k| {
                let z = k as f64 * 0.1;
                let wobble = 0.01 * k as f64;
                let mut v = vec![
                    circle([wobble, 0.0], 1.0, z, 64),
                    circle([-wobble, 0.0], 0.5, z, 64),
                ];
                if k % 2 == 1 {
                    v.reverse();
                }
                v
            })
            .collect();
        let chains = match_closed_curves(&planes, &MatchConfig::default());
        assert_eq!(chains.len(), 2);
        for ch in &chains {
            assert_eq!(ch.len(), 4);
            let radii: Vec<f64> = ch.lines(&planes).iter().map(|l| l.mean_radius()).collect();
            assert!(
                radii.iter().all(|r| (r - radii[0]).abs() < 1e-9),
                "{radii:?}"
            );
        }
    }

    #[test]
    fn missing_successor_ends_chain() {
        let mut planes: Vec<Vec<ReducedLine>> = (0..3)
            .map(|k| vec![circle([0.0, 0.0], 1.0, k as f64, 32)])
            .collect();
        planes.push(vec![]);
        planes.push(vec![circle([0.0, 0.0], 1.0, 4.0, 32)]);
        let chains = match_closed_curves(&planes, &MatchConfig::default());
        assert_eq!(chains.len(), 1);
        assert_eq!(chains[0].len(), 3);
        assert_eq!(chains[0].end, ChainEnd::NoCandidate);
    }

    #[test]
    fn far_jump_breaks_chain() {
        let planes = vec![
            vec![circle([0.0, 0.0], 1.0, 0.0, 32)],
            vec![circle([0.5, 0.0], 1.0, 0.1, 32)],
        ];
        let chains = match_closed_curves(&planes, &MatchConfig::default());
        assert_eq!(chains[0].len(), 1);
        assert_eq!(chains[0].end, ChainEnd::JumpExceeded);
    }

    #[test]
    fn no_closed_lines_gives_nothing() {
        let mut open = circle([0.0, 0.0], 1.0, 0.0, 32);
        open.closed = false;
        assert!(match_closed_curves(&[vec![open]], &MatchConfig::default()).is_empty());
        assert!(match_closed_curves(&[], &MatchConfig::default()).is_empty());
    }

    fn segment(y: f64, z: f64) -> ReducedLine {
        let vertices: Vec<Vec3> = (0..=20).map(|k| Vec3::new(k as f64 * 0.1, y, z)).collect();
        ReducedLine {
            kind: LineKind::Strain,
            s1: z,
            helicity: vec![0.0; vertices.len()],
            vertices,
            closed: false,
            termination: TerminationReason::MaxLength,
            start_termination: TerminationReason::MaxLength,
            seed: None,
        }
    }

    #[test]
    fn open_segments_chain_by_height() {
        let planes: Vec<Vec<ReducedLine>> = (0..4)
            .map(|k| {
                let z = k as f64 * 0.005;
                vec![segment(2.0 + 0.01 * k as f64, z), segment(0.0, z)]
            })
            .collect();
        let chains = match_open_curves(&planes, &MatchConfig::default());
        assert_eq!(chains.len(), 2);
        for c in &chains {
            assert_eq!(c.len(), 4);
            let first = c.members[0].1;
            assert!(c.members.iter().all(|&(_, l)| l == first));
        }
        assert!(match_closed_curves(&planes, &MatchConfig::default()).is_empty());
    }
}
