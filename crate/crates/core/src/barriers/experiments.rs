use super::surface::{resample_polyline, sweep_snapshots, BarrierSurface};
use super::torus::CenterCurve;
use crate::error::{LcsError, Result};
use crate::flow::VelocityField;
use crate::integrator::{trajectory, IntegratorConfig};
use crate::lines::ReducedLine;
use crate::Vec3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedClass {
    Inside,
    OnBarrier,
    Outside,
}

impl SeedClass {
    pub fn label(self) -> &'static str {
        match self {
            SeedClass::Inside => "inside",
            SeedClass::OnBarrier => "on-barrier",
            SeedClass::Outside => "outside",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TracerConfig {
    /// Radial scale factors (relative to the barrier, about its centroid)
    /// of the interior seed rings.
    pub inside_scales: Vec<f64>,
    pub outside_scales: Vec<f64>,
    /// Seeds per ring.
    pub per_ring: usize,
    /// Tube bound as a multiple of the barrier's largest distance from its
    /// centroid.
    pub tube_factor: f64,
    /// Keep every n-th integrator step in the stored trajectories.
    pub sample_every: usize,
    /// Horizontal period of the domain, for minimum-image distances.
    pub xy_period: Option<f64>,
}

impl Default for TracerConfig {
    fn default() -> Self {
        TracerConfig {
            inside_scales: vec![0.5],
            outside_scales: vec![1.5],
            per_ring: 16,
            tube_factor: 1.5,
            sample_every: 10,
            xy_period: Some(TAU),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TracerExperiment {
    pub t0: f64,
    pub t1: f64,
    pub seeds: Vec<Vec3>,
    pub classes: Vec<SeedClass>,
    pub trajectories: Vec<Vec<(f64, Vec3)>>,
    /// Largest horizontal distance from the advected core over the run.
    pub max_deviation: Vec<f64>,
    pub tube_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracerSummary {
    pub class: SeedClass,
    pub count: usize,
    /// Seeds whose deviation stayed within the tube bound.
    pub confined: usize,
    pub max_deviation: f64,
    pub mean_deviation: f64,
    /// `max_deviation / tube_bound`.
    pub max_ratio: f64,
    pub min_ratio: f64,
}

impl TracerExperiment {
    pub fn summary(&self) -> Vec<TracerSummary> {
        let mut out = Vec::new();
        for class in [SeedClass::Inside, SeedClass::OnBarrier, SeedClass::Outside] {
            let d: Vec<f64> = self
                .classes
                .iter()
                .zip(&self.max_deviation)
                .filter(|(c, _)| **c == class)
                .map(|(_, &d)| d)
                .collect();
            if d.is_empty() {
                continue;
            }
            let max = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = d.iter().copied().fold(f64::INFINITY, f64::min);
            out.push(TracerSummary {
                class,
                count: d.len(),
                confined: d.iter().filter(|&&v| v <= self.tube_bound).count(),
                max_deviation: max,
                mean_deviation: d.iter().sum::<f64>() / d.len() as f64,
                max_ratio: max / self.tube_bound,
                min_ratio: min / self.tube_bound,
            });
        }
        out
    }
}

fn min_image(d: f64, period: Option<f64>) -> f64 {
    match period {
        Some(p) => d - p * (d / p).round(),
        None => d,
    }
}

/// Core trajectory through `core` as a center curve, padded by a quarter
/// of the run on both sides where the field allows.
fn core_curve(
    field: &VelocityField,
    core: &Vec3,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<CenterCurve> {
    let pad = 0.25 * (t1 - t0).abs();
    let (lo, hi) = field
        .time_span()
        .unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let (a, b) = (t0.min(t1), t0.max(t1));
    let back = trajectory(field, core, t0, (a - pad).max(lo).min(t0), cfg)?;
    let fwd = trajectory(field, core, t0, (b + pad).min(hi).max(t0), cfg)?;
    let mut samples: Vec<(f64, f64, f64)> = back
        .iter()
        .rev()
        .chain(fwd.iter().skip(1))
        .map(|(_, p)| (p[2], p[0], p[1]))
        .collect();
    samples.dedup_by(|x, y| x.0 == y.0);
    CenterCurve::new(&samples, None)
}

/// Clamped lookup: heights beyond the traced core use its nearest end.
fn core_at(c: &CenterCurve, z: f64) -> (f64, f64) {
    let (lo, hi) = c.z_range();
    c.eval(z.clamp(lo, hi)).expect("clamped into range")
}

/// Seed rings inside, on and outside a closed barrier line and advect
/// them. Each seed's deviation is its horizontal distance from the
/// advected barrier centroid (the vortex core) at the seed's height.
pub fn tracer_experiment(
    field: &VelocityField,
    barrier: &ReducedLine,
    t0: f64,
    t1: f64,
    cfg: &TracerConfig,
    icfg: &IntegratorConfig,
) -> Result<TracerExperiment> {
    if !barrier.closed {
        return Err(LcsError::InvalidArgument(
            "tracer barrier must be closed".into(),
        ));
    }
    if cfg.per_ring < 3 || !(cfg.tube_factor > 0.0) {
        return Err(LcsError::InvalidArgument(
            "tracer rings need at least 3 seeds and a positive tube factor".into(),
        ));
    }
    let c = barrier.centroid();
    let (ring, _) = resample_polyline(&barrier.vertices, &[], true, cfg.per_ring)?;
    let mut seeds = Vec::new();
    let mut classes = Vec::new();
    let rings = cfg
        .inside_scales
        .iter()
        .map(|&s| (s, SeedClass::Inside))
        .chain([(1.0, SeedClass::OnBarrier)])
        .chain(cfg.outside_scales.iter().map(|&s| (s, SeedClass::Outside)));
    for (scale, class) in rings {
        for p in &ring {
            seeds.push(c + scale * (p - c));
            classes.push(class);
        }
    }
    let core = core_curve(field, &c, t0, t1, icfg)?;
    let tube_bound = cfg.tube_factor * barrier.max_radius();
    // (trajectory, max deviation) per seed
    type Run = (Vec<(f64, Vec3)>, f64);
    let runs: Result<Vec<Run>> = seeds
        .par_iter()
        .map(|s| {
            let traj = trajectory(field, s, t0, t1, icfg)?;
            let dev = traj
                .iter()
                .map(|(_, p)| {
                    let (x0, y0) = core_at(&core, p[2]);
                    min_image(p[0] - x0, cfg.xy_period).hypot(min_image(p[1] - y0, cfg.xy_period))
                })
                .fold(0.0, f64::max);
            let n = traj.len();
            let kept = traj
                .into_iter()
                .enumerate()
                .filter(|(k, _)| k % cfg.sample_every.max(1) == 0 || *k == n - 1)
                .map(|(_, v)| v)
                .collect();
            Ok((kept, dev))
        })
        .collect();
    let (trajectories, max_deviation) = runs?.into_iter().unzip();
    Ok(TracerExperiment {
        t0,
        t1,
        seeds,
        classes,
        trajectories,
        max_deviation,
        tube_bound,
    })
}

/// Returns of a closed line's points to its plane (modulo the vertical
/// period), crossing in the same direction as at the start.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnStats {
    pub crossings: usize,
    /// Largest horizontal distance from a return point to the line.
    pub max_distance: f64,
    pub mean_distance: f64,
}

fn distance_to_polyline(p: (f64, f64), line: &[Vec3]) -> f64 {
    line.windows(2)
        .map(|w| {
            let (ax, ay) = (w[0][0], w[0][1]);
            let (dx, dy) = (w[1][0] - ax, w[1][1] - ay);
            let len2 = dx * dx + dy * dy;
            let u = if len2 > 0.0 {
                (((p.0 - ax) * dx + (p.1 - ay) * dy) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            (p.0 - ax - u * dx).hypot(p.1 - ay - u * dy)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Advect `samples` points of a closed line over `[t0, t1]` and measure
/// how far their returns to `z = s1 (mod z_period)` land from the line.
#[allow(clippy::too_many_arguments)]
pub fn poincare_return(
    field: &VelocityField,
    line: &ReducedLine,
    t0: f64,
    t1: f64,
    samples: usize,
    z_period: f64,
    xy_period: Option<f64>,
    cfg: &IntegratorConfig,
) -> Result<ReturnStats> {
    if !line.closed || samples == 0 {
        return Err(LcsError::InvalidArgument(
            "need a closed line and samples".into(),
        ));
    }
    let (pts, _) = resample_polyline(&line.vertices, &[], true, samples)?;
    let c = line.centroid();
    let hits: Result<Vec<Vec<f64>>> = pts
        .par_iter()
        .map(|p| {
            let traj = trajectory(field, p, t0, t1, cfg)?;
            let dir = (traj[1].1[2] - traj[0].1[2]).signum();
            let mut d = Vec::new();
            for w in traj.windows(2).skip(1) {
                let (a, b) = (w[0].1, w[1].1);
                if (b[2] - a[2]).signum() != dir {
                    continue;
                }
                let ka = ((a[2] - line.s1) / z_period).floor();
                let kb = ((b[2] - line.s1) / z_period).floor();
                if ka == kb {
                    continue;
                }
                let level = line.s1 + z_period * ka.max(kb);
                let u = (level - a[2]) / (b[2] - a[2]);
                let q = a + u * (b - a);
                let x = c[0] + min_image(q[0] - c[0], xy_period);
                let y = c[1] + min_image(q[1] - c[1], xy_period);
                d.push(distance_to_polyline((x, y), &line.vertices));
            }
            Ok(d)
        })
        .collect();
    let all: Vec<f64> = hits?.into_iter().flatten().collect();
    Ok(ReturnStats {
        crossings: all.len(),
        max_distance: all.iter().copied().fold(0.0, f64::max),
        mean_distance: if all.is_empty() {
            0.0
        } else {
            all.iter().sum::<f64>() / all.len() as f64
        },
    })
}

/// Vertical displacement statistics of a material curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftStats {
    pub mean: f64,
    pub mean_abs: f64,
    pub max_abs: f64,
}

impl DriftStats {
    fn of(start: &[Vec3], end: &[Vec3]) -> Self {
        let d: Vec<f64> = start.iter().zip(end).map(|(a, b)| b[2] - a[2]).collect();
        let n = d.len().max(1) as f64;
        DriftStats {
            mean: d.iter().sum::<f64>() / n,
            mean_abs: d.iter().map(|v| v.abs()).sum::<f64>() / n,
            max_abs: d.iter().map(|v| v.abs()).fold(0.0, f64::max),
        }
    }
}

/// A line and its two offset copies, each advected as a material curve
/// and swept into a surface.
#[derive(Clone, Debug)]
pub struct PerturbedStrainline {
    /// Surfaces swept by the line, its `+delta` copy and its `-delta` copy.
    pub surfaces: [BarrierSurface; 3],
    pub drift: [DriftStats; 3],
}

/// Offset an open line by `±delta` along `offset` and advect all three
/// curves from `t0` to `t1`, sweeping `rows` snapshots into surfaces.
#[allow(clippy::too_many_arguments)]
pub fn perturbed_strainline_experiment(
    field: &VelocityField,
    line: &ReducedLine,
    delta: f64,
    offset: Vec3,
    t0: f64,
    t1: f64,
    m: usize,
    rows: usize,
    cfg: &IntegratorConfig,
) -> Result<PerturbedStrainline> {
    if line.closed {
        return Err(LcsError::InvalidArgument(
            "perturbed-line experiment needs an open line".into(),
        ));
    }
    if !(t1 > t0) || rows < 2 {
        return Err(LcsError::InvalidArgument(
            "need t1 > t0 and at least two rows".into(),
        ));
    }
    let dir = offset
        .try_normalize(1e-300)
        .ok_or_else(|| LcsError::InvalidArgument("offset direction is zero".into()))?;
    let mut surfaces = Vec::with_capacity(3);
    let mut drift = Vec::with_capacity(3);
    for sign in [0.0, 1.0, -1.0] {
        let mut copy = line.clone();
        for p in copy.vertices.iter_mut() {
            *p += sign * delta * dir;
        }
        let (s, snaps) = sweep_snapshots(field, &copy, t0, t1, m, rows, cfg)?;
        drift.push(DriftStats::of(&snaps[0], &snaps[rows - 1]));
        surfaces.push(s);
    }
    let surfaces: [BarrierSurface; 3] = surfaces.try_into().expect("three surfaces");
    Ok(PerturbedStrainline {
        surfaces,
        drift: [drift[0], drift[1], drift[2]],
    })
}
