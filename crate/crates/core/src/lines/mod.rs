//! Reduced strain-, stretch- and shearlines on a sampling plane: seeding,
//! integration with direction matching, deduplication and closed-orbit
//! detection.

mod geometry;
mod integrate;

use std::f64::consts::TAU;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

pub use geometry::{
    centroid, cumulative_turning, dedup_indices, find_closure, hausdorff_distance,
    hausdorff_within, polyline_length, running_average_max, ClosureParams, HausdorffForm,
};
pub use integrate::{
    extract_lines, integrate_line, interpolate_frame, reduced_vector, seed_filter, seed_lattice,
    InterpolatedFrame, Seed,
};

use crate::error::{LcsError, Result};
use crate::strain::HelicityField;
use crate::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LineKind {
    /// Tangent `n_Π × xi3`: intersections of repelling barriers.
    Strain,
    /// Tangent `n_Π × xi1`: intersections of attracting barriers.
    Stretch,
    /// Tangent `n_Π × n+`.
    ShearPlus,
    /// Tangent `n_Π × n-`.
    ShearMinus,
}

impl LineKind {
    pub fn helicity_field(self) -> HelicityField {
        match self {
            LineKind::Strain => HelicityField::Xi3,
            LineKind::Stretch => HelicityField::Xi1,
            LineKind::ShearPlus => HelicityField::NPlus,
            LineKind::ShearMinus => HelicityField::NMinus,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            LineKind::Strain => "strain",
            LineKind::Stretch => "stretch",
            LineKind::ShearPlus => "shear+",
            LineKind::ShearMinus => "shear-",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "strain" => Some(LineKind::Strain),
            "stretch" => Some(LineKind::Stretch),
            "shear+" => Some(LineKind::ShearPlus),
            "shear-" => Some(LineKind::ShearMinus),
            _ => None,
        }
    }

    pub fn is_shear(self) -> bool {
        matches!(self, LineKind::ShearPlus | LineKind::ShearMinus)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminationReason {
    HelicityExceeded,
    LeftDomain,
    MaxLength,
    Closed,
    /// Masked or degenerate frame data, or a vanishing reduced vector.
    Degenerate,
    /// The line was loaded from a file that does not record it.
    Unrecorded,
}

/// How the helicity along a line is averaged for the stopping test.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HelicityAverage {
    /// Mean over the last `window` of arclength.
    Trailing,
    /// Mean over the whole branch from the seed.
    #[default]
    Cumulative,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LineConfig {
    /// Arclength step.
    pub step: f64,
    /// Helicity threshold for seeding and for the running average.
    pub eps0: f64,
    /// Maximal arclength of each integration branch.
    pub max_arclength: f64,
    /// Running-average window length (arclength), for the trailing average.
    pub window: f64,
    pub average: HelicityAverage,
    pub closure_tol: f64,
    /// Deduplication distance.
    pub d0: f64,
    /// Minimal total turning for a closed orbit.
    pub min_winding: f64,
    pub hausdorff: HausdorffForm,
    /// Seed lattice dimensions.
    pub seed_nx: usize,
    pub seed_ny: usize,
}

impl Default for LineConfig {
    fn default() -> Self {
        LineConfig::with_step(1e-3 * TAU)
    }
}

impl LineConfig {
    /// Defaults derived from the step: window 20 steps, closure tolerance
    /// 2 steps, dedup distance 10 steps.
    pub fn with_step(step: f64) -> Self {
        LineConfig {
            step,
            eps0: 1e-2,
            max_arclength: 3.0 * TAU,
            window: 20.0 * step,
            average: HelicityAverage::Cumulative,
            closure_tol: 2.0 * step,
            d0: 10.0 * step,
            min_winding: 0.9 * TAU,
            hausdorff: HausdorffForm::Sum,
            seed_nx: 100,
            seed_ny: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("step", self.step),
            ("eps0", self.eps0),
            ("max_arclength", self.max_arclength),
            ("window", self.window),
            ("closure_tol", self.closure_tol),
            ("d0", self.d0),
            ("min_winding", self.min_winding),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(LcsError::Config(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.seed_nx == 0 || self.seed_ny == 0 {
            return Err(LcsError::Config("seed lattice must be non-empty".into()));
        }
        Ok(())
    }

    /// Number of vertices in the running-average window.
    pub fn window_vertices(&self) -> usize {
        match self.average {
            HelicityAverage::Trailing => ((self.window / self.step).round() as usize).max(1),
            HelicityAverage::Cumulative => usize::MAX,
        }
    }

    pub fn closure(&self) -> ClosureParams {
        ClosureParams {
            tol: self.closure_tol,
            min_winding: self.min_winding,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReducedLine {
    pub kind: LineKind,
    pub s1: f64,
    pub vertices: Vec<Vec3>,
    /// Helicity of the line's normal field at each vertex.
    pub helicity: Vec<f64>,
    pub closed: bool,
    /// Why integration stopped at the last vertex.
    pub termination: TerminationReason,
    /// Why integration stopped at the first vertex.
    pub start_termination: TerminationReason,
    /// Vertex index of the seed of an open line. `None` for closed lines,
    /// which keep only the orbit, and for lines read from CSV.
    pub seed: Option<usize>,
}

impl ReducedLine {
    pub fn empty(kind: LineKind, s1: f64, reason: TerminationReason) -> Self {
        ReducedLine {
            kind,
            s1,
            vertices: Vec::new(),
            helicity: Vec::new(),
            closed: false,
            termination: reason,
            start_termination: reason,
            seed: None,
        }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn length(&self) -> f64 {
        polyline_length(&self.vertices)
    }

    /// Vertex mean; a closed line's repeated endpoint counts once.
    pub fn centroid(&self) -> Vec3 {
        centroid(self.distinct_vertices())
    }

    fn distinct_vertices(&self) -> &[Vec3] {
        let n = self.vertices.len();
        if self.closed && n > 1 && self.vertices[0] == self.vertices[n - 1] {
            &self.vertices[..n - 1]
        } else {
            &self.vertices
        }
    }

    /// Total signed turning along the line.
    pub fn winding(&self) -> f64 {
        let mut v = self.vertices.clone();
        if self.closed && v.len() > 2 {
            // include the turn at the snapped endpoint
            v.push(v[1]);
        }
        cumulative_turning(&v).last().copied().unwrap_or(0.0)
    }

    /// Mean distance of the vertices from the centroid.
    pub fn mean_radius(&self) -> f64 {
        let c = self.centroid();
        let v = self.distinct_vertices();
        v.iter().map(|p| (p - c).norm()).sum::<f64>() / v.len().max(1) as f64
    }

    pub fn max_radius(&self) -> f64 {
        let c = self.centroid();
        self.vertices
            .iter()
            .map(|p| (p - c).norm())
            .fold(0.0, f64::max)
    }

    pub fn mean_abs_helicity(&self) -> f64 {
        self.helicity.iter().map(|h| h.abs()).sum::<f64>() / self.helicity.len().max(1) as f64
    }

    /// Largest cumulative mean of `|h|` seen while walking out from the seed
    /// along either branch, the quantity the integrator keeps below `eps0`.
    /// Without a seed the walk starts at the first vertex.
    pub fn max_running_average(&self) -> f64 {
        if self.helicity.is_empty() {
            return 0.0;
        }
        let s = self.seed.unwrap_or(0).min(self.helicity.len() - 1);
        let walk = |it: &mut dyn Iterator<Item = &f64>| {
            let (mut sum, mut worst) = (0.0, 0.0_f64);
            for (k, h) in it.enumerate() {
                sum += h.abs();
                worst = worst.max(sum / (k + 1) as f64);
            }
            worst
        };
        let fwd = walk(&mut self.helicity[s..].iter());
        let bwd = walk(&mut self.helicity[..=s].iter().rev());
        fwd.max(bwd)
    }

    /// Trim to the first closed orbit, if any, snapping the endpoint to the
    /// start. Returns whether the line is closed afterwards.
    pub fn detect_closed(&mut self, cfg: &LineConfig) -> bool {
        if self.closed {
            return true;
        }
        if let Some((i, j)) = find_closure(&self.vertices, &cfg.closure()) {
            self.vertices.truncate(j + 1);
            self.vertices.drain(..i);
            self.helicity.truncate(j + 1);
            self.helicity.drain(..i);
            let first = self.vertices[0];
            *self.vertices.last_mut().unwrap() = first;
            let h0 = self.helicity[0];
            *self.helicity.last_mut().unwrap() = h0;
            self.closed = true;
            self.termination = TerminationReason::Closed;
            self.start_termination = TerminationReason::Closed;
            self.seed = None;
        }
        self.closed
    }
}

/// Deduplicate lines (see [`dedup_indices`]), preserving the visiting order.
pub fn dedup_lines(lines: Vec<ReducedLine>, d0: f64, form: HausdorffForm) -> Vec<ReducedLine> {
    let views: Vec<&[Vec3]> = lines.iter().map(|l| l.vertices.as_slice()).collect();
    let kept = dedup_indices(&views, d0, form);
    let mut slots: Vec<Option<ReducedLine>> = lines.into_iter().map(Some).collect();
    kept.into_iter().filter_map(|i| slots[i].take()).collect()
}

pub const CSV_HEADER: &str = "s1,kind,vertex_index,x,y,z,helicity,closed";

pub fn write_lines_csv<W: Write>(lines: &[ReducedLine], mut w: W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for l in lines {
        for (k, (p, h)) in l.vertices.iter().zip(&l.helicity).enumerate() {
            writeln!(
                w,
                "{:?},{},{k},{:?},{:?},{:?},{:?},{}",
                l.s1,
                l.kind.label(),
                p[0],
                p[1],
                p[2],
                h,
                u8::from(l.closed)
            )?;
        }
    }
    Ok(())
}

/// Read lines written by [`write_lines_csv`]; a new line starts at every
/// `vertex_index == 0`.
pub fn read_lines_csv<R: BufRead>(r: R) -> Result<Vec<ReducedLine>> {
    let mut lines = r.lines();
    let header = lines.next().transpose()?;
    if header.as_deref().map(str::trim) != Some(CSV_HEADER) {
        return Err(LcsError::Format(format!(
            "line CSV must start with `{CSV_HEADER}`"
        )));
    }
    let mut out: Vec<ReducedLine> = Vec::new();
    for (n, row) in lines.enumerate() {
        let row = row?;
        if row.trim().is_empty() {
            continue;
        }
        let bad = || LcsError::Format(format!("line CSV row {}: malformed", n + 2));
        let cols: Vec<&str> = row.split(',').map(str::trim).collect();
        if cols.len() != 8 {
            return Err(bad());
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        let s1 = num(cols[0])?;
        let kind = LineKind::from_label(cols[1]).ok_or_else(bad)?;
        let idx: usize = cols[2].parse().map_err(|_| bad())?;
        let p = Vec3::new(num(cols[3])?, num(cols[4])?, num(cols[5])?);
        let h = num(cols[6])?;
        let closed = match cols[7] {
            "1" => true,
            "0" => false,
            _ => return Err(bad()),
        };
        if idx == 0 {
            let reason = if closed {
                TerminationReason::Closed
            } else {
                TerminationReason::Unrecorded
            };
            let mut l = ReducedLine::empty(kind, s1, reason);
            l.closed = closed;
            out.push(l);
        }
        let l = out.last_mut().ok_or_else(bad)?;
        if idx != l.vertices.len() {
            return Err(bad());
        }
        l.vertices.push(p);
        l.helicity.push(h);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn running_average_walks_out_from_the_seed() {
        let mut l = line(LineKind::Strain, &[(0.0, 0.0); 5], false);
        l.helicity = vec![3.0, 1.0, 0.0, 2.0, 2.0];
        l.seed = Some(2);
        // Forward: 0, 1, 4/3. Backward: 0, 1/2, 4/3.
        assert!((l.max_running_average() - 4.0 / 3.0).abs() < 1e-15);
        // The whole-line mean can exceed it: the seed is shared.
        assert!(l.mean_abs_helicity() > l.max_running_average());
        l.seed = None;
        assert!((l.max_running_average() - 3.0).abs() < 1e-15);
    }

    fn line(kind: LineKind, pts: &[(f64, f64)], closed: bool) -> ReducedLine {
        ReducedLine {
            kind,
            s1: 0.5,
            vertices: pts.iter().map(|&(x, y)| Vec3::new(x, y, 0.5)).collect(),
            helicity: pts.iter().map(|&(x, _)| x * 1e-3).collect(),
            closed,
            termination: TerminationReason::LeftDomain,
            start_termination: TerminationReason::LeftDomain,
            seed: None,
        }
    }

    #[test]
    fn csv_round_trip() {
        let a = line(
            LineKind::Strain,
            &[(0.0, 0.0), (0.1, 0.0), (0.2, 0.05)],
            false,
        );
        let b = line(LineKind::ShearMinus, &[(1.0, 1.0), (1.1, 1.0)], true);
        let mut buf = Vec::new();
        write_lines_csv(&[a.clone(), b.clone()], &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(CSV_HEADER));
        let back = read_lines_csv(&buf[..]).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].vertices, a.vertices);
        assert_eq!(back[1].helicity, b.helicity);
        assert_eq!(back[1].kind, LineKind::ShearMinus);
        assert!(back[1].closed && !back[0].closed);
        assert_eq!(back[0].termination, TerminationReason::Unrecorded);
    }

    #[test]
    fn csv_rejects_bad_rows() {
        let text = format!("{CSV_HEADER}\n0,strain,1,0,0,0,0,0\n");
        assert!(read_lines_csv(text.as_bytes()).is_err());
        let text = format!("{CSV_HEADER}\n0,curvy,0,0,0,0,0,0\n");
        assert!(read_lines_csv(text.as_bytes()).is_err());
    }

    #[test]
    fn dedup_is_idempotent() {
        let lines = vec![
            line(
                LineKind::Strain,
                &[(0.0, 0.0), (0.5, 0.0), (1.0, 0.0)],
                false,
            ),
            line(
                LineKind::Strain,
                &[(0.0, 0.001), (0.5, 0.001), (1.0, 0.001)],
                false,
            ),
            line(LineKind::Strain, &[(0.0, 2.0), (1.0, 2.0)], false),
        ];
        let once = dedup_lines(lines, 0.01, HausdorffForm::Sum);
        assert_eq!(once.len(), 2);
        let twice = dedup_lines(once.clone(), 0.01, HausdorffForm::Sum);
        assert_eq!(once, twice);
    }

    #[test]
    fn closing_trims_to_one_period() {
        let n = 200;
        let pts: Vec<(f64, f64)> = (0..(n * 3 / 2))
            .map(|k| {
                let a = TAU * k as f64 / n as f64;
                (a.cos(), a.sin())
            })
            .collect();
        let mut l = line(LineKind::ShearPlus, &pts, false);
        let cfg = LineConfig::with_step(TAU / n as f64);
        assert!(l.detect_closed(&cfg));
        assert_eq!(l.vertices.first(), l.vertices.last());
        assert!((l.winding().abs() - TAU).abs() < 0.1);
        assert!(l.len() <= n + 1);
    }
}
