//! Polyline geometry: Hausdorff distances, greedy deduplication, closed
//! orbit detection and running averages.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::Vec3;

/// How the two directed distances are combined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HausdorffForm {
    /// `h(a, b) + h(b, a)`
    #[default]
    Sum,
    /// `max(h(a, b), h(b, a))`, the usual Hausdorff metric.
    Max,
}

/// `max_{p in a} min_{q in b} |p - q|` over vertices. Stops early and
/// returns a value above `cap` once the running maximum exceeds it.
fn directed(a: &[Vec3], b: &[Vec3], cap: f64) -> f64 {
    let mut worst = 0.0f64;
    for p in a {
        let mut best = f64::INFINITY;
        for q in b {
            let d = (p - q).norm_squared();
            if d < best {
                best = d;
                if best <= worst {
                    break;
                }
            }
        }
        worst = worst.max(best);
        if worst > cap * cap {
            return worst.sqrt();
        }
    }
    worst.sqrt()
}

pub fn hausdorff_distance(a: &[Vec3], b: &[Vec3], form: HausdorffForm) -> f64 {
    let ab = directed(a, b, f64::INFINITY);
    let ba = directed(b, a, f64::INFINITY);
    match form {
        HausdorffForm::Sum => ab + ba,
        HausdorffForm::Max => ab.max(ba),
    }
}

fn bbox(a: &[Vec3]) -> (Vec3, Vec3) {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for p in a {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

/// Whether `hausdorff_distance(a, b, form) <= d0`, with early exits.
pub fn hausdorff_within(a: &[Vec3], b: &[Vec3], form: HausdorffForm, d0: f64) -> bool {
    if a.is_empty() || b.is_empty() {
        return false;
    }
    let (alo, ahi) = bbox(a);
    let (blo, bhi) = bbox(b);
    let gap = (blo - ahi).sup(&(alo - bhi)).sup(&Vec3::zeros()).norm();
    if gap > d0 {
        return false;
    }
    let ab = directed(a, b, d0);
    if ab > d0 {
        return false;
    }
    let cap = match form {
        HausdorffForm::Sum => d0 - ab,
        HausdorffForm::Max => d0,
    };
    let ba = directed(b, a, cap);
    match form {
        HausdorffForm::Sum => ab + ba <= d0,
        HausdorffForm::Max => ba <= d0,
    }
}

pub fn polyline_length(v: &[Vec3]) -> f64 {
    v.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

pub fn centroid(v: &[Vec3]) -> Vec3 {
    v.iter().sum::<Vec3>() / v.len().max(1) as f64
}

/// Greedy deduplication: visit polylines by descending length (ties broken
/// by centroid position, then input order) and keep one only if it is
/// farther than `d0` from every polyline kept so far. Returns kept indices
/// in visiting order.
pub fn dedup_indices(lines: &[&[Vec3]], d0: f64, form: HausdorffForm) -> Vec<usize> {
    let mut order: Vec<usize> = (0..lines.len()).filter(|&i| !lines[i].is_empty()).collect();
    let lens: Vec<f64> = lines.iter().map(|l| polyline_length(l)).collect();
    let cents: Vec<Vec3> = lines.iter().map(|l| centroid(l)).collect();
    order.sort_by(|&a, &b| {
        lens[b]
            .total_cmp(&lens[a])
            .then(cents[a][0].total_cmp(&cents[b][0]))
            .then(cents[a][1].total_cmp(&cents[b][1]))
            .then(a.cmp(&b))
    });
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        if kept
            .iter()
            .all(|&k| !hausdorff_within(lines[i], lines[k], form, d0))
        {
            kept.push(i);
        }
    }
    kept
}

/// Signed in-plane turning angle at vertex `k` between segments
/// `k-1 -> k` and `k -> k+1`.
pub(crate) fn turn_at(v: &[Vec3], k: usize) -> f64 {
    let a = v[k] - v[k - 1];
    let b = v[k + 1] - v[k];
    let cross = a[0] * b[1] - a[1] * b[0];
    let dot = a[0] * b[0] + a[1] * b[1];
    cross.atan2(dot)
}

/// `out[k]` is the total turning accumulated at vertices `1..k`, i.e.
/// along the path from vertex 0 to vertex `k`.
pub fn cumulative_turning(v: &[Vec3]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for k in 2..v.len() {
        out[k] = out[k - 1] + turn_at(v, k - 1);
    }
    out
}

/// Spatial hash of polyline vertices for closure queries.
#[derive(Debug, Default)]
pub(crate) struct VertexIndex {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl VertexIndex {
    pub(crate) fn new(cell: f64) -> Self {
        VertexIndex {
            cell,
            buckets: HashMap::new(),
        }
    }

    fn key(&self, p: &Vec3) -> (i64, i64) {
        (
            (p[0] / self.cell).floor() as i64,
            (p[1] / self.cell).floor() as i64,
        )
    }

    pub(crate) fn insert(&mut self, p: &Vec3, id: usize) {
        let k = self.key(p);
        self.buckets.entry(k).or_default().push(id);
    }

    pub(crate) fn near(&self, p: &Vec3) -> impl Iterator<Item = usize> + '_ {
        let (kx, ky) = self.key(p);
        (-1..=1)
            .flat_map(move |dx| (-1..=1).map(move |dy| (kx + dx, ky + dy)))
            .filter_map(|k| self.buckets.get(&k))
            .flatten()
            .copied()
    }
}

/// Closure parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosureParams {
    pub tol: f64,
    pub min_winding: f64,
}

/// Earlier vertex `i` closing the orbit at vertex `j`: within `tol` of `v[j]`
/// with total turning between them of at least `min_winding` in magnitude.
/// Picks the nearest such vertex (lowest index on ties).
pub(crate) fn closing_partner(
    v: &[Vec3],
    turning: &[f64],
    index: &VertexIndex,
    j: usize,
    p: &ClosureParams,
) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for i in index.near(&v[j]) {
        if i >= j || (turning[j] - turning[i]).abs() < p.min_winding {
            continue;
        }
        let d = (v[j] - v[i]).norm();
        if d <= p.tol && best.is_none_or(|(bd, bi)| d < bd || (d == bd && i < bi)) {
            best = Some((d, i));
        }
    }
    best.map(|(_, i)| i)
}

/// First closure `(i, j)` along `v`, scanning `j` in increasing order.
pub fn find_closure(v: &[Vec3], p: &ClosureParams) -> Option<(usize, usize)> {
    if v.len() < 10 {
        return None;
    }
    let turning = cumulative_turning(v);
    let mut index = VertexIndex::new(p.tol.max(1e-300));
    for j in 0..v.len() {
        if let Some(i) = closing_partner(v, &turning, &index, j, p) {
            return Some((i, j));
        }
        index.insert(&v[j], j);
    }
    None
}

/// Maximum of the trailing running average of `values` over windows of
/// `w` consecutive entries (shorter prefixes are averaged as they are).
pub fn running_average_max(values: &[f64], w: usize) -> f64 {
    let w = w.max(1);
    let mut sum = 0.0;
    let mut worst = f64::NEG_INFINITY;
    for k in 0..values.len() {
        sum += values[k];
        if k >= w {
            sum -= values[k - w];
        }
        let n = (k + 1).min(w) as f64;
        worst = worst.max(sum / n);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle(r: f64, n: usize, turns: f64) -> Vec<Vec3> {
        let m = (n as f64 * turns) as usize;
        (0..=m)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / n as f64;
                Vec3::new(r * a.cos(), r * a.sin(), 0.0)
            })
            .collect()
    }

    #[test]
    fn hausdorff_basics() {
        let a = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)];
        let b = vec![Vec3::new(0.0, 0.1, 0.0), Vec3::new(1.0, 0.1, 0.0)];
        assert_eq!(hausdorff_distance(&a, &a, HausdorffForm::Sum), 0.0);
        assert!((hausdorff_distance(&a, &b, HausdorffForm::Sum) - 0.2).abs() < 1e-15);
        assert!((hausdorff_distance(&a, &b, HausdorffForm::Max) - 0.1).abs() < 1e-15);
        assert!(hausdorff_within(&a, &b, HausdorffForm::Sum, 0.2 + 1e-12));
        assert!(!hausdorff_within(&a, &b, HausdorffForm::Sum, 0.19));
        assert!(hausdorff_within(&a, &b, HausdorffForm::Max, 0.11));
    }

    #[test]
    fn dedup_keeps_longest_of_near_triple() {
        let base: Vec<Vec3> = (0..50)
            .map(|k| Vec3::new(k as f64 * 0.02, 0.0, 0.0))
            .collect();
        let l1 = base.clone();
        let l2: Vec<Vec3> = base[..40]
            .iter()
            .map(|p| p + Vec3::new(0.0, 0.01, 0.0))
            .collect();
        let l3: Vec<Vec3> = base[..45]
            .iter()
            .map(|p| p + Vec3::new(0.0, -0.01, 0.0))
            .collect();
        let lines = [l2.as_slice(), l1.as_slice(), l3.as_slice()];
        let kept = dedup_indices(&lines, 0.3, HausdorffForm::Sum);
        assert_eq!(kept, vec![1]);
    }

    #[test]
    fn circle_closes_and_segment_does_not() {
        let p = ClosureParams {
            tol: 0.02,
            min_winding: 0.9 * std::f64::consts::TAU,
        };
        let c = circle(1.0, 400, 1.5);
        let (i, j) = find_closure(&c, &p).unwrap();
        assert_eq!(i, 0);
        assert!((399..=400).contains(&j), "{j}");
        let seg: Vec<Vec3> = (0..100)
            .map(|k| Vec3::new(k as f64 * 0.01, 0.0, 0.0))
            .collect();
        assert!(find_closure(&seg, &p).is_none());
    }

    #[test]
    fn drifting_spiral_stays_open() {
        let n = 600;
        let v: Vec<Vec3> = (0..3 * n)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / n as f64;
                let r = 1.0 + 0.01 * a / std::f64::consts::TAU;
                Vec3::new(r * a.cos(), r * a.sin(), 0.0)
            })
            .collect();
        let p = ClosureParams {
            tol: 1e-3,
            min_winding: 0.9 * std::f64::consts::TAU,
        };
        assert!(find_closure(&v, &p).is_none());
    }

    #[test]
    fn running_average() {
        assert_eq!(running_average_max(&[1.0, 3.0, 1.0, 1.0], 2), 2.0);
        assert_eq!(running_average_max(&[4.0], 5), 4.0);
    }
}
