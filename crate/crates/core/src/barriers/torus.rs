use super::surface::{BarrierSurface, Embedding};
use crate::error::{LcsError, Result};
use crate::flow::VelocityField;
use crate::integrator::{trajectory, IntegratorConfig};
use crate::Vec3;
use std::f64::consts::TAU;

/// Vortex core `(x0(z), y0(z))` as a piecewise-linear function of `z`.
#[derive(Clone, Debug, PartialEq)]
pub struct CenterCurve {
    z: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
    /// When set, `z` values outside the sampled range are shifted by
    /// multiples of the period before lookup.
    period: Option<f64>,
}

impl CenterCurve {
    /// From `(z, x0, y0)` samples; `z` must be strictly monotone (either
    /// direction).
    pub fn new(samples: &[(f64, f64, f64)], period: Option<f64>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(LcsError::InvalidArgument(
                "center curve needs two samples".into(),
            ));
        }
        let mut s = samples.to_vec();
        if s[1].0 < s[0].0 {
            s.reverse();
        }
        if s.iter()
            .any(|p| !(p.0.is_finite() && p.1.is_finite() && p.2.is_finite()))
            || s.windows(2).any(|w| w[1].0 <= w[0].0)
        {
            return Err(LcsError::InvalidArgument(
                "center curve z must be finite and strictly monotone".into(),
            ));
        }
        if let Some(p) = period {
            if !(p > 0.0) || s[s.len() - 1].0 - s[0].0 < p {
                return Err(LcsError::InvalidArgument(
                    "periodic center curve must span a full period".into(),
                ));
            }
        }
        Ok(CenterCurve {
            z: s.iter().map(|p| p.0).collect(),
            x: s.iter().map(|p| p.1).collect(),
            y: s.iter().map(|p| p.2).collect(),
            period,
        })
    }

    /// Trace the trajectory of the vortex center point `center` from `t0`
    /// until its `z` has moved by `z_span` (or `max_time` elapses).
    pub fn from_advection(
        field: &VelocityField,
        center: &Vec3,
        t0: f64,
        z_span: f64,
        max_time: f64,
        cfg: &IntegratorConfig,
        period: Option<f64>,
    ) -> Result<Self> {
        let traj = trajectory(field, center, t0, t0 + max_time, cfg)?;
        let mut samples = vec![(center[2], center[0], center[1])];
        let dir = (traj[1].1[2] - center[2]).signum();
        for (_, p) in traj.iter().skip(1) {
            if (p[2] - samples.last().unwrap().0) * dir <= 0.0 {
                return Err(LcsError::InvalidArgument(
                    "center trajectory is not monotone in z".into(),
                ));
            }
            samples.push((p[2], p[0], p[1]));
            if (p[2] - center[2]).abs() >= z_span {
                break;
            }
        }
        if (samples.last().unwrap().0 - center[2]).abs() < z_span {
            return Err(LcsError::InvalidArgument(format!(
                "center trajectory covered less than {z_span} in z"
            )));
        }
        Self::new(&samples, period)
    }

    pub fn z_range(&self) -> (f64, f64) {
        (self.z[0], self.z[self.z.len() - 1])
    }

    pub fn covers(&self, z: f64) -> bool {
        self.period.is_some() || (z >= self.z[0] && z <= self.z[self.z.len() - 1])
    }

    /// `(x0, y0)` at height `z`.
    pub fn eval(&self, z: f64) -> Result<(f64, f64)> {
        let (lo, hi) = self.z_range();
        let z = match self.period {
            Some(p) if z < lo || z > hi => lo + (z - lo).rem_euclid(p),
            _ => z,
        };
        if !(z >= lo && z <= hi) {
            return Err(LcsError::InvalidArgument(format!(
                "z={z} outside the center curve range [{lo}, {hi}]"
            )));
        }
        let k = self
            .z
            .partition_point(|&v| v <= z)
            .clamp(1, self.z.len() - 1);
        let u = (z - self.z[k - 1]) / (self.z[k] - self.z[k - 1]);
        Ok((
            self.x[k - 1] + u * (self.x[k] - self.x[k - 1]),
            self.y[k - 1] + u * (self.y[k] - self.y[k - 1]),
        ))
    }
}

/// Toroidal coordinates around the center curve: the `z` coordinate
/// becomes the angle and the offset from the core the cross-section.
pub fn torus_map(p: &Vec3, center: &CenterCurve, r1: f64, r2: f64) -> Result<Vec3> {
    let (x0, y0) = center.eval(p[2])?;
    let r = p[0] - x0 + r1;
    Ok(Vec3::new(r * p[2].cos(), r * p[2].sin(), r2 * (p[1] - y0)))
}

/// Inverse of [`torus_map`] for points whose original `z` lies in
/// `[z_lo, z_lo + 2π)` and whose offset satisfies `x - x0(z) > -r1`.
pub fn torus_unmap(q: &Vec3, center: &CenterCurve, r1: f64, r2: f64, z_lo: f64) -> Result<Vec3> {
    let z = z_lo + (q[1].atan2(q[0]) - z_lo).rem_euclid(TAU);
    let r = q[0].hypot(q[1]);
    let (x0, y0) = center.eval(z)?;
    Ok(Vec3::new(r + x0 - r1, q[2] / r2 + y0, z))
}

/// Apply [`torus_map`] to every vertex.
pub fn torus_embed(
    surface: &BarrierSurface,
    center: &CenterCurve,
    r1: f64,
    r2: f64,
) -> Result<BarrierSurface> {
    if !(r1 > 0.0 && r2 > 0.0) {
        return Err(LcsError::InvalidArgument(
            "R1 and R2 must be positive".into(),
        ));
    }
    if surface.embedding != Embedding::Physical {
        return Err(LcsError::InvalidArgument(
            "surface is already embedded".into(),
        ));
    }
    if let Some(p) = surface.mesh.vertices.iter().find(|p| !center.covers(p[2])) {
        return Err(LcsError::InvalidArgument(format!(
            "center curve does not cover z={}",
            p[2]
        )));
    }
    let vertices: Result<Vec<Vec3>> = surface
        .mesh
        .vertices
        .iter()
        .map(|p| torus_map(p, center, r1, r2))
        .collect();
    let mut out = surface.clone();
    out.mesh.vertices = vertices?;
    out.embedding = Embedding::Toroidal { r1, r2 };
    Ok(out)
}
