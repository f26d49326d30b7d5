//! Fixed-step RK4 advection, flow-map gradients and Cauchy-Green tensors.

use serde::{Deserialize, Serialize};

use crate::error::{LcsError, Result};
use crate::flow::VelocityField;
use crate::{Mat3, Vec3};

/// How [`flow_map_sample`] obtains the flow gradient.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMethod {
    /// Integrate `dM/dt = ∇v(x(t), t) M` alongside the trajectory.
    #[default]
    Variational,
    /// Central differences of six auxiliary trajectories at `x0 ± grad_h e_i`.
    FiniteDifference,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub dt: f64,
    /// Half-spacing of the auxiliary points used for the flow gradient.
    pub grad_h: f64,
    pub gradient: GradientMethod,
    /// Also integrate the inverse gradient along the trajectory. Its largest
    /// singular value resolves the smallest Cauchy-Green eigenvalue when
    /// stretching is too strong for the forward gradient alone.
    pub inverse_gradient: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            dt: 0.01,
            grad_h: 1e-4,
            gradient: GradientMethod::Variational,
            inverse_gradient: true,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(LcsError::Config(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.grad_h > 0.0 && self.grad_h.is_finite()) {
            return Err(LcsError::Config(format!(
                "grad_h must be positive, got {}",
                self.grad_h
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowMapSample {
    pub x0: Vec3,
    pub t0: f64,
    pub t1: f64,
    /// Final position of the trajectory through `x0`.
    pub f_val: Vec3,
    pub grad_f: Mat3,
    pub c: Mat3,
    /// Inverse of `grad_f` (the backward map's gradient at `f_val`), when requested.
    pub grad_b: Option<Mat3>,
}

#[inline]
fn rk4_step(field: &VelocityField, x: &Vec3, t: f64, h: f64) -> Result<Vec3> {
    let k1 = field.eval(x, t)?;
    let k2 = field.eval(&(x + 0.5 * h * k1), t + 0.5 * h)?;
    let k3 = field.eval(&(x + 0.5 * h * k2), t + 0.5 * h)?;
    let k4 = field.eval(&(x + h * k3), t + h)?;
    Ok(x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}

fn check_span(field: &VelocityField, t0: f64, t1: f64) -> Result<()> {
    if let Some((start, end)) = field.time_span() {
        for t in [t0, t1] {
            if !(t >= start && t <= end) {
                return Err(LcsError::TimeOutOfRange { t, start, end });
            }
        }
    }
    Ok(())
}

/// Advect `x0` from `t0` to `t1` (either direction) with fixed-step RK4.
/// The last step is shortened so the trajectory lands exactly on `t1`.
pub fn advect_point(
    field: &VelocityField,
    x0: &Vec3,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec3> {
    check_span(field, t0, t1)?;
    let mut x = *x0;
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(x);
    }
    let dir = span.signum();
    let h = dir * cfg.dt;
    let full = (span.abs() / cfg.dt).floor() as usize;
    let mut t = t0;
    for k in 0..full {
        x = rk4_step(field, &x, t, h)?;
        t = t0 + (k + 1) as f64 * h;
    }
    let rest = t1 - t;
    if rest.abs() > 1e-12 * cfg.dt {
        x = rk4_step(field, &x, t, rest)?;
    }
    Ok(x)
}

/// Trajectory sampled at every integrator step, including both endpoints.
pub fn trajectory(
    field: &VelocityField,
    x0: &Vec3,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<(f64, Vec3)>> {
    check_span(field, t0, t1)?;
    let mut out = vec![(t0, *x0)];
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(out);
    }
    let h = span.signum() * cfg.dt;
    let full = (span.abs() / cfg.dt).floor() as usize;
    let mut x = *x0;
    let mut t = t0;
    for k in 0..full {
        x = rk4_step(field, &x, t, h)?;
        t = t0 + (k + 1) as f64 * h;
        out.push((t, x));
    }
    let rest = t1 - t;
    if rest.abs() > 1e-12 * cfg.dt {
        x = rk4_step(field, &x, t, rest)?;
        out.push((t1, x));
    }
    Ok(out)
}

/// Central-difference flow gradient; column `i` is
/// `(F(x0 + h e_i) - F(x0 - h e_i)) / 2h`.
pub fn flow_gradient(
    field: &VelocityField,
    x0: &Vec3,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<Mat3> {
    let mut g = Mat3::zeros();
    for i in 0..3 {
        let mut e = Vec3::zeros();
        e[i] = cfg.grad_h;
        let fp = advect_point(field, &(x0 + e), t0, t1, cfg)?;
        let fm = advect_point(field, &(x0 - e), t0, t1, cfg)?;
        g.set_column(i, &((fp - fm) / (2.0 * cfg.grad_h)));
    }
    Ok(g)
}

#[inline]
fn rk4_step_variational(
    field: &VelocityField,
    x: &Vec3,
    m: &Mat3,
    n: Option<&Mat3>,
    t: f64,
    h: f64,
) -> Result<(Vec3, Mat3, Option<Mat3>)> {
    let (v1, j1) = field.eval_with_jacobian(x, t)?;
    let (v2, j2) = field.eval_with_jacobian(&(x + 0.5 * h * v1), t + 0.5 * h)?;
    let (v3, j3) = field.eval_with_jacobian(&(x + 0.5 * h * v2), t + 0.5 * h)?;
    let (v4, j4) = field.eval_with_jacobian(&(x + h * v3), t + h)?;
    let k1m = j1 * m;
    let k2m = j2 * (m + 0.5 * h * k1m);
    let k3m = j3 * (m + 0.5 * h * k2m);
    let k4m = j4 * (m + h * k3m);
    // the inverse obeys dN/dt = -N J along the same trajectory
    let n_next = n.map(|n| {
        let k1 = -(n * j1);
        let k2 = -((n + 0.5 * h * k1) * j2);
        let k3 = -((n + 0.5 * h * k2) * j3);
        let k4 = -((n + h * k3) * j4);
        n + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    });
    Ok((
        x + h / 6.0 * (v1 + 2.0 * v2 + 2.0 * v3 + v4),
        m + h / 6.0 * (k1m + 2.0 * k2m + 2.0 * k3m + k4m),
        n_next,
    ))
}

fn integrate_variational(
    field: &VelocityField,
    x0: &Vec3,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
    with_inverse: bool,
) -> Result<(Vec3, Mat3, Option<Mat3>)> {
    check_span(field, t0, t1)?;
    let mut x = *x0;
    let mut m = Mat3::identity();
    let mut n = with_inverse.then(Mat3::identity);
    let span = t1 - t0;
    if span == 0.0 {
        return Ok((x, m, n));
    }
    let h = span.signum() * cfg.dt;
    let full = (span.abs() / cfg.dt).floor() as usize;
    let mut t = t0;
    for k in 0..full {
        (x, m, n) = rk4_step_variational(field, &x, &m, n.as_ref(), t, h)?;
        t = t0 + (k + 1) as f64 * h;
    }
    let rest = t1 - t;
    if rest.abs() > 1e-12 * cfg.dt {
        (x, m, n) = rk4_step_variational(field, &x, &m, n.as_ref(), t, rest)?;
    }
    Ok((x, m, n))
}

/// Final position and flow gradient from one trajectory, integrating the
/// variational equation with the same RK4 stepping as [`advect_point`].
pub fn advect_with_gradient(
    field: &VelocityField,
    x0: &Vec3,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<(Vec3, Mat3)> {
    let (x, m, _) = integrate_variational(field, x0, t0, t1, cfg, false)?;
    Ok((x, m))
}

/// Like [`advect_with_gradient`], also returning the inverse gradient
/// integrated along the same trajectory.
pub fn advect_with_gradient_and_inverse(
    field: &VelocityField,
    x0: &Vec3,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<(Vec3, Mat3, Mat3)> {
    let (x, m, n) = integrate_variational(field, x0, t0, t1, cfg, true)?;
    Ok((x, m, n.expect("inverse requested")))
}

/// `gradFᵀ gradF`, symmetrized to remove rounding asymmetry.
pub fn cauchy_green(grad_f: &Mat3) -> Mat3 {
    let m = grad_f.transpose() * grad_f;
    (m + m.transpose()) * 0.5
}

pub fn flow_map_sample(
    field: &VelocityField,
    x0: &Vec3,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<FlowMapSample> {
    let (f_val, grad_f, grad_b) = match cfg.gradient {
        GradientMethod::Variational if cfg.inverse_gradient => {
            let (x, m, n) = advect_with_gradient_and_inverse(field, x0, t0, t1, cfg)?;
            (x, m, Some(n))
        }
        GradientMethod::Variational => {
            let (x, m) = advect_with_gradient(field, x0, t0, t1, cfg)?;
            (x, m, None)
        }
        GradientMethod::FiniteDifference => (
            advect_point(field, x0, t0, t1, cfg)?,
            flow_gradient(field, x0, t0, t1, cfg)?,
            None,
        ),
    };
    if !f_val
        .iter()
        .chain(grad_f.iter())
        .chain(grad_b.iter().flat_map(|b| b.iter()))
        .all(|v| v.is_finite())
    {
        return Err(LcsError::NonFinite("flow map"));
    }
    Ok(FlowMapSample {
        x0: *x0,
        t0,
        t1,
        f_val,
        grad_f,
        c: cauchy_green(&grad_f),
        grad_b,
    })
}

/// Analytic velocity gradient by central differences, `J[i][j] = dv_i/dx_j`.
pub fn velocity_gradient(field: &VelocityField, x: &Vec3, t: f64, h: f64) -> Result<Mat3> {
    let mut j = Mat3::zeros();
    for i in 0..3 {
        let mut e = Vec3::zeros();
        e[i] = h;
        let d = (field.eval(&(x + e), t)? - field.eval(&(x - e), t)?) / (2.0 * h);
        j.set_column(i, &d);
    }
    Ok(j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::ShearProfiles;

    #[test]
    fn zero_field_is_identity() {
        let f = VelocityField::zero();
        let cfg = IntegratorConfig::default();
        let x = Vec3::new(0.3, -1.2, 2.0);
        assert_eq!(advect_point(&f, &x, 0.0, 3.7, &cfg).unwrap(), x);
        let g = flow_gradient(&f, &x, 0.0, 3.7, &cfg).unwrap();
        assert!((g - Mat3::identity()).abs().max() < 1e-10);
    }

    #[test]
    fn linear_shear_exact() {
        let f = VelocityField::parallel_shear(ShearProfiles::linear_u(1.0));
        let cfg = IntegratorConfig::default();
        let t = 2.345;
        let x = advect_point(&f, &Vec3::new(0.0, 0.0, 1.0), 0.0, t, &cfg).unwrap();
        assert!((x - Vec3::new(t, 0.0, 1.0)).norm() < 1e-12);
        let g = flow_gradient(&f, &Vec3::new(0.5, 0.5, 1.0), 0.0, t, &cfg).unwrap();
        let expect = Mat3::new(1.0, 0.0, t, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!((g - expect).abs().max() < 1e-8);
        let c = cauchy_green(&g);
        let ce = Mat3::new(1.0, 0.0, t, 0.0, 1.0, 0.0, t, 0.0, t * t + 1.0);
        assert!((c - ce).abs().max() < 1e-8);
    }

    #[test]
    fn forward_backward_returns() {
        let f = VelocityField::steady_abc();
        let cfg = IntegratorConfig::default();
        let x = Vec3::new(1.0, 2.0, 3.0);
        let y = advect_point(&f, &x, 0.0, 1.0, &cfg).unwrap();
        let back = advect_point(&f, &y, 1.0, 0.0, &cfg).unwrap();
        assert!((back - x).norm() < 1e-6);
    }

    #[test]
    fn partial_last_step_lands_on_t1() {
        let f = VelocityField::parallel_shear(ShearProfiles::linear_u(1.0));
        let cfg = IntegratorConfig {
            dt: 0.3,
            ..Default::default()
        };
        let tr = trajectory(&f, &Vec3::new(0.0, 0.0, 2.0), 0.0, 1.0, &cfg).unwrap();
        assert_eq!(tr.len(), 5);
        assert_eq!(tr.last().unwrap().0, 1.0);
        assert!((tr.last().unwrap().1[0] - 2.0).abs() < 1e-12);
        let end = advect_point(&f, &Vec3::new(0.0, 0.0, 2.0), 0.0, 1.0, &cfg).unwrap();
        assert_eq!(end, tr.last().unwrap().1);
    }

    #[test]
    fn short_time_gradient_is_first_order_taylor() {
        let f = VelocityField::steady_abc();
        let cfg = IntegratorConfig {
            dt: 1e-4,
            ..Default::default()
        };
        let x = Vec3::new(0.7, 1.9, 4.1);
        let t = 1e-3;
        let g = flow_gradient(&f, &x, 0.0, t, &cfg).unwrap();
        let j = velocity_gradient(&f, &x, 0.0, 1e-5).unwrap();
        let err = (g - (Mat3::identity() + t * j)).abs().max();
        assert!(err < 10.0 * t * t, "err {err}");
    }

    #[test]
    fn identity_gradient_gives_identity_tensor() {
        assert_eq!(cauchy_green(&Mat3::identity()), Mat3::identity());
        let m = Mat3::new(2.0, 1.0, 0.0, 0.0, 0.5, 0.3, 0.0, 0.0, 1.0);
        assert!((cauchy_green(&m).determinant() - 1.0).abs() < 1e-12);
        let c = cauchy_green(&m);
        assert_eq!(c, c.transpose());
    }

    #[test]
    fn gradient_richardson_consistency() {
        let f = VelocityField::steady_abc();
        let x = Vec3::new(2.0, 1.0, 0.5);
        let a = IntegratorConfig {
            grad_h: 1e-3,
            ..Default::default()
        };
        let b = IntegratorConfig {
            grad_h: 5e-4,
            ..Default::default()
        };
        let ga = flow_gradient(&f, &x, 0.0, 2.0, &a).unwrap();
        let gb = flow_gradient(&f, &x, 0.0, 2.0, &b).unwrap();
        let scale = ga.abs().max();
        assert!((ga - gb).abs().max() < 10.0 * 1e-6 * scale);
    }

    #[test]
    fn backward_map_inverts_forward() {
        let f = VelocityField::periodic_abc();
        let cfg = IntegratorConfig::default();
        let x = Vec3::new(0.4, 5.0, 2.2);
        let y = advect_point(&f, &x, 0.0, 1.0, &cfg).unwrap();
        let gf = flow_gradient(&f, &x, 0.0, 1.0, &cfg).unwrap();
        let gb = flow_gradient(&f, &y, 1.0, 0.0, &cfg).unwrap();
        assert!((gb * gf - Mat3::identity()).abs().max() < 1e-4);
    }

    #[test]
    fn variational_gradient_matches_differences() {
        let f = VelocityField::steady_abc();
        let cfg = IntegratorConfig::default();
        let x = Vec3::new(2.0, 1.0, 0.5);
        let (y, g) = advect_with_gradient(&f, &x, 0.0, 2.0, &cfg).unwrap();
        assert_eq!(y, advect_point(&f, &x, 0.0, 2.0, &cfg).unwrap());
        let fd = flow_gradient(&f, &x, 0.0, 2.0, &cfg).unwrap();
        assert!((g - fd).abs().max() < 1e-6 * g.abs().max());
        let s = flow_map_sample(&f, &x, 0.0, 2.0, &cfg).unwrap();
        assert_eq!(s.grad_f, g);
        assert!((s.grad_b.unwrap() * g - Mat3::identity()).abs().max() < 1e-8);
        let (_, gb) = advect_with_gradient(&f, &y, 2.0, 0.0, &cfg).unwrap();
        assert!((gb * g - Mat3::identity()).abs().max() < 1e-8);
    }

    #[test]
    fn abc_flows_preserve_volume() {
        let cfg = IntegratorConfig::default();
        let signal = std::sync::Arc::new(
            crate::flow::generate_duffing_forcing(
                &crate::flow::DuffingParams::default(),
                (0.0, 5.0),
                0.01,
            )
            .unwrap(),
        );
        for field in [
            VelocityField::steady_abc(),
            VelocityField::periodic_abc(),
            VelocityField::chaotic_abc(signal),
        ] {
            for k in 0..4 {
                let x = Vec3::new(0.9 * k as f64, 1.3 + 0.7 * k as f64, 5.5 - k as f64);
                let (_, g) = advect_with_gradient(&field, &x, 0.0, 5.0, &cfg).unwrap();
                assert!(
                    (g.determinant() - 1.0).abs() < 1e-6,
                    "{} {}",
                    field.label,
                    g.determinant()
                );
            }
        }
    }
}
