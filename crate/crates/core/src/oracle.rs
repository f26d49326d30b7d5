//! Independent ground truth: the closed-form Cauchy-Green tensor of
//! parallel shear flows, brute-force extremum searches over the unit
//! sphere, and the angle-lemma residual.

use crate::error::{LcsError, Result};
use crate::flow::ShearProfiles;
use crate::strain::{normal_repulsion, symmetric_eigen, tangential_shear, EigenFrame};
use crate::{Mat3, Vec3};

/// Cauchy-Green tensor of a parallel shear flow,
/// `C = [[1, 0, a], [0, 1, b], [a, b, 1 + a² + b²]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticCg {
    pub a: f64,
    pub b: f64,
    pub c: Mat3,
}

impl AnalyticCg {
    pub fn from_ab(a: f64, b: f64) -> Self {
        let c = Mat3::new(1.0, 0.0, a, 0.0, 1.0, b, a, b, 1.0 + a * a + b * b);
        AnalyticCg { a, b, c }
    }

    /// Closed-form eigenvalues in ascending order; the middle one is 1.
    pub fn eigenvalues(&self) -> [f64; 3] {
        let s = self.a * self.a + self.b * self.b;
        let r = (s * (s + 4.0)).sqrt() / 2.0;
        let m = 1.0 + s / 2.0;
        // The small root as 1 / large root avoids cancellation.
        [1.0 / (m + r), 1.0, m + r]
    }
}

/// Tensor of the flow `x' = u(z,t)`, `y' = v(z,t)`, `z' = w(t)` started at
/// height `z0`: `z(τ)` follows from `w`, then `a = ∫ u_z` and `b = ∫ v_z`
/// along it by composite Simpson with step close to `dt`.
pub fn parallel_shear_cg(
    profiles: &ShearProfiles,
    z0: f64,
    t0: f64,
    t: f64,
    dt: f64,
) -> Result<AnalyticCg> {
    if !(dt > 0.0) || !t.is_finite() || !z0.is_finite() || !t0.is_finite() {
        return Err(LcsError::InvalidArgument(
            "quadrature needs finite inputs and dt > 0".into(),
        ));
    }
    if t == 0.0 {
        return Ok(AnalyticCg::from_ab(0.0, 0.0));
    }
    let mut n = (t.abs() / dt).ceil() as usize;
    n += n % 2;
    let h = t / n as f64;
    let w = &profiles.w;
    let mut z = z0;
    let (mut a, mut b) = (0.0, 0.0);
    for k in 0..=n {
        let tau = t0 + k as f64 * h;
        let weight = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        a += weight * profiles.du_dz(z, tau);
        b += weight * profiles.dv_dz(z, tau);
        if k < n {
            z += h / 6.0 * (w(tau) + 4.0 * w(tau + h / 2.0) + w(tau + h));
        }
    }
    let (a, b) = (a * h / 3.0, b * h / 3.0);
    if !(a.is_finite() && b.is_finite()) {
        return Err(LcsError::NonFinite("shear integrals"));
    }
    Ok(AnalyticCg::from_ab(a, b))
}

/// `n` quasi-uniform unit vectors on the golden-angle spiral.
pub fn fibonacci_sphere(n: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|k| {
            let z = 1.0 - (2.0 * k as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * k as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// Maximizer of `f` on the unit sphere and the maximum, found by direct
/// evaluation on the sample followed by a Nelder-Mead polish in the tangent
/// plane of the best sample.
fn sphere_max(n: usize, f: impl Fn(&Vec3) -> Result<f64>) -> Result<(Vec3, f64)> {
    if n < 4 {
        return Err(LcsError::InvalidArgument(
            "sphere sample needs at least 4 points".into(),
        ));
    }
    let mut best = (Vec3::z(), f64::NEG_INFINITY);
    for d in fibonacci_sphere(n) {
        let v = f(&d)?;
        if v > best.1 {
            best = (d, v);
        }
    }
    let d = best.0;
    let helper = if d[0].abs() < 0.9 {
        Vec3::x()
    } else {
        Vec3::y()
    };
    let e1 = d.cross(&helper).normalize();
    let e2 = d.cross(&e1);
    let point = |p: [f64; 2]| (d + p[0] * e1 + p[1] * e2).normalize();
    // Spacing of the sample sets the initial simplex size.
    let step = (4.0 * std::f64::consts::PI / n as f64).sqrt();
    let (p, v) = nelder_mead_max(|p| f(&point(p)), step, 1e-12, 400)?;
    if v >= best.1 {
        Ok((point(p), v))
    } else {
        Ok(best)
    }
}

/// Maximize a function of two variables starting from the origin.
fn nelder_mead_max(
    f: impl Fn([f64; 2]) -> Result<f64>,
    step: f64,
    xtol: f64,
    max_iter: usize,
) -> Result<([f64; 2], f64)> {
    let g = |p: [f64; 2]| f(p).map(|v| -v);
    let mut s: Vec<([f64; 2], f64)> = Vec::with_capacity(3);
    for p in [[0.0, 0.0], [step, 0.0], [0.0, step]] {
        s.push((p, g(p)?));
    }
    let lerp =
        |a: [f64; 2], b: [f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    for _ in 0..max_iter {
        s.sort_by(|a, b| a.1.total_cmp(&b.1));
        let size = s[1..]
            .iter()
            .map(|q| (q.0[0] - s[0].0[0]).hypot(q.0[1] - s[0].0[1]))
            .fold(0.0, f64::max);
        if size < xtol {
            break;
        }
        let centroid = [(s[0].0[0] + s[1].0[0]) / 2.0, (s[0].0[1] + s[1].0[1]) / 2.0];
        let worst = s[2];
        let r = lerp(centroid, worst.0, -1.0);
        let fr = g(r)?;
        if fr < s[0].1 {
            let e = lerp(centroid, worst.0, -2.0);
            let fe = g(e)?;
            s[2] = if fe < fr { (e, fe) } else { (r, fr) };
        } else if fr < s[1].1 {
            s[2] = (r, fr);
        } else {
            let c = if fr < worst.1 {
                lerp(centroid, r, 0.5)
            } else {
                lerp(centroid, worst.0, 0.5)
            };
            let fc = g(c)?;
            if fc < worst.1.min(fr) {
                s[2] = (c, fc);
            } else {
                let b = s[0].0;
                for q in s.iter_mut().skip(1) {
                    q.0 = lerp(b, q.0, 0.5);
                    q.1 = g(q.0)?;
                }
            }
        }
    }
    s.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok((s[0].0, -s[0].1))
}

fn check_spd(c: &Mat3) -> Result<()> {
    if c.iter().any(|v| !v.is_finite()) {
        return Err(LcsError::NonFinite("tensor"));
    }
    let (lambda, _) = symmetric_eigen(&((c + c.transpose()) / 2.0));
    if !(lambda[0] > 0.0) {
        return Err(LcsError::NotPositiveDefinite(lambda[0]));
    }
    Ok(())
}

/// Brute-force maximum of the tangential shear over `n` sphere samples.
/// `C = I` is allowed and gives zero shear in every direction.
pub fn brute_max_shear(c: &Mat3, n: usize) -> Result<(Vec3, f64)> {
    check_spd(c)?;
    sphere_max(n, |d| tangential_shear(c, d))
}

/// Brute-force maximum of the normal repulsion over `n` sphere samples.
pub fn brute_max_repulsion(c: &Mat3, n: usize) -> Result<(Vec3, f64)> {
    check_spd(c)?;
    sphere_max(n, |d| normal_repulsion(c, d))
}

/// `<v, C v>` written out in the spherical angles of `v` (polar angle `φ`
/// from `e_z`, azimuth `θ`) minus `sqrt(λ1 λ3)`. Vanishes for `v = ξ2 × n±`.
pub fn angle_lemma_residual(c: &Mat3, frame: &EigenFrame, v: &Vec3) -> f64 {
    let v = v.normalize();
    let phi = v[2].clamp(-1.0, 1.0).acos();
    let theta = v[1].atan2(v[0]);
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    let lhs = c[(0, 0)] * sp * sp * ct * ct
        + c[(1, 1)] * sp * sp * st * st
        + c[(2, 2)] * cp * cp
        + 2.0
            * (c[(0, 1)] * sp * sp * st * ct + c[(0, 2)] * sp * cp * ct + c[(1, 2)] * sp * cp * st);
    lhs - (frame.lambda1() * frame.lambda3()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strain::{eigen_frame, shear_normals};

    fn angle_deg(a: &Vec3, b: &Vec3) -> f64 {
        a.normalize()
            .dot(&b.normalize())
            .abs()
            .min(1.0)
            .acos()
            .to_degrees()
    }

    #[test]
    fn linear_shear_tensor() {
        let cg = parallel_shear_cg(&ShearProfiles::linear_u(1.0), 0.3, 0.0, 1.0, 0.01).unwrap();
        assert!((cg.a - 1.0).abs() < 1e-12 && cg.b.abs() < 1e-15);
        let expected = Mat3::new(1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 2.0);
        assert!((cg.c - expected).norm() < 1e-12);
    }

    #[test]
    fn no_shear_is_identity() {
        let p = ShearProfiles::new(|_, _| 0.0, |_, _| 0.0, |t| t.sin());
        let cg = parallel_shear_cg(&p, 1.0, 0.0, 5.0, 0.01).unwrap();
        assert_eq!(cg.c, Mat3::identity());
    }

    #[test]
    fn b_uses_v_profile() {
        // u = 0, v = 2z: only b is nonzero.
        let p = ShearProfiles::new(|_, _| 0.0, |z, _| 2.0 * z, |_| 0.0);
        let cg = parallel_shear_cg(&p, 0.0, 0.0, 1.5, 0.01).unwrap();
        assert!(cg.a.abs() < 1e-9);
        assert!((cg.b - 3.0).abs() < 1e-8);
    }

    #[test]
    fn moving_layer_quadrature() {
        // w = 1 so z = z0 + τ; u_z = cos z integrates to sin(z0+T) - sin z0.
        let p = ShearProfiles::new(|z, _| z.sin(), |_, _| 0.0, |_| 1.0)
            .with_derivatives(|z, _| z.cos(), |_, _| 0.0);
        let cg = parallel_shear_cg(&p, 0.2, 0.0, 3.0, 0.01).unwrap();
        assert!((cg.a - (3.2f64.sin() - 0.2f64.sin())).abs() < 1e-9);
    }

    #[test]
    fn analytic_spectrum_contains_one() {
        for (a, b) in [(1.0, 0.0), (0.3, -2.0), (5.0, 4.0)] {
            let cg = AnalyticCg::from_ab(a, b);
            let (lambda, vecs) = symmetric_eigen(&cg.c);
            let closed = cg.eigenvalues();
            for k in 0..3 {
                assert!(
                    (lambda[k] - closed[k]).abs() < 1e-10 * closed[2],
                    "{lambda:?} {closed:?}"
                );
            }
            let xi2 = vecs.column(1).into_owned();
            assert!(angle_deg(&xi2, &Vec3::new(-b, a, 0.0)) < 1e-6);
        }
    }

    #[test]
    fn fibonacci_points_are_unit_and_spread() {
        let pts = fibonacci_sphere(1000);
        assert!(pts.iter().all(|p| (p.norm() - 1.0).abs() < 1e-12));
        let mean: Vec3 = pts.iter().sum::<Vec3>() / 1000.0;
        assert!(mean.norm() < 1e-3);
    }

    #[test]
    fn max_shear_of_unit_shear() {
        let c = AnalyticCg::from_ab(1.0, 0.0).c;
        let (_, s) = brute_max_shear(&c, 10_000).unwrap();
        assert!((s - 1.0).abs() < 1e-6, "{s}");
    }

    #[test]
    fn diagonal_shear_maximizer() {
        let c = Mat3::from_diagonal(&Vec3::new(0.25, 1.0, 4.0));
        let (d, s) = brute_max_shear(&c, 10_000).unwrap();
        assert!((s - 1.5).abs() < 1e-6);
        let frame = eigen_frame(&c, 1e-6).unwrap();
        let n = shear_normals(&frame).unwrap();
        assert!(angle_deg(&d, &n.n_plus).min(angle_deg(&d, &n.n_minus)) < 1.0);
    }

    #[test]
    fn identity_has_no_shear_and_unit_repulsion() {
        let (_, s) = brute_max_shear(&Mat3::identity(), 10_000).unwrap();
        assert!(s.abs() < 1e-7);
        let (_, r) = brute_max_repulsion(&Mat3::identity(), 10_000).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn repulsion_maximizer() {
        let c = Mat3::from_diagonal(&Vec3::new(0.25, 1.0, 4.0));
        let (d, r) = brute_max_repulsion(&c, 10_000).unwrap();
        assert!((r - 2.0).abs() < 1e-8);
        assert!(angle_deg(&d, &Vec3::z()) < 1.0);
    }

    #[test]
    fn indefinite_tensor_is_rejected() {
        let c = Mat3::from_diagonal(&Vec3::new(-1.0, 1.0, 2.0));
        assert!(matches!(
            brute_max_shear(&c, 100),
            Err(LcsError::NotPositiveDefinite(_))
        ));
        assert!(brute_max_repulsion(&c, 100).is_err());
    }

    #[test]
    fn angle_lemma_residuals() {
        let c = AnalyticCg::from_ab(0.7, -1.3).c;
        let frame = eigen_frame(&c, 1e-6).unwrap();
        let n = shear_normals(&frame).unwrap();
        let mut horizontal = 0;
        for normal in [n.n_plus, n.n_minus] {
            let v = frame.xi2().cross(&normal);
            assert!(angle_lemma_residual(&c, &frame, &v).abs() < 1e-10);
            horizontal += usize::from(v[2].abs() < 1e-10);
        }
        // One shear normal is e_z, so its v± is tangent to z = const.
        assert_eq!(horizontal, 1);
        let r = angle_lemma_residual(&c, &frame, &frame.xi2());
        let expected = frame.lambda2() - (frame.lambda1() * frame.lambda3()).sqrt();
        assert!((r - expected).abs() < 1e-10 && expected.abs() < 1e-10);
        // Any horizontal direction has <v,Cv> = 1, the vertical one does not.
        assert!(angle_lemma_residual(&c, &frame, &Vec3::new(0.6, 0.8, 0.0)).abs() < 1e-10);
        let vertical = angle_lemma_residual(&c, &frame, &Vec3::z());
        assert!((vertical - (0.49 + 1.69)).abs() < 1e-10);
    }
}
