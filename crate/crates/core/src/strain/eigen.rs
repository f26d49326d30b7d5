//! Cyclic Jacobi eigensolver for symmetric 3x3 matrices.

use crate::error::{LcsError, Result};
use crate::{Mat3, Vec3};

/// Eigen-decomposition of a symmetric positive-definite 3x3 tensor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenFrame {
    /// Ascending eigenvalues.
    pub lambda: [f64; 3],
    /// Unit eigenvectors, `xi[i]` belongs to `lambda[i]`.
    pub xi: [Vec3; 3],
    /// Eigenvalues are pairwise distinct beyond the gap tolerance.
    pub in_u: bool,
}

impl EigenFrame {
    pub fn lambda1(&self) -> f64 {
        self.lambda[0]
    }
    pub fn lambda2(&self) -> f64 {
        self.lambda[1]
    }
    pub fn lambda3(&self) -> f64 {
        self.lambda[2]
    }
    pub fn xi1(&self) -> Vec3 {
        self.xi[0]
    }
    pub fn xi2(&self) -> Vec3 {
        self.xi[1]
    }
    pub fn xi3(&self) -> Vec3 {
        self.xi[2]
    }
}

/// Symmetric eigen-decomposition with ascending eigenvalues. Returns the raw
/// (unsigned) eigenvectors as columns of an orthogonal matrix.
pub fn symmetric_eigen(c: &Mat3) -> ([f64; 3], Mat3) {
    let mut a = *c;
    let mut v = Mat3::identity();
    for _sweep in 0..50 {
        let off = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
        let diag = a[(0, 0)].powi(2) + a[(1, 1)].powi(2) + a[(2, 2)].powi(2);
        if off <= 1e-36 * diag || off == 0.0 {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            let apq = a[(p, q)];
            if apq == 0.0 {
                continue;
            }
            let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let cs = 1.0 / (t * t + 1.0).sqrt();
            let sn = t * cs;
            // A <- Jᵀ A J with J the rotation in the (p, q) plane
            for k in 0..3 {
                let akp = a[(k, p)];
                let akq = a[(k, q)];
                a[(k, p)] = cs * akp - sn * akq;
                a[(k, q)] = sn * akp + cs * akq;
            }
            for k in 0..3 {
                let apk = a[(p, k)];
                let aqk = a[(q, k)];
                a[(p, k)] = cs * apk - sn * aqk;
                a[(q, k)] = sn * apk + cs * aqk;
            }
            a[(p, q)] = 0.0;
            a[(q, p)] = 0.0;
            for k in 0..3 {
                let vkp = v[(k, p)];
                let vkq = v[(k, q)];
                v[(k, p)] = cs * vkp - sn * vkq;
                v[(k, q)] = sn * vkp + cs * vkq;
            }
        }
    }
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let lambda = [
        a[(idx[0], idx[0])],
        a[(idx[1], idx[1])],
        a[(idx[2], idx[2])],
    ];
    let mut out = Mat3::zeros();
    for (k, &i) in idx.iter().enumerate() {
        out.set_column(k, &v.column(i));
    }
    (lambda, out)
}

/// Flip `v` so that its largest-magnitude component is positive.
pub fn canonical_sign(v: Vec3) -> Vec3 {
    let mut k = 0;
    for i in 1..3 {
        if v[i].abs() > v[k].abs() {
            k = i;
        }
    }
    if v[k] < 0.0 {
        -v
    } else {
        v
    }
}

/// Each eigenvalue gap exceeds `gap_tol` times the larger eigenvalue of the
/// pair.
pub fn distinct_spectrum(lambda: &[f64; 3], gap_tol: f64) -> bool {
    lambda[1] - lambda[0] > gap_tol * lambda[1] && lambda[2] - lambda[1] > gap_tol * lambda[2]
}

/// Orthonormalize an ascending eigenvector basis, fix canonical signs and
/// classify the spectrum.
fn finish_frame(lambda: [f64; 3], v: &Mat3, gap_tol: f64) -> EigenFrame {
    // Gram-Schmidt on the two dominant directions, third by cross product
    let e3 = v.column(2).normalize();
    let e2 = {
        let w = v.column(1) - e3 * e3.dot(&v.column(1));
        w.normalize()
    };
    let e1 = {
        let w = e2.cross(&e3);
        if w.dot(&v.column(0)) < 0.0 {
            -w
        } else {
            w
        }
    };
    let xi = [canonical_sign(e1), canonical_sign(e2), canonical_sign(e3)];
    let in_u = distinct_spectrum(&lambda, gap_tol);
    EigenFrame { lambda, xi, in_u }
}

/// Eigen-frame of a Cauchy-Green tensor: ascending eigenvalues, orthonormal
/// canonically signed eigenvectors, and the distinct-spectrum flag.
pub fn eigen_frame(c: &Mat3, gap_tol: f64) -> Result<EigenFrame> {
    if !c.iter().all(|v| v.is_finite()) {
        return Err(LcsError::NonFinite("Cauchy-Green tensor"));
    }
    let sym = (c + c.transpose()) * 0.5;
    let (lambda, v) = symmetric_eigen(&sym);
    if !(lambda[0] > 0.0) {
        return Err(LcsError::NotPositiveDefinite(lambda[0]));
    }
    Ok(finish_frame(lambda, &v, gap_tol))
}

/// Singular values (ascending) and right singular vectors of `g` by
/// one-sided Jacobi rotations. Small singular values keep their relative
/// accuracy, unlike an eigen-decomposition of `gᵀg`.
pub fn singular_values(g: &Mat3) -> ([f64; 3], Mat3) {
    let mut u = *g;
    let mut v = Mat3::identity();
    for _sweep in 0..60 {
        let mut rotated = false;
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            let alpha = u.column(p).norm_squared();
            let beta = u.column(q).norm_squared();
            let gamma = u.column(p).dot(&u.column(q));
            if gamma == 0.0 || gamma.abs() <= 1e-16 * (alpha * beta).sqrt() {
                continue;
            }
            rotated = true;
            let zeta = (beta - alpha) / (2.0 * gamma);
            let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
            let cs = 1.0 / (1.0 + t * t).sqrt();
            let sn = cs * t;
            for m in [&mut u, &mut v] {
                let cp = m.column(p).into_owned();
                let cq = m.column(q).into_owned();
                m.set_column(p, &(cp * cs - cq * sn));
                m.set_column(q, &(cp * sn + cq * cs));
            }
        }
        if !rotated {
            break;
        }
    }
    let sigma = [u.column(0).norm(), u.column(1).norm(), u.column(2).norm()];
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&i, &j| sigma[i].total_cmp(&sigma[j]));
    let mut out = Mat3::zeros();
    for (k, &i) in idx.iter().enumerate() {
        out.set_column(k, &v.column(i));
    }
    ([sigma[idx[0]], sigma[idx[1]], sigma[idx[2]]], out)
}

/// Eigen-frame of `C = gᵀg` computed from the flow gradient `g` itself.
/// When the inverse gradient `g_inv` (the backward map's gradient) is
/// given, `lambda1` is taken from its largest singular value, which stays
/// accurate when `lambda3 / lambda1` approaches the limits of double
/// precision.
pub fn gradient_eigen_frame(g: &Mat3, g_inv: Option<&Mat3>, gap_tol: f64) -> Result<EigenFrame> {
    if !g.iter().all(|v| v.is_finite()) {
        return Err(LcsError::NonFinite("flow gradient"));
    }
    let (sigma, v) = singular_values(g);
    let mut lambda = sigma.map(|s| s * s);
    if let Some(gi) = g_inv {
        if !gi.iter().all(|v| v.is_finite()) {
            return Err(LcsError::NonFinite("inverse flow gradient"));
        }
        let (tau, _) = singular_values(gi);
        lambda[0] = 1.0 / (tau[2] * tau[2]);
        if lambda[0] > lambda[1] {
            // inconsistent pair (e.g. nearly degenerate spectrum); keep forward value
            lambda[0] = sigma[0] * sigma[0];
        }
    }
    if !(lambda[0] > 0.0) {
        return Err(LcsError::NotPositiveDefinite(lambda[0]));
    }
    Ok(finish_frame(lambda, &v, gap_tol))
}
