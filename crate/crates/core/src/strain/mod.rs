//! Strain quantities derived from the Cauchy-Green tensor: eigen-frames,
//! shear normals, normal repulsion and tangential shear.

mod eigen;
mod grid;
pub mod grid_io;

pub use eigen::{
    canonical_sign, eigen_frame, gradient_eigen_frame, singular_values, symmetric_eigen, EigenFrame,
};
pub use grid::{
    align_frame, frobenius_grid, helicity_grid, sample_plane, DeformationGrid, FrameVector,
    FrobeniusTriple, GridConfig, HelicityField, HelicitySet, PlaneSpec, PointRecord, PointStatus,
};

use crate::error::{LcsError, Result};
use crate::{Mat3, Vec3};

/// The two unit normals of maximal tangential shear.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShearNormals {
    pub n_plus: Vec3,
    pub n_minus: Vec3,
}

/// Weights `(alpha, beta)` with `n± = alpha xi1 ± beta xi3`.
pub fn shear_weights(lambda1: f64, lambda3: f64) -> (f64, f64) {
    let s1 = lambda1.sqrt();
    let s3 = lambda3.sqrt();
    ((s1 / (s1 + s3)).sqrt(), (s3 / (s1 + s3)).sqrt())
}

/// Shear normals from given (possibly re-signed) eigenvectors.
pub fn shear_normals_from(lambda1: f64, lambda3: f64, xi1: &Vec3, xi3: &Vec3) -> ShearNormals {
    let (a, b) = shear_weights(lambda1, lambda3);
    ShearNormals {
        n_plus: a * xi1 + b * xi3,
        n_minus: a * xi1 - b * xi3,
    }
}

pub fn shear_normals(frame: &EigenFrame) -> Result<ShearNormals> {
    if !frame.in_u {
        return Err(LcsError::DegenerateFrame);
    }
    Ok(shear_normals_from(
        frame.lambda1(),
        frame.lambda3(),
        &frame.xi1(),
        &frame.xi3(),
    ))
}

fn inverse_quadratic_form(c: &Mat3, n0: &Vec3) -> Result<f64> {
    let chol = nalgebra::Cholesky::new(*c).ok_or(LcsError::Singular)?;
    let q = n0.dot(&chol.solve(n0));
    if !(q > 0.0 && q.is_finite()) {
        return Err(LcsError::Singular);
    }
    Ok(q)
}

/// Normal repulsion `1 / sqrt(<n0, C⁻¹ n0>)`.
pub fn normal_repulsion(c: &Mat3, n0: &Vec3) -> Result<f64> {
    Ok(1.0 / inverse_quadratic_form(c, n0)?.sqrt())
}

/// Tangential shear `sqrt(<n0, C n0> - rho²)`, radicand clamped at zero.
pub fn tangential_shear(c: &Mat3, n0: &Vec3) -> Result<f64> {
    let rho2 = 1.0 / inverse_quadratic_form(c, n0)?;
    Ok((n0.dot(&(c * n0)) - rho2).max(0.0).sqrt())
}

/// Normal repulsion from its definition: the growth of `n0` along the
/// transported unit normal `n_t = G⁻ᵀ n0 / |G⁻ᵀ n0|`.
pub fn normal_repulsion_direct(grad_f: &Mat3, n0: &Vec3) -> Result<f64> {
    let inv_t = grad_f.try_inverse().ok_or(LcsError::Singular)?.transpose();
    let m = inv_t * n0;
    let nt = m / m.norm();
    Ok(nt.dot(&(grad_f * n0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
        loop {
            let v = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let n = v.norm();
            if n > 0.1 && n <= 1.0 {
                return v / n;
            }
        }
    }

    fn random_matrix(rng: &mut ChaCha8Rng) -> Mat3 {
        Mat3::from_fn(|_, _| rng.random_range(-2.0..2.0)) + Mat3::identity() * 0.5
    }

    #[test]
    fn shear_normals_by_hand() {
        let frame = EigenFrame {
            lambda: [0.25, 1.0, 4.0],
            xi: [Vec3::x(), Vec3::y(), Vec3::z()],
            in_u: true,
        };
        let n = shear_normals(&frame).unwrap();
        assert!((n.n_plus - Vec3::new(0.2f64.sqrt(), 0.0, 0.8f64.sqrt())).norm() < 1e-15);
        assert!((n.n_minus - Vec3::new(0.2f64.sqrt(), 0.0, -(0.8f64.sqrt()))).norm() < 1e-15);
        let degenerate = EigenFrame {
            in_u: false,
            ..frame
        };
        assert_eq!(shear_normals(&degenerate), Err(LcsError::DegenerateFrame));
    }

    #[test]
    fn repulsion_and_shear_special_cases() {
        let c = Mat3::from_diagonal(&Vec3::new(0.25, 1.0, 4.0));
        let f = eigen_frame(&c, 1e-6).unwrap();
        assert!((normal_repulsion(&c, &f.xi3()).unwrap() - 2.0).abs() < 1e-14);
        for xi in f.xi {
            assert!(tangential_shear(&c, &xi).unwrap() < 1e-7);
        }
        let n = shear_normals(&f).unwrap();
        for v in [n.n_plus, n.n_minus] {
            assert!((v.norm() - 1.0).abs() < 1e-14);
            assert!(v.dot(&f.xi2()).abs() < 1e-14);
            assert!((tangential_shear(&c, &v).unwrap() - 1.5).abs() < 1e-12);
        }
        let id = Mat3::identity();
        assert_eq!(normal_repulsion(&id, &Vec3::x()).unwrap(), 1.0);
        assert_eq!(tangential_shear(&id, &Vec3::x()).unwrap(), 0.0);
        assert_eq!(
            normal_repulsion(&Mat3::zeros(), &Vec3::x()),
            Err(LcsError::Singular)
        );
    }

    #[test]
    fn repulsion_matches_direct_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let g = random_matrix(&mut rng);
            if g.determinant().abs() < 1e-2 {
                continue;
            }
            let c = g.transpose() * g;
            let n0 = random_unit(&mut rng);
            let a = normal_repulsion(&c, &n0).unwrap();
            let b = normal_repulsion_direct(&g, &n0).unwrap();
            assert!((a - b).abs() < 1e-8 * a.max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn shear_at_both_normals_is_equal_and_repulsion_maximal_at_xi3() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let g = random_matrix(&mut rng);
            let c = g.transpose() * g;
            let Ok(f) = eigen_frame(&c, 1e-6) else {
                continue;
            };
            if !f.in_u || f.lambda1() < 1e-6 {
                continue;
            }
            let n = shear_normals(&f).unwrap();
            let sp = tangential_shear(&c, &n.n_plus).unwrap();
            let sm = tangential_shear(&c, &n.n_minus).unwrap();
            let expect = f.lambda3().sqrt() - f.lambda1().sqrt();
            assert!((sp - sm).abs() < 1e-8 * expect.max(1.0));
            assert!((sp - expect).abs() < 1e-8 * expect.max(1.0));
            let r3 = normal_repulsion(&c, &f.xi3()).unwrap();
            for _ in 0..200 {
                let v = random_unit(&mut rng);
                assert!(normal_repulsion(&c, &v).unwrap() <= r3 * (1.0 + 1e-12));
            }
        }
    }
}
