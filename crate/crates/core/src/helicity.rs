//! Finite-difference helicity `<curl v, v>` and Frobenius integrability
//! scalars `<(∇X)Y - (∇Y)X, Z>` on regular 3D lattices.

use crate::{Mat3, Vec3};

/// Regular lattice with index `(i, j, k)` stored at `i + nx (j + ny k)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lattice3 {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: Vec3,
}

impl Lattice3 {
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, p: [usize; 3]) -> usize {
        p[0] + self.dims[0] * (p[1] + self.dims[1] * p[2])
    }

    pub fn coords(&self, n: usize) -> [usize; 3] {
        let i = n % self.dims[0];
        let j = (n / self.dims[0]) % self.dims[1];
        let k = n / (self.dims[0] * self.dims[1]);
        [i, j, k]
    }

    pub fn position(&self, p: [usize; 3]) -> Vec3 {
        self.origin
            + Vec3::new(
                p[0] as f64 * self.spacing[0],
                p[1] as f64 * self.spacing[1],
                p[2] as f64 * self.spacing[2],
            )
    }

    /// Points whose stencil falls back to one-sided differences along some axis.
    pub fn on_boundary(&self, p: [usize; 3]) -> bool {
        (0..3).any(|a| self.dims[a] > 1 && (p[a] == 0 || p[a] + 1 == self.dims[a]))
    }
}

/// Velocity-gradient-style Jacobian `J[i][a] = dv_i/dx_a` at lattice point
/// `p`. `get` returns the (already sign-aligned) vector at a lattice point or
/// `None` if it is unavailable. Central differences where both neighbors
/// exist, first-order one-sided otherwise; `None` if some axis has no usable
/// neighbor or the center is missing.
pub fn jacobian_at<G>(lat: &Lattice3, p: [usize; 3], get: G) -> Option<Mat3>
where
    G: Fn([usize; 3]) -> Option<Vec3>,
{
    let v0 = get(p)?;
    let mut j = Mat3::zeros();
    for a in 0..3 {
        let h = lat.spacing[a];
        let fwd = (p[a] + 1 < lat.dims[a]).then(|| {
            let mut q = p;
            q[a] += 1;
            q
        });
        let bwd = (p[a] > 0).then(|| {
            let mut q = p;
            q[a] -= 1;
            q
        });
        let vp = fwd.and_then(&get);
        let vm = bwd.and_then(&get);
        let col = match (vp, vm) {
            (Some(vp), Some(vm)) => (vp - vm) / (2.0 * h),
            (Some(vp), None) => (vp - v0) / h,
            (None, Some(vm)) => (v0 - vm) / h,
            (None, None) => return None,
        };
        j.set_column(a, &col);
    }
    Some(j)
}

pub fn curl(j: &Mat3) -> Vec3 {
    Vec3::new(
        j[(2, 1)] - j[(1, 2)],
        j[(0, 2)] - j[(2, 0)],
        j[(1, 0)] - j[(0, 1)],
    )
}

pub fn helicity_from_jacobian(j: &Mat3, v: &Vec3) -> f64 {
    curl(j).dot(v)
}

/// `<(∇X)Y - (∇Y)X, Z>` with `(∇X)Y = J_X Y`.
pub fn frobenius_from_jacobians(jx: &Mat3, jy: &Mat3, x: &Vec3, y: &Vec3, z: &Vec3) -> f64 {
    (jx * y - jy * x).dot(z)
}

/// Flip `v` if it points against `reference`.
pub fn align(v: Vec3, reference: &Vec3) -> Vec3 {
    if v.dot(reference) < 0.0 {
        -v
    } else {
        v
    }
}

/// A vector field sampled on a lattice; `None` marks masked points.
#[derive(Clone, Debug)]
pub struct VectorVolume {
    pub lattice: Lattice3,
    pub values: Vec<Option<Vec3>>,
}

impl VectorVolume {
    pub fn from_fn(lattice: Lattice3, f: impl Fn(&Vec3) -> Vec3) -> Self {
        let values = (0..lattice.len())
            .map(|n| Some(f(&lattice.position(lattice.coords(n)))))
            .collect();
        VectorVolume { lattice, values }
    }

    fn jacobian(&self, p: [usize; 3], sign_align: bool) -> Option<Mat3> {
        let center = self.values[self.lattice.index(p)]?;
        jacobian_at(&self.lattice, p, |q| {
            let v = self.values[self.lattice.index(q)]?;
            Some(if sign_align { align(v, &center) } else { v })
        })
    }
}

/// Helicity at every lattice point. With `sign_align`, each neighbor is
/// flipped to agree with the center vector before differencing, which removes
/// the orientation ambiguity of eigenvector fields.
pub fn helicity_volume(vol: &VectorVolume, sign_align: bool) -> Vec<Option<f64>> {
    (0..vol.lattice.len())
        .map(|n| {
            let p = vol.lattice.coords(n);
            let v = vol.values[n]?;
            let j = vol.jacobian(p, sign_align)?;
            Some(helicity_from_jacobian(&j, &v))
        })
        .collect()
}

/// Frobenius scalar of the triple `(X, Y, Z)` at every lattice point.
pub fn frobenius_volume(
    x: &VectorVolume,
    y: &VectorVolume,
    z: &VectorVolume,
    sign_align: bool,
) -> Vec<Option<f64>> {
    assert_eq!(x.lattice, y.lattice);
    assert_eq!(x.lattice, z.lattice);
    (0..x.lattice.len())
        .map(|n| {
            let p = x.lattice.coords(n);
            let (xv, yv, zv) = (x.values[n]?, y.values[n]?, z.values[n]?);
            let jx = x.jacobian(p, sign_align)?;
            let jy = y.jacobian(p, sign_align)?;
            Some(frobenius_from_jacobians(&jx, &jy, &xv, &yv, &zv))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(n: usize, lo: f64, hi: f64) -> Lattice3 {
        let h = (hi - lo) / (n - 1) as f64;
        Lattice3 {
            dims: [n; 3],
            spacing: [h; 3],
            origin: Vec3::repeat(lo),
        }
    }

    #[test]
    fn linear_rotation_field() {
        let lat = cube(12, -1.0, 1.0);
        let vol = VectorVolume::from_fn(lat, |p| Vec3::new(p[1], p[2], p[0]));
        let h = helicity_volume(&vol, false);
        for (n, hv) in h.iter().enumerate() {
            let p = lat.position(lat.coords(n));
            assert!((hv.unwrap() + p.sum()).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_field_has_zero_helicity() {
        let lat = cube(6, 0.0, 1.0);
        let vol = VectorVolume::from_fn(lat, |_| Vec3::new(0.3, -0.2, 0.9));
        assert!(helicity_volume(&vol, true)
            .iter()
            .all(|h| h.unwrap() == 0.0));
        let f = frobenius_volume(&vol, &vol, &vol, true);
        assert!(f.iter().all(|h| h.unwrap() == 0.0));
    }

    #[test]
    fn masked_neighbors_fall_back_to_one_sided() {
        let lat = cube(5, 0.0, 1.0);
        let mut vol = VectorVolume::from_fn(lat, |p| Vec3::new(p[1], p[2], p[0]));
        let hole = lat.index([2, 2, 3]);
        vol.values[hole] = None;
        let h = helicity_volume(&vol, false);
        assert!(h[hole].is_none());
        let c = lat.index([2, 2, 2]);
        assert!((h[c].unwrap() + lat.position([2, 2, 2]).sum()).abs() < 1e-12);
        // isolated point along an axis has no derivative
        let lat1 = Lattice3 {
            dims: [3, 3, 1],
            ..lat
        };
        let flat = VectorVolume::from_fn(lat1, |p| Vec3::new(p[1], 0.0, 0.0));
        assert!(helicity_volume(&flat, false).iter().all(Option::is_none));
    }

    #[test]
    fn sign_flip_invariance() {
        let lat = cube(9, 0.0, 1.0);
        let f = |p: &Vec3| Vec3::new((2.0 * p[1]).sin(), p[2] * p[0], (p[0] + p[1]).cos());
        let a = helicity_volume(&VectorVolume::from_fn(lat, f), false);
        let b = helicity_volume(&VectorVolume::from_fn(lat, |p| -f(p)), false);
        for (x, y) in a.iter().zip(&b) {
            assert!((x.unwrap() - y.unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn alignment_removes_random_flips() {
        let lat = cube(9, 0.0, 1.0);
        let f = |p: &Vec3| {
            Vec3::new(1.0 + 0.3 * p[1], 0.5 * (p[2] * 2.0).sin(), 0.2 + 0.4 * p[0]).normalize()
        };
        let plain = helicity_volume(&VectorVolume::from_fn(lat, f), false);
        let mut flipped = VectorVolume::from_fn(lat, f);
        for (n, v) in flipped.values.iter_mut().enumerate() {
            if (n * 7919) % 3 == 0 {
                *v = v.map(|x| -x);
            }
        }
        let fixed = helicity_volume(&flipped, true);
        for (a, b) in plain.iter().zip(&fixed) {
            assert!((a.unwrap() - b.unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_flag() {
        let lat = cube(4, 0.0, 1.0);
        assert!(lat.on_boundary([0, 1, 1]));
        assert!(lat.on_boundary([1, 1, 3]));
        assert!(!lat.on_boundary([1, 2, 1]));
    }
}
