//! Velocity models: the ABC family, unsteady parallel shear flows and
//! small analytic test fields.

mod forcing;

pub use forcing::{generate_duffing_forcing, DuffingParams, ForcingSignal};

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use crate::error::Result;
use crate::{Mat3, Vec3};

/// Scalar profile `f(z, t)`.
pub type ProfileFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
/// Scalar signal `f(t)`.
pub type SignalFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// Arbitrary velocity evaluator `v(x, t)`.
pub type EvaluatorFn = Arc<dyn Fn(&Vec3, f64) -> Vec3 + Send + Sync>;

/// Time dependence of the `A` amplitude in the ABC family.
#[derive(Clone)]
pub enum AbcForcing {
    /// Steady flow.
    None,
    /// `A + amplitude * sin(t)`.
    Sinusoidal { amplitude: f64 },
    /// `A + F(t)` with a tabulated signal. `printed_variant` selects the
    /// `A (A + F) cos z` form of the y-equation instead of `(A + F) cos z`.
    Tabulated {
        signal: Arc<ForcingSignal>,
        printed_variant: bool,
    },
}

impl fmt::Debug for AbcForcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AbcForcing::None => write!(f, "None"),
            AbcForcing::Sinusoidal { amplitude } => write!(f, "Sinusoidal({amplitude})"),
            AbcForcing::Tabulated {
                signal,
                printed_variant,
            } => write!(
                f,
                "Tabulated({} samples, printed_variant={printed_variant})",
                signal.len()
            ),
        }
    }
}

#[derive(Clone, Debug)]
pub struct AbcParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub forcing: AbcForcing,
}

impl Default for AbcParams {
    fn default() -> Self {
        AbcParams {
            a: 3f64.sqrt(),
            b: 2f64.sqrt(),
            c: 1.0,
            forcing: AbcForcing::None,
        }
    }
}

impl AbcParams {
    pub fn periodic() -> Self {
        AbcParams {
            forcing: AbcForcing::Sinusoidal { amplitude: 0.1 },
            ..Default::default()
        }
    }

    pub fn chaotic(signal: Arc<ForcingSignal>) -> Self {
        AbcParams {
            forcing: AbcForcing::Tabulated {
                signal,
                printed_variant: false,
            },
            ..Default::default()
        }
    }
}

/// Profiles of the parallel shear flow `x' = u(z,t)`, `y' = v(z,t)`, `z' = w(t)`.
///
/// `u_z` and `v_z` are the analytic z-derivatives when known; otherwise a
/// five-point difference of `u` and `v` is used.
#[derive(Clone)]
pub struct ShearProfiles {
    pub u: ProfileFn,
    pub v: ProfileFn,
    pub w: SignalFn,
    pub u_z: Option<ProfileFn>,
    pub v_z: Option<ProfileFn>,
}

impl fmt::Debug for ShearProfiles {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ShearProfiles")
            .field("analytic_u_z", &self.u_z.is_some())
            .field("analytic_v_z", &self.v_z.is_some())
            .finish()
    }
}

impl ShearProfiles {
    pub fn new(
        u: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        v: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        w: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ShearProfiles {
            u: Arc::new(u),
            v: Arc::new(v),
            w: Arc::new(w),
            u_z: None,
            v_z: None,
        }
    }

    pub fn with_derivatives(
        mut self,
        u_z: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        v_z: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.u_z = Some(Arc::new(u_z));
        self.v_z = Some(Arc::new(v_z));
        self
    }

    /// `u = slope * z`, `v = w = 0`.
    pub fn linear_u(slope: f64) -> Self {
        ShearProfiles::new(move |z, _| slope * z, |_, _| 0.0, |_| 0.0)
            .with_derivatives(move |_, _| slope, |_, _| 0.0)
    }

    /// Two-mode trigonometric profiles with analytic derivatives.
    pub fn trigonometric(p: TrigShearParams) -> Self {
        let TrigShearParams {
            u,
            v,
            w0,
            w1,
            w_freq,
        } = p;
        let prof = move |m: [f64; 6], z: f64, t: f64| {
            m[0] * (m[1] * z + m[2] * t).sin() + m[3] * (m[4] * z + m[5] * t).cos()
        };
        let dprof = move |m: [f64; 6], z: f64, t: f64| {
            m[0] * m[1] * (m[1] * z + m[2] * t).cos() - m[3] * m[4] * (m[4] * z + m[5] * t).sin()
        };
        ShearProfiles::new(
            move |z, t| prof(u, z, t),
            move |z, t| prof(v, z, t),
            move |t| w0 + w1 * (w_freq * t).sin(),
        )
        .with_derivatives(move |z, t| dprof(u, z, t), move |z, t| dprof(v, z, t))
    }

    pub fn du_dz(&self, z: f64, t: f64) -> f64 {
        match &self.u_z {
            Some(f) => f(z, t),
            None => five_point(&*self.u, z, t),
        }
    }

    pub fn dv_dz(&self, z: f64, t: f64) -> f64 {
        match &self.v_z {
            Some(f) => f(z, t),
            None => five_point(&*self.v, z, t),
        }
    }
}

fn five_point(f: &(dyn Fn(f64, f64) -> f64 + Send + Sync), z: f64, t: f64) -> f64 {
    let h = 1e-3;
    (-f(z + 2.0 * h, t) + 8.0 * f(z + h, t) - 8.0 * f(z - h, t) + f(z - 2.0 * h, t)) / (12.0 * h)
}

/// Coefficients of [`ShearProfiles::trigonometric`]: each profile is
/// `m0 sin(m1 z + m2 t) + m3 cos(m4 z + m5 t)` and `w = w0 + w1 sin(w_freq t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrigShearParams {
    pub u: [f64; 6],
    pub v: [f64; 6],
    pub w0: f64,
    pub w1: f64,
    pub w_freq: f64,
}

#[derive(Clone)]
pub enum FieldModel {
    Zero,
    Abc(AbcParams),
    ParallelShear(ShearProfiles),
    /// `v = M x`.
    Linear(Mat3),
    Custom(EvaluatorFn),
}

impl fmt::Debug for FieldModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldModel::Zero => write!(f, "Zero"),
            FieldModel::Abc(p) => write!(f, "Abc({p:?})"),
            FieldModel::ParallelShear(p) => write!(f, "ParallelShear({p:?})"),
            FieldModel::Linear(m) => write!(f, "Linear({m:?})"),
            FieldModel::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn cube(lo: f64, hi: f64) -> Self {
        Aabb {
            min: Vec3::repeat(lo),
            max: Vec3::repeat(hi),
        }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

/// A time-dependent velocity field on R^3. Immutable after construction.
#[derive(Clone, Debug)]
pub struct VelocityField {
    pub model: FieldModel,
    pub domain: Aabb,
    pub period: Option<Vec3>,
    pub label: String,
}

impl VelocityField {
    pub fn abc(params: AbcParams) -> Self {
        let label = match params.forcing {
            AbcForcing::None => "steady-abc",
            AbcForcing::Sinusoidal { .. } => "periodic-abc",
            AbcForcing::Tabulated { .. } => "chaotic-abc",
        };
        VelocityField {
            model: FieldModel::Abc(params),
            domain: Aabb::cube(0.0, TAU),
            period: Some(Vec3::repeat(TAU)),
            label: label.to_string(),
        }
    }

    pub fn steady_abc() -> Self {
        Self::abc(AbcParams::default())
    }

    pub fn periodic_abc() -> Self {
        Self::abc(AbcParams::periodic())
    }

    pub fn chaotic_abc(signal: Arc<ForcingSignal>) -> Self {
        Self::abc(AbcParams::chaotic(signal))
    }

    pub fn zero() -> Self {
        VelocityField {
            model: FieldModel::Zero,
            domain: Aabb::cube(0.0, TAU),
            period: None,
            label: "zero".into(),
        }
    }

    pub fn parallel_shear(profiles: ShearProfiles) -> Self {
        VelocityField {
            model: FieldModel::ParallelShear(profiles),
            domain: Aabb::cube(0.0, TAU),
            period: None,
            label: "parallel-shear".into(),
        }
    }

    pub fn linear(m: Mat3) -> Self {
        VelocityField {
            model: FieldModel::Linear(m),
            domain: Aabb::cube(-1.0, 1.0),
            period: None,
            label: "linear".into(),
        }
    }

    pub fn custom(
        label: &str,
        domain: Aabb,
        f: impl Fn(&Vec3, f64) -> Vec3 + Send + Sync + 'static,
    ) -> Self {
        VelocityField {
            model: FieldModel::Custom(Arc::new(f)),
            domain,
            period: None,
            label: label.into(),
        }
    }

    pub fn with_domain(mut self, domain: Aabb) -> Self {
        self.domain = domain;
        self
    }

    /// Time interval on which the field can be evaluated, if bounded.
    pub fn time_span(&self) -> Option<(f64, f64)> {
        match &self.model {
            FieldModel::Abc(AbcParams {
                forcing: AbcForcing::Tabulated { signal, .. },
                ..
            }) => Some(signal.span()),
            _ => None,
        }
    }

    fn abc_amplitudes(p: &AbcParams, t: f64) -> Result<(f64, f64)> {
        Ok(match &p.forcing {
            AbcForcing::None => (p.a, p.a),
            AbcForcing::Sinusoidal { amplitude } => {
                let a = p.a + amplitude * t.sin();
                (a, a)
            }
            AbcForcing::Tabulated {
                signal,
                printed_variant,
            } => {
                let a = p.a + signal.eval(t)?;
                if *printed_variant {
                    (a, p.a * a)
                } else {
                    (a, a)
                }
            }
        })
    }

    #[inline]
    pub fn eval(&self, x: &Vec3, t: f64) -> Result<Vec3> {
        Ok(match &self.model {
            FieldModel::Zero => Vec3::zeros(),
            FieldModel::Abc(p) => {
                let (sx, cx) = x[0].sin_cos();
                let (sy, cy) = x[1].sin_cos();
                let (sz, cz) = x[2].sin_cos();
                let (ax, ay) = Self::abc_amplitudes(p, t)?;
                Vec3::new(ax * sz + p.c * cy, p.b * sx + ay * cz, p.c * sy + p.b * cx)
            }
            FieldModel::ParallelShear(s) => Vec3::new((s.u)(x[2], t), (s.v)(x[2], t), (s.w)(t)),
            FieldModel::Linear(m) => m * x,
            FieldModel::Custom(f) => f(x, t),
        })
    }

    /// Velocity and its spatial gradient `J[i][j] = dv_i/dx_j`. Analytic for
    /// the built-in models; custom fields use central differences.
    pub fn eval_with_jacobian(&self, x: &Vec3, t: f64) -> Result<(Vec3, Mat3)> {
        Ok(match &self.model {
            FieldModel::Zero => (Vec3::zeros(), Mat3::zeros()),
            FieldModel::Abc(p) => {
                let (sx, cx) = x[0].sin_cos();
                let (sy, cy) = x[1].sin_cos();
                let (sz, cz) = x[2].sin_cos();
                let (ax, ay) = Self::abc_amplitudes(p, t)?;
                let v = Vec3::new(ax * sz + p.c * cy, p.b * sx + ay * cz, p.c * sy + p.b * cx);
                #[rustfmt::skip]
                let j = Mat3::new(
                    0.0,         -p.c * sy, ax * cz,
                    p.b * cx,    0.0,       -ay * sz,
                    -p.b * sx,   p.c * cy,  0.0,
                );
                (v, j)
            }
            FieldModel::ParallelShear(s) => {
                let (z, v) = (x[2], self.eval(x, t)?);
                let mut j = Mat3::zeros();
                j[(0, 2)] = s.du_dz(z, t);
                j[(1, 2)] = s.dv_dz(z, t);
                (v, j)
            }
            FieldModel::Linear(m) => (m * x, *m),
            FieldModel::Custom(f) => {
                let h = 1e-6 * (1.0 + x.amax());
                let mut j = Mat3::zeros();
                for i in 0..3 {
                    let mut e = Vec3::zeros();
                    e[i] = h;
                    j.set_column(i, &((f(&(x + e), t) - f(&(x - e), t)) / (2.0 * h)));
                }
                (f(x, t), j)
            }
        })
    }
}

/// Central-difference divergence with step `h`.
pub fn divergence(field: &VelocityField, x: &Vec3, t: f64, h: f64) -> Result<f64> {
    let mut div = 0.0;
    for i in 0..3 {
        let mut e = Vec3::zeros();
        e[i] = h;
        let vp = field.eval(&(x + e), t)?;
        let vm = field.eval(&(x - e), t)?;
        div += (vp[i] - vm[i]) / (2.0 * h);
    }
    Ok(div)
}
