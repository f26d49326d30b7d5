use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{LcsError, Result};

/// Tabulated scalar signal with natural cubic-spline interpolation.
#[derive(Clone, Debug, PartialEq)]
pub struct ForcingSignal {
    t: Vec<f64>,
    values: Vec<f64>,
    // spline second derivatives at the nodes
    m: Vec<f64>,
}

impl ForcingSignal {
    pub fn new(t: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if t.len() != values.len() {
            return Err(LcsError::InvalidArgument(format!(
                "{} sample times but {} values",
                t.len(),
                values.len()
            )));
        }
        if t.len() < 2 {
            return Err(LcsError::InvalidArgument(
                "forcing signal needs at least two samples".into(),
            ));
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(LcsError::InvalidArgument(
                "sample times must be strictly increasing".into(),
            ));
        }
        if t.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(LcsError::NonFinite("forcing signal"));
        }
        let m = natural_spline_moments(&t, &values);
        Ok(ForcingSignal { t, values, m })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn span(&self) -> (f64, f64) {
        (self.t[0], self.t[self.t.len() - 1])
    }

    pub fn covers(&self, t0: f64, t1: f64) -> bool {
        let (a, b) = self.span();
        t0.min(t1) >= a && t0.max(t1) <= b
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let (start, end) = self.span();
        if !(t >= start && t <= end) {
            return Err(LcsError::TimeOutOfRange { t, start, end });
        }
        let k = match self.t.partition_point(|&s| s <= t) {
            0 => 0,
            p if p >= self.t.len() => self.t.len() - 2,
            p => p - 1,
        };
        let h = self.t[k + 1] - self.t[k];
        let a = (self.t[k + 1] - t) / h;
        let b = 1.0 - a;
        Ok(a * self.values[k]
            + b * self.values[k + 1]
            + ((a * a * a - a) * self.m[k] + (b * b * b - b) * self.m[k + 1]) * h * h / 6.0)
    }

    /// Two-column CSV with a `t,F` header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,F")?;
        for (t, v) in self.t.iter().zip(&self.values) {
            writeln!(w, "{t:?},{v:?}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().transpose()?;
        if header.as_deref().map(str::trim) != Some("t,F") {
            return Err(LcsError::Format("forcing CSV must start with `t,F`".into()));
        }
        let (mut t, mut v) = (Vec::new(), Vec::new());
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split(',').map(|s| s.trim().parse::<f64>());
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(a)), Some(Ok(b)), None) => {
                    t.push(a);
                    v.push(b);
                }
                _ => {
                    return Err(LcsError::Format(format!(
                        "forcing CSV line {}: expected two numbers",
                        n + 2
                    )))
                }
            }
        }
        ForcingSignal::new(t, v)
    }
}

fn natural_spline_moments(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = t.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    // tridiagonal system for interior moments (Thomas algorithm)
    let mut c_prime = vec![0.0; n];
    let mut d_prime = vec![0.0; n];
    for i in 1..n - 1 {
        let h0 = t[i] - t[i - 1];
        let h1 = t[i + 1] - t[i];
        let a = h0 / 6.0;
        let b = (h0 + h1) / 3.0;
        let c = h1 / 6.0;
        let d = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
        let denom = b - a * c_prime[i - 1];
        c_prime[i] = c / denom;
        d_prime[i] = (d - a * d_prime[i - 1]) / denom;
    }
    for i in (1..n - 1).rev() {
        m[i] = d_prime[i] - c_prime[i] * m[i + 1];
    }
    m
}

/// Parameters of the damped, periodically driven Duffing oscillator
/// `q'' = q - q^3 - delta q' + gamma cos(omega t)` whose scaled position
/// `kappa q(t)` is used as a chaotic forcing signal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DuffingParams {
    pub delta: f64,
    pub gamma: f64,
    pub omega: f64,
    pub kappa: f64,
    /// Initial `(q, q')` at `t_span.0 - transient`.
    pub initial: [f64; 2],
    pub transient: f64,
}

impl Default for DuffingParams {
    fn default() -> Self {
        // kappa brings sup |F| to about 0.1 (sup |q| is close to 1.58 on the attractor)
        DuffingParams {
            delta: 0.15,
            gamma: 0.3,
            omega: 1.0,
            kappa: 0.0634,
            initial: [1.0, 0.0],
            transient: 50.0,
        }
    }
}

/// Integrate the Duffing oscillator with RK4 and sample `kappa q(t)` every
/// `dt` over `t_span`. The first `transient` time units are discarded.
pub fn generate_duffing_forcing(
    p: &DuffingParams,
    t_span: (f64, f64),
    dt: f64,
) -> Result<ForcingSignal> {
    let (t_start, t_end) = t_span;
    if !(t_end > t_start) {
        return Err(LcsError::InvalidArgument("empty forcing time span".into()));
    }
    if !(dt > 0.0) {
        return Err(LcsError::InvalidArgument("dt must be positive".into()));
    }
    if !(p.transient >= 0.0) {
        return Err(LcsError::InvalidArgument(
            "transient must be non-negative".into(),
        ));
    }
    let substeps = (dt / 0.01).ceil().max(1.0) as usize;
    let h = dt / substeps as f64;
    let rhs = |t: f64, s: [f64; 2]| {
        [
            s[1],
            s[0] - s[0] * s[0] * s[0] - p.delta * s[1] + p.gamma * (p.omega * t).cos(),
        ]
    };
    let rk4 = |t: f64, s: [f64; 2], h: f64| {
        let k1 = rhs(t, s);
        let k2 = rhs(
            t + 0.5 * h,
            [s[0] + 0.5 * h * k1[0], s[1] + 0.5 * h * k1[1]],
        );
        let k3 = rhs(
            t + 0.5 * h,
            [s[0] + 0.5 * h * k2[0], s[1] + 0.5 * h * k2[1]],
        );
        let k4 = rhs(t + h, [s[0] + h * k3[0], s[1] + h * k3[1]]);
        [
            s[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            s[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ]
    };

    let mut s = p.initial;
    let t_init = t_start - p.transient;
    let transient_steps = (p.transient / h).round() as usize;
    let h_tr = if transient_steps > 0 {
        p.transient / transient_steps as f64
    } else {
        0.0
    };
    for k in 0..transient_steps {
        s = rk4(t_init + k as f64 * h_tr, s, h_tr);
    }

    let n = ((t_end - t_start) / dt).floor() as usize;
    let mut times = Vec::with_capacity(n + 2);
    let mut values = Vec::with_capacity(n + 2);
    times.push(t_start);
    values.push(p.kappa * s[0]);
    for k in 0..n {
        let tk = t_start + k as f64 * dt;
        for j in 0..substeps {
            s = rk4(tk + j as f64 * h, s, h);
        }
        times.push(t_start + (k + 1) as f64 * dt);
        values.push(p.kappa * s[0]);
    }
    let last = *times.last().unwrap();
    if t_end - last > 1e-9 * dt {
        let rem = t_end - last;
        let sub = (rem / 0.01).ceil().max(1.0) as usize;
        let hh = rem / sub as f64;
        for j in 0..sub {
            s = rk4(last + j as f64 * hh, s, hh);
        }
        times.push(t_end);
        values.push(p.kappa * s[0]);
    }
    ForcingSignal::new(times, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_is_exact_at_nodes() {
        let t: Vec<f64> = (0..20)
            .map(|k| 0.3 * k as f64 + 0.01 * (k * k) as f64)
            .collect();
        let v: Vec<f64> = t.iter().map(|x| (1.7 * x).sin() + 0.2 * x).collect();
        let s = ForcingSignal::new(t.clone(), v.clone()).unwrap();
        for (ti, vi) in t.iter().zip(&v) {
            assert_eq!(s.eval(*ti).unwrap(), *vi);
        }
    }

    #[test]
    fn interpolation_has_continuous_slope() {
        let t: Vec<f64> = (0..15).map(|k| k as f64 * 0.5).collect();
        let v: Vec<f64> = t.iter().map(|x| (x * 0.9).cos()).collect();
        let s = ForcingSignal::new(t.clone(), v).unwrap();
        let e = 1e-6;
        for &ti in &t[1..t.len() - 1] {
            let left = (s.eval(ti).unwrap() - s.eval(ti - e).unwrap()) / e;
            let right = (s.eval(ti + e).unwrap() - s.eval(ti).unwrap()) / e;
            assert!((left - right).abs() < 1e-4, "slope jump {left} vs {right}");
        }
        // smooth data is reproduced between nodes
        assert!((s.eval(3.25).unwrap() - (3.25f64 * 0.9).cos()).abs() < 1e-3);
    }

    #[test]
    fn rejects_bad_input_and_out_of_range() {
        assert!(ForcingSignal::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(ForcingSignal::new(vec![0.0], vec![1.0]).is_err());
        let s = ForcingSignal::new(vec![0.0, 1.0], vec![1.0, 2.0]).unwrap();
        assert!(s.eval(-0.1).is_err());
        assert!(s.eval(1.1).is_err());
        assert!(s.eval(f64::NAN).is_err());
        assert_eq!(s.eval(0.5).unwrap(), 1.5);
    }

    #[test]
    fn csv_round_trip() {
        let s = generate_duffing_forcing(&DuffingParams::default(), (0.0, 5.0), 0.1).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"t,F\n"));
        let back = ForcingSignal::read_csv(&buf[..]).unwrap();
        assert_eq!(s, back);
        assert!(ForcingSignal::read_csv(&b"x,y\n1,2\n"[..]).is_err());
    }

    #[test]
    fn unforced_damped_oscillator_settles_on_a_well() {
        let p = DuffingParams {
            gamma: 0.0,
            kappa: 2.0,
            initial: [1.3, 0.4],
            transient: 0.0,
            ..Default::default()
        };
        let s = generate_duffing_forcing(&p, (0.0, 200.0), 0.5).unwrap();
        let last = *s.values().last().unwrap();
        assert!((last.abs() - 2.0).abs() < 1e-3, "{last}");
    }

    #[test]
    fn zero_scale_gives_zero_signal() {
        let p = DuffingParams {
            kappa: 0.0,
            ..Default::default()
        };
        let s = generate_duffing_forcing(&p, (0.0, 30.0), 0.1).unwrap();
        assert!(s.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn default_signal_is_bounded_and_aperiodic() {
        let s = generate_duffing_forcing(&DuffingParams::default(), (0.0, 300.0), 0.05).unwrap();
        let sup = s.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(sup <= 0.15, "sup {sup}");
        assert!(sup >= 0.05, "sup {sup}");
        // irregular switching between the two wells
        let crossings: Vec<f64> = s
            .times()
            .windows(2)
            .zip(s.values().windows(2))
            .filter(|(_, v)| v[0].signum() != v[1].signum())
            .map(|(t, _)| t[1])
            .collect();
        assert!(crossings.len() > 10);
        let gaps: Vec<f64> = crossings.windows(2).map(|c| c[1] - c[0]).collect();
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        let var = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / gaps.len() as f64;
        assert!(var.sqrt() > 0.1 * mean, "switching looks periodic");
        assert_eq!(s.span(), (0.0, 300.0));
    }
}
