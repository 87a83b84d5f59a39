//! The flattening map `T` and the flattened negative log-density `T∘U`.
//!
//! `T` is the standard mollifier convolved with `y ↦ max(y, M+1)`, so
//! `T(y) = M+1` for `y ≤ M`, `T(y) = y` for `y ≥ M+2`, and in between
//! `T′(y) = Φ(y−M−1)`, `T″(y) = φ(y−M−1)` with `Φ` the mollifier CDF.

use std::sync::OnceLock;

use crate::density::{evaluate, TargetDensity};
use crate::error::{Error, Result};
use crate::quad::adaptive_simpson;

pub const DEFAULT_QUAD_TOL: f64 = 1e-10;

#[inline]
fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

/// Derivative of the unnormalized bump.
#[inline]
fn bump_prime(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        let s = 1.0 - t * t;
        -2.0 * t / (s * s) * (-1.0 / s).exp()
    }
}

/// Tabulated CDF of the standard mollifier.
///
/// Nodes on `[-1, 0]` hold cumulative integrals from accurate quadrature;
/// between nodes the CDF is a cubic Hermite interpolant using the exact
/// density as slope, and `Φ(t) = 1 − Φ(−t)` covers the right half.
#[derive(Debug)]
pub struct MollifierTable {
    normalizer: f64,
    step: f64,
    cdf: Vec<f64>,
    pdf: Vec<f64>,
}

const TABLE_INTERVALS: usize = 4096;

impl MollifierTable {
    fn build() -> Self {
        let n = TABLE_INTERVALS;
        let step = 1.0 / n as f64;
        let mut raw = vec![0.0; n + 1];
        for i in 1..=n {
            let a = -1.0 + (i - 1) as f64 * step;
            let b = a + step;
            raw[i] = raw[i - 1] + adaptive_simpson(bump, a, b, 1e-17);
        }
        let normalizer = 2.0 * raw[n];
        let cdf: Vec<f64> = raw.iter().map(|v| v / normalizer).collect();
        let pdf: Vec<f64> = (0..=n)
            .map(|i| bump(-1.0 + i as f64 * step) / normalizer)
            .collect();
        Self {
            normalizer,
            step,
            cdf,
            pdf,
        }
    }

    pub fn get() -> &'static MollifierTable {
        static TABLE: OnceLock<MollifierTable> = OnceLock::new();
        TABLE.get_or_init(Self::build)
    }

    /// `∫_{-1}^{1} exp(−1/(1−y²)) dy`.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn density(&self, t: f64) -> f64 {
        bump(t) / self.normalizer
    }

    pub fn density_prime(&self, t: f64) -> f64 {
        bump_prime(t) / self.normalizer
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t <= -1.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return 1.0;
        }
        if t > 0.0 {
            return 1.0 - self.left_cdf(-t);
        }
        self.left_cdf(t)
    }

    fn left_cdf(&self, t: f64) -> f64 {
        let pos = (t + 1.0) / self.step;
        let i = (pos.floor() as usize).min(TABLE_INTERVALS - 1);
        let s = pos - i as f64;
        let h = self.step;
        let (y0, y1) = (self.cdf[i], self.cdf[i + 1]);
        let (mut m0, mut m1) = (self.pdf[i] * h, self.pdf[i + 1] * h);
        // Fritsch–Carlson limiter keeps each cell monotone where the density
        // changes by orders of magnitude across it (the far tails).
        let delta = y1 - y0;
        if delta > 0.0 {
            let (a, b) = (m0 / delta, m1 / delta);
            let r2 = a * a + b * b;
            if r2 > 9.0 {
                let tau = 3.0 / r2.sqrt();
                m0 *= tau;
                m1 *= tau;
            }
        }
        let s2 = s * s;
        let s3 = s2 * s;
        let v = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * m1;
        v.clamp(y0, y1)
    }
}

/// Standard mollifier density `φ(t)`, zero outside `(−1, 1)`.
pub fn mollifier(t: f64) -> f64 {
    MollifierTable::get().density(t)
}

/// Mollifier CDF `Φ(t) = ∫_{−∞}^t φ`.
pub fn mollifier_cdf(t: f64) -> f64 {
    MollifierTable::get().cdf(t)
}

/// Flattening threshold and quadrature tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlattenSpec {
    pub m: f64,
    pub quad_tol: f64,
}

impl FlattenSpec {
    pub fn new(m: f64) -> Self {
        Self {
            m,
            quad_tol: DEFAULT_QUAD_TOL,
        }
    }

    pub fn with_tol(m: f64, quad_tol: f64) -> Result<Self> {
        if !m.is_finite() || !(quad_tol > 0.0) {
            return Err(Error::InvalidInput("M must be finite and quad_tol positive".into()));
        }
        Ok(Self { m, quad_tol })
    }

    /// The flattening map `T(y)`.
    pub fn t_value(&self, y: f64) -> f64 {
        let m = self.m;
        if y <= m {
            return m + 1.0;
        }
        if y >= m + 2.0 {
            return y;
        }
        // T(y) = M+1 + ∫_{-1}^{v} φ(s)(v − s) ds with v = y − M − 1. Since φ
        // is an even probability density this also equals y + ∫_v^1 φ(s)(s − v) ds,
        // which keeps T(y) ≥ y exactly on the upper half of the band.
        let v = y - m - 1.0;
        let table = MollifierTable::get();
        if v <= 0.0 {
            let excess = adaptive_simpson(|s| table.density(s) * (v - s), -1.0, v, self.quad_tol);
            m + 1.0 + excess
        } else {
            let gap = adaptive_simpson(|s| table.density(s) * (s - v), v, 1.0, self.quad_tol);
            y + gap
        }
    }

    /// `(T′(y), T″(y))`.
    pub fn t_derivs(&self, y: f64) -> (f64, f64) {
        let m = self.m;
        if y <= m {
            return (0.0, 0.0);
        }
        if y >= m + 2.0 {
            return (1.0, 0.0);
        }
        let table = MollifierTable::get();
        let v = y - m - 1.0;
        (table.cdf(v), table.density(v))
    }

    /// `log w = T(U) − U`, the importance log-weight at a point with value `u`.
    pub fn log_weight(&self, u: f64) -> f64 {
        if u >= self.m + 2.0 {
            0.0
        } else {
            self.t_value(u) - u
        }
    }

    /// `(T(U(x)), ∇(T∘U)(x))` written into `grad`; unchecked fast path.
    pub fn eval_into<T: TargetDensity + ?Sized>(&self, target: &T, x: &[f64], grad: &mut [f64]) -> f64 {
        let u = target.u_grad(x, grad);
        self.apply(u, grad)
    }

    /// Turns `(U, ∇U)` into `(T∘U, ∇(T∘U))` in place.
    #[inline]
    pub fn apply(&self, u: f64, grad: &mut [f64]) -> f64 {
        if u <= self.m {
            grad.iter_mut().for_each(|g| *g = 0.0);
            self.m + 1.0
        } else if u >= self.m + 2.0 {
            u
        } else {
            let (d1, _) = self.t_derivs(u);
            grad.iter_mut().for_each(|g| *g *= d1);
            self.t_value(u)
        }
    }
}

/// Checked `(T(U(x)), ∇(T∘U)(x))`.
pub fn flattened_eval<T: TargetDensity + ?Sized>(
    target: &T,
    spec: &FlattenSpec,
    x: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let (u, mut g) = evaluate(target, x)?;
    let v = spec.apply(u, &mut g);
    Ok((v, g))
}

/// `T∘U` viewed as a density in its own right.
#[derive(Debug, Clone)]
pub struct Flattened<T> {
    pub target: T,
    pub spec: FlattenSpec,
}

impl<T: TargetDensity> TargetDensity for Flattened<T> {
    fn dim(&self) -> usize {
        self.target.dim()
    }
    fn u_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.spec.eval_into(&self.target, x, grad)
    }
}

/// Rule for picking the flattening threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MRule {
    /// `M = U(0) + L R²/2` with `R` the profile radius.
    Set,
    /// `M = U(0) + c_U + 2L𝓡²`.
    A1,
    /// `M = ĉ_bias + ln I + c_U + L𝓡²`.
    Bnn { c_hat_bias: f64, classes: usize },
}

impl MRule {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "set" => Ok(MRule::Set),
            "a1" => Ok(MRule::A1),
            "bnn" => Ok(MRule::Bnn {
                c_hat_bias: 0.0,
                classes: 2,
            }),
            other => Err(Error::InvalidInput(format!(
                "unknown M rule `{other}` (expected set, a1 or bnn)"
            ))),
        }
    }
}

pub fn choose_m(profile: &crate::profiles::A1Profile, u0: f64, rule: MRule) -> Result<f64> {
    let p = profile;
    if ![u0, p.c_u, p.radius, p.l].iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput("profile and U(0) must be finite".into()));
    }
    Ok(match rule {
        MRule::Set => u0 + p.l * p.radius * p.radius / 2.0,
        MRule::A1 => u0 + p.c_u + 2.0 * p.l * p.radius * p.radius,
        MRule::Bnn { c_hat_bias, classes } => {
            if classes < 2 {
                return Err(Error::InvalidInput("bnn rule needs at least two classes".into()));
            }
            c_hat_bias + (classes as f64).ln() + p.c_u + p.l * p.radius * p.radius
        }
    })
}
