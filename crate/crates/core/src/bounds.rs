//! Explicit upper bounds on `ρ = π(w²)/π(w)²` for the tail-matching weights
//! `w = e^{T∘U − U}`, the resulting estimator error bounds, and sample-size
//! planning.
//!
//! Everything that can overflow (Gamma functions, `d`-th powers) is evaluated
//! in the log domain so `d` up to `10⁴` is fine.

use std::f64::consts::{E, PI};

use crate::density::{GaussianMixture, TargetDensity};
use crate::error::{Error, Result};
use crate::math::{ln_gamma, log_sum_exp};
use crate::profiles::{check_tractability, A1Profile, ConditionCheck};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// The bound equals `2e^c`.
    Capped,
    /// The explicit formula exceeds `2e^c`.
    Formula,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Capped => "capped",
            Regime::Formula => "formula",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoBound {
    pub value: f64,
    pub regime: Regime,
    /// Value of the explicit formula before taking the max with `2e^c`.
    pub formula: f64,
    pub d: usize,
    pub c: f64,
}

impl RhoBound {
    fn from_formula(formula: f64, c: f64, d: usize) -> Self {
        let cap = 2.0 * c.exp();
        let (value, regime) = if formula > cap {
            (formula, Regime::Formula)
        } else {
            (cap, Regime::Capped)
        };
        Self {
            value,
            regime,
            formula,
            d,
            c,
        }
    }
}

/// `R̄ = 𝓡 + √((2/m)(M − u_min))`, the radius containing `{U ≤ M}`.
pub fn rbar(profile: &A1Profile, m_threshold: f64, u_min: f64) -> Result<f64> {
    if !(m_threshold >= u_min) {
        return Err(Error::InvalidInput(format!(
            "M = {m_threshold} lies below the lower bound {u_min} on min U"
        )));
    }
    Ok(profile.radius + (2.0 / profile.m * (m_threshold - u_min)).sqrt())
}

/// General bound in terms of `R̄`; `u_min` is any lower bound on `min U`.
pub fn rho_bound_coco(profile: &A1Profile, m_threshold: f64, u_min: f64, c: f64, d: usize) -> Result<RhoBound> {
    if d == 0 || !(c > 0.0) {
        return Err(Error::InvalidInput("need d ≥ 1 and c > 0".into()));
    }
    let rb = rbar(profile, m_threshold, u_min)?;
    let (l, m, c_u) = (profile.l, profile.m, profile.c_u);
    let ec = c.exp();
    let lr2 = l * rb * rb;
    let formula = if d == 1 {
        (2.0 * c_u).exp() / PI
            * (4.0 * (2.0 + ec) * lr2 + 2.0 * 2f64.sqrt() * (1.0 + ec) * l.sqrt() * rb * (l / m).sqrt())
    } else {
        let df = d as f64;
        let ln_t1 = 2.0 * c_u + (2.0 + ec).ln() + df * lr2.ln()
            - (df - 1.0) * 2f64.ln()
            - 2.0 * ln_gamma(df / 2.0 + 1.0);
        let q = lr2 * (l / m) / (E * (df - 1.0));
        let t2 = if q >= 1.0 {
            f64::INFINITY
        } else if q == 0.0 {
            0.0
        } else {
            let lq = q.ln();
            let exps: Vec<f64> = (0..d).map(|i| (df - 0.5 - i as f64 / 2.0) * lq).collect();
            let ln_pre = 2.0 * c_u + (1.0 + ec).ln() + df * 2f64.ln() - 0.5 * (df * (df - 1.0)).ln();
            (ln_pre + log_sum_exp(&exps)).exp()
        };
        ln_t1.exp() + t2
    };
    Ok(RhoBound::from_formula(formula, c, d))
}

/// The explicit expression of the dimension-free bound, without checking the
/// condition that makes it valid.
pub fn cocob_formula(c_u: f64, c_hat: f64, c: f64, d: usize) -> f64 {
    let df = d as f64;
    let ec = c.exp();
    let ln_t1 = 2f64.ln() + 2.0 * c_u + (2.0 + ec).ln() - 1.0 - 2.0 * df * c_hat.ln() - 0.5 * (df * PI / 2.0).ln();
    let ln_t2 = 2.0 * c_u + (1.0 + ec).ln()
        - df * (1.0 + c_hat.ln() - 2f64.ln())
        - (1.0 - 2.0 / (E * c_hat)).ln()
        - 0.5 * (df * (df - 1.0)).ln();
    ln_t1.exp() + ln_t2.exp()
}

/// Dimension-free bound, valid when the tractability condition holds and
/// `M = U(0) + c_U + 2L𝓡²`.
pub fn rho_bound_coco2(profile: &A1Profile, c_hat: f64, c: f64, d: usize) -> Result<RhoBound> {
    if d < 2 {
        return Err(Error::Unsupported("the dimension-free bound needs d ≥ 2".into()));
    }
    if !(c > 0.0) {
        return Err(Error::InvalidInput("c must be positive".into()));
    }
    let t = check_tractability(profile, c_hat, d)?;
    if !t.main.satisfied {
        return Err(Error::Precondition {
            condition: "tractability",
            margin: t.main.margin(),
        });
    }
    Ok(RhoBound::from_formula(cocob_formula(profile.c_u, c_hat, c, d), c, d))
}

/// Mixture condition `4eκ(√(2L)Rκ + κ^{1/2}(4(1−ln a) + 12LR²κ²)^{1/2})² ≤ d − 1`
/// with `κ = max L_j/m_j`, `L = max L_j`, `a = max a_j`.
pub fn mixture_condition(gm: &GaussianMixture) -> ConditionCheck {
    let (kappa, l, a) = mixture_constants(gm);
    let r = gm.radius();
    let inner = (2.0 * l).sqrt() * r * kappa
        + kappa.sqrt() * (4.0 * (1.0 - a.ln()) + 12.0 * l * r * r * kappa * kappa).sqrt();
    let lhs = 4.0 * E * kappa * inner * inner;
    let rhs = gm.dim() as f64 - 1.0;
    ConditionCheck {
        satisfied: lhs <= rhs,
        lhs,
        rhs,
    }
}

fn mixture_constants(gm: &GaussianMixture) -> (f64, f64, f64) {
    let mut kappa: f64 = 0.0;
    let mut l: f64 = 0.0;
    for i in 0..gm.len() {
        let (mi, li) = gm.eigen_extremes(i);
        kappa = kappa.max(li / mi);
        l = l.max(li);
    }
    let a = gm.weights().iter().copied().fold(0.0, f64::max);
    (kappa, l, a)
}

pub fn mixture_formula(a: f64, c: f64, d: usize) -> f64 {
    let df = d as f64;
    let ec = c.exp();
    let t1 = 2.0 * E / (a * a) * (2.0 + ec) / (df * PI / 2.0).sqrt();
    let ln_t2 = 2.0 - 2.0 * a.ln() + (1.0 + ec).ln()
        - df * (1.0 - 2f64.ln())
        - (1.0 - 2.0 / E).ln()
        - 0.5 * (df * (df - 1.0)).ln();
    t1 + ln_t2.exp()
}

/// Bound for Gaussian mixtures under [`mixture_condition`].
pub fn rho_bound_mixture(gm: &GaussianMixture, c: f64) -> Result<RhoBound> {
    let d = gm.dim();
    if d < 2 {
        return Err(Error::Unsupported("the mixture bound needs d ≥ 2".into()));
    }
    let check = mixture_condition(gm);
    if !check.satisfied {
        return Err(Error::Precondition {
            condition: "mixture",
            margin: check.margin(),
        });
    }
    let (_, _, a) = mixture_constants(gm);
    Ok(RhoBound::from_formula(mixture_formula(a, c, d), c, d))
}

/// `(12ρ/N, 4ρ/N)`: bias and mean-squared-error bounds for `sup|φ| ≤ 1`.
pub fn snis_error_bounds(rho: f64, n: u64) -> (f64, f64) {
    let nf = n as f64;
    (12.0 * rho / nf, 4.0 * rho / nf)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplePlan {
    pub n: u64,
    /// Total-variation accuracy each approximate sample must reach.
    pub tv_budget: f64,
    pub bias_bound: f64,
    pub mse_bound: f64,
}

/// `N = ⌈16ρ/(ε̄ε′)²⌉`, `ε = ε̄/(4N)`, bounds `2ε̄ + ε′` and `4ε̄ + ε′²`.
pub fn sample_size_plan(rho: f64, eps_bar: f64, eps_prime: f64) -> Result<SamplePlan> {
    if !(eps_bar > 0.0 && eps_bar <= 1.0) || !(eps_prime > 0.0) || !(rho >= 1.0) {
        return Err(Error::InvalidInput("need ε̄ ∈ (0,1], ε′ > 0 and ρ ≥ 1".into()));
    }
    let raw = (16.0 * rho / (eps_bar * eps_prime).powi(2)).ceil();
    if raw >= u64::MAX as f64 {
        return Err(Error::NumericalOverflow("planned sample size exceeds u64".into()));
    }
    let n = raw as u64;
    Ok(SamplePlan {
        n,
        tv_budget: eps_bar / (4.0 * n as f64),
        bias_bound: 2.0 * eps_bar + eps_prime,
        mse_bound: 4.0 * eps_bar + eps_prime * eps_prime,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(c_u: f64, radius: f64, l: f64, m: f64) -> A1Profile {
        A1Profile::new(c_u, radius, l, m, 0.0, "t").unwrap()
    }

    #[test]
    fn rbar_examples() {
        assert_eq!(rbar(&profile(0.0, 1.5, 1.0, 1.0), 2.0, 2.0).unwrap(), 1.5);
        assert_eq!(rbar(&profile(0.0, 1.0, 1.0, 1.0), 2.0, 0.0).unwrap(), 3.0);
        assert!(rbar(&profile(0.0, 1.0, 1.0, 1.0), -1.0, 0.0).is_err());
    }

    #[test]
    fn zero_radius_caps() {
        for d in 1..6 {
            let b = rho_bound_coco(&profile(0.0, 0.0, 1.0, 1.0), 0.0, 0.0, 1.0, d).unwrap();
            assert_eq!(b.regime, Regime::Capped);
            assert_eq!(b.value, 2.0 * E);
        }
    }

    #[test]
    fn one_dimensional_display() {
        let p = profile(0.0, 0.1, 1.0, 1.0);
        let b = rho_bound_coco(&p, 0.0, 0.0, 1.0, 1).unwrap();
        let expect = (4.0 * (2.0 + E) * 0.01 + 2.0 * 2f64.sqrt() * (1.0 + E) * 0.1) / PI;
        assert!((b.formula - expect).abs() < 1e-15);
    }

    #[test]
    fn cocob_example_is_capped() {
        let f = cocob_formula(0.0, 1.0, 1.0, 10);
        assert!((f - 0.945).abs() < 1e-3);
        let b = rho_bound_coco2(&profile(0.0, 0.0, 1.0, 1.0), 1.0, 1.0, 10).unwrap();
        assert!((b.value - 5.4366).abs() < 1e-4);
        assert_eq!(b.regime, Regime::Capped);
    }

    #[test]
    fn coco2_rejects_bad_inputs() {
        assert!(matches!(
            rho_bound_coco2(&profile(0.0, 0.0, 1.0, 1.0), 1.0, 1.0, 1),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(
            rho_bound_coco2(&profile(5.0, 1.0, 1.0, 1.0), 1.0, 1.0, 3),
            Err(Error::Precondition { .. })
        ));
    }

    #[test]
    fn mixture_condition_examples() {
        let gm = GaussianMixture::isotropic(vec![0.5, 0.5], vec![vec![0.1, 0.0], vec![-0.1, 0.0]], vec![2.0, 2.0]).unwrap();
        // κ = 1 here; check the κ = 2 arithmetic directly below.
        assert!(!mixture_condition(&gm).satisfied);
        let kappa: f64 = 2.0;
        let (l, r, a): (f64, f64, f64) = (2.0, 0.1, 0.5);
        let inner = (2.0 * l).sqrt() * r * kappa + kappa.sqrt() * (4.0 * (1.0 - a.ln()) + 12.0 * l * r * r * kappa * kappa).sqrt();
        assert!((4.0 * E * kappa * inner * inner - 408.0).abs() < 1.0);

        let single = GaussianMixture::isotropic(vec![1.0], vec![vec![0.0; 50]], vec![1.0]).unwrap();
        let c = mixture_condition(&single);
        assert!((c.lhs - 16.0 * E).abs() < 1e-12);
        assert!(c.satisfied);
    }

    #[test]
    fn error_bound_arithmetic() {
        assert_eq!(snis_error_bounds(1.0, 4), (3.0, 1.0));
        let (b, m) = snis_error_bounds(5.4366, 10_000);
        assert!((b - 6.52e-3).abs() < 1e-5 && (m - 2.17e-3).abs() < 1e-5);
        let p = sample_size_plan(1.0, 1.0, 1.0).unwrap();
        assert_eq!((p.n, p.tv_budget, p.bias_bound, p.mse_bound), (16, 1.0 / 64.0, 3.0, 5.0));
        let p = sample_size_plan(5.4366, 0.1, 0.1).unwrap();
        assert_eq!(p.n, 869_856);
        assert!((p.tv_budget - 2.87e-8).abs() < 1e-10);
        assert!((sample_size_plan(1.0, 0.01, 0.1).unwrap().mse_bound - 0.05).abs() < 1e-15);
    }
}
