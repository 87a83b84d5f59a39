//! Sandwich constants `(c_U, 𝓡, L, m)` for targets and the tractability
//! conditions built on them.
//!
//! A profile certifies
//! `(m/2)(|x|−𝓡)² 1{|x|>𝓡} ≤ U(x) − min U ≤ c_U + (L/2)|x − x*|²`
//! for some `x*` in the ball of radius `𝓡`.

use std::f64::consts::E;

use crate::density::{BnnPosterior, GaussianMixture, TargetDensity};
use crate::error::{Error, Result};
use crate::math::norm;

#[derive(Debug, Clone, PartialEq)]
pub struct A1Profile {
    pub c_u: f64,
    pub radius: f64,
    pub l: f64,
    pub m: f64,
    /// `|∇U(0)|`.
    pub grad0: f64,
    pub provenance: String,
}

impl A1Profile {
    pub fn new(c_u: f64, radius: f64, l: f64, m: f64, grad0: f64, provenance: &str) -> Result<Self> {
        let finite = [c_u, radius, l, m, grad0].iter().all(|v| v.is_finite());
        if !finite || c_u < 0.0 || radius < 0.0 || grad0 < 0.0 || !(m > 0.0) || l < m {
            return Err(Error::InvalidInput(format!(
                "profile needs c_U, 𝓡, |∇U(0)| ≥ 0 and L ≥ m > 0 (got c_U={c_u}, 𝓡={radius}, L={l}, m={m})"
            )));
        }
        Ok(Self {
            c_u,
            radius,
            l,
            m,
            grad0,
            provenance: provenance.to_string(),
        })
    }

    pub fn with_grad0(mut self, grad0: f64) -> Self {
        self.grad0 = grad0;
        self
    }
}

/// `∇U(x)·x ≥ α|x|² − β`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dissipativity {
    pub alpha: f64,
    pub beta: f64,
}

impl Dissipativity {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0) || !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::InvalidInput("dissipativity needs α > 0 and β ≥ 0".into()));
        }
        Ok(Self { alpha, beta })
    }
}

pub fn a1_from_dissipativity(p: Dissipativity, lipschitz: f64) -> Result<A1Profile> {
    if !(lipschitz >= p.alpha) {
        return Err(Error::InvalidInput(format!(
            "Lipschitz constant {lipschitz} is below the dissipativity constant {}",
            p.alpha
        )));
    }
    A1Profile::new(0.0, (p.beta / p.alpha).sqrt(), lipschitz, p.alpha, 0.0, "dissipativity")
}

/// Profile for `U` that is `m̄`-strongly convex outside a ball of radius `R`
/// and has `L̄`-Lipschitz gradient.
pub fn a1_from_convex_outside_ball(r: f64, m_bar: f64, l_bar: f64, grad0: f64) -> Result<A1Profile> {
    if !(m_bar > 0.0) || l_bar < m_bar || !(r >= 0.0) || !(grad0 >= 0.0) {
        return Err(Error::InvalidInput("need L̄ ≥ m̄ > 0, R ≥ 0 and |∇U(0)| ≥ 0".into()));
    }
    let radius = r * (1.0 + l_bar / m_bar) + grad0 / m_bar;
    A1Profile::new(0.0, radius, l_bar, m_bar / 2.0, grad0, "convex outside a ball")
}

/// Dissipativity constants of a mixture: `α = min m_i / 2`,
/// `β = max_i L_i R² (L_i/m_i) / 2`.
pub fn mixture_dissipativity(gm: &GaussianMixture) -> Dissipativity {
    let r = gm.radius();
    let mut alpha = f64::INFINITY;
    let mut beta: f64 = 0.0;
    for i in 0..gm.len() {
        let (m, l) = gm.eigen_extremes(i);
        alpha = alpha.min(m / 2.0);
        beta = beta.max(l * r * r * (l / m) / 2.0);
    }
    Dissipativity { alpha, beta }
}

/// Conservative global bound `max L_i (1 + max L_i (2R)²)` on the operator
/// norm of `∇²U` for a mixture.
pub fn mixture_gradient_lipschitz(gm: &GaussianMixture) -> f64 {
    let lmax = mixture_hessian_upper(gm);
    lmax * (1.0 + lmax * (2.0 * gm.radius()).powi(2))
}

/// `max_i L_i`, an upper bound on `∇²U` in the Loewner order (the
/// responsibility-weighted covariance term only lowers the Hessian).
pub fn mixture_hessian_upper(gm: &GaussianMixture) -> f64 {
    (0..gm.len()).map(|i| gm.eigen_extremes(i).1).fold(0.0, f64::max)
}

/// Profile with `c_U = 0`: the mixture's dissipativity together with the
/// quadratic upper bound around the global minimizer that follows from
/// `∇²U ≤ max_i L_i`.
pub fn a1_from_mixture_hessian(gm: &GaussianMixture) -> A1Profile {
    let dis = mixture_dissipativity(gm);
    let l = mixture_hessian_upper(gm);
    let mut g = vec![0.0; gm.dim()];
    gm.u_grad(&vec![0.0; gm.dim()], &mut g);
    let mut p = a1_from_dissipativity(dis, l).expect("max L_i ≥ min m_i / 2");
    p.grad0 = norm(&g);
    p.provenance = "mixture dissipativity with Hessian upper bound".into();
    p
}

fn tractability_lhs(c_u: f64, radius: f64, l: f64, m: f64) -> f64 {
    let k = l / m;
    let inner = l.sqrt() * radius + (k * (4.0 * c_u + 5.0 * l * radius * radius)).sqrt();
    k * inner * inner
}

/// Profile from the mixture's dissipativity combined with the quadratic upper
/// bound `U − min U ≤ (1 − ln a_i) + L_i|x − x_i|²`, choosing the component
/// that minimizes the tractability left-hand side (ties: largest weight).
pub fn a1_from_mixture(gm: &GaussianMixture) -> A1Profile {
    let dis = mixture_dissipativity(gm);
    let radius = (dis.beta / dis.alpha).sqrt();
    let m = dis.alpha;
    let mut best: Option<(f64, f64, f64, f64)> = None;
    for i in 0..gm.len() {
        let (_, li) = gm.eigen_extremes(i);
        let a = gm.weights()[i];
        let c_u = 1.0 - a.ln();
        let l = 2.0 * li;
        let lhs = tractability_lhs(c_u, radius, l, m);
        let better = match best {
            None => true,
            Some((bl, _, _, ba)) => lhs < bl || (lhs == bl && a > ba),
        };
        if better {
            best = Some((lhs, c_u, l, a));
        }
    }
    let (_, c_u, l, _) = best.expect("mixture has at least one component");
    let mut g = vec![0.0; gm.dim()];
    gm.u_grad(&vec![0.0; gm.dim()], &mut g);
    A1Profile {
        c_u,
        radius,
        l,
        m,
        grad0: norm(&g),
        provenance: "mixture".into(),
    }
}

/// Radius outside which an isotropic mixture is strongly convex.
#[derive(Debug, Clone, PartialEq)]
pub struct StrongOutside {
    pub radius: f64,
    /// Lower bound `s_k/2` on the Hessian outside the radius.
    pub convexity: f64,
    /// Upper bound `3s_k/2` on the Hessian norm outside the radius.
    pub hessian_bound: f64,
    pub s_star: f64,
    pub r_star: f64,
    pub c_const: f64,
}

pub fn mixture_strong_outside_radius(gm: &GaussianMixture) -> Result<StrongOutside> {
    let s = gm.isotropic_precisions().ok_or_else(|| {
        Error::HypothesisViolation("strong convexity radius needs an isotropic mixture".into())
    })?;
    if s.len() < 2 {
        return Err(Error::HypothesisViolation(
            "strong convexity radius needs at least two components".into(),
        ));
    }
    let s_k = s.iter().copied().fold(f64::INFINITY, f64::min);
    let minimizers: Vec<usize> = (0..s.len()).filter(|&i| s[i] == s_k).collect();
    if minimizers.len() != 1 {
        return Err(Error::HypothesisViolation(
            "the minimal precision must be attained by a unique component".into(),
        ));
    }
    let k = minimizers[0];
    let s_m = (0..s.len()).filter(|&i| i != k).map(|i| s[i]).fold(f64::INFINITY, f64::min);
    let s_hat = s.iter().copied().fold(0.0, f64::max);
    let r = gm.radius();
    let xk = norm(gm.mean(k));
    let ak = gm.weights()[k];
    let gap = s_m - s_k;

    let s_star = 2.0 * ((s_k * xk + (s_k + s_m) * r / 2.0).powi(2) + 4.0 * gap).sqrt() / gap;
    let log_c = [1.0, 2.0]
        .iter()
        .map(|c| s_k / (2.0 * c) * (s_star + xk).powi(2) - s_m / (2.0 * c) * (s_star - r).powi(2))
        .fold(f64::NEG_INFINITY, f64::max)
        + 2.0_f64.ln()
        + 2.0 * (s_star + r).ln()
        + (s_hat + 2.0 * s_hat * s_hat).ln()
        - 2.0 * ak.ln()
        - s_k.ln();
    let r_star = 2.0 * ((s_k * xk + s_m * r).powi(2) + 4.0 * gap * log_c).max(0.0).sqrt() / gap;
    let dis = mixture_dissipativity(gm);
    let radius = r_star.max(s_star).max((dis.beta / dis.alpha).sqrt());
    Ok(StrongOutside {
        radius,
        convexity: s_k / 2.0,
        hessian_bound: 1.5 * s_k,
        s_star,
        r_star,
        c_const: log_c.exp(),
    })
}

/// Smoothness of `T∘U` for the threshold `M = U(0) + c_U + 2L𝓡²`, using
/// `profile.l` as the outside-ball Hessian bound.
pub fn flattened_smoothness(profile: &A1Profile) -> f64 {
    flattened_smoothness_with(profile, profile.l)
}

/// As [`flattened_smoothness`] with an explicit outside-ball Hessian bound `L̄`.
pub fn flattened_smoothness_with(p: &A1Profile, l_bar: f64) -> f64 {
    let inner = p.grad0
        + l_bar * p.radius
        + 2.0 * l_bar * ((1.0 + p.c_u + 5.0 * p.l * p.radius * p.radius) / p.m).sqrt();
    l_bar + 2.0 * inner * inner
}

/// Everything needed to run the flattened pipeline on an isotropic mixture
/// that is strongly convex outside a ball.
#[derive(Debug, Clone)]
pub struct MixtureSmoothness {
    pub profile: A1Profile,
    pub outside: StrongOutside,
    /// Smoothness `L̂` of `T∘U`.
    pub l_hat: f64,
}

pub fn mixture_flattened_smoothness(gm: &GaussianMixture) -> Result<MixtureSmoothness> {
    let outside = mixture_strong_outside_radius(gm)?;
    let base = a1_from_mixture(gm);
    let profile = A1Profile {
        radius: outside.radius,
        provenance: "mixture, strongly convex outside a ball".into(),
        ..base
    };
    let l_hat = flattened_smoothness_with(&profile, outside.hessian_bound);
    Ok(MixtureSmoothness {
        profile,
        outside,
        l_hat,
    })
}

/// Result of a tractability condition check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionCheck {
    pub satisfied: bool,
    pub lhs: f64,
    pub rhs: f64,
}

impl ConditionCheck {
    fn new(lhs: f64, rhs: f64) -> Self {
        Self {
            satisfied: lhs <= rhs,
            lhs,
            rhs,
        }
    }

    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tractability {
    pub main: ConditionCheck,
    /// Simpler sufficient condition `√L 𝓡 (1 + L/m) ≤ √(d−1)/5`, only
    /// meaningful when `c_U = 0`.
    pub shortcut: Option<ConditionCheck>,
}

/// `(L/m)(√L𝓡 + ((L/m)(4c_U + 5L𝓡²))^{1/2})² ≤ (d−1)/(e ĉ²)`.
pub fn check_tractability(profile: &A1Profile, c_hat: f64, d: usize) -> Result<Tractability> {
    if !(c_hat >= 1.0) {
        return Err(Error::InvalidInput(format!("ĉ must be at least 1, got {c_hat}")));
    }
    if d == 0 {
        return Err(Error::InvalidInput("dimension must be positive".into()));
    }
    let p = profile;
    let dm1 = (d - 1) as f64;
    let main = ConditionCheck::new(tractability_lhs(p.c_u, p.radius, p.l, p.m), dm1 / (E * c_hat * c_hat));
    let shortcut = (p.c_u == 0.0).then(|| {
        ConditionCheck::new(p.l.sqrt() * p.radius * (1.0 + p.l / p.m), dm1.sqrt() / 5.0)
    });
    Ok(Tractability { main, shortcut })
}

/// Constants shared by the network posterior's profile and condition.
fn bnn_terms(net: &BnnPosterior) -> (f64, f64, f64, f64) {
    let kb = net.beta_like() * net.data_len() as f64;
    let sigma = net.sigma_max();
    let act = net.m_star() as f64 * sigma * sigma + 1.0;
    let i = net.classes() as f64;
    (kb, act, i, net.c_hat_bias())
}

pub fn bnn_profile(net: &BnnPosterior) -> Result<A1Profile> {
    if !net.final_layer_injective() {
        return Err(Error::HypothesisViolation(
            "final-layer weights and biases must map to distinct variables".into(),
        ));
    }
    let (kb, act, i, c_hat) = bnn_terms(net);
    if !act.is_finite() {
        return Err(Error::HypothesisViolation(
            "layers feeding the output must have bounded activations".into(),
        ));
    }
    let (a1, a2) = (net.alpha1(), net.alpha2());
    let amin = a1.min(a2);
    let amax = a1.max(a2);
    let c_u = kb * (2.0 * (i - 1.0)).ln() + 8.0 * kb * kb / amax * act;
    let radius = kb * act.sqrt() / amin
        + (kb * kb * act + amin * kb * (c_hat + (2.0 * i * i - 2.0 * i).ln())).sqrt() / amin;
    let mut g = vec![0.0; net.dim()];
    net.u_grad(&vec![0.0; net.dim()], &mut g);
    A1Profile::new(c_u, radius, 9.0 * amax / 4.0, 2.0 * amin, norm(&g), "network posterior")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BnnTractability {
    pub check: ConditionCheck,
    /// Hidden neurons `m*(L̄−2)` a uniform-width net needs, ignoring logarithms.
    pub neuron_heuristic: f64,
}

/// `9e((3/2)(ĉ + ln(2I²−2I)) + 3α₁^{−1/2}(m*σ²+1)^{1/2})² ≤ d − 1`.
pub fn bnn_tractability(net: &BnnPosterior) -> Result<BnnTractability> {
    if net.alpha1() != net.alpha2() {
        return Err(Error::Unsupported(
            "the network condition is implemented for α₁ = α₂ only".into(),
        ));
    }
    let k = net.data_len() as f64;
    if (net.beta_like() * k - 1.0).abs() > 1e-12 {
        return Err(Error::Unsupported(
            "the network condition assumes likelihood weight β = 1/K".into(),
        ));
    }
    let (_, act, i, c_hat) = bnn_terms(net);
    let lhs = bnn_condition_lhs(c_hat, i as usize, act - 1.0, net.alpha1());
    let d = net.dim();
    Ok(BnnTractability {
        check: ConditionCheck::new(lhs, d as f64 - 1.0),
        neuron_heuristic: neuron_heuristic(net.alpha1()),
    })
}

/// Left side of the network condition; `active = m* σ_max²`.
pub fn bnn_condition_lhs(c_hat_bias: f64, classes: usize, active: f64, alpha1: f64) -> f64 {
    let i = classes as f64;
    let t = 1.5 * (c_hat_bias + (2.0 * i * i - 2.0 * i).ln()) + 3.0 * ((active + 1.0) / alpha1).sqrt();
    9.0 * E * t * t
}

/// `⌈81e/α₁⌉`, the hidden-neuron count above which the condition holds up to
/// logarithmic terms.
pub fn neuron_heuristic(alpha1: f64) -> f64 {
    (81.0 * E / alpha1).ceil()
}
