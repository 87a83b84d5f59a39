//! Counterexample densities showing that no sampler can be efficient on
//! every strongly-convex-outside-a-ball or dissipative target, with Monte
//! Carlo checks of their mass and smoothness properties.

use std::f64::consts::PI;

use rand::Rng as _;

use crate::density::TargetDensity;
use crate::error::{Error, Result};
use crate::flatten::{mollifier, mollifier_cdf};
use crate::math::{dist, dot, norm};
use crate::par::par_map;
use crate::rng::{self, Rng};
use crate::samplers::{run_mala, run_ula, ChainConfig};

/// `c₀ = [((16/9) sin(3π/16))² − 1/6]^{−1/2}`.
pub fn c0() -> f64 {
    let s = 16.0 / 9.0 * (3.0 * PI / 16.0).sin();
    (s * s - 1.0 / 6.0).powf(-0.5)
}

/// Two Gaussians of curvature `m₀` (at the origin) and `L₀` (at `x₀`) sewn
/// together along the sphere `|x − γx₀| = r_d`.
#[derive(Debug, Clone)]
pub struct SewnBimodal {
    pub m0: f64,
    pub l0: f64,
    pub d: usize,
    pub x0: Vec<f64>,
    pub center: Vec<f64>,
    pub r_d: f64,
    pub r0: f64,
    pub gamma: f64,
    half_d_ln_m: f64,
    half_d_ln_l: f64,
}

pub fn build_f3(m0: f64, l0: f64, direction: &[f64], d: usize) -> Result<SewnBimodal> {
    if d < 2 || direction.len() != d {
        return Err(Error::InvalidInput("need d > 1 and a direction of length d".into()));
    }
    if !(m0 > 0.0) || !(6.0 * (24.0 / d as f64).exp() * m0 < l0) {
        return Err(Error::HypothesisViolation(format!(
            "need 6e^(24/d) m₀ < L₀ (m₀={m0}, L₀={l0}, d={d})"
        )));
    }
    let n = norm(direction);
    if !(n > 0.0) {
        return Err(Error::InvalidInput("direction must be nonzero".into()));
    }
    let kappa = l0 / m0;
    let c0 = c0();
    let df = d as f64;
    let len = c0 * (df * kappa.ln() / l0).sqrt();
    let x0: Vec<f64> = direction.iter().map(|v| v / n * len).collect();
    let ik = 1.0 / kappa;
    let r_d = len * (ik / (1.0 - ik).powi(2) + 1.0 / (c0 * c0 * (1.0 - ik))).sqrt();
    let gamma = 1.0 / (1.0 - ik);
    let ratio = r_d / len;
    let upper = gamma * (1.0 / 6.0 + 1.0 / (c0 * c0)).sqrt();
    if !(ratio >= 1.0 / c0 - 1e-12 && ratio <= upper + 1e-12) || !(gamma > 1.0 && gamma < 1.2) {
        return Err(Error::HypothesisViolation(format!(
            "sewing radius bracket failed: r_d/|x₀| = {ratio}, γ = {gamma}"
        )));
    }
    Ok(SewnBimodal {
        m0,
        l0,
        d,
        center: x0.iter().map(|v| gamma * v).collect(),
        x0,
        r_d,
        r0: r_d / 8.0,
        gamma,
        half_d_ln_m: 0.5 * df * (2.0 * PI / m0).ln(),
        half_d_ln_l: 0.5 * df * (2.0 * PI / l0).ln(),
    })
}

impl SewnBimodal {
    /// Wide Gaussian part (normalized negative log-density).
    pub fn f1(&self, x: &[f64]) -> f64 {
        0.5 * self.m0 * dot(x, x) + self.half_d_ln_m
    }

    /// Narrow Gaussian part (normalized negative log-density).
    pub fn f2(&self, x: &[f64]) -> f64 {
        let r = dist(x, &self.x0);
        0.5 * self.l0 * r * r + self.half_d_ln_l
    }

    /// `|x − γx₀|`.
    pub fn distance_to_center(&self, x: &[f64]) -> f64 {
        dist(x, &self.center)
    }

    /// Radius of the ball `B_{r_d−r₀}(γx₀)`, where `f₃ = f₂`, that counts as
    /// finding the narrow mode. The larger sewing ball `B_{r_d+r₀}(γx₀)`
    /// already contains the origin.
    pub fn hit_radius(&self) -> f64 {
        self.r_d - self.r0
    }

    fn blend_arg(&self, rho: f64) -> f64 {
        (rho - (self.r_d - self.r0)) / self.r0 - 1.0
    }
}

impl TargetDensity for SewnBimodal {
    fn dim(&self) -> usize {
        self.d
    }

    fn u_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let rho = self.distance_to_center(x);
        if rho >= self.r_d + self.r0 {
            for (g, xi) in grad.iter_mut().zip(x) {
                *g = self.m0 * xi;
            }
            return self.f1(x);
        }
        if rho <= self.r_d - self.r0 {
            for ((g, xi), ci) in grad.iter_mut().zip(x).zip(&self.x0) {
                *g = self.l0 * (xi - ci);
            }
            return self.f2(x);
        }
        let t = self.blend_arg(rho);
        let g_val = mollifier_cdf(t);
        let dg = mollifier(t) / self.r0;
        let (f1, f2) = (self.f1(x), self.f2(x));
        for j in 0..self.d {
            let radial = (x[j] - self.center[j]) / rho;
            grad[j] = dg * radial * (f1 - f2)
                + g_val * self.m0 * x[j]
                + (1.0 - g_val) * self.l0 * (x[j] - self.x0[j]);
        }
        g_val * f1 + (1.0 - g_val) * f2
    }
}

/// `(p, SE)` for `∫_{B_{r_d−r₀}(γx₀)} e^{−f₃}`. Inside that ball `f₃ = f₂`
/// and `e^{−f₂}` is a normalized Gaussian, so this is a ball probability.
pub fn f3_inner_mass(f3: &SewnBimodal, n_mc: usize, seed: u64) -> (f64, f64) {
    let d = f3.d;
    let inner = f3.r_d - f3.r0;
    let sd2 = 1.0 / f3.l0.sqrt();
    let mut r = rng::stream(seed, 0);
    let mut x = vec![0.0; d];
    let mut hits = 0usize;
    for _ in 0..n_mc {
        rng::fill_normal(&mut r, &mut x);
        for j in 0..d {
            x[j] = f3.x0[j] + sd2 * x[j];
        }
        if f3.distance_to_center(&x) <= inner {
            hits += 1;
        }
    }
    let p = hits as f64 / n_mc as f64;
    (p, (p * (1.0 - p) / n_mc as f64).sqrt())
}

/// `(ratio, SE)` of `∫_{B_{r_d−r₀}(γx₀)} e^{−f₃}` to `∫ e^{−f₃}`.
pub fn f3_mass_ratio(f3: &SewnBimodal, n_mc: usize, seed: u64) -> Result<(f64, f64)> {
    let d = f3.d;
    let sd2 = 1.0 / f3.l0.sqrt();
    let sd1 = 1.0 / f3.m0.sqrt();
    let (p, se_p) = f3_inner_mass(f3, n_mc, seed);
    let mut x = vec![0.0; d];

    // Denominator: proposal ½(e^{−f₁} + e^{−f₂}), weight 2e^{−f₃}/(e^{−f₁}+e^{−f₂}) ≤ 2.
    let mut r = rng::stream(seed, 1);
    let (mut s, mut s2) = (0.0, 0.0);
    let mut g = vec![0.0; d];
    for _ in 0..n_mc {
        rng::fill_normal(&mut r, &mut x);
        if r.random::<bool>() {
            x.iter_mut().for_each(|v| *v *= sd1);
        } else {
            for j in 0..d {
                x[j] = f3.x0[j] + sd2 * x[j];
            }
        }
        let f = f3.u_grad(&x, &mut g);
        let (a, b) = (-f3.f1(&x), -f3.f2(&x));
        let mx = a.max(b);
        let w = 2.0 * (-f - mx).exp() / ((a - mx).exp() + (b - mx).exp());
        s += w;
        s2 += w * w;
    }
    let nf = n_mc as f64;
    let z = s / nf;
    let se_z = ((s2 / nf - z * z).max(0.0) / nf).sqrt();
    finish_ratio(p, se_p, z, se_z)
}

fn finish_ratio(num: f64, se_num: f64, den: f64, se_den: f64) -> Result<(f64, f64)> {
    if !(num > 0.0) || !(den > 0.0) {
        return Err(Error::TooNoisy { rel_se: f64::INFINITY });
    }
    let ratio = num / den;
    let se = ratio * ((se_num / num).powi(2) + (se_den / den).powi(2)).sqrt();
    if se / ratio > 0.1 {
        return Err(Error::TooNoisy { rel_se: se / ratio });
    }
    Ok((ratio.min(1.0), se))
}

/// Left and right edges of the smoothed step in the angular variable.
pub fn cap_edges() -> (f64, f64) {
    ((3f64.sqrt() + 2f64.sqrt()) / 4.0, 3f64.sqrt() / 2.0)
}

fn h_shift() -> f64 {
    (3.0 * 3f64.sqrt() + 2f64.sqrt()) / 8.0
}

fn h_scale() -> f64 {
    (3f64.sqrt() - 2f64.sqrt()) / 8.0
}

/// Smoothed Heaviside step: 0 below `(√3+√2)/4`, 1 above `√3/2`.
pub fn smooth_step(t: f64) -> f64 {
    mollifier_cdf((t - h_shift()) / h_scale())
}

pub fn smooth_step_prime(t: f64) -> f64 {
    mollifier((t - h_shift()) / h_scale()) / h_scale()
}

/// `(m₁H(t) + L₁(1−H(t)))|x|²/2` with `t` the cosine between `x` and `z`.
#[derive(Debug, Clone)]
pub struct AngularTwoScale {
    pub m1: f64,
    pub l1: f64,
    pub d: usize,
    pub z: Vec<f64>,
}

pub fn build_f4(m1: f64, l1: f64, direction: &[f64], d: usize) -> Result<AngularTwoScale> {
    if d < 3 || direction.len() != d {
        return Err(Error::InvalidInput("need d > 2 and a direction of length d".into()));
    }
    if !(m1 > 0.0) || !(16.0 * m1 <= l1) {
        return Err(Error::HypothesisViolation(format!("need 16m₁ ≤ L₁ (m₁={m1}, L₁={l1})")));
    }
    let n = norm(direction);
    if !(n > 0.0) {
        return Err(Error::InvalidInput("direction must be nonzero".into()));
    }
    Ok(AngularTwoScale {
        m1,
        l1,
        d,
        z: direction.iter().map(|v| v / n).collect(),
    })
}

impl AngularTwoScale {
    pub fn cosine(&self, x: &[f64]) -> Option<f64> {
        let r = norm(x);
        (r >= 1e-12).then(|| (dot(&self.z, x) / r).clamp(-1.0, 1.0))
    }
}

impl TargetDensity for AngularTwoScale {
    fn dim(&self) -> usize {
        self.d
    }

    fn u_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let r = norm(x);
        if r < 1e-12 {
            grad.iter_mut().for_each(|g| *g = 0.0);
            return 0.0;
        }
        let zx = dot(&self.z, x);
        let t = (zx / r).clamp(-1.0, 1.0);
        let h = smooth_step(t);
        let k = self.m1 * h + self.l1 * (1.0 - h);
        let kp = (self.m1 - self.l1) * smooth_step_prime(t);
        for j in 0..self.d {
            let ybar = r * self.z[j] - zx * x[j] / r;
            grad[j] = 0.5 * kp * ybar + k * x[j];
        }
        0.5 * k * r * r
    }
}

/// `(ratio, SE)` of the mass in the cap `{t ≥ (√3+√2)/4}` to the total.
pub fn f4_cap_mass(f4: &AngularTwoScale, n_mc: usize, seed: u64) -> Result<(f64, f64)> {
    if f4.d > 32 {
        return Err(Error::Unsupported("cap mass estimation is limited to d ≤ 32".into()));
    }
    let d = f4.d as f64;
    let (lo, _) = cap_edges();
    let mut g = vec![0.0; f4.d];
    let mut x = vec![0.0; f4.d];

    // Cap: proposal N(0, I/m₁); weight e^{−f₄} / N(x) in units of (2π/m₁)^{d/2}.
    let mut r = rng::stream(seed, 0);
    let (mut s, mut s2) = (0.0, 0.0);
    let sd = 1.0 / f4.m1.sqrt();
    for _ in 0..n_mc {
        rng::fill_normal(&mut r, &mut x);
        x.iter_mut().for_each(|v| *v *= sd);
        let w = match f4.cosine(&x) {
            Some(t) if t >= lo => {
                let f = f4.u_grad(&x, &mut g);
                (-(f - 0.5 * f4.m1 * dot(&x, &x))).exp()
            }
            _ => 0.0,
        };
        s += w;
        s2 += w * w;
    }
    let nf = n_mc as f64;
    let cap = s / nf;
    let se_cap = ((s2 / nf - cap * cap).max(0.0) / nf).sqrt();

    // Complement: f₄ = L₁|x|²/2 exactly, so its integral is (2π/L₁)^{d/2}
    // times the probability that an isotropic draw falls outside the cap.
    let mut r = rng::stream(seed, 1);
    let sd = 1.0 / f4.l1.sqrt();
    let mut outside = 0usize;
    for _ in 0..n_mc {
        rng::fill_normal(&mut r, &mut x);
        x.iter_mut().for_each(|v| *v *= sd);
        if f4.cosine(&x).is_none_or(|t| t < lo) {
            outside += 1;
        }
    }
    let q = outside as f64 / nf;
    let scale = (f4.m1 / f4.l1).powf(d / 2.0);
    let comp = scale * q;
    let se_comp = scale * (q * (1.0 - q) / nf).sqrt();

    let total = cap + comp;
    let ratio = cap / total;
    // Delta method for c/(c+k) with independent c and k.
    let dc = comp / (total * total);
    let dk = cap / (total * total);
    let se = ((dc * se_cap).powi(2) + (dk * se_comp).powi(2)).sqrt();
    if !(cap > 0.0) || se / ratio > 0.1 {
        return Err(Error::TooNoisy { rel_se: se / ratio });
    }
    Ok((ratio.min(1.0), se))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeMode {
    /// Largest finite-difference Hessian operator norm over probe points.
    HessianNorm,
    /// Largest `|∇f(x) − ∇f(y)| / |x − y|` over probe pairs.
    GradLipschitz,
}

/// Operator norm of the Hessian at `x` by power iteration on central
/// differences of the gradient.
pub fn hessian_norm_at<T: TargetDensity + ?Sized>(target: &T, x: &[f64], rng: &mut Rng) -> f64 {
    let d = target.dim();
    let h = 1e-5 * (1.0 + norm(x) / (d as f64).sqrt());
    let mut v = rng::unit_vector(rng, d);
    let mut gp = vec![0.0; d];
    let mut gm = vec![0.0; d];
    let mut xp = vec![0.0; d];
    let mut xm = vec![0.0; d];
    let mut lambda = 0.0;
    for _ in 0..200 {
        for j in 0..d {
            xp[j] = x[j] + h * v[j];
            xm[j] = x[j] - h * v[j];
        }
        target.u_grad(&xp, &mut gp);
        target.u_grad(&xm, &mut gm);
        let hv: Vec<f64> = gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let n = norm(&hv);
        if n == 0.0 {
            return 0.0;
        }
        let converged = (n - lambda).abs() <= 1e-9 * n;
        lambda = n;
        v = hv.into_iter().map(|c| c / n).collect();
        if converged {
            break;
        }
    }
    lambda
}

/// Maximum smoothness statistic over probe points drawn by `region`.
pub fn probe_smoothness<T, S>(target: &T, mut region: S, n_points: usize, mode: ProbeMode, seed: u64) -> f64
where
    T: TargetDensity + ?Sized,
    S: FnMut(&mut Rng) -> Vec<f64>,
{
    let d = target.dim();
    let mut r = rng::stream(seed, 0);
    let mut best: f64 = 0.0;
    match mode {
        ProbeMode::HessianNorm => {
            for _ in 0..n_points {
                let x = region(&mut r);
                best = best.max(hessian_norm_at(target, &x, &mut r));
            }
        }
        ProbeMode::GradLipschitz => {
            let mut gx = vec![0.0; d];
            let mut gy = vec![0.0; d];
            for _ in 0..n_points {
                let x = region(&mut r);
                let scale = 10f64.powf(r.random_range(-4.0..0.0)) * (1.0 + norm(&x));
                let dir = rng::unit_vector(&mut r, d);
                let y: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + scale * b).collect();
                target.u_grad(&x, &mut gx);
                target.u_grad(&y, &mut gy);
                let num = dist(&gx, &gy);
                let den = dist(&x, &y);
                if den > 0.0 {
                    best = best.max(num / den);
                }
            }
        }
    }
    best
}

/// Probe sampler for the sewn density: 80% of points in the sewing annulus,
/// the rest spread over a ball containing both modes.
pub fn f3_probe_region(f3: &SewnBimodal) -> impl FnMut(&mut Rng) -> Vec<f64> + '_ {
    move |r: &mut Rng| {
        let d = f3.d;
        let dir = rng::unit_vector(r, d);
        if r.random::<f64>() < 0.8 {
            let rho = f3.r_d + f3.r0 * r.random_range(-1.0..1.0);
            f3.center.iter().zip(&dir).map(|(c, u)| c + rho * u).collect()
        } else {
            let reach = 2.0 * norm(&f3.center) + 3.0 * (d as f64 / f3.m0).sqrt();
            let rad = reach * r.random::<f64>();
            dir.iter().map(|u| u * rad).collect()
        }
    }
}

/// Probe sampler for the angular density: 80% of points in the transition
/// cone, the rest isotropic.
pub fn f4_probe_region(f4: &AngularTwoScale) -> impl FnMut(&mut Rng) -> Vec<f64> + '_ {
    move |r: &mut Rng| {
        let d = f4.d;
        let radius = 0.1 + 3.0 * r.random::<f64>() * (d as f64 / f4.m1).sqrt();
        let u = rng::unit_vector(r, d);
        if r.random::<f64>() < 0.8 {
            let (lo, hi) = cap_edges();
            let t: f64 = r.random_range(lo..hi);
            // Component of u orthogonal to z.
            let c = dot(&u, &f4.z);
            let mut w: Vec<f64> = u.iter().zip(&f4.z).map(|(a, b)| a - c * b).collect();
            let wn = norm(&w);
            w.iter_mut().for_each(|v| *v /= wn);
            let s = (1.0 - t * t).sqrt();
            f4.z.iter().zip(&w).map(|(zj, wj)| radius * (t * zj + s * wj)).collect()
        } else {
            u.into_iter().map(|v| v * radius).collect()
        }
    }
}

/// Natural log of `d√(2π) / ((d−1)√(d+2)) · ᾱ⁻¹ · (sin ᾱ)^{2−d}`.
pub fn ln_packing_lower_bound(d: usize, angle: f64) -> Result<f64> {
    if d < 3 || !(angle > 0.0 && angle < PI / 2.0) {
        return Err(Error::InvalidInput("need d ≥ 3 and ᾱ ∈ (0, π/2)".into()));
    }
    let df = d as f64;
    Ok(df.ln() + 0.5 * (2.0 * PI).ln() - (df - 1.0).ln() - 0.5 * (df + 2.0).ln() - angle.ln()
        + (2.0 - df) * angle.sin().ln())
}

/// Lower bound on the size of a maximal set of unit directions whose caps of
/// angular radius `ᾱ` do not overlap.
pub fn packing_lower_bound(d: usize, angle: f64) -> Result<f64> {
    Ok(ln_packing_lower_bound(d, angle)?.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Strongly convex outside a ball.
    Sewn,
    /// Dissipative.
    Angular,
}

/// Largest sample count `N` for which some member of the family defeats every
/// estimator using `N` evaluations; `0` when the regime is vacuous.
pub fn intractability_threshold(d: usize, theta_norm: f64, which: Family) -> Result<f64> {
    if !(theta_norm >= 1.0) || d == 0 {
        return Err(Error::InvalidInput("need |θ̂| ≥ 1 and d ≥ 1".into()));
    }
    let df = d as f64;
    let ln_rhs = match which {
        Family::Sewn => -df * (3.0 * PI / 8.0).sin().ln() - (5.0 * (df + 2.0).sqrt() * theta_norm).ln(),
        Family::Angular => {
            let (lo, _) = cap_edges();
            -df * (2.0 * lo.acos()).sin().ln() - (3.0 * theta_norm * (df + 2.0).sqrt()).ln()
        }
    };
    let rhs = ln_rhs.exp() - 1.0;
    if !(rhs > 0.0) {
        return Ok(0.0);
    }
    if rhs.is_infinite() {
        return Ok(f64::INFINITY);
    }
    Ok(rhs.ceil() - 1.0)
}

/// Sampler used by [`mode_hit_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub enum HitSampler {
    /// Never leaves the origin.
    Stationary,
    /// Jumps straight to the hidden mode centre.
    Oracle,
    Ula { step: f64, steps: usize },
    Mala { step: f64, steps: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeHitConfig {
    pub sampler: HitSampler,
    pub m0: f64,
    /// `κ₀ = L₀/m₀`; must exceed `6e^{24/d}`.
    pub kappa: f64,
}

/// Fraction of trials (hidden random mode directions) in which the sampler
/// started at the origin ever enters `B_{r_d−r₀}(γx₀)`, with binomial SE.
pub fn mode_hit_experiment(cfg: &ModeHitConfig, d: usize, trials: usize, seed: u64) -> Result<(f64, f64)> {
    if d < 8 || trials == 0 {
        return Err(Error::InvalidInput("need d ≥ 8 and at least one trial".into()));
    }
    let run = |t: usize| -> Result<bool> {
        let mut r = rng::stream(seed, t as u64);
        let dir = rng::unit_vector(&mut r, d);
        let f3 = build_f3(cfg.m0, cfg.kappa * cfg.m0, &dir, d)?;
        let hit = |x: &[f64]| f3.distance_to_center(x) < f3.hit_radius();
        Ok(match cfg.sampler {
            HitSampler::Stationary => hit(&vec![0.0; d]),
            HitSampler::Oracle => hit(&f3.center),
            HitSampler::Ula { step, steps } | HitSampler::Mala { step, steps } => {
                let mut c = ChainConfig::new(step, steps, seed, d);
                c.stream = (1u64 << 32) + t as u64;
                let trace = if matches!(cfg.sampler, HitSampler::Ula { .. }) {
                    run_ula(&f3, &c)?
                } else {
                    run_mala(&f3, &c)?
                };
                trace.states.iter().any(|x| hit(x))
            }
        })
    };
    let outcomes: Vec<bool> = par_map(trials, run)?;
    let p = outcomes.iter().filter(|&&h| h).count() as f64 / trials as f64;
    Ok((p, (p * (1.0 - p) / trials as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::Quadratic;

    #[test]
    fn c0_value() {
        assert!((c0() - 1.1119).abs() < 1e-4);
    }

    #[test]
    fn step_edges() {
        let (lo, hi) = cap_edges();
        assert!((h_shift() + h_scale() - hi).abs() <= 1e-15);
        assert!((h_shift() - h_scale() - lo).abs() <= 1e-15);
        assert_eq!(smooth_step(lo), 0.0);
        assert_eq!(smooth_step(hi), 1.0);
    }

    #[test]
    fn quadratic_hessian_norm() {
        let q = Quadratic::centered(2.5, 5).unwrap();
        let v = probe_smoothness(&q, |r: &mut Rng| rng::normal_vec(r, 5), 10, ProbeMode::HessianNorm, 1);
        assert!((v - 2.5).abs() < 2.5e-4);
    }

    #[test]
    fn thresholds() {
        assert_eq!(intractability_threshold(100, 1.0, Family::Sewn).unwrap(), 53.0);
        assert_eq!(intractability_threshold(3, 1.0, Family::Sewn).unwrap(), 0.0);
        // sin(2θ) = 2 cos θ sin θ with cos θ = (√3+√2)/4
        let c = (3f64.sqrt() + 2f64.sqrt()) / 4.0;
        let s = 2.0 * c * (1.0 - c * c).sqrt();
        let expect = (s.powi(-500) / (3.0 * 502f64.sqrt()) - 1.0).floor();
        assert_eq!(intractability_threshold(500, 1.0, Family::Angular).unwrap(), expect);
        assert_eq!(expect, 29463.0);
    }

    #[test]
    fn packing_bound_small_d() {
        assert!(packing_lower_bound(3, 3.0 * PI / 8.0).unwrap() >= 1.0);
    }

    #[test]
    fn f3_preconditions() {
        let d = 8;
        let dir = vec![1.0; d];
        assert!(build_f3(1.0, 6.0 * 3f64.exp(), &dir, d).is_err());
        assert!(build_f3(1.0, 6.5 * 3f64.exp(), &dir, d).is_ok());
        assert!(build_f4(1.0, 15.0, &dir, d).is_err());
    }
}
