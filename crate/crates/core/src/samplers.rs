//! Langevin samplers for the flattened proposal and an exact rejection
//! sampler for low-dimensional checks.

use rand::Rng as _;

use crate::density::{GaussianMixture, Precision, TargetDensity};
use crate::error::{ensure_dim, Error, Result};
use crate::flatten::FlattenSpec;
use crate::profiles::{a1_from_mixture, mixture_dissipativity};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub step: f64,
    pub steps: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Stream index; chains sharing a seed but not a stream are independent.
    pub stream: u64,
    pub init: Vec<f64>,
}

impl ChainConfig {
    pub fn new(step: f64, steps: usize, seed: u64, d: usize) -> Self {
        Self {
            step,
            steps,
            burn_in: 0,
            thin: 1,
            seed,
            stream: 0,
            init: vec![0.0; d],
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        ensure_dim(d, self.init.len())?;
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::InvalidInput("step size must be positive".into()));
        }
        if self.steps <= self.burn_in {
            return Err(Error::InvalidInput("steps must exceed burn_in".into()));
        }
        if self.thin == 0 {
            return Err(Error::InvalidInput("thin must be at least 1".into()));
        }
        Ok(())
    }

    fn keeps(&self, iteration: usize) -> bool {
        iteration > self.burn_in && (iteration - self.burn_in) % self.thin == 0
    }
}

/// Warns when the step exceeds the stability limit `1/L̂`.
pub fn check_step(step: f64, l_hat: f64) {
    if step > 1.0 / l_hat {
        log::warn!("step {step:.3e} exceeds 1/L̂ = {:.3e}; the chain may be unstable", 1.0 / l_hat);
    }
}

/// Retained states plus bookkeeping.
#[derive(Debug, Clone)]
pub struct Trace {
    pub states: Vec<Vec<f64>>,
    pub acceptance: f64,
    /// Number of `(U, ∇U)` evaluations spent.
    pub evaluations: usize,
}

/// Unadjusted Langevin: `x ← x − h∇f(x) + √(2h) ξ`.
pub fn run_ula<T: TargetDensity + ?Sized>(target: &T, cfg: &ChainConfig) -> Result<Trace> {
    let d = target.dim();
    cfg.validate(d)?;
    let mut rng = rng::stream(cfg.seed, cfg.stream);
    let mut x = cfg.init.clone();
    let mut g = vec![0.0; d];
    let mut xi = vec![0.0; d];
    let noise = (2.0 * cfg.step).sqrt();
    let mut states = Vec::with_capacity((cfg.steps - cfg.burn_in) / cfg.thin);
    for it in 1..=cfg.steps {
        target.u_grad(&x, &mut g);
        rng::fill_normal(&mut rng, &mut xi);
        for ((xj, gj), zj) in x.iter_mut().zip(&g).zip(&xi) {
            *xj += -cfg.step * gj + noise * zj;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { iteration: it });
        }
        if cfg.keeps(it) {
            states.push(x.clone());
        }
    }
    Ok(Trace {
        states,
        acceptance: 1.0,
        evaluations: cfg.steps,
    })
}

/// `ln q(x → y)` up to a constant for the Langevin proposal
/// `y ~ N(x − h∇f(x), 2h I)`.
pub fn proposal_log_density(x: &[f64], grad_x: &[f64], y: &[f64], step: f64) -> f64 {
    let mut s = 0.0;
    for ((yj, xj), gj) in y.iter().zip(x).zip(grad_x) {
        let r = yj - xj + step * gj;
        s += r * r;
    }
    -s / (4.0 * step)
}

/// `ln` of the Metropolis–Hastings ratio for a Langevin move `x → y`.
pub fn mala_log_accept_ratio(
    fx: f64,
    grad_x: &[f64],
    x: &[f64],
    fy: f64,
    grad_y: &[f64],
    y: &[f64],
    step: f64,
) -> f64 {
    fx - fy + proposal_log_density(y, grad_y, x, step) - proposal_log_density(x, grad_x, y, step)
}

/// Metropolis-adjusted Langevin; reversible with respect to `e^{−f}`.
pub fn run_mala<T: TargetDensity + ?Sized>(target: &T, cfg: &ChainConfig) -> Result<Trace> {
    let d = target.dim();
    cfg.validate(d)?;
    let mut rng = rng::stream(cfg.seed, cfg.stream);
    let mut x = cfg.init.clone();
    let mut gx = vec![0.0; d];
    let mut fx = target.u_grad(&x, &mut gx);
    if !fx.is_finite() {
        return Err(Error::Divergence { iteration: 0 });
    }
    let mut y = vec![0.0; d];
    let mut gy = vec![0.0; d];
    let mut xi = vec![0.0; d];
    let noise = (2.0 * cfg.step).sqrt();
    let mut accepted = 0usize;
    let mut states = Vec::with_capacity((cfg.steps - cfg.burn_in) / cfg.thin);
    for it in 1..=cfg.steps {
        rng::fill_normal(&mut rng, &mut xi);
        for j in 0..d {
            y[j] = x[j] - cfg.step * gx[j] + noise * xi[j];
        }
        let fy = target.u_grad(&y, &mut gy);
        let u: f64 = rng.random();
        if fy.is_finite() && y.iter().all(|v| v.is_finite()) {
            let log_a = mala_log_accept_ratio(fx, &gx, &x, fy, &gy, &y, cfg.step);
            if u.ln() < log_a {
                std::mem::swap(&mut x, &mut y);
                std::mem::swap(&mut gx, &mut gy);
                fx = fy;
                accepted += 1;
            }
        }
        if cfg.keeps(it) {
            states.push(x.clone());
        }
    }
    Ok(Trace {
        states,
        acceptance: accepted as f64 / cfg.steps as f64,
        evaluations: cfg.steps + 1,
    })
}

/// Exact sampler for `π ∝ e^{−T∘U}` in `d ≤ 3` by rejection from a
/// Gaussian-mixture envelope `q ∝ e^{−U_env}`.
#[derive(Debug)]
pub struct RejectionSampler<'a, T: ?Sized> {
    target: &'a T,
    spec: FlattenSpec,
    envelope: &'a GaussianMixture,
    env_log_z: f64,
    log_k: f64,
}

const SAFETY: f64 = 2.0;
const MIN_RATE: f64 = 1e-4;

impl<'a, T: TargetDensity + ?Sized> RejectionSampler<'a, T> {
    /// Computes the domination constant on a probe grid plus envelope draws,
    /// then applies a safety factor of 2.
    pub fn new(target: &'a T, spec: FlattenSpec, envelope: &'a GaussianMixture, seed: u64) -> Result<Self> {
        let d = target.dim();
        ensure_dim(d, envelope.dim())?;
        if d > 3 {
            return Err(Error::Unsupported("rejection sampling is limited to d ≤ 3".into()));
        }
        let env_log_z = envelope.log_normalizer();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for i in 0..envelope.len() {
            let (m, _) = envelope.eigen_extremes(i);
            let half = 10.0 / m.sqrt();
            for j in 0..d {
                lo[j] = lo[j].min(envelope.mean(i)[j] - half);
                hi[j] = hi[j].max(envelope.mean(i)[j] + half);
            }
        }
        let per_axis = match d {
            1 => 20_001,
            2 => 401,
            _ => 81,
        };
        let mut best = f64::NEG_INFINITY;
        let mut idx = vec![0usize; d];
        let mut x = vec![0.0; d];
        let log_ratio = |x: &[f64]| -> f64 {
            let mut g = vec![0.0; d];
            envelope.u(x) + env_log_z - spec.eval_into(target, x, &mut g)
        };
        loop {
            for j in 0..d {
                x[j] = lo[j] + (hi[j] - lo[j]) * idx[j] as f64 / (per_axis - 1) as f64;
            }
            best = best.max(log_ratio(&x));
            let mut j = 0;
            while j < d {
                idx[j] += 1;
                if idx[j] < per_axis {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
            if j == d {
                break;
            }
        }
        for p in envelope.sample_iid(10_000, seed) {
            best = best.max(log_ratio(&p));
        }
        if !best.is_finite() {
            return Err(Error::NumericalOverflow("envelope ratio is not finite".into()));
        }
        Ok(Self {
            target,
            spec,
            envelope,
            env_log_z,
            log_k: best + SAFETY.ln(),
        })
    }

    /// `ln` of the domination constant `K` with `e^{−T∘U} ≤ K q`.
    pub fn log_constant(&self) -> f64 {
        self.log_k
    }

    pub fn sample(&self, n: usize, rng: &mut Rng) -> Result<(Vec<Vec<f64>>, f64)> {
        let d = self.target.dim();
        let mut out = Vec::with_capacity(n);
        let mut proposals = 0usize;
        let mut g = vec![0.0; d];
        while out.len() < n {
            let batch = self.envelope.sample_with(256, rng);
            for x in batch {
                proposals += 1;
                let log_r = self.envelope.u(&x) + self.env_log_z
                    - self.spec.eval_into(self.target, &x, &mut g)
                    - self.log_k;
                if log_r > 0.0 {
                    return Err(Error::EnvelopeViolated { excess: log_r });
                }
                let u: f64 = rng.random();
                if u.ln() < log_r {
                    out.push(x);
                    if out.len() == n {
                        break;
                    }
                }
            }
            let rate = out.len() as f64 / proposals as f64;
            if proposals >= 100_000 && rate < MIN_RATE {
                return Err(Error::EnvelopeTooLoose { rate });
            }
        }
        Ok((out, n as f64 / proposals as f64))
    }
}

pub fn rejection_sample_flattened<T: TargetDensity + ?Sized>(
    target: &T,
    spec: FlattenSpec,
    envelope: &GaussianMixture,
    n: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let sampler = RejectionSampler::new(target, spec, envelope, seed)?;
    let mut r = rng::stream(seed, 1);
    Ok(sampler.sample(n, &mut r)?.0)
}

/// Envelope for a flattened mixture: each component with doubled variance
/// plus one broad component covering the sublevel set `{U ≤ M}`.
pub fn default_envelope(gm: &GaussianMixture, spec: &FlattenSpec) -> Result<GaussianMixture> {
    let d = gm.dim();
    let k = gm.len();
    let dis = mixture_dissipativity(gm);
    let prof = a1_from_mixture(gm);
    let excess = (spec.m + 2.0).max(0.0);
    let reach = prof.radius + (2.0 / dis.alpha * excess).sqrt();
    let min_m = (0..k).map(|i| gm.eigen_extremes(i).0).fold(f64::INFINITY, f64::min);
    let broad_sd = reach / 2.0 + 1.0 / min_m.sqrt();
    let mut weights = vec![0.5 / k as f64; k];
    weights.push(0.5);
    let mut means: Vec<Vec<f64>> = (0..k).map(|i| gm.mean(i).to_vec()).collect();
    means.push(vec![0.0; d]);
    let mut precs: Vec<Precision> = (0..k)
        .map(|i| match gm.precision(i) {
            Precision::Isotropic(s) => Precision::Isotropic(s / 2.0),
            Precision::Full(rows) => Precision::Full(
                rows.iter().map(|r| r.iter().map(|v| v / 2.0).collect()).collect(),
            ),
        })
        .collect();
    precs.push(Precision::Isotropic(1.0 / (broad_sd * broad_sd)));
    GaussianMixture::new(weights, means, precs)
}
