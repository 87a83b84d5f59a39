//! Self-normalized importance sampling with tail-matching weights, plus
//! χ² diagnostics (empirical and by quadrature).

use rand::Rng as _;

use crate::density::TargetDensity;
use crate::error::{ensure_dim, Error, Result};
use crate::flatten::FlattenSpec;
use crate::math::log_sum_exp;
use crate::rng;

/// A proposal draw with its log-weight `T(U(x)) − U(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    pub point: Vec<f64>,
    pub log_weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnisResult {
    pub estimate: f64,
    pub ess: f64,
    pub n: usize,
    pub max_log_weight: f64,
    /// Coefficient of variation of the weights, `√(n/ESS − 1)`.
    pub weight_cv: f64,
}

pub fn log_weights<T: TargetDensity + ?Sized>(samples: &[Vec<f64>], target: &T, spec: &FlattenSpec) -> Result<Vec<f64>> {
    samples
        .iter()
        .map(|x| {
            ensure_dim(target.dim(), x.len())?;
            let u = target.u(x);
            if !u.is_finite() {
                return Err(Error::NumericalOverflow("non-finite U at a sample".into()));
            }
            Ok(spec.log_weight(u))
        })
        .collect()
}

pub fn weighted_samples<T: TargetDensity + ?Sized>(
    samples: &[Vec<f64>],
    target: &T,
    spec: &FlattenSpec,
) -> Result<Vec<WeightedSample>> {
    let lw = log_weights(samples, target, spec)?;
    Ok(samples
        .iter()
        .zip(lw)
        .map(|(p, l)| WeightedSample {
            point: p.clone(),
            log_weight: l,
        })
        .collect())
}

/// Normalized weights `w_i / Σ w` from log-weights.
pub fn normalized_weights(log_w: &[f64]) -> Vec<f64> {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// `(Σw)² / Σw²`.
pub fn ess(log_weights: &[f64]) -> f64 {
    if log_weights.is_empty() {
        return 0.0;
    }
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut s1, mut s2) = (0.0, 0.0);
    for l in log_weights {
        let w = (l - max).exp();
        s1 += w;
        s2 += w * w;
    }
    s1 * s1 / s2
}

/// SNIS from precomputed log-weights and test-function values.
pub fn snis_weighted(log_w: &[f64], phi: &[f64]) -> Result<SnisResult> {
    if log_w.is_empty() || log_w.len() != phi.len() {
        return Err(Error::InvalidInput("need equally many (nonzero) weights and values".into()));
    }
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::NumericalOverflow("all importance weights vanished".into()));
    }
    let (mut s1, mut s2, mut num) = (0.0, 0.0, 0.0);
    for (l, f) in log_w.iter().zip(phi) {
        let w = (l - max).exp();
        s1 += w;
        s2 += w * w;
        num += w * f;
    }
    let n = log_w.len();
    let ess = s1 * s1 / s2;
    let lo = phi.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = phi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(SnisResult {
        estimate: (num / s1).clamp(lo, hi),
        ess,
        n,
        max_log_weight: max,
        weight_cv: (n as f64 / ess - 1.0).max(0.0).sqrt(),
    })
}

/// `Σ φ(x_i) w_i / Σ w_i` with `w = e^{T∘U − U}`.
pub fn snis<T, F>(samples: &[Vec<f64>], target: &T, spec: &FlattenSpec, phi: F) -> Result<SnisResult>
where
    T: TargetDensity + ?Sized,
    F: Fn(&[f64]) -> f64,
{
    if samples.is_empty() {
        return Err(Error::InvalidInput("no samples".into()));
    }
    let lw = log_weights(samples, target, spec)?;
    let values: Vec<f64> = samples.iter().map(|x| phi(x)).collect();
    snis_weighted(&lw, &values)
}

/// `mean(w²) / mean(w)²` over proposal samples.
pub fn empirical_rho<T: TargetDensity + ?Sized>(samples: &[Vec<f64>], target: &T, spec: &FlattenSpec) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("no samples".into()));
    }
    let lw = log_weights(samples, target, spec)?;
    Ok(rho_from_log_weights(&lw))
}

pub fn rho_from_log_weights(log_w: &[f64]) -> f64 {
    log_w.len() as f64 / ess(log_w)
}

/// Bootstrap standard error of a statistic of log-weights and values.
pub fn bootstrap_se<S>(log_w: &[f64], phi: &[f64], resamples: usize, seed: u64, stat: S) -> f64
where
    S: Fn(&[f64], &[f64]) -> f64,
{
    let n = log_w.len();
    let mut r = rng::stream(seed, 0);
    let mut bl = vec![0.0; n];
    let mut bp = vec![0.0; n];
    let mut vals = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for i in 0..n {
            let j = r.random_range(0..n);
            bl[i] = log_w[j];
            bp[i] = phi.get(j).copied().unwrap_or(0.0);
        }
        vals.push(stat(&bl, &bp));
    }
    let (_, se) = crate::math::mean_se(&vals);
    se * (resamples as f64).sqrt()
}

/// Standard error of the SNIS ratio for correlated (Markov chain) samples:
/// batch means of the linearized residuals `w_i(φ_i − μ̄)/w̄`.
///
/// `chains` gives the lengths of consecutive independent chains in the
/// pooled sample; batches never straddle two chains.
pub fn snis_se_batch_means(log_w: &[f64], phi: &[f64], chains: &[usize], batches_per_chain: usize) -> Result<f64> {
    let est = snis_weighted(log_w, phi)?.estimate;
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let wbar = w.iter().sum::<f64>() / w.len() as f64;
    let resid: Vec<f64> = w.iter().zip(phi).map(|(wi, f)| wi * (f - est) / wbar).collect();
    let mut means = Vec::new();
    let mut start = 0;
    for &len in chains {
        let b = batches_per_chain.max(1).min(len.max(1));
        let size = len / b;
        if size == 0 {
            start += len;
            continue;
        }
        for k in 0..b {
            let s = &resid[start + k * size..start + (k + 1) * size];
            means.push((s.iter().sum::<f64>() / size as f64, size));
        }
        start += len;
    }
    if means.len() < 2 {
        return Err(Error::InvalidInput("too few samples for batch means".into()));
    }
    // Var of the overall mean ≈ Var(batch mean)/#batches, with equal sizes
    // inside each chain.
    let nb = means.len() as f64;
    let var = means.iter().map(|(m, _)| m * m).sum::<f64>() / (nb - 1.0);
    Ok((var / nb).sqrt())
}

/// Tensor-grid trapezoid nodes: `(point, ln weight)` for each node.
fn grid_nodes(bounds: &[(f64, f64)], grid: &[usize]) -> Result<Vec<(Vec<f64>, f64, bool)>> {
    if bounds.len() != grid.len() || grid.iter().any(|&g| g < 3) {
        return Err(Error::InvalidInput("each axis needs bounds and at least 3 nodes".into()));
    }
    let d = bounds.len();
    let mut axes = Vec::with_capacity(d);
    for (&(lo, hi), &n) in bounds.iter().zip(grid) {
        if !(hi > lo) {
            return Err(Error::InvalidInput("empty quadrature box".into()));
        }
        let h = (hi - lo) / (n - 1) as f64;
        let axis: Vec<(f64, f64, bool)> = (0..n)
            .map(|i| {
                let edge = i == 0 || i == n - 1;
                let w = if edge { h / 2.0 } else { h };
                (lo + i as f64 * h, w.ln(), edge)
            })
            .collect();
        axes.push(axis);
    }
    let mut out = Vec::with_capacity(grid.iter().product());
    let mut idx = vec![0usize; d];
    loop {
        let mut p = Vec::with_capacity(d);
        let mut lw = 0.0;
        let mut edge = false;
        for j in 0..d {
            let (x, w, e) = axes[j][idx[j]];
            p.push(x);
            lw += w;
            edge |= e;
        }
        out.push((p, lw, edge));
        let mut j = 0;
        while j < d {
            idx[j] += 1;
            if idx[j] < grid[j] {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
        if j == d {
            break;
        }
    }
    Ok(out)
}

const BOUNDARY_RATIO: f64 = 1e-12;

/// `ρ = (∫e^{T∘U−2U})(∫e^{−T∘U})/(∫e^{−U})²` on a tensor trapezoid grid.
pub fn quadrature_rho<T: TargetDensity + ?Sized>(
    target: &T,
    spec: &FlattenSpec,
    bounds: &[(f64, f64)],
    grid: &[usize],
) -> Result<f64> {
    let d = target.dim();
    if d > 2 {
        return Err(Error::Unsupported("quadrature is limited to d ≤ 2".into()));
    }
    ensure_dim(d, bounds.len())?;
    let nodes = grid_nodes(bounds, grid)?;
    let n = nodes.len();
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    let mut c = Vec::with_capacity(n);
    let mut edge_max = [f64::NEG_INFINITY; 3];
    let mut all_max = [f64::NEG_INFINITY; 3];
    for (p, lw, edge) in &nodes {
        let u = target.u(p);
        let t = spec.t_value(u);
        let vals = [t - 2.0 * u, -t, -u];
        for k in 0..3 {
            all_max[k] = all_max[k].max(vals[k]);
            if *edge {
                edge_max[k] = edge_max[k].max(vals[k]);
            }
        }
        a.push(vals[0] + lw);
        b.push(vals[1] + lw);
        c.push(vals[2] + lw);
    }
    let worst = (0..3).map(|k| edge_max[k] - all_max[k]).fold(f64::NEG_INFINITY, f64::max);
    if worst > BOUNDARY_RATIO.ln() {
        return Err(Error::BoxTooSmall { ratio: worst.exp() });
    }
    let log_rho = log_sum_exp(&a) + log_sum_exp(&b) - 2.0 * log_sum_exp(&c);
    Ok(log_rho.exp())
}

/// `μ(φ)` for `μ ∝ e^{−U}` on a tensor trapezoid grid (`d ≤ 2`).
pub fn quadrature_expectation<T, F>(target: &T, phi: F, bounds: &[(f64, f64)], grid: &[usize]) -> Result<f64>
where
    T: TargetDensity + ?Sized,
    F: Fn(&[f64]) -> f64,
{
    if target.dim() > 2 {
        return Err(Error::Unsupported("quadrature is limited to d ≤ 2".into()));
    }
    ensure_dim(target.dim(), bounds.len())?;
    let nodes = grid_nodes(bounds, grid)?;
    let logs: Vec<f64> = nodes.iter().map(|(p, lw, _)| lw - target.u(p)).collect();
    let lz = log_sum_exp(&logs);
    Ok(nodes
        .iter()
        .zip(&logs)
        .map(|((p, _, _), l)| (l - lz).exp() * phi(p))
        .sum())
}

/// Cumulative distribution of `e^{−f}` on `[lo, hi]` by the trapezoid rule,
/// returned at `n` equally spaced nodes.
pub fn quadrature_cdf_1d<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let h = (hi - lo) / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| lo + i as f64 * h).collect();
    let lf: Vec<f64> = xs.iter().map(|&x| -f(x)).collect();
    let max = lf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let dens: Vec<f64> = lf.iter().map(|l| (l - max).exp()).collect();
    let mut cdf = vec![0.0; n];
    for i in 1..n {
        cdf[i] = cdf[i - 1] + 0.5 * h * (dens[i - 1] + dens[i]);
    }
    let total = cdf[n - 1];
    cdf.iter_mut().for_each(|v| *v /= total);
    (xs, cdf)
}

/// Sup distance between the empirical CDF of `samples` and a tabulated CDF.
pub fn ks_distance(samples: &[f64], xs: &[f64], cdf: &[f64]) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len() as f64;
    let interp = |x: f64| -> f64 {
        if x <= xs[0] {
            return 0.0;
        }
        if x >= xs[xs.len() - 1] {
            return 1.0;
        }
        let h = xs[1] - xs[0];
        let pos = (x - xs[0]) / h;
        let i = pos.floor() as usize;
        let t = pos - i as f64;
        cdf[i] * (1.0 - t) + cdf[i + 1] * t
    };
    let mut worst: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = interp(x);
        worst = worst.max((f - i as f64 / n).abs()).max((f - (i + 1) as f64 / n).abs());
    }
    worst
}
