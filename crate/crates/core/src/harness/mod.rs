//! End-to-end runs: build the target from a config, pick the flattening
//! level, sample the flattened density, and report self-normalized estimates
//! as CSV rows.

mod config;
mod csv;
mod observable;

use rand::Rng as _;

pub use config::{
    DatasetConfig, EstimatorConfig, FlattenConfig, ObservableConfig, PipelineConfig, PrecisionConfig,
    SamplerConfig, SamplerKind, SeMethod, TargetConfig,
};
pub use csv::{write_compare_csv, write_pipeline_csv, COMPARE_HEADER, PIPELINE_HEADER};
pub use observable::Observable;

use crate::adversarial::{build_f3, build_f4, AngularTwoScale, SewnBimodal};
use crate::bounds::{mixture_condition, rho_bound_coco};
use crate::density::{Activation, BnnPosterior, Dataset, GaussianMixture, Precision, TargetDensity};
use crate::error::{Error, Result};
use crate::estimator::{bootstrap_se, log_weights, snis_se_batch_means, snis_weighted};
use crate::flatten::{choose_m, mollifier, FlattenSpec, Flattened, MRule};
use crate::math::norm;
use crate::par::par_map;
use crate::profiles::{
    a1_from_dissipativity, a1_from_mixture, a1_from_mixture_hessian, bnn_profile, bnn_tractability,
    check_tractability, flattened_smoothness, mixture_flattened_smoothness, A1Profile,
    Dissipativity,
};
use crate::rng;
use crate::samplers::{check_step, default_envelope, run_mala, run_ula, ChainConfig, RejectionSampler};

/// A target built from a config.
#[derive(Debug, Clone)]
pub enum Target {
    Mixture(GaussianMixture),
    Bnn(BnnPosterior),
    Sewn(SewnBimodal),
    Angular(AngularTwoScale),
}

impl TargetDensity for Target {
    fn dim(&self) -> usize {
        match self {
            Target::Mixture(t) => t.dim(),
            Target::Bnn(t) => t.dim(),
            Target::Sewn(t) => t.dim(),
            Target::Angular(t) => t.dim(),
        }
    }

    fn u_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        match self {
            Target::Mixture(t) => t.u_grad(x, grad),
            Target::Bnn(t) => t.u_grad(x, grad),
            Target::Sewn(t) => t.u_grad(x, grad),
            Target::Angular(t) => t.u_grad(x, grad),
        }
    }
}

impl Target {
    pub fn from_config(cfg: &TargetConfig) -> Result<Self> {
        Ok(match cfg {
            TargetConfig::Mixture {
                weights,
                means,
                precisions,
                ..
            } => {
                let precs = precisions
                    .iter()
                    .map(|p| match p {
                        PrecisionConfig::Scalar(s) => Precision::Isotropic(*s),
                        PrecisionConfig::Matrix(m) => Precision::Full(m.clone()),
                    })
                    .collect();
                Target::Mixture(GaussianMixture::new(weights.clone(), means.clone(), precs)?)
            }
            TargetConfig::Bnn {
                layers,
                activation,
                alpha1,
                alpha2,
                beta,
                dataset,
            } => {
                if layers.len() < 2 {
                    return Err(Error::Config("bnn layers need input and class widths".into()));
                }
                let classes = *layers.last().expect("checked above");
                let data = load_dataset(dataset, layers[0], classes)?;
                let beta = beta.unwrap_or(1.0 / classes as f64);
                Target::Bnn(BnnPosterior::feedforward(
                    layers,
                    Activation::parse(activation)?,
                    data,
                    *alpha1,
                    *alpha2,
                    beta,
                )?)
            }
            TargetConfig::Sewn { d, m0, kappa, direction } => {
                let dir = direction.clone().unwrap_or_else(|| unit(*d));
                Target::Sewn(build_f3(*m0, kappa * m0, &dir, *d)?)
            }
            TargetConfig::Angular { d, m1, kappa, direction } => {
                let dir = direction.clone().unwrap_or_else(|| unit(*d));
                Target::Angular(build_f4(*m1, kappa * m1, &dir, *d)?)
            }
        })
    }

    /// A lower bound on `min U`.
    pub fn u_lower_bound(&self) -> f64 {
        match self {
            Target::Mixture(_) | Target::Bnn(_) | Target::Angular(_) => 0.0,
            Target::Sewn(f) => {
                let d = f.d as f64;
                let c1 = 0.5 * d * (2.0 * std::f64::consts::PI / f.m0).ln();
                let c2 = 0.5 * d * (2.0 * std::f64::consts::PI / f.l0).ln();
                c1.min(c2)
            }
        }
    }

    pub fn as_mixture(&self) -> Option<&GaussianMixture> {
        match self {
            Target::Mixture(gm) => Some(gm),
            _ => None,
        }
    }
}

fn unit(d: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    if d > 0 {
        v[0] = 1.0;
    }
    v
}

fn load_dataset(cfg: &DatasetConfig, features: usize, classes: usize) -> Result<Dataset> {
    if let Some(size) = cfg.size {
        return Ok(Dataset::synthetic(features, classes, size, cfg.seed));
    }
    let path = cfg.path.as_ref().ok_or_else(|| Error::Config("dataset needs path or size".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut data = Dataset {
        features: Vec::new(),
        labels: Vec::new(),
    };
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<&str> = line.split(',').map(str::trim).collect();
        if vals.len() != features + 1 {
            return Err(Error::Config(format!("line {}: expected {} columns", n + 1, features + 1)));
        }
        let parse = |s: &str| s.parse::<f64>().map_err(|e| Error::Config(format!("line {}: {e}", n + 1)));
        let x = vals[..features].iter().map(|s| parse(s)).collect::<Result<Vec<f64>>>()?;
        let y: usize = vals[features]
            .parse()
            .map_err(|e| Error::Config(format!("line {}: label: {e}", n + 1)))?;
        if y >= classes {
            return Err(Error::Config(format!("line {}: label {y} out of range", n + 1)));
        }
        data.features.push(x);
        data.labels.push(y);
    }
    if data.is_empty() {
        return Err(Error::Config("dataset file has no rows".into()));
    }
    Ok(data)
}

/// Profile, flattening level and bound shared by every replication.
#[derive(Debug, Clone)]
pub struct Setup {
    pub d: usize,
    pub profile: A1Profile,
    pub u0: f64,
    pub u_min: f64,
    pub m: f64,
    pub rho_bound: f64,
    /// `capped`, `formula`, or `none` when no bound applies at this level.
    pub regime: &'static str,
    /// Left and right sides of the tractability condition that was checked.
    pub condition_lhs: f64,
    pub condition_rhs: f64,
    pub condition_met: bool,
    /// Smoothness bound of `T∘U` (meaningful for the `a1` level).
    pub l_hat: f64,
}

fn sewn_profile(f: &SewnBimodal) -> Result<A1Profile> {
    // Outside B(γx₀, r_d + r₀) the density is the wide Gaussian, so
    // x·∇f₃ = m₀|x|² there; inside, |x| ≤ ρ and the gradient is bounded by G.
    let rho = norm(&f.center) + f.r_d + f.r0;
    let x0 = norm(&f.x0);
    let d = f.d as f64;
    let two_pi = 2.0 * std::f64::consts::PI;
    let c1 = (0.5 * d * (two_pi / f.m0).ln()).abs();
    let c2 = (0.5 * d * (two_pi / f.l0).ln()).abs();
    let gap = 0.5 * f.m0 * rho * rho + c1 + 0.5 * f.l0 * (rho + x0).powi(2) + c2;
    let g = mollifier(0.0) / f.r0 * gap + (f.m0 * rho).max(f.l0 * (rho + x0));
    let dis = Dissipativity::new(f.m0, f.m0 * rho * rho + rho * g)?;
    a1_from_dissipativity(dis, 396.0 * f.l0)
}

fn profile_for(target: &Target, cfg: &TargetConfig) -> Result<(A1Profile, Option<f64>)> {
    Ok(match (target, cfg) {
        (Target::Mixture(gm), TargetConfig::Mixture { profile, .. }) => match profile.as_deref() {
            None | Some("gaumix") => (a1_from_mixture(gm), None),
            Some("hessian") => (a1_from_mixture_hessian(gm), None),
            Some("outside_ball") => {
                let s = mixture_flattened_smoothness(gm)?;
                (s.profile, Some(s.l_hat))
            }
            Some(other) => {
                return Err(Error::Config(format!(
                    "unknown mixture profile `{other}` (expected gaumix, hessian or outside_ball)"
                )))
            }
        },
        (Target::Bnn(net), _) => (bnn_profile(net)?, None),
        (Target::Sewn(f), _) => (sewn_profile(f)?, None),
        (Target::Angular(f), _) => (a1_from_dissipativity(Dissipativity::new(f.m1, 0.0)?, 686.0 * f.l1)?, None),
        _ => unreachable!("target built from the same config"),
    })
}

pub fn prepare(cfg: &PipelineConfig, target: &Target) -> Result<Setup> {
    let d = target.dim();
    let (mut profile, l_hat) = profile_for(target, &cfg.target)?;
    let origin = vec![0.0; d];
    let mut g0 = vec![0.0; d];
    let u0 = target.u_grad(&origin, &mut g0);
    if !u0.is_finite() {
        return Err(Error::NumericalOverflow("U(0) is not finite".into()));
    }
    profile.grad0 = norm(&g0);
    let rule = match MRule::parse(&cfg.flatten.rule)? {
        MRule::Bnn { .. } => match target {
            Target::Bnn(net) => MRule::Bnn {
                c_hat_bias: net.c_hat_bias(),
                classes: net.classes(),
            },
            _ => return Err(Error::Config("the bnn level rule needs a bnn target".into())),
        },
        r => r,
    };
    let m = match cfg.flatten.m_override {
        Some(m) => m,
        None => choose_m(&profile, u0, rule)?,
    };
    let u_min = target.u_lower_bound();
    let (rho_bound, regime) = match rho_bound_coco(&profile, m, u_min, 1.0, d) {
        Ok(b) => (b.value, b.regime.as_str()),
        Err(e) => {
            log::warn!("no ρ bound for this level: {e}");
            (f64::NAN, "none")
        }
    };
    let generic = check_tractability(&profile, 1.0, d)?.main;
    let check = match target {
        Target::Mixture(gm) => {
            let q = mixture_condition(gm);
            if q.satisfied || !generic.satisfied {
                q
            } else {
                generic
            }
        }
        Target::Bnn(net) => match bnn_tractability(net) {
            Ok(t) => t.check,
            Err(Error::Unsupported(_)) => generic,
            Err(e) => return Err(e),
        },
        _ => generic,
    };
    let condition_met = check.satisfied;
    if !condition_met {
        log::warn!("tractability condition not met; the run continues without a guarantee");
    }
    let l_hat = l_hat.unwrap_or_else(|| flattened_smoothness(&profile));
    Ok(Setup {
        d,
        profile,
        u0,
        u_min,
        m,
        rho_bound,
        regime,
        condition_lhs: check.lhs,
        condition_rhs: check.rhs,
        condition_met,
        l_hat,
    })
}

/// One CSV row of a pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRow {
    pub replication: usize,
    pub seed: u64,
    pub function: String,
    pub d: usize,
    pub m: f64,
    pub rho_bound: f64,
    pub condition_met: bool,
    pub ess: f64,
    pub estimate: f64,
    pub se: f64,
    pub truth: f64,
    pub acceptance: f64,
    pub evaluations: u64,
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub setup: Setup,
    pub rows: Vec<PipelineRow>,
}

/// Seed of replication `r`, derived from the master seed.
pub fn replication_seed(master: u64, r: usize) -> u64 {
    rng::stream(master, (1u64 << 48) + r as u64).random::<u64>()
}

/// Pooled draws from the flattened density.
#[derive(Debug, Clone)]
pub struct Draws {
    pub samples: Vec<Vec<f64>>,
    /// Lengths of the consecutive chains making up `samples`.
    pub chains: Vec<usize>,
    pub acceptance: f64,
    pub evaluations: u64,
}

fn run_chains<T: TargetDensity + ?Sized>(target: &T, s: &SamplerConfig, seed: u64) -> Result<Draws> {
    let d = target.dim();
    let step = s.step.ok_or_else(|| Error::Config("sampler.step is required".into()))?;
    let mut out = Draws {
        samples: Vec::new(),
        chains: Vec::with_capacity(s.chains),
        acceptance: 0.0,
        evaluations: 0,
    };
    for c in 0..s.chains {
        let mut cfg = ChainConfig::new(step, s.steps, seed, d);
        cfg.burn_in = s.burn_in;
        cfg.thin = s.thin;
        cfg.stream = c as u64;
        if s.init_scale > 0.0 {
            let mut r = rng::stream(seed, (1u64 << 32) + c as u64);
            cfg.init = rng::normal_vec(&mut r, d).into_iter().map(|v| v * s.init_scale).collect();
        }
        let trace = match s.kind {
            SamplerKind::Mala => run_mala(target, &cfg)?,
            SamplerKind::Ula => run_ula(target, &cfg)?,
            SamplerKind::Rejection => unreachable!("handled by the caller"),
        };
        out.acceptance += trace.acceptance / s.chains as f64;
        out.evaluations += trace.evaluations as u64;
        out.chains.push(trace.states.len());
        out.samples.extend(trace.states);
    }
    Ok(out)
}

fn standard_error(est: &EstimatorConfig, log_w: &[f64], phi: &[f64], chains: &[usize], seed: u64) -> Result<f64> {
    match est.se {
        SeMethod::BatchMeans => {
            let per_chain = est.batches.div_ceil(chains.len()).max(1);
            snis_se_batch_means(log_w, phi, chains, per_chain)
        }
        SeMethod::Bootstrap => Ok(bootstrap_se(log_w, phi, est.bootstrap_resamples, seed, |lw, ph| {
            snis_weighted(lw, ph).map(|r| r.estimate).unwrap_or(f64::NAN)
        })),
    }
}

struct Context<'a> {
    cfg: &'a PipelineConfig,
    target: &'a Target,
    spec: FlattenSpec,
    observables: Vec<Observable>,
    truths: Vec<f64>,
    rejection: Option<(GaussianMixture, f64)>,
}

impl<'a> Context<'a> {
    fn new(cfg: &'a PipelineConfig, target: &'a Target, setup: &Setup) -> Result<Self> {
        let spec = FlattenSpec::with_tol(setup.m, cfg.flatten.quad_tol)?;
        let observables = if cfg.estimator.functions.is_empty() {
            vec![Observable::Coordinate {
                index: 0,
                name: "x0".into(),
            }]
        } else {
            cfg.estimator
                .functions
                .iter()
                .map(|f| Observable::from_config(f, setup.d))
                .collect::<Result<_>>()?
        };
        let truths = observables
            .iter()
            .map(|o| target.as_mixture().and_then(|gm| o.mixture_truth(gm)).unwrap_or(f64::NAN))
            .collect();
        let rejection = if cfg.sampler.kind == SamplerKind::Rejection {
            let gm = target
                .as_mixture()
                .ok_or_else(|| Error::Unsupported("rejection sampling needs a mixture target".into()))?;
            let env = default_envelope(gm, &spec)?;
            let log_k = RejectionSampler::new(gm, spec, &env, cfg.seed)?.log_constant();
            Some((env, log_k))
        } else {
            check_step(cfg.sampler.step.unwrap_or(0.0), setup.l_hat);
            None
        };
        Ok(Self {
            cfg,
            target,
            spec,
            observables,
            truths,
            rejection,
        })
    }

    fn flattened_draws(&self, seed: u64) -> Result<Draws> {
        if let Some((env, _)) = &self.rejection {
            let gm = self.target.as_mixture().expect("checked when building the context");
            let sampler = RejectionSampler::new(gm, self.spec, env, self.cfg.seed)?;
            let n = self.cfg.sampler.steps;
            let (samples, rate) = sampler.sample(n, &mut rng::stream(seed, 0))?;
            return Ok(Draws {
                samples,
                chains: vec![n],
                acceptance: rate,
                evaluations: (n as f64 / rate).round() as u64,
            });
        }
        let flat = Flattened {
            target: self.target,
            spec: self.spec,
        };
        run_chains(&flat, &self.cfg.sampler, seed)
    }
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineReport> {
    cfg.validate()?;
    let target = Target::from_config(&cfg.target)?;
    let setup = prepare(cfg, &target)?;
    let ctx = Context::new(cfg, &target, &setup)?;
    let per_rep = par_map(cfg.replications, |r| {
        let seed = replication_seed(cfg.seed, r);
        let draws = ctx.flattened_draws(seed)?;
        let log_w = log_weights(&draws.samples, &target, &ctx.spec)?;
        let mut rows = Vec::with_capacity(ctx.observables.len());
        for (k, obs) in ctx.observables.iter().enumerate() {
            let phi: Vec<f64> = draws.samples.iter().map(|x| obs.value(x)).collect();
            let res = snis_weighted(&log_w, &phi)?;
            let se = standard_error(&cfg.estimator, &log_w, &phi, &draws.chains, seed)?;
            rows.push(PipelineRow {
                replication: r,
                seed,
                function: obs.name().to_string(),
                d: setup.d,
                m: setup.m,
                rho_bound: setup.rho_bound,
                condition_met: setup.condition_met,
                ess: res.ess,
                estimate: res.estimate,
                se,
                truth: ctx.truths[k],
                acceptance: draws.acceptance,
                evaluations: draws.evaluations,
            });
        }
        Ok(rows)
    })?;
    Ok(PipelineReport {
        setup,
        rows: per_rep.into_iter().flatten().collect(),
    })
}

/// Draws from the flattened density for one seed.
pub fn sample_flattened(cfg: &PipelineConfig, target: &Target, setup: &Setup, seed: u64) -> Result<Draws> {
    cfg.validate()?;
    Context::new(cfg, target, setup)?.flattened_draws(seed)
}

/// Self-normalized estimate of one test function from stored draws.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRow {
    pub function: String,
    pub estimate: f64,
    pub se: f64,
    pub ess: f64,
    /// Empirical weight second moment `n Σw²/(Σw)²`.
    pub rho_hat: f64,
    pub n: usize,
}

/// Weights stored draws of the flattened density and estimates every test
/// function in the config.
pub fn estimate_draws(
    cfg: &PipelineConfig,
    target: &Target,
    setup: &Setup,
    samples: &[Vec<f64>],
    chains: &[usize],
) -> Result<Vec<EstimateRow>> {
    if chains.iter().sum::<usize>() != samples.len() {
        return Err(Error::InvalidInput("chain lengths do not add up to the sample count".into()));
    }
    let ctx = Context::new(cfg, target, setup)?;
    let log_w = log_weights(samples, target, &ctx.spec)?;
    let rho_hat = crate::estimator::rho_from_log_weights(&log_w);
    ctx.observables
        .iter()
        .map(|obs| {
            let phi: Vec<f64> = samples.iter().map(|x| obs.value(x)).collect();
            let res = snis_weighted(&log_w, &phi)?;
            Ok(EstimateRow {
                function: obs.name().to_string(),
                estimate: res.estimate,
                se: standard_error(&cfg.estimator, &log_w, &phi, chains, cfg.seed)?,
                ess: res.ess,
                rho_hat,
                n: samples.len(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Direct,
    TailMatch,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::TailMatch => "tailmatch",
        }
    }
}

/// One CSV row of a direct-versus-flattened comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub replication: usize,
    pub seed: u64,
    pub method: Method,
    pub function: String,
    pub d: usize,
    pub evaluations: u64,
    pub estimate: f64,
    pub se: f64,
    pub ess: f64,
    pub truth: f64,
    pub abs_error: f64,
    /// Share of (weighted) samples closest to each mixture component; empty
    /// for other targets.
    pub mode_fractions: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub setup: Setup,
    pub rows: Vec<CompareRow>,
}

fn mode_fractions(target: &Target, samples: &[Vec<f64>], weights: Option<&[f64]>) -> Vec<f64> {
    let Some(gm) = target.as_mixture() else {
        return Vec::new();
    };
    let mut out = vec![0.0; gm.len()];
    for (i, x) in samples.iter().enumerate() {
        out[gm.dominant_component(x)] += weights.map_or(1.0, |w| w[i]);
    }
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= total);
    out
}

/// Runs Langevin chains on `U` and on `T∘U` with identical chain settings,
/// so both use the same number of `(U, ∇U)` evaluations.
pub fn compare_direct_vs_tailmatch(cfg: &PipelineConfig) -> Result<CompareReport> {
    cfg.validate()?;
    if cfg.sampler.kind == SamplerKind::Rejection {
        return Err(Error::Unsupported("comparison needs a Langevin sampler".into()));
    }
    let target = Target::from_config(&cfg.target)?;
    let setup = prepare(cfg, &target)?;
    let ctx = Context::new(cfg, &target, &setup)?;
    let per_rep = par_map(cfg.replications, |r| {
        let seed = replication_seed(cfg.seed, r);
        let flat = ctx.flattened_draws(seed)?;
        let direct = run_chains(&target, &cfg.sampler, seed)?;
        let log_w = log_weights(&flat.samples, &target, &ctx.spec)?;
        let w = crate::estimator::normalized_weights(&log_w);
        let flat_modes = mode_fractions(&target, &flat.samples, Some(&w));
        let direct_modes = mode_fractions(&target, &direct.samples, None);
        let zeros = vec![0.0; direct.samples.len()];
        let mut rows = Vec::new();
        for (k, obs) in ctx.observables.iter().enumerate() {
            let truth = ctx.truths[k];
            let phi: Vec<f64> = flat.samples.iter().map(|x| obs.value(x)).collect();
            let res = snis_weighted(&log_w, &phi)?;
            rows.push(CompareRow {
                replication: r,
                seed,
                method: Method::TailMatch,
                function: obs.name().to_string(),
                d: setup.d,
                evaluations: flat.evaluations,
                estimate: res.estimate,
                se: standard_error(&cfg.estimator, &log_w, &phi, &flat.chains, seed)?,
                ess: res.ess,
                truth,
                abs_error: (res.estimate - truth).abs(),
                mode_fractions: flat_modes.clone(),
            });
            let phi: Vec<f64> = direct.samples.iter().map(|x| obs.value(x)).collect();
            let res = snis_weighted(&zeros, &phi)?;
            rows.push(CompareRow {
                replication: r,
                seed,
                method: Method::Direct,
                function: obs.name().to_string(),
                d: setup.d,
                evaluations: direct.evaluations,
                estimate: res.estimate,
                se: standard_error(&cfg.estimator, &zeros, &phi, &direct.chains, seed)?,
                ess: res.ess,
                truth,
                abs_error: (res.estimate - truth).abs(),
                mode_fractions: direct_modes.clone(),
            });
        }
        Ok(rows)
    })?;
    Ok(CompareReport {
        setup,
        rows: per_rep.into_iter().flatten().collect(),
    })
}
