//! Browser bindings for one-dimensional flattened mixtures.
//!
//! Every export is a thin wrapper around a plain function in [`demo`] so the
//! numbers shown in the page can be tested on the host.

use wasm_bindgen::prelude::*;

pub mod demo {
    use flatmc::bounds::{rbar, rho_bound_coco};
    use flatmc::density::{GaussianMixture, TargetDensity};
    use flatmc::estimator::{ess, log_weights, quadrature_rho, rho_from_log_weights, snis_weighted};
    use flatmc::harness::Observable;
    use flatmc::profiles::{a1_from_mixture, check_tractability};
    use flatmc::samplers::{default_envelope, RejectionSampler};
    use flatmc::{rng, FlattenSpec, Result};

    pub fn mixture(weights: &[f64], means: &[f64], precisions: &[f64]) -> Result<GaussianMixture> {
        GaussianMixture::isotropic(
            weights.to_vec(),
            means.iter().map(|&m| vec![m]).collect(),
            precisions.to_vec(),
        )
    }

    /// Interval holding essentially all mass of both `e^{−U}` and `e^{−T∘U}`.
    pub fn support(gm: &GaussianMixture, m: f64) -> Result<(f64, f64)> {
        let reach = rbar(&a1_from_mixture(gm), m.max(0.0), 0.0)?;
        let min_s = gm.isotropic_precisions().map_or(1.0, |p| p.into_iter().fold(f64::INFINITY, f64::min));
        let pad = reach + 12.0 / min_s.sqrt();
        let (lo, hi) = (0..gm.len()).map(|i| gm.mean(i)[0]).fold((0.0f64, 0.0f64), |(a, b), v| (a.min(v), b.max(v)));
        Ok((lo - pad, hi + pad))
    }

    /// `[x; n] ++ [U; n] ++ [T∘U; n] ++ [μ density; n] ++ [π density; n]`.
    pub fn flatten_curve(gm: &GaussianMixture, m: f64, lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
        let spec = FlattenSpec::new(m);
        let (slo, shi) = support(gm, m)?;
        let wide = 20_001;
        let h = (shi - slo) / (wide - 1) as f64;
        let mut log_z = Vec::with_capacity(wide);
        for i in 0..wide {
            let x = slo + i as f64 * h;
            let w = if i == 0 || i == wide - 1 { 0.5 * h } else { h };
            log_z.push(w.ln() - spec.t_value(gm.u(&[x])));
        }
        let log_z_pi = flatmc::math::log_sum_exp(&log_z);
        let log_z_mu = gm.log_normalizer();
        let xs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n.max(2) - 1) as f64).collect();
        let u: Vec<f64> = xs.iter().map(|&x| gm.u(&[x])).collect();
        let tu: Vec<f64> = u.iter().map(|&v| spec.t_value(v)).collect();
        let mu: Vec<f64> = u.iter().map(|&v| (-v - log_z_mu).exp()).collect();
        let pi: Vec<f64> = tu.iter().map(|&v| (-v - log_z_pi).exp()).collect();
        Ok([xs, u, tu, mu, pi].concat())
    }

    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct RhoReport {
        pub m: f64,
        pub u0: f64,
        pub rho_quadrature: f64,
        pub rho_bound: f64,
        pub condition_lhs: f64,
        pub condition_rhs: f64,
    }

    pub fn rho_report(gm: &GaussianMixture, m: f64) -> Result<RhoReport> {
        let spec = FlattenSpec::new(m);
        let (lo, hi) = support(gm, m)?;
        let rho_quadrature = quadrature_rho(gm, &spec, &[(lo, hi)], &[40_001])?;
        let mut profile = a1_from_mixture(gm);
        let mut g = [0.0];
        let u0 = gm.u_grad(&[0.0], &mut g);
        profile.grad0 = g[0].abs();
        let bound = rho_bound_coco(&profile, m, 0.0, 1.0, 1)?;
        let cond = check_tractability(&profile, 1.0, 1)?.main;
        Ok(RhoReport {
            m,
            u0,
            rho_quadrature,
            rho_bound: bound.value,
            condition_lhs: cond.lhs,
            condition_rhs: cond.rhs,
        })
    }

    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct SnisDemo {
        pub estimate: f64,
        pub truth: f64,
        pub ess: f64,
        pub rho_hat: f64,
        pub acceptance: f64,
    }

    /// Exact draws from the flattened density by rejection, reweighted to
    /// estimate the mass of a Gaussian bump.
    pub fn snis_demo(gm: &GaussianMixture, m: f64, n: usize, seed: u64, center: f64, width: f64) -> Result<SnisDemo> {
        let spec = FlattenSpec::new(m);
        let env = default_envelope(gm, &spec)?;
        let sampler = RejectionSampler::new(gm, spec, &env, seed)?;
        let (samples, acceptance) = sampler.sample(n, &mut rng::stream(seed, 1))?;
        let bump = Observable::Bump {
            center: vec![center],
            width,
            name: "bump".into(),
        };
        let log_w = log_weights(&samples, gm, &spec)?;
        let phi: Vec<f64> = samples.iter().map(|x| bump.value(x)).collect();
        Ok(SnisDemo {
            estimate: snis_weighted(&log_w, &phi)?.estimate,
            truth: bump.mixture_truth(gm).unwrap_or(f64::NAN),
            ess: ess(&log_w),
            rho_hat: rho_from_log_weights(&log_w),
            acceptance,
        })
    }
}

fn js_err(e: flatmc::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// Default level `U(0) + L R²/2` for the page's initial slider position.
#[wasm_bindgen]
pub fn default_level(weights: &[f64], means: &[f64], precisions: &[f64]) -> Result<f64, JsValue> {
    use flatmc::density::TargetDensity;
    let gm = demo::mixture(weights, means, precisions).map_err(js_err)?;
    let p = flatmc::profiles::a1_from_mixture(&gm);
    flatmc::flatten::choose_m(&p, gm.u(&[0.0]), flatmc::flatten::MRule::Set).map_err(js_err)
}

#[wasm_bindgen]
pub fn flatten_curve(
    weights: &[f64],
    means: &[f64],
    precisions: &[f64],
    m: f64,
    lo: f64,
    hi: f64,
    n: usize,
) -> Result<Vec<f64>, JsValue> {
    let gm = demo::mixture(weights, means, precisions).map_err(js_err)?;
    demo::flatten_curve(&gm, m, lo, hi, n).map_err(js_err)
}

/// `[M, U(0), ρ by quadrature, ρ bound, condition lhs, condition rhs]`.
#[wasm_bindgen]
pub fn rho_report(weights: &[f64], means: &[f64], precisions: &[f64], m: f64) -> Result<Vec<f64>, JsValue> {
    let gm = demo::mixture(weights, means, precisions).map_err(js_err)?;
    let r = demo::rho_report(&gm, m).map_err(js_err)?;
    Ok(vec![r.m, r.u0, r.rho_quadrature, r.rho_bound, r.condition_lhs, r.condition_rhs])
}

/// `[estimate, truth, ESS, empirical ρ, acceptance rate]`.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn snis_demo(
    weights: &[f64],
    means: &[f64],
    precisions: &[f64],
    m: f64,
    n: usize,
    seed: u32,
    center: f64,
    width: f64,
) -> Result<Vec<f64>, JsValue> {
    let gm = demo::mixture(weights, means, precisions).map_err(js_err)?;
    let r = demo::snis_demo(&gm, m, n, u64::from(seed), center, width).map_err(js_err)?;
    Ok(vec![r.estimate, r.truth, r.ess, r.rho_hat, r.acceptance])
}
