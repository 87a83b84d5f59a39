mod common;

use common::{eig_extremes, fd_gradient, fd_hessian, grad_of, rel_err, two_mode_1d};
use flatmc::density::{GaussianMixture, Shifted};
use flatmc::estimator::{log_weights, snis};
use flatmc::flatten::{choose_m, flattened_eval, mollifier, mollifier_cdf, FlattenSpec, Flattened, MRule};
use flatmc::profiles::mixture_flattened_smoothness;
use flatmc::rng;
use flatmc::TargetDensity;
use proptest::prelude::*;

/// Composite Simpson on `n` (even) intervals, independent of the crate.
fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn raw_bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

fn normalizer() -> f64 {
    simpson(raw_bump, -1.0, 1.0, 200_000)
}

#[test]
fn mollifier_matches_independent_normalization() {
    let z = normalizer();
    assert!((mollifier(0.0) - (-1.0f64).exp() / z).abs() < 1e-10);
    assert!((mollifier(0.0) - 0.8285).abs() < 1e-4);
    let mut r = rng::stream(1, 0);
    for _ in 0..20 {
        let t: f64 = rng::normal_vec(&mut r, 1)[0].tanh();
        assert_eq!(mollifier(t), mollifier(-t));
        assert!((mollifier(t) - raw_bump(t) / z).abs() < 1e-10);
    }
}

#[test]
fn mollifier_cdf_matches_quadrature() {
    let z = normalizer();
    for &t in &[-0.9, -0.5, -0.1, 0.3, 0.77] {
        let oracle = simpson(raw_bump, -1.0, t, 100_000) / z;
        assert!((mollifier_cdf(t) - oracle).abs() < 1e-9, "t = {t}");
    }
}

#[test]
fn middle_of_band_matches_quadrature() {
    let z = normalizer();
    let m = 2.5;
    let oracle = m + 1.0 + simpson(|s| raw_bump(s) / z * (0.0 - s), -1.0, 0.0, 200_000);
    let spec = FlattenSpec::new(m);
    let t = spec.t_value(m + 1.0);
    assert!(t > m + 1.0 && t < m + 2.0);
    assert!((t - oracle).abs() < 1e-9, "{t} vs {oracle}");
    for &v in &[-0.6, 0.4, 0.9] {
        let oracle = m + 1.0 + simpson(|s| raw_bump(s) / z * (v - s), -1.0, v, 200_000);
        assert!((spec.t_value(m + 1.0 + v) - oracle).abs() < 1e-9, "v = {v}");
    }
}

#[test]
fn derivatives_match_finite_differences() {
    let spec = FlattenSpec::with_tol(-1.0, 1e-15).unwrap();
    assert_eq!(spec.t_value(-6.0), 0.0);
    assert_eq!(spec.t_value(2.0), 2.0);
    assert_eq!(spec.t_derivs(-1.0), (0.0, 0.0));
    assert_eq!(spec.t_derivs(1.0), (1.0, 0.0));
    assert_eq!(spec.t_derivs(0.0).0, 0.5);
    for i in 1..40 {
        let y = -1.0 + 2.0 * i as f64 / 40.0;
        let h = 1e-4;
        let d1 = (spec.t_value(y + h) - spec.t_value(y - h)) / (2.0 * h);
        let d2 = (spec.t_value(y + h) - 2.0 * spec.t_value(y) + spec.t_value(y - h)) / (h * h);
        let (a, b) = spec.t_derivs(y);
        assert!((a - d1).abs() < 1e-7, "y = {y}: {a} vs {d1}");
        assert!((b - d2).abs() < 1e-4, "y = {y}: {b} vs {d2}");
    }
}

fn band_point(gm: &GaussianMixture, dir: &[f64], level: f64) -> Vec<f64> {
    // Radial bisection from the origin towards `dir` for U = level.
    let (mut lo, mut hi) = (0.0, 1.0);
    while gm.u(&dir.iter().map(|v| v * hi).collect::<Vec<_>>()) < level {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gm.u(&dir.iter().map(|v| v * mid).collect::<Vec<_>>()) < level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    dir.iter().map(|v| v * 0.5 * (lo + hi)).collect()
}

#[test]
fn gradient_branches() {
    let gm = GaussianMixture::isotropic(vec![0.5, 0.5], vec![vec![-2.0, 0.0], vec![2.0, 1.0]], vec![1.0, 2.0]).unwrap();
    let spec = FlattenSpec::new(3.0);
    // At a mode U ≤ M: the gradient is exactly zero.
    let (t, g) = flattened_eval(&gm, &spec, &[-2.0, 0.0]).unwrap();
    assert_eq!(t, 4.0);
    assert!(g.iter().all(|&v| v == 0.0));
    // Far out U ≥ M+2: identical to the raw gradient.
    let x = [9.0, -7.0];
    let (u, gu) = grad_of(&gm, &x);
    let (t, g) = flattened_eval(&gm, &spec, &x).unwrap();
    assert_eq!(t, u);
    assert_eq!(g, gu);
    // In the band: central differences of T(U(x)).
    let mut r = rng::stream(5, 0);
    for i in 0..100 {
        let dir = rng::unit_vector(&mut r, 2);
        let level = 3.0 + 0.02 + 1.96 * (i as f64 / 99.0);
        let x = band_point(&gm, &dir, level);
        let (_, g) = flattened_eval(&gm, &spec, &x).unwrap();
        let fd = fd_gradient(|y| spec.t_value(gm.u(y)), &x, 1e-6);
        assert!(rel_err(&g, &fd) <= 1e-5, "{x:?}");
    }
}

#[test]
fn flattened_mixture_is_convex_and_smooth() {
    let gm = GaussianMixture::isotropic(
        vec![0.5, 0.5],
        vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]],
        vec![1.0, 2.0],
    )
    .unwrap();
    let sm = mixture_flattened_smoothness(&gm).unwrap();
    let m = choose_m(&sm.profile, gm.u(&[0.0; 3]), MRule::A1).unwrap();
    let flat = Flattened {
        target: &gm,
        spec: FlattenSpec::new(m),
    };
    let mut r = rng::stream(6, 0);
    let scale = sm.profile.radius;
    for _ in 0..100 {
        let dir = rng::unit_vector(&mut r, 3);
        let rad = scale * 3.0 * rng::normal_vec(&mut r, 1)[0].abs();
        let x: Vec<f64> = dir.iter().map(|v| v * rad).collect();
        let h = fd_hessian(&flat, &x, 1e-5 * (1.0 + rad));
        let (lo, hi) = eig_extremes(&h);
        assert!(lo >= -1e-6 * sm.l_hat, "min eigenvalue {lo} at {x:?}");
        assert!(hi.abs().max(lo.abs()) <= sm.l_hat);
    }
}

#[test]
fn shifting_energy_and_level_keeps_estimates() {
    let gm = two_mode_1d();
    let spec = FlattenSpec::new(4.0);
    let xs: Vec<Vec<f64>> = (0..400).map(|i| vec![-8.0 + 0.04 * i as f64]).collect();
    let phi = |x: &[f64]| (-(x[0] - 2.0).powi(2)).exp();
    let base = snis(&xs, &gm, &spec, phi).unwrap().estimate;
    for a in [-3.7, 0.5, 11.0] {
        let shifted = Shifted { inner: two_mode_1d(), offset: a };
        let sspec = FlattenSpec::new(4.0 + a);
        let est = snis(&xs, &shifted, &sspec, phi).unwrap().estimate;
        assert!((est - base).abs() <= 1e-12, "shift {a}: {est} vs {base}");
        let lw0 = log_weights(&xs, &gm, &spec).unwrap();
        let lw1 = log_weights(&xs, &shifted, &sspec).unwrap();
        for (p, q) in lw0.iter().zip(&lw1) {
            assert!((p - q).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn map_is_monotone_convex_and_dominating(m in -20.0f64..20.0, lo in -5.0f64..0.0, span in 1.0f64..8.0) {
        let spec = FlattenSpec::new(m);
        let n = 400;
        let ys: Vec<f64> = (0..=n).map(|i| m + lo + span * i as f64 / n as f64).collect();
        let ts: Vec<f64> = ys.iter().map(|&y| spec.t_value(y)).collect();
        for w in ts.windows(2) {
            prop_assert!(w[1] - w[0] >= 0.0);
        }
        for w in ts.windows(3) {
            prop_assert!(w[2] - 2.0 * w[1] + w[0] >= -1e-9);
        }
        for (&y, &t) in ys.iter().zip(&ts) {
            prop_assert!(t >= m + 1.0);
            prop_assert!(t - y >= 0.0);
            prop_assert!(t - y <= m + 1.0 - ys[0] + 1e-12);
            prop_assert!(spec.log_weight(y) >= 0.0);
        }
    }

    #[test]
    fn derivatives_stay_in_range(m in -20.0f64..20.0, v in -1.5f64..1.5) {
        let (d1, d2) = FlattenSpec::new(m).t_derivs(m + 1.0 + v);
        prop_assert!((0.0..=1.0).contains(&d1));
        prop_assert!(d2 >= 0.0 && d2 <= mollifier(0.0) + 1e-15);
    }
}
