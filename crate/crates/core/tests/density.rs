mod common;

use common::{fd_gradient, grad_of, rel_err, spd, two_mode_1d};
use flatmc::density::{Activation, BiasSlot, BnnPosterior, Dataset, GaussianMixture, LayerSpec, Precision};
use flatmc::estimator::{ks_distance, quadrature_cdf_1d};
use flatmc::rng;
use flatmc::TargetDensity;
use proptest::prelude::*;

fn random_mixture(seed: u64, d: usize, k: usize) -> GaussianMixture {
    let mut r = rng::stream(seed, 0);
    let raw: Vec<f64> = rng::normal_vec(&mut r, k).iter().map(|v| v.exp()).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|v| v / total).collect();
    let means = (0..k).map(|_| rng::normal_vec(&mut r, d).iter().map(|v| 2.0 * v).collect()).collect();
    let precs = (0..k)
        .map(|i| {
            if i % 2 == 0 {
                spd(&rng::normal_vec(&mut r, d * d), d, 0.3)
            } else {
                Precision::Isotropic(0.5 + rng::normal_vec(&mut r, 1)[0].abs())
            }
        })
        .collect();
    GaussianMixture::new(weights, means, precs).unwrap()
}

#[test]
fn mixture_gradient_matches_finite_differences() {
    let gm = random_mixture(3, 3, 2);
    let mut r = rng::stream(4, 0);
    for _ in 0..100 {
        let x: Vec<f64> = rng::normal_vec(&mut r, 3).iter().map(|v| 3.0 * v).collect();
        let (_, g) = grad_of(&gm, &x);
        let fd = fd_gradient(|y| gm.u(y), &x, 1e-6);
        assert!(rel_err(&g, &fd) <= 1e-6, "{x:?}: {g:?} vs {fd:?}");
    }
}

#[test]
fn separated_components_stay_finite() {
    let d = 4;
    let s: f64 = 0.25;
    let sep = 100.0 / s.sqrt();
    let mut far = vec![0.0; d];
    far[0] = sep;
    let gm = GaussianMixture::isotropic(vec![0.5, 0.5], vec![vec![0.0; d], far], vec![s, 2.0]).unwrap();
    let mut r = rng::stream(9, 0);
    for _ in 0..200 {
        let x: Vec<f64> = rng::normal_vec(&mut r, d).iter().map(|v| v * sep).collect();
        let (u, g) = gm.eval(&x).unwrap();
        assert!(u.is_finite() && g.iter().all(|v| v.is_finite()));
    }
}

#[test]
fn standard_component_sample_mean() {
    let gm = GaussianMixture::isotropic(vec![1.0], vec![vec![0.0; 3]], vec![1.0]).unwrap();
    let n = 100_000;
    let xs = gm.sample_iid(n, 5);
    for j in 0..3 {
        let mean = xs.iter().map(|x| x[j]).sum::<f64>() / n as f64;
        assert!(mean.abs() <= 4.0 / (n as f64).sqrt(), "coordinate {j}: {mean}");
    }
}

#[test]
fn one_dimensional_draws_match_quadrature_cdf() {
    let gm = two_mode_1d();
    let (xs, cdf) = quadrature_cdf_1d(|x| gm.u(&[x]), -12.0, 12.0, 200_001);
    let draws: Vec<f64> = gm.sample_iid(100_000, 17).into_iter().map(|x| x[0]).collect();
    let ks = ks_distance(&draws, &xs, &cdf);
    assert!(ks <= 0.01, "KS distance {ks}");
}

/// Two hidden tanh units between 2 inputs and 3 classes, with one fixed bias.
fn small_net() -> BnnPosterior {
    let data = Dataset {
        features: vec![vec![0.3, -1.2], vec![1.5, 0.4]],
        labels: vec![2, 0],
    };
    let hidden = LayerSpec {
        width: 2,
        activation: Some(Activation::Tanh),
        weights: (0..4).map(Some).collect(),
        biases: vec![BiasSlot::Free(0), BiasSlot::Fixed(0.25)],
    };
    // Fan-in 4: both inputs (skip connection) and both hidden units.
    let out = LayerSpec {
        width: 3,
        activation: None,
        weights: (4..16).map(Some).collect(),
        biases: vec![BiasSlot::Free(1), BiasSlot::Free(2), BiasSlot::Free(3)],
    };
    BnnPosterior::new(2, vec![hidden, out], data, 0.7, 1.3, 0.5).unwrap()
}

#[test]
fn network_gradient_matches_finite_differences() {
    let net = small_net();
    assert_eq!(net.dim(), 16 + 4);
    let mut r = rng::stream(21, 0);
    for _ in 0..100 {
        let v = rng::normal_vec(&mut r, net.dim());
        let (_, g) = grad_of(&net, &v);
        let fd = fd_gradient(|y| net.u(y), &v, 1e-6);
        assert!(rel_err(&g, &fd) <= 1e-5, "{g:?} vs {fd:?}");
    }
}

#[test]
fn feedforward_gradient_matches_finite_differences() {
    let data = Dataset::synthetic(2, 2, 3, 8);
    let net = BnnPosterior::feedforward(&[2, 3, 2], Activation::Logistic, data, 1.0, 1.0, 0.5).unwrap();
    let mut r = rng::stream(22, 0);
    for _ in 0..100 {
        let v = rng::normal_vec(&mut r, net.dim());
        let (_, g) = grad_of(&net, &v);
        let fd = fd_gradient(|y| net.u(y), &v, 1e-6);
        assert!(rel_err(&g, &fd) <= 1e-5);
    }
}

#[test]
fn relu_network_is_finite_and_bounded_below() {
    let data = Dataset::synthetic(3, 2, 10, 1);
    let net = BnnPosterior::feedforward(&[3, 4, 2], Activation::Relu, data, 1.0, 2.0, 0.5).unwrap();
    let mut r = rng::stream(23, 0);
    for _ in 0..50 {
        let v: Vec<f64> = rng::normal_vec(&mut r, net.dim()).iter().map(|x| 5.0 * x).collect();
        let (u, _) = net.eval(&v).unwrap();
        let (w, b) = v.split_at(net.d1());
        let prior = net.alpha1() * w.iter().map(|x| x * x).sum::<f64>() + net.alpha2() * b.iter().map(|x| x * x).sum::<f64>();
        assert!(u >= prior);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reordering_components_changes_nothing(seed in 0u64..10_000, k in 2usize..5) {
        let gm = random_mixture(seed, 3, k);
        let perm: Vec<usize> = (0..k).rev().collect();
        let swapped = GaussianMixture::new(
            perm.iter().map(|&i| gm.weights()[i]).collect(),
            perm.iter().map(|&i| gm.mean(i).to_vec()).collect(),
            perm.iter().map(|&i| gm.precision(i).clone()).collect(),
        ).unwrap();
        let mut r = rng::stream(seed, 1);
        let x = rng::normal_vec(&mut r, 3);
        let (u1, g1) = grad_of(&gm, &x);
        let (u2, g2) = grad_of(&swapped, &x);
        prop_assert!((u1 - u2).abs() <= 1e-12 * (1.0 + u1.abs()));
        prop_assert!(rel_err(&g1, &g2) <= 1e-12);
    }

    #[test]
    fn random_mixture_gradients_agree(seed in 0u64..10_000) {
        let gm = random_mixture(seed, 2, 3);
        let mut r = rng::stream(seed, 2);
        let x: Vec<f64> = rng::normal_vec(&mut r, 2).iter().map(|v| 2.0 * v).collect();
        let (_, g) = grad_of(&gm, &x);
        let fd = fd_gradient(|y| gm.u(y), &x, 1e-6);
        prop_assert!(rel_err(&g, &fd) <= 1e-5);
    }

    #[test]
    fn network_energy_dominates_prior(seed in 0u64..10_000) {
        let net = small_net();
        let mut r = rng::stream(seed, 0);
        let v: Vec<f64> = rng::normal_vec(&mut r, net.dim()).iter().map(|x| 3.0 * x).collect();
        let u = net.u(&v);
        let (w, b) = v.split_at(net.d1());
        let prior = net.alpha1() * w.iter().map(|x| x * x).sum::<f64>() + net.alpha2() * b.iter().map(|x| x * x).sum::<f64>();
        prop_assert!(u >= prior);
    }
}
