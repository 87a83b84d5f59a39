#![allow(dead_code)]

use flatmc::density::{GaussianMixture, Precision};
use flatmc::TargetDensity;

/// Central-difference gradient with a step scaled to the point.
pub fn fd_gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|j| {
            let s = h * (1.0 + x[j].abs());
            y[j] = x[j] + s;
            let up = f(&y);
            y[j] = x[j] - s;
            let down = f(&y);
            y[j] = x[j];
            (up - down) / (2.0 * s)
        })
        .collect()
}

/// `|a − b| / max(|b|, 1)` in the Euclidean norm.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(1.0)
}

pub fn grad_of<T: TargetDensity + ?Sized>(t: &T, x: &[f64]) -> (f64, Vec<f64>) {
    let mut g = vec![0.0; t.dim()];
    let u = t.u_grad(x, &mut g);
    (u, g)
}

/// Finite-difference Hessian from central differences of the gradient,
/// symmetrized.
pub fn fd_hessian<T: TargetDensity + ?Sized>(t: &T, x: &[f64], h: f64) -> nalgebra::DMatrix<f64> {
    let d = x.len();
    let mut hm = nalgebra::DMatrix::zeros(d, d);
    let mut y = x.to_vec();
    for j in 0..d {
        y[j] = x[j] + h;
        let (_, gp) = grad_of(t, &y);
        y[j] = x[j] - h;
        let (_, gm) = grad_of(t, &y);
        y[j] = x[j];
        for i in 0..d {
            hm[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
        }
    }
    (&hm + hm.transpose()) * 0.5
}

pub fn eig_extremes(h: &nalgebra::DMatrix<f64>) -> (f64, f64) {
    let e = nalgebra::SymmetricEigen::new(h.clone()).eigenvalues;
    let lo = e.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

pub fn two_mode_1d() -> GaussianMixture {
    GaussianMixture::isotropic(vec![0.4, 0.6], vec![vec![-3.0], vec![2.5]], vec![1.0, 4.0]).unwrap()
}

/// `A Aᵀ + shift·I` for a row-major `A`.
pub fn spd(a: &[f64], d: usize, shift: f64) -> Precision {
    let mut rows = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            rows[i][j] = (0..d).map(|k| a[i * d + k] * a[j * d + k]).sum::<f64>();
        }
        rows[i][i] += shift;
    }
    Precision::Full(rows)
}
