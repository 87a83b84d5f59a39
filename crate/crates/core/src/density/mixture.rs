use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng as _;

use super::TargetDensity;
use crate::error::{ensure_dim, Error, Result};
use crate::math::{log_sum_exp, norm};
use crate::rng;

/// Precision (inverse covariance) of one mixture component.
#[derive(Debug, Clone, PartialEq)]
pub enum Precision {
    Isotropic(f64),
    /// Symmetric positive definite `d × d` matrix, row-major rows.
    Full(Vec<Vec<f64>>),
}

#[derive(Debug, Clone)]
struct Component {
    mean: Vec<f64>,
    precision: Precision,
    /// Row-major copy of a full precision matrix.
    dense: Option<Vec<f64>>,
    /// Lower Cholesky factor of a full precision matrix, row-major.
    chol: Option<Vec<f64>>,
    eig_min: f64,
    eig_max: f64,
    log_det: f64,
}

/// `U(x) = -ln Σ_i a_i exp(-(x - x_i)ᵀ S_i (x - x_i) / 2)`.
///
/// The weights multiply unnormalized Gaussians, so the probability mass of
/// component `i` under `μ ∝ e^{-U}` is proportional to `a_i det(S_i)^{-1/2}`.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    dim: usize,
    weights: Vec<f64>,
    ln_weights: Vec<f64>,
    comps: Vec<Component>,
    radius: f64,
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, precisions: Vec<Precision>) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            return Err(Error::InvalidInput("mixture needs at least one component".into()));
        }
        if means.len() != k || precisions.len() != k {
            return Err(Error::InvalidInput(format!(
                "{} weights, {} means and {} precisions",
                k,
                means.len(),
                precisions.len()
            )));
        }
        if weights.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
            return Err(Error::InvalidInput("mixture weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "mixture weights sum to {total}, not 1"
            )));
        }
        let dim = means[0].len();
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        let mut comps = Vec::with_capacity(k);
        for (mean, prec) in means.into_iter().zip(precisions) {
            ensure_dim(dim, mean.len())?;
            if mean.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("non-finite mixture mean".into()));
            }
            comps.push(Component::new(mean, prec, dim)?);
        }
        let radius = comps.iter().map(|c| norm(&c.mean)).fold(0.0, f64::max);
        let ln_weights = weights.iter().map(|a| a.ln()).collect();
        Ok(Self {
            dim,
            weights,
            ln_weights,
            comps,
            radius,
        })
    }

    pub fn isotropic(weights: Vec<f64>, means: Vec<Vec<f64>>, precisions: Vec<f64>) -> Result<Self> {
        let p = precisions.into_iter().map(Precision::Isotropic).collect();
        Self::new(weights, means, p)
    }

    pub fn len(&self) -> usize {
        self.comps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comps.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self, i: usize) -> &[f64] {
        &self.comps[i].mean
    }

    pub fn precision(&self, i: usize) -> &Precision {
        &self.comps[i].precision
    }

    /// Smallest and largest eigenvalue `(m_i, L_i)` of component `i`'s precision.
    pub fn eigen_extremes(&self, i: usize) -> (f64, f64) {
        (self.comps[i].eig_min, self.comps[i].eig_max)
    }

    /// `R = max_i |x_i|`.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Scalar precisions when every component is isotropic.
    pub fn isotropic_precisions(&self) -> Option<Vec<f64>> {
        self.comps
            .iter()
            .map(|c| match c.precision {
                Precision::Isotropic(s) => Some(s),
                Precision::Full(_) => None,
            })
            .collect()
    }

    /// Probability of each component under `μ ∝ e^{-U}`.
    pub fn mass_fractions(&self) -> Vec<f64> {
        let logs: Vec<f64> = self
            .comps
            .iter()
            .zip(&self.ln_weights)
            .map(|(c, lw)| lw - 0.5 * c.log_det)
            .collect();
        let z = log_sum_exp(&logs);
        logs.iter().map(|l| (l - z).exp()).collect()
    }

    /// `ln ∫ e^{-U}`.
    pub fn log_normalizer(&self) -> f64 {
        let half_d = 0.5 * self.dim as f64;
        let logs: Vec<f64> = self
            .comps
            .iter()
            .zip(&self.ln_weights)
            .map(|(c, lw)| lw - 0.5 * c.log_det + half_d * (2.0 * std::f64::consts::PI).ln())
            .collect();
        log_sum_exp(&logs)
    }

    /// Checked `(U(x), ∇U(x))`.
    /// Index of the component with the largest term `a_i e^{-q_i(x)/2}`.
    pub fn dominant_component(&self, x: &[f64]) -> usize {
        let d = self.dim;
        let mut diff = vec![0.0; d];
        let mut sg = vec![0.0; d];
        let mut best = (0, f64::NEG_INFINITY);
        for (i, c) in self.comps.iter().enumerate() {
            let e = self.ln_weights[i] - 0.5 * c.quad(x, &mut diff, &mut sg);
            if e > best.1 {
                best = (i, e);
            }
        }
        best.0
    }

    pub fn eval(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        super::evaluate(self, x)
    }

    /// Exact i.i.d. draws from `μ ∝ e^{-U}`.
    pub fn sample_iid(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = rng::stream(seed, 0);
        self.sample_with(n, &mut rng)
    }

    pub fn sample_with(&self, n: usize, rng: &mut rng::Rng) -> Vec<Vec<f64>> {
        let cdf: Vec<f64> = self
            .mass_fractions()
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        let mut out = Vec::with_capacity(n);
        let mut xi = vec![0.0; self.dim];
        for _ in 0..n {
            let u: f64 = rng.random::<f64>() * cdf[cdf.len() - 1];
            let i = cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1);
            rng::fill_normal(rng, &mut xi);
            out.push(self.comps[i].transform(&xi));
        }
        out
    }
}

impl Component {
    fn new(mean: Vec<f64>, precision: Precision, d: usize) -> Result<Self> {
        match &precision {
            Precision::Isotropic(s) => {
                if !(*s > 0.0) || !s.is_finite() {
                    return Err(Error::InvalidInput("isotropic precision must be positive".into()));
                }
                Ok(Self {
                    mean,
                    eig_min: *s,
                    eig_max: *s,
                    log_det: d as f64 * s.ln(),
                    precision,
                    dense: None,
                    chol: None,
                })
            }
            Precision::Full(rows) => {
                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                    return Err(Error::InvalidInput(format!("precision matrix must be {d}×{d}")));
                }
                let dense: Vec<f64> = rows.iter().flatten().copied().collect();
                for i in 0..d {
                    for j in 0..i {
                        let (a, b) = (dense[i * d + j], dense[j * d + i]);
                        if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                            return Err(Error::InvalidInput("precision matrix is not symmetric".into()));
                        }
                    }
                }
                let mat = DMatrix::from_row_slice(d, d, &dense);
                let eig = SymmetricEigen::new(mat.clone());
                let eig_min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
                let eig_max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if !(eig_min > 0.0) {
                    return Err(Error::InvalidInput("precision matrix is not positive definite".into()));
                }
                let chol = mat
                    .cholesky()
                    .ok_or_else(|| Error::InvalidInput("Cholesky factorization failed".into()))?;
                let l = chol.l();
                let log_det = 2.0 * (0..d).map(|i| l[(i, i)].ln()).sum::<f64>();
                let mut lrow = vec![0.0; d * d];
                for i in 0..d {
                    for j in 0..=i {
                        lrow[i * d + j] = l[(i, j)];
                    }
                }
                Ok(Self {
                    mean,
                    precision,
                    dense: Some(dense),
                    chol: Some(lrow),
                    eig_min,
                    eig_max,
                    log_det,
                })
            }
        }
    }

    /// Quadratic form `(x-μ)ᵀS(x-μ)`; writes `S(x-μ)` into `sg`.
    #[inline]
    fn quad(&self, x: &[f64], diff: &mut [f64], sg: &mut [f64]) -> f64 {
        for ((d, xi), mi) in diff.iter_mut().zip(x).zip(&self.mean) {
            *d = xi - mi;
        }
        match (&self.precision, &self.dense) {
            (Precision::Isotropic(s), _) => {
                let mut q = 0.0;
                for (g, d) in sg.iter_mut().zip(diff.iter()) {
                    *g = s * d;
                    q += d * d;
                }
                s * q
            }
            (Precision::Full(_), Some(m)) => {
                let n = diff.len();
                let mut q = 0.0;
                for i in 0..n {
                    let row = &m[i * n..(i + 1) * n];
                    let v: f64 = row.iter().zip(diff.iter()).map(|(a, b)| a * b).sum();
                    sg[i] = v;
                    q += v * diff[i];
                }
                q
            }
            _ => unreachable!("full precision always carries a dense copy"),
        }
    }

    /// Maps a standard normal vector to a draw from `N(mean, S⁻¹)`.
    fn transform(&self, xi: &[f64]) -> Vec<f64> {
        match (&self.precision, &self.chol) {
            (Precision::Isotropic(s), _) => {
                let sd = 1.0 / s.sqrt();
                self.mean.iter().zip(xi).map(|(m, z)| m + sd * z).collect()
            }
            (Precision::Full(_), Some(l)) => {
                // Solve Lᵀ y = ξ so that Cov(y) = (L Lᵀ)⁻¹.
                let n = xi.len();
                let mut y = xi.to_vec();
                for i in (0..n).rev() {
                    let mut v = y[i];
                    for j in i + 1..n {
                        v -= l[j * n + i] * y[j];
                    }
                    y[i] = v / l[i * n + i];
                }
                y.iter().zip(&self.mean).map(|(a, m)| a + m).collect()
            }
            _ => unreachable!(),
        }
    }
}

impl TargetDensity for GaussianMixture {
    fn dim(&self) -> usize {
        self.dim
    }

    fn u_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let d = self.dim;
        let k = self.comps.len();
        let mut diff = vec![0.0; d];
        let mut sg = vec![0.0; d * k];
        let mut expo = vec![0.0; k];
        for (i, c) in self.comps.iter().enumerate() {
            let q = c.quad(x, &mut diff, &mut sg[i * d..(i + 1) * d]);
            expo[i] = self.ln_weights[i] - 0.5 * q;
        }
        let lse = log_sum_exp(&expo);
        grad.iter_mut().for_each(|g| *g = 0.0);
        for i in 0..k {
            let w = (expo[i] - lse).exp();
            if w == 0.0 {
                continue;
            }
            for (g, s) in grad.iter_mut().zip(&sg[i * d..(i + 1) * d]) {
                *g += w * s;
            }
        }
        -lse
    }

    fn u(&self, x: &[f64]) -> f64 {
        let d = self.dim;
        let mut diff = vec![0.0; d];
        let mut sg = vec![0.0; d];
        let expo: Vec<f64> = self
            .comps
            .iter()
            .zip(&self.ln_weights)
            .map(|(c, lw)| lw - 0.5 * c.quad(x, &mut diff, &mut sg))
            .collect();
        -log_sum_exp(&expo)
    }
}
