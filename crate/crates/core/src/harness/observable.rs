use nalgebra::DMatrix;

use super::config::ObservableConfig;
use crate::density::{GaussianMixture, Precision, TargetDensity};
use crate::error::{Error, Result};

/// A test function `φ` whose expectation is estimated.
#[derive(Debug, Clone, PartialEq)]
pub enum Observable {
    /// `exp(−|x − center|²/(2 width²))`, bounded by 1.
    Bump { center: Vec<f64>, width: f64, name: String },
    Coordinate { index: usize, name: String },
    Affine { coefficients: Vec<f64>, offset: f64, name: String },
    /// `1{x[index] ≤ threshold}`.
    Indicator { index: usize, threshold: f64, name: String },
}

impl Observable {
    pub fn from_config(cfg: &ObservableConfig, d: usize) -> Result<Self> {
        let check_index = |i: usize| {
            if i < d {
                Ok(())
            } else {
                Err(Error::Config(format!("coordinate {i} out of range for d = {d}")))
            }
        };
        Ok(match cfg {
            ObservableConfig::Bump { center, width, name } => {
                if center.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: center.len(),
                    });
                }
                if !(*width > 0.0) {
                    return Err(Error::Config("bump width must be positive".into()));
                }
                Observable::Bump {
                    center: center.clone(),
                    width: *width,
                    name: name.clone().unwrap_or_else(|| "bump".into()),
                }
            }
            ObservableConfig::Coordinate { index, name } => {
                check_index(*index)?;
                Observable::Coordinate {
                    index: *index,
                    name: name.clone().unwrap_or_else(|| format!("x{index}")),
                }
            }
            ObservableConfig::Affine {
                coefficients,
                offset,
                name,
            } => {
                if coefficients.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: coefficients.len(),
                    });
                }
                Observable::Affine {
                    coefficients: coefficients.clone(),
                    offset: *offset,
                    name: name.clone().unwrap_or_else(|| "affine".into()),
                }
            }
            ObservableConfig::Indicator { index, threshold, name } => {
                check_index(*index)?;
                Observable::Indicator {
                    index: *index,
                    threshold: *threshold,
                    name: name.clone().unwrap_or_else(|| format!("x{index}<={threshold}")),
                }
            }
        })
    }

    pub fn name(&self) -> &str {
        match self {
            Observable::Bump { name, .. }
            | Observable::Coordinate { name, .. }
            | Observable::Affine { name, .. }
            | Observable::Indicator { name, .. } => name,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Observable::Bump { center, width, .. } => {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                (-r2 / (2.0 * width * width)).exp()
            }
            Observable::Coordinate { index, .. } => x[*index],
            Observable::Affine { coefficients, offset, .. } => crate::math::dot(coefficients, x) + offset,
            Observable::Indicator { index, threshold, .. } => f64::from(u8::from(x[*index] <= *threshold)),
        }
    }

    /// Exact expectation under the normalized mixture.
    pub fn mixture_truth(&self, gm: &GaussianMixture) -> Option<f64> {
        let fractions = gm.mass_fractions();
        let d = gm.dim();
        let mut total = 0.0;
        for (i, p) in fractions.iter().enumerate() {
            let mu = gm.mean(i);
            let cov = covariance(gm.precision(i), d)?;
            let term = match self {
                Observable::Bump { center, width, .. } => {
                    let w2 = width * width;
                    let shifted = &cov + DMatrix::identity(d, d) * w2;
                    let chol = shifted.clone().cholesky()?;
                    let diff = nalgebra::DVector::from_iterator(d, mu.iter().zip(center).map(|(a, b)| a - b));
                    let quad = diff.dot(&chol.solve(&diff));
                    // det(I + Σ/w²) = det(Σ + w²I) / w^{2d}
                    let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>() - d as f64 * w2.ln();
                    (-0.5 * log_det - 0.5 * quad).exp()
                }
                Observable::Coordinate { index, .. } => mu[*index],
                Observable::Affine { coefficients, offset, .. } => crate::math::dot(coefficients, mu) + offset,
                Observable::Indicator { index, threshold, .. } => {
                    let sd = cov[(*index, *index)].sqrt();
                    0.5 * libm::erfc(-(threshold - mu[*index]) / (sd * std::f64::consts::SQRT_2))
                }
            };
            total += p * term;
        }
        Some(total)
    }
}

fn covariance(p: &Precision, d: usize) -> Option<DMatrix<f64>> {
    match p {
        Precision::Isotropic(s) => Some(DMatrix::identity(d, d) / *s),
        Precision::Full(rows) => {
            let flat: Vec<f64> = rows.iter().flatten().copied().collect();
            DMatrix::from_row_slice(d, d, &flat).try_inverse()
        }
    }
}
