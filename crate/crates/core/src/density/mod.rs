//! Target densities `μ ∝ exp(-U)` described by their negative log-density `U`
//! and its gradient.

mod bnn;
mod mixture;

pub use bnn::{Activation, BiasSlot, BnnPosterior, Dataset, LayerSpec};
pub use mixture::{GaussianMixture, Precision};

use crate::error::{ensure_dim, Error, Result};

/// A differentiable negative log-density on `R^d`.
///
/// Implementations must be immutable after construction; evaluation takes
/// `&self` and may run concurrently from several chains.
pub trait TargetDensity: Send + Sync {
    fn dim(&self) -> usize;

    /// Writes `∇U(x)` into `grad` and returns `U(x)`. Callers guarantee the
    /// slice lengths; non-finite results are reported as NaN/inf values.
    fn u_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;

    fn u(&self, x: &[f64]) -> f64 {
        let mut g = vec![0.0; self.dim()];
        self.u_grad(x, &mut g)
    }
}

impl<T: TargetDensity + ?Sized> TargetDensity for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn u_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        (**self).u_grad(x, grad)
    }
    fn u(&self, x: &[f64]) -> f64 {
        (**self).u(x)
    }
}

impl<T: TargetDensity + ?Sized> TargetDensity for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn u_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        (**self).u_grad(x, grad)
    }
    fn u(&self, x: &[f64]) -> f64 {
        (**self).u(x)
    }
}

impl<T: TargetDensity + ?Sized> TargetDensity for std::sync::Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn u_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        (**self).u_grad(x, grad)
    }
    fn u(&self, x: &[f64]) -> f64 {
        (**self).u(x)
    }
}

/// Checked evaluation: validates the point and the result.
pub fn evaluate<T: TargetDensity + ?Sized>(target: &T, x: &[f64]) -> Result<(f64, Vec<f64>)> {
    ensure_dim(target.dim(), x.len())?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("point has non-finite coordinates".into()));
    }
    let mut g = vec![0.0; x.len()];
    let u = target.u_grad(x, &mut g);
    if !u.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalOverflow(
            "non-finite density value or gradient".into(),
        ));
    }
    Ok((u, g))
}

/// Isotropic quadratic `U(x) = (m/2)|x - center|²`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub curvature: f64,
    pub center: Vec<f64>,
}

impl Quadratic {
    pub fn new(curvature: f64, center: Vec<f64>) -> Result<Self> {
        if !(curvature > 0.0) || center.is_empty() {
            return Err(Error::InvalidInput(
                "quadratic needs positive curvature and d ≥ 1".into(),
            ));
        }
        Ok(Self { curvature, center })
    }

    pub fn centered(curvature: f64, d: usize) -> Result<Self> {
        Self::new(curvature, vec![0.0; d])
    }
}

impl TargetDensity for Quadratic {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn u_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let mut s = 0.0;
        for ((g, xi), ci) in grad.iter_mut().zip(x).zip(&self.center) {
            let r = xi - ci;
            *g = self.curvature * r;
            s += r * r;
        }
        0.5 * self.curvature * s
    }
}

/// `U + offset`; gradients are unchanged.
#[derive(Debug, Clone)]
pub struct Shifted<T> {
    pub inner: T,
    pub offset: f64,
}

impl<T: TargetDensity> TargetDensity for Shifted<T> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn u_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.inner.u_grad(x, grad) + self.offset
    }
}
