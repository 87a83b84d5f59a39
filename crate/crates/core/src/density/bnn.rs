//! Posterior of a small classification network with Gaussian priors.
//!
//! Layer `l` sees the concatenation of every earlier layer's output
//! `(z⁰, z¹, …, z^{l-1})`, so skip connections are expressed by leaving the
//! corresponding weight slots free. The final layer is a softmax over `I`
//! classes.

use rand::Rng as _;

use super::TargetDensity;
use crate::error::{Error, Result};
use crate::math::log_sum_exp;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Logistic,
    Relu,
}

impl Activation {
    #[inline]
    fn apply(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => a.tanh(),
            Activation::Logistic => 1.0 / (1.0 + (-a).exp()),
            Activation::Relu => a.max(0.0),
        }
    }

    /// Derivative expressed through the input `a` and output `z`.
    #[inline]
    fn slope(self, a: f64, z: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - z * z,
            Activation::Logistic => z * (1.0 - z),
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `sup |σ|`.
    pub fn bound(self) -> f64 {
        match self {
            Activation::Tanh | Activation::Logistic => 1.0,
            Activation::Relu => f64::INFINITY,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "logistic" | "sigmoid" => Ok(Activation::Logistic),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::InvalidInput(format!("unknown activation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BiasSlot {
    /// Bias equal to sampling variable `ȳ[j]`.
    Free(usize),
    Fixed(f64),
}

/// One layer: `width` outputs reading every earlier layer's output.
///
/// `weights` is row-major `width × fan_in`; `None` marks a weight fixed to 0,
/// `Some(j)` ties it to sampling variable `x̄[j]`.
#[derive(Debug, Clone)]
pub struct LayerSpec {
    pub width: usize,
    /// `None` for the final softmax layer.
    pub activation: Option<Activation>,
    pub weights: Vec<Option<usize>>,
    pub biases: Vec<BiasSlot>,
}

/// Labelled data; labels are zero-based class indices.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl Dataset {
    /// Standard normal features and uniformly random labels.
    pub fn synthetic(features: usize, classes: usize, size: usize, seed: u64) -> Self {
        let mut r = rng::stream(seed, 0);
        let mut xs = Vec::with_capacity(size);
        let mut ys = Vec::with_capacity(size);
        for _ in 0..size {
            xs.push(rng::normal_vec(&mut r, features));
            ys.push(r.random_range(0..classes));
        }
        Self {
            features: xs,
            labels: ys,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// `U(x̄, ȳ) = α₁|x̄|² + α₂|ȳ|² − β Σ_i ln softmax_{y_i}(net(x_i))`.
#[derive(Debug, Clone)]
pub struct BnnPosterior {
    inputs: usize,
    layers: Vec<LayerSpec>,
    /// Offset of each layer's outputs in the concatenated activation buffer.
    offsets: Vec<usize>,
    data: Dataset,
    alpha1: f64,
    alpha2: f64,
    beta_like: f64,
    d1: usize,
    d2: usize,
}

impl BnnPosterior {
    pub fn new(
        inputs: usize,
        layers: Vec<LayerSpec>,
        data: Dataset,
        alpha1: f64,
        alpha2: f64,
        beta_like: f64,
    ) -> Result<Self> {
        if inputs == 0 || layers.is_empty() {
            return Err(Error::InvalidInput("network needs inputs and at least one layer".into()));
        }
        if !(alpha1 > 0.0 && alpha2 > 0.0 && beta_like > 0.0) {
            return Err(Error::InvalidInput("α₁, α₂ and β must be positive".into()));
        }
        let mut offsets = vec![0, inputs];
        for (l, layer) in layers.iter().enumerate() {
            let fan_in = *offsets.last().unwrap();
            let last = l + 1 == layers.len();
            if layer.width == 0 {
                return Err(Error::InvalidInput(format!("layer {} has zero width", l + 1)));
            }
            if last != layer.activation.is_none() {
                return Err(Error::InvalidInput(
                    "exactly the final layer must be the softmax layer".into(),
                ));
            }
            if layer.weights.len() != layer.width * fan_in || layer.biases.len() != layer.width {
                return Err(Error::InvalidInput(format!(
                    "layer {} expects {}×{} weights and {} biases",
                    l + 1,
                    layer.width,
                    fan_in,
                    layer.width
                )));
            }
            offsets.push(fan_in + layer.width);
        }
        let classes = layers.last().unwrap().width;
        if classes < 2 {
            return Err(Error::InvalidInput("need at least two classes".into()));
        }
        if data.is_empty() {
            return Err(Error::InvalidInput("dataset is empty".into()));
        }
        for (x, &y) in data.features.iter().zip(&data.labels) {
            if x.len() != inputs || y >= classes || x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("dataset does not match the network".into()));
            }
        }
        let d1 = layers
            .iter()
            .flat_map(|l| l.weights.iter().flatten())
            .map(|j| j + 1)
            .max()
            .unwrap_or(0);
        let d2 = layers
            .iter()
            .flat_map(|l| l.biases.iter())
            .filter_map(|b| match b {
                BiasSlot::Free(j) => Some(j + 1),
                BiasSlot::Fixed(_) => None,
            })
            .max()
            .unwrap_or(0);
        if d1 == 0 {
            return Err(Error::InvalidInput("network has no free weights".into()));
        }
        Ok(Self {
            inputs,
            layers,
            offsets,
            data,
            alpha1,
            alpha2,
            beta_like,
            d1,
            d2,
        })
    }

    /// Plain feedforward net: `widths = [p, m₁, …, I]`, every weight between
    /// consecutive layers and every bias free, no skip connections.
    pub fn feedforward(
        widths: &[usize],
        activation: Activation,
        data: Dataset,
        alpha1: f64,
        alpha2: f64,
        beta_like: f64,
    ) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::InvalidInput("need at least input and output widths".into()));
        }
        let mut layers = Vec::new();
        let mut w_next = 0;
        let mut b_next = 0;
        let mut fan_in = widths[0];
        for l in 1..widths.len() {
            let prev_start = fan_in - widths[l - 1];
            let width = widths[l];
            let mut weights = vec![None; width * fan_in];
            for j in 0..width {
                for k in prev_start..fan_in {
                    weights[j * fan_in + k] = Some(w_next);
                    w_next += 1;
                }
            }
            let biases = (0..width)
                .map(|_| {
                    b_next += 1;
                    BiasSlot::Free(b_next - 1)
                })
                .collect();
            let last = l + 1 == widths.len();
            layers.push(LayerSpec {
                width,
                activation: if last { None } else { Some(activation) },
                weights,
                biases,
            });
            fan_in += width;
        }
        Self::new(widths[0], layers, data, alpha1, alpha2, beta_like)
    }

    pub fn d1(&self) -> usize {
        self.d1
    }

    pub fn d2(&self) -> usize {
        self.d2
    }

    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }

    pub fn alpha2(&self) -> f64 {
        self.alpha2
    }

    pub fn beta_like(&self) -> f64 {
        self.beta_like
    }

    pub fn classes(&self) -> usize {
        self.layers.last().unwrap().width
    }

    pub fn data_len(&self) -> usize {
        self.data.len()
    }

    fn final_layer(&self) -> &LayerSpec {
        self.layers.last().unwrap()
    }

    /// Largest number of free weights feeding one output neuron.
    pub fn m_star(&self) -> usize {
        let last = self.final_layer();
        let fan_in = last.weights.len() / last.width;
        (0..last.width)
            .map(|j| last.weights[j * fan_in..(j + 1) * fan_in].iter().flatten().count())
            .max()
            .unwrap_or(0)
    }

    /// `sup |z|` over every block with a free weight into the final layer.
    pub fn sigma_max(&self) -> f64 {
        let last = self.final_layer();
        let fan_in = last.weights.len() / last.width;
        let mut bound: f64 = 0.0;
        for (block, w) in self.offsets.windows(2).take(self.layers.len()).enumerate() {
            let connected = (0..last.width).any(|j| {
                (w[0]..w[1]).any(|k| last.weights[j * fan_in + k].is_some())
            });
            if !connected {
                continue;
            }
            let b = if block == 0 {
                self.data
                    .features
                    .iter()
                    .flatten()
                    .fold(0.0_f64, |m, v| m.max(v.abs()))
            } else {
                self.layers[block - 1].activation.map_or(f64::INFINITY, Activation::bound)
            };
            bound = bound.max(b);
        }
        bound
    }

    /// Spread of the final-layer biases at the origin of the sampling space,
    /// `max c_j − min c_j` with free biases counted as 0.
    pub fn c_hat_bias(&self) -> f64 {
        let vals: Vec<f64> = self
            .final_layer()
            .biases
            .iter()
            .map(|b| match b {
                BiasSlot::Free(_) => 0.0,
                BiasSlot::Fixed(c) => *c,
            })
            .collect();
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        max - min
    }

    /// Checks that final-layer free slots map to distinct sampling variables.
    pub fn final_layer_injective(&self) -> bool {
        let last = self.final_layer();
        let mut seen_w = std::collections::HashSet::new();
        let mut seen_b = std::collections::HashSet::new();
        last.weights.iter().flatten().all(|j| seen_w.insert(*j))
            && last.biases.iter().all(|b| match b {
                BiasSlot::Free(j) => seen_b.insert(*j),
                BiasSlot::Fixed(_) => true,
            })
    }

    /// Checked `(U, ∇U)`; non-finite intermediates are an overflow error.
    pub fn eval(&self, vars: &[f64]) -> Result<(f64, Vec<f64>)> {
        super::evaluate(self, vars)
    }

    /// Softmax class probabilities for one input at the given variables.
    pub fn predict(&self, vars: &[f64], input: &[f64]) -> Vec<f64> {
        let (wts, bs) = self.materialize(vars);
        let mut z = vec![0.0; *self.offsets.last().unwrap()];
        let mut a = z.clone();
        let logits = self.forward(&wts, &bs, input, &mut z, &mut a);
        let lse = log_sum_exp(logits);
        logits.iter().map(|v| (v - lse).exp()).collect()
    }

    fn materialize(&self, vars: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let (xw, yb) = vars.split_at(self.d1);
        let wts = self
            .layers
            .iter()
            .map(|l| l.weights.iter().map(|s| s.map_or(0.0, |j| xw[j])).collect())
            .collect();
        let bs = self
            .layers
            .iter()
            .map(|l| {
                l.biases
                    .iter()
                    .map(|b| match b {
                        BiasSlot::Free(j) => yb[*j],
                        BiasSlot::Fixed(c) => *c,
                    })
                    .collect()
            })
            .collect();
        (wts, bs)
    }

    /// Fills the activation buffers and returns the logits slice.
    fn forward<'a>(
        &self,
        wts: &[Vec<f64>],
        bs: &[Vec<f64>],
        input: &[f64],
        z: &'a mut [f64],
        a: &mut [f64],
    ) -> &'a [f64] {
        z[..self.inputs].copy_from_slice(input);
        for (l, layer) in self.layers.iter().enumerate() {
            let fan_in = self.offsets[l + 1];
            let out = fan_in;
            for j in 0..layer.width {
                let row = &wts[l][j * fan_in..(j + 1) * fan_in];
                let pre: f64 = row.iter().zip(&z[..fan_in]).map(|(w, v)| w * v).sum::<f64>() + bs[l][j];
                a[out + j] = pre;
                z[out + j] = match layer.activation {
                    Some(act) => act.apply(pre),
                    None => pre,
                };
            }
        }
        let start = self.offsets[self.layers.len()];
        &z[start..start + self.classes()]
    }
}

impl TargetDensity for BnnPosterior {
    fn dim(&self) -> usize {
        self.d1 + self.d2
    }

    fn u_grad(&self, vars: &[f64], grad: &mut [f64]) -> f64 {
        let (wts, bs) = self.materialize(vars);
        let total = *self.offsets.last().unwrap();
        let mut z = vec![0.0; total];
        let mut a = vec![0.0; total];
        let mut dz = vec![0.0; total];
        let mut gw: Vec<Vec<f64>> = wts.iter().map(|w| vec![0.0; w.len()]).collect();
        let mut gb: Vec<Vec<f64>> = bs.iter().map(|b| vec![0.0; b.len()]).collect();
        let classes = self.classes();
        let last = self.layers.len() - 1;
        let mut loss = 0.0;

        for (x, &y) in self.data.features.iter().zip(&self.data.labels) {
            let logits = self.forward(&wts, &bs, x, &mut z, &mut a).to_vec();
            let lse = log_sum_exp(&logits);
            loss += lse - logits[y];
            dz.iter_mut().for_each(|v| *v = 0.0);
            let fo = self.offsets[last + 1];
            for c in 0..classes {
                dz[fo + c] = (logits[c] - lse).exp() - if c == y { 1.0 } else { 0.0 };
            }
            for l in (0..=last).rev() {
                let layer = &self.layers[l];
                let fan_in = self.offsets[l + 1];
                let out = fan_in;
                for j in 0..layer.width {
                    let delta = match layer.activation {
                        Some(act) => act.slope(a[out + j], z[out + j]) * dz[out + j],
                        None => dz[out + j],
                    };
                    if delta == 0.0 {
                        continue;
                    }
                    gb[l][j] += delta;
                    let row = j * fan_in;
                    for k in 0..fan_in {
                        gw[l][row + k] += delta * z[k];
                        if k >= self.inputs {
                            dz[k] += wts[l][row + k] * delta;
                        }
                    }
                }
            }
        }

        let (xw, yb) = vars.split_at(self.d1);
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (l, layer) in self.layers.iter().enumerate() {
            for (s, g) in layer.weights.iter().zip(&gw[l]) {
                if let Some(j) = s {
                    grad[*j] += self.beta_like * g;
                }
            }
            for (s, g) in layer.biases.iter().zip(&gb[l]) {
                if let BiasSlot::Free(j) = s {
                    grad[self.d1 + *j] += self.beta_like * g;
                }
            }
        }
        let mut reg = 0.0;
        for (j, v) in xw.iter().enumerate() {
            reg += self.alpha1 * v * v;
            grad[j] += 2.0 * self.alpha1 * v;
        }
        for (j, v) in yb.iter().enumerate() {
            reg += self.alpha2 * v * v;
            grad[self.d1 + j] += 2.0 * self.alpha2 * v;
        }
        let u = reg + self.beta_like * loss;
        if u.is_finite() {
            u
        } else {
            f64::NAN
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_net() -> BnnPosterior {
        let data = Dataset::synthetic(2, 2, 3, 11);
        BnnPosterior::feedforward(&[2, 3, 2], Activation::Tanh, data, 1.0, 1.0, 1.0 / 3.0).unwrap()
    }

    #[test]
    fn dimensions_of_feedforward_net() {
        let net = small_net();
        assert_eq!(net.d1(), 2 * 3 + 3 * 2);
        assert_eq!(net.d2(), 3 + 2);
        assert_eq!(net.m_star(), 3);
        assert_eq!(net.sigma_max(), 1.0);
        assert_eq!(net.c_hat_bias(), 0.0);
        assert!(net.final_layer_injective());
    }

    #[test]
    fn zero_variables_give_uniform_softmax() {
        let net = small_net();
        let (u, _) = net.eval(&vec![0.0; net.dim()]).unwrap();
        let expected = net.beta_like() * 3.0 * 2f64.ln();
        assert!((u - expected).abs() < 1e-12);
    }

    #[test]
    fn softmax_outputs_sum_to_one() {
        let net = small_net();
        let mut r = rng::stream(5, 0);
        let v = rng::normal_vec(&mut r, net.dim());
        let p = net.predict(&v, &[0.3, -1.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn overflow_is_reported() {
        let net = small_net();
        let v = vec![1e200; net.dim()];
        assert!(matches!(net.eval(&v), Err(Error::NumericalOverflow(_))));
    }

    #[test]
    fn output_layer_must_be_softmax() {
        let data = Dataset::synthetic(1, 2, 2, 0);
        let layer = LayerSpec {
            width: 2,
            activation: Some(Activation::Tanh),
            weights: vec![Some(0), Some(1)],
            biases: vec![BiasSlot::Fixed(0.0); 2],
        };
        assert!(BnnPosterior::new(1, vec![layer], data, 1.0, 1.0, 1.0).is_err());
    }
}
