//! Small fully connected networks with hand-written backpropagation.

mod train;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;

pub use train::{fit, Target, TrainConfig, TrainReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
        }
    }

    fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(T::zero()),
            Activation::Sigmoid => T::one() / (T::one() + (-z).exp()),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative<T: Scalar>(self, z: T, a: T) -> T {
        match self {
            Activation::Identity => T::one(),
            Activation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Sigmoid => a * (T::one() - a),
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" => Ok(Activation::Identity),
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(format!("unknown activation `{other}`")),
        }
    }
}

/// One affine map followed by an activation. `weights` is `out x in`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<T>,
    pub bias: Option<Vec<T>>,
    pub activation: Activation,
}

impl<T: Scalar> Layer<T> {
    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.as_ref().map_or(0, Vec::len)
    }

    fn pre_activation(&self, x: &[T], z: &mut Vec<T>) {
        z.clear();
        for o in 0..self.out_dim {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let mut s: T = row.iter().zip(x).map(|(&w, &v)| w * v).sum();
            if let Some(b) = &self.bias {
                s += b[o];
            }
            z.push(s);
        }
    }
}

/// Layer shapes for [`DenseNetwork::init`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Architecture {
    /// Widths from input to output, at least two entries.
    pub widths: Vec<usize>,
    /// One activation per layer (`widths.len() - 1` entries).
    pub activations: Vec<Activation>,
    pub bias: bool,
}

impl Architecture {
    /// Relu everywhere except an identity output layer.
    pub fn relu_mlp(widths: &[usize], bias: bool) -> Self {
        let layers = widths.len().saturating_sub(1);
        let activations = (0..layers)
            .map(|l| {
                if l + 1 == layers {
                    Activation::Identity
                } else {
                    Activation::Relu
                }
            })
            .collect();
        Self {
            widths: widths.to_vec(),
            activations,
            bias,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 || self.widths.contains(&0) {
            return Err(Error::InvalidParameter(format!(
                "network widths must have >= 2 positive entries, got {:?}",
                self.widths
            )));
        }
        if self.activations.len() != self.widths.len() - 1 {
            return Err(Error::InvalidParameter(format!(
                "{} layers need {} activations, got {}",
                self.widths.len() - 1,
                self.widths.len() - 1,
                self.activations.len()
            )));
        }
        Ok(())
    }
}

/// Per-layer values kept from a forward pass for backpropagation.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache<T> {
    /// `inputs[l]` is the input of layer `l`; the last entry is the network output.
    pub inputs: Vec<Vec<T>>,
    pub pre: Vec<Vec<T>>,
}

impl<T> ForwardCache<T> {
    pub fn output(&self) -> &[T] {
        self.inputs.last().map_or(&[], Vec::as_slice)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork<T> {
    layers: Vec<Layer<T>>,
}

impl<T: Scalar> DenseNetwork<T> {
    pub fn from_layers(layers: Vec<Layer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidParameter("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::DimensionMismatch {
                    expected: pair[0].out_dim,
                    found: pair[1].in_dim,
                });
            }
        }
        for l in &layers {
            if l.weights.len() != l.in_dim * l.out_dim
                || l.bias.as_ref().is_some_and(|b| b.len() != l.out_dim)
            {
                return Err(Error::InvalidParameter("layer parameter shape mismatch".into()));
            }
            if !l.weights.iter().chain(l.bias.iter().flatten()).all(|v| v.is_finite()) {
                return Err(Error::InvalidParameter("non-finite parameter".into()));
            }
        }
        Ok(Self { layers })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(arch: &Architecture, rng: &mut Rng) -> Result<Self> {
        arch.validate()?;
        let layers = arch
            .widths
            .windows(2)
            .zip(&arch.activations)
            .map(|(w, &activation)| {
                let (i, o) = (w[0], w[1]);
                let limit = (6.0 / (i + o) as f64).sqrt();
                Layer {
                    in_dim: i,
                    out_dim: o,
                    weights: (0..i * o).map(|_| T::of(rng.random_range(-limit..limit))).collect(),
                    bias: arch.bias.then(|| vec![T::zero(); o]),
                    activation,
                }
            })
            .collect();
        Self::from_layers(layers)
    }

    /// Layers of `self` followed by layers of `next`.
    pub fn chain(&self, next: &Self) -> Result<Self> {
        let mut layers = self.layers.clone();
        layers.extend(next.layers.iter().cloned());
        Self::from_layers(layers)
    }

    /// Splits into the first `at` layers and the rest.
    pub fn split(&self, at: usize) -> Result<(Self, Self)> {
        if at == 0 || at >= self.layers.len() {
            return Err(Error::InvalidParameter(format!("cannot split {} layers at {at}", self.layers.len())));
        }
        Ok((
            Self::from_layers(self.layers[..at].to_vec())?,
            Self::from_layers(self.layers[at..].to_vec())?,
        ))
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").out_dim
    }

    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.out_dim))
            .collect()
    }

    pub fn has_bias(&self) -> bool {
        self.layers.iter().any(|l| l.bias.is_some())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Flattened parameters: per layer, weights then bias.
    pub fn params(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            if let Some(b) = &l.bias {
                out.extend_from_slice(b);
            }
        }
        out
    }

    pub fn set_params(&mut self, params: &[T]) {
        assert_eq!(params.len(), self.param_count(), "parameter vector length");
        let mut at = 0;
        for l in &mut self.layers {
            let w = l.weights.len();
            l.weights.copy_from_slice(&params[at..at + w]);
            at += w;
            if let Some(b) = &mut l.bias {
                let k = b.len();
                b.copy_from_slice(&params[at..at + k]);
                at += k;
            }
        }
    }

    pub fn squared_norm(&self) -> T {
        self.params().iter().map(|&p| p * p).sum()
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        let mut cur = x.to_vec();
        let mut z = Vec::new();
        for l in &self.layers {
            l.pre_activation(&cur, &mut z);
            cur = z.iter().map(|&v| l.activation.apply(v)).collect();
        }
        cur
    }

    pub fn forward_cached(&self, x: &[T], cache: &mut ForwardCache<T>) {
        cache.inputs.clear();
        cache.pre.clear();
        cache.inputs.push(x.to_vec());
        for l in &self.layers {
            let mut z = Vec::with_capacity(l.out_dim);
            l.pre_activation(cache.inputs.last().expect("input"), &mut z);
            let a = z.iter().map(|&v| l.activation.apply(v)).collect();
            cache.pre.push(z);
            cache.inputs.push(a);
        }
    }

    /// Accumulates into `grad` (flattened like [`Self::params`]) the gradient of a
    /// loss whose derivative with respect to the network output is `d_out`.
    pub fn backward(&self, cache: &ForwardCache<T>, d_out: &[T], grad: &mut [T]) {
        let offsets: Vec<usize> = self
            .layers
            .iter()
            .scan(0, |acc, l| {
                let start = *acc;
                *acc += l.param_count();
                Some(start)
            })
            .collect();
        let mut upstream = d_out.to_vec();
        for (li, l) in self.layers.iter().enumerate().rev() {
            let input = &cache.inputs[li];
            let output = &cache.inputs[li + 1];
            let delta: Vec<T> = (0..l.out_dim)
                .map(|o| upstream[o] * l.activation.derivative(cache.pre[li][o], output[o]))
                .collect();
            let base = offsets[li];
            for o in 0..l.out_dim {
                if delta[o] == T::zero() {
                    continue;
                }
                let g = &mut grad[base + o * l.in_dim..base + (o + 1) * l.in_dim];
                for (gi, &xi) in g.iter_mut().zip(input) {
                    *gi += delta[o] * xi;
                }
            }
            if l.bias.is_some() {
                let b0 = base + l.weights.len();
                for o in 0..l.out_dim {
                    grad[b0 + o] += delta[o];
                }
            }
            if li > 0 {
                let mut next = vec![T::zero(); l.in_dim];
                for o in 0..l.out_dim {
                    if delta[o] == T::zero() {
                        continue;
                    }
                    let row = &l.weights[o * l.in_dim..(o + 1) * l.in_dim];
                    for (n, &w) in next.iter_mut().zip(row) {
                        *n += w * delta[o];
                    }
                }
                upstream = next;
            }
        }
    }

    pub fn cast<U: Scalar>(&self) -> DenseNetwork<U> {
        DenseNetwork {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    in_dim: l.in_dim,
                    out_dim: l.out_dim,
                    weights: l.weights.iter().map(|v| U::of(v.to_f64_lossy())).collect(),
                    bias: l
                        .bias
                        .as_ref()
                        .map(|b| b.iter().map(|v| U::of(v.to_f64_lossy())).collect()),
                    activation: l.activation,
                })
                .collect(),
        }
    }
}

/// Mean over `inputs` of the squared distance between the output and its target,
/// plus `lambda * ||theta||^2`, together with the gradient.
pub fn objective_and_gradient<T: Scalar>(
    net: &DenseNetwork<T>,
    inputs: &[&[T]],
    target: &Target<'_, T>,
    lambda: T,
) -> (T, Vec<T>) {
    let mut grad = vec![T::zero(); net.param_count()];
    let mut cache = ForwardCache::default();
    let mut total = T::zero();
    let scale = T::of(2.0) / T::of_usize(inputs.len().max(1));
    let mut d_out = Vec::new();
    for &x in inputs {
        net.forward_cached(x, &mut cache);
        let t = target.for_input(x);
        d_out.clear();
        for (&o, &ti) in cache.output().iter().zip(t) {
            let r = o - ti;
            total += r * r;
            d_out.push(scale * r);
        }
        net.backward(&cache, &d_out, &mut grad);
    }
    let params = net.params();
    let two_lambda = T::of(2.0) * lambda;
    for (g, &p) in grad.iter_mut().zip(&params) {
        *g += two_lambda * p;
    }
    let reg = lambda * params.iter().map(|&p| p * p).sum::<T>();
    (total / T::of_usize(inputs.len().max(1)) + reg, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    #[test]
    fn shapes_and_params_round_trip() {
        let arch = Architecture::relu_mlp(&[4, 3, 2], true);
        let mut net: DenseNetwork<f64> = DenseNetwork::init(&arch, &mut rng_from(1)).unwrap();
        assert_eq!(net.param_count(), 4 * 3 + 3 + 3 * 2 + 2);
        assert_eq!(net.widths(), vec![4, 3, 2]);
        let p: Vec<f64> = (0..net.param_count()).map(|i| i as f64 * 0.01).collect();
        net.set_params(&p);
        assert_eq!(net.params(), p);
        let (a, b) = net.split(1).unwrap();
        assert_eq!(a.chain(&b).unwrap(), net);
    }

    #[test]
    fn rejects_mismatched_layers() {
        let l = |i, o| Layer::<f64> {
            in_dim: i,
            out_dim: o,
            weights: vec![0.0; i * o],
            bias: None,
            activation: Activation::Identity,
        };
        assert!(DenseNetwork::from_layers(vec![l(2, 3), l(4, 1)]).is_err());
        assert!(DenseNetwork::<f64>::from_layers(vec![]).is_err());
        assert!(Architecture::relu_mlp(&[3], false).validate().is_err());
    }

    #[test]
    fn forward_matches_hand_computation() {
        let net = DenseNetwork::from_layers(vec![Layer {
            in_dim: 2,
            out_dim: 2,
            weights: vec![1.0, -1.0, 0.5, 2.0],
            bias: Some(vec![0.0, -10.0]),
            activation: Activation::Relu,
        }])
        .unwrap();
        assert_eq!(net.forward(&[3.0, 1.0]), vec![2.0, 0.0]);
    }
}
