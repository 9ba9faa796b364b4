use serde::{Deserialize, Serialize};

use crate::dataset::AttributedDataset;
use crate::error::{Error, Result};
use crate::nn::{fit, Activation, Architecture, DenseNetwork, Target, TrainConfig, TrainReport};
use crate::rng::stream;
use crate::scalar::{sq_dist, Scalar};

/// Encoder widths from input to latent; the decoder mirrors them.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AutoencoderArch {
    pub encoder: Vec<usize>,
    pub hidden: Activation,
    pub latent: Activation,
    pub output: Activation,
    pub bias: bool,
}

impl AutoencoderArch {
    /// `d -> 32 -> latent -> 32 -> d`, relu hidden layers and linear latent/output.
    pub fn desk(d: usize, latent: usize) -> Self {
        Self {
            encoder: vec![d, 32, latent],
            hidden: Activation::Relu,
            latent: Activation::Identity,
            output: Activation::Identity,
            bias: true,
        }
    }

    /// Desk architecture with latent width `min(8, d - 1)`.
    pub fn default_for(d: usize) -> Self {
        Self::desk(d, 8.min(d.saturating_sub(1)).max(1))
    }

    /// Single linear map in and out.
    pub fn linear(d: usize, latent: usize) -> Self {
        Self {
            encoder: vec![d, latent],
            hidden: Activation::Identity,
            latent: Activation::Identity,
            output: Activation::Identity,
            bias: true,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.first().copied().unwrap_or(0)
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.last().copied().unwrap_or(0)
    }

    fn full(&self) -> Architecture {
        let e = self.encoder.len() - 1;
        let widths: Vec<usize> = self
            .encoder
            .iter()
            .chain(self.encoder.iter().rev().skip(1))
            .copied()
            .collect();
        let activations = (0..2 * e)
            .map(|l| match l {
                l if l + 1 == e => self.latent,
                l if l + 1 == 2 * e => self.output,
                _ => self.hidden,
            })
            .collect();
        Architecture {
            widths,
            activations,
            bias: self.bias,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder<T> {
    pub encoder: DenseNetwork<T>,
    pub decoder: DenseNetwork<T>,
}

impl<T: Scalar> Autoencoder<T> {
    pub fn new(encoder: DenseNetwork<T>, decoder: DenseNetwork<T>) -> Result<Self> {
        if encoder.output_dim() != decoder.input_dim() || decoder.output_dim() != encoder.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: encoder.input_dim(),
                found: decoder.output_dim(),
            });
        }
        Ok(Self { encoder, decoder })
    }

    pub fn reconstruct(&self, x: &[T]) -> Vec<T> {
        self.decoder.forward(&self.encoder.forward(x))
    }

    /// Row-major reconstruction of every row.
    pub fn reconstruction(&self, ds: &AttributedDataset<T>) -> Result<Vec<T>> {
        self.check(ds)?;
        Ok(ds.rows().flat_map(|x| self.reconstruct(x)).collect())
    }

    fn check(&self, ds: &AttributedDataset<T>) -> Result<()> {
        if ds.d() != self.encoder.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.encoder.input_dim(),
                found: ds.d(),
            });
        }
        Ok(())
    }
}

/// Trains encoder and decoder jointly on mean squared reconstruction error.
pub fn train_autoencoder<T: Scalar>(
    ds: &AttributedDataset<T>,
    arch: &AutoencoderArch,
    cfg: &TrainConfig,
) -> Result<(Autoencoder<T>, TrainReport)> {
    if arch.encoder.len() < 2 {
        return Err(Error::InvalidParameter("encoder needs at least input and latent widths".into()));
    }
    if arch.input_dim() != ds.d() {
        return Err(Error::DimensionMismatch {
            expected: ds.d(),
            found: arch.input_dim(),
        });
    }
    if arch.latent_dim() >= ds.d() {
        return Err(Error::InvalidParameter(format!(
            "latent width {} must be below the input width {}",
            arch.latent_dim(),
            ds.d()
        )));
    }
    let mut net = DenseNetwork::init(&arch.full(), &mut stream(cfg.seed, "ae/init"))?;
    let report = fit(&mut net, ds.features(), Target::Input, cfg)?;
    let (encoder, decoder) = net.split(arch.encoder.len() - 1)?;
    Ok((Autoencoder { encoder, decoder }, report))
}

/// Squared reconstruction error per row.
pub fn score_autoencoder<T: Scalar>(model: &Autoencoder<T>, ds: &AttributedDataset<T>) -> Result<Vec<T>> {
    model.check(ds)?;
    Ok(ds.rows().map(|x| sq_dist(x, &model.reconstruct(x))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Layer;
    use crate::rng::rng_from;
    use rand::Rng as _;

    fn random_ds(n: usize, d: usize, seed: u64) -> AttributedDataset<f64> {
        let mut rng = rng_from(seed);
        let f = (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect();
        AttributedDataset::new("r", n, d, f).unwrap()
    }

    fn naive_forward(layers: &[Layer<f64>], x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        for l in layers {
            let mut next = vec![0.0; l.out_dim];
            for (o, slot) in next.iter_mut().enumerate() {
                let mut s = 0.0;
                for i in 0..l.in_dim {
                    s += l.weights[o * l.in_dim + i] * cur[i];
                }
                if let Some(b) = &l.bias {
                    s += b[o];
                }
                *slot = match l.activation {
                    Activation::Identity => s,
                    Activation::Relu => if s > 0.0 { s } else { 0.0 },
                    Activation::Sigmoid => 1.0 / (1.0 + (-s).exp()),
                };
            }
            cur = next;
        }
        cur
    }

    #[test]
    fn architecture_mirrors_encoder() {
        let a = AutoencoderArch::default_for(10).full();
        assert_eq!(a.widths, vec![10, 32, 8, 32, 10]);
        assert_eq!(
            a.activations,
            vec![Activation::Relu, Activation::Identity, Activation::Relu, Activation::Identity]
        );
        assert_eq!(AutoencoderArch::default_for(4).latent_dim(), 3);
    }

    #[test]
    fn latent_must_compress() {
        let ds = random_ds(20, 3, 0);
        let cfg = TrainConfig::default();
        assert!(train_autoencoder(&ds, &AutoencoderArch::linear(3, 3), &cfg).is_err());
        assert!(train_autoencoder(&ds, &AutoencoderArch::linear(4, 2), &cfg).is_err());
    }

    #[test]
    fn scores_match_naive_forward() {
        let ds = random_ds(25, 5, 1);
        let cfg = TrainConfig { epochs: 2, ..TrainConfig::default() };
        let (ae, _) = train_autoencoder(&ds, &AutoencoderArch::desk(5, 2), &cfg).unwrap();
        let scores = score_autoencoder(&ae, &ds).unwrap();
        let layers: Vec<Layer<f64>> =
            ae.encoder.layers().iter().chain(ae.decoder.layers()).cloned().collect();
        for (x, s) in ds.rows().zip(&scores) {
            let r = naive_forward(&layers, x);
            let expected: f64 = x.iter().zip(&r).map(|(a, b)| (a - b) * (a - b)).sum();
            assert!((expected - s).abs() <= 1e-10 * expected.max(1.0));
        }
    }

    #[test]
    fn zero_decoder_scores_squared_norm() {
        let ds = random_ds(6, 3, 2);
        let cfg = TrainConfig { epochs: 0, ..TrainConfig::default() };
        let (mut ae, _) = train_autoencoder(&ds, &AutoencoderArch::linear(3, 1), &cfg).unwrap();
        let zeros = vec![0.0; ae.decoder.param_count()];
        ae.decoder.set_params(&zeros);
        for (x, s) in ds.rows().zip(score_autoencoder(&ae, &ds).unwrap()) {
            assert_eq!(s, x.iter().map(|v| v * v).sum::<f64>());
        }
    }

    #[test]
    fn exact_decoder_scores_zero() {
        let enc = DenseNetwork::from_layers(vec![Layer {
            in_dim: 2,
            out_dim: 1,
            weights: vec![1.0, 0.0],
            bias: None,
            activation: Activation::Identity,
        }])
        .unwrap();
        let dec = DenseNetwork::from_layers(vec![Layer {
            in_dim: 1,
            out_dim: 2,
            weights: vec![1.0, 0.0],
            bias: None,
            activation: Activation::Identity,
        }])
        .unwrap();
        let ae = Autoencoder::new(enc, dec).unwrap();
        let ds = AttributedDataset::from_rows("x", &[vec![3.0, 0.0], vec![-1.5, 0.0]]).unwrap();
        assert_eq!(score_autoencoder(&ae, &ds).unwrap(), vec![0.0, 0.0]);
        assert!(score_autoencoder(&ae, &random_ds(3, 3, 0)).is_err());
    }

    #[test]
    fn same_seed_same_parameters() {
        let ds = random_ds(60, 4, 3);
        let cfg = TrainConfig { epochs: 4, seed: 11, ..TrainConfig::default() };
        let arch = AutoencoderArch::desk(4, 2);
        let (a, _) = train_autoencoder(&ds, &arch, &cfg).unwrap();
        let (b, _) = train_autoencoder(&ds, &arch, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
