use crate::dataset::AttributedDataset;
use crate::error::{Error, Result};
use crate::nn::{fit, Architecture, DenseNetwork, Target, TrainConfig, TrainReport};
use crate::rng::stream;
use crate::scalar::{sq_dist, Scalar};

/// Bias-free `d -> 32 -> out` map with a relu hidden layer.
pub fn default_one_class_arch(d: usize) -> Architecture {
    Architecture::relu_mlp(&[d, 32, 8.min(d).max(1)], false)
}

/// Network plus the fixed center its embeddings are pulled toward.
#[derive(Debug, Clone, PartialEq)]
pub struct OneClassModel<T> {
    pub net: DenseNetwork<T>,
    pub center: Vec<T>,
}

impl<T: Scalar> OneClassModel<T> {
    pub fn new(net: DenseNetwork<T>, center: Vec<T>) -> Result<Self> {
        if center.len() != net.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: net.output_dim(),
                found: center.len(),
            });
        }
        Ok(Self { net, center })
    }
}

/// Fixes the center at the mean initial embedding, then pulls embeddings toward it.
pub fn train_one_class<T: Scalar>(
    ds: &AttributedDataset<T>,
    arch: &Architecture,
    cfg: &TrainConfig,
) -> Result<(OneClassModel<T>, TrainReport)> {
    if arch.bias {
        return Err(Error::InvalidParameter("one-class networks must be bias-free".into()));
    }
    if arch.widths.first() != Some(&ds.d()) {
        return Err(Error::DimensionMismatch {
            expected: ds.d(),
            found: arch.widths.first().copied().unwrap_or(0),
        });
    }
    let mut net = DenseNetwork::init(arch, &mut stream(cfg.seed, "svdd/init"))?;
    let mut center = vec![T::zero(); net.output_dim()];
    for x in ds.rows() {
        for (c, e) in center.iter_mut().zip(net.forward(x)) {
            *c += e;
        }
    }
    let n = T::of_usize(ds.n());
    center.iter_mut().for_each(|c| *c /= n);
    let norm = center.iter().map(|&c| c * c).sum::<T>().sqrt();
    if norm.to_f64_lossy() < 1e-6 {
        log::warn!(
            "one-class center is within 1e-6 of the origin; the network may collapse to a constant map"
        );
    }
    let report = fit(&mut net, ds.features(), Target::Fixed(&center), cfg)?;
    Ok((OneClassModel { net, center }, report))
}

/// Squared distance of each embedding to the center.
pub fn score_one_class<T: Scalar>(model: &OneClassModel<T>, ds: &AttributedDataset<T>) -> Result<Vec<T>> {
    if ds.d() != model.net.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.net.input_dim(),
            found: ds.d(),
        });
    }
    Ok(ds.rows().map(|x| sq_dist(&model.net.forward(x), &model.center)).collect())
}
