use rand::seq::index::sample;
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::{exact_count, BiasKind, BiasSpec, GROUP_TAG};
use crate::dataset::AttributedDataset;
use crate::error::{Error, Result};
use crate::rng::stream;
use crate::scalar::Scalar;

fn check_beta(name: &str, beta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&beta) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must lie in [0, 1], got {beta}")))
    }
}

fn group_b<T: Scalar>(ds: &AttributedDataset<T>) -> Result<&[bool]> {
    ds.tag(GROUP_TAG).ok_or_else(|| Error::UnknownTag(GROUP_TAG.into()))
}

/// Removes `floor(beta * |candidates|)` of the candidate rows, chosen uniformly.
fn drop_rows<T: Scalar>(
    ds: &AttributedDataset<T>,
    candidates: &[usize],
    beta: f64,
    seed: u64,
    label: &str,
) -> Result<AttributedDataset<T>> {
    let k = exact_count(beta, candidates.len());
    if k == 0 {
        return Ok(ds.clone());
    }
    let mut rng = stream(seed, label);
    let mut dropped = vec![false; ds.n()];
    for pos in sample(&mut rng, candidates.len(), k) {
        dropped[candidates[pos]] = true;
    }
    let keep: Vec<usize> = (0..ds.n()).filter(|&i| !dropped[i]).collect();
    ds.select_rows(&keep)
}

/// Group sample size bias: drops a fraction `beta_s` of group `b`.
pub fn inject_sample_size<T: Scalar>(
    ds: &AttributedDataset<T>,
    beta_s: f64,
    seed: u64,
) -> Result<AttributedDataset<T>> {
    check_beta("beta_s", beta_s)?;
    let tag = group_b(ds)?;
    let members: Vec<usize> = (0..ds.n()).filter(|&i| tag[i]).collect();
    drop_rows(ds, &members, beta_s, seed, "inject/sample_size")
}

/// Target under-representation bias: drops a fraction `beta_u` of group `b`'s outliers.
pub fn inject_under_representation<T: Scalar>(
    ds: &AttributedDataset<T>,
    beta_u: f64,
    seed: u64,
) -> Result<AttributedDataset<T>> {
    check_beta("beta_u", beta_u)?;
    let y = ds.outlier_truth().ok_or(Error::MissingOutlierTruth)?;
    let tag = group_b(ds)?;
    let targets: Vec<usize> = (0..ds.n()).filter(|&i| tag[i] && y[i]).collect();
    drop_rows(ds, &targets, beta_u, seed, "inject/under_representation")
}

/// Feature measurement bias on group `b`'s non-proxy features: Gaussian noise with
/// standard deviation `beta_v * sigma_j` plus a shift of `beta_m * sigma_j`, where
/// `sigma_j` is the sample standard deviation of feature `j` in the input.
pub fn inject_measurement<T: Scalar>(
    ds: &AttributedDataset<T>,
    beta_v: f64,
    beta_m: f64,
    seed: u64,
) -> Result<AttributedDataset<T>> {
    check_beta("beta_v", beta_v)?;
    check_beta("beta_m", beta_m)?;
    let tag = group_b(ds)?;
    if beta_v == 0.0 && beta_m == 0.0 {
        return Ok(ds.clone());
    }
    let n = ds.n();
    let d = ds.d();
    let sigma: Vec<f64> = (0..d)
        .map(|j| {
            let mean = ds.rows().map(|r| r[j].to_f64_lossy()).sum::<f64>() / n as f64;
            let ss = ds
                .rows()
                .map(|r| (r[j].to_f64_lossy() - mean).powi(2))
                .sum::<f64>();
            (ss / (n.max(2) - 1) as f64).sqrt()
        })
        .collect();
    let measured: Vec<usize> = (0..d)
        .filter(|j| ds.proxy_dims().is_none_or(|p| !p.contains(j)))
        .collect();

    let mut rng = stream(seed, "inject/measurement");
    let mut features = ds.features().to_vec();
    for i in (0..n).filter(|&i| tag[i]) {
        for &j in &measured {
            let noise = if beta_v > 0.0 {
                beta_v * sigma[j] * rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
            let x = &mut features[i * d + j];
            *x += T::of(beta_m * sigma[j] + noise);
        }
    }
    ds.with_features(features)
}

/// Membership obfuscation bias: a fraction `beta_g` of group `b` rows get every
/// proxy feature redrawn uniformly over the pooled observed range of that feature.
pub fn inject_obfuscation<T: Scalar>(
    ds: &AttributedDataset<T>,
    beta_g: f64,
    seed: u64,
) -> Result<AttributedDataset<T>> {
    check_beta("beta_g", beta_g)?;
    let tag = group_b(ds)?;
    let proxies: Vec<usize> = match ds.proxy_dims() {
        Some(p) if !p.is_empty() => p.iter().copied().collect(),
        _ => return Err(Error::NoProxyDims),
    };
    let members: Vec<usize> = (0..ds.n()).filter(|&i| tag[i]).collect();
    let k = exact_count(beta_g, members.len());
    if k == 0 {
        return Ok(ds.clone());
    }
    let range: Vec<(f64, f64)> = proxies
        .iter()
        .map(|&j| {
            ds.rows()
                .map(|r| r[j].to_f64_lossy())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
        })
        .collect();

    let mut rng = stream(seed, "inject/obfuscation");
    let mut chosen: Vec<usize> = sample(&mut rng, members.len(), k)
        .into_iter()
        .map(|p| members[p])
        .collect();
    chosen.sort_unstable();
    let d = ds.d();
    let mut features = ds.features().to_vec();
    for i in chosen {
        for (&j, &(lo, hi)) in proxies.iter().zip(&range) {
            features[i * d + j] = T::of(rng.random_range(lo..=hi));
        }
    }
    ds.with_features(features)
}

/// Applies the bias described by `bias`.
pub fn inject<T: Scalar>(ds: &AttributedDataset<T>, bias: &BiasSpec) -> Result<AttributedDataset<T>> {
    match bias.kind {
        BiasKind::SampleSize => inject_sample_size(ds, bias.beta, bias.seed),
        BiasKind::UnderRepresentation => inject_under_representation(ds, bias.beta, bias.seed),
        BiasKind::MeasurementVariance => inject_measurement(ds, bias.beta, 0.0, bias.seed),
        BiasKind::MeasurementShift => inject_measurement(ds, 0.0, bias.beta, bias.seed),
        BiasKind::Obfuscation => inject_obfuscation(ds, bias.beta, bias.seed),
    }
}
