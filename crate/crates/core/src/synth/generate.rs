use rand::Rng as _;
use rand_distr::StandardNormal;

use super::{OutlierMode, SynthSpec, GROUP_TAG};
use crate::dataset::AttributedDataset;
use crate::error::{Error, Result};
use crate::rng::{stream, Rng};
use crate::scalar::Scalar;

/// Distance of the proxy-coordinate group means from the origin, per proxy feature.
const PROXY_OFFSET: f64 = 2.0;
/// Standard deviation of the latent factors spanning the inlier manifold.
const MANIFOLD_SCALE: f64 = 2.0;
/// Isotropic inlier noise off the manifold.
const OFF_MANIFOLD_NOISE: f64 = 0.1;
/// Clustered outliers sit this far from their group's inlier mean ...
const CLUSTER_OFFSET: f64 = 6.0;
/// ... with this spread.
const CLUSTER_SPREAD: f64 = 0.2;
/// Scattered outliers are uniform in a box of this half-width around the group mean ...
const SCATTER_HALF_WIDTH: f64 = 5.0;
/// ... excluding balls of this radius around both inlier means.
const SCATTER_EXCLUSION: f64 = 3.0;

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n_per_group < 10 {
            return bad(format!("n_per_group must be >= 10, got {}", self.n_per_group));
        }
        if !(self.base_rate > 0.0 && self.base_rate < 0.5) {
            return bad(format!("base_rate must lie in (0, 0.5), got {}", self.base_rate));
        }
        if self.proxy_dims.is_empty() {
            return bad("at least one proxy dimension is required".into());
        }
        if let Some(&k) = self.proxy_dims.iter().find(|&&k| k >= self.d) {
            return bad(format!("proxy dim {k} out of range for d={}", self.d));
        }
        if self.d <= self.proxy_dims.len() {
            return bad("at least one non-proxy dimension is required".into());
        }
        Ok(())
    }

    /// Outliers per group.
    pub fn outliers_per_group(&self) -> usize {
        (self.base_rate * self.n_per_group as f64).round() as usize
    }
}

fn gaussian_vec(rng: &mut Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Random unit vector orthogonal to every vector in `basis` (assumed orthonormal).
fn orthogonal_unit(rng: &mut Rng, len: usize, basis: &[Vec<f64>]) -> Vec<f64> {
    loop {
        let mut v = gaussian_vec(rng, len);
        for b in basis {
            let p = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            return v;
        }
    }
}

/// Generates the unbiased two-group population.
///
/// Rows are ordered group `a` then group `b`; within each group inliers come first.
/// Inliers lie near a low-rank manifold in the non-proxy features and are separated
/// by group along the proxy features. Clustered outliers form one tight Gaussian per
/// group, displaced off the manifold; scattered outliers are uniform in a box.
pub fn generate<T: Scalar>(spec: &SynthSpec) -> Result<AttributedDataset<T>> {
    spec.validate()?;
    let d = spec.d;
    let free: Vec<usize> = (0..d).filter(|k| !spec.proxy_dims.contains(k)).collect();
    let m = free.len();
    let rank = spec.manifold_rank.min(m - 1);

    let mut geometry = stream(spec.seed, "synth/geometry");
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(rank + 2);
    for _ in 0..rank {
        let v = orthogonal_unit(&mut geometry, m, &basis);
        basis.push(v);
    }
    let mut directions = Vec::with_capacity(2);
    for _ in 0..2 {
        let v = orthogonal_unit(&mut geometry, m, &basis);
        if basis.len() + 1 < m {
            basis.push(v.clone());
        }
        directions.push(v);
    }

    let group_mean = |b: bool| -> Vec<f64> {
        let sign = if b { 1.0 } else { -1.0 };
        (0..d)
            .map(|k| {
                if spec.proxy_dims.contains(&k) {
                    sign * PROXY_OFFSET
                } else {
                    0.0
                }
            })
            .collect()
    };
    let means = [group_mean(false), group_mean(true)];
    let n_out = spec.outliers_per_group();
    let n_in = spec.n_per_group - n_out;

    let total = 2 * spec.n_per_group;
    let mut features = Vec::with_capacity(total * d);
    let mut tag = Vec::with_capacity(total);
    let mut truth = Vec::with_capacity(total);
    for (g, mean) in means.iter().enumerate() {
        let mut rng = stream(spec.seed, if g == 0 { "synth/group_a" } else { "synth/group_b" });
        for _ in 0..n_in {
            let z = gaussian_vec(&mut rng, rank);
            let mut x = mean.clone();
            for (fi, &k) in free.iter().enumerate() {
                x[k] += MANIFOLD_SCALE * (0..rank).map(|r| basis[r][fi] * z[r]).sum::<f64>();
            }
            for &k in &spec.proxy_dims {
                x[k] += rng.sample::<f64, _>(StandardNormal);
            }
            for &k in &free {
                x[k] += OFF_MANIFOLD_NOISE * rng.sample::<f64, _>(StandardNormal);
            }
            features.extend(x.into_iter().map(T::of));
        }
        for _ in 0..n_out {
            let x: Vec<f64> = match spec.outlier_mode {
                OutlierMode::Clustered => {
                    let mut x = mean.clone();
                    for (fi, &k) in free.iter().enumerate() {
                        x[k] += CLUSTER_OFFSET * directions[g][fi];
                    }
                    for v in x.iter_mut() {
                        *v += CLUSTER_SPREAD * rng.sample::<f64, _>(StandardNormal);
                    }
                    x
                }
                OutlierMode::Scattered => loop {
                    let x: Vec<f64> = mean
                        .iter()
                        .map(|&c| c + rng.random_range(-SCATTER_HALF_WIDTH..SCATTER_HALF_WIDTH))
                        .collect();
                    let far = means.iter().all(|mu| {
                        x.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
                            >= SCATTER_EXCLUSION
                    });
                    if far {
                        break x;
                    }
                },
            };
            features.extend(x.into_iter().map(T::of));
        }
        tag.extend(std::iter::repeat_n(g == 1, spec.n_per_group));
        truth.extend(std::iter::repeat_n(false, n_in));
        truth.extend(std::iter::repeat_n(true, n_out));
    }

    let id = format!(
        "synthetic-{}-{}",
        match spec.outlier_mode {
            OutlierMode::Clustered => "clustered",
            OutlierMode::Scattered => "scattered",
        },
        spec.seed
    );
    AttributedDataset::new(id, total, d, features)?
        .with_tag(GROUP_TAG, tag)?
        .with_outlier_truth(truth)?
        .with_proxy_dims(spec.proxy_dims.clone())
}
