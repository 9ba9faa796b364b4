use rand::Rng as _;

use crate::dataset::AttributedDataset;
use crate::error::{Error, Result};
use crate::nn::DenseNetwork;
use crate::rng::stream;
use crate::scalar::{sq_dist, Scalar};

const MAX_ITER: usize = 300;
const TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit<T> {
    /// `k x dim`, row-major.
    pub centroids: Vec<T>,
    pub assignment: Vec<usize>,
    pub iterations: usize,
}

fn nearest<T: Scalar>(x: &[T], centroids: &[T], dim: usize) -> (usize, T) {
    centroids
        .chunks(dim)
        .enumerate()
        .map(|(k, c)| (k, sq_dist(x, c)))
        .fold((0, T::infinity()), |best, cur| if cur.1 < best.1 { cur } else { best })
}

/// Lloyd iterations from a seeded farthest-point start. Empty clusters are
/// re-seeded with the point farthest from its current centroid.
pub fn kmeans<T: Scalar>(points: &[T], dim: usize, k: usize, seed: u64) -> Result<KMeansFit<T>> {
    let n = points.len().checked_div(dim).unwrap_or(0);
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("K must lie in 1..={n}, got {k}")));
    }
    let row = |i: usize| &points[i * dim..(i + 1) * dim];

    let first = stream(seed, "kmeans/init").random_range(0..n);
    let mut centroids = row(first).to_vec();
    let mut closest: Vec<T> = (0..n).map(|i| sq_dist(row(i), row(first))).collect();
    for _ in 1..k {
        let far = (0..n).fold(0, |b, i| if closest[i] > closest[b] { i } else { b });
        centroids.extend_from_slice(row(far));
        let c = row(far);
        for (i, slot) in closest.iter_mut().enumerate() {
            *slot = slot.min(sq_dist(row(i), c));
        }
    }

    let mut assignment = vec![0; n];
    let mut iterations = 0;
    while iterations < MAX_ITER {
        iterations += 1;
        let mut dist = vec![T::zero(); n];
        for i in 0..n {
            let (c, d2) = nearest(row(i), &centroids, dim);
            assignment[i] = c;
            dist[i] = d2;
        }
        let mut sums = vec![T::zero(); k * dim];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[assignment[i]] += 1;
            for (s, &v) in sums[assignment[i] * dim..].iter_mut().zip(row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n).fold(0, |b, i| if dist[i] > dist[b] { i } else { b });
                log::debug!("k-means cluster {c} emptied; re-seeding from row {far}");
                sums[c * dim..(c + 1) * dim].copy_from_slice(row(far));
                counts[c] = 1;
                dist[far] = T::zero();
            } else {
                let m = T::of_usize(counts[c]);
                sums[c * dim..(c + 1) * dim].iter_mut().for_each(|s| *s /= m);
            }
        }
        let shift = centroids
            .chunks(dim)
            .zip(sums.chunks(dim))
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(T::zero(), T::max);
        centroids = sums;
        if shift.to_f64_lossy() <= TOLERANCE {
            break;
        }
    }
    for i in 0..n {
        assignment[i] = nearest(row(i), &centroids, dim).0;
    }
    Ok(KMeansFit {
        centroids,
        assignment,
        iterations,
    })
}

/// Squared distance to the nearest centroid over the largest such distance in
/// that cluster. Points are the raw features unless `embed` is given.
pub fn cluster_ad_scores<T: Scalar>(
    ds: &AttributedDataset<T>,
    k: usize,
    embed: Option<&DenseNetwork<T>>,
    seed: u64,
) -> Result<Vec<T>> {
    let (points, dim) = match embed {
        Some(net) => {
            if net.input_dim() != ds.d() {
                return Err(Error::DimensionMismatch {
                    expected: ds.d(),
                    found: net.input_dim(),
                });
            }
            (ds.rows().flat_map(|x| net.forward(x)).collect::<Vec<_>>(), net.output_dim())
        }
        None => (ds.features().to_vec(), ds.d()),
    };
    let fit = kmeans(&points, dim, k, seed)?;
    let d2: Vec<T> = (0..ds.n())
        .map(|i| sq_dist(&points[i * dim..(i + 1) * dim], &fit.centroids[fit.assignment[i] * dim..][..dim]))
        .collect();
    let mut max = vec![T::zero(); k];
    for (i, &v) in d2.iter().enumerate() {
        max[fit.assignment[i]] = max[fit.assignment[i]].max(v);
    }
    Ok(d2
        .iter()
        .zip(&fit.assignment)
        .map(|(&v, &c)| if max[c] > T::zero() { v / max[c] } else { T::zero() })
        .collect())
}
