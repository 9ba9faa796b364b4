use rand::seq::index::sample;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::AttributedDataset;
use crate::error::{Error, Result};
use crate::rng::{derive_index, rng_from, Rng};
use crate::scalar::Scalar;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IForestParams {
    pub n_trees: usize,
    /// Subsample size; `None` means `min(256, n)`.
    pub subsample: Option<usize>,
}

impl Default for IForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            subsample: None,
        }
    }
}

/// Mean unsuccessful-search path length in a binary search tree of `m` items.
pub fn average_path_length(m: usize) -> f64 {
    match m {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let m1 = (m - 1) as f64;
            2.0 * (m1.ln() + EULER_GAMMA) - 2.0 * m1 / m as f64
        }
    }
}

enum Node<T> {
    Leaf(usize),
    Split {
        dim: usize,
        at: T,
        left: Box<Node<T>>,
        right: Box<Node<T>>,
    },
}

fn build<T: Scalar>(ds: &AttributedDataset<T>, idx: Vec<usize>, depth: usize, limit: usize, rng: &mut Rng) -> Node<T> {
    if depth >= limit || idx.len() <= 1 {
        return Node::Leaf(idx.len());
    }
    let ranges: Vec<(usize, T, T)> = (0..ds.d())
        .filter_map(|j| {
            let (lo, hi) = idx.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &i| {
                let v = ds.row(i)[j];
                (lo.min(v), hi.max(v))
            });
            (hi > lo).then_some((j, lo, hi))
        })
        .collect();
    if ranges.is_empty() {
        return Node::Leaf(idx.len());
    }
    let (dim, lo, hi) = ranges[rng.random_range(0..ranges.len())];
    let u = T::of(rng.random::<f64>());
    let at = (lo + u * (hi - lo)).max(lo);
    let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| ds.row(i)[dim] < at);
    if l.is_empty() || r.is_empty() {
        let size = l.len() + r.len();
        return Node::Leaf(size);
    }
    Node::Split {
        dim,
        at,
        left: Box::new(build(ds, l, depth + 1, limit, rng)),
        right: Box::new(build(ds, r, depth + 1, limit, rng)),
    }
}

fn path_length<T: Scalar>(node: &Node<T>, x: &[T]) -> f64 {
    let mut node = node;
    let mut depth = 0.0;
    loop {
        match node {
            Node::Leaf(size) => return depth + average_path_length(*size),
            Node::Split { dim, at, left, right } => {
                node = if x[*dim] < *at { left } else { right };
                depth += 1.0;
            }
        }
    }
}

/// Isolation-forest anomaly scores `2^(-E[h]/c(psi))`, all in (0, 1).
pub fn iforest_scores<T: Scalar>(ds: &AttributedDataset<T>, params: &IForestParams, seed: u64) -> Result<Vec<T>> {
    if params.n_trees == 0 {
        return Err(Error::InvalidParameter("isolation forest needs at least one tree".into()));
    }
    let n = ds.n();
    let mut psi = params.subsample.unwrap_or(256.min(n));
    if psi < 2 {
        return Err(Error::InvalidParameter(format!("subsample size must be >= 2, got {psi}")));
    }
    if psi > n {
        log::warn!("subsample size {psi} exceeds n = {n}; clamping to {n}");
        psi = n;
    }
    let limit = (psi as f64).log2().ceil() as usize;
    let trees: Vec<Node<T>> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from(derive_index(seed, t as u64));
            let idx = sample(&mut rng, n, psi).into_vec();
            build(ds, idx, 0, limit, &mut rng)
        })
        .collect();
    let c = average_path_length(psi);
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let x = ds.row(i);
            let mean_h = trees.iter().map(|t| path_length(t, x)).sum::<f64>() / trees.len() as f64;
            T::of(2f64.powf(-mean_h / c))
        })
        .collect())
}
