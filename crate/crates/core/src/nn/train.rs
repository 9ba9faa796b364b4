use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{objective_and_gradient, DenseNetwork};
use crate::error::{Error, Result};
use crate::rng::stream;
use crate::scalar::Scalar;

/// What each input should be mapped to.
#[derive(Debug, Clone, Copy)]
pub enum Target<'a, T> {
    /// Reconstruct the input.
    Input,
    /// Map every input to the same point.
    Fixed(&'a [T]),
}

impl<'a, T> Target<'a, T> {
    pub fn for_input<'b>(&'b self, x: &'b [T]) -> &'b [T] {
        match self {
            Target::Input => x,
            Target::Fixed(c) => c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 64,
            learning_rate: 1e-3,
            weight_decay: 1e-6,
            patience: 3,
            validation_fraction: 0.2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter("learning_rate must be positive".into()));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidParameter("weight_decay must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::InvalidParameter("validation_fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    /// Epoch (1-based) whose parameters were kept; 0 means the initial ones.
    pub best_epoch: usize,
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
    pub stopped_early: bool,
}

struct Adam<T> {
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Scalar> Adam<T> {
    fn new(n: usize) -> Self {
        Self {
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [T], grad: &[T], lr: T) {
        let (b1, b2, eps) = (T::of(0.9), T::of(0.999), T::of(1e-8));
        self.t += 1;
        let c1 = T::one() - b1.powi(self.t);
        let c2 = T::one() - b2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = b1 * self.m[i] + (T::one() - b1) * grad[i];
            self.v[i] = b2 * self.v[i] + (T::one() - b2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (vh.sqrt() + eps);
        }
    }
}

fn mean_error<T: Scalar>(net: &DenseNetwork<T>, rows: &[&[T]], target: &Target<'_, T>) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let total: f64 = rows
        .iter()
        .map(|&x| {
            let out = net.forward(x);
            out.iter()
                .zip(target.for_input(x))
                .map(|(&o, &t)| (o - t).to_f64_lossy().powi(2))
                .sum::<f64>()
        })
        .sum();
    total / rows.len() as f64
}

/// Mini-batch Adam on squared error plus weight decay. A held-out split drives
/// early stopping and the best parameters seen are restored at the end.
pub fn fit<T: Scalar>(
    net: &mut DenseNetwork<T>,
    data: &[T],
    target: Target<'_, T>,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    let d = net.input_dim();
    if !data.len().is_multiple_of(d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: data.len() % d,
        });
    }
    if let Target::Fixed(c) = target {
        if c.len() != net.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: net.output_dim(),
                found: c.len(),
            });
        }
    }
    let rows: Vec<&[T]> = data.chunks(d).collect();
    if rows.is_empty() {
        return Err(Error::InsufficientRows { needed: 1, found: 0 });
    }

    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.shuffle(&mut stream(cfg.seed, "train/split"));
    let n_val = (rows.len() as f64 * cfg.validation_fraction).round() as usize;
    let (val_idx, train_idx) = if n_val == 0 || n_val >= rows.len() {
        (order.clone(), order)
    } else {
        let (v, t) = order.split_at(n_val);
        (v.to_vec(), t.to_vec())
    };
    let val_rows: Vec<&[T]> = val_idx.iter().map(|&i| rows[i]).collect();
    let mut train_idx = train_idx;

    let mut report = TrainReport::default();
    let mut best = mean_error(net, &val_rows, &target);
    let mut best_params = net.params();
    let mut stale = 0;
    let mut adam = Adam::new(net.param_count());
    let lr = T::of(cfg.learning_rate);
    let lambda = T::of(cfg.weight_decay);
    let mut shuffle_rng = stream(cfg.seed, "train/shuffle");

    for epoch in 1..=cfg.epochs {
        train_idx.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for batch in train_idx.chunks(cfg.batch_size) {
            let inputs: Vec<&[T]> = batch.iter().map(|&i| rows[i]).collect();
            let (loss, grad) = objective_and_gradient(net, &inputs, &target, lambda);
            let loss = loss.to_f64_lossy();
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence { epoch, loss });
            }
            let mut params = net.params();
            adam.step(&mut params, &grad, lr);
            net.set_params(&params);
            epoch_loss += loss;
            batches += 1;
        }
        let val = mean_error(net, &val_rows, &target);
        if !val.is_finite() {
            return Err(Error::Divergence { epoch, loss: val });
        }
        report.epochs_run = epoch;
        report.train_loss.push(epoch_loss / batches.max(1) as f64);
        report.validation_loss.push(val);
        log::debug!("epoch {epoch}: train {:.6e} val {val:.6e}", epoch_loss / batches.max(1) as f64);
        if val < best {
            best = val;
            best_params = net.params();
            report.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                report.stopped_early = true;
                break;
            }
        }
    }
    net.set_params(&best_params);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Architecture};
    use crate::rng::rng_from;
    use rand::Rng as _;

    fn finite_difference_check(seed: u64) -> f64 {
        let mut rng = rng_from(seed);
        let depth = rng.random_range(1..4);
        let mut widths = vec![rng.random_range(2..6)];
        for _ in 0..depth {
            widths.push(rng.random_range(1..6));
        }
        let acts = [Activation::Identity, Activation::Sigmoid, Activation::Relu];
        let arch = Architecture {
            activations: (0..depth).map(|_| acts[rng.random_range(0..3)]).collect(),
            widths: widths.clone(),
            bias: rng.random_bool(0.5),
        };
        let mut net: DenseNetwork<f64> = DenseNetwork::init(&arch, &mut rng).unwrap();
        // random biases keep pre-activations away from the relu kink
        let p: Vec<f64> = (0..net.param_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
        net.set_params(&p);
        let data: Vec<f64> = (0..4 * widths[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
        let inputs: Vec<&[f64]> = data.chunks(widths[0]).collect();
        let out_dim = *widths.last().unwrap();
        let tvec: Vec<f64> = (0..out_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let target = if out_dim == widths[0] && rng.random_bool(0.5) {
            Target::Input
        } else {
            Target::Fixed(&tvec)
        };
        let lambda = 0.01;
        let (_, grad) = objective_and_gradient(&net, &inputs, &target, lambda);
        let base = net.params();
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for i in 0..base.len() {
            let mut probe = net.clone();
            let mut p = base.clone();
            p[i] += h;
            probe.set_params(&p);
            let up = objective_and_gradient(&probe, &inputs, &target, lambda).0;
            p[i] -= 2.0 * h;
            probe.set_params(&p);
            let down = objective_and_gradient(&probe, &inputs, &target, lambda).0;
            let numeric = (up - down) / (2.0 * h);
            let err = (numeric - grad[i]).abs() / numeric.abs().max(grad[i].abs()).max(1e-3);
            worst = worst.max(err);
        }
        worst
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..20 {
            let err = finite_difference_check(seed);
            assert!(err <= 1e-4, "seed {seed}: relative error {err}");
        }
    }

    #[test]
    fn linear_subspace_is_reconstructed() {
        let mut rng = rng_from(3);
        let (n, d, k) = (200, 6, 2);
        let basis: Vec<f64> = (0..d * k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut data = Vec::with_capacity(n * d);
        for _ in 0..n {
            let z: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
            for j in 0..d {
                data.push((0..k).map(|c| basis[j * k + c] * z[c]).sum());
            }
        }
        let arch = Architecture {
            widths: vec![d, 3, d],
            activations: vec![Activation::Identity; 2],
            bias: true,
        };
        let mut net: DenseNetwork<f64> = DenseNetwork::init(&arch, &mut rng).unwrap();
        let cfg = TrainConfig {
            epochs: 3000,
            batch_size: 32,
            learning_rate: 3e-3,
            weight_decay: 0.0,
            patience: 50,
            ..TrainConfig::default()
        };
        let start = std::time::Instant::now();
        fit(&mut net, &data, Target::Input, &cfg).unwrap();
        let rows: Vec<&[f64]> = data.chunks(d).collect();
        let mse = mean_error(&net, &rows, &Target::Input) / d as f64;
        assert!(mse < 1e-6, "mse {mse}");
        assert!(start.elapsed().as_secs() < 30);
    }

    #[test]
    fn zero_epochs_leaves_parameters() {
        let arch = Architecture::relu_mlp(&[3, 2, 3], true);
        let mut net: DenseNetwork<f64> = DenseNetwork::init(&arch, &mut rng_from(0)).unwrap();
        let before = net.params();
        let cfg = TrainConfig { epochs: 0, ..TrainConfig::default() };
        let report = fit(&mut net, &[0.1; 30], Target::Input, &cfg).unwrap();
        assert_eq!(report.epochs_run, 0);
        assert_eq!(net.params(), before);
    }

    #[test]
    fn divergence_is_reported() {
        let arch = Architecture {
            widths: vec![2, 2],
            activations: vec![Activation::Identity],
            bias: false,
        };
        let mut net: DenseNetwork<f64> = DenseNetwork::init(&arch, &mut rng_from(0)).unwrap();
        let data = vec![1e300, -1e300, 1e300, 1e300];
        let cfg = TrainConfig { epochs: 5, ..TrainConfig::default() };
        assert!(matches!(
            fit(&mut net, &data, Target::Fixed(&[0.0, 0.0]), &cfg),
            Err(Error::Divergence { .. })
        ));
    }

    #[test]
    fn training_is_deterministic() {
        let arch = Architecture::relu_mlp(&[4, 3, 4], true);
        let data: Vec<f64> = (0..400).map(|i| ((i * 37) % 11) as f64 / 11.0).collect();
        let cfg = TrainConfig { epochs: 5, seed: 9, ..TrainConfig::default() };
        let run = || {
            let mut net: DenseNetwork<f64> = DenseNetwork::init(&arch, &mut rng_from(2)).unwrap();
            fit(&mut net, &data, Target::Input, &cfg).unwrap();
            net.params()
        };
        assert_eq!(run(), run());
    }
}
