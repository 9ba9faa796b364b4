use std::collections::BTreeSet;

use crate::dataset::{AttributedDataset, GroupView};
use crate::error::{Error, Result};
use crate::measure::{Measured, NaReason};
use crate::scalar::Scalar;

fn two_way_ratio<T: Scalar>(a: T, b: T) -> Measured<T> {
    match (a > T::zero(), b > T::zero()) {
        (true, true) => Measured::Value((a / b).max(b / a)),
        (false, false) => Measured::Value(T::one()),
        _ => Measured::Na(NaReason::ZeroRate),
    }
}

fn check_recon<T: Scalar>(ds: &AttributedDataset<T>, recon: &[T]) -> Result<()> {
    if recon.len() != ds.features().len() {
        return Err(Error::DimensionMismatch {
            expected: ds.features().len(),
            found: recon.len(),
        });
    }
    Ok(())
}

fn check_group(n: usize, group: &GroupView) -> Result<()> {
    if group.n() != n {
        return Err(Error::DimensionMismatch { expected: n, found: group.n() });
    }
    Ok(())
}

/// Squared reconstruction error of row `i`, split into (inside `mask`, total).
fn row_losses<T: Scalar>(ds: &AttributedDataset<T>, recon: &[T], i: usize, mask: Option<&BTreeSet<usize>>) -> (T, T) {
    let d = ds.d();
    let x = ds.row(i);
    let r = &recon[i * d..(i + 1) * d];
    let mut inside = T::zero();
    let mut total = T::zero();
    for j in 0..d {
        let e = (x[j] - r[j]) * (x[j] - r[j]);
        total += e;
        if mask.is_some_and(|m| m.contains(&j)) {
            inside += e;
        }
    }
    (inside, total)
}

/// Larger of the two flag-rate ratios between a group and its complement.
pub fn anomaly_dir<T: Scalar>(flags: &[bool], group: &GroupView) -> Result<Measured<T>> {
    check_group(flags.len(), group)?;
    if group.members.is_empty() || group.complement.is_empty() {
        return Ok(Measured::Na(NaReason::EmptyGroup));
    }
    let rate = |idx: &[usize]| T::of_usize(idx.iter().filter(|&&i| flags[i]).count()) / T::of_usize(idx.len());
    Ok(two_way_ratio(rate(&group.members), rate(&group.complement)))
}

/// Larger of the two ratios of mean squared reconstruction loss between sides.
pub fn reconstruction_ratio<T: Scalar>(ds: &AttributedDataset<T>, recon: &[T], group: &GroupView) -> Result<Measured<T>> {
    check_recon(ds, recon)?;
    check_group(ds.n(), group)?;
    if group.members.is_empty() || group.complement.is_empty() {
        return Ok(Measured::Na(NaReason::EmptyGroup));
    }
    let mean_loss = |idx: &[usize]| {
        idx.iter().map(|&i| row_losses(ds, recon, i, None).1).sum::<T>() / T::of_usize(idx.len())
    };
    Ok(match two_way_ratio(mean_loss(&group.members), mean_loss(&group.complement)) {
        Measured::Na(_) => Measured::Na(NaReason::ZeroLoss),
        v => v,
    })
}

/// Share of the larger side, in [0.5, 1].
pub fn sample_size_bias<T: Scalar>(group: &GroupView) -> Result<T> {
    if group.n() == 0 {
        return Err(Error::InsufficientRows { needed: 1, found: 0 });
    }
    let n = T::of_usize(group.n());
    Ok((T::of_usize(group.members.len()) / n).max(T::of_usize(group.complement.len()) / n))
}

/// One minus the largest per-side share of reconstruction loss that falls on
/// the masked features.
pub fn spurious_feature_variance<T: Scalar>(
    ds: &AttributedDataset<T>,
    recon: &[T],
    group: &GroupView,
    mask: &BTreeSet<usize>,
) -> Result<Measured<T>> {
    check_recon(ds, recon)?;
    check_group(ds.n(), group)?;
    if mask.is_empty() {
        return Err(Error::InvalidParameter("feature mask is empty".into()));
    }
    if let Some(&j) = mask.iter().find(|&&j| j >= ds.d()) {
        return Err(Error::InvalidParameter(format!("mask index {j} out of range for d = {}", ds.d())));
    }
    let mut worst = T::zero();
    for side in [&group.members, &group.complement] {
        if side.is_empty() {
            return Ok(Measured::Na(NaReason::EmptyGroup));
        }
        let (inside, total) = side.iter().fold((T::zero(), T::zero()), |(a, b), &i| {
            let (x, y) = row_losses(ds, recon, i, Some(mask));
            (a + x, b + y)
        });
        if total <= T::zero() {
            return Ok(Measured::Na(NaReason::ZeroLoss));
        }
        worst = worst.max(inside / total);
    }
    Ok(Measured::Value(T::one() - worst))
}

/// Disagreement rate between observed and ground-truth tags.
pub fn attribute_label_noise<T: Scalar>(observed: &[bool], truth: Option<&[bool]>) -> Result<Measured<T>> {
    let Some(truth) = truth else {
        return Ok(Measured::Na(NaReason::MissingTruth));
    };
    if truth.len() != observed.len() {
        return Err(Error::DimensionMismatch { expected: observed.len(), found: truth.len() });
    }
    if observed.is_empty() {
        return Ok(Measured::Na(NaReason::InsufficientData));
    }
    let agree = observed.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(Measured::Value(T::one() - T::of_usize(agree) / T::of_usize(observed.len())))
}
