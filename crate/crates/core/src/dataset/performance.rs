//! Per-group detection performance from binary flags and outlier ground truth.

use super::{group_view, AttributedDataset};
use crate::error::{Error, Result};
use crate::measure::{Measured, NaReason};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn tally(flags: &[bool], truth: &[bool], idx: impl IntoIterator<Item = usize>) -> Self {
        let mut c = Self::default();
        for i in idx {
            match (flags[i], truth[i]) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn positives(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> usize {
        self.fp + self.tn
    }

    pub fn flagged(&self) -> usize {
        self.tp + self.fp
    }
}

/// Rates derived from one [`ConfusionCounts`]. Empty denominators are NA, never 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupPerformance<T> {
    pub counts: ConfusionCounts,
    pub flag_rate: Measured<T>,
    pub tpr: Measured<T>,
    pub fpr: Measured<T>,
    pub precision: Measured<T>,
    pub f1: Measured<T>,
}

fn ratio<T: Scalar>(num: usize, den: usize, na: NaReason) -> Measured<T> {
    if den == 0 {
        Measured::Na(na)
    } else {
        Measured::Value(T::of_usize(num) / T::of_usize(den))
    }
}

impl<T: Scalar> GroupPerformance<T> {
    pub fn from_counts(c: ConfusionCounts) -> Self {
        Self {
            counts: c,
            flag_rate: ratio(c.flagged(), c.total(), NaReason::EmptyGroup),
            tpr: ratio(c.tp, c.positives(), NaReason::NoPositives),
            fpr: ratio(c.fp, c.negatives(), NaReason::NoNegatives),
            precision: ratio(c.tp, c.flagged(), NaReason::NoPredictions),
            // 2TP / (2TP + FP + FN) is the harmonic mean of precision and recall
            // whenever both exist, and stays defined when TP = 0.
            f1: ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_, NaReason::NoPositives),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceReport<T> {
    pub tag_name: String,
    /// Rows with tag = 1.
    pub group: GroupPerformance<T>,
    /// Rows with tag = 0.
    pub complement: GroupPerformance<T>,
    pub overall: GroupPerformance<T>,
}

pub fn group_performance<T: Scalar>(
    ds: &AttributedDataset<T>,
    flags: &[bool],
    tag_name: &str,
) -> Result<PerformanceReport<T>> {
    if flags.len() != ds.n() {
        return Err(Error::DimensionMismatch {
            expected: ds.n(),
            found: flags.len(),
        });
    }
    let truth = ds.outlier_truth().ok_or(Error::MissingOutlierTruth)?;
    let g = group_view(ds, tag_name)?;
    let perf = |idx: &[usize]| {
        GroupPerformance::from_counts(ConfusionCounts::tally(flags, truth, idx.iter().copied()))
    };
    Ok(PerformanceReport {
        tag_name: tag_name.to_string(),
        group: perf(&g.members),
        complement: perf(&g.complement),
        overall: GroupPerformance::from_counts(ConfusionCounts::tally(flags, truth, 0..ds.n())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ds(tag: Vec<bool>, truth: Vec<bool>) -> AttributedDataset<f64> {
        let n = tag.len();
        AttributedDataset::new("p", n, 1, vec![0.0; n])
            .unwrap()
            .with_tag("g", tag)
            .unwrap()
            .with_outlier_truth(truth)
            .unwrap()
    }

    #[test]
    fn perfect_flags() {
        let truth = vec![true, false, false, true, false, true];
        let tag = vec![true, true, true, false, false, false];
        let r = group_performance(&ds(tag, truth.clone()), &truth, "g").unwrap();
        for p in [r.group, r.complement, r.overall] {
            assert_eq!(p.tpr, Measured::Value(1.0));
            assert_eq!(p.fpr, Measured::Value(0.0));
            assert_eq!(p.precision, Measured::Value(1.0));
            assert_eq!(p.f1, Measured::Value(1.0));
        }
    }

    #[test]
    fn no_flags() {
        let truth = vec![true, false, false, true];
        let r = group_performance(&ds(vec![true, true, false, false], truth), &[false; 4], "g").unwrap();
        assert_eq!(r.group.flag_rate, Measured::Value(0.0));
        assert_eq!(r.group.tpr, Measured::Value(0.0));
        assert_eq!(r.group.precision, Measured::Na(NaReason::NoPredictions));
    }

    #[test]
    fn missing_truth_is_an_error() {
        let d = AttributedDataset::new("p", 2, 1, vec![0.0; 2])
            .unwrap()
            .with_tag("g", vec![true, false])
            .unwrap();
        assert!(matches!(
            group_performance(&d, &[true, false], "g"),
            Err(Error::MissingOutlierTruth)
        ));
    }

    proptest! {
        #[test]
        fn matches_direct_counting(cells in proptest::collection::vec((any::<bool>(), any::<bool>(), any::<bool>()), 50)) {
            let tag: Vec<bool> = cells.iter().map(|c| c.0).collect();
            let truth: Vec<bool> = cells.iter().map(|c| c.1).collect();
            let flags: Vec<bool> = cells.iter().map(|c| c.2).collect();
            let r = group_performance(&ds(tag.clone(), truth.clone()), &flags, "g").unwrap();
            for (side, p) in [(true, r.group), (false, r.complement)] {
                let rows: Vec<usize> = (0..50).filter(|&i| tag[i] == side).collect();
                let tp = rows.iter().filter(|&&i| flags[i] && truth[i]).count();
                let fp = rows.iter().filter(|&&i| flags[i] && !truth[i]).count();
                let fn_ = rows.iter().filter(|&&i| !flags[i] && truth[i]).count();
                let tn = rows.iter().filter(|&&i| !flags[i] && !truth[i]).count();
                prop_assert_eq!(p.counts.tp + p.counts.fn_, truth.iter().zip(&tag).filter(|(&t, &g)| t && g == side).count());
                prop_assert_eq!(p.counts.fp + p.counts.tn, truth.iter().zip(&tag).filter(|(&t, &g)| !t && g == side).count());
                prop_assert_eq!((p.counts.tp, p.counts.fp, p.counts.fn_, p.counts.tn), (tp, fp, fn_, tn));
                if tp + fn_ > 0 {
                    prop_assert!((p.tpr.unwrap() - tp as f64 / (tp + fn_) as f64).abs() < 1e-15);
                } else {
                    prop_assert!(p.tpr.is_na());
                }
                if tp + fp > 0 {
                    let prec = tp as f64 / (tp + fp) as f64;
                    prop_assert!((p.precision.unwrap() - prec).abs() < 1e-15);
                    let rec = p.tpr.value();
                    if let Some(rec) = rec {
                        if prec + rec > 0.0 {
                            prop_assert!((p.f1.unwrap() - 2.0 * prec * rec / (prec + rec)).abs() < 1e-12);
                        }
                    }
                }
                for v in [p.flag_rate, p.tpr, p.fpr, p.precision, p.f1].iter().filter_map(|m| m.value()) {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }
    }
}
