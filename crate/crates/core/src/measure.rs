//! Values that may be undefined because a denominator is empty.

use std::fmt;

/// Why a measurement has no value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NaReason {
    /// One side of the group split has no samples.
    EmptyGroup,
    /// One side has a zero rate while the other is positive.
    ZeroRate,
    /// A side has zero reconstruction loss while the other is positive.
    ZeroLoss,
    /// Ground-truth attribute labels are not available.
    MissingTruth,
    /// No foreground mask is declared for the dataset.
    MissingMask,
    /// A sample has no spread.
    ZeroVariance,
    /// Nothing was flagged, so a precision-type ratio is undefined.
    NoPredictions,
    /// No positives exist for a recall-type ratio.
    NoPositives,
    /// No negatives exist for a false-positive-type ratio.
    NoNegatives,
    /// Too few defined values to fit or aggregate.
    InsufficientData,
}

impl fmt::Display for NaReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NaReason::EmptyGroup => "empty group",
            NaReason::ZeroRate => "zero rate on one side",
            NaReason::ZeroLoss => "zero loss on one side",
            NaReason::MissingTruth => "missing truth labels",
            NaReason::MissingMask => "missing foreground mask",
            NaReason::ZeroVariance => "zero variance",
            NaReason::NoPredictions => "no predicted positives",
            NaReason::NoPositives => "no actual positives",
            NaReason::NoNegatives => "no actual negatives",
            NaReason::InsufficientData => "insufficient data",
        };
        f.write_str(s)
    }
}

/// A real value or an explicit "NA".
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Measured<T> {
    Value(T),
    Na(NaReason),
}

impl<T: Copy> Measured<T> {
    pub fn value(&self) -> Option<T> {
        match *self {
            Measured::Value(v) => Some(v),
            Measured::Na(_) => None,
        }
    }

    pub fn is_na(&self) -> bool {
        matches!(self, Measured::Na(_))
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> Measured<U> {
        match self {
            Measured::Value(v) => Measured::Value(f(v)),
            Measured::Na(r) => Measured::Na(r),
        }
    }

    /// Panics on NA. Intended for tests and for values that are defined by construction.
    pub fn unwrap(self) -> T
    where
        T: fmt::Debug,
    {
        match self {
            Measured::Value(v) => v,
            Measured::Na(r) => panic!("called unwrap on NA ({r})"),
        }
    }
}

impl<T> From<Option<T>> for Measured<T> {
    fn from(v: Option<T>) -> Self {
        match v {
            Some(v) => Measured::Value(v),
            None => Measured::Na(NaReason::InsufficientData),
        }
    }
}
