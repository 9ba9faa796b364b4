use serde::Serialize;

use super::special::f_survival;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Sample Pearson correlation; `None` when either side has zero variance.
pub fn pearson<T: Scalar>(x: &[T], y: &[T]) -> Result<Option<T>> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), found: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::InsufficientRows { needed: 2, found: x.len() });
    }
    let n = T::of_usize(x.len());
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= T::zero() || syy <= T::zero() {
        return Ok(None);
    }
    Ok(Some((sxy / (sxx * syy).sqrt()).max(-T::one()).min(T::one())))
}

/// Ordinary least squares of `y` on one regressor with its overall F-test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionFit<T> {
    pub n: usize,
    pub slope: T,
    pub intercept: T,
    pub r2: T,
    pub pearson: T,
    pub sse: T,
    pub f_stat: T,
    pub p_value: T,
    /// Squared residual of each fitted point, in input order.
    pub per_datum_se: Vec<T>,
}

impl<T: Scalar> RegressionFit<T> {
    pub fn predict(&self, x: T) -> T {
        self.intercept + self.slope * x
    }
}

/// Fits `y = intercept + slope * x`. Returns `None` when `x` or `y` is constant.
pub fn fit_simple<T: Scalar>(x: &[T], y: &[T]) -> Result<Option<RegressionFit<T>>> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), found: y.len() });
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::InsufficientRows { needed: 3, found: n });
    }
    let Some(r) = pearson(x, y)? else {
        return Ok(None);
    };
    let nt = T::of_usize(n);
    let mx = x.iter().copied().sum::<T>() / nt;
    let my = y.iter().copied().sum::<T>() / nt;
    let sxx: T = x.iter().map(|&a| (a - mx) * (a - mx)).sum();
    let sxy: T = x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).sum();
    let sst: T = y.iter().map(|&b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let per_datum_se: Vec<T> = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| {
            let e = b - (intercept + slope * a);
            e * e
        })
        .collect();
    let sse: T = per_datum_se.iter().copied().sum();
    let r2 = (T::one() - sse / sst).max(T::zero()).min(T::one());
    let (f_stat, p_value) = f_test(sst, sse, n, 2);
    Ok(Some(RegressionFit {
        n,
        slope,
        intercept,
        r2,
        pearson: r,
        sse,
        f_stat,
        p_value,
        per_datum_se,
    }))
}

/// Overall-significance F-test of a model with `params` parameters (intercept
/// included) that leaves `sse` of the total sum of squares `sst` unexplained.
pub fn f_test<T: Scalar>(sst: T, sse: T, n: usize, params: usize) -> (T, T) {
    let d1 = (params - 1) as f64;
    let d2 = n as f64 - params as f64;
    if d2 <= 0.0 {
        return (T::nan(), T::nan());
    }
    let ssr = (sst - sse).max(T::zero()).to_f64_lossy();
    let sse = sse.max(T::zero()).to_f64_lossy();
    let f = if sse == 0.0 {
        if ssr > 0.0 { f64::INFINITY } else { 0.0 }
    } else {
        (ssr / d1) / (sse / d2)
    };
    (T::of(f), T::of(f_survival(f, d1, d2)))
}
