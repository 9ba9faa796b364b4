use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::regression::pearson;
use super::stacked::fit_stacked;
use super::table::PropertyTable;
use crate::error::{Error, Result};
use crate::rng::{derive_index, rng_from, stream, Rng};
use crate::scalar::Scalar;

/// Allowed distance of achieved correlation and R² from their targets.
pub const FABRICATION_TOLERANCE: f64 = 0.02;
pub const FABRICATION_BUDGET: usize = 200;

/// A synthetic regressor paired with fixed responses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fabrication<T> {
    pub x: Vec<T>,
    pub corr: T,
    pub rsq: T,
    pub iterations: usize,
}

/// Closed interval of |corr| values meeting both targets, if any.
fn feasible_band(corr: f64, rsq: f64) -> Option<(f64, f64)> {
    let tol = FABRICATION_TOLERANCE;
    let r = corr.abs();
    let lo = (r - tol).max(0.0).max((rsq - tol).max(0.0).sqrt());
    let hi = (r + tol).min(1.0).min((rsq + tol).min(1.0).sqrt());
    (lo <= hi).then_some((lo, hi))
}

/// Builds `x` for the fixed responses `y` with sample correlation near
/// `target_corr` and simple-fit R² near `target_rsq`. Sorted uniform draws are
/// paired with `y` by rank, then Gaussian noise of a bisected scale (or, when
/// rank pairing is too weak, a bisected blend toward `y`) brings the
/// correlation into the feasible band.
pub fn fabricate_distribution<T: Scalar>(
    target_corr: f64,
    target_rsq: f64,
    y: &[T],
    seed: u64,
) -> Result<Fabrication<T>> {
    if !(target_corr.abs() <= 1.0) || !(0.0..=1.0).contains(&target_rsq) {
        return Err(Error::InvalidParameter(format!(
            "targets out of range: corr {target_corr}, rsq {target_rsq}"
        )));
    }
    let n = y.len();
    if n < 10 {
        return Err(Error::InsufficientRows { needed: 10, found: n });
    }
    let yf: Vec<f64> = y.iter().map(|v| v.to_f64_lossy()).collect();
    let (ymin, ymax) = yf.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if ymax <= ymin {
        return Err(Error::Calibration("responses have zero variance".into()));
    }
    let sign = if target_corr < 0.0 { -1.0 } else { 1.0 };
    let (lo, hi) = feasible_band(target_corr, target_rsq).ok_or_else(|| {
        Error::Calibration(format!(
            "no correlation within {FABRICATION_TOLERANCE} of {target_corr} has R² within {FABRICATION_TOLERANCE} of {target_rsq}"
        ))
    })?;
    let aim = 0.5 * (lo + hi);
    let ylin: Vec<f64> = yf.iter().map(|v| sign * (v - ymin) / (ymax - ymin)).collect();

    let finish = |x: Vec<f64>, iterations: usize| -> Result<Fabrication<T>> {
        let x: Vec<T> = x.into_iter().map(T::of).collect();
        let c = pearson(&x, y)?.unwrap_or_else(T::zero);
        Ok(Fabrication { rsq: c * c, corr: c, x, iterations })
    };
    if target_corr.abs() >= 1.0 && target_rsq >= 1.0 {
        return finish(ylin, 0);
    }

    let signed_corr = |x: &[f64]| pearson(x, &yf).ok().flatten().map_or(0.0, |c| sign * c);
    let accept = |c: f64| c >= lo && c <= hi;
    let central = |c: f64| accept(c) && (c - aim).abs() <= 0.25 * (hi - lo);

    let mut rng = stream(seed, "fabricate");
    let mut u: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    u.sort_by(f64::total_cmp);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| ylin[a].total_cmp(&ylin[b]).then(a.cmp(&b)));
    let mut base = vec![0.0; n];
    for (rank, &i) in order.iter().enumerate() {
        base[i] = u[rank];
    }

    let mut iterations = 0;
    let c0 = signed_corr(&base);
    if central(c0) {
        return finish(base, iterations);
    }
    if c0 < aim {
        // blend toward the responses themselves
        let blend = |t: f64| -> Vec<f64> { base.iter().zip(&ylin).map(|(b, l)| (1.0 - t) * b + t * l).collect() };
        let (mut a, mut b) = (0.0, 1.0);
        while iterations < FABRICATION_BUDGET {
            iterations += 1;
            let t = 0.5 * (a + b);
            let x = blend(t);
            let c = signed_corr(&x);
            if central(c) {
                return finish(x, iterations);
            }
            if c < aim {
                a = t;
            } else {
                b = t;
            }
        }
        let x = blend(0.5 * (a + b));
        if accept(signed_corr(&x)) {
            return finish(x, iterations);
        }
        return Err(Error::Calibration(format!("blend did not converge in {FABRICATION_BUDGET} iterations")));
    }

    // correlation too strong: add noise of a bisected scale
    let mut noise: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let noisy = |s: f64, e: &[f64]| -> Vec<f64> { base.iter().zip(e).map(|(b, z)| b + s * z).collect() };
    while iterations < FABRICATION_BUDGET {
        let mut top = 0.1;
        while iterations < FABRICATION_BUDGET && signed_corr(&noisy(top, &noise)) > aim {
            iterations += 1;
            top *= 2.0;
            if top > 1e6 {
                break;
            }
        }
        if top > 1e6 {
            noise = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            continue;
        }
        let (mut a, mut b) = (0.0, top);
        while iterations < FABRICATION_BUDGET {
            iterations += 1;
            let s = 0.5 * (a + b);
            let x = noisy(s, &noise);
            let c = signed_corr(&x);
            if central(c) {
                return finish(x, iterations);
            }
            if c > aim {
                a = s;
            } else {
                b = s;
            }
            if b - a < 1e-12 {
                if accept(c) {
                    return finish(x, iterations);
                }
                break;
            }
        }
        noise = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    }
    Err(Error::Calibration(format!("noise scale did not converge in {FABRICATION_BUDGET} iterations")))
}

/// Outcome of the fabricated-null experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullSummary {
    pub real_p: f64,
    pub trials: usize,
    /// Trials dropped because a column could not be calibrated.
    pub failures: usize,
    /// Share of completed trials whose stacked p is below `real_p`.
    pub fraction_below: f64,
    pub mean_p: f64,
    /// Sample standard deviation of the fabricated p-values.
    pub std_p: f64,
    /// Largest |achieved − target| correlation over completed trials and columns.
    pub max_corr_deviation: f64,
    /// Same for R² of the simple fit.
    pub max_rsq_deviation: f64,
    pub p_values: Vec<f64>,
}

/// Copy of `table` with every property column replaced by a fabricated one
/// that keeps the real column's correlation with DIR, its mean, spread and NA cells.
pub fn fabricate_table<T: Scalar>(table: &PropertyTable<T>, rng: &mut Rng) -> Result<PropertyTable<T>> {
    let mut out = table.clone();
    for p in 0..4 {
        let (idx, x, y) = table.column(p);
        if x.len() < 10 {
            continue;
        }
        let Some(r) = pearson(&x, &y)? else { continue };
        let r = r.to_f64_lossy();
        let fab = fabricate_distribution(r, r * r, &y, rng.random())?;
        let stats = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let s = (v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt();
            (m, s)
        };
        let real: Vec<f64> = x.iter().map(|v| v.to_f64_lossy()).collect();
        let made: Vec<f64> = fab.x.iter().map(|v| v.to_f64_lossy()).collect();
        let (mr, sr) = stats(&real);
        let (mf, sf) = stats(&made);
        for (&row, &v) in idx.iter().zip(&made) {
            out.rows[row].props[p] = Some(T::of(mr + sr * (v - mf) / sf));
        }
    }
    Ok(out)
}

/// Repeats [`fabricate_table`] + stacked fit `trials` times with per-trial
/// derived streams and compares the fabricated p-values to the real one.
pub fn null_simulation<T: Scalar>(table: &PropertyTable<T>, trials: usize, seed: u64) -> Result<NullSummary> {
    null_simulation_against(table, trials, seed, fit_stacked(table)?.p_value.to_f64_lossy())
}

/// As [`null_simulation`], but against a caller-supplied reference p-value.
pub fn null_simulation_against<T: Scalar>(
    table: &PropertyTable<T>,
    trials: usize,
    seed: u64,
    real_p: f64,
) -> Result<NullSummary> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    let mut targets = [None; 4];
    for (p, slot) in targets.iter_mut().enumerate() {
        let (_, x, y) = table.column(p);
        if x.len() >= 10 {
            *slot = pearson(&x, &y)?.map(|r| r.to_f64_lossy());
        }
    }
    let outcomes: Vec<Option<(f64, f64, f64)>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from(derive_index(seed, t as u64));
            let trial = fabricate_table(table, &mut rng).and_then(|f| {
                let (mut dc, mut dr) = (0.0f64, 0.0f64);
                for (p, target) in targets.iter().enumerate() {
                    let Some(r) = *target else { continue };
                    let (_, x, y) = f.column(p);
                    let got = pearson(&x, &y)?.map_or(0.0, |c| c.to_f64_lossy());
                    dc = dc.max((got - r).abs());
                    dr = dr.max((got * got - r * r).abs());
                }
                Ok((fit_stacked(&f)?, dc, dr))
            });
            match trial {
                Ok((fit, dc, dr)) => Ok(Some((fit.p_value.to_f64_lossy(), dc, dr))),
                Err(Error::Calibration(msg)) => {
                    log::debug!("trial {t}: {msg}");
                    Ok(None)
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let done: Vec<(f64, f64, f64)> = outcomes.into_iter().flatten().collect();
    let p_values: Vec<f64> = done.iter().map(|o| o.0).collect();
    let failures = trials - p_values.len();
    if failures * 100 >= trials {
        return Err(Error::Calibration(format!("{failures} of {trials} trials failed to calibrate")));
    }
    let m = p_values.len() as f64;
    let mean_p = p_values.iter().sum::<f64>() / m;
    let std_p = if p_values.len() > 1 {
        (p_values.iter().map(|p| (p - mean_p).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(NullSummary {
        real_p,
        trials,
        failures,
        fraction_below: p_values.iter().filter(|&&p| p < real_p).count() as f64 / m,
        mean_p,
        std_p,
        max_corr_deviation: done.iter().map(|o| o.1).fold(0.0, f64::max),
        max_rsq_deviation: done.iter().map(|o| o.2).fold(0.0, f64::max),
        p_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::regression::fit_simple;
    use crate::stats::table::PropertyRow;

    fn dir_values(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng_from(seed);
        (0..n).map(|_| 1.0 + rng.random::<f64>().powi(2) * 2.0).collect()
    }

    #[test]
    fn band_examples() {
        let (lo, hi) = feasible_band(0.568, 0.334).unwrap();
        assert!((lo - 0.314f64.sqrt()).abs() < 1e-12);
        assert!((hi - 0.588).abs() < 1e-12);
        assert!(feasible_band(0.2, 0.9).is_none());
    }

    #[test]
    fn perfect_targets_give_affine_copy() {
        let y = dir_values(20, 1);
        let f = fabricate_distribution(1.0, 1.0, &y, 0).unwrap();
        assert!((f.corr - 1.0).abs() < 1e-12);
        let fit = fit_simple(&f.x, &y).unwrap().unwrap();
        assert!(fit.sse < 1e-20);
    }

    #[test]
    fn hits_paper_scale_targets() {
        let y = dir_values(40, 2);
        for seed in 0..50 {
            let f = fabricate_distribution(0.568, 0.334, &y, seed).unwrap();
            let fit = fit_simple(&f.x, &y).unwrap().unwrap();
            assert!((fit.pearson - 0.568).abs() <= 0.02);
            assert!((fit.r2 - 0.334).abs() <= 0.02);
            assert!((fit.pearson - f.corr).abs() < 1e-12);
            assert!((fit.r2 - f.rsq).abs() < 1e-12);
        }
    }

    #[test]
    fn negative_and_strong_targets() {
        let y = dir_values(60, 3);
        for (c, r) in [(-0.4, 0.16), (0.95, 0.9025), (0.05, 0.0025), (-0.99, 0.98)] {
            let f = fabricate_distribution(c, r, &y, 7).unwrap();
            assert!((f.corr - c).abs() <= 0.02, "{c}: {}", f.corr);
            assert!((f.rsq - r).abs() <= 0.02);
        }
    }

    #[test]
    fn rejects_impossible_targets() {
        let y = dir_values(20, 1);
        assert!(matches!(fabricate_distribution(0.1, 0.8, &y, 0), Err(Error::Calibration(_))));
        assert!(fabricate_distribution(0.5, 0.25, &y[..5], 0).is_err());
        assert!(fabricate_distribution(1.5, 0.25, &y, 0).is_err());
    }

    fn linked_table(n: usize, seed: u64) -> PropertyTable<f64> {
        let mut rng = rng_from(seed);
        let rows = (0..n)
            .map(|i| {
                let d = 1.0 + rng.random::<f64>();
                PropertyRow {
                    tag: format!("t{i}"),
                    dir: Some(d),
                    props: [0.8, 0.3, 0.5, 0.2].map(|w| Some(w * d + rng.random::<f64>() * 0.5)),
                }
            })
            .collect();
        PropertyTable::new("ae", "toy", rows)
    }

    #[test]
    fn fabricated_tables_keep_shape_and_moments() {
        let mut t = linked_table(40, 1);
        t.rows[3].props[3] = None;
        let f = fabricate_table(&t, &mut rng_from(2)).unwrap();
        assert_eq!(f.rows[3].props[3], None);
        assert_eq!(f.dir_values(), t.dir_values());
        for p in 0..4 {
            let (_, a, y) = t.column(p);
            let (_, b, _) = f.column(p);
            let m = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            assert!((m(&a) - m(&b)).abs() < 1e-9);
            let ra = pearson(&a, &y).unwrap().unwrap();
            let rb = pearson(&b, &y).unwrap().unwrap();
            assert!((ra - rb).abs() <= 0.02);
        }
    }

    #[test]
    fn single_trial_is_reproducible() {
        let t = linked_table(30, 4);
        let a = null_simulation(&t, 1, 9).unwrap();
        assert_eq!(a, null_simulation(&t, 1, 9).unwrap());
        assert_eq!(a.p_values.len(), 1);
    }

    #[test]
    fn trivial_reference_is_always_beaten() {
        let t = linked_table(30, 5);
        let s = null_simulation_against(&t, 20, 1, 1.0).unwrap();
        assert_eq!(s.fraction_below, 1.0);
    }
}
