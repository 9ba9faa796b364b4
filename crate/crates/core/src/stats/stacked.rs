use serde::Serialize;

use super::regression::{f_test, fit_simple, RegressionFit};
use super::table::{PropertyTable, SeRow, SeTable};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Parameter count charged to every stacked model: four slopes and four intercepts.
pub const STACKED_PARAMS: usize = 8;

/// Per-datum best-of-base-models regression.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StackedFit<T> {
    /// Property indices (0..4) the meta-selector may choose from.
    pub properties: Vec<usize>,
    /// One fit per entry of `properties`; `None` when the column was degenerate.
    pub bases: Vec<Option<RegressionFit<T>>>,
    /// Table rows that entered the fit.
    pub rows: Vec<usize>,
    /// Chosen property index per fitted row.
    pub chosen: Vec<usize>,
    pub per_datum_se: Vec<T>,
    pub sse: T,
    pub sst: T,
    pub f_stat: T,
    pub p_value: T,
}

impl<T: Scalar> StackedFit<T> {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    /// Squared error of base `property` at table row `row`, if that base covers it.
    pub fn base_se(&self, table: &PropertyTable<T>, property: usize, row: usize) -> Option<T> {
        let k = self.properties.iter().position(|&p| p == property)?;
        let fit = self.bases[k].as_ref()?;
        let r = &table.rows[row];
        let e = r.dir? - fit.predict(r.props[property]?);
        Some(e * e)
    }

    /// Per-datum report in the squared-error table layout.
    pub fn se_table(&self, table: &PropertyTable<T>) -> SeTable<T> {
        let mut whole = vec![None; table.len()];
        for (&r, &se) in self.rows.iter().zip(&self.per_datum_se) {
            whole[r] = Some(se);
        }
        SeTable {
            rows: table
                .rows
                .iter()
                .enumerate()
                .map(|(i, r)| SeRow {
                    tag: r.tag.clone(),
                    se: [0, 1, 2, 3].map(|p| self.base_se(table, p, i)),
                    whole: whole[i],
                })
                .collect(),
        }
    }
}

/// Stacked fit restricted to the listed properties. Each base is an ordinary
/// fit of DIR on one property over the rows where both are present; every row
/// takes the smallest available base squared error, ties to the lower index.
pub fn fit_stacked_subset<T: Scalar>(table: &PropertyTable<T>, properties: &[usize]) -> Result<StackedFit<T>> {
    if properties.is_empty() || properties.iter().any(|&p| p >= 4) {
        return Err(Error::InvalidParameter(format!("invalid property subset {properties:?}")));
    }
    let mut props = properties.to_vec();
    props.sort_unstable();
    props.dedup();
    let bases: Vec<Option<RegressionFit<T>>> = props
        .iter()
        .map(|&p| {
            let (_, x, y) = table.column(p);
            if x.len() < 3 {
                Ok(None)
            } else {
                fit_simple(&x, &y)
            }
        })
        .collect::<Result<_>>()?;
    if bases.iter().all(Option::is_none) {
        return Err(Error::InsufficientRows { needed: 3, found: 0 });
    }

    let mut rows = Vec::new();
    let mut chosen = Vec::new();
    let mut per_datum_se = Vec::new();
    let mut ys = Vec::new();
    for (i, r) in table.rows.iter().enumerate() {
        let Some(y) = r.dir else { continue };
        let mut best: Option<(usize, T)> = None;
        for (k, &p) in props.iter().enumerate() {
            let (Some(fit), Some(x)) = (&bases[k], r.props[p]) else { continue };
            let e = y - fit.predict(x);
            let se = e * e;
            if best.is_none_or(|(_, b)| se < b) {
                best = Some((p, se));
            }
        }
        if let Some((p, se)) = best {
            rows.push(i);
            chosen.push(p);
            per_datum_se.push(se);
            ys.push(y);
        }
    }
    let n = rows.len();
    if n <= STACKED_PARAMS {
        return Err(Error::InsufficientRows { needed: STACKED_PARAMS + 1, found: n });
    }
    let mean = ys.iter().copied().sum::<T>() / T::of_usize(n);
    let sst: T = ys.iter().map(|&y| (y - mean) * (y - mean)).sum();
    let sse: T = per_datum_se.iter().copied().sum();
    let (f_stat, p_value) = f_test(sst, sse, n, STACKED_PARAMS);
    Ok(StackedFit {
        properties: props,
        bases,
        rows,
        chosen,
        per_datum_se,
        sse,
        sst,
        f_stat,
        p_value,
    })
}

/// Stacked fit over all four properties.
pub fn fit_stacked<T: Scalar>(table: &PropertyTable<T>) -> Result<StackedFit<T>> {
    fit_stacked_subset(table, &[0, 1, 2, 3])
}

/// The four stacked fits that each omit one property, in property order.
pub fn ablate_leave_one_out<T: Scalar>(table: &PropertyTable<T>) -> Result<Vec<StackedFit<T>>> {
    (0..4)
        .map(|drop| {
            let keep: Vec<usize> = (0..4).filter(|&p| p != drop).collect();
            fit_stacked_subset(table, &keep)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use crate::stats::table::PropertyRow;
    use rand::Rng as _;

    fn random_table(seed: u64, n: usize) -> PropertyTable<f64> {
        let mut rng = rng_from(seed);
        let rows = (0..n)
            .map(|i| {
                let dir = 1.0 + rng.random::<f64>();
                PropertyRow {
                    tag: format!("t{i}"),
                    dir: Some(dir),
                    props: [0, 1, 2, 3].map(|_| {
                        if rng.random_bool(0.05) {
                            None
                        } else {
                            Some(dir * rng.random::<f64>() + rng.random::<f64>())
                        }
                    }),
                }
            })
            .collect();
        PropertyTable::new("ae", "r", rows)
    }

    fn table_from(dir: &[f64], props: &[[f64; 4]]) -> PropertyTable<f64> {
        PropertyTable::new(
            "a",
            "d",
            dir.iter()
                .zip(props)
                .enumerate()
                .map(|(i, (&d, p))| PropertyRow {
                    tag: format!("r{i}"),
                    dir: Some(d),
                    props: p.map(Some),
                })
                .collect(),
        )
    }

    #[test]
    fn stacked_se_is_the_row_minimum() {
        for seed in 0..30 {
            let t = random_table(seed, 40);
            let s = fit_stacked(&t).unwrap();
            for (k, &row) in s.rows.iter().enumerate() {
                let ses: Vec<(usize, f64)> =
                    (0..4).filter_map(|p| s.base_se(&t, p, row).map(|v| (p, v))).collect();
                let min = ses.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
                assert_eq!(s.per_datum_se[k], min);
                let first = ses.iter().find(|x| x.1 == min).unwrap().0;
                assert_eq!(s.chosen[k], first);
            }
            for b in s.bases.iter().flatten() {
                assert!(s.sse <= b.sse + 1e-12);
            }
            assert!(s.p_value > 0.0 && s.p_value <= 1.0);
        }
    }

    #[test]
    fn ablations_never_lower_sse() {
        for seed in 0..30 {
            let t = random_table(100 + seed, 30);
            let full = fit_stacked(&t).unwrap();
            for a in ablate_leave_one_out(&t).unwrap() {
                assert!(a.sse >= full.sse - 1e-12);
                assert!(a.p_value >= full.p_value || a.rows.len() != full.rows.len());
            }
        }
    }

    #[test]
    fn perfect_property_dominates_ablation() {
        let n = 20;
        let dir: Vec<f64> = (0..n).map(|i| 1.0 + f64::from(i) * 0.1).collect();
        let mut rng = rng_from(5);
        let props: Vec<[f64; 4]> = dir
            .iter()
            .map(|&d| [rng.random(), 2.0 * d - 1.0, rng.random(), rng.random()])
            .collect();
        let t = table_from(&dir, &props);
        let full = fit_stacked(&t).unwrap();
        assert!(full.sse < 1e-20);
        let abl = ablate_leave_one_out(&t).unwrap();
        assert!(abl[1].sse > 1e-6);
        for k in [0, 2, 3] {
            assert!((abl[k].sse - full.sse).abs() < 1e-20);
        }
    }

    #[test]
    fn single_base_equals_that_base() {
        let t = random_table(9, 25);
        let s = fit_stacked_subset(&t, &[2]).unwrap();
        let base = s.bases[0].as_ref().unwrap();
        assert_eq!(s.per_datum_se, base.per_datum_se);
        assert_eq!(s.sse, base.sse);
    }

    #[test]
    fn too_few_rows_is_an_error() {
        assert!(fit_stacked(&random_table(1, 8)).is_err());
        assert!(fit_stacked_subset(&random_table(1, 20), &[4]).is_err());
    }
}
