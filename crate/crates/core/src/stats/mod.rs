//! Correlations, single-property fits, the stacked best-of-base regression,
//! leave-one-out ablation and the fabricated-null simulation.

mod null;
mod regression;
mod special;
mod stacked;
mod table;

use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::fmt::fmt12;
use crate::scalar::Scalar;

pub use null::{
    fabricate_distribution, fabricate_table, null_simulation, null_simulation_against, Fabrication, NullSummary,
    FABRICATION_BUDGET, FABRICATION_TOLERANCE,
};
pub use regression::{f_test, fit_simple, pearson, RegressionFit};
pub use special::{f_survival, inc_beta, ln_beta, ln_gamma};
pub use stacked::{ablate_leave_one_out, fit_stacked, fit_stacked_subset, StackedFit, STACKED_PARAMS};
pub use table::{PropertyRow, PropertyTable, SeRow, SeTable, PROPERTY_LABELS, SE_HEADER};

/// Pairwise correlations of the four property columns over rows where both are present.
pub fn correlation_matrix<T: Scalar>(table: &PropertyTable<T>) -> Result<[[Option<T>; 4]; 4]> {
    let mut m = [[None; 4]; 4];
    for i in 0..4 {
        for j in i..4 {
            let (a, b): (Vec<T>, Vec<T>) = table
                .rows
                .iter()
                .filter_map(|r| Some((r.props[i]?, r.props[j]?)))
                .unzip();
            let c = if a.len() < 2 {
                None
            } else if i == j {
                pearson(&a, &b)?.map(|_| T::one())
            } else {
                pearson(&a, &b)?
            };
            m[i][j] = c;
            m[j][i] = c;
        }
    }
    Ok(m)
}

/// One line of the per-property regression report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyFitSummary {
    pub property: &'static str,
    pub n: usize,
    pub corr: Option<f64>,
    pub r2: Option<f64>,
    pub f_stat: Option<f64>,
    pub p_value: Option<f64>,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
}

/// Simple fit of DIR on each property.
pub fn property_fits<T: Scalar>(table: &PropertyTable<T>) -> Result<Vec<PropertyFitSummary>> {
    (0..4)
        .map(|p| {
            let (_, x, y) = table.column(p);
            let fit = if x.len() >= 3 { fit_simple(&x, &y)? } else { None };
            let g = |f: fn(&RegressionFit<T>) -> T| fit.as_ref().map(|r| f(r).to_f64_lossy());
            Ok(PropertyFitSummary {
                property: PROPERTY_LABELS[p],
                n: x.len(),
                corr: g(|r| r.pearson),
                r2: g(|r| r.r2),
                f_stat: g(|r| r.f_stat),
                p_value: g(|r| r.p_value),
                slope: g(|r| r.slope),
                intercept: g(|r| r.intercept),
            })
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt12).unwrap_or_default()
}

/// Writes `property,n,corr,r2,F,p,slope,intercept`.
pub fn write_fit_report<W: Write>(rows: &[PropertyFitSummary], mut w: W) -> std::io::Result<()> {
    writeln!(w, "property,n,corr,r2,F,p,slope,intercept")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.property,
            r.n,
            opt(r.corr),
            opt(r.r2),
            opt(r.f_stat),
            opt(r.p_value),
            opt(r.slope),
            opt(r.intercept)
        )?;
    }
    Ok(())
}
