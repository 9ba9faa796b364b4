//! Replays the published property tables: squared-error identity, aggregate
//! error, fairness landscape, correlation ordering, ablation and the null test.

use std::io::Write;
use std::time::{Duration, Instant};

use adfair_core::fmt::fmt12;
use adfair_core::rng::derive_seed;
use adfair_core::stats::{
    ablate_leave_one_out, fit_simple, fit_stacked, null_simulation, NullSummary, PropertyTable, SeTable,
    FABRICATION_TOLERANCE, PROPERTY_LABELS,
};
use anyhow::Result;

use crate::fixtures::FixtureSet;
use crate::output::OutputDir;

pub const DIR_FAIR_THRESHOLD: f64 = 1.2;
pub const FAIR_FRACTION_TARGET: f64 = 0.70;
pub const CELEBA_MEAN_DIR: f64 = 1.4;
pub const LFW_MEAN_DIR: f64 = 1.13;
pub const MEAN_DIR_TOLERANCE: f64 = 0.05;
pub const WHOLE_SE_MEAN: f64 = 0.00351;
pub const WHOLE_SE_MEAN_TOLERANCE: f64 = 0.0005;
pub const WHOLE_SE_STD: f64 = 0.0065;
pub const WHOLE_SE_STD_TOLERANCE: f64 = 0.001;
pub const CAPTION_TOLERANCE: f64 = 0.1;
pub const NULL_BEAT_LIMIT: f64 = 0.01;
pub const SE_REPLAY_BUDGET: Duration = Duration::from_secs(1);
pub const NULL_BUDGET: Duration = Duration::from_secs(60);

/// Published (algorithm, property index, corr, R²) per scatter panel.
pub const CAPTIONS: [(&str, usize, f64, f64); 8] = [
    ("ae", 0, 0.568, 0.334),
    ("svdd", 0, 0.523, 0.273),
    ("ae", 1, 0.220, 0.114),
    ("svdd", 1, 0.251, 0.128),
    ("ae", 2, 0.337, 0.148),
    ("svdd", 2, 0.473, 0.224),
    ("ae", 3, 0.261, 0.167),
    ("svdd", 3, 0.328, 0.108),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeReplayRow {
    pub tag: String,
    pub row_min: Option<f64>,
    pub whole: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationRow {
    pub algorithm: String,
    pub property: usize,
    pub n: usize,
    pub corr: Option<f64>,
    pub rsq: Option<f64>,
    pub caption_corr: f64,
    pub caption_rsq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub table: String,
    /// `None` for the full model.
    pub dropped: Option<usize>,
    pub sse: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone)]
pub struct AppendixOutcome {
    pub checks: Vec<Check>,
    pub se_replay: Vec<SeReplayRow>,
    pub correlations: Vec<CorrelationRow>,
    pub ablations: Vec<AblationRow>,
    pub null: NullSummary,
    pub se_replay_time: Duration,
    pub null_time: Duration,
}

impl AppendixOutcome {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, id: u8) -> Option<&Check> {
        self.checks.iter().find(|c| c.id == id)
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let s = if v.len() > 1 {
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (m, s)
}

fn f(x: f64) -> String {
    format!("{x:.6}")
}

/// Smallest available property SE per row against the reported whole-model SE.
pub fn se_replay(se: &SeTable<f64>) -> Vec<SeReplayRow> {
    se.rows
        .iter()
        .map(|r| SeReplayRow {
            tag: r.tag.clone(),
            row_min: r.se.iter().flatten().copied().reduce(f64::min),
            whole: r.whole,
        })
        .collect()
}

fn check_se_identity(rows: &[SeReplayRow], elapsed: Duration) -> Check {
    let matched = rows.iter().filter(|r| r.row_min.is_some() && r.row_min == r.whole).count();
    Check {
        id: 1,
        name: "stacked-model identity",
        passed: matched == rows.len() && !rows.is_empty() && elapsed < SE_REPLAY_BUDGET,
        detail: format!("{matched}/{} rows: whole-model SE equals the row minimum", rows.len()),
    }
}

fn check_whole_aggregate(rows: &[SeReplayRow]) -> Check {
    let w: Vec<f64> = rows.iter().filter_map(|r| r.whole).collect();
    let (m, s) = mean_std(&w);
    Check {
        id: 2,
        name: "whole-model aggregate",
        passed: (m - WHOLE_SE_MEAN).abs() <= WHOLE_SE_MEAN_TOLERANCE && (s - WHOLE_SE_STD).abs() <= WHOLE_SE_STD_TOLERANCE,
        detail: format!(
            "mean {} (target {WHOLE_SE_MEAN} +/- {WHOLE_SE_MEAN_TOLERANCE}), std {} (target {WHOLE_SE_STD} +/- {WHOLE_SE_STD_TOLERANCE})",
            fmt12(m),
            fmt12(s)
        ),
    }
}

fn check_landscape(tables: &[PropertyTable<f64>]) -> Check {
    let all: Vec<f64> = tables.iter().flat_map(|t| t.dir_values()).collect();
    let fair = all.iter().filter(|&&d| d < DIR_FAIR_THRESHOLD).count();
    let frac = fair as f64 / all.len() as f64;
    let mean_of = |ds: &str| {
        let v: Vec<f64> = tables.iter().filter(|t| t.dataset == ds).flat_map(|t| t.dir_values()).collect();
        mean_std(&v).0
    };
    let (celeba, lfw) = (mean_of("celeba"), mean_of("lfw"));
    let means_ok =
        (celeba - CELEBA_MEAN_DIR).abs() <= MEAN_DIR_TOLERANCE && (lfw - LFW_MEAN_DIR).abs() <= MEAN_DIR_TOLERANCE;
    Check {
        id: 3,
        name: "fairness landscape",
        passed: frac > FAIR_FRACTION_TARGET && means_ok,
        detail: format!(
            "{fair}/{} rows with DIR < {DIR_FAIR_THRESHOLD} = {} (needs > {FAIR_FRACTION_TARGET}); mean DIR celeba {} lfw {} ({})",
            all.len(),
            f(frac),
            f(celeba),
            f(lfw),
            if means_ok { "within tolerance" } else { "outside tolerance" }
        ),
    }
}

/// Per-algorithm pooled correlation of every property with DIR.
pub fn correlations(tables: &[PropertyTable<f64>]) -> Result<Vec<CorrelationRow>> {
    let mut out = Vec::new();
    for (alg, p, cc, cr) in CAPTIONS {
        let parts: Vec<&PropertyTable<f64>> = tables.iter().filter(|t| t.algorithm == alg).collect();
        let pooled = PropertyTable::pooled(&parts, alg, "pooled");
        let (_, x, y) = pooled.column(p);
        let fit = if x.len() >= 3 { fit_simple(&x, &y)? } else { None };
        out.push(CorrelationRow {
            algorithm: alg.to_string(),
            property: p,
            n: x.len(),
            corr: fit.as_ref().map(|r| r.pearson),
            rsq: fit.as_ref().map(|r| r.r2),
            caption_corr: cc,
            caption_rsq: cr,
        });
    }
    Ok(out)
}

fn check_ordering(rows: &[CorrelationRow]) -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for alg in ["ae", "svdd"] {
        let c: Vec<f64> = (0..4)
            .map(|p| {
                rows.iter()
                    .find(|r| r.algorithm == alg && r.property == p)
                    .and_then(|r| r.corr)
                    .unwrap_or(f64::NAN)
            })
            .collect();
        let top = c.iter().all(|&v| c[0] >= v);
        let bottom = c.iter().all(|&v| c[1] <= v);
        ok &= top && bottom;
        parts.push(format!(
            "{alg}: {} (RR largest {}, SSB smallest {})",
            c.iter().zip(PROPERTY_LABELS).map(|(v, l)| format!("{l} {v:.3}")).collect::<Vec<_>>().join(" "),
            if top { "yes" } else { "no" },
            if bottom { "yes" } else { "no" }
        ));
    }
    let worst = rows
        .iter()
        .map(|r| r.corr.map_or(f64::INFINITY, |c| (c - r.caption_corr).abs()))
        .fold(0.0, f64::max);
    ok &= worst <= CAPTION_TOLERANCE;
    parts.push(format!("max |corr - caption| {worst:.3} (limit {CAPTION_TOLERANCE})"));
    Check {
        id: 4,
        name: "correlation ordering",
        passed: ok,
        detail: parts.join("; "),
    }
}

fn ablations(tables: &[PropertyTable<f64>]) -> Result<Vec<AblationRow>> {
    let mut out = Vec::new();
    for t in tables {
        let name = format!("{}_{}", t.dataset, t.algorithm);
        let full = fit_stacked(t)?;
        out.push(AblationRow { table: name.clone(), dropped: None, sse: full.sse, p_value: full.p_value });
        for (d, fit) in ablate_leave_one_out(t)?.into_iter().enumerate() {
            out.push(AblationRow { table: name.clone(), dropped: Some(d), sse: fit.sse, p_value: fit.p_value });
        }
    }
    Ok(out)
}

fn check_ablation(rows: &[AblationRow]) -> Check {
    let mut bad = Vec::new();
    for full in rows.iter().filter(|r| r.dropped.is_none()) {
        for r in rows.iter().filter(|r| r.table == full.table && r.dropped.is_some()) {
            if !(r.sse >= full.sse && r.p_value > full.p_value) {
                bad.push(format!("{} without {}", r.table, PROPERTY_LABELS[r.dropped.unwrap_or(0)]));
            }
        }
    }
    let tables = rows.iter().filter(|r| r.dropped.is_none()).count();
    Check {
        id: 5,
        name: "ablation dominance",
        passed: bad.is_empty() && tables > 0,
        detail: if bad.is_empty() {
            format!("all {} leave-one-out fits over {tables} tables have SSE >= full and larger p", 4 * tables)
        } else {
            format!("violations: {}", bad.join(", "))
        },
    }
}

fn check_null(s: &NullSummary, elapsed: Duration) -> Check {
    let beat = s.p_values.iter().filter(|&&p| p < s.real_p).count();
    let fidelity = s.max_corr_deviation <= FABRICATION_TOLERANCE && s.max_rsq_deviation <= FABRICATION_TOLERANCE;
    Check {
        id: 6,
        name: "null simulation",
        passed: s.fraction_below <= NULL_BEAT_LIMIT && fidelity && elapsed < NULL_BUDGET,
        detail: format!(
            "{beat}/{} completed trials beat real p {:.3e} ({} uncalibrated); max corr deviation {:.5}, max R2 deviation {:.5}; fabricated p mean {:.3e} std {:.3e}",
            s.p_values.len(),
            s.real_p,
            s.failures,
            s.max_corr_deviation,
            s.max_rsq_deviation,
            s.mean_p,
            s.std_p
        ),
    }
}

/// Runs every appendix check. `seed` drives the null simulation only.
pub fn reproduce(fx: &FixtureSet, trials: usize, seed: u64) -> Result<AppendixOutcome> {
    let tables = fx.tables()?;
    let se = fx.se_table()?;

    let start = Instant::now();
    let replay = se_replay(&se);
    let se_replay_time = start.elapsed();

    let corr = correlations(&tables)?;
    let abl = ablations(&tables)?;

    let ae: Vec<&PropertyTable<f64>> = tables.iter().filter(|t| t.algorithm == "ae").collect();
    let pooled_ae = PropertyTable::pooled(&ae, "ae", "pooled");
    let start = Instant::now();
    let null = null_simulation(&pooled_ae, trials, derive_seed(seed, "appendix/nullsim"))?;
    let null_time = start.elapsed();

    let checks = vec![
        check_se_identity(&replay, se_replay_time),
        check_whole_aggregate(&replay),
        check_landscape(&tables),
        check_ordering(&corr),
        check_ablation(&abl),
        check_null(&null, null_time),
    ];
    Ok(AppendixOutcome { checks, se_replay: replay, correlations: corr, ablations: abl, null, se_replay_time, null_time })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), fmt12)
}

pub fn summary_text(o: &AppendixOutcome) -> String {
    let mut s = String::new();
    for c in &o.checks {
        s.push_str(&format!(
            "criterion {}: {} {}: {}\n",
            c.id,
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        ));
    }
    let passed = o.checks.iter().filter(|c| c.passed).count();
    s.push_str(&format!("{passed}/{} checks passed\n", o.checks.len()));
    s
}

/// Writes the summary and supporting tables.
pub fn emit(o: &AppendixOutcome, out: &mut OutputDir) -> Result<()> {
    out.text("summary.txt", summary_text(o))?;
    out.text_with("se_replay.csv", |w| {
        writeln!(w, "tag,row_min,whole_model,match")?;
        for r in &o.se_replay {
            writeln!(w, "{},{},{},{}", r.tag, opt(r.row_min), opt(r.whole), u8::from(r.row_min.is_some() && r.row_min == r.whole))?;
        }
        Ok(())
    })?;
    out.text_with("correlations.csv", |w| {
        writeln!(w, "algorithm,property,n,corr,rsq,caption_corr,caption_rsq")?;
        for r in &o.correlations {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.algorithm,
                PROPERTY_LABELS[r.property],
                r.n,
                opt(r.corr),
                opt(r.rsq),
                r.caption_corr,
                r.caption_rsq
            )?;
        }
        Ok(())
    })?;
    out.text_with("ablation.csv", |w| {
        writeln!(w, "table,dropped,sse,p")?;
        for r in &o.ablations {
            let dropped = r.dropped.map_or("none", |d| PROPERTY_LABELS[d]);
            writeln!(w, "{},{},{},{}", r.table, dropped, fmt12(r.sse), fmt12(r.p_value))?;
        }
        Ok(())
    })?;
    out.text_with("nullsim.csv", |w| {
        writeln!(w, "trial,p")?;
        for (i, p) in o.null.p_values.iter().enumerate() {
            writeln!(w, "{i},{}", fmt12(*p))?;
        }
        Ok(())
    })?;
    Ok(())
}
