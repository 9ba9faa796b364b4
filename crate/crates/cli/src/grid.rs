//! Bias grid: every (bias kind, β, detector, seed) job on synthetic data,
//! reduced to per-group detection metrics.

use std::collections::BTreeMap;
use std::io::Write;

use adfair_core::dataset::{group_performance, GroupPerformance};
use adfair_core::detectors::{run_detector, DetectorKind};
use adfair_core::fmt::fmt12;
use adfair_core::rng::{derive_index, derive_seed};
use adfair_core::synth::{generate, inject, BiasKind, BiasSpec, GROUP_TAG};
use adfair_core::Dataset;
use anyhow::{Context, Result};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::output::OutputDir;
use crate::plot::{line_panels, Panel, Series};

pub const METRICS: [&str; 5] = ["flag_rate", "tpr", "fpr", "precision", "f1"];
/// `a` is the complement of the group tag, `b` the tagged group.
pub const GROUPS: [&str; 3] = ["a", "b", "overall"];

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub kind: BiasKind,
    pub beta: f64,
    pub detector: DetectorKind,
    pub seed: usize,
    pub group: &'static str,
    pub metric: &'static str,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MedianRow {
    pub kind: BiasKind,
    pub beta: f64,
    pub detector: DetectorKind,
    pub group: &'static str,
    pub metric: &'static str,
    pub median: Option<f64>,
    pub defined: usize,
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub rows: Vec<GridRow>,
    pub medians: Vec<MedianRow>,
}

impl GridResult {
    pub fn median(&self, kind: BiasKind, beta: f64, detector: DetectorKind, group: &str, metric: &str) -> Option<f64> {
        self.medians
            .iter()
            .find(|m| m.kind == kind && m.beta == beta && m.detector == detector && m.group == group && m.metric == metric)
            .and_then(|m| m.median)
    }
}

fn metric(p: &GroupPerformance<f64>, name: &str) -> Option<f64> {
    match name {
        "flag_rate" => p.flag_rate.value(),
        "tpr" => p.tpr.value(),
        "fpr" => p.fpr.value(),
        "precision" => p.precision.value(),
        _ => p.f1.value(),
    }
}

/// Median of the defined values.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Per-seed dataset stream roots.
pub fn seed_root(root: u64, s: usize) -> u64 {
    derive_index(root, s as u64)
}

struct Job {
    seed: usize,
    cell: Option<(BiasKind, f64)>,
    detector: DetectorKind,
}

/// Runs the grid. β = 0 is evaluated once per (seed, detector) and reported under every kind.
pub fn run_grid(cfg: &ExperimentConfig, root: u64) -> Result<GridResult> {
    let n_seeds = cfg.n_seeds.unwrap_or(crate::config::DEFAULT_N_SEEDS);
    let kinds = cfg.grid_kinds();
    let detectors = cfg.grid_detectors();

    let bases: Vec<Dataset> = (0..n_seeds)
        .into_par_iter()
        .map(|s| generate(&cfg.synth_spec(derive_seed(seed_root(root, s), "grid/data"))))
        .collect::<adfair_core::Result<_>>()
        .context("generating grid datasets")?;

    let cells: Vec<(BiasKind, f64)> = kinds
        .iter()
        .flat_map(|&k| cfg.grid_betas(k).into_iter().filter(|&b| b > 0.0).map(move |b| (k, b)))
        .collect();
    let injected: BTreeMap<(usize, usize), Dataset> = (0..n_seeds)
        .flat_map(|s| (0..cells.len()).map(move |c| (s, c)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(s, c)| {
            let (kind, beta) = cells[c];
            let spec = BiasSpec { kind, beta, seed: derive_seed(seed_root(root, s), "grid/inject") };
            inject(&bases[s], &spec).map(|ds| ((s, c), ds))
        })
        .collect::<adfair_core::Result<_>>()
        .context("injecting bias")?;

    let mut jobs = Vec::new();
    for s in 0..n_seeds {
        for &detector in &detectors {
            jobs.push(Job { seed: s, cell: None, detector });
            for &cell in &cells {
                jobs.push(Job { seed: s, cell: Some(cell), detector });
            }
        }
    }
    let cell_index: BTreeMap<(BiasKind, u64), usize> =
        cells.iter().enumerate().map(|(i, &(k, b))| ((k, b.to_bits()), i)).collect();

    let outcomes: Vec<[GroupPerformance<f64>; 3]> = jobs
        .par_iter()
        .map(|job| {
            let ds = match job.cell {
                None => &bases[job.seed],
                Some((k, b)) => &injected[&(job.seed, cell_index[&(k, b.to_bits())])],
            };
            let spec = cfg.detector_spec(job.detector, ds.d());
            let seed = derive_seed(seed_root(root, job.seed), "grid/detect");
            let run = run_detector(ds, &spec, seed)
                .with_context(|| format!("{} on {:?} seed {}", job.detector, job.cell, job.seed))?;
            let perf = group_performance(ds, &run.output.flags, GROUP_TAG)?;
            Ok([perf.complement, perf.group, perf.overall])
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (job, perf) in jobs.iter().zip(&outcomes) {
        let targets: Vec<(BiasKind, f64)> = match job.cell {
            Some(c) => vec![c],
            None => kinds.iter().map(|&k| (k, 0.0)).collect(),
        };
        for (kind, beta) in targets {
            for (g, p) in GROUPS.iter().zip(perf) {
                for m in METRICS {
                    rows.push(GridRow {
                        kind,
                        beta,
                        detector: job.detector,
                        seed: job.seed,
                        group: g,
                        metric: m,
                        value: metric(p, m),
                    });
                }
            }
        }
    }
    rows.sort_by(|a, b| {
        (a.kind, a.detector, a.seed)
            .cmp(&(b.kind, b.detector, b.seed))
            .then(a.beta.total_cmp(&b.beta))
    });
    let medians = medians(&rows);
    Ok(GridResult { rows, medians })
}

fn medians(rows: &[GridRow]) -> Vec<MedianRow> {
    let mut cells: BTreeMap<(BiasKind, DetectorKind, u64, usize, usize), Vec<f64>> = BTreeMap::new();
    for r in rows {
        let g = GROUPS.iter().position(|&x| x == r.group).unwrap_or(0);
        let m = METRICS.iter().position(|&x| x == r.metric).unwrap_or(0);
        let slot = cells.entry((r.kind, r.detector, r.beta.to_bits(), g, m)).or_default();
        if let Some(v) = r.value {
            slot.push(v);
        }
    }
    let mut out: Vec<MedianRow> = cells
        .into_iter()
        .map(|((kind, detector, beta, g, m), v)| MedianRow {
            kind,
            beta: f64::from_bits(beta),
            detector,
            group: GROUPS[g],
            metric: METRICS[m],
            median: median(&v),
            defined: v.len(),
        })
        .collect();
    out.sort_by(|a, b| {
        (a.kind, a.detector)
            .cmp(&(b.kind, b.detector))
            .then(a.beta.total_cmp(&b.beta))
            .then(a.group.cmp(b.group))
            .then(a.metric.cmp(b.metric))
    });
    out
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), fmt12)
}

pub fn emit(result: &GridResult, out: &mut OutputDir) -> Result<()> {
    out.text_with("grid.csv", |w| {
        writeln!(w, "kind,beta,detector,seed,group,metric,value")?;
        for r in &result.rows {
            writeln!(w, "{},{},{},{},{},{},{}", r.kind, fmt12(r.beta), r.detector, r.seed, r.group, r.metric, cell(r.value))?;
        }
        Ok(())
    })?;
    out.text_with("grid_medians.csv", |w| {
        writeln!(w, "kind,beta,detector,group,metric,median,defined")?;
        for r in &result.medians {
            writeln!(w, "{},{},{},{},{},{},{}", r.kind, fmt12(r.beta), r.detector, r.group, r.metric, cell(r.median), r.defined)?;
        }
        Ok(())
    })?;
    let mut pairs: Vec<(BiasKind, DetectorKind)> = result.medians.iter().map(|m| (m.kind, m.detector)).collect();
    pairs.dedup();
    for (kind, detector) in pairs {
        let panels: Vec<Panel> = METRICS
            .iter()
            .map(|&metric| Panel {
                title: metric.to_string(),
                series: GROUPS
                    .iter()
                    .map(|&group| Series {
                        label: format!("group {group}"),
                        points: result
                            .medians
                            .iter()
                            .filter(|m| m.kind == kind && m.detector == detector && m.group == group && m.metric == metric)
                            .map(|m| (m.beta, m.median))
                            .collect(),
                    })
                    .collect(),
            })
            .collect();
        let svg = line_panels(&format!("{detector} under {kind} bias (median over seeds)"), kind.beta_symbol(), &panels);
        out.svg(&format!("plots/{kind}_{detector}.svg"), &svg)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_ignores_undefined() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, f64::NAN, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn small_grid_shares_baseline_across_kinds() {
        let cfg = ExperimentConfig::parse(
            r#"
n_seeds = 2
[synthetic]
n_per_group = 60
[grid]
kinds = ["sample_size", "obfuscation"]
detectors = ["iforest"]
betas = { sample_size = [0.5], obfuscation = [0.2] }
"#,
        )
        .unwrap();
        let r = run_grid(&cfg, 3).unwrap();
        assert_eq!(r.rows.len(), 2 * 2 * 2 * 15);
        let base = |k| r.median(k, 0.0, DetectorKind::Iforest, "b", "flag_rate");
        assert!(base(BiasKind::SampleSize).is_some());
        assert_eq!(base(BiasKind::SampleSize), base(BiasKind::Obfuscation));
        let again = run_grid(&cfg, 3).unwrap();
        assert_eq!(r.rows, again.rows);
    }
}
