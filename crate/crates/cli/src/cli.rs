//! Argument parsing and the nine subcommands.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use adfair_core::dataset::{group_performance, load_dataset, write_dataset, LoadOptions};
use adfair_core::detectors::{
    run_detector, score_autoencoder, score_one_class, train_autoencoder, train_one_class, Checkpoint,
    DetectorKind, DetectorOutput, Model,
};
use adfair_core::fairness::{audit, measure_tag, write_report, GroupAuditRecord, PropertyValues};
use adfair_core::fmt::fmt12;
use adfair_core::nn::TrainConfig;
use adfair_core::rng::derive_seed;
use adfair_core::stats::{
    ablate_leave_one_out, correlation_matrix, fit_simple, fit_stacked, null_simulation, property_fits,
    write_fit_report, PropertyTable, PROPERTY_LABELS,
};
use adfair_core::synth::{BiasKind, BiasSpec, DatasetManifest, OutlierMode};
use adfair_core::{Dataset, Table};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{ExperimentConfig, Source, DEFAULT_N_SEEDS, DEFAULT_TRIALS};
use crate::fixtures::FixtureSet;
use crate::output::{config_hash, OutputDir};
use crate::plot::{histogram, scatter, PointSet};
use crate::{appendix, exit_code, grid, UsageError, EXIT_OK, EXIT_USAGE};

pub const SEED_ENV: &str = "ADFAIR_SEED";
pub const DEFAULT_OUT: &str = "adfair-out";

#[derive(Debug, Parser)]
#[command(name = "adfair", version, about = "Audit group unfairness in unsupervised outlier detectors")]
pub struct Cli {
    /// Experiment file (TOML); flags override its keys.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Root seed; every stage derives its own stream from it.
    #[arg(long, global = true, env = SEED_ENV)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, short, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// More log output (repeatable).
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Print nothing on success.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a two-group synthetic dataset.
    Generate(GenerateArgs),
    /// Inject one kind of bias into group b.
    Inject(InjectArgs),
    /// Score and flag a dataset with one detector.
    Detect(DetectArgs),
    /// Per-tag fairness properties, median over seeds.
    Audit(AuditArgs),
    /// Property-vs-DIR regressions, stacked fit and ablation.
    Regress(TableArgs),
    /// Fabricated-null simulation for the stacked fit.
    Nullsim(NullArgs),
    /// Detection metrics per group across bias kinds and intensities.
    Biasgrid(GridArgs),
    /// Replay the published property tables and check them.
    ReproduceAppendix(AppendixArgs),
    /// Plots for a property table or audit CSV.
    Report(ReportArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Generate(_) => "generate",
            Command::Inject(_) => "inject",
            Command::Detect(_) => "detect",
            Command::Audit(_) => "audit",
            Command::Regress(_) => "regress",
            Command::Nullsim(_) => "nullsim",
            Command::Biasgrid(_) => "biasgrid",
            Command::ReproduceAppendix(_) => "reproduce-appendix",
            Command::Report(_) => "report",
        }
    }
}

fn parse_dims(s: &str) -> Result<BTreeSet<usize>, String> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}")))
        .collect()
}

fn parse_unit(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

fn parse_rate(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is outside (0, 1)"))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenerateArgs {
    /// Rows per group.
    #[arg(long = "n")]
    pub n_per_group: Option<usize>,
    #[arg(long, value_parser = parse_unit)]
    pub base_rate: Option<f64>,
    #[arg(long, value_parser = ["clustered", "scattered"])]
    pub mode: Option<String>,
    /// Feature count.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub manifold_rank: Option<usize>,
    /// Comma-separated proxy feature indices.
    #[arg(long, value_parser = parse_dims)]
    pub proxy_dims: Option<BTreeSet<usize>>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// Dataset CSV.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Foreground-mask file; defaults to `mask.txt` beside the input.
    #[arg(long)]
    pub mask: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InjectArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub kind: BiasKind,
    #[arg(long, value_parser = parse_unit)]
    pub beta: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DetectorArgs {
    #[arg(long)]
    pub detector: DetectorKind,
    #[arg(long, value_parser = parse_rate)]
    pub contamination: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lof_k: Option<usize>,
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long)]
    pub trees: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DetectArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub detector: DetectorArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AuditArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub detector: DetectorArgs,
    /// Comma-separated tags; all tags when omitted.
    #[arg(long, value_delimiter = ',')]
    pub tags: Option<Vec<String>>,
    #[arg(long)]
    pub n_seeds: Option<usize>,
    /// Use flags from an existing scores CSV instead of running the detector.
    #[arg(long)]
    pub scores: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TableArgs {
    /// Property table CSV (tag,DIR,reconstruction_ratio,SSB,SFV,label_noise).
    #[arg(long, conflicts_with = "fixture")]
    pub table: Option<PathBuf>,
    /// Shipped table id, such as celeba_ae.
    #[arg(long)]
    pub fixture: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct NullArgs {
    #[command(flatten)]
    pub table: TableArgs,
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GridArgs {
    #[arg(long)]
    pub n_seeds: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub kinds: Option<Vec<BiasKind>>,
    #[arg(long, value_delimiter = ',')]
    pub detectors: Option<Vec<DetectorKind>>,
    /// Rows per group.
    #[arg(long = "n")]
    pub n_per_group: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AppendixArgs {
    /// Directory with the five fixture CSVs and SHA256SUMS; the built-in copies otherwise.
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReportArgs {
    #[command(flatten)]
    pub table: TableArgs,
    /// Histogram bins for DIR.
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
}

/// Parses arguments, runs the command and maps the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

/// Everything a command needs after flags and the config file are merged.
struct Ctx {
    cfg: ExperimentConfig,
    seed: u64,
    out: PathBuf,
    command: &'static str,
}

impl Ctx {
    fn output(&self, args: &impl Serialize, inputs: &[&Path], extra: serde_json::Value) -> Result<OutputDir> {
        let settings = serde_json::json!({
            "command": self.command,
            "seed": self.seed,
            "config": self.cfg,
            "args": args,
            "extra": extra,
        });
        let hash = config_hash(&settings, inputs)?;
        OutputDir::create(&self.out, self.command, settings, hash)
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let ctx = Ctx {
        seed: cfg.root_seed(cli.seed),
        out: cli.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
        command: cli.command.name(),
        cfg,
    };
    match &cli.command {
        Command::Generate(a) => generate(&ctx, a),
        Command::Inject(a) => inject(&ctx, a),
        Command::Detect(a) => detect(&ctx, a),
        Command::Audit(a) => audit_cmd(&ctx, a),
        Command::Regress(a) => regress(&ctx, a),
        Command::Nullsim(a) => nullsim(&ctx, a),
        Command::Biasgrid(a) => biasgrid(&ctx, a),
        Command::ReproduceAppendix(a) => reproduce(&ctx, a, cli.quiet),
        Command::Report(a) => report(&ctx, a),
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn complement(mask: &BTreeSet<usize>, d: usize) -> BTreeSet<usize> {
    (0..d).filter(|k| !mask.contains(k)).collect()
}

fn mask_path(a: &InputArgs) -> Option<PathBuf> {
    a.mask.clone().or_else(|| {
        let sib = a.input.with_file_name("mask.txt");
        sib.exists().then_some(sib)
    })
}

/// Loads a dataset; a foreground mask, when present, also fixes the proxy dims.
fn load_input(a: &InputArgs) -> Result<(Dataset, Vec<PathBuf>)> {
    if !a.input.exists() {
        return Err(usage(format!("input {} does not exist", a.input.display())));
    }
    let mask = mask_path(a);
    let ds: Dataset = load_dataset(&a.input, &LoadOptions { id: None, mask: mask.clone() })?;
    let ds = match ds.foreground_mask().cloned() {
        Some(m) => {
            let d = ds.d();
            ds.with_proxy_dims(complement(&m, d))?
        }
        None => ds,
    };
    let mut inputs = vec![a.input.clone()];
    inputs.extend(mask);
    Ok((ds, inputs))
}

fn emit_dataset_files(out: &mut OutputDir, ds: &Dataset, manifest: &DatasetManifest) -> Result<()> {
    out.text_with("dataset.csv", |w| write_dataset(ds, w))?;
    let fg = ds
        .foreground_mask()
        .cloned()
        .or_else(|| ds.proxy_dims().map(|p| complement(p, ds.d())));
    if let Some(fg) = fg {
        let body: String = fg.iter().map(|k| format!("{k}\n")).collect();
        out.text("mask.txt", body)?;
    }
    out.json("dataset.json", manifest)?;
    Ok(())
}

fn generate(ctx: &Ctx, a: &GenerateArgs) -> Result<()> {
    let mut cfg = ctx.cfg.clone();
    let s = &mut cfg.synthetic;
    s.n_per_group = a.n_per_group.or(s.n_per_group);
    s.base_rate = a.base_rate.or(s.base_rate);
    s.d = a.d.or(s.d);
    s.manifold_rank = a.manifold_rank.or(s.manifold_rank);
    s.proxy_dims = a.proxy_dims.clone().or(s.proxy_dims.take());
    if let Some(m) = &a.mode {
        s.outlier_mode = Some(if m == "scattered" { OutlierMode::Scattered } else { OutlierMode::Clustered });
    }
    let spec = cfg.synth_spec(derive_seed(ctx.seed, "generate"));
    spec.validate().map_err(|e| usage(e.to_string()))?;
    let mut out = ctx.output(a, &[], serde_json::json!({ "spec": spec }))?;
    let ds: Dataset = out.stage("generate", Some(spec.seed), |_| Ok(adfair_core::synth::generate(&spec)?))?;
    let manifest = DatasetManifest::describe(&ds, Some(&spec), None);
    emit_dataset_files(&mut out, &ds, &manifest)?;
    out.finish()?;
    Ok(())
}

fn inject(ctx: &Ctx, a: &InjectArgs) -> Result<()> {
    let (ds, inputs) = load_input(&a.input)?;
    let bias = BiasSpec { kind: a.kind, beta: a.beta, seed: derive_seed(ctx.seed, "inject") };
    let refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    let mut out = ctx.output(a, &refs, serde_json::Value::Null)?;
    let biased = out.stage("inject", Some(bias.seed), |_| Ok(adfair_core::synth::inject(&ds, &bias)?))?;
    let manifest = DatasetManifest::describe(&biased, None, Some(&bias));
    emit_dataset_files(&mut out, &biased, &manifest)?;
    out.finish()?;
    Ok(())
}

fn detector_config(ctx: &Ctx, a: &DetectorArgs) -> ExperimentConfig {
    let mut cfg = ctx.cfg.clone();
    cfg.contamination = a.contamination.or(cfg.contamination);
    cfg.train.epochs = a.epochs.or(cfg.train.epochs);
    cfg.detector.lof_k = a.lof_k.or(cfg.detector.lof_k);
    cfg.detector.clusters = a.clusters.or(cfg.detector.clusters);
    cfg.detector.iforest_trees = a.trees.or(cfg.detector.iforest_trees);
    cfg
}

fn write_performance(out: &mut OutputDir, ds: &Dataset, flags: &[bool]) -> Result<()> {
    if ds.outlier_truth().is_none() || ds.tags().is_empty() {
        return Ok(());
    }
    let tags: Vec<String> = ds.tags().iter().map(|t| t.name.clone()).collect();
    out.text_with("performance.csv", |w| {
        writeln!(w, "tag,group,flagged,rows,flag_rate,tpr,fpr,precision,f1")?;
        for t in &tags {
            let Ok(p) = group_performance::<f64>(ds, flags, t) else { continue };
            for (g, perf) in [("a", p.complement), ("b", p.group), ("overall", p.overall)] {
                let c = |m: adfair_core::Measured<f64>| m.value().map_or_else(|| "NA".into(), fmt12);
                writeln!(
                    w,
                    "{t},{g},{},{},{},{},{},{},{}",
                    perf.counts.flagged(),
                    perf.counts.total(),
                    c(perf.flag_rate),
                    c(perf.tpr),
                    c(perf.fpr),
                    c(perf.precision),
                    c(perf.f1)
                )?;
            }
        }
        Ok(())
    })?;
    Ok(())
}

fn detect(ctx: &Ctx, a: &DetectArgs) -> Result<()> {
    let (ds, inputs) = load_input(&a.input)?;
    let cfg = detector_config(ctx, &a.detector);
    let spec = cfg.detector_spec(a.detector.detector, ds.d());
    let seed = derive_seed(ctx.seed, "detect");
    let refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    let mut out = ctx.output(a, &refs, serde_json::json!({ "spec": spec }))?;
    let hash = out.hash().to_string();
    let (output, model) = out.stage("detect", Some(seed), |_| {
        let train = TrainConfig { seed, ..spec.train.clone() };
        let contamination = spec.contamination_for(&ds);
        Ok(match spec.kind {
            DetectorKind::Autoencoder => {
                let (ae, _) = train_autoencoder(&ds, &spec.autoencoder_arch(ds.d()), &train)?;
                let scores = score_autoencoder(&ae, &ds)?;
                (DetectorOutput::new(spec.kind.name(), seed, scores, contamination)?, Some(Model::Autoencoder(ae)))
            }
            DetectorKind::OneClass => {
                let (m, _) = train_one_class(&ds, &spec.one_class_arch(ds.d()), &train)?;
                let scores = score_one_class(&m, &ds)?;
                (DetectorOutput::new(spec.kind.name(), seed, scores, contamination)?, Some(Model::OneClass(m)))
            }
            _ => (run_detector(&ds, &spec, seed)?.output, None),
        })
    })?;
    out.text_with("scores.csv", |w| output.write_csv(w))?;
    if let Some(model) = model {
        let ckpt = Checkpoint { model, seed, config_hash: hash };
        std::fs::write(out.path("model.ckpt"), ckpt.to_text())?;
        out.adopt("model.ckpt");
    }
    write_performance(&mut out, &ds, &output.flags)?;
    out.finish()?;
    Ok(())
}

fn audit_cmd(ctx: &Ctx, a: &AuditArgs) -> Result<()> {
    let (ds, mut inputs) = load_input(&a.input)?;
    let cfg = detector_config(ctx, &a.detector);
    let spec = cfg.detector_spec(a.detector.detector, ds.d());
    let n_seeds = a.n_seeds.or(cfg.n_seeds).unwrap_or(DEFAULT_N_SEEDS);
    if n_seeds == 0 {
        return Err(usage("--n-seeds must be positive"));
    }
    if let Some(t) = &a.tags {
        for tag in t {
            if ds.tag(tag).is_none() {
                return Err(usage(format!("dataset has no tag `{tag}`")));
            }
        }
    }
    inputs.extend(a.scores.clone());
    let refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    let mut out = ctx.output(a, &refs, serde_json::json!({ "spec": spec, "n_seeds": n_seeds }))?;
    let seed = derive_seed(ctx.seed, "audit");
    let records: Vec<GroupAuditRecord<f64>> = out.stage("audit", Some(seed), |_| match &a.scores {
        None => Ok(audit(&ds, &spec, a.tags.as_deref(), n_seeds, seed)?),
        Some(path) => {
            let (_, flags) = adfair_core::detectors::read_scores(path)?;
            if flags.len() != ds.n() {
                bail!("{} has {} rows, dataset has {}", path.display(), flags.len(), ds.n());
            }
            let train = TrainConfig { seed, ..spec.train.clone() };
            let recon = train_autoencoder(&ds, &spec.autoencoder_arch(ds.d()), &train)?.0.reconstruction(&ds)?;
            let tags: Vec<String> = match &a.tags {
                Some(t) => t.clone(),
                None => ds.tags().iter().map(|t| t.name.clone()).collect(),
            };
            tags.iter()
                .map(|t| {
                    let v: PropertyValues<f64> = measure_tag(&ds, &flags, &recon, t)?;
                    Ok(GroupAuditRecord::from_runs(t.clone(), "scores", ds.id(), &[v])?)
                })
                .collect()
        }
    })?;
    out.text_with("audit.csv", |w| write_report(&records, w))?;
    out.finish()?;
    Ok(())
}

fn load_table(fixture: &Option<String>, table: &Option<PathBuf>) -> Result<(Table, Vec<PathBuf>, Option<String>)> {
    match (table, fixture) {
        (Some(p), _) => {
            if !p.exists() {
                return Err(usage(format!("table {} does not exist", p.display())));
            }
            let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok((PropertyTable::load(p, "table", &stem)?, vec![p.clone()], None))
        }
        (None, Some(id)) => {
            let fx = FixtureSet::embedded()?;
            if !crate::fixtures::TABLES.iter().any(|(i, _, _)| i == id) {
                return Err(usage(format!("unknown fixture `{id}`")));
            }
            Ok((fx.table(id)?, Vec::new(), Some(fx.digest())))
        }
        (None, None) => Err(usage("pass --table FILE or --fixture ID")),
    }
}

fn resolve_table(ctx: &Ctx, a: &TableArgs) -> Result<(Table, Vec<PathBuf>, Option<String>)> {
    if a.table.is_some() || a.fixture.is_some() {
        return load_table(&a.fixture, &a.table);
    }
    match ctx.cfg.source() {
        Source::File(p) => load_table(&None, &Some(p)),
        Source::Fixture(id) => load_table(&Some(id), &None),
        Source::Synthetic => Err(usage("pass --table FILE or --fixture ID")),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), fmt12)
}

fn regress(ctx: &Ctx, a: &TableArgs) -> Result<()> {
    let (table, inputs, digest) = resolve_table(ctx, a)?;
    let refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    if table.len() < adfair_core::stats::STACKED_PARAMS + 1 {
        bail!(adfair_core::Error::InsufficientRows { needed: adfair_core::stats::STACKED_PARAMS + 1, found: table.len() });
    }
    let mut out = ctx.output(a, &refs, serde_json::json!({ "fixtures": digest }))?;
    let (fits, stacked, ablations, corr) = out.stage("regress", None, |_| {
        Ok((property_fits(&table)?, fit_stacked(&table)?, ablate_leave_one_out(&table)?, correlation_matrix(&table)?))
    })?;
    out.text_with("fits.csv", |w| write_fit_report(&fits, w))?;
    out.text_with("stacked_se.csv", |w| stacked.se_table(&table).write_csv(w))?;
    out.text_with("stacked.csv", |w| {
        writeln!(w, "model,n,sse,sst,F,p")?;
        writeln!(w, "full,{},{},{},{},{}", stacked.n(), fmt12(stacked.sse), fmt12(stacked.sst), fmt12(stacked.f_stat), fmt12(stacked.p_value))?;
        for (d, f) in ablations.iter().enumerate() {
            writeln!(
                w,
                "without_{},{},{},{},{},{}",
                PROPERTY_LABELS[d],
                f.n(),
                fmt12(f.sse),
                fmt12(f.sst),
                fmt12(f.f_stat),
                fmt12(f.p_value)
            )?;
        }
        Ok(())
    })?;
    out.text_with("correlation_matrix.csv", |w| {
        writeln!(w, "property,{}", PROPERTY_LABELS.join(","))?;
        for (i, row) in corr.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|&c| opt(c)).collect();
            writeln!(w, "{},{}", PROPERTY_LABELS[i], cells.join(","))?;
        }
        Ok(())
    })?;
    emit_scatters(&mut out, &table)?;
    out.finish()?;
    Ok(())
}

/// One scatter per property with its least-squares line.
fn emit_scatters(out: &mut OutputDir, table: &Table) -> Result<()> {
    for (p, label) in PROPERTY_LABELS.iter().enumerate() {
        let (_, x, y) = table.column(p);
        if x.is_empty() {
            continue;
        }
        let fit = if x.len() >= 3 { fit_simple(&x, &y)? } else { None };
        let title = match &fit {
            Some(f) => format!("{label} vs DIR (corr {:.3}, R2 {:.3})", f.pearson, f.r2),
            None => format!("{label} vs DIR"),
        };
        let set = PointSet { label: table.dataset.clone(), points: x.iter().copied().zip(y.iter().copied()).collect() };
        let svg = scatter(&title, label, "DIR", &[set], fit.map(|f| (f.slope, f.intercept)));
        out.svg(&format!("scatter_{label}.svg"), &svg)?;
    }
    Ok(())
}

fn nullsim(ctx: &Ctx, a: &NullArgs) -> Result<()> {
    let (table, inputs, digest) = resolve_table(ctx, &a.table)?;
    let trials = a.trials.or(ctx.cfg.nullsim.trials).unwrap_or(DEFAULT_TRIALS);
    if trials == 0 {
        return Err(usage("--trials must be positive"));
    }
    let refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    let mut out = ctx.output(a, &refs, serde_json::json!({ "trials": trials, "fixtures": digest }))?;
    let seed = derive_seed(ctx.seed, "nullsim");
    let s = out.stage("nullsim", Some(seed), |_| Ok(null_simulation(&table, trials, seed)?))?;
    out.text_with("nullsim.csv", |w| {
        writeln!(w, "trial,p")?;
        for (i, p) in s.p_values.iter().enumerate() {
            writeln!(w, "{i},{}", fmt12(*p))?;
        }
        Ok(())
    })?;
    out.text_with("nullsim_summary.csv", |w| {
        writeln!(w, "real_p,trials,failures,fraction_below,mean_p,std_p,max_corr_deviation,max_rsq_deviation")?;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            fmt12(s.real_p),
            s.trials,
            s.failures,
            fmt12(s.fraction_below),
            fmt12(s.mean_p),
            fmt12(s.std_p),
            fmt12(s.max_corr_deviation),
            fmt12(s.max_rsq_deviation)
        )
    })?;
    out.finish()?;
    Ok(())
}

fn biasgrid(ctx: &Ctx, a: &GridArgs) -> Result<()> {
    let mut cfg = ctx.cfg.clone();
    if !matches!(cfg.source(), Source::Synthetic) {
        return Err(usage("biasgrid needs a synthetic source"));
    }
    cfg.n_seeds = a.n_seeds.or(cfg.n_seeds);
    if cfg.n_seeds == Some(0) {
        return Err(usage("--n-seeds must be positive"));
    }
    if let Some(k) = &a.kinds {
        cfg.grid.kinds = Some(k.clone());
    }
    if let Some(d) = &a.detectors {
        cfg.grid.detectors = Some(d.iter().map(|k| k.name().to_string()).collect());
    }
    cfg.synthetic.n_per_group = a.n_per_group.or(cfg.synthetic.n_per_group);
    cfg.train.epochs = a.epochs.or(cfg.train.epochs);
    cfg.validate().map_err(usage)?;
    let mut out = ctx.output(a, &[], serde_json::json!({ "resolved": cfg }))?;
    let result = out.stage("biasgrid", Some(ctx.seed), |_| grid::run_grid(&cfg, ctx.seed))?;
    grid::emit(&result, &mut out)?;
    out.finish()?;
    Ok(())
}

fn reproduce(ctx: &Ctx, a: &AppendixArgs, quiet: bool) -> Result<()> {
    let trials = a.trials.or(ctx.cfg.nullsim.trials).unwrap_or(DEFAULT_TRIALS);
    if trials == 0 {
        return Err(usage("--trials must be positive"));
    }
    if let Some(dir) = &a.fixtures {
        if !dir.is_dir() {
            return Err(usage(format!("fixture directory {} does not exist", dir.display())));
        }
    }
    let fx = FixtureSet::load(a.fixtures.as_deref()).context("loading fixtures")?;
    let mut out = ctx.output(&trials, &[], serde_json::json!({ "fixtures": fx.digest() }))?;
    let outcome = out.stage("reproduce", Some(ctx.seed), |_| appendix::reproduce(&fx, trials, ctx.seed))?;
    appendix::emit(&outcome, &mut out)?;
    out.finish()?;
    if !quiet {
        print!("{}", appendix::summary_text(&outcome));
    }
    Ok(())
}

fn report(ctx: &Ctx, a: &ReportArgs) -> Result<()> {
    let (table, inputs, digest) = resolve_table(ctx, &a.table)?;
    if table.is_empty() {
        log::info!("empty table; nothing to plot");
        return Ok(());
    }
    let refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    let mut out = ctx.output(a, &refs, serde_json::json!({ "fixtures": digest }))?;
    let dirs = table.dir_values();
    let (svg, counts) = histogram(
        &format!("DIR over {} groups", dirs.len()),
        "DIR",
        &dirs,
        a.bins,
        Some(appendix::DIR_FAIR_THRESHOLD),
    );
    out.svg("dir_histogram.svg", &svg)?;
    out.text_with("dir_histogram.csv", |w| {
        writeln!(w, "bin,count")?;
        for (i, c) in counts.iter().enumerate() {
            writeln!(w, "{i},{c}")?;
        }
        Ok(())
    })?;
    emit_scatters(&mut out, &table)?;
    out.finish()?;
    Ok(())
}
