//! Experiment configuration files (TOML) and their resolution against CLI flags.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use adfair_core::detectors::{AutoencoderArch, DetectorKind, DetectorSpec, IForestParams};
use adfair_core::nn::TrainConfig;
use adfair_core::synth::{BiasKind, OutlierMode, SynthSpec};
use serde::{Deserialize, Serialize};

use crate::UsageError;

pub const DEFAULT_N_SEEDS: usize = 5;
pub const DEFAULT_TRIALS: usize = 500;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub n_seeds: Option<usize>,
    pub contamination: Option<f64>,
    /// `synthetic`, `file:<path>` or `fixture:<id>`.
    pub source: Option<String>,
    pub synthetic: SyntheticSection,
    pub train: TrainSection,
    pub detector: DetectorSection,
    pub grid: GridSection,
    pub nullsim: NullSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSection {
    pub n_per_group: Option<usize>,
    pub base_rate: Option<f64>,
    pub d: Option<usize>,
    pub outlier_mode: Option<OutlierMode>,
    pub proxy_dims: Option<BTreeSet<usize>>,
    pub manifold_rank: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub weight_decay: Option<f64>,
    pub patience: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub latent: Option<usize>,
    pub hidden: Option<usize>,
    pub clusters: Option<usize>,
    pub lof_k: Option<usize>,
    pub iforest_trees: Option<usize>,
    pub iforest_subsample: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub kinds: Option<Vec<BiasKind>>,
    pub detectors: Option<Vec<String>>,
    /// Per-kind β ladders; a 0 baseline is always added.
    pub betas: BTreeMap<BiasKind, Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NullSection {
    pub trials: Option<usize>,
}

/// Where a command takes its rows from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    Synthetic,
    File(PathBuf),
    Fixture(String),
}

impl std::str::FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "synthetic" {
            Ok(Source::Synthetic)
        } else if let Some(p) = s.strip_prefix("file:") {
            Ok(Source::File(PathBuf::from(p)))
        } else if let Some(f) = s.strip_prefix("fixture:") {
            Ok(Source::Fixture(f.to_string()))
        } else {
            Err(format!("source must be `synthetic`, `file:<path>` or `fixture:<id>`, got `{s}`"))
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())).into())
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if let Some(c) = self.contamination {
            if !(c > 0.0 && c < 1.0) {
                return Err(format!("contamination must lie in (0, 1), got {c}"));
            }
        }
        if self.n_seeds == Some(0) {
            return Err("n_seeds must be positive".into());
        }
        for (kind, betas) in &self.grid.betas {
            if let Some(b) = betas.iter().find(|b| !(0.0..=1.0).contains(*b)) {
                return Err(format!("β values must lie in [0, 1]; {kind} lists {b}"));
            }
        }
        if let Some(d) = &self.grid.detectors {
            if d.is_empty() {
                return Err("grid.detectors must not be empty".into());
            }
            for name in d {
                name.parse::<DetectorKind>()?;
            }
        }
        if let Some(s) = &self.source {
            s.parse::<Source>()?;
        }
        Ok(())
    }

    pub fn source(&self) -> Source {
        self.source
            .as_deref()
            .and_then(|s| s.parse().ok())
            .unwrap_or(Source::Synthetic)
    }

    /// Seed precedence: explicit flag or `ADFAIR_SEED`, then the file, then 0.
    pub fn root_seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.seed).unwrap_or(0)
    }

    pub fn synth_spec(&self, seed: u64) -> SynthSpec {
        let s = &self.synthetic;
        let d = SynthSpec::default();
        SynthSpec {
            n_per_group: s.n_per_group.unwrap_or(d.n_per_group),
            base_rate: s.base_rate.unwrap_or(d.base_rate),
            d: s.d.unwrap_or(d.d),
            outlier_mode: s.outlier_mode.unwrap_or(d.outlier_mode),
            proxy_dims: s.proxy_dims.clone().unwrap_or(d.proxy_dims),
            manifold_rank: s.manifold_rank.unwrap_or(d.manifold_rank),
            seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        let d = TrainConfig::default();
        TrainConfig {
            epochs: t.epochs.unwrap_or(d.epochs),
            batch_size: t.batch_size.unwrap_or(d.batch_size),
            learning_rate: t.learning_rate.unwrap_or(d.learning_rate),
            weight_decay: t.weight_decay.unwrap_or(d.weight_decay),
            patience: t.patience.unwrap_or(d.patience),
            ..d
        }
    }

    /// Detector settings for a dataset of width `d`.
    pub fn detector_spec(&self, kind: DetectorKind, d: usize) -> DetectorSpec {
        let s = &self.detector;
        let base = DetectorSpec::new(kind);
        let autoencoder = match (s.hidden, s.latent) {
            (None, None) => None,
            (hidden, latent) => {
                let mut arch = AutoencoderArch::default_for(d);
                if let Some(h) = hidden {
                    arch.encoder[1] = h;
                }
                if let Some(l) = latent {
                    *arch.encoder.last_mut().expect("non-empty") = l;
                }
                Some(arch)
            }
        };
        DetectorSpec {
            train: self.train_config(),
            autoencoder,
            clusters: s.clusters.unwrap_or(base.clusters),
            lof_k: s.lof_k,
            iforest: IForestParams {
                n_trees: s.iforest_trees.unwrap_or(base.iforest.n_trees),
                subsample: s.iforest_subsample,
            },
            contamination: self.contamination,
            ..base
        }
    }

    pub fn grid_kinds(&self) -> Vec<BiasKind> {
        self.grid.kinds.clone().unwrap_or_else(|| BiasKind::ALL.to_vec())
    }

    pub fn grid_detectors(&self) -> Vec<DetectorKind> {
        match &self.grid.detectors {
            Some(d) => d.iter().filter_map(|n| n.parse().ok()).collect(),
            None => DetectorKind::ALL.to_vec(),
        }
    }

    /// β ladder for `kind`, always starting at 0.
    pub fn grid_betas(&self, kind: BiasKind) -> Vec<f64> {
        let mut b: Vec<f64> = self
            .grid
            .betas
            .get(&kind)
            .cloned()
            .unwrap_or_else(|| kind.default_grid().to_vec());
        b.push(0.0);
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }
}
