//! Anomaly scorers and score-to-flag thresholding.

mod autoencoder;
mod checkpoint;
mod iforest;
mod kmeans;
mod lof;
mod one_class;
mod run;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::AttributedDataset;
use crate::error::{Error, Result};
use crate::fmt::fmt12;
use crate::scalar::Scalar;

pub use autoencoder::{score_autoencoder, train_autoencoder, Autoencoder, AutoencoderArch};
pub use checkpoint::{load_checkpoint, parse_checkpoint, save_checkpoint, Checkpoint, Model};
pub use iforest::{average_path_length, iforest_scores, IForestParams};
pub use kmeans::{cluster_ad_scores, kmeans, KMeansFit};
pub use lof::lof_scores;
pub use one_class::{default_one_class_arch, score_one_class, train_one_class, OneClassModel};
pub use run::{run_detector, DetectorRun, DetectorSpec, DEFAULT_CLUSTERS, LOF_K_MARGIN};

/// Default fraction of rows flagged when the data carries no outlier truth.
pub const FALLBACK_CONTAMINATION: f64 = 0.1;

/// Base rate when outlier truth is known, else [`FALLBACK_CONTAMINATION`].
pub fn default_contamination<T: Scalar>(ds: &AttributedDataset<T>) -> f64 {
    match ds.base_rate() {
        Some(r) if r > 0.0 && r < 1.0 => r,
        _ => FALLBACK_CONTAMINATION,
    }
}

/// Number of rows `flag_top` marks for a given contamination.
pub fn flag_count(contamination: f64, n: usize) -> usize {
    ((contamination * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// Flags the `ceil(contamination * n)` highest scores. Ties at the cutoff go to
/// the lower index.
pub fn flag_top<T: Scalar>(scores: &[T], contamination: f64) -> Result<Vec<bool>> {
    if !(contamination > 0.0 && contamination < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "contamination must lie in (0, 1), got {contamination}"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut flags = vec![false; scores.len()];
    for &i in order.iter().take(flag_count(contamination, scores.len())) {
        flags[i] = true;
    }
    Ok(flags)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    Autoencoder,
    OneClass,
    Cluster,
    Lof,
    Iforest,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 5] = [
        DetectorKind::Autoencoder,
        DetectorKind::OneClass,
        DetectorKind::Cluster,
        DetectorKind::Lof,
        DetectorKind::Iforest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Autoencoder => "ae",
            DetectorKind::OneClass => "svdd",
            DetectorKind::Cluster => "cluster",
            DetectorKind::Lof => "lof",
            DetectorKind::Iforest => "iforest",
        }
    }

    pub fn reconstructs(self) -> bool {
        self == DetectorKind::Autoencoder
    }
}

impl std::fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DetectorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ae" | "autoencoder" => Ok(DetectorKind::Autoencoder),
            "svdd" | "one_class" | "one-class" | "oneclass" => Ok(DetectorKind::OneClass),
            "cluster" | "kmeans" => Ok(DetectorKind::Cluster),
            "lof" => Ok(DetectorKind::Lof),
            "iforest" | "isolation_forest" => Ok(DetectorKind::Iforest),
            other => Err(format!(
                "unknown detector `{other}` (expected ae, svdd, cluster, lof or iforest)"
            )),
        }
    }
}

/// Scores and flags produced by one detector run.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorOutput<T> {
    pub detector: String,
    pub seed: u64,
    pub scores: Vec<T>,
    pub flags: Vec<bool>,
    pub contamination: f64,
}

impl<T: Scalar> DetectorOutput<T> {
    pub fn new(detector: impl Into<String>, seed: u64, scores: Vec<T>, contamination: f64) -> Result<Self> {
        if let Some(i) = scores.iter().position(|s| !s.is_finite() || *s < T::zero()) {
            return Err(Error::InvalidParameter(format!("score {i} is negative or not finite")));
        }
        let flags = flag_top(&scores, contamination)?;
        Ok(Self {
            detector: detector.into(),
            seed,
            scores,
            flags,
            contamination,
        })
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "index,score,flag")?;
        for (i, (s, f)) in self.scores.iter().zip(&self.flags).enumerate() {
            writeln!(w, "{i},{},{}", fmt12(s.to_f64_lossy()), u8::from(*f))?;
        }
        Ok(())
    }

    pub fn emit(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_csv(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}

/// Reads the `index,score,flag` CSV written by [`DetectorOutput::write_csv`].
pub fn read_scores(path: &Path) -> Result<(Vec<f64>, Vec<bool>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::Parse { line: 0, column: String::new(), message: e.to_string() })?;
    let mut scores = Vec::new();
    let mut flags = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse { line, column: String::new(), message: e.to_string() })?;
        let field = |k: usize, name: &str| {
            rec.get(k).ok_or_else(|| Error::Parse {
                line,
                column: name.into(),
                message: "missing field".into(),
            })
        };
        let s = field(1, "score")?;
        scores.push(s.trim().parse::<f64>().map_err(|e| Error::Parse {
            line,
            column: "score".into(),
            message: e.to_string(),
        })?);
        flags.push(match field(2, "flag")?.trim() {
            "1" => true,
            "0" => false,
            other => {
                return Err(Error::Parse {
                    line,
                    column: "flag".into(),
                    message: format!("expected 0 or 1, got `{other}`"),
                })
            }
        });
    }
    Ok((scores, flags))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn flag_count_examples() {
        assert_eq!(flag_top(&[0.0f64; 20], 0.1).unwrap().iter().filter(|&&f| f).count(), 2);
        assert_eq!(flag_count(0.3, 10), 3);
        assert_eq!(flag_count(0.25, 10), 3);
        assert!(flag_top(&[1.0f64], 0.0).is_err());
        assert!(flag_top(&[1.0f64], 1.0).is_err());
    }

    #[test]
    fn increasing_scores_flag_the_tail() {
        let s: Vec<f64> = (0..30).map(f64::from).collect();
        let flags = flag_top(&s, 0.2).unwrap();
        assert!(flags[..24].iter().all(|f| !f));
        assert!(flags[24..].iter().all(|&f| f));
    }

    #[test]
    fn ties_go_to_lower_index() {
        let flags = flag_top(&[1.0f64, 2.0, 2.0, 2.0, 0.0], 0.4).unwrap();
        assert_eq!(flags, vec![false, true, true, false, false]);
    }

    proptest! {
        #[test]
        fn matches_stable_sort_oracle(raw in prop::collection::vec(0u8..6, 1..60), q in 0.01f64..0.99) {
            let scores: Vec<f64> = raw.iter().map(|&v| f64::from(v)).collect();
            let mut idx: Vec<usize> = (0..scores.len()).collect();
            // stable sort keeps ascending index among equal scores
            idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
            let k = flag_count(q, scores.len());
            let mut expected = vec![false; scores.len()];
            for &i in &idx[..k] {
                expected[i] = true;
            }
            prop_assert_eq!(flag_top(&scores, q).unwrap(), expected);
        }
    }

    #[test]
    fn output_round_trips_through_csv() {
        let out = DetectorOutput::new("lof", 3, vec![0.5f64, 2.0, 1.0], 0.3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        out.emit(&path).unwrap();
        let (s, f) = read_scores(&path).unwrap();
        assert_eq!(s, vec![0.5, 2.0, 1.0]);
        assert_eq!(f, vec![false, true, false]);
        assert!(DetectorOutput::new("x", 0, vec![-1.0f64], 0.5).is_err());
    }

    #[test]
    fn detector_names_parse() {
        for k in DetectorKind::ALL {
            assert_eq!(k.name().parse::<DetectorKind>().unwrap(), k);
        }
        assert!("svm".parse::<DetectorKind>().is_err());
    }
}
