use serde::{Deserialize, Serialize};

use super::{
    cluster_ad_scores, default_contamination, default_one_class_arch, iforest_scores, lof_scores,
    score_autoencoder, score_one_class, train_autoencoder, train_one_class, AutoencoderArch, DetectorKind,
    DetectorOutput, IForestParams,
};
use crate::dataset::AttributedDataset;
use crate::error::Result;
use crate::nn::{Architecture, TrainConfig};
use crate::scalar::Scalar;

/// Extra neighbours beyond the outlier count used for the default LOF `k`.
pub const LOF_K_MARGIN: usize = 40;
pub const DEFAULT_CLUSTERS: usize = 10;

/// Everything needed to run one detector on a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorSpec {
    pub kind: DetectorKind,
    pub train: TrainConfig,
    /// Autoencoder layout; defaults to [`AutoencoderArch::default_for`].
    pub autoencoder: Option<AutoencoderArch>,
    /// One-class layout; defaults to [`default_one_class_arch`].
    pub one_class: Option<Architecture>,
    pub clusters: usize,
    /// LOF neighbourhood; defaults to the outlier count plus [`LOF_K_MARGIN`]
    /// when truth is known, else 20.
    pub lof_k: Option<usize>,
    pub iforest: IForestParams,
    /// Defaults to [`default_contamination`].
    pub contamination: Option<f64>,
}

impl Default for DetectorSpec {
    fn default() -> Self {
        Self {
            kind: DetectorKind::Autoencoder,
            train: TrainConfig::default(),
            autoencoder: None,
            one_class: None,
            clusters: DEFAULT_CLUSTERS,
            lof_k: None,
            iforest: IForestParams::default(),
            contamination: None,
        }
    }
}

impl DetectorSpec {
    pub fn new(kind: DetectorKind) -> Self {
        Self { kind, ..Self::default() }
    }

    pub fn autoencoder_arch(&self, d: usize) -> AutoencoderArch {
        self.autoencoder.clone().unwrap_or_else(|| AutoencoderArch::default_for(d))
    }

    pub fn one_class_arch(&self, d: usize) -> Architecture {
        self.one_class.clone().unwrap_or_else(|| default_one_class_arch(d))
    }

    pub fn lof_k_for<T: Scalar>(&self, ds: &AttributedDataset<T>) -> usize {
        let k = self.lof_k.unwrap_or_else(|| match ds.outlier_truth() {
            Some(y) => y.iter().filter(|&&v| v).count() + LOF_K_MARGIN,
            None => 20,
        });
        k.clamp(1, ds.n().saturating_sub(1).max(1))
    }

    pub fn contamination_for<T: Scalar>(&self, ds: &AttributedDataset<T>) -> f64 {
        self.contamination.unwrap_or_else(|| default_contamination(ds))
    }
}

/// Scores, flags and (for the autoencoder) the row-major reconstruction.
#[derive(Debug, Clone)]
pub struct DetectorRun<T> {
    pub output: DetectorOutput<T>,
    pub reconstruction: Option<Vec<T>>,
}

/// Trains (where needed) and scores with the given seed.
pub fn run_detector<T: Scalar>(ds: &AttributedDataset<T>, spec: &DetectorSpec, seed: u64) -> Result<DetectorRun<T>> {
    let train = TrainConfig { seed, ..spec.train.clone() };
    let mut reconstruction = None;
    let scores = match spec.kind {
        DetectorKind::Autoencoder => {
            let (ae, _) = train_autoencoder(ds, &spec.autoencoder_arch(ds.d()), &train)?;
            reconstruction = Some(ae.reconstruction(ds)?);
            score_autoencoder(&ae, ds)?
        }
        DetectorKind::OneClass => {
            let (m, _) = train_one_class(ds, &spec.one_class_arch(ds.d()), &train)?;
            score_one_class(&m, ds)?
        }
        DetectorKind::Cluster => cluster_ad_scores(ds, spec.clusters.min(ds.n()), None, seed)?,
        DetectorKind::Lof => lof_scores(ds, spec.lof_k_for(ds))?,
        DetectorKind::Iforest => iforest_scores(ds, &spec.iforest, seed)?,
    };
    let output = DetectorOutput::new(spec.kind.name(), seed, scores, spec.contamination_for(ds))?;
    Ok(DetectorRun { output, reconstruction })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthSpec};

    #[test]
    fn every_detector_runs_on_synthetic_data() {
        let ds: AttributedDataset<f64> = generate(&SynthSpec { n_per_group: 60, ..SynthSpec::default() }).unwrap();
        for kind in DetectorKind::ALL {
            let spec = DetectorSpec {
                train: TrainConfig { epochs: 3, ..TrainConfig::default() },
                ..DetectorSpec::new(kind)
            };
            let run = run_detector(&ds, &spec, 1).unwrap();
            assert_eq!(run.output.scores.len(), ds.n());
            assert_eq!(run.output.flags.iter().filter(|&&f| f).count(), 12);
            assert_eq!(run.reconstruction.is_some(), kind.reconstructs());
        }
    }

    #[test]
    fn lof_default_k_tracks_outlier_count() {
        let ds: AttributedDataset<f64> = generate(&SynthSpec { n_per_group: 100, ..SynthSpec::default() }).unwrap();
        assert_eq!(DetectorSpec::new(DetectorKind::Lof).lof_k_for(&ds), 20 + LOF_K_MARGIN);
    }
}
