//! Group-level audit properties and the per-tag audit record.

mod metrics;

use std::io::Write;

use rayon::prelude::*;

use crate::dataset::{group_view, AttributedDataset};
use crate::detectors::{run_detector, train_autoencoder, DetectorKind, DetectorSpec};
use crate::error::{Error, Result};
use crate::fmt::fmt12;
use crate::measure::{Measured, NaReason};
use crate::nn::TrainConfig;
use crate::rng::derive_index;
use crate::scalar::{median, Scalar};

pub use metrics::{
    anomaly_dir, attribute_label_noise, reconstruction_ratio, sample_size_bias, spurious_feature_variance,
};

/// Column header of audit reports and property tables.
pub const REPORT_HEADER: [&str; 6] = ["tag", "DIR", "reconstruction_ratio", "SSB", "SFV", "label_noise"];

/// The five properties measured for one tag in one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropertyValues<T> {
    pub dir: Measured<T>,
    pub rr: Measured<T>,
    pub ssb: T,
    pub sfv: Measured<T>,
    pub aln: Measured<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupAuditRecord<T> {
    pub tag: String,
    pub dir: Measured<T>,
    pub rr: Measured<T>,
    pub ssb: T,
    pub sfv: Measured<T>,
    pub aln: Measured<T>,
    pub detector: String,
    pub dataset: String,
    pub n_seeds: usize,
}

/// Median of the defined values; NA only when every run was NA.
fn median_measured<T: Scalar>(xs: impl Iterator<Item = Measured<T>>) -> Measured<T> {
    let mut reason = NaReason::InsufficientData;
    let mut defined = Vec::new();
    for x in xs {
        match x {
            Measured::Value(v) => defined.push(v),
            Measured::Na(r) => reason = r,
        }
    }
    match median(&defined) {
        Some(v) => Measured::Value(v),
        None => Measured::Na(reason),
    }
}

impl<T: Scalar> GroupAuditRecord<T> {
    /// Per-property medians over runs.
    pub fn from_runs(
        tag: impl Into<String>,
        detector: impl Into<String>,
        dataset: impl Into<String>,
        runs: &[PropertyValues<T>],
    ) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::InvalidParameter("at least one run is required".into()));
        }
        let ssb: Vec<T> = runs.iter().map(|r| r.ssb).collect();
        Ok(Self {
            tag: tag.into(),
            dir: median_measured(runs.iter().map(|r| r.dir)),
            rr: median_measured(runs.iter().map(|r| r.rr)),
            ssb: median(&ssb).expect("non-empty"),
            sfv: median_measured(runs.iter().map(|r| r.sfv)),
            aln: median_measured(runs.iter().map(|r| r.aln)),
            detector: detector.into(),
            dataset: dataset.into(),
            n_seeds: runs.len(),
        })
    }

    pub fn values(&self) -> PropertyValues<T> {
        PropertyValues {
            dir: self.dir,
            rr: self.rr,
            ssb: self.ssb,
            sfv: self.sfv,
            aln: self.aln,
        }
    }
}

/// All five properties for one tag given flags and a reconstruction.
pub fn measure_tag<T: Scalar>(
    ds: &AttributedDataset<T>,
    flags: &[bool],
    recon: &[T],
    tag: &str,
) -> Result<PropertyValues<T>> {
    let g = group_view(ds, tag)?;
    let sfv = match ds.foreground_mask() {
        Some(mask) if !mask.is_empty() => spurious_feature_variance(ds, recon, &g, mask)?,
        _ => Measured::Na(NaReason::MissingMask),
    };
    Ok(PropertyValues {
        dir: anomaly_dir(flags, &g)?,
        rr: reconstruction_ratio(ds, recon, &g)?,
        ssb: sample_size_bias(&g)?,
        sfv,
        aln: attribute_label_noise(ds.tag(tag).expect("checked by group_view"), ds.truth_tag(tag))?,
    })
}

/// Runs the detector under `n_seeds` derived seeds and reports per-tag medians.
/// Detectors without a reconstruction borrow one from an autoencoder trained
/// under the same seed.
pub fn audit<T: Scalar>(
    ds: &AttributedDataset<T>,
    spec: &DetectorSpec,
    tags: Option<&[String]>,
    n_seeds: usize,
    root_seed: u64,
) -> Result<Vec<GroupAuditRecord<T>>> {
    if n_seeds == 0 {
        return Err(Error::InvalidParameter("n_seeds must be positive".into()));
    }
    let tags: Vec<String> = match tags {
        Some(t) => t.to_vec(),
        None => ds.tags().iter().map(|t| t.name.clone()).collect(),
    };
    for t in &tags {
        group_view(ds, t)?;
    }
    let runs: Vec<Vec<PropertyValues<T>>> = (0..n_seeds)
        .into_par_iter()
        .map(|s| {
            let seed = derive_index(root_seed, s as u64);
            let run = run_detector(ds, spec, seed)?;
            let recon = match run.reconstruction {
                Some(r) => r,
                None => {
                    let cfg = TrainConfig { seed, ..spec.train.clone() };
                    train_autoencoder(ds, &spec.autoencoder_arch(ds.d()), &cfg)?.0.reconstruction(ds)?
                }
            };
            tags.iter()
                .map(|t| measure_tag(ds, &run.output.flags, &recon, t))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    tags.iter()
        .enumerate()
        .map(|(ti, t)| {
            let per_seed: Vec<PropertyValues<T>> = runs.iter().map(|r| r[ti]).collect();
            GroupAuditRecord::from_runs(t.clone(), spec.kind.name(), ds.id(), &per_seed)
        })
        .collect()
}

fn cell<T: Scalar>(m: Measured<T>) -> String {
    m.value().map_or_else(|| "NA".to_string(), |v| fmt12(v.to_f64_lossy()))
}

/// Writes records as `tag,DIR,reconstruction_ratio,SSB,SFV,label_noise`; undefined cells read `NA`.
pub fn write_report<T: Scalar, W: Write>(records: &[GroupAuditRecord<T>], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{}", REPORT_HEADER.join(","))?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.tag,
            cell(r.dir),
            cell(r.rr),
            fmt12(r.ssb.to_f64_lossy()),
            cell(r.sfv),
            cell(r.aln)
        )?;
    }
    Ok(())
}

/// Default detector for audits of a given kind with a shortened schedule.
pub fn quick_spec(kind: DetectorKind, epochs: usize) -> DetectorSpec {
    DetectorSpec {
        train: TrainConfig { epochs, ..TrainConfig::default() },
        ..DetectorSpec::new(kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use rand::Rng as _;

    fn pv(dir: f64, rr: f64, ssb: f64, sfv: f64, aln: Option<f64>) -> PropertyValues<f64> {
        PropertyValues {
            dir: Measured::Value(dir),
            rr: Measured::Value(rr),
            ssb,
            sfv: Measured::Value(sfv),
            aln: aln.into(),
        }
    }

    #[test]
    fn single_run_median_is_the_run() {
        let r = pv(1.3, 1.1, 0.6, 0.2, Some(0.05));
        let rec = GroupAuditRecord::from_runs("Male", "ae", "celeba", &[r]).unwrap();
        assert_eq!(rec.values(), r);
        assert_eq!(rec.n_seeds, 1);
    }

    #[test]
    fn medians_skip_na_runs() {
        let runs = [
            pv(1.0, 1.0, 0.6, 0.1, None),
            pv(3.0, 2.0, 0.6, 0.3, Some(0.2)),
            pv(2.0, 5.0, 0.6, 0.2, Some(0.4)),
        ];
        let rec = GroupAuditRecord::from_runs("t", "ae", "x", &runs).unwrap();
        assert_eq!(rec.dir, Measured::Value(2.0));
        assert_eq!(rec.rr, Measured::Value(2.0));
        assert!((rec.aln.unwrap() - 0.3).abs() < 1e-12);
        let all_na = [pv(1.0, 1.0, 0.5, 0.0, None)];
        assert!(GroupAuditRecord::from_runs("t", "ae", "x", &all_na).unwrap().aln.is_na());
    }

    #[test]
    fn random_flagging_keeps_dir_near_one() {
        let n = 4000;
        let mut rng = rng_from(5);
        let f: Vec<f64> = (0..n * 2).map(|_| rng.random()).collect();
        let tag: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
        let ds = AttributedDataset::new("u", n, 2, f).unwrap().with_tag("half", tag).unwrap();
        let g = group_view(&ds, "half").unwrap();
        let runs: Vec<PropertyValues<f64>> = (0..5)
            .map(|s| {
                let mut r = rng_from(100 + s);
                let flags: Vec<bool> = (0..n).map(|_| r.random_bool(0.1)).collect();
                PropertyValues {
                    dir: anomaly_dir(&flags, &g).unwrap(),
                    rr: Measured::Value(1.0),
                    ssb: 0.5,
                    sfv: Measured::Na(NaReason::MissingMask),
                    aln: Measured::Na(NaReason::MissingTruth),
                }
            })
            .collect();
        let rec = GroupAuditRecord::from_runs("half", "random", "u", &runs).unwrap();
        let dir = rec.dir.unwrap();
        assert!((1.0..=1.25).contains(&dir), "{dir}");
    }

    #[test]
    fn audit_reports_every_tag() {
        use crate::synth::{generate, SynthSpec};
        let ds: AttributedDataset<f64> = generate(&SynthSpec { n_per_group: 50, ..SynthSpec::default() }).unwrap();
        let ds = ds.with_foreground_mask([2, 3, 4].into()).unwrap();
        let recs = audit(&ds, &quick_spec(DetectorKind::Iforest, 2), None, 3, 7).unwrap();
        assert_eq!(recs.len(), 1);
        let r = &recs[0];
        assert_eq!(r.tag, "group_b");
        assert_eq!(r.ssb, 0.5);
        assert!(r.rr.unwrap() >= 1.0);
        assert!((0.0..=1.0).contains(&r.sfv.unwrap()));
        assert!(r.aln.is_na());
        assert_eq!(recs, audit(&ds, &quick_spec(DetectorKind::Iforest, 2), None, 3, 7).unwrap());
        let mut buf = Vec::new();
        write_report(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("tag,DIR,reconstruction_ratio,SSB,SFV,label_noise\ngroup_b,"));
        assert!(text.trim_end().ends_with(",NA"));
    }
}
