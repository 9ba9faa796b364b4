//! One line per acceptance criterion. Criteria listed in `EXPECTED_RED` are
//! reported but do not fail the run; any other red criterion does.

use std::collections::BTreeSet;
use std::path::Path;
use std::time::{Duration, Instant};

use adfair::appendix::{self, AppendixOutcome};
use adfair::config::ExperimentConfig;
use adfair::fixtures::FixtureSet;
use adfair::grid::run_grid;
use adfair_core::dataset::{AttributedDataset, GroupView};
use adfair_core::detectors::{lof_scores, score_autoencoder, train_autoencoder, AutoencoderArch, DetectorKind};
use adfair_core::fairness::{
    anomaly_dir, attribute_label_noise, reconstruction_ratio, sample_size_bias, spurious_feature_variance,
};
use adfair_core::nn::{objective_and_gradient, Activation, Architecture, DenseNetwork, Target, TrainConfig};
use adfair_core::rng::rng_from;
use adfair_core::synth::BiasKind;
use adfair_core::Measured;
use rand::Rng as _;

/// The published tables give 152 of 220 rows below the threshold (0.691), so
/// the > 0.70 landscape target cannot be met from them.
const EXPECTED_RED: [u8; 1] = [3];

struct Verdict {
    id: u8,
    passed: bool,
    detail: String,
}

fn main() {
    let mut verdicts = Vec::new();
    let outcome = appendix_checks(&mut verdicts);
    verdicts.push(metric_oracles());
    verdicts.push(detector_numerics());
    verdicts.push(bias_grid());
    verdicts.push(determinism(&outcome));

    let mut unexpected = Vec::new();
    for v in &verdicts {
        let expected = EXPECTED_RED.contains(&v.id);
        let tag = match (v.passed, expected) {
            (true, _) => "PASS",
            (false, true) => "FAIL (expected)",
            (false, false) => "FAIL",
        };
        println!("criterion {:>2}: {tag}: {}", v.id, v.detail);
        if !v.passed && !expected {
            unexpected.push(v.id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected red criteria: {unexpected:?}");
        std::process::exit(1);
    }
}

fn appendix_checks(out: &mut Vec<Verdict>) -> AppendixOutcome {
    let fx = FixtureSet::embedded().expect("fixtures verify");
    let outcome = appendix::reproduce(&fx, 500, 0).expect("appendix replay runs");
    for c in &outcome.checks {
        let timing = match c.id {
            1 => format!(" [{:.3} ms]", outcome.se_replay_time.as_secs_f64() * 1e3),
            6 => format!(" [{:.2} s]", outcome.null_time.as_secs_f64()),
            _ => String::new(),
        };
        out.push(Verdict { id: c.id, passed: c.passed, detail: format!("{}: {}{timing}", c.name, c.detail) });
    }
    outcome
}

// ---------------------------------------------------------------------------
// 7: brute-force metric oracles

fn ratio_oracle(a: f64, b: f64) -> Option<f64> {
    if a > 0.0 && b > 0.0 {
        Some(if a > b { a / b } else { b / a })
    } else if a == 0.0 && b == 0.0 {
        Some(1.0)
    } else {
        None
    }
}

fn close(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= 1e-10 * x.abs().max(y.abs()).max(1.0),
        (None, None) => true,
        _ => false,
    }
}

struct Case {
    ds: AttributedDataset<f64>,
    recon: Vec<f64>,
    tag: Vec<bool>,
    truth: Vec<bool>,
    flags: Vec<bool>,
    mask: BTreeSet<usize>,
}

fn random_case(seed: u64) -> Case {
    let mut rng = rng_from(seed);
    let n = rng.random_range(1..=60usize);
    let d = rng.random_range(1..=6usize);
    let p_tag = [0.0, 0.05, 0.3, 0.5, 0.9, 1.0][rng.random_range(0..6)];
    let p_flag = [0.0, 0.02, 0.1, 0.5, 1.0][rng.random_range(0..5)];
    let features: Vec<f64> = (0..n * d).map(|_| rng.random_range(-3.0..3.0)).collect();
    let exact = rng.random_bool(0.1);
    let recon: Vec<f64> = features
        .iter()
        .map(|&x| if exact { x } else { x + rng.random_range(-1.0..1.0) })
        .collect();
    let tag: Vec<bool> = (0..n).map(|_| rng.random_bool(p_tag)).collect();
    let truth: Vec<bool> = tag.iter().map(|&t| if rng.random_bool(0.2) { !t } else { t }).collect();
    let flags: Vec<bool> = (0..n).map(|_| rng.random_bool(p_flag)).collect();
    let mut mask: BTreeSet<usize> = (0..d).filter(|_| rng.random_bool(0.5)).collect();
    if mask.is_empty() {
        mask.insert(rng.random_range(0..d));
    }
    let ds = AttributedDataset::new("case", n, d, features).unwrap();
    Case { ds, recon, tag, truth, flags, mask }
}

fn row_loss(c: &Case, i: usize, only: Option<&BTreeSet<usize>>) -> f64 {
    let d = c.ds.d();
    let mut s = 0.0;
    for j in 0..d {
        if only.is_none_or(|m| m.contains(&j)) {
            let e = c.ds.features()[i * d + j] - c.recon[i * d + j];
            s += e * e;
        }
    }
    s
}

fn metric_oracles() -> Verdict {
    const CASES: u64 = 1000;
    let mut failures: Vec<String> = Vec::new();
    let mut fail = |what: &str, seed: u64| {
        if failures.len() < 5 {
            failures.push(format!("{what} (case {seed})"));
        }
    };
    for seed in 0..CASES {
        let c = random_case(seed);
        let n = c.ds.n();
        let g = GroupView::from_mask("g", &c.tag);
        let sides: [Vec<usize>; 2] = [
            (0..n).filter(|&i| c.tag[i]).collect(),
            (0..n).filter(|&i| !c.tag[i]).collect(),
        ];
        let empty = sides.iter().any(Vec::is_empty);

        let dir: Measured<f64> = anomaly_dir(&c.flags, &g).unwrap();
        let want = if empty {
            None
        } else {
            let rate = |s: &[usize]| s.iter().filter(|&&i| c.flags[i]).count() as f64 / s.len() as f64;
            ratio_oracle(rate(&sides[0]), rate(&sides[1]))
        };
        if !close(dir.value(), want) {
            fail("DIR", seed);
        }
        let swapped: Measured<f64> = anomaly_dir(&c.flags, &g.swapped()).unwrap();
        if !close(dir.value(), swapped.value()) || dir.value().is_some_and(|v| v < 1.0) {
            fail("DIR invariant", seed);
        }

        let rr = reconstruction_ratio(&c.ds, &c.recon, &g).unwrap();
        let want = if empty {
            None
        } else {
            let mean = |s: &[usize]| s.iter().map(|&i| row_loss(&c, i, None)).sum::<f64>() / s.len() as f64;
            ratio_oracle(mean(&sides[0]), mean(&sides[1]))
        };
        if !close(rr.value(), want) || rr.value().is_some_and(|v| v < 1.0) {
            fail("RR", seed);
        }
        if !close(rr.value(), reconstruction_ratio(&c.ds, &c.recon, &g.swapped()).unwrap().value()) {
            fail("RR invariant", seed);
        }

        let ssb: f64 = sample_size_bias(&g).unwrap();
        let want = sides[0].len().max(sides[1].len()) as f64 / n as f64;
        if !close(Some(ssb), Some(want)) || !(0.5..=1.0).contains(&ssb) {
            fail("SSB", seed);
        }
        if ssb != sample_size_bias::<f64>(&g.swapped()).unwrap() {
            fail("SSB invariant", seed);
        }

        let sfv = spurious_feature_variance(&c.ds, &c.recon, &g, &c.mask).unwrap();
        let want = if empty {
            None
        } else {
            let mut worst: Option<f64> = Some(0.0);
            for s in &sides {
                let inside: f64 = s.iter().map(|&i| row_loss(&c, i, Some(&c.mask))).sum();
                let total: f64 = s.iter().map(|&i| row_loss(&c, i, None)).sum();
                worst = if total > 0.0 { worst.map(|w| w.max(inside / total)) } else { None };
                if worst.is_none() {
                    break;
                }
            }
            worst.map(|w| 1.0 - w)
        };
        if !close(sfv.value(), want) || sfv.value().is_some_and(|v| !(0.0..=1.0).contains(&v)) {
            fail("SFV", seed);
        }
        if !close(sfv.value(), spurious_feature_variance(&c.ds, &c.recon, &g.swapped(), &c.mask).unwrap().value()) {
            fail("SFV invariant", seed);
        }

        let aln = attribute_label_noise::<f64>(&c.tag, Some(&c.truth)).unwrap();
        let wrong = (0..n).filter(|&i| c.tag[i] != c.truth[i]).count();
        if !close(aln.value(), Some(wrong as f64 / n as f64)) {
            fail("ALN", seed);
        }
        let flip = |v: &[bool]| v.iter().map(|b| !b).collect::<Vec<_>>();
        let flipped = attribute_label_noise::<f64>(&flip(&c.tag), Some(&flip(&c.truth))).unwrap();
        let reversed = attribute_label_noise::<f64>(&c.truth, Some(&c.tag)).unwrap();
        if aln != flipped || aln != reversed || aln.value().is_some_and(|v| !(0.0..=1.0).contains(&v)) {
            fail("ALN invariant", seed);
        }
    }
    Verdict {
        id: 7,
        passed: failures.is_empty(),
        detail: if failures.is_empty() {
            format!("metric oracles: {CASES} random cases per metric (DIR, RR, SSB, SFV, ALN) match brute force to 1e-10; range and complement symmetry hold")
        } else {
            format!("metric oracles: mismatches {}", failures.join(", "))
        },
    }
}

// ---------------------------------------------------------------------------
// 8: gradients, LOF, linear subspace

fn gradient_error(net: &DenseNetwork<f64>, rows: &[&[f64]], target: &Target<'_, f64>) -> f64 {
    let lambda = 1e-3;
    let (_, g) = objective_and_gradient(net, rows, target, lambda);
    let theta = net.params();
    let h = 1e-6;
    let mut probe = net.clone();
    let mut diff2 = 0.0;
    let mut norm2: f64 = 0.0;
    for k in 0..theta.len() {
        let mut t = theta.clone();
        t[k] = theta[k] + h;
        probe.set_params(&t);
        let up = objective_and_gradient(&probe, rows, target, lambda).0;
        t[k] = theta[k] - h;
        probe.set_params(&t);
        let down = objective_and_gradient(&probe, rows, target, lambda).0;
        let fd = (up - down) / (2.0 * h);
        diff2 += (fd - g[k]).powi(2);
        norm2 = norm2.max(fd * fd).max(g[k] * g[k]);
    }
    diff2.sqrt() / norm2.sqrt().max(1e-12) / (theta.len() as f64).sqrt()
}

fn random_net(arch: &Architecture, rng: &mut adfair_core::rng::Rng) -> DenseNetwork<f64> {
    let mut net = DenseNetwork::init(arch, rng).unwrap();
    let p: Vec<f64> = (0..net.param_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
    net.set_params(&p);
    net
}

fn naive_lof(points: &[Vec<f64>], k: usize) -> Vec<f64> {
    let n = points.len();
    let dist = |a: usize, b: usize| -> f64 {
        points[a].iter().zip(&points[b]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    };
    let mut kdist = vec![0.0; n];
    let mut hoods = vec![Vec::new(); n];
    for p in 0..n {
        let mut ds: Vec<f64> = (0..n).filter(|&o| o != p).map(|o| dist(p, o)).collect();
        ds.sort_by(f64::total_cmp);
        kdist[p] = ds[k - 1];
        hoods[p] = (0..n).filter(|&o| o != p && dist(p, o) <= kdist[p]).collect::<Vec<_>>();
    }
    let lrd: Vec<f64> = (0..n)
        .map(|p| {
            let s: f64 = hoods[p].iter().map(|&o| dist(p, o).max(kdist[o].max(1e-12))).sum();
            hoods[p].len() as f64 / s
        })
        .collect();
    (0..n)
        .map(|p| hoods[p].iter().map(|&o| lrd[o] / lrd[p]).sum::<f64>() / hoods[p].len() as f64)
        .collect()
}

fn detector_numerics() -> Verdict {
    let mut worst_ae: f64 = 0.0;
    let mut worst_oc: f64 = 0.0;
    for s in 0..20u64 {
        let mut rng = rng_from(1000 + s);
        let d = rng.random_range(2..=5usize);
        let h = rng.random_range(2..=4usize);
        let rows: Vec<Vec<f64>> = (0..6).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let ae = Architecture {
            widths: vec![d, h, d - 1, h, d],
            activations: vec![Activation::Relu, Activation::Identity, Activation::Relu, Activation::Identity],
            bias: true,
        };
        worst_ae = worst_ae.max(gradient_error(&random_net(&ae, &mut rng), &refs, &Target::Input));
        let oc = Architecture::relu_mlp(&[d, h, 2], false);
        let center: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        worst_oc = worst_oc.max(gradient_error(&random_net(&oc, &mut rng), &refs, &Target::Fixed(&center)));
    }
    let grad_ok = worst_ae <= 1e-4 && worst_oc <= 1e-4;

    let mut lof_worst: f64 = 0.0;
    for s in 0..50u64 {
        let mut rng = rng_from(5000 + s);
        let n = rng.random_range(3..=50usize);
        let d = rng.random_range(1..=3usize);
        let k = rng.random_range(1..n.min(12));
        let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(0..6) as f64 * 0.5).collect()).collect();
        let ds = AttributedDataset::from_rows("lof", &pts).unwrap();
        let got = lof_scores(&ds, k).unwrap();
        let want = naive_lof(&pts, k);
        for (a, b) in got.iter().zip(&want) {
            lof_worst = lof_worst.max((a - b).abs() / b.abs().max(1.0));
        }
    }
    let lof_ok = lof_worst <= 1e-9;

    let mut rng = rng_from(77);
    let (n, d, r) = (200, 6, 2);
    let basis: Vec<f64> = (0..d * r).map(|_| rng.random_range(-1.0..1.0)).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let z: Vec<f64> = (0..r).map(|_| rng.random_range(-1.0..1.0)).collect();
            (0..d).map(|j| (0..r).map(|c| basis[j * r + c] * z[c]).sum()).collect()
        })
        .collect();
    let ds = AttributedDataset::from_rows("subspace", &rows).unwrap();
    let cfg = TrainConfig {
        epochs: 3000,
        batch_size: 32,
        learning_rate: 3e-3,
        weight_decay: 0.0,
        patience: 50,
        seed: 1,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let (model, _) = train_autoencoder(&ds, &AutoencoderArch::linear(d, 3), &cfg).unwrap();
    let scores = score_autoencoder(&model, &ds).unwrap();
    let elapsed = start.elapsed();
    let mse = scores.iter().sum::<f64>() / (n * d) as f64;
    let sub_ok = mse < 1e-6 && elapsed < Duration::from_secs(30);

    Verdict {
        id: 8,
        passed: grad_ok && lof_ok && sub_ok,
        detail: format!(
            "detector numerics: gradient rel. err ae {worst_ae:.2e} one-class {worst_oc:.2e} over 20 nets; LOF vs naive max err {lof_worst:.2e} over 50 sets; linear subspace MSE {mse:.2e} in {:.1} s",
            elapsed.as_secs_f64()
        ),
    }
}

// ---------------------------------------------------------------------------
// 9: bias grid directions

fn bias_grid() -> Verdict {
    let cfg = ExperimentConfig::default();
    let start = Instant::now();
    let r = run_grid(&cfg, 0).expect("grid runs");
    let elapsed = start.elapsed();
    let m = |k, b, d, g: &str, metric: &str| r.median(k, b, d, g, metric).unwrap_or(f64::NAN);

    let lof0 = m(BiasKind::SampleSize, 0.0, DetectorKind::Lof, "b", "flag_rate");
    let lof8 = m(BiasKind::SampleSize, 0.8, DetectorKind::Lof, "b", "flag_rate");
    let fpr_a = m(BiasKind::SampleSize, 0.8, DetectorKind::Iforest, "a", "fpr");
    let fpr_b = m(BiasKind::SampleSize, 0.8, DetectorKind::Iforest, "b", "fpr");
    let f1_0 = m(BiasKind::MeasurementVariance, 0.0, DetectorKind::Autoencoder, "overall", "f1");
    let f1_8 = m(BiasKind::MeasurementVariance, 0.8, DetectorKind::Autoencoder, "overall", "f1");
    let gap = (m(BiasKind::MeasurementVariance, 0.8, DetectorKind::Autoencoder, "a", "f1")
        - m(BiasKind::MeasurementVariance, 0.8, DetectorKind::Autoencoder, "b", "f1"))
    .abs();
    let ok = lof8 < lof0 && fpr_b > fpr_a && f1_8 < f1_0 && gap < 0.1 && elapsed < Duration::from_secs(600);
    Verdict {
        id: 9,
        passed: ok,
        detail: format!(
            "bias grid: LOF b flag rate {lof0:.3} -> {lof8:.3}; iforest FPR b {fpr_b:.3} vs a {fpr_a:.3} at 0.8; ae F1 {f1_0:.3} -> {f1_8:.3}, group gap {gap:.3}; full grid {:.0} s",
            elapsed.as_secs_f64()
        ),
    }
}

// ---------------------------------------------------------------------------
// 10: byte-identical reruns through the CLI

fn strip_timings(manifest: &str) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(manifest).unwrap();
    if let Some(stages) = v["stages"].as_array_mut() {
        for s in stages {
            s.as_object_mut().unwrap().remove("seconds");
        }
    }
    v
}

fn same_tree(a: &Path, b: &Path) -> Result<usize, String> {
    let list = |p: &Path| -> Vec<String> {
        let mut out = Vec::new();
        let mut stack = vec![p.to_path_buf()];
        while let Some(dir) = stack.pop() {
            for e in std::fs::read_dir(&dir).unwrap() {
                let path = e.unwrap().path();
                if path.is_dir() {
                    stack.push(path);
                } else {
                    out.push(path.strip_prefix(p).unwrap().to_string_lossy().into_owned());
                }
            }
        }
        out.sort();
        out
    };
    let (la, lb) = (list(a), list(b));
    if la != lb {
        return Err(format!("file lists differ: {la:?} vs {lb:?}"));
    }
    for f in &la {
        let (x, y) = (std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
        let equal = if f == "manifest.json" {
            strip_timings(&String::from_utf8_lossy(&x)) == strip_timings(&String::from_utf8_lossy(&y))
        } else {
            x == y
        };
        if !equal {
            return Err(format!("{f} differs"));
        }
    }
    Ok(la.len())
}

fn run_cli(args: &[&str]) -> i32 {
    let mut full = vec!["adfair"];
    full.extend_from_slice(args);
    adfair::main_with_args(full)
}

fn determinism(outcome: &AppendixOutcome) -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let dir = |name: &str| tmp.path().join(name).to_string_lossy().into_owned();
    let grid_cfg = tmp.path().join("grid.toml");
    std::fs::write(
        &grid_cfg,
        "seed = 11\nn_seeds = 2\n\n[synthetic]\nn_per_group = 150\n\n[train]\nepochs = 15\n\n\
         [grid]\nbetas = { sample_size = [0.4, 0.8], under_representation = [0.5], measurement_variance = [0.8], \
         measurement_shift = [0.8], obfuscation = [0.2] }\n",
    )
    .unwrap();
    let cfg = grid_cfg.to_string_lossy().into_owned();
    let codes = [
        run_cli(&["reproduce-appendix", "--quiet", "--seed", "0", "--out", &dir("ra1")]),
        run_cli(&["reproduce-appendix", "--quiet", "--seed", "0", "--out", &dir("ra2")]),
        run_cli(&["biasgrid", "--config", &cfg, "--out", &dir("g1")]),
        run_cli(&["biasgrid", "--config", &cfg, "--out", &dir("g2")]),
    ];
    let mut problems = Vec::new();
    if codes.iter().any(|&c| c != 0) {
        problems.push(format!("exit codes {codes:?}"));
    }
    let mut files = 0;
    for (a, b) in [("ra1", "ra2"), ("g1", "g2")] {
        match same_tree(Path::new(&dir(a)), Path::new(&dir(b))) {
            Ok(n) => files += n,
            Err(e) => problems.push(format!("{a}/{b}: {e}")),
        }
    }
    let summary = std::fs::read_to_string(Path::new(&dir("ra1")).join("summary.txt")).unwrap_or_default();
    if !summary.contains(&appendix::summary_text(outcome)) {
        problems.push("CLI summary differs from the in-process replay".into());
    }
    Verdict {
        id: 10,
        passed: problems.is_empty(),
        detail: if problems.is_empty() {
            format!("determinism: reproduce-appendix and biasgrid reruns byte-identical over {files} files (manifest timings excluded)")
        } else {
            format!("determinism: {}", problems.join("; "))
        },
    }
}
