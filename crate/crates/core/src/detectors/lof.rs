use rayon::prelude::*;

use crate::dataset::AttributedDataset;
use crate::error::{Error, Result};
use crate::scalar::{sq_dist, Scalar};

const FLOOR: f64 = 1e-12;

/// Local outlier factor with Euclidean distance. Neighborhoods include every
/// point tied at the k-distance.
pub fn lof_scores<T: Scalar>(ds: &AttributedDataset<T>, k: usize) -> Result<Vec<T>> {
    let n = ds.n();
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!("LOF needs 1 <= k < n (k={k}, n={n})")));
    }
    let floor = T::of(FLOOR);
    // Sorted (distance, index) lists to every other point.
    let neighbours: Vec<Vec<(T, usize)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = ds.row(i);
            let mut v: Vec<(T, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (sq_dist(xi, ds.row(j)).sqrt(), j))
                .collect();
            v.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
            let kd = v[k - 1].0;
            let keep = v.partition_point(|p| p.0 <= kd);
            v.truncate(keep);
            v
        })
        .collect();
    let kdist: Vec<T> = neighbours.iter().map(|v| v.last().expect("k >= 1").0).collect();
    let lrd: Vec<T> = neighbours
        .par_iter()
        .map(|v| {
            let total: T = v.iter().map(|&(d, o)| d.max(kdist[o].max(floor))).sum();
            T::of_usize(v.len()) / total
        })
        .collect();
    Ok(neighbours
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            let s: T = v.iter().map(|&(_, o)| lrd[o]).sum();
            s / T::of_usize(v.len()) / lrd[i]
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use rand::Rng as _;

    /// Textbook definition written out with explicit neighbourhood sets.
    fn naive_lof(pts: &[Vec<f64>], k: usize) -> Vec<f64> {
        let n = pts.len();
        let dist = |a: usize, b: usize| -> f64 {
            pts[a].iter().zip(&pts[b]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
        };
        let kdist: Vec<f64> = (0..n)
            .map(|p| {
                let mut ds: Vec<f64> = (0..n).filter(|&o| o != p).map(|o| dist(p, o)).collect();
                ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
                ds[k - 1]
            })
            .collect();
        let hood: Vec<Vec<usize>> = (0..n)
            .map(|p| (0..n).filter(|&o| o != p && dist(p, o) <= kdist[p]).collect())
            .collect();
        let reach = |p: usize, o: usize| kdist[o].max(1e-12).max(dist(p, o));
        let lrd: Vec<f64> = (0..n)
            .map(|p| 1.0 / (hood[p].iter().map(|&o| reach(p, o)).sum::<f64>() / hood[p].len() as f64))
            .collect();
        (0..n)
            .map(|p| hood[p].iter().map(|&o| lrd[o] / lrd[p]).sum::<f64>() / hood[p].len() as f64)
            .collect()
    }

    #[test]
    fn matches_naive_definition() {
        for seed in 0..50u64 {
            let mut rng = rng_from(seed);
            let n = rng.random_range(5..=50);
            let d = rng.random_range(1..4);
            let k = rng.random_range(1..n);
            // coarse grid values force ties and duplicates
            let pts: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| f64::from(rng.random_range(0..6u8))).collect())
                .collect();
            let ds = AttributedDataset::from_rows("r", &pts).unwrap();
            let got = lof_scores(&ds, k).unwrap();
            for (a, b) in got.iter().zip(naive_lof(&pts, k)) {
                assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "seed {seed}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn matches_naive_on_continuous_points() {
        let mut rng = rng_from(99);
        let pts: Vec<Vec<f64>> = (0..30).map(|_| vec![rng.random(), rng.random()]).collect();
        let ds = AttributedDataset::from_rows("r", &pts).unwrap();
        for k in [1, 3, 7] {
            for (a, b) in lof_scores(&ds, k).unwrap().iter().zip(naive_lof(&pts, k)) {
                assert!((a - b).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn identical_points_score_one() {
        let ds = AttributedDataset::from_rows("dup", &vec![vec![1.0, 2.0]; 8]).unwrap();
        assert!(lof_scores(&ds, 3).unwrap().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn one_dimensional_example() {
        let rows: Vec<Vec<f64>> = [0.0, 1.0, 2.0, 3.0, 100.0].iter().map(|&v| vec![v]).collect();
        let ds = AttributedDataset::from_rows("line", &rows).unwrap();
        let s = lof_scores(&ds, 2).unwrap();
        assert!(s[4] > 2.0);
        for v in &s[..4] {
            assert!((0.8..=1.2).contains(v), "{v}");
        }
    }

    #[test]
    fn k_must_be_below_n() {
        let ds = AttributedDataset::from_rows("x", &[vec![0.0], vec![1.0]]).unwrap();
        assert!(lof_scores(&ds, 2).is_err());
        assert!(lof_scores(&ds, 0).is_err());
    }
}
