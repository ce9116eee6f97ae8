//! K-means with k-means++ seeding and Lloyd iterations.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::metrics::ClusterAssignment;
use crate::rng::{self, ids};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub restarts: usize,
    pub max_iter: usize,
    /// Convergence threshold on the largest center displacement.
    pub tol: f64,
    pub seed: u64,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            restarts: 20,
            max_iter: 300,
            tol: 1e-6,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansResult {
    /// `K × d`, one center per row.
    pub centers: Matrix,
    pub assignment: ClusterAssignment,
    pub inertia: f64,
    pub iterations: usize,
    /// Inertia after each assignment step of the winning restart.
    pub inertia_history: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest row of `centers` (lower index wins ties) and the
/// squared distance to it.
pub fn nearest_center(centers: &Matrix, x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centers.rows() {
        let d = sq_dist(centers.row(c), x);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Clusters the rows of `x` (`N × d`). The best restart by inertia wins, with
/// ties going to the lower restart index.
pub fn kmeans(x: &Matrix, config: &KMeansConfig) -> Result<KMeansResult> {
    let n = x.rows();
    let k = config.k;
    if k == 0 || n < k {
        return Err(Error::InvalidParameter(format!(
            "k-means needs 1 <= k <= N, got k = {k}, N = {n}"
        )));
    }
    if config.restarts == 0 || config.max_iter == 0 {
        return Err(Error::InvalidParameter("restarts and max_iter must be positive".into()));
    }
    let runs: Vec<KMeansResult> = (0..config.restarts)
        .into_par_iter()
        .map(|r| lloyd(x, config, r as u64))
        .collect();
    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.inertia < runs[best].inertia {
            best = i;
        }
    }
    Ok(runs.into_iter().nth(best).expect("at least one restart"))
}

fn plus_plus_init(x: &Matrix, k: usize, rng: &mut impl Rng) -> Matrix {
    let n = x.rows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), x.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            while d2[pick] == 0.0 {
                pick -= 1;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        chosen.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), x.row(next)));
        }
    }
    x.select_rows(&chosen)
}

fn assign(x: &Matrix, centers: &Matrix) -> (Vec<usize>, Vec<f64>) {
    (0..x.rows()).map(|i| nearest_center(centers, x.row(i))).unzip()
}

/// Nearest-center assignment followed by empty-cluster repair: an empty
/// cluster takes over the point farthest from its center (among clusters
/// with more than one member) and its center moves onto that point.
fn assign_and_repair(x: &Matrix, centers: &mut Matrix) -> (Vec<usize>, Vec<f64>) {
    let (mut labels, mut dists) = assign(x, centers);
    let mut counts = vec![0usize; centers.rows()];
    for &l in &labels {
        counts[l] += 1;
    }
    for c in 0..centers.rows() {
        if counts[c] > 0 {
            continue;
        }
        let mut far: Option<usize> = None;
        for i in 0..x.rows() {
            if counts[labels[i]] > 1 && far.is_none_or(|f| dists[i] > dists[f]) {
                far = Some(i);
            }
        }
        let far = far.expect("N >= K leaves a donor cluster");
        counts[labels[far]] -= 1;
        counts[c] = 1;
        labels[far] = c;
        dists[far] = 0.0;
        centers.row_mut(c).copy_from_slice(x.row(far));
    }
    (labels, dists)
}

fn lloyd(x: &Matrix, config: &KMeansConfig, restart: u64) -> KMeansResult {
    let (n, d) = x.shape();
    let k = config.k;
    let mut rng = rng::stream(config.seed, ids::KMEANS_BASE + restart);
    let mut centers = plus_plus_init(x, k, &mut rng);
    let (mut labels, _) = assign_and_repair(x, &mut centers);
    let mut history = Vec::new();
    history.push(inertia_of(x, &centers, &labels));
    let mut iterations = 0;

    while iterations < config.max_iter {
        iterations += 1;
        let mut sums = Matrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[labels[i]] += 1;
            for (s, v) in sums.row_mut(labels[i]).iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        let mut new_centers = sums;
        for c in 0..k {
            let inv = 1.0 / counts[c] as f64;
            for v in new_centers.row_mut(c) {
                *v *= inv;
            }
        }
        let shift = (0..k)
            .map(|c| sq_dist(centers.row(c), new_centers.row(c)).sqrt())
            .fold(0.0, f64::max);
        centers = new_centers;
        let (new_labels, _) = assign_and_repair(x, &mut centers);
        history.push(inertia_of(x, &centers, &new_labels));
        let unchanged = new_labels == labels;
        labels = new_labels;
        if shift <= config.tol || unchanged {
            break;
        }
    }

    let inertia = *history.last().expect("history is non-empty");
    KMeansResult {
        centers,
        assignment: ClusterAssignment::new(labels, k).expect("labels below k"),
        inertia,
        iterations,
        inertia_history: history,
    }
}

fn inertia_of(x: &Matrix, centers: &Matrix, labels: &[usize]) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &c)| sq_dist(x.row(i), centers.row(c)))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn k_equals_n_gives_zero_inertia() {
        let x = Matrix::from_rows(&[&[0.0, 0.0], &[1.0, 5.0], &[-3.0, 2.0]]);
        let r = kmeans(&x, &KMeansConfig::new(3, 0)).unwrap();
        assert_eq!(r.inertia, 0.0);
        let mut seen = r.assignment.labels().to_vec();
        seen.sort();
        assert_eq!(seen, vec![0, 1, 2]);
    }

    #[test]
    fn two_far_pairs() {
        let x = Matrix::from_rows(&[&[0.0, 0.0], &[0.0, 2.0], &[100.0, 0.0], &[100.0, 2.0]]);
        let r = kmeans(&x, &KMeansConfig::new(2, 1)).unwrap();
        assert!((r.inertia - 4.0).abs() < 1e-12);
        let mut centers: Vec<Vec<f64>> = (0..2).map(|c| r.centers.row(c).to_vec()).collect();
        centers.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(centers, vec![vec![0.0, 1.0], vec![100.0, 1.0]]);
    }

    fn exhaustive_two_means(x: &Matrix) -> f64 {
        let n = x.rows();
        let mut best = f64::INFINITY;
        for mask in 1u32..(1 << n) - 1 {
            let mut total = 0.0;
            for side in [true, false] {
                let idx: Vec<usize> = (0..n).filter(|&i| ((mask >> i) & 1 == 1) == side).collect();
                let m = x.select_rows(&idx);
                let mean = m.transpose().row_means();
                total += idx.iter().map(|&i| sq_dist(x.row(i), &mean)).sum::<f64>();
            }
            best = best.min(total);
        }
        best
    }

    #[test]
    fn matches_exhaustive_partition_search() {
        let mut hits = 0;
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = Matrix::from_fn(7, 2, |_, _| rng.random_range(-3.0..3.0));
            let r = kmeans(&x, &KMeansConfig::new(2, seed)).unwrap();
            if r.inertia <= exhaustive_two_means(&x) + 1e-9 {
                hits += 1;
            }
        }
        assert!(hits >= 9, "{hits}/10");
    }

    #[test]
    fn lloyd_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Matrix::from_fn(200, 3, |i, _| (i % 4) as f64 * 3.0 + rng.random_range(-1.0..1.0));
        let cfg = KMeansConfig::new(4, 2);
        let r = kmeans(&x, &cfg).unwrap();
        for w in r.inertia_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
        assert!(r.assignment.counts().iter().all(|&c| c > 0));
        let mut total = 0.0;
        for i in 0..x.rows() {
            let (c, d) = nearest_center(&r.centers, x.row(i));
            assert_eq!(c, r.assignment.labels()[i]);
            total += d;
        }
        assert!((total - r.inertia).abs() < 1e-9);
        let again = kmeans(&x, &cfg).unwrap();
        assert_eq!(again.assignment, r.assignment);
        assert_eq!(again.inertia, r.inertia);
    }

    #[test]
    fn duplicate_points_never_leave_empty_clusters() {
        let x = Matrix::from_rows(&[&[0.0], &[0.0], &[0.0], &[1.0]]);
        let r = kmeans(&x, &KMeansConfig::new(3, 0)).unwrap();
        assert!(r.assignment.counts().iter().all(|&c| c > 0));
    }

    #[test]
    fn rejects_too_few_points() {
        let x = Matrix::zeros(2, 2);
        assert!(matches!(
            kmeans(&x, &KMeansConfig::new(3, 0)),
            Err(Error::InvalidParameter(_))
        ));
    }
}
