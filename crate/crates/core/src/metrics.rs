//! Clustering evaluation: ACC, ARI, NMI and silhouette, plus the
//! [`ClusterAssignment`] label type shared by the rest of the crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{optimal_assignment, Matrix};

/// Hard cluster labels with ids in `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    labels: Vec<usize>,
    k: usize,
}

impl ClusterAssignment {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::InvalidLabels(format!("label {bad} is not below k = {k}")));
        }
        Ok(Self { labels, k })
    }

    /// Uses `k = max label + 1`.
    pub fn from_labels(labels: Vec<usize>) -> Self {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        Self { labels, k }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.k];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }

    /// Sample indices of each cluster, in ascending order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            m[l].push(i);
        }
        m
    }

    /// Renames cluster ids through `map` (`new = map[old]`).
    pub fn relabel(&self, map: &[usize]) -> Result<Self> {
        let labels = self.labels.iter().map(|&l| map[l]).collect();
        Self::new(labels, map.len().max(self.k))
    }
}

/// All four metrics for one clustering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub acc: f64,
    pub ari: f64,
    pub nmi: f64,
    pub silhouette: Option<f64>,
}

pub fn evaluate(
    pred: &ClusterAssignment,
    truth: &ClusterAssignment,
    embedding: Option<&Matrix>,
) -> Result<MetricsReport> {
    let silhouette = match embedding {
        Some(h) => Some(silhouette(h, pred)?),
        None => None,
    };
    Ok(MetricsReport {
        acc: accuracy(pred, truth)?,
        ari: adjusted_rand_index(pred, truth)?,
        nmi: normalized_mutual_information(pred, truth)?,
        silhouette,
    })
}

fn check_lengths(pred: &ClusterAssignment, truth: &ClusterAssignment) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::shape(format!(
            "label vectors differ in length ({} vs {})",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::shape("label vectors are empty"));
    }
    Ok(())
}

/// `table[p][t]` = number of samples with predicted id `p` and true id `t`.
pub fn contingency(pred: &ClusterAssignment, truth: &ClusterAssignment) -> Result<Vec<Vec<u64>>> {
    check_lengths(pred, truth)?;
    let mut table = vec![vec![0u64; truth.k()]; pred.k()];
    for (&p, &t) in pred.labels().iter().zip(truth.labels()) {
        table[p][t] += 1;
    }
    Ok(table)
}

/// Best fraction of matches over all one-to-one relabelings of `pred`.
pub fn accuracy(pred: &ClusterAssignment, truth: &ClusterAssignment) -> Result<f64> {
    let table = contingency(pred, truth)?;
    let k = pred.k().max(truth.k());
    let cost = Matrix::from_fn(k, k, |p, t| {
        if p < pred.k() && t < truth.k() {
            -(table[p][t] as f64)
        } else {
            0.0
        }
    });
    let perm = optimal_assignment(&cost)?;
    let matched: u64 = perm
        .iter()
        .enumerate()
        .filter(|&(p, &t)| p < pred.k() && t < truth.k())
        .map(|(p, &t)| table[p][t])
        .sum();
    Ok(matched as f64 / pred.len() as f64)
}

fn comb2(n: u64) -> u128 {
    let n = n as u128;
    n * n.saturating_sub(1) / 2
}

pub fn adjusted_rand_index(pred: &ClusterAssignment, truth: &ClusterAssignment) -> Result<f64> {
    let table = contingency(pred, truth)?;
    let n = pred.len() as u64;
    let index: u128 = table.iter().flatten().map(|&c| comb2(c)).sum();
    let sum_a: u128 = table.iter().map(|row| comb2(row.iter().sum())).sum();
    let sum_b: u128 = (0..truth.k())
        .map(|t| comb2(table.iter().map(|row| row[t]).sum()))
        .sum();
    let total = comb2(n);
    if total == 0 {
        return Ok(1.0);
    }
    let expected = sum_a as f64 * sum_b as f64 / total as f64;
    let max = 0.5 * (sum_a + sum_b) as f64;
    if max == expected {
        // Both partitions are all-singletons or both a single cluster.
        return Ok(1.0);
    }
    Ok((index as f64 - expected) / (max - expected))
}

fn entropy(counts: &[u64], n: f64) -> f64 {
    let mut terms: Vec<f64> = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .collect();
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

/// Mutual information normalized by the geometric mean of the two entropies.
///
/// Terms are summed in sorted order so the result is bit-identical under any
/// relabeling of either argument.
pub fn normalized_mutual_information(
    pred: &ClusterAssignment,
    truth: &ClusterAssignment,
) -> Result<f64> {
    let table = contingency(pred, truth)?;
    let n = pred.len() as f64;
    let row: Vec<u64> = table.iter().map(|r| r.iter().sum()).collect();
    let col: Vec<u64> = (0..truth.k()).map(|t| table.iter().map(|r| r[t]).sum()).collect();
    let hp = entropy(&row, n);
    let ht = entropy(&col, n);
    if hp == 0.0 || ht == 0.0 {
        return Ok(if hp == ht { 1.0 } else { 0.0 });
    }
    let mut terms = Vec::new();
    for (p, r) in table.iter().enumerate() {
        for (t, &c) in r.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                terms.push(c / n * (n * c / (row[p] as f64 * col[t] as f64)).ln());
            }
        }
    }
    terms.sort_by(f64::total_cmp);
    let mi: f64 = terms.iter().sum();
    Ok((mi / (hp * ht).sqrt()).clamp(0.0, 1.0))
}

/// Mean silhouette coefficient with Euclidean distances. `embedding` is
/// `d × N` (one column per sample).
pub fn silhouette(embedding: &Matrix, labels: &ClusterAssignment) -> Result<f64> {
    let n = embedding.cols();
    if labels.len() != n {
        return Err(Error::shape(format!(
            "silhouette: {} labels for {} samples",
            labels.len(),
            n
        )));
    }
    let counts = labels.counts();
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::InvalidLabels("silhouette needs at least two non-empty clusters".into()));
    }
    let columns: Vec<Vec<f64>> = (0..n).map(|j| embedding.column(j)).collect();
    let lab = labels.labels();
    let scores: Vec<f64> = {
        use rayon::prelude::*;
        (0..n)
            .into_par_iter()
            .map(|i| {
                let own = lab[i];
                if counts[own] == 1 {
                    return 0.0;
                }
                let mut sums = vec![0.0; labels.k()];
                for j in 0..n {
                    if j != i {
                        let d: f64 = columns[i]
                            .iter()
                            .zip(&columns[j])
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>()
                            .sqrt();
                        sums[lab[j]] += d;
                    }
                }
                let a = sums[own] / (counts[own] - 1) as f64;
                let b = (0..labels.k())
                    .filter(|&c| c != own && counts[c] > 0)
                    .map(|c| sums[c] / counts[c] as f64)
                    .fold(f64::INFINITY, f64::min);
                let m = a.max(b);
                if m == 0.0 {
                    0.0
                } else {
                    (b - a) / m
                }
            })
            .collect()
    };
    Ok(scores.iter().sum::<f64>() / n as f64)
}
