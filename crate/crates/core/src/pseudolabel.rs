//! Multi-view pseudo-labeling: confident selection from cluster
//! probabilities, per-view cosine refinement, cross-view agreement and the
//! per-view training sets.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cluster::{kmeans, KMeansConfig, KMeansResult};
use crate::datagen::MultiViewDataset;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, Matrix};
use crate::metrics::{accuracy, ClusterAssignment};

pub const DEFAULT_LAMBDA: f64 = 0.5;

/// `N × K` row-stochastic matrix of cluster probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMatrix(Matrix);

impl ProbabilityMatrix {
    pub fn new(p: Matrix) -> Result<Self> {
        if p.cols() == 0 {
            return Err(Error::InvalidParameter("probability matrix has no clusters".into()));
        }
        for i in 0..p.rows() {
            let row = p.row(i);
            if row.iter().any(|&x| x < 0.0) {
                return Err(Error::InvalidParameter(format!("row {i} has a negative probability")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-8 {
                return Err(Error::InvalidParameter(format!("row {i} sums to {s}")));
            }
        }
        Ok(Self(p))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn n_samples(&self) -> usize {
        self.0.rows()
    }

    pub fn k(&self) -> usize {
        self.0.cols()
    }

    pub fn argmax(&self, i: usize) -> usize {
        argmax(self.0.row(i))
    }
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Per-cluster confident sets `𝒯_k` (ordered by descending probability) and
/// their sorted union `𝒯`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfidentSets {
    pub per_cluster: Vec<Vec<usize>>,
    pub union: Vec<usize>,
}

/// Top `b` samples of each column of `p`, ties broken by lower index. A
/// sample may be selected for several clusters.
pub fn select_confident(p: &ProbabilityMatrix, b: usize) -> Result<ConfidentSets> {
    let n = p.n_samples();
    if b > n {
        return Err(Error::InvalidParameter(format!("B = {b} exceeds N = {n}")));
    }
    let m = p.matrix();
    let mut per_cluster = Vec::with_capacity(p.k());
    for k in 0..p.k() {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&i, &j| m[(j, k)].total_cmp(&m[(i, k)]).then(i.cmp(&j)));
        idx.truncate(b);
        per_cluster.push(idx);
    }
    let mut union: Vec<usize> = per_cluster.iter().flatten().copied().collect();
    union.sort_unstable();
    union.dedup();
    Ok(ConfidentSets { per_cluster, union })
}

/// Soft labels (length `K`, summing to 1) keyed by sample index, for one view.
pub type ViewLabels = BTreeMap<usize, Vec<f64>>;

/// Cosine similarity, defined as 0 when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}

/// Keeps `(i, k)` for `i ∈ 𝒯_k` when `cos(hᵢ, h̄_k) ≥ λ`, where `h̄_k` is the
/// mean of `h` over all of `𝒯_k`. A sample kept for several clusters gets
/// weights proportional to its (non-negative) similarities; if those are all
/// zero the weights are uniform over the kept clusters.
///
/// `h` is the `d × N` embedding of one view.
pub fn refine_per_view(h: &Matrix, sets: &ConfidentSets, lambda: f64) -> Result<ViewLabels> {
    let k = sets.per_cluster.len();
    let mut sims: BTreeMap<usize, Vec<Option<f64>>> = BTreeMap::new();
    for (c, members) in sets.per_cluster.iter().enumerate() {
        if members.is_empty() {
            return Err(Error::InvalidParameter(format!("confident set of cluster {c} is empty")));
        }
        let mut center = vec![0.0; h.rows()];
        for &i in members {
            if i >= h.cols() {
                return Err(Error::shape(format!("index {i} outside embedding of {} samples", h.cols())));
            }
            for (acc, r) in center.iter_mut().zip(0..h.rows()) {
                *acc += h[(r, i)];
            }
        }
        for v in &mut center {
            *v /= members.len() as f64;
        }
        for &i in members {
            let s = cosine(&h.column(i), &center);
            if s >= lambda {
                sims.entry(i).or_insert_with(|| vec![None; k])[c] = Some(s);
            }
        }
    }
    let mut out = ViewLabels::new();
    for (i, s) in sims {
        let kept: Vec<usize> = (0..k).filter(|&c| s[c].is_some()).collect();
        let weights: Vec<f64> = (0..k).map(|c| s[c].map_or(0.0, |x| x.max(0.0))).collect();
        let total: f64 = weights.iter().sum();
        let soft = if total > 0.0 {
            weights.iter().map(|w| w / total).collect()
        } else {
            let u = 1.0 / kept.len() as f64;
            (0..k).map(|c| if s[c].is_some() { u } else { 0.0 }).collect()
        };
        out.insert(i, soft);
    }
    Ok(out)
}

/// Drops every index labeled in two or more views whose hard labels
/// (argmax) disagree. Indices labeled in a single view are kept.
pub fn multiview_agreement(per_view: &[ViewLabels]) -> Vec<ViewLabels> {
    let mut hard: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for labels in per_view {
        for (&i, y) in labels {
            hard.entry(i).or_default().push(argmax(y));
        }
    }
    per_view
        .iter()
        .map(|labels| {
            labels
                .iter()
                .filter(|(i, _)| hard[i].iter().all(|&l| l == hard[i][0]))
                .map(|(&i, y)| (i, y.clone()))
                .collect()
        })
        .collect()
}

/// Result of the full protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabelSet {
    /// Sorted union of indices labeled in at least one view.
    pub retained: Vec<usize>,
    pub per_view: Vec<ViewLabels>,
    pub lambda: f64,
    pub top_count: usize,
    pub k: usize,
}

impl PseudoLabelSet {
    pub fn from_views(per_view: Vec<ViewLabels>, lambda: f64, top_count: usize, k: usize) -> Self {
        let mut retained: Vec<usize> = per_view.iter().flat_map(|v| v.keys().copied()).collect();
        retained.sort_unstable();
        retained.dedup();
        Self {
            retained,
            per_view,
            lambda,
            top_count,
            k,
        }
    }

    /// Hard label of `i` from the first view that labels it.
    pub fn hard_label(&self, i: usize) -> Option<usize> {
        self.per_view.iter().find_map(|v| v.get(&i).map(|y| argmax(y)))
    }
}

/// Per-view protocol configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabelConfig {
    pub top_count: usize,
    pub lambda: f64,
    /// Apply [`multiview_agreement`].
    pub agreement: bool,
}

/// Runs selection, refinement on each view embedding, and (optionally)
/// agreement.
pub fn pseudo_label(p: &ProbabilityMatrix, embeddings: &[&Matrix], config: &PseudoLabelConfig) -> Result<PseudoLabelSet> {
    let sets = select_confident(p, config.top_count)?;
    let per_view = embeddings
        .iter()
        .map(|h| refine_per_view(h, &sets, config.lambda))
        .collect::<Result<Vec<_>>>()?;
    let per_view = if config.agreement {
        multiview_agreement(&per_view)
    } else {
        per_view
    };
    Ok(PseudoLabelSet::from_views(per_view, config.lambda, config.top_count, p.k()))
}

/// Cluster ids used to build within-cluster permutations. With agreement, an
/// index takes its pseudo-label only if that equals `argmax(pᵢ)` and all
/// labeling views agree; without it, retained indices take `argmax(pᵢ)`.
pub fn permutation_labels(set: &PseudoLabelSet, p: &ProbabilityMatrix, agreement: bool) -> Vec<Option<usize>> {
    let mut out = vec![None; p.n_samples()];
    for &i in &set.retained {
        let pred = p.argmax(i);
        if !agreement {
            out[i] = Some(pred);
            continue;
        }
        let labels: Vec<usize> = set.per_view.iter().filter_map(|v| v.get(&i).map(|y| argmax(y))).collect();
        if labels.iter().all(|&l| l == pred) {
            out[i] = Some(pred);
        }
    }
    out
}

/// One view's training pairs: column `j` of `inputs` is sample `indices[j]`
/// with target `targets[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub indices: Vec<usize>,
    pub inputs: Matrix,
    pub targets: Vec<Vec<f64>>,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

pub fn build_training_sets(ds: &MultiViewDataset, set: &PseudoLabelSet) -> Result<Vec<TrainingSet>> {
    if set.per_view.len() != ds.n_views() {
        return Err(Error::shape(format!(
            "{} labeled views for a dataset with {}",
            set.per_view.len(),
            ds.n_views()
        )));
    }
    if let Some(&i) = set.retained.last() {
        if i >= ds.n_samples() {
            return Err(Error::InvalidLabels(format!("index {i} outside {} samples", ds.n_samples())));
        }
    }
    Ok(set
        .per_view
        .iter()
        .zip(&ds.views)
        .map(|(v, x)| {
            let indices: Vec<usize> = v.keys().copied().collect();
            TrainingSet {
                inputs: x.select_columns(&indices),
                indices,
                targets: v.values().cloned().collect(),
            }
        })
        .collect())
}

/// Accuracy of the retained hard labels against `truth`, after the best
/// one-to-one matching of cluster ids. `None` when nothing is retained.
pub fn label_precision(set: &PseudoLabelSet, truth: &ClusterAssignment) -> Result<Option<f64>> {
    if set.retained.is_empty() {
        return Ok(None);
    }
    let pred: Vec<usize> = set.retained.iter().map(|&i| set.hard_label(i).expect("retained")).collect();
    let want: Vec<usize> = set.retained.iter().map(|&i| truth.labels()[i]).collect();
    let k = set.k.max(truth.k());
    accuracy(&ClusterAssignment::new(pred, k)?, &ClusterAssignment::new(want, k)?).map(Some)
}

/// Cluster probabilities from k-means centers on `h` (`d × N`):
/// `pᵢₖ ∝ exp(−‖hᵢ − c_k‖² / temperature)`.
pub fn soft_kmeans_probabilities(
    h: &Matrix,
    k: usize,
    temperature: f64,
    seed: u64,
) -> Result<(ProbabilityMatrix, KMeansResult)> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("need K >= 2, got {k}")));
    }
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::InvalidParameter(format!("temperature must be positive, got {temperature}")));
    }
    let km = kmeans(&h.transpose(), &KMeansConfig::new(k, seed))?;
    let p = softmax_distances(h, &km.centers, temperature);
    Ok((ProbabilityMatrix::new(p)?, km))
}

/// Row-wise softmax of `−‖hᵢ − c_k‖² / temperature`, `N × K`.
pub fn softmax_distances(h: &Matrix, centers: &Matrix, temperature: f64) -> Matrix {
    let n = h.cols();
    let k = centers.rows();
    let mut p = Matrix::zeros(n, k);
    for i in 0..n {
        let x = h.column(i);
        let logits: Vec<f64> = (0..k)
            .map(|c| -centers.row(c).iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / temperature)
            .collect();
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
        let s: f64 = e.iter().sum();
        for c in 0..k {
            p[(i, c)] = e[c] / s;
        }
    }
    p
}
