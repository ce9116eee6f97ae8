//! First-order analysis of how pseudo-label errors move the LDA operator
//! `A = C⁻¹C_a`, and sweeps over label noise and labeled-subset size.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lda::{generalized_eig, scatter_matrices};
use crate::linalg::{inv_psd, spectral_norm, Matrix};
use crate::metrics::ClusterAssignment;
use crate::rng::{ids, stream};

/// Relative slack allowed in `max_gap ≤ ‖D‖₂`.
pub const BOUND_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub e1: Matrix,
    pub e2: Matrix,
    pub e3: Matrix,
    pub e: Matrix,
    pub d: Matrix,
    pub true_eigvals: Vec<f64>,
    pub perturbed_eigvals: Vec<f64>,
    /// `‖D‖₂`.
    pub bound: f64,
    pub max_gap: f64,
    pub bound_satisfied: bool,
}

fn validate(theta: &Matrix, true_labels: &ClusterAssignment, pseudo: &[Option<usize>]) -> Result<()> {
    let n = theta.cols();
    if true_labels.len() != n || pseudo.len() != n {
        return Err(Error::InvalidLabels(format!(
            "{} samples, {} true labels, {} pseudo-labels",
            n,
            true_labels.len(),
            pseudo.len()
        )));
    }
    if let Some(k) = true_labels.counts().iter().position(|&c| c == 0) {
        return Err(Error::InvalidLabels(format!("true class {k} is empty")));
    }
    if let Some(l) = pseudo.iter().flatten().find(|&&l| l >= true_labels.k()) {
        return Err(Error::InvalidLabels(format!("pseudo-label {l} outside 0..{}", true_labels.k())));
    }
    Ok(())
}

/// Columns of `theta` averaged over `idx`, or `None` for an empty set.
fn mean_of(theta: &Matrix, idx: &[usize]) -> Option<Vec<f64>> {
    if idx.is_empty() {
        return None;
    }
    let mut m = vec![0.0; theta.rows()];
    for &i in idx {
        for (r, acc) in m.iter_mut().enumerate() {
            *acc += theta[(r, i)];
        }
    }
    for v in &mut m {
        *v /= idx.len() as f64;
    }
    Some(m)
}

fn diff(theta: &Matrix, i: usize, mu: &[f64]) -> Vec<f64> {
    mu.iter().enumerate().map(|(r, m)| theta[(r, i)] - m).collect()
}

fn add_outer(acc: &mut Matrix, a: &[f64], b: &[f64], w: f64) {
    for (r, x) in a.iter().enumerate() {
        for (c, y) in b.iter().enumerate() {
            acc[(r, c)] += w * x * y;
        }
    }
}

/// Index sets per class: pseudo members `N̂_k`, missed true members `N̄_k`,
/// wrong members `Ñ_k` and correct members `N̈_k`.
struct IndexSets {
    hat: Vec<Vec<usize>>,
    missed: Vec<Vec<usize>>,
    wrong: Vec<Vec<usize>>,
    correct: Vec<Vec<usize>>,
}

fn index_sets(true_labels: &ClusterAssignment, pseudo: &[Option<usize>]) -> IndexSets {
    let k = true_labels.k();
    let mut s = IndexSets {
        hat: vec![Vec::new(); k],
        missed: vec![Vec::new(); k],
        wrong: vec![Vec::new(); k],
        correct: vec![Vec::new(); k],
    };
    for (i, (&t, p)) in true_labels.labels().iter().zip(pseudo).enumerate() {
        match *p {
            Some(p) => {
                s.hat[p].push(i);
                if p == t {
                    s.correct[p].push(i);
                } else {
                    s.wrong[p].push(i);
                    s.missed[t].push(i);
                }
            }
            None => s.missed[t].push(i),
        }
    }
    s
}

/// Error terms `(E¹, E², E³)` of the pseudo-labeling `pseudo` against
/// `true_labels` on `theta` (`d × N`). An empty normalizer makes its term
/// zero; a class with no pseudo members uses its true mean for `μ̂_k`.
pub fn error_terms(
    theta: &Matrix,
    true_labels: &ClusterAssignment,
    pseudo: &[Option<usize>],
) -> Result<(Matrix, Matrix, Matrix)> {
    validate(theta, true_labels, pseudo)?;
    let (d, n) = theta.shape();
    let k = true_labels.k();
    let sets = index_sets(true_labels, pseudo);
    let mu: Vec<Vec<f64>> = true_labels
        .members()
        .iter()
        .map(|m| mean_of(theta, m).expect("classes are non-empty"))
        .collect();
    let mu_hat: Vec<Vec<f64>> = (0..k).map(|c| mean_of(theta, &sets.hat[c]).unwrap_or_else(|| mu[c].clone())).collect();

    let mut e1 = Matrix::zeros(d, d);
    let missed: usize = sets.missed.iter().map(Vec::len).sum();
    if missed > 0 {
        for c in 0..k {
            for &i in &sets.missed[c] {
                let x = diff(theta, i, &mu_hat[c]);
                add_outer(&mut e1, &x, &x, -1.0 / missed as f64);
            }
        }
    }

    let mut e2 = Matrix::zeros(d, d);
    let pairs: usize = (0..k).map(|c| sets.wrong[c].len() * sets.correct[c].len()).sum();
    if pairs > 0 {
        let labels = true_labels.labels();
        for c in 0..k {
            for &i in &sets.correct[c] {
                let xi = diff(theta, i, &mu_hat[c]);
                for &j in &sets.wrong[c] {
                    let q = labels[j];
                    let xj = diff(theta, j, &mu_hat[q]);
                    add_outer(&mut e2, &xi, &xj, 1.0 / pairs as f64);
                }
            }
        }
    }

    let mut e3 = Matrix::zeros(d, d);
    for c in 0..k {
        let delta: Vec<f64> = mu[c].iter().zip(&mu_hat[c]).map(|(a, b)| a - b).collect();
        add_outer(&mut e3, &delta, &delta, -(sets.hat[c].len() as f64) / n as f64);
    }
    Ok((e1, e2, e3))
}

/// `D = C⁻¹E − C⁻¹EC⁻¹C_e − C⁻¹E³ + C⁻¹EC⁻¹E³` with `C⁻¹ = (C + ridge·I)⁻¹`.
pub fn perturbation_matrix(c: &Matrix, ce: &Matrix, e: &Matrix, e3: &Matrix, ridge: f64) -> Result<Matrix> {
    let ci = inv_psd(c, ridge)?;
    let cie = ci.matmul(e);
    let cieci = cie.matmul(&ci);
    Ok(cie
        .sub(&cieci.matmul(ce))
        .sub(&ci.matmul(e3))
        .add(&cieci.matmul(e3)))
}

/// Spectrum of `C⁻¹C_a` on the labeled columns of `theta`, each with its
/// own mean and scatters. Empty classes contribute nothing.
fn lda_spectrum(theta: &Matrix, labels: &[Option<usize>], k: usize, ridge: f64) -> Result<Vec<f64>> {
    let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].is_some()).collect();
    if idx.len() < 2 {
        return Err(Error::InvalidLabels("fewer than two labeled samples".into()));
    }
    let x = theta.select_columns(&idx);
    let raw: Vec<usize> = idx.iter().map(|&i| labels[i].expect("filtered")).collect();
    let present: Vec<usize> = (0..k).filter(|c| raw.contains(c)).collect();
    let compact: Vec<usize> = raw.iter().map(|l| present.iter().position(|p| p == l).expect("present")).collect();
    let assignment = ClusterAssignment::new(compact, present.len())?;
    let (ce, ca) = scatter_matrices(&x, &assignment)?;
    let (vals, _) = generalized_eig(&ca, &ce.add(&ca), ridge)?;
    Ok(vals)
}

/// Compares the spectrum of `A` (true labels, all samples) with that of `Â`
/// (pseudo-labeled samples only) and checks `max_gap ≤ ‖D‖₂·(1 + BOUND_TOL)`.
pub fn bound_check(
    theta: &Matrix,
    true_labels: &ClusterAssignment,
    pseudo: &[Option<usize>],
    ridge: f64,
) -> Result<PerturbationReport> {
    let (e1, e2, e3) = error_terms(theta, true_labels, pseudo)?;
    let e = e1.add(&e2).add(&e3);
    let (ce, ca) = scatter_matrices(theta, true_labels)?;
    let c = ce.add(&ca);
    let d = perturbation_matrix(&c, &ce, &e, &e3, ridge)?;
    let truth: Vec<Option<usize>> = true_labels.labels().iter().map(|&l| Some(l)).collect();
    let true_eigvals = lda_spectrum(theta, &truth, true_labels.k(), ridge)?;
    let perturbed_eigvals = lda_spectrum(theta, pseudo, true_labels.k(), ridge)?;
    let max_gap = true_eigvals
        .iter()
        .zip(&perturbed_eigvals)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let bound = spectral_norm(&d);
    Ok(PerturbationReport {
        e1,
        e2,
        e3,
        e,
        d,
        true_eigvals,
        perturbed_eigvals,
        bound,
        max_gap,
        bound_satisfied: max_gap <= bound * (1.0 + BOUND_TOL),
    })
}

/// Reassigns `round(p·N)` randomly chosen samples to a different random class.
pub fn inject_label_noise(labels: &ClusterAssignment, p: f64, seed: u64) -> Result<Vec<Option<usize>>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("noise fraction {p} outside [0, 1]")));
    }
    let k = labels.k();
    let mut out: Vec<Option<usize>> = labels.labels().iter().map(|&l| Some(l)).collect();
    if k < 2 {
        return Ok(out);
    }
    let mut rng = stream(seed, ids::LABEL_NOISE);
    let mut idx: Vec<usize> = (0..labels.len()).collect();
    idx.shuffle(&mut rng);
    let flips = (p * labels.len() as f64).round() as usize;
    for &i in &idx[..flips] {
        let shift = rng.random_range(1..k);
        out[i] = Some((labels.labels()[i] + shift) % k);
    }
    Ok(out)
}

/// Keeps correct labels on a random `round(f·N)` subset (at least one member
/// per class when possible) and leaves the rest unlabeled.
pub fn correct_subset(labels: &ClusterAssignment, f: f64, seed: u64) -> Result<Vec<Option<usize>>> {
    if !(f > 0.0 && f <= 1.0) {
        return Err(Error::InvalidParameter(format!("subset fraction {f} outside (0, 1]")));
    }
    let mut rng = stream(seed, ids::SUBSET);
    let mut idx: Vec<usize> = (0..labels.len()).collect();
    idx.shuffle(&mut rng);
    let keep = ((f * labels.len() as f64).round() as usize).max(1);
    let mut out = vec![None; labels.len()];
    for &i in &idx[..keep] {
        out[i] = Some(labels.labels()[i]);
    }
    for members in labels.members() {
        if !members.is_empty() && members.iter().all(|&i| out[i].is_none()) {
            let i = members[0];
            out[i] = Some(labels.labels()[i]);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    LabelNoise,
    Subset,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            SweepKind::LabelNoise => "label-noise",
            SweepKind::Subset => "subset",
        }
    }
}

/// One `(kind, level, seed)` row of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub kind: SweepKind,
    pub level: f64,
    pub seed: u64,
    pub max_gap: f64,
    pub bound: f64,
    pub bound_satisfied: bool,
    pub e_norm: f64,
}

/// Runs [`bound_check`] for every level and seed. Rows are ordered by level,
/// then seed.
pub fn sweep(
    theta: &Matrix,
    labels: &ClusterAssignment,
    kind: SweepKind,
    levels: &[f64],
    seeds: &[u64],
    ridge: f64,
) -> Result<Vec<SweepRow>> {
    use rayon::prelude::*;
    let jobs: Vec<(f64, u64)> = levels.iter().flat_map(|&l| seeds.iter().map(move |&s| (l, s))).collect();
    jobs.par_iter()
        .map(|&(level, seed)| {
            let pseudo = match kind {
                SweepKind::LabelNoise => inject_label_noise(labels, level, seed)?,
                SweepKind::Subset => correct_subset(labels, level, seed)?,
            };
            let report = bound_check(theta, labels, &pseudo, ridge)?;
            Ok(SweepRow {
                kind,
                level,
                seed,
                max_gap: report.max_gap,
                bound: report.bound,
                bound_satisfied: report.bound_satisfied,
                e_norm: spectral_norm(&report.e),
            })
        })
        .collect()
}

/// Seed-averaged `max_gap` for each level, in `levels` order.
pub fn mean_gaps(rows: &[SweepRow], levels: &[f64]) -> Vec<f64> {
    levels
        .iter()
        .map(|&l| {
            let gaps: Vec<f64> = rows.iter().filter(|r| r.level == l).map(|r| r.max_gap).collect();
            gaps.iter().sum::<f64>() / gaps.len().max(1) as f64
        })
        .collect()
}
