//! Within-cluster permutations of the cross-view pairing.
//!
//! A plan reorders the samples of each cluster independently. Applying it to
//! one view re-pairs every sample with another member of the same cluster in
//! the other view; samples outside every cluster keep their partner.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::cca::{fit_cca, CcaModel};
use crate::datagen::MultiViewDataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::metrics::ClusterAssignment;
use crate::rng::{self, ids};

/// One cluster's members and their shuffled order: after applying, the
/// sample at `members[j]` takes the column from `members[order[j]]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterPermutation {
    pub members: Vec<usize>,
    pub order: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationPlan {
    pub clusters: Vec<ClusterPermutation>,
    pub round: u64,
    pub seed: u64,
}

impl PermutationPlan {
    pub fn identity(members: Vec<Vec<usize>>) -> Self {
        let clusters = members
            .into_iter()
            .map(|m| ClusterPermutation {
                order: (0..m.len()).collect(),
                members: m,
            })
            .collect();
        Self { clusters, round: 0, seed: 0 }
    }

    /// Checks that every cluster order is a bijection and that no index is
    /// out of range or shared between clusters.
    pub fn validate(&self, n_samples: usize) -> Result<()> {
        let mut seen = vec![false; n_samples];
        for (k, c) in self.clusters.iter().enumerate() {
            if c.members.len() != c.order.len() {
                return Err(Error::InvalidPlan(format!("cluster {k}: order length differs from members")));
            }
            let mut hit = vec![false; c.order.len()];
            for &o in &c.order {
                if o >= hit.len() || hit[o] {
                    return Err(Error::InvalidPlan(format!("cluster {k}: order is not a permutation")));
                }
                hit[o] = true;
            }
            for &m in &c.members {
                if m >= n_samples {
                    return Err(Error::InvalidPlan(format!(
                        "cluster {k}: index {m} out of range for {n_samples} samples"
                    )));
                }
                if seen[m] {
                    return Err(Error::InvalidPlan(format!("index {m} appears in more than one cluster")));
                }
                seen[m] = true;
            }
        }
        Ok(())
    }

    /// `source[i]` is the sample whose column lands at position `i`.
    pub fn source_indices(&self, n_samples: usize) -> Result<Vec<usize>> {
        self.validate(n_samples)?;
        let mut src: Vec<usize> = (0..n_samples).collect();
        for c in &self.clusters {
            for (j, &o) in c.order.iter().enumerate() {
                src[c.members[j]] = c.members[o];
            }
        }
        Ok(src)
    }

    pub fn is_identity(&self) -> bool {
        self.clusters
            .iter()
            .all(|c| c.order.iter().enumerate().all(|(j, &o)| j == o))
    }
}

/// Uniform random permutation of each cluster of `labels`, deterministic in
/// `(labels, round, seed)`.
pub fn sample_plan(labels: &ClusterAssignment, round: u64, seed: u64) -> PermutationPlan {
    sample_plan_for_members(labels.members(), round, seed)
}

/// As [`sample_plan`] for partially labeled data; `None` samples are left out
/// of every cluster.
pub fn sample_plan_partial(labels: &[Option<usize>], k: usize, round: u64, seed: u64) -> PermutationPlan {
    let mut members = vec![Vec::new(); k];
    for (i, l) in labels.iter().enumerate() {
        if let Some(l) = *l {
            members[l].push(i);
        }
    }
    sample_plan_for_members(members, round, seed)
}

pub fn sample_plan_for_members(members: Vec<Vec<usize>>, round: u64, seed: u64) -> PermutationPlan {
    let mut rng = rng::stream(seed, ids::PERMUTE_BASE + round);
    let clusters = members
        .into_iter()
        .map(|m| {
            let mut order: Vec<usize> = (0..m.len()).collect();
            order.shuffle(&mut rng);
            ClusterPermutation { members: m, order }
        })
        .collect();
    PermutationPlan { clusters, round, seed }
}

pub fn permute_columns(x: &Matrix, plan: &PermutationPlan) -> Result<Matrix> {
    Ok(x.select_columns(&plan.source_indices(x.cols())?))
}

/// Applies `plan` to the listed views; other views and labels are unchanged.
pub fn apply_plan(ds: &MultiViewDataset, plan: &PermutationPlan, views_to_permute: &[usize]) -> Result<MultiViewDataset> {
    let src = plan.source_indices(ds.n_samples())?;
    let mut out = ds.clone();
    for &v in views_to_permute {
        let view = ds
            .views
            .get(v)
            .ok_or_else(|| Error::InvalidPlan(format!("view {v} does not exist")))?;
        out.views[v] = view.select_columns(&src);
    }
    Ok(out)
}

/// View permuted in a given round: the second view on odd rounds, the first
/// on even rounds.
pub fn permuted_side(round: u64) -> usize {
    if round % 2 == 1 {
        1
    } else {
        0
    }
}

/// The original pairing followed by one re-paired copy per plan, as two
/// column-stacked views.
pub fn stacked_pair(ds: &MultiViewDataset, plans: &[PermutationPlan]) -> Result<(Matrix, Matrix)> {
    if ds.n_views() != 2 {
        return Err(Error::shape(format!("permuted CCA needs exactly 2 views, got {}", ds.n_views())));
    }
    let mut first = vec![ds.views[0].clone()];
    let mut second = vec![ds.views[1].clone()];
    for plan in plans {
        let p = apply_plan(ds, plan, &[permuted_side(plan.round)])?;
        first.push(p.views[0].clone());
        second.push(p.views[1].clone());
    }
    let a: Vec<&Matrix> = first.iter().collect();
    let b: Vec<&Matrix> = second.iter().collect();
    Ok((Matrix::hcat(&a)?, Matrix::hcat(&b)?))
}

/// CCA on the original pairing stacked with `rounds` permuted pairings
/// (rounds `1..=rounds`).
pub fn permuted_cca(
    ds: &MultiViewDataset,
    labels: &ClusterAssignment,
    rounds: usize,
    dim: usize,
    ridge: f64,
    seed: u64,
) -> Result<CcaModel> {
    if labels.len() != ds.n_samples() {
        return Err(Error::InvalidLabels(format!(
            "{} labels for {} samples",
            labels.len(),
            ds.n_samples()
        )));
    }
    let partial: Vec<Option<usize>> = labels.labels().iter().map(|&l| Some(l)).collect();
    permuted_cca_partial(ds, &partial, labels.k(), rounds, dim, ridge, seed)
}

/// As [`permuted_cca`] where unlabeled samples keep their original pairing.
pub fn permuted_cca_partial(
    ds: &MultiViewDataset,
    labels: &[Option<usize>],
    k: usize,
    rounds: usize,
    dim: usize,
    ridge: f64,
    seed: u64,
) -> Result<CcaModel> {
    let plans: Vec<PermutationPlan> = (1..=rounds as u64)
        .map(|r| sample_plan_partial(labels, k, r, seed))
        .collect();
    let (a, b) = stacked_pair(ds, &plans)?;
    fit_cca(&a, &b, dim, ridge)
}
