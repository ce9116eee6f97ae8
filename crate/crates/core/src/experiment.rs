//! Experiment drivers behind the command-line verbs: linear baselines, the
//! staged permutation case study, perturbation sweeps and variant ablations.
//! Every driver is a pure function of its inputs and seeds; seeds run in
//! parallel and results come back in seed order.

use std::borrow::Cow;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cca::{fit_cca, transform, CcaModel, Side, DEFAULT_RIDGE};
use crate::cluster::{kmeans, KMeansConfig};
use crate::datagen::{MultiViewDataset, Preset};
use crate::error::{Error, Result};
use crate::lda::{class_means, fit_lda};
use crate::linalg::{covariance, inv_sqrt, pca, principal_cosines, singular_values, Divisor, Matrix};
use crate::metrics::{evaluate, silhouette, ClusterAssignment};
use crate::neural::{train_coper, TrainConfig, Variant};
use crate::permute::{permuted_cca, sample_plan, sample_plan_partial, stacked_pair, PermutationPlan};
use crate::perturb::{sweep, SweepKind, SweepRow};
use crate::pseudolabel::{permutation_labels, pseudo_label, softmax_distances, ProbabilityMatrix, PseudoLabelConfig, DEFAULT_LAMBDA};

/// Stacked permutation rounds used by `cca-perm`.
pub const DEFAULT_ROUNDS: usize = 4;
/// Pipeline stages after plain CCA in the case study.
pub const DEFAULT_STAGES: usize = 2;

pub fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

/// Where each seed's dataset comes from: regenerated per seed from a preset,
/// or one fixed dataset shared by all seeds.
#[derive(Debug, Clone)]
pub enum DataSource {
    Preset { preset: Preset, n_samples: usize },
    Fixed(MultiViewDataset),
}

impl DataSource {
    pub fn preset(preset: Preset) -> Self {
        DataSource::Preset {
            preset,
            n_samples: preset.default_samples(),
        }
    }

    pub fn dataset(&self, seed: u64) -> Result<Cow<'_, MultiViewDataset>> {
        match self {
            DataSource::Preset { preset, n_samples } => Ok(Cow::Owned(preset.generate(*n_samples, seed)?)),
            DataSource::Fixed(ds) => Ok(Cow::Borrowed(ds)),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            DataSource::Preset { preset, n_samples } => format!("{} (n={n_samples}, regenerated per seed)", preset.name()),
            DataSource::Fixed(ds) => format!("fixed dataset (n={}, views={:?})", ds.n_samples(), ds.dims()),
        }
    }
}

/// Mean and sample standard deviation (`n − 1` divisor, 0 for one value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Stat { mean, std })
    }
}

/// One method (or variant, or stage) evaluated on one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub method: String,
    pub seed: u64,
    pub acc: Option<f64>,
    pub ari: Option<f64>,
    pub nmi: Option<f64>,
    pub silhouette: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_s: Option<f64>,
}

impl MetricRow {
    fn score(method: &str, seed: u64, pred: &ClusterAssignment, truth: Option<&ClusterAssignment>, embedding: &Matrix) -> Result<Self> {
        let sil = silhouette(embedding, pred).ok();
        let (acc, ari, nmi) = match truth {
            Some(t) => {
                let m = evaluate(pred, t, None)?;
                (Some(m.acc), Some(m.ari), Some(m.nmi))
            }
            None => (None, None, None),
        };
        Ok(MetricRow {
            method: method.to_string(),
            seed,
            acc,
            ari,
            nmi,
            silhouette: sil,
            runtime_s: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub method: String,
    pub n: usize,
    pub acc: Option<Stat>,
    pub ari: Option<Stat>,
    pub nmi: Option<Stat>,
    pub silhouette: Option<Stat>,
}

/// Per-method mean and std over `rows`, methods in first-seen order.
pub fn aggregate(rows: &[MetricRow]) -> Vec<Aggregate> {
    let mut methods: Vec<&str> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    methods
        .into_iter()
        .map(|m| {
            let mine: Vec<&MetricRow> = rows.iter().filter(|r| r.method == m).collect();
            let stat = |f: fn(&MetricRow) -> Option<f64>| Stat::of(&mine.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
            Aggregate {
                method: m.to_string(),
                n: mine.len(),
                acc: stat(|r| r.acc),
                ari: stat(|r| r.ari),
                nmi: stat(|r| r.nmi),
                silhouette: stat(|r| r.silhouette),
            }
        })
        .collect()
}

/// Output of one command: the configuration it ran with, per-seed rows and
/// their aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub command: String,
    pub config: serde_json::Value,
    pub rows: Vec<MetricRow>,
    pub aggregate: Vec<Aggregate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_s: Option<f64>,
}

impl ExperimentResult {
    pub fn new(command: &str, config: serde_json::Value, rows: Vec<MetricRow>) -> Self {
        let aggregate = aggregate(&rows);
        Self {
            command: command.to_string(),
            config,
            rows,
            aggregate,
            runtime_s: None,
        }
    }

    pub fn aggregate_for(&self, method: &str) -> Option<&Aggregate> {
        self.aggregate.iter().find(|a| a.method == method)
    }

    /// Drops all wall-clock fields so that reports are byte-reproducible.
    pub fn without_timing(mut self) -> Self {
        self.runtime_s = None;
        for r in &mut self.rows {
            r.runtime_s = None;
        }
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Flat CSV with columns `method,seed,acc,ari,nmi,silhouette,runtime_s`;
    /// absent values are empty cells.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["method", "seed", "acc", "ari", "nmi", "silhouette", "runtime_s"])
            .map_err(csv_error)?;
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.method.clone(),
                r.seed.to_string(),
                cell(r.acc),
                cell(r.ari),
                cell(r.nmi),
                cell(r.silhouette),
                cell(r.runtime_s),
            ])
            .map_err(csv_error)?;
        }
        finish_csv(w)
    }

    /// Human-readable table of the aggregate, mean ± std per metric.
    pub fn to_table(&self) -> String {
        let fmt = |s: Option<Stat>| match s {
            Some(s) => format!("{:.4} ± {:.4}", s.mean, s.std),
            None => "-".to_string(),
        };
        let mut out = format!("{}\n", self.command);
        out += &format!("{:<16} {:>3}  {:<17} {:<17} {:<17} {:<17}\n", "method", "n", "acc", "ari", "nmi", "silhouette");
        for a in &self.aggregate {
            out += &format!(
                "{:<16} {:>3}  {:<17} {:<17} {:<17} {:<17}\n",
                a.method,
                a.n,
                fmt(a.acc),
                fmt(a.ari),
                fmt(a.nmi),
                fmt(a.silhouette)
            );
        }
        out
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::InvalidState(format!("csv writer: {e}"))
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::InvalidState(format!("csv writer: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidState(e.to_string()))
}

/// Serializes rows with a header through the csv crate.
pub fn rows_to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    finish_csv(w)
}

fn run_seeds<T: Send>(seeds: &[u64], f: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    seeds.par_iter().map(|&s| f(s)).collect()
}

fn cluster_count(ds: &MultiViewDataset, k: Option<usize>) -> Result<usize> {
    let k = match (k, &ds.labels) {
        (Some(k), _) => k,
        (None, Some(l)) => l.k(),
        (None, None) => return Err(Error::InvalidParameter("the number of clusters is unknown; pass k".into())),
    };
    if k < 2 || k > ds.n_samples() {
        return Err(Error::InvalidParameter(format!("k = {k} outside 2..={}", ds.n_samples())));
    }
    Ok(k)
}

fn require_two_views(ds: &MultiViewDataset, what: &str) -> Result<()> {
    if ds.n_views() != 2 {
        return Err(Error::shape(format!("{what} needs exactly 2 views, got {}", ds.n_views())));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinearMethod {
    /// k-means on the concatenated views.
    Raw,
    /// k-means on per-view PCA scores, concatenated.
    Pca,
    /// k-means on the averaged canonical variates.
    Cca,
    /// As `Cca`, fitted on the original pairing stacked with permuted
    /// pairings drawn from pseudo-labels of the plain CCA embedding.
    CcaPerm,
}

impl LinearMethod {
    pub const ALL: [LinearMethod; 4] = [LinearMethod::Raw, LinearMethod::Pca, LinearMethod::Cca, LinearMethod::CcaPerm];

    pub fn name(self) -> &'static str {
        match self {
            LinearMethod::Raw => "raw",
            LinearMethod::Pca => "pca",
            LinearMethod::Cca => "cca",
            LinearMethod::CcaPerm => "cca-perm",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name).ok_or_else(|| {
            let valid: Vec<&str> = Self::ALL.iter().map(|m| m.name()).collect();
            Error::Config(format!("unknown method {name:?}; valid methods: {}", valid.join(", ")))
        })
    }
}

/// Knobs shared by the linear bench and the case study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearConfig {
    /// Cluster count; `None` reads it from the labels.
    pub k: Option<usize>,
    /// Embedding dimension; `None` means `K − 1`.
    pub dim: Option<usize>,
    /// Stacked permutation rounds for `cca-perm`.
    pub rounds: usize,
    pub ridge: f64,
    pub lambda: f64,
    /// Confident samples per cluster; `None` means `⌈N / K⌉`.
    pub top_count: Option<usize>,
    pub agreement: bool,
}

impl Default for LinearConfig {
    fn default() -> Self {
        Self {
            k: None,
            dim: None,
            rounds: DEFAULT_ROUNDS,
            ridge: DEFAULT_RIDGE,
            lambda: DEFAULT_LAMBDA,
            top_count: None,
            agreement: true,
        }
    }
}

impl LinearConfig {
    fn dim_for(&self, k: usize) -> usize {
        self.dim.unwrap_or(k - 1).max(1)
    }

    fn top_count_for(&self, n: usize, k: usize) -> usize {
        self.top_count.unwrap_or(n.div_ceil(k)).min(n)
    }
}

/// Canonical variates of both views, averaged: `(Aᵀx₁ + Bᵀx₂) / 2`.
pub fn cca_fused(model: &CcaModel, ds: &MultiViewDataset) -> Result<(Matrix, Matrix, Matrix)> {
    let u = transform(model, &ds.views[0], Side::First)?;
    let v = transform(model, &ds.views[1], Side::Second)?;
    let fused = u.add(&v).scale(0.5);
    Ok((u, v, fused))
}

fn kmeans_labels(h: &Matrix, k: usize, seed: u64) -> Result<(ClusterAssignment, f64, Matrix)> {
    let km = kmeans(&h.transpose(), &KMeansConfig::new(k, seed))?;
    let temperature = (km.inertia / h.cols() as f64).max(1e-12);
    Ok((km.assignment, temperature, km.centers))
}

/// Pseudo-labels for re-pairing, read off a two-view embedding: soft k-means
/// probabilities on `fused`, then confident selection, cosine refinement on
/// `u` and `v`, and (optionally) cross-view agreement. Samples without a
/// label keep their original pairing.
pub fn linear_pseudo_labels(
    u: &Matrix,
    v: &Matrix,
    fused: &Matrix,
    k: usize,
    cfg: &LinearConfig,
    seed: u64,
) -> Result<Vec<Option<usize>>> {
    let (_, temperature, centers) = kmeans_labels(fused, k, seed)?;
    let p = ProbabilityMatrix::new(softmax_distances(fused, &centers, temperature))?;
    let config = PseudoLabelConfig {
        top_count: cfg.top_count_for(fused.cols(), k),
        lambda: cfg.lambda,
        agreement: cfg.agreement,
    };
    let set = pseudo_label(&p, &[u, v], &config)?;
    Ok(permutation_labels(&set, &p, cfg.agreement))
}

fn stacked_cca(ds: &MultiViewDataset, plans: &[PermutationPlan], dim: usize, ridge: f64) -> Result<CcaModel> {
    let (a, b) = stacked_pair(ds, plans)?;
    fit_cca(&a, &b, dim, ridge)
}

/// Embedding (`d × N`) of one linear method.
pub fn linear_embedding(ds: &MultiViewDataset, method: LinearMethod, k: usize, cfg: &LinearConfig, seed: u64) -> Result<Matrix> {
    let dim = cfg.dim_for(k);
    match method {
        LinearMethod::Raw => Ok(ds.concatenated()),
        LinearMethod::Pca => {
            let parts = ds
                .views
                .iter()
                .map(|x| pca(x, dim.min(x.rows())).map(|p| p.embedded))
                .collect::<Result<Vec<_>>>()?;
            Matrix::vcat(&parts.iter().collect::<Vec<_>>())
        }
        LinearMethod::Cca => {
            require_two_views(ds, "cca")?;
            let model = fit_cca(&ds.views[0], &ds.views[1], dim, cfg.ridge)?;
            Ok(cca_fused(&model, ds)?.2)
        }
        LinearMethod::CcaPerm => {
            require_two_views(ds, "cca-perm")?;
            let model = fit_cca(&ds.views[0], &ds.views[1], dim, cfg.ridge)?;
            let (u, v, fused) = cca_fused(&model, ds)?;
            let labels = linear_pseudo_labels(&u, &v, &fused, k, cfg, seed)?;
            let plans: Vec<PermutationPlan> = (1..=cfg.rounds as u64).map(|r| sample_plan_partial(&labels, k, r, seed)).collect();
            let model = stacked_cca(ds, &plans, dim, cfg.ridge)?;
            Ok(cca_fused(&model, ds)?.2)
        }
    }
}

/// k-means on each method's embedding for every seed.
pub fn linear_bench(source: &DataSource, methods: &[LinearMethod], cfg: &LinearConfig, seeds: &[u64]) -> Result<ExperimentResult> {
    if methods.is_empty() || seeds.is_empty() {
        return Err(Error::Config("linear-bench needs at least one method and one seed".into()));
    }
    let per_seed = run_seeds(seeds, |seed| {
        let ds = source.dataset(seed)?;
        let k = cluster_count(&ds, cfg.k)?;
        methods
            .iter()
            .map(|&m| {
                let t = Instant::now();
                let h = linear_embedding(&ds, m, k, cfg, seed)?;
                let (pred, _, _) = kmeans_labels(&h, k, seed)?;
                let mut row = MetricRow::score(m.name(), seed, &pred, ds.labels.as_ref(), &h)?;
                row.runtime_s = Some(t.elapsed().as_secs_f64());
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let rows = order_by_method(per_seed, methods.len());
    let config = serde_json::json!({
        "data": source.describe(),
        "methods": methods.iter().map(|m| m.name()).collect::<Vec<_>>(),
        "seeds": seeds,
        "linear": cfg,
    });
    Ok(ExperimentResult::new("linear-bench", config, rows))
}

/// Reorders `per_seed[s][m]` into method-major order.
fn order_by_method(per_seed: Vec<Vec<MetricRow>>, n_methods: usize) -> Vec<MetricRow> {
    let mut rows = Vec::with_capacity(per_seed.len() * n_methods);
    for m in 0..n_methods {
        for seed_rows in &per_seed {
            rows.push(seed_rows[m].clone());
        }
    }
    rows
}

/// Canonical correlations of the limit where every pair is re-paired within
/// its class: CCA on the view covariances with the cross-covariance replaced
/// by the between-class cross-covariance `Σ_k n_k m₁ₖ m₂ₖᵀ / (N − 1)`. With
/// identical views these are the eigenvalues `λ/(1 + λ)` of `C⁻¹C_a`.
pub fn permutation_limit_correlations(ds: &MultiViewDataset, labels: &ClusterAssignment, ridge: f64) -> Result<Vec<f64>> {
    require_two_views(ds, "the permutation limit")?;
    let n = ds.n_samples();
    if n < 2 {
        return Err(Error::shape("need at least two samples"));
    }
    let counts = labels.counts();
    let m1 = class_means(&ds.views[0], labels)?;
    let m2 = class_means(&ds.views[1], labels)?;
    let weighted = Matrix::from_fn(m2.rows(), m2.cols(), |r, c| m2[(r, c)] * counts[c] as f64 / (n - 1) as f64);
    let c12 = m1.matmul_t(&weighted);
    let x1 = ds.views[0].sub_row_offsets(&ds.views[0].row_means());
    let x2 = ds.views[1].sub_row_offsets(&ds.views[1].row_means());
    let w1 = inv_sqrt(&covariance(&x1, &x1, Divisor::Unbiased)?, ridge)?;
    let w2 = inv_sqrt(&covariance(&x2, &x2, Divisor::Unbiased)?, ridge)?;
    Ok(singular_values(&w1.matmul(&c12).matmul(&w2)))
}

/// Mean `|ρᵢ − ρᵢ*|` over the leading `dim` correlations.
pub fn eigen_gap(correlations: &[f64], limit: &[f64], dim: usize) -> f64 {
    let d = dim.min(correlations.len()).min(limit.len()).max(1);
    correlations.iter().zip(limit).take(d).map(|(a, b)| (a - b).abs()).sum::<f64>() / d as f64
}

/// Principal-angle cosines between the first-view directions of
/// [`permuted_cca`] with `labels` and the leading LDA directions of the first
/// view, both `K − 1` dimensional.
pub fn lda_alignment(ds: &MultiViewDataset, labels: &ClusterAssignment, rounds: usize, ridge: f64, seed: u64) -> Result<Vec<f64>> {
    require_two_views(ds, "lda alignment")?;
    let dim = labels.k() - 1;
    let cca = permuted_cca(ds, labels, rounds, dim, ridge, seed)?;
    let lda = fit_lda(&ds.views[0], labels, ridge)?;
    principal_cosines(&cca.proj_a.transpose(), &lda.top_directions(dim))
}

/// One stage of one seed of the case study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRow {
    pub seed: u64,
    pub stage: usize,
    /// Samples re-paired by this stage's plan (0 for plain CCA).
    pub repaired: usize,
    pub acc: Option<f64>,
    pub ari: Option<f64>,
    pub nmi: Option<f64>,
    /// Leading canonical correlations of this stage's fit.
    pub correlations: Vec<f64>,
    /// [`eigen_gap`] against [`permutation_limit_correlations`] under the
    /// true labels; `None` without labels.
    pub eigen_gap: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseStudyConfig {
    pub stages: usize,
    /// Re-pair with the true labels instead of pseudo-labels.
    pub supervised: bool,
}

impl Default for CaseStudyConfig {
    fn default() -> Self {
        Self {
            stages: DEFAULT_STAGES,
            supervised: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStudyReport {
    /// Rows named `stage-0`, `stage-1`, …; stage 0 equals the `cca` method
    /// of [`linear_bench`].
    pub result: ExperimentResult,
    pub stages: Vec<StageRow>,
}

impl CaseStudyReport {
    /// Mean ARI per stage.
    pub fn mean_ari(&self) -> Vec<f64> {
        let n = self.stages.iter().map(|s| s.stage).max().map_or(0, |m| m + 1);
        (0..n)
            .map(|s| {
                let v: Vec<f64> = self.stages.iter().filter(|r| r.stage == s).filter_map(|r| r.ari).collect();
                v.iter().sum::<f64>() / v.len().max(1) as f64
            })
            .collect()
    }

    /// Seeds whose ARI never decreases from one stage to the next.
    pub fn monotone_seeds(&self) -> usize {
        let seeds: Vec<u64> = self.stages.iter().filter(|r| r.stage == 0).map(|r| r.seed).collect();
        seeds
            .into_iter()
            .filter(|&seed| {
                let aris: Vec<f64> = self.stages.iter().filter(|r| r.seed == seed).filter_map(|r| r.ari).collect();
                aris.windows(2).all(|w| w[1] >= w[0])
            })
            .count()
    }
}

/// Plain CCA, then `stages` rounds of: pseudo-label the previous stage's
/// embedding, draw a within-cluster plan, and refit CCA on the original
/// pairing stacked with every plan drawn so far.
pub fn casestudy(source: &DataSource, lin: &LinearConfig, cs: &CaseStudyConfig, seeds: &[u64]) -> Result<CaseStudyReport> {
    if seeds.is_empty() {
        return Err(Error::Config("casestudy needs at least one seed".into()));
    }
    let per_seed = run_seeds(seeds, |seed| {
        let ds = source.dataset(seed)?;
        require_two_views(&ds, "casestudy")?;
        let k = cluster_count(&ds, lin.k)?;
        let dim = lin.dim_for(k);
        if cs.supervised && ds.labels.is_none() {
            return Err(Error::InvalidLabels("supervised re-pairing needs true labels".into()));
        }
        let limit = match &ds.labels {
            Some(l) => Some(permutation_limit_correlations(&ds, l, lin.ridge)?),
            None => None,
        };
        let mut plans: Vec<PermutationPlan> = Vec::new();
        let mut out = Vec::with_capacity(cs.stages + 1);
        let mut metric_rows = Vec::with_capacity(cs.stages + 1);
        let mut model = fit_cca(&ds.views[0], &ds.views[1], dim, lin.ridge)?;
        for stage in 0..=cs.stages {
            let mut repaired = 0;
            if stage > 0 {
                let round = stage as u64;
                let plan = if cs.supervised {
                    sample_plan(ds.labels.as_ref().expect("checked"), round, seed)
                } else {
                    let (u, v, fused) = cca_fused(&model, &ds)?;
                    let labels = linear_pseudo_labels(&u, &v, &fused, k, lin, seed)?;
                    sample_plan_partial(&labels, k, round, seed)
                };
                repaired = plan.clusters.iter().map(|c| c.members.len()).sum();
                plans.push(plan);
                model = stacked_cca(&ds, &plans, dim, lin.ridge)?;
            }
            let fused = cca_fused(&model, &ds)?.2;
            let (pred, _, _) = kmeans_labels(&fused, k, seed)?;
            let row = MetricRow::score(&format!("stage-{stage}"), seed, &pred, ds.labels.as_ref(), &fused)?;
            out.push(StageRow {
                seed,
                stage,
                repaired,
                acc: row.acc,
                ari: row.ari,
                nmi: row.nmi,
                correlations: model.correlations.clone(),
                eigen_gap: limit.as_ref().map(|l| eigen_gap(&model.correlations, l, dim)),
            });
            metric_rows.push(row);
        }
        Ok((metric_rows, out))
    })?;
    let n_stages = cs.stages + 1;
    let (metric_rows, stage_rows): (Vec<_>, Vec<_>) = per_seed.into_iter().unzip();
    let rows = order_by_method(metric_rows, n_stages);
    let config = serde_json::json!({
        "data": source.describe(),
        "seeds": seeds,
        "linear": lin,
        "casestudy": cs,
    });
    Ok(CaseStudyReport {
        result: ExperimentResult::new("casestudy", config, rows),
        stages: stage_rows.into_iter().flatten().collect(),
    })
}

/// [`sweep`] on view `view` of each seed's dataset, against its true labels.
pub fn perturb_sweep(
    source: &DataSource,
    view: usize,
    kind: SweepKind,
    levels: &[f64],
    seeds: &[u64],
    ridge: f64,
) -> Result<Vec<SweepRow>> {
    let per_seed = seeds
        .iter()
        .map(|&seed| {
            let ds = source.dataset(seed)?;
            let labels = ds
                .labels
                .as_ref()
                .ok_or_else(|| Error::InvalidLabels("perturb-sweep needs true labels".into()))?;
            let theta = ds
                .views
                .get(view)
                .ok_or_else(|| Error::InvalidParameter(format!("view {view} does not exist")))?;
            sweep(theta, labels, kind, levels, &[seed], ridge)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows: Vec<SweepRow> = per_seed.into_iter().flatten().collect();
    rows.sort_by(|a, b| a.level.total_cmp(&b.level).then(a.seed.cmp(&b.seed)));
    Ok(rows)
}

/// Training configuration for the shipped three-cluster benchmark.
pub fn benchmark_train_config() -> TrainConfig {
    TrainConfig {
        top_count: Some(32),
        ..TrainConfig::default()
    }
}

/// Trains every variant on every seed and scores the final assignment.
pub fn ablate(source: &DataSource, base: &TrainConfig, variants: &[Variant], seeds: &[u64]) -> Result<ExperimentResult> {
    if variants.is_empty() || seeds.is_empty() {
        return Err(Error::Config("ablate needs at least one variant and one seed".into()));
    }
    let jobs: Vec<(Variant, u64)> = variants.iter().flat_map(|&v| seeds.iter().map(move |&s| (v, s))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(variant, seed)| {
            let ds = source.dataset(seed)?;
            let t = Instant::now();
            let out = train_coper(&ds, &base.clone().with_variant(variant).with_seed(seed))?;
            let fused = out.model.fused(&ds)?;
            let mut row = MetricRow::score(variant.name(), seed, &out.assignment, ds.labels.as_ref(), &fused)?;
            row.runtime_s = Some(t.elapsed().as_secs_f64());
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let config = serde_json::json!({
        "data": source.describe(),
        "variants": variants.iter().map(|v| v.name()).collect::<Vec<_>>(),
        "seeds": seeds,
        "train": base,
    });
    Ok(ExperimentResult::new("ablate", config, rows))
}
