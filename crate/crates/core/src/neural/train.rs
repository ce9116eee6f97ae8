//! End-to-end model: per-view encoders, optional mirrored decoders, weighted
//! fusion and a softmax cluster head, trained with the correlation loss,
//! pseudo-label cross-entropy and within-cluster permutations.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::loss::{cross_entropy, fuse, fuse_backward, reconstruction_loss};
use super::mlp::{flatten, Layer, MlpNetwork, Output};
use crate::cca::pairwise_loss_gradient;
use crate::cluster::{kmeans, KMeansConfig};
use crate::datagen::MultiViewDataset;
use crate::error::{Error, Result};
use crate::linalg::{covariance, inv_sqrt, Divisor, Matrix};
use crate::metrics::{evaluate, silhouette, ClusterAssignment};
use crate::permute::{permute_columns, sample_plan_partial};
use crate::pseudolabel::{argmax, permutation_labels, pseudo_label, ProbabilityMatrix, PseudoLabelConfig, PseudoLabelSet};
use crate::rng::{ids, stream};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Permutation rounds used in training live above every linear-mode round.
const ROUND_BASE: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Full,
    LinearEncoder,
    NoCorr,
    NoPerm,
    NoAgreement,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Full,
        Variant::LinearEncoder,
        Variant::NoCorr,
        Variant::NoPerm,
        Variant::NoAgreement,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::LinearEncoder => "linear-encoder",
            Variant::NoCorr => "no-corr",
            Variant::NoPerm => "no-perm",
            Variant::NoAgreement => "no-agreement",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|v| v.name() == name).ok_or_else(|| {
            let valid: Vec<&str> = Self::ALL.iter().map(|v| v.name()).collect();
            Error::Config(format!("unknown variant {name:?}; valid variants: {}", valid.join(", ")))
        })
    }

    pub fn uses_correlation(self) -> bool {
        self != Variant::NoCorr
    }

    pub fn uses_permutations(self) -> bool {
        self != Variant::NoPerm && self != Variant::NoCorr
    }

    pub fn uses_agreement(self) -> bool {
        self != Variant::NoAgreement
    }
}

/// How the cluster head is set when pseudo-labeling starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeadInit {
    /// Keep the random initialization.
    Random,
    /// Soft k-means on the fused embedding, written into a linear head.
    KMeans,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub corr: f64,
    pub ce: f64,
    pub mse: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            corr: 1.0,
            ce: 1.0,
            mse: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub k: usize,
    pub epochs: usize,
    /// First epoch (0-based) with pseudo-labels and cross-entropy.
    pub ce_start: usize,
    /// First epoch with permuted pairs.
    pub perm_start: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Ridge on the within-batch covariances of the correlation loss.
    pub ridge: f64,
    pub lambda: f64,
    /// Confident samples per cluster and batch; `None` means
    /// `⌈batch_size / k⌉`.
    pub top_count: Option<usize>,
    /// Permutation plans per batch.
    pub perm_rounds: usize,
    pub weights: LossWeights,
    pub hidden: Vec<usize>,
    pub embed_dim: usize,
    pub head_hidden: Vec<usize>,
    /// Only applies to a head without hidden layers.
    pub head_init: HeadInit,
    pub decoders: bool,
    pub variant: Variant,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let epochs = 200;
        let (ce_start, perm_start) = schedule_for(epochs);
        Self {
            k: 3,
            epochs,
            ce_start,
            perm_start,
            batch_size: 128,
            lr: 1e-3,
            ridge: 1e-3,
            lambda: crate::pseudolabel::DEFAULT_LAMBDA,
            top_count: None,
            perm_rounds: 1,
            weights: LossWeights::default(),
            hidden: vec![64, 64],
            embed_dim: 4,
            head_hidden: Vec::new(),
            head_init: HeadInit::KMeans,
            decoders: true,
            variant: Variant::Full,
            seed: 0,
        }
    }
}

/// Cross-entropy and permutation start epochs: 100 and 150 for runs of at
/// least 1000 epochs, scaled down proportionally for shorter runs.
pub fn schedule_for(epochs: usize) -> (usize, usize) {
    if epochs >= 1000 {
        (100, 150)
    } else {
        (epochs / 10, epochs * 15 / 100)
    }
}

impl TrainConfig {
    /// Sets `epochs` and rescales the schedule to match.
    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        (self.ce_start, self.perm_start) = schedule_for(epochs);
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.k < 2 {
            return fail(format!("k must be at least 2, got {}", self.k));
        }
        if self.ce_start > self.epochs || self.perm_start > self.epochs {
            return fail(format!(
                "schedule starts ({}, {}) exceed {} epochs",
                self.ce_start, self.perm_start, self.epochs
            ));
        }
        if self.embed_dim == 0 {
            return fail("embed_dim must be positive".into());
        }
        if self.batch_size <= self.embed_dim + 2 {
            return fail(format!(
                "batch size {} must exceed embed_dim + 2 = {} for the correlation loss",
                self.batch_size,
                self.embed_dim + 2
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || self.ridge.is_nan() || self.ridge < 0.0 {
            return fail(format!("lr {} and ridge {} must be positive", self.lr, self.ridge));
        }
        if self.top_count == Some(0) || self.perm_rounds == 0 {
            return fail("top_count and perm_rounds must be positive".into());
        }
        if self.hidden.contains(&0) || self.head_hidden.contains(&0) {
            return fail("hidden widths must be positive".into());
        }
        Ok(())
    }

    pub fn top_count_for(&self, batch: usize) -> usize {
        self.top_count.unwrap_or(self.batch_size.div_ceil(self.k)).min(batch)
    }

    fn encoder_hidden(&self) -> &[usize] {
        if self.variant == Variant::LinearEncoder {
            &[]
        } else {
            &self.hidden
        }
    }
}

/// Per-feature standardization fitted on the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Self {
        let mean = x.row_means();
        let n = x.cols().max(1) as f64;
        let scale = (0..x.rows())
            .map(|r| {
                let var = x.row(r).iter().map(|v| (v - mean[r]) * (v - mean[r])).sum::<f64>() / n;
                if var > 1e-24 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.rows() != self.mean.len() {
            return Err(Error::shape(format!("{} features, scaler fitted on {}", x.rows(), self.mean.len())));
        }
        Ok(Matrix::from_fn(x.rows(), x.cols(), |r, c| (x[(r, c)] - self.mean[r]) / self.scale[r]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoperModel {
    pub version: u32,
    pub config: TrainConfig,
    pub scalers: Vec<Standardizer>,
    pub encoders: Vec<MlpNetwork>,
    pub decoders: Option<Vec<MlpNetwork>>,
    pub head: MlpNetwork,
    pub fusion: Vec<f64>,
}

/// Gradients laid out like [`CoperModel::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub encoders: Vec<Vec<Layer>>,
    pub decoders: Vec<Vec<Layer>>,
    pub head: Vec<Layer>,
    pub fusion: Vec<f64>,
}

fn zero_layers(net: &MlpNetwork) -> Vec<Layer> {
    net.layers().iter().map(|l| Layer::zeros(l.weight.rows(), l.weight.cols())).collect()
}

fn accumulate(acc: &mut [Layer], g: &[Layer]) {
    for (a, b) in acc.iter_mut().zip(g) {
        a.weight.add_assign_scaled(&b.weight, 1.0);
        for (x, y) in a.bias.iter_mut().zip(&b.bias) {
            *x += y;
        }
    }
}

impl ModelGrads {
    fn zeros(model: &CoperModel) -> Self {
        Self {
            encoders: model.encoders.iter().map(zero_layers).collect(),
            decoders: model.decoders.iter().flatten().map(zero_layers).collect(),
            head: zero_layers(&model.head),
            fusion: vec![0.0; model.fusion.len()],
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for e in &self.encoders {
            out.extend(flatten(e));
        }
        for d in &self.decoders {
            out.extend(flatten(d));
        }
        out.extend(flatten(&self.head));
        out.extend_from_slice(&self.fusion);
        out
    }
}

impl CoperModel {
    /// Fresh model for `ds` with seeded initialization.
    pub fn init(ds: &MultiViewDataset, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = stream(config.seed, ids::INIT);
        let hidden = config.encoder_hidden();
        let mut encoders = Vec::new();
        let mut decoders = Vec::new();
        for &d in &ds.dims() {
            let enc: Vec<usize> = std::iter::once(d).chain(hidden.iter().copied()).chain([config.embed_dim]).collect();
            encoders.push(MlpNetwork::new(&enc, Output::Linear, &mut rng)?);
            let dec: Vec<usize> = enc.iter().rev().copied().collect();
            decoders.push(MlpNetwork::new(&dec, Output::Linear, &mut rng)?);
        }
        let head_dims: Vec<usize> = std::iter::once(config.embed_dim)
            .chain(config.head_hidden.iter().copied())
            .chain([config.k])
            .collect();
        let head = MlpNetwork::new(&head_dims, Output::Softmax, &mut rng)?;
        Ok(Self {
            version: CHECKPOINT_VERSION,
            config: config.clone(),
            scalers: ds.views.iter().map(Standardizer::fit).collect(),
            encoders,
            decoders: config.decoders.then_some(decoders),
            head,
            fusion: vec![1.0 / ds.n_views() as f64; ds.n_views()],
        })
    }

    pub fn n_views(&self) -> usize {
        self.encoders.len()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for e in &self.encoders {
            out.extend(e.params());
        }
        for d in self.decoders.iter().flatten() {
            out.extend(d.params());
        }
        out.extend(self.head.params());
        out.extend_from_slice(&self.fusion);
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        let total = self.params().len();
        if flat.len() != total {
            return Err(Error::shape(format!("{} values for {total} parameters", flat.len())));
        }
        let mut at = 0;
        let mut take = |net: &mut MlpNetwork| -> Result<()> {
            let n = net.n_params();
            net.set_params(&flat[at..at + n])?;
            at += n;
            Ok(())
        };
        for e in &mut self.encoders {
            take(e)?;
        }
        for d in self.decoders.iter_mut().flatten() {
            take(d)?;
        }
        take(&mut self.head)?;
        let rest = &flat[total - self.fusion.len()..];
        self.fusion.copy_from_slice(rest);
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|v| v.is_finite())
    }

    /// Standardized inputs of every view.
    pub fn prepare(&self, ds: &MultiViewDataset) -> Result<Vec<Matrix>> {
        if ds.n_views() != self.n_views() {
            return Err(Error::shape(format!("{} views, model has {}", ds.n_views(), self.n_views())));
        }
        ds.views.iter().zip(&self.scalers).map(|(x, s)| s.apply(x)).collect()
    }

    pub fn embed_prepared(&self, xs: &[Matrix]) -> Result<Vec<Matrix>> {
        xs.iter().zip(&self.encoders).map(|(x, e)| e.apply(x)).collect()
    }

    /// Per-view embeddings `H^(v)`, `embed_dim × N`.
    pub fn embed(&self, ds: &MultiViewDataset) -> Result<Vec<Matrix>> {
        self.embed_prepared(&self.prepare(ds)?)
    }

    pub fn fused(&self, ds: &MultiViewDataset) -> Result<Matrix> {
        let hs = self.embed(ds)?;
        fuse(&hs.iter().collect::<Vec<_>>(), &self.fusion)
    }

    /// Cluster-head probabilities of the fused embedding.
    pub fn predict_proba(&self, ds: &MultiViewDataset) -> Result<ProbabilityMatrix> {
        ProbabilityMatrix::new(self.head.apply(&self.fused(ds)?)?.transpose())
    }

    pub fn predict(&self, ds: &MultiViewDataset) -> Result<ClusterAssignment> {
        let p = self.predict_proba(ds)?;
        ClusterAssignment::new((0..p.n_samples()).map(|i| p.argmax(i)).collect(), self.config.k)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        if model.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!("unsupported checkpoint version {}", model.version)));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Cross-entropy targets for one batch: positions within the batch and
/// `K × m` soft labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Targets {
    pub positions: Vec<usize>,
    pub labels: Matrix,
}

/// Inputs of one optimization step. Pseudo-labels and permutations are
/// fixed before the objective is differentiated.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// Standardized view inputs, `d_v × b`.
    pub views: Vec<Matrix>,
    /// Per-view targets followed by the fused-embedding targets.
    pub targets: Option<(Vec<Targets>, Targets)>,
    /// Each entry holds permuted view inputs restricted to retained samples.
    pub permuted: Vec<Vec<Matrix>>,
    pub retained: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub corr: f64,
    pub corr_perm: f64,
    pub ce: f64,
    pub mse: f64,
    pub total: f64,
}

fn soft_targets(per_view: &[&Vec<f64>], k: usize) -> Vec<f64> {
    let mut t = vec![0.0; k];
    for y in per_view {
        for (a, b) in t.iter_mut().zip(y.iter()) {
            *a += b;
        }
    }
    let s: f64 = t.iter().sum();
    t.iter().map(|v| v / s).collect()
}

fn targets_from(positions: Vec<usize>, labels: Vec<Vec<f64>>, k: usize) -> Targets {
    let labels = Matrix::from_fn(k, positions.len(), |r, c| labels[c][r]);
    Targets { positions, labels }
}

/// Pseudo-labels and permuted pairs for a batch, given the current model.
/// `step` numbers the batch within the run and keys its permutation streams.
pub fn prepare_batch(model: &CoperModel, views: Vec<Matrix>, epoch: usize, step: u64) -> Result<Batch> {
    let cfg = &model.config;
    let mut batch = Batch {
        views,
        targets: None,
        permuted: Vec::new(),
        retained: 0,
    };
    if epoch < cfg.ce_start {
        return Ok(batch);
    }
    let b = batch.views[0].cols();
    let hs = model.embed_prepared(&batch.views)?;
    let href: Vec<&Matrix> = hs.iter().collect();
    let p = ProbabilityMatrix::new(model.head.apply(&fuse(&href, &model.fusion)?)?.transpose())?;
    let agreement = cfg.variant.uses_agreement();
    let config = PseudoLabelConfig {
        top_count: cfg.top_count_for(b),
        lambda: cfg.lambda,
        agreement,
    };
    let set: PseudoLabelSet = pseudo_label(&p, &href, &config)?;
    batch.retained = set.retained.len();
    let per_view = set
        .per_view
        .iter()
        .map(|v| targets_from(v.keys().copied().collect(), v.values().cloned().collect(), cfg.k))
        .collect();
    let fused_labels = set
        .retained
        .iter()
        .map(|i| {
            let ys: Vec<&Vec<f64>> = set.per_view.iter().filter_map(|v| v.get(i)).collect();
            soft_targets(&ys, cfg.k)
        })
        .collect();
    batch.targets = Some((per_view, targets_from(set.retained.clone(), fused_labels, cfg.k)));

    if epoch < cfg.perm_start || !cfg.variant.uses_permutations() {
        return Ok(batch);
    }
    let labels = permutation_labels(&set, &p, agreement);
    let positions: Vec<usize> = (0..b).filter(|&i| labels[i].is_some()).collect();
    if positions.len() <= cfg.embed_dim + 2 {
        return Ok(batch);
    }
    let nv = batch.views.len() as u64;
    for r in 0..cfg.perm_rounds as u64 {
        let round = (step * cfg.perm_rounds as u64 + r) * nv;
        let keep = ((round / nv + 1) % nv) as usize;
        let mut permuted = Vec::with_capacity(batch.views.len());
        for (v, x) in batch.views.iter().enumerate() {
            let x = if v == keep {
                x.clone()
            } else {
                let plan = sample_plan_partial(&labels, cfg.k, ROUND_BASE + round + v as u64, cfg.seed);
                permute_columns(x, &plan)?
            };
            permuted.push(x.select_columns(&positions));
        }
        batch.permuted.push(permuted);
    }
    Ok(batch)
}

fn n_pairs(nv: usize) -> f64 {
    (nv * (nv - 1) / 2).max(1) as f64
}

/// Total objective of a batch and its gradient in [`CoperModel::params`]
/// order.
pub fn objective(model: &CoperModel, batch: &Batch) -> Result<(LossBreakdown, Vec<f64>)> {
    let cfg = &model.config;
    let w = cfg.weights;
    let nv = model.n_views();
    let mut grads = ModelGrads::zeros(model);
    let mut out = LossBreakdown::default();

    let caches = batch
        .views
        .iter()
        .zip(&model.encoders)
        .map(|(x, e)| e.forward(x))
        .collect::<Result<Vec<_>>>()?;
    let hs: Vec<&Matrix> = caches.iter().map(|c| &c.output).collect();
    let mut dh: Vec<Matrix> = hs.iter().map(|h| Matrix::zeros(h.rows(), h.cols())).collect();

    if cfg.variant.uses_correlation() && nv > 1 {
        let (l, g) = pairwise_loss_gradient(&hs, cfg.ridge)?;
        let s = 1.0 / n_pairs(nv);
        out.corr = l * s;
        for (d, gv) in dh.iter_mut().zip(&g) {
            d.add_assign_scaled(gv, w.corr * s);
        }
    }

    if let Some(decoders) = &model.decoders {
        let xs: Vec<&Matrix> = batch.views.iter().collect();
        let r = reconstruction_loss(decoders, &xs, &hs)?;
        out.mse = r.loss;
        for (v, (dg, de)) in r.decoder_grads.iter().zip(&r.embedding_grads).enumerate() {
            let scaled: Vec<Layer> = dg
                .iter()
                .map(|l| Layer {
                    weight: l.weight.scale(w.mse),
                    bias: l.bias.iter().map(|b| b * w.mse).collect(),
                })
                .collect();
            accumulate(&mut grads.decoders[v], &scaled);
            dh[v].add_assign_scaled(de, w.mse);
        }
    }

    if let Some((per_view, fused_t)) = &batch.targets {
        let terms = per_view.iter().filter(|t| !t.positions.is_empty()).count() + usize::from(!fused_t.positions.is_empty());
        if terms > 0 {
            let s = w.ce / terms as f64;
            let mut ce = 0.0;
            for (v, t) in per_view.iter().enumerate() {
                if t.positions.is_empty() {
                    continue;
                }
                let input = hs[v].select_columns(&t.positions);
                let cache = model.head.forward(&input)?;
                let (l, g) = cross_entropy(&cache.output, &t.labels)?;
                ce += l;
                let (hg, dx) = model.head.backward(&cache, &g.scale(s))?;
                accumulate(&mut grads.head, &hg);
                for (j, &pos) in t.positions.iter().enumerate() {
                    for r in 0..dx.rows() {
                        dh[v][(r, pos)] += dx[(r, j)];
                    }
                }
            }
            if !fused_t.positions.is_empty() {
                let fused = fuse(&hs, &model.fusion)?;
                let input = fused.select_columns(&fused_t.positions);
                let cache = model.head.forward(&input)?;
                let (l, g) = cross_entropy(&cache.output, &fused_t.labels)?;
                ce += l;
                let (hg, dx) = model.head.backward(&cache, &g.scale(s))?;
                accumulate(&mut grads.head, &hg);
                let mut df = Matrix::zeros(fused.rows(), fused.cols());
                for (j, &pos) in fused_t.positions.iter().enumerate() {
                    for r in 0..dx.rows() {
                        df[(r, pos)] = dx[(r, j)];
                    }
                }
                let (dhv, dw) = fuse_backward(&hs, &model.fusion, &df);
                for (d, g) in dh.iter_mut().zip(&dhv) {
                    d.add_assign_scaled(g, 1.0);
                }
                for (a, b) in grads.fusion.iter_mut().zip(&dw) {
                    *a += b;
                }
            }
            out.ce = ce / terms as f64;
        }
    }

    if cfg.variant.uses_correlation() && !batch.permuted.is_empty() && nv > 1 {
        let s = 1.0 / (n_pairs(nv) * batch.permuted.len() as f64);
        for views in &batch.permuted {
            let pc = views
                .iter()
                .zip(&model.encoders)
                .map(|(x, e)| e.forward(x))
                .collect::<Result<Vec<_>>>()?;
            let ph: Vec<&Matrix> = pc.iter().map(|c| &c.output).collect();
            let (l, g) = pairwise_loss_gradient(&ph, cfg.ridge)?;
            out.corr_perm += l * s;
            for (v, (c, gv)) in pc.iter().zip(&g).enumerate() {
                let (eg, _) = model.encoders[v].backward(c, &gv.scale(w.corr * s))?;
                accumulate(&mut grads.encoders[v], &eg);
            }
        }
    }

    for (v, (c, d)) in caches.iter().zip(&dh).enumerate() {
        let (eg, _) = model.encoders[v].backward(c, d)?;
        accumulate(&mut grads.encoders[v], &eg);
    }
    out.total = w.corr * (out.corr + out.corr_perm) + w.ce * out.ce + w.mse * out.mse;
    Ok((out, grads.flatten()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub corr: f64,
    pub corr_perm: f64,
    pub ce: f64,
    pub mse: f64,
    pub total: f64,
    /// Mean retained pseudo-labels per batch.
    pub retained: f64,
    pub silhouette: Option<f64>,
    pub acc: Option<f64>,
    pub ari: Option<f64>,
    pub nmi: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainingLog {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for e in &self.epochs {
            w.serialize(e).map_err(|e| Error::InvalidState(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidState(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::InvalidState(e.to_string()))
    }

    pub fn last(&self) -> Option<&EpochLog> {
        self.epochs.last()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: CoperModel,
    pub assignment: ClusterAssignment,
    pub log: TrainingLog,
}

/// Shuffled batches; a short tail is merged into the previous batch.
fn batches(n: usize, size: usize, min: usize, rng: &mut impl rand::Rng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut out: Vec<Vec<usize>> = idx.chunks(size).map(<[usize]>::to_vec).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() < min.max(size / 2)) {
        let tail = out.pop().expect("non-empty");
        out.last_mut().expect("non-empty").extend(tail);
    }
    out
}

fn evaluate_epoch(model: &CoperModel, ds: &MultiViewDataset, log: &mut EpochLog) -> Result<ClusterAssignment> {
    let fused = model.fused(ds)?;
    let p = model.head.apply(&fused)?;
    let labels: Vec<usize> = (0..p.cols()).map(|c| argmax(&p.column(c))).collect();
    let pred = ClusterAssignment::new(labels, model.config.k)?;
    log.silhouette = silhouette(&fused, &pred).ok();
    if let Some(truth) = &ds.labels {
        let m = evaluate(&pred, truth, None)?;
        (log.acc, log.ari, log.nmi) = (Some(m.acc), Some(m.ari), Some(m.nmi));
    }
    Ok(pred)
}

/// Writes `softmax(−‖z − c_k‖² / T)` into a linear head, where `z` is the
/// whitened fused embedding, `c_k` are k-means centers in that space and `T`
/// the mean squared distance of a sample to its center. The whitening is
/// folded into the head weights, so the head still reads the raw embedding.
fn init_head_from_kmeans(model: &mut CoperModel, xs: &[Matrix]) -> Result<()> {
    if model.head.layers().len() != 1 {
        return Ok(());
    }
    let hs = model.embed_prepared(xs)?;
    let fused = fuse(&hs.iter().collect::<Vec<_>>(), &model.fusion)?;
    let mean = fused.row_means();
    let centered = fused.sub_row_offsets(&mean);
    let white = inv_sqrt(&covariance(&centered, &centered, Divisor::Biased)?, model.config.ridge)?;
    let z = white.matmul(&centered);
    let km = kmeans(&z.transpose(), &KMeansConfig::new(model.config.k, model.config.seed))?;
    let t = (km.inertia / z.cols() as f64).max(1e-12);
    let weight = km.centers.matmul(&white).scale(2.0 / t);
    let offsets = weight.matvec(&mean);
    let bias = (0..weight.rows())
        .map(|k| -(km.centers.row(k).iter().map(|v| v * v).sum::<f64>() / t) - offsets[k])
        .collect();
    model.head = MlpNetwork::from_layers(fused.rows(), vec![Layer { weight, bias }], Output::Softmax)?;
    Ok(())
}

/// Trains on all samples of `ds` for `config.epochs` epochs with one Adam
/// step per batch. Labels in `ds`, if any, are used only for logging.
pub fn train_coper(ds: &MultiViewDataset, config: &TrainConfig) -> Result<TrainOutcome> {
    let mut model = CoperModel::init(ds, config)?;
    if ds.n_views() < 2 && config.variant.uses_correlation() {
        return Err(Error::Config("the correlation loss needs at least two views".into()));
    }
    let min_batch = config.embed_dim + 3;
    if ds.n_samples() < min_batch {
        return Err(Error::Config(format!(
            "{} samples cannot fill a batch of at least {min_batch}",
            ds.n_samples()
        )));
    }
    let xs = model.prepare(ds)?;
    let mut params = model.params();
    let mut opt = Adam::new(params.len(), config.lr);
    let mut rng = stream(config.seed, ids::BATCHES);
    let mut log = TrainingLog::default();
    let mut step = 0u64;
    let mut pred = None;
    for epoch in 0..config.epochs {
        if epoch == config.ce_start && config.head_init == HeadInit::KMeans {
            init_head_from_kmeans(&mut model, &xs)?;
            params = model.params();
        }
        let mut sums = LossBreakdown::default();
        let mut retained = 0.0;
        let plan = batches(ds.n_samples(), config.batch_size, min_batch, &mut rng);
        for idx in &plan {
            let views = xs.iter().map(|x| x.select_columns(idx)).collect();
            let batch = prepare_batch(&model, views, epoch, step)?;
            let (loss, grad) = objective(&model, &batch)?;
            if !loss.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::TrainingDiverged {
                    epoch,
                    message: format!("non-finite objective {:?}", loss),
                });
            }
            opt.step(&mut params, &grad);
            model.set_params(&params)?;
            sums.corr += loss.corr;
            sums.corr_perm += loss.corr_perm;
            sums.ce += loss.ce;
            sums.mse += loss.mse;
            sums.total += loss.total;
            retained += batch.retained as f64;
            step += 1;
        }
        let nb = plan.len() as f64;
        let mut entry = EpochLog {
            epoch,
            corr: sums.corr / nb,
            corr_perm: sums.corr_perm / nb,
            ce: sums.ce / nb,
            mse: sums.mse / nb,
            total: sums.total / nb,
            retained: retained / nb,
            silhouette: None,
            acc: None,
            ari: None,
            nmi: None,
        };
        pred = Some(evaluate_epoch(&model, ds, &mut entry)?);
        log.epochs.push(entry);
    }
    let assignment = match pred {
        Some(p) => p,
        None => model.predict(ds)?,
    };
    Ok(TrainOutcome { model, assignment, log })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneRow {
    pub candidate: usize,
    pub seed: u64,
    pub silhouette: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub rows: Vec<TuneRow>,
    /// Mean final-epoch silhouette per candidate (missing values count as −1).
    pub mean_silhouette: Vec<f64>,
    pub best: usize,
}

/// Trains every candidate on every seed and picks the configuration with the
/// largest mean silhouette of the fused embedding. Ties go to the earlier
/// candidate.
pub fn tune(ds: &MultiViewDataset, candidates: &[TrainConfig], seeds: &[u64]) -> Result<TuneReport> {
    use rayon::prelude::*;
    if candidates.is_empty() || seeds.is_empty() {
        return Err(Error::Config("tuning needs at least one candidate and one seed".into()));
    }
    let jobs: Vec<(usize, u64)> = (0..candidates.len()).flat_map(|c| seeds.iter().map(move |&s| (c, s))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(c, seed)| {
            let out = train_coper(ds, &candidates[c].clone().with_seed(seed))?;
            Ok(TuneRow {
                candidate: c,
                seed,
                silhouette: out.log.last().and_then(|e| e.silhouette),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mean_silhouette: Vec<f64> = (0..candidates.len())
        .map(|c| {
            let v: Vec<f64> = rows.iter().filter(|r| r.candidate == c).map(|r| r.silhouette.unwrap_or(-1.0)).collect();
            v.iter().sum::<f64>() / v.len() as f64
        })
        .collect();
    let mut best = 0;
    for (c, &m) in mean_silhouette.iter().enumerate() {
        if m > mean_silhouette[best] {
            best = c;
        }
    }
    Ok(TuneReport {
        rows,
        mean_silhouette,
        best,
    })
}
