//! Synthetic multi-view data and dataset files.
//!
//! Samples are drawn from a latent Gaussian mixture θ and pushed into each
//! view by a random affine map plus independent Gaussian noise.

mod digits;
mod io;

pub use digits::{split_views, synth_digits, DigitSpec, ImageLayout};
pub use io::{load_dataset, load_manifest, read_labels, read_view, save_dataset, Manifest, ManifestView};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{orthonormal_basis, Matrix};
use crate::metrics::ClusterAssignment;
use crate::rng::{self, ids};

/// Aligned views (each `d_v × N`) and optional ground-truth labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset {
    pub views: Vec<Matrix>,
    pub labels: Option<ClusterAssignment>,
}

impl MultiViewDataset {
    pub fn new(views: Vec<Matrix>, labels: Option<ClusterAssignment>) -> Result<Self> {
        let Some(first) = views.first() else {
            return Err(Error::Alignment("dataset has no views".into()));
        };
        let n = first.cols();
        for (v, view) in views.iter().enumerate() {
            if view.cols() != n {
                return Err(Error::Alignment(format!(
                    "view {v} has {} samples, view 0 has {n}",
                    view.cols()
                )));
            }
            if view.rows() == 0 {
                return Err(Error::InvalidSpec(format!("view {v} has zero features")));
            }
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::Alignment(format!("{} labels for {n} samples", l.len())));
            }
        }
        Ok(Self { views, labels })
    }

    pub fn n_samples(&self) -> usize {
        self.views[0].cols()
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.views.iter().map(Matrix::rows).collect()
    }

    /// Keeps only the listed samples, in the given order.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        let views = self.views.iter().map(|v| v.select_columns(idx)).collect();
        let labels = match &self.labels {
            Some(l) => Some(ClusterAssignment::new(
                idx.iter().map(|&i| l.labels()[i]).collect(),
                l.k(),
            )?),
            None => None,
        };
        Self::new(views, labels)
    }

    /// All views stacked along the feature axis.
    pub fn concatenated(&self) -> Matrix {
        let refs: Vec<&Matrix> = self.views.iter().collect();
        Matrix::vcat(&refs).expect("views share N")
    }
}

/// Affine pushforward of one view: `x = weights · θ + bias`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewMap {
    /// `d_v × latent_dim`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Generative model for [`synth_multiview`].
///
/// `θ = μ_k + s_k · (axis_scales ⊙ z)` with `z ~ N(0, I)` and `k` uniform over
/// clusters; view `v` is `W_v θ + b_v + ε_v · N(0, I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentSpec {
    pub n_clusters: usize,
    pub latent_dim: usize,
    /// `K × latent_dim`.
    pub cluster_means: Matrix,
    pub cluster_scales: Vec<f64>,
    /// Per-axis spread multiplier; large entries on axes where all clusters
    /// share the mean act as nuisance directions.
    pub axis_scales: Vec<f64>,
    pub view_maps: Vec<ViewMap>,
    pub view_noise: Vec<f64>,
}

/// Knobs for [`LatentSpec::random`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomSpec {
    pub k: usize,
    pub view_dims: Vec<usize>,
    /// Latent axes carrying the cluster means.
    pub class_dims: usize,
    /// Extra latent axes with zero mean shared by all clusters.
    pub nuisance_dims: usize,
    /// Distance of each cluster mean from the origin.
    pub separation: f64,
    pub cluster_scale: f64,
    pub nuisance_scale: f64,
    pub noise: f64,
}

impl Default for RandomSpec {
    fn default() -> Self {
        Self {
            k: 3,
            view_dims: vec![10, 10],
            class_dims: 2,
            nuisance_dims: 2,
            separation: 3.0,
            cluster_scale: 1.0,
            nuisance_scale: 1.5,
            noise: 0.5,
        }
    }
}

impl LatentSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.n_clusters < 2 {
            return bad(format!("need at least 2 clusters, got {}", self.n_clusters));
        }
        if self.latent_dim == 0 {
            return bad("latent_dim must be positive".into());
        }
        if self.cluster_means.shape() != (self.n_clusters, self.latent_dim) {
            return bad(format!(
                "cluster_means is {:?}, expected ({}, {})",
                self.cluster_means.shape(),
                self.n_clusters,
                self.latent_dim
            ));
        }
        if self.cluster_scales.len() != self.n_clusters
            || self.cluster_scales.iter().any(|&s| !(s > 0.0 && s.is_finite()))
        {
            return bad("cluster_scales must be K positive values".into());
        }
        if self.axis_scales.len() != self.latent_dim
            || self.axis_scales.iter().any(|&s| !(s > 0.0 && s.is_finite()))
        {
            return bad("axis_scales must be latent_dim positive values".into());
        }
        if self.view_maps.is_empty() {
            return bad("at least one view is required".into());
        }
        if self.view_noise.len() != self.view_maps.len()
            || self.view_noise.iter().any(|&s| !(s >= 0.0 && s.is_finite()))
        {
            return bad("view_noise must be one non-negative value per view".into());
        }
        for (v, map) in self.view_maps.iter().enumerate() {
            if map.weights.rows() == 0 {
                return bad(format!("view {v} has zero dimension"));
            }
            if map.weights.cols() != self.latent_dim || map.bias.len() != map.weights.rows() {
                return bad(format!("view {v} map does not match latent_dim"));
            }
        }
        Ok(())
    }

    /// Random instance: cluster means on a scaled regular simplex in the
    /// class axes, Gaussian view maps, nuisance axes with a shared zero mean.
    pub fn random(params: &RandomSpec, seed: u64) -> Result<Self> {
        let RandomSpec { k, class_dims, nuisance_dims, .. } = *params;
        if k < 2 {
            return Err(Error::InvalidSpec(format!("need at least 2 clusters, got {k}")));
        }
        if class_dims == 0 {
            return Err(Error::InvalidSpec("class_dims must be positive".into()));
        }
        if params.view_dims.is_empty() || params.view_dims.contains(&0) {
            return Err(Error::InvalidSpec(format!(
                "view dimensions must be positive, got {:?}",
                params.view_dims
            )));
        }
        let latent_dim = class_dims + nuisance_dims;
        let mut rng = rng::stream(seed, ids::SPEC);
        let mut normal = || -> f64 { rng.sample(StandardNormal) };

        let simplex = simplex_vertices(k);
        let mut cluster_means = Matrix::zeros(k, latent_dim);
        if class_dims >= k - 1 {
            for c in 0..k {
                for j in 0..k - 1 {
                    cluster_means[(c, j)] = params.separation * simplex[(c, j)];
                }
            }
        } else {
            for c in 0..k {
                let dir: Vec<f64> = (0..class_dims).map(|_| normal()).collect();
                let len = crate::linalg::norm(&dir).max(1e-12);
                for j in 0..class_dims {
                    cluster_means[(c, j)] = params.separation * dir[j] / len;
                }
            }
        }
        let mut axis_scales = vec![1.0; latent_dim];
        for s in axis_scales.iter_mut().skip(class_dims) {
            *s = params.nuisance_scale;
        }
        let view_maps = params
            .view_dims
            .iter()
            .map(|&d| ViewMap {
                weights: Matrix::from_fn(d, latent_dim, |_, _| normal() / (latent_dim as f64).sqrt()),
                bias: (0..d).map(|_| normal()).collect(),
            })
            .collect();
        let spec = Self {
            n_clusters: k,
            latent_dim,
            cluster_means,
            cluster_scales: vec![params.cluster_scale; k],
            axis_scales,
            view_maps,
            view_noise: vec![params.noise; params.view_dims.len()],
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Unit-radius regular simplex: `K` rows with `K − 1` coordinates.
fn simplex_vertices(k: usize) -> Matrix {
    let centered = Matrix::from_fn(k, k, |i, j| if i == j { 1.0 } else { 0.0 } - 1.0 / k as f64);
    let basis = orthonormal_basis(&centered);
    let coords = centered.matmul(&basis);
    let radius = crate::linalg::norm(coords.row(0));
    coords.scale(1.0 / radius)
}

/// Draws a dataset from `spec`. Deterministic in `(spec, n_samples, seed)`.
pub fn synth_multiview(spec: &LatentSpec, n_samples: usize, seed: u64) -> Result<MultiViewDataset> {
    synth_multiview_with_latent(spec, n_samples, seed).map(|(ds, _)| ds)
}

/// As [`synth_multiview`], also returning the latent samples θ
/// (`latent_dim × N`).
pub fn synth_multiview_with_latent(
    spec: &LatentSpec,
    n_samples: usize,
    seed: u64,
) -> Result<(MultiViewDataset, Matrix)> {
    spec.validate()?;
    let k = spec.n_clusters;
    if n_samples < k {
        return Err(Error::InvalidSpec(format!("need at least K = {k} samples, got {n_samples}")));
    }
    let mut rng = rng::stream(seed, ids::LATENT);
    let mut labels = Vec::with_capacity(n_samples);
    let mut theta = Matrix::zeros(spec.latent_dim, n_samples);
    for i in 0..n_samples {
        let c = rng.random_range(0..k);
        labels.push(c);
        for j in 0..spec.latent_dim {
            let z: f64 = rng.sample(StandardNormal);
            theta[(j, i)] = spec.cluster_means[(c, j)] + spec.cluster_scales[c] * spec.axis_scales[j] * z;
        }
    }
    let mut views = Vec::with_capacity(spec.view_maps.len());
    for (v, map) in spec.view_maps.iter().enumerate() {
        let mut noise_rng = rng::stream(seed, ids::VIEW_NOISE_BASE + v as u64);
        let mut x = map.weights.matmul(&theta).add_row_offsets(&map.bias);
        let eps = spec.view_noise[v];
        if eps > 0.0 {
            for val in x.data_mut() {
                let z: f64 = noise_rng.sample(StandardNormal);
                *val += eps * z;
            }
        }
        views.push(x);
    }
    let labels = ClusterAssignment::new(labels, k)?;
    Ok((MultiViewDataset::new(views, Some(labels))?, theta))
}

/// Named datasets shipped with the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Three latent clusters with two large shared nuisance axes, seen
    /// through two 10-D views (600 samples).
    ThreeCluster,
    /// Digit-like 8×8 images split into top and bottom halves (900 samples).
    SplitDigits,
}

impl Preset {
    pub const ALL: [Preset; 2] = [Preset::ThreeCluster, Preset::SplitDigits];

    pub fn name(self) -> &'static str {
        match self {
            Preset::ThreeCluster => "three-cluster",
            Preset::SplitDigits => "split-digits",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown preset {name:?}")))
    }

    pub fn default_samples(self) -> usize {
        match self {
            Preset::ThreeCluster => 600,
            Preset::SplitDigits => 900,
        }
    }

    pub fn generate(self, n_samples: usize, seed: u64) -> Result<MultiViewDataset> {
        match self {
            Preset::ThreeCluster => {
                let spec = LatentSpec::random(&three_cluster_spec(), seed)?;
                synth_multiview(&spec, n_samples, seed)
            }
            Preset::SplitDigits => {
                let spec = DigitSpec::default();
                let (images, labels) = synth_digits(&spec, n_samples, seed)?;
                let mut ds = split_views(&images, spec.layout)?;
                ds.labels = Some(labels);
                Ok(ds)
            }
        }
    }
}

/// Parameters behind [`Preset::ThreeCluster`].
pub fn three_cluster_spec() -> RandomSpec {
    RandomSpec::default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_shared_map_gives_identical_views() {
        let mut spec = LatentSpec::random(&RandomSpec { noise: 0.0, ..RandomSpec::default() }, 3).unwrap();
        spec.view_maps[1] = spec.view_maps[0].clone();
        let ds = synth_multiview(&spec, 50, 1).unwrap();
        assert_eq!(ds.views[0], ds.views[1]);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let spec = LatentSpec::random(&RandomSpec::default(), 0).unwrap();
        let a = synth_multiview(&spec, 100, 9).unwrap();
        let b = synth_multiview(&spec, 100, 9).unwrap();
        assert_eq!(a, b);
        let c = synth_multiview(&spec, 100, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn cluster_counts_within_binomial_bounds() {
        let spec = LatentSpec::random(&RandomSpec::default(), 0).unwrap();
        let ds = synth_multiview(&spec, 600, 4).unwrap();
        let p: f64 = 1.0 / 3.0;
        let sd = (600.0 * p * (1.0 - p)).sqrt();
        for c in ds.labels.unwrap().counts() {
            assert!((c as f64 - 200.0).abs() <= 3.0 * sd, "count {c}");
        }
        assert_eq!(ds.views[0].shape(), (10, 600));
    }

    #[test]
    fn degenerate_specs_are_rejected() {
        let zero_view = RandomSpec { view_dims: vec![0, 10], ..RandomSpec::default() };
        assert!(matches!(LatentSpec::random(&zero_view, 0), Err(Error::InvalidSpec(_))));
        let one_cluster = RandomSpec { k: 1, ..RandomSpec::default() };
        assert!(matches!(LatentSpec::random(&one_cluster, 0), Err(Error::InvalidSpec(_))));
        let spec = LatentSpec::random(&RandomSpec::default(), 0).unwrap();
        assert!(synth_multiview(&spec, 2, 0).is_err());
    }

    #[test]
    fn simplex_vertices_are_equidistant() {
        for k in 2..6 {
            let s = simplex_vertices(k);
            assert_eq!(s.shape(), (k, k - 1));
            let d01: f64 = (0..k - 1).map(|j| (s[(0, j)] - s[(1, j)]).powi(2)).sum();
            for a in 0..k {
                assert!((crate::linalg::norm(s.row(a)) - 1.0).abs() < 1e-12);
                for b in 0..a {
                    let d: f64 = (0..k - 1).map(|j| (s[(a, j)] - s[(b, j)]).powi(2)).sum();
                    assert!((d - d01).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn presets_generate() {
        for p in Preset::ALL {
            let ds = p.generate(90, 0).unwrap();
            assert_eq!(ds.n_views(), 2);
            assert_eq!(ds.n_samples(), 90);
            assert_eq!(Preset::parse(p.name()).unwrap(), p);
        }
    }
}
