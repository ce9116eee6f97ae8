//! CSV view files, label files and the JSON manifest tying them together.
//!
//! A view file has one row per feature and one column per sample. An
//! optional first row of non-numeric tokens is treated as a header.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::MultiViewDataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::metrics::ClusterAssignment;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestView {
    pub path: PathBuf,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub views: Vec<ManifestView>,
    pub n_samples: usize,
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels_path: Option<PathBuf>,
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

/// Rows of numbers, skipping a leading header. Errors cite 1-based rows.
fn read_numeric_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (idx, record) in reader(path)?.records().enumerate() {
        let row = idx as u64 + 1;
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            row,
            message: e.to_string(),
        })?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if idx == 0 && record.iter().all(|t| t.parse::<f64>().is_err()) {
            continue;
        }
        let mut values = Vec::with_capacity(record.len());
        for (col, token) in record.iter().enumerate() {
            let v: f64 = token.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row,
                message: format!("column {}: {token:?} is not a number", col + 1),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row,
                    message: format!("column {}: non-finite value", col + 1),
                });
            }
            values.push(v);
        }
        if let Some(first) = rows.first().map(Vec::len) {
            if values.len() != first {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row,
                    message: format!("expected {first} columns, found {}", values.len()),
                });
            }
        }
        rows.push(values);
    }
    Ok(rows)
}

/// Reads one view file (`features × samples`).
pub fn read_view(path: &Path) -> Result<Matrix> {
    let rows = read_numeric_rows(path)?;
    if rows.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            row: 1,
            message: "file has no data rows".into(),
        });
    }
    let cols = rows[0].len();
    Matrix::new(rows.len(), cols, rows.concat())
}

/// Reads a single-column label file; `k` defaults to the largest id plus one.
pub fn read_labels(path: &Path, k: Option<usize>) -> Result<ClusterAssignment> {
    let mut labels = Vec::new();
    for (idx, record) in reader(path)?.records().enumerate() {
        let row = idx as u64 + 1;
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            row,
            message: e.to_string(),
        })?;
        let Some(token) = record.get(0).filter(|t| !t.is_empty()) else {
            continue;
        };
        match token.parse::<usize>() {
            Ok(l) => labels.push(l),
            Err(_) if idx == 0 && token.parse::<f64>().is_err() => continue,
            Err(_) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row,
                    message: format!("{token:?} is not a non-negative integer label"),
                })
            }
        }
    }
    match k {
        Some(k) => ClusterAssignment::new(labels, k),
        None => Ok(ClusterAssignment::from_labels(labels)),
    }
}

/// Loads view files (and optionally a label file) into an aligned dataset.
pub fn load_dataset<P: AsRef<Path>>(paths: &[P], labels_path: Option<&Path>) -> Result<MultiViewDataset> {
    let views = paths.iter().map(|p| read_view(p.as_ref())).collect::<Result<Vec<_>>>()?;
    let labels = labels_path.map(|p| read_labels(p, None)).transpose()?;
    MultiViewDataset::new(views, labels)
}

/// Loads the dataset described by a manifest; relative paths are resolved
/// against the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<(MultiViewDataset, Manifest)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
    let mut views = Vec::with_capacity(manifest.views.len());
    for v in &manifest.views {
        let m = read_view(&resolve(&v.path))?;
        if m.rows() != v.dim {
            return Err(Error::Alignment(format!(
                "{} has {} features, manifest says {}",
                v.path.display(),
                m.rows(),
                v.dim
            )));
        }
        views.push(m);
    }
    let labels = manifest
        .labels_path
        .as_ref()
        .map(|p| read_labels(&resolve(p), Some(manifest.k)))
        .transpose()?;
    let ds = MultiViewDataset::new(views, labels)?;
    if ds.n_samples() != manifest.n_samples {
        return Err(Error::Alignment(format!(
            "views have {} samples, manifest says {}",
            ds.n_samples(),
            manifest.n_samples
        )));
    }
    Ok((ds, manifest))
}

fn write_view(path: &Path, m: &Matrix) -> Result<()> {
    let mut out = String::with_capacity(m.rows() * m.cols() * 20);
    for i in 0..m.rows() {
        for (j, v) in m.row(i).iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes `view{v}.csv`, `labels.csv` (when labels exist) and `manifest.json`
/// into `dir`, returning the manifest path.
pub fn save_dataset(ds: &MultiViewDataset, dir: &Path, k: usize) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut views = Vec::new();
    for (v, m) in ds.views.iter().enumerate() {
        let name = PathBuf::from(format!("view{v}.csv"));
        write_view(&dir.join(&name), m)?;
        views.push(ManifestView { path: name, dim: m.rows() });
    }
    let labels_path = match &ds.labels {
        Some(l) => {
            let name = PathBuf::from("labels.csv");
            let mut out = String::from("label\n");
            for v in l.labels() {
                out.push_str(&v.to_string());
                out.push('\n');
            }
            let p = dir.join(&name);
            fs::write(&p, out).map_err(|e| Error::io(&p, e))?;
            Some(name)
        }
        None => None,
    };
    let manifest = Manifest {
        views,
        n_samples: ds.n_samples(),
        k,
        labels_path,
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
