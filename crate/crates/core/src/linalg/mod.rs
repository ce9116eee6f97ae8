//! Dense real linear algebra: centering, covariance, symmetric
//! eigendecomposition, inverse square roots, PCA, spectral norm and optimal
//! assignment.
//!
//! Everything here is a pure function of its inputs. Data matrices are
//! features × samples, so "centering" subtracts each row's mean.

mod assignment;
mod eigen;
mod matrix;

pub use assignment::{assignment_cost, optimal_assignment};
pub use eigen::{inv_psd, inv_sqrt, sym_eig, EigenDecomposition};
pub(crate) use eigen::orient_column;
pub use matrix::{dot, norm, Matrix};

use crate::error::{Error, Result};

/// Normalisation used by [`covariance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Divisor {
    /// Unbiased sample covariance, `1/(N-1)`.
    Unbiased,
    /// Biased, `1/N`. Scatter matrices use this so that `C = C_e + C_a` holds exactly.
    Biased,
}

impl Divisor {
    fn value(self, n: usize) -> f64 {
        match self {
            Divisor::Unbiased => (n - 1) as f64,
            Divisor::Biased => n as f64,
        }
    }
}

/// Subtracts the per-feature (row) mean.
pub fn center(x: &Matrix) -> Result<Matrix> {
    if x.rows() == 0 || x.cols() == 0 {
        return Err(Error::shape("cannot center an empty matrix"));
    }
    Ok(x.sub_row_offsets(&x.row_means()))
}

/// Cross-covariance `A·Bᵀ / divisor` of two already-centered matrices.
pub fn covariance(a: &Matrix, b: &Matrix, divisor: Divisor) -> Result<Matrix> {
    if a.cols() != b.cols() {
        return Err(Error::shape(format!(
            "covariance: sample counts differ ({} vs {})",
            a.cols(),
            b.cols()
        )));
    }
    let n = a.cols();
    if n == 0 || (divisor == Divisor::Unbiased && n < 2) {
        return Err(Error::shape(format!("covariance needs more samples, got {n}")));
    }
    Ok(a.matmul_t(b).scale(1.0 / divisor.value(n)))
}

/// Principal component projection.
#[derive(Debug, Clone)]
pub struct Pca {
    /// `target_dim × d`, orthonormal rows.
    pub projection: Matrix,
    /// `target_dim × N` scores of the centered training data.
    pub embedded: Matrix,
    /// Variance captured by each component (descending).
    pub variances: Vec<f64>,
    pub mean: Vec<f64>,
}

pub fn pca(x: &Matrix, target_dim: usize) -> Result<Pca> {
    let (d, n) = x.shape();
    if target_dim == 0 || target_dim > d.min(n) {
        return Err(Error::shape(format!(
            "pca target_dim {target_dim} outside 1..={}",
            d.min(n)
        )));
    }
    let mean = x.row_means();
    let xc = x.sub_row_offsets(&mean);
    let cov = if n > 1 {
        covariance(&xc, &xc, Divisor::Unbiased)?
    } else {
        covariance(&xc, &xc, Divisor::Biased)?
    };
    let eig = sym_eig(&cov)?;
    let projection = eig.vectors.transpose().top_rows(target_dim);
    let embedded = projection.matmul(&xc);
    Ok(Pca {
        projection,
        embedded,
        variances: eig.values[..target_dim].to_vec(),
        mean,
    })
}

/// Largest singular value.
pub fn spectral_norm(a: &Matrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let gram = if a.rows() <= a.cols() {
        a.matmul_t(a)
    } else {
        a.t_matmul(a)
    };
    let eig = sym_eig(&gram.symmetrize()).expect("Jacobi converges on Gram matrices");
    eig.values[0].max(0.0).sqrt()
}

/// Orthonormal basis for the span of the columns of `a` (modified
/// Gram-Schmidt; numerically dependent columns are dropped).
pub fn orthonormal_basis(a: &Matrix) -> Matrix {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for j in 0..a.cols() {
        let mut v = a.column(j);
        let original = norm(&v);
        for _ in 0..2 {
            for b in &basis {
                let p = dot(&v, b);
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= p * y;
                }
            }
        }
        let nv = norm(&v);
        if original > 0.0 && nv > 1e-10 * original {
            basis.push(v.iter().map(|x| x / nv).collect());
        }
    }
    if basis.is_empty() {
        return Matrix::zeros(a.rows(), 0);
    }
    Matrix::from_columns(&basis).expect("equal-length columns")
}

/// Cosines of the principal angles between the column spans of `a` and `b`,
/// descending.
pub fn principal_cosines(a: &Matrix, b: &Matrix) -> Result<Vec<f64>> {
    if a.rows() != b.rows() {
        return Err(Error::shape("principal angles need equal ambient dimension"));
    }
    let qa = orthonormal_basis(a);
    let qb = orthonormal_basis(b);
    if qa.cols() == 0 || qb.cols() == 0 {
        return Ok(Vec::new());
    }
    let m = qa.t_matmul(&qb);
    let s = spectral_values(&m);
    Ok(s.into_iter().map(|x| x.min(1.0)).collect())
}

/// Singular values, descending.
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    spectral_values(a)
}

fn spectral_values(a: &Matrix) -> Vec<f64> {
    let gram = if a.rows() <= a.cols() {
        a.matmul_t(a)
    } else {
        a.t_matmul(a)
    };
    let eig = sym_eig(&gram.symmetrize()).expect("Jacobi converges on Gram matrices");
    eig.values.into_iter().map(|l| l.max(0.0).sqrt()).collect()
}
