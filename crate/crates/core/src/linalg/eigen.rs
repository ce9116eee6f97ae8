use crate::error::{Error, Result};

use super::Matrix;

const MAX_SWEEPS: usize = 100;

/// Eigenpairs of a symmetric matrix, sorted by descending eigenvalue.
///
/// Column `i` of `vectors` pairs with `values[i]`. Each column is normalised
/// so that its largest-magnitude entry is positive.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl EigenDecomposition {
    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.vectors.column(i)
    }

    /// `V · diag(f(λ)) · Vᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let s = f(self.values[j]);
            for i in 0..n {
                scaled[(i, j)] *= s;
            }
        }
        scaled.matmul_t(&self.vectors)
    }
}

/// Symmetric eigendecomposition by the cyclic Jacobi rotation method.
///
/// The input must be symmetric to `1e-9` (relative to its largest entry).
pub fn sym_eig(a: &Matrix) -> Result<EigenDecomposition> {
    let n = a.rows();
    if n != a.cols() {
        return Err(Error::shape(format!(
            "sym_eig needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let asym = a.asymmetry();
    if asym > 1e-9 * a.max_abs().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    let mut m = a.symmetrize();
    let mut v = Matrix::identity(n);
    let scale = m.frobenius_norm();

    let mut converged = n <= 1 || scale == 0.0;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let off = off_diagonal_norm(&m);
        if off <= 1e-15 * scale {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut m, &mut v, p, q, c, s);
            }
        }
    }
    if !converged && off_diagonal_norm(&m) > 1e-12 * scale {
        return Err(Error::EigenFailure(MAX_SWEEPS));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]).then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = v.select_columns(&order);
    for j in 0..n {
        orient_column(&mut vectors, j);
    }
    Ok(EigenDecomposition { values, vectors })
}

fn off_diagonal_norm(m: &Matrix) -> f64 {
    let n = m.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += m[(i, j)] * m[(i, j)];
            }
        }
    }
    s.sqrt()
}

fn rotate(m: &mut Matrix, v: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let n = m.rows();
    for k in 0..n {
        let mkp = m[(k, p)];
        let mkq = m[(k, q)];
        m[(k, p)] = c * mkp - s * mkq;
        m[(k, q)] = s * mkp + c * mkq;
    }
    for k in 0..n {
        let mpk = m[(p, k)];
        let mqk = m[(q, k)];
        m[(p, k)] = c * mpk - s * mqk;
        m[(q, k)] = s * mpk + c * mqk;
    }
    m[(p, q)] = 0.0;
    m[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// Flips column `j` so its largest-magnitude entry is positive.
pub(crate) fn orient_column(m: &mut Matrix, j: usize) {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for i in 0..m.rows() {
        let x = m[(i, j)];
        if x.abs() > best.abs() + 1e-12 {
            best = x;
            sign = x.signum();
        }
    }
    if sign < 0.0 {
        for i in 0..m.rows() {
            m[(i, j)] = -m[(i, j)];
        }
    }
}

/// `(A + ridge·I)^{-1/2}` for symmetric positive semidefinite `A`.
pub fn inv_sqrt(a: &Matrix, ridge: f64) -> Result<Matrix> {
    let eig = regularized_eig(a, ridge)?;
    Ok(eig.reconstruct_with(|l| 1.0 / (l + ridge).sqrt()))
}

/// `(A + ridge·I)^{-1}` for symmetric positive semidefinite `A`.
pub fn inv_psd(a: &Matrix, ridge: f64) -> Result<Matrix> {
    let eig = regularized_eig(a, ridge)?;
    Ok(eig.reconstruct_with(|l| 1.0 / (l + ridge)))
}

fn regularized_eig(a: &Matrix, ridge: f64) -> Result<EigenDecomposition> {
    if ridge < 0.0 || !ridge.is_finite() {
        return Err(Error::InvalidParameter(format!("ridge must be >= 0, got {ridge}")));
    }
    let eig = sym_eig(a)?;
    let top = eig.values.first().copied().unwrap_or(0.0) + ridge;
    let floor = 1e-12 * top.abs().max(f64::MIN_POSITIVE);
    for &l in &eig.values {
        let shifted = l + ridge;
        if shifted < -1e-8 {
            return Err(Error::NotPsd(shifted));
        }
        if shifted <= floor {
            return Err(Error::SingularCovariance);
        }
    }
    Ok(eig)
}
