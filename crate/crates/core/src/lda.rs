//! Scatter matrices and linear discriminant directions.
//!
//! Scatters use the `1/N` divisor so that `C = C_e + C_a` holds exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{inv_sqrt, orient_column, sym_eig, Matrix};
use crate::metrics::ClusterAssignment;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LdaModel {
    /// Descending.
    pub eigvals: Vec<f64>,
    /// Unit-norm directions `h` as columns, paired with `eigvals`.
    pub eigvecs: Matrix,
    /// `C_e`.
    pub within_scatter: Matrix,
    /// `C_a`.
    pub between_scatter: Matrix,
    /// `D × K`, class means relative to the global mean.
    pub class_means: Matrix,
}

impl LdaModel {
    /// The leading `n` directions as a `D × n` matrix.
    pub fn top_directions(&self, n: usize) -> Matrix {
        let idx: Vec<usize> = (0..n.min(self.eigvals.len())).collect();
        self.eigvecs.select_columns(&idx)
    }
}

/// Class means of `x` (`D × N`) after removing the global mean; errors on an
/// empty class.
pub fn class_means(x: &Matrix, labels: &ClusterAssignment) -> Result<Matrix> {
    check(x, labels)?;
    let centered = x.sub_row_offsets(&x.row_means());
    let counts = labels.counts();
    let mut means = Matrix::zeros(x.rows(), labels.k());
    for (i, &l) in labels.labels().iter().enumerate() {
        for r in 0..x.rows() {
            means[(r, l)] += centered[(r, i)];
        }
    }
    for k in 0..labels.k() {
        for r in 0..x.rows() {
            means[(r, k)] /= counts[k] as f64;
        }
    }
    Ok(means)
}

fn check(x: &Matrix, labels: &ClusterAssignment) -> Result<()> {
    if labels.len() != x.cols() {
        return Err(Error::InvalidLabels(format!(
            "{} labels for {} samples",
            labels.len(),
            x.cols()
        )));
    }
    if let Some(k) = labels.counts().iter().position(|&c| c == 0) {
        return Err(Error::InvalidLabels(format!("class {k} is empty")));
    }
    Ok(())
}

/// Within-class scatter `C_e` and between-class scatter `C_a` of `x`
/// (`D × N`). The global mean is removed first, so the identity
/// `C_e + C_a = (1/N)·X̄X̄ᵀ` holds for any input.
pub fn scatter_matrices(x: &Matrix, labels: &ClusterAssignment) -> Result<(Matrix, Matrix)> {
    let means = class_means(x, labels)?;
    let (d, n) = x.shape();
    let centered = x.sub_row_offsets(&x.row_means());
    let mut dev = centered.clone();
    for (i, &l) in labels.labels().iter().enumerate() {
        for r in 0..d {
            dev[(r, i)] -= means[(r, l)];
        }
    }
    let ce = dev.matmul_t(&dev).scale(1.0 / n as f64);
    let counts = labels.counts();
    let mut weighted = means.clone();
    for k in 0..labels.k() {
        let w = (counts[k] as f64 / n as f64).sqrt();
        for r in 0..d {
            weighted[(r, k)] *= w;
        }
    }
    let ca = weighted.matmul_t(&weighted);
    Ok((ce.symmetrize(), ca.symmetrize()))
}

/// Eigenpairs of `den⁻¹·num` for symmetric `num` and positive definite
/// `den + ridge·I`, through the similar symmetric matrix
/// `den^{-1/2} num den^{-1/2}`. Returned vectors are unit-norm columns.
pub fn generalized_eig(num: &Matrix, den: &Matrix, ridge: f64) -> Result<(Vec<f64>, Matrix)> {
    let w = inv_sqrt(den, ridge)?;
    let s = w.matmul(num).matmul(&w).symmetrize();
    let eig = sym_eig(&s)?;
    let mut h = w.matmul(&eig.vectors);
    for j in 0..h.cols() {
        let col = h.column(j);
        let len = crate::linalg::norm(&col);
        if len > 0.0 {
            h.set_column(j, &col.iter().map(|x| x / len).collect::<Vec<_>>());
        }
        orient_column(&mut h, j);
    }
    Ok((eig.values, h))
}

/// Solves `(C_e + ridge·I)⁻¹ C_a h = λ h`.
pub fn fit_lda(x: &Matrix, labels: &ClusterAssignment, ridge: f64) -> Result<LdaModel> {
    let (ce, ca) = scatter_matrices(x, labels)?;
    let (eigvals, eigvecs) = generalized_eig(&ca, &ce, ridge).map_err(|e| match e {
        Error::SingularCovariance => Error::SingularScatter,
        other => other,
    })?;
    Ok(LdaModel {
        eigvals,
        eigvecs,
        within_scatter: ce,
        between_scatter: ca,
        class_means: class_means(x, labels)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn labeled(d: usize, n: usize, k: usize, seed: u64) -> (Matrix, ClusterAssignment) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
        let means = Matrix::from_fn(d, k, |_, _| rng.random_range(-3.0..3.0));
        let x = Matrix::from_fn(d, n, |r, i| means[(r, labels[i])] + rng.sample::<f64, _>(StandardNormal));
        (x, ClusterAssignment::new(labels, k).unwrap())
    }

    #[test]
    fn single_class_has_no_between_scatter() {
        let (x, _) = labeled(3, 20, 1, 0);
        let (_, ca) = scatter_matrices(&x, &ClusterAssignment::new(vec![0; 20], 1).unwrap()).unwrap();
        assert!(ca.max_abs() < 1e-14);
    }

    #[test]
    fn singleton_classes_have_no_within_scatter() {
        let (x, _) = labeled(3, 6, 2, 1);
        let (ce, _) = scatter_matrices(&x, &ClusterAssignment::new((0..6).collect(), 6).unwrap()).unwrap();
        assert!(ce.max_abs() < 1e-14);
    }

    #[test]
    fn additivity() {
        for seed in 0..10 {
            let (x, l) = labeled(4, 30, 3, seed);
            let (ce, ca) = scatter_matrices(&x, &l).unwrap();
            let xc = x.sub_row_offsets(&x.row_means());
            let c = xc.matmul_t(&xc).scale(1.0 / 30.0);
            assert!(ce.add(&ca).sub(&c).max_abs() < 1e-10);
        }
    }

    #[test]
    fn empty_class_is_rejected() {
        let (x, _) = labeled(2, 4, 2, 0);
        let l = ClusterAssignment::new(vec![0, 0, 2, 2], 3).unwrap();
        assert!(matches!(scatter_matrices(&x, &l), Err(Error::InvalidLabels(_))));
    }

    #[test]
    fn two_classes_along_first_axis() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 5000;
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let x = Matrix::from_fn(3, n, |r, i| {
            let shift = if r == 0 { if labels[i] == 0 { 2.0 } else { -2.0 } } else { 0.0 };
            shift + rng.sample::<f64, _>(StandardNormal)
        });
        let m = fit_lda(&x, &ClusterAssignment::new(labels, 2).unwrap(), 0.0).unwrap();
        assert!(m.eigvecs[(0, 0)].abs() >= 0.99);
    }

    #[test]
    fn rank_bound_and_eigen_residual() {
        let (x, l) = labeled(6, 60, 3, 3);
        let ridge = 1e-4;
        let m = fit_lda(&x, &l, ridge).unwrap();
        assert!(m.eigvals[2..].iter().all(|v| v.abs() <= 1e-8));
        let inv = crate::linalg::inv_psd(&m.within_scatter, ridge).unwrap();
        let a = inv.matmul(&m.between_scatter);
        for j in 0..6 {
            let h = m.eigvecs.column(j);
            let ah = a.matvec(&h);
            for (x, y) in ah.iter().zip(&h) {
                assert!((x - m.eigvals[j] * y).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn two_by_two_closed_form() {
        let x = Matrix::from_rows(&[
            &[1.0, 2.0, 0.5, 1.5, -1.0, -2.0, -0.5, -1.2],
            &[0.3, -0.2, 0.8, 0.1, 0.4, -0.6, 0.2, 0.9],
        ]);
        let l = ClusterAssignment::new(vec![0, 0, 0, 0, 1, 1, 1, 1], 2).unwrap();
        let m = fit_lda(&x, &l, 0.0).unwrap();
        let (ce, ca) = (&m.within_scatter, &m.between_scatter);
        let det = ce[(0, 0)] * ce[(1, 1)] - ce[(0, 1)] * ce[(1, 0)];
        let inv = Matrix::from_rows(&[&[ce[(1, 1)] / det, -ce[(0, 1)] / det], &[-ce[(1, 0)] / det, ce[(0, 0)] / det]]);
        let a = inv.matmul(ca);
        let tr = a.trace();
        let da = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
        let disc = (tr * tr - 4.0 * da).max(0.0).sqrt();
        assert!((m.eigvals[0] - (tr + disc) / 2.0).abs() < 1e-10);
        assert!((m.eigvals[1] - (tr - disc) / 2.0).abs() < 1e-10);
        // Eigenvector of the 2x2 operator: (a01, λ − a00).
        let v = [a[(0, 1)], m.eigvals[0] - a[(0, 0)]];
        let len = (v[0] * v[0] + v[1] * v[1]).sqrt();
        let h = m.eigvecs.column(0);
        assert!((dot(&h, &[v[0] / len, v[1] / len]).abs() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn rayleigh_quotient_and_linear_invariance() {
        let (x, l) = labeled(4, 80, 3, 5);
        let m = fit_lda(&x, &l, 0.0).unwrap();
        let h = m.eigvecs.column(0);
        let q = dot(&h, &m.between_scatter.matvec(&h)) / dot(&h, &m.within_scatter.matvec(&h));
        assert!((q - m.eigvals[0]).abs() < 1e-8);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let t = Matrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0)).add_diag(2.0);
        let mt = fit_lda(&t.matmul(&x), &l, 0.0).unwrap();
        for (a, b) in m.eigvals.iter().zip(&mt.eigvals) {
            assert!((a - b).abs() < 1e-6 * a.abs().max(1.0));
        }
    }

    #[test]
    fn total_covariance_form_has_shrunk_spectrum() {
        // C⁻¹C_a shares eigenvectors with C_e⁻¹C_a, with λ* = λ/(1+λ).
        let (x, l) = labeled(4, 90, 3, 7);
        let m = fit_lda(&x, &l, 0.0).unwrap();
        let c = m.within_scatter.add(&m.between_scatter);
        let (vals, vecs) = generalized_eig(&m.between_scatter, &c, 0.0).unwrap();
        for j in 0..2 {
            assert!((vals[j] - m.eigvals[j] / (1.0 + m.eigvals[j])).abs() < 1e-10);
            assert!((dot(&vecs.column(j), &m.eigvecs.column(j)).abs() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn singular_within_scatter_without_ridge() {
        let x = Matrix::from_rows(&[&[1.0, 1.0, -1.0, -1.0], &[2.0, 2.0, -2.0, -2.0]]);
        let l = ClusterAssignment::new(vec![0, 0, 1, 1], 2).unwrap();
        assert!(matches!(fit_lda(&x, &l, 0.0), Err(Error::SingularScatter)));
    }
}
