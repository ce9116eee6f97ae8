//! Linear canonical correlation analysis and the trace-form correlation loss.
//!
//! Covariances use the `1/(N−1)` divisor. The problem is solved through the
//! whitened cross-covariance `T = C₁^{-1/2} C₁₂ C₂^{-1/2}`, whose singular
//! values are the canonical correlations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{center, covariance, dot, inv_psd, inv_sqrt, orthonormal_basis, sym_eig, Divisor, Matrix};

pub const DEFAULT_RIDGE: f64 = 1e-4;

/// Fitted canonical directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcaModel {
    /// `dim × D₁`; row `i` is the canonical vector `aᵢᵀ`.
    pub proj_a: Matrix,
    /// `dim × D₂`; row `i` is `bᵢᵀ`.
    pub proj_b: Matrix,
    /// Descending, in `[0, 1]` up to rounding.
    pub correlations: Vec<f64>,
    pub ridge: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    First,
    Second,
}

impl CcaModel {
    pub fn dim(&self) -> usize {
        self.correlations.len()
    }

    pub fn projection(&self, side: Side) -> &Matrix {
        match side {
            Side::First => &self.proj_a,
            Side::Second => &self.proj_b,
        }
    }
}

/// Fits `dim` canonical pairs between `x1` (`D₁ × N`) and `x2` (`D₂ × N`).
///
/// Each canonical variate is scaled to unit sample variance and each `aᵢ` is
/// oriented so its largest-magnitude entry is positive (`bᵢ` follows).
pub fn fit_cca(x1: &Matrix, x2: &Matrix, dim: usize, ridge: f64) -> Result<CcaModel> {
    let (d1, d2) = (x1.rows(), x2.rows());
    if x1.cols() != x2.cols() {
        return Err(Error::shape(format!(
            "views have {} and {} samples",
            x1.cols(),
            x2.cols()
        )));
    }
    if dim == 0 || dim > d1.min(d2) {
        return Err(Error::shape(format!("cca dim {dim} outside 1..={}", d1.min(d2))));
    }
    if x1.cols() < 2 {
        return Err(Error::shape("cca needs at least two samples"));
    }
    let a = center(x1)?;
    let b = center(x2)?;
    let c11 = covariance(&a, &a, Divisor::Unbiased)?;
    let c22 = covariance(&b, &b, Divisor::Unbiased)?;
    let c12 = covariance(&a, &b, Divisor::Unbiased)?;
    let w1 = inv_sqrt(&c11, ridge)?;
    let w2 = inv_sqrt(&c22, ridge)?;
    let t = w1.matmul(&c12).matmul(&w2);

    let left = sym_eig(&t.matmul_t(&t).symmetrize())?;

    // σᵢ = ‖Tᵀuᵢ‖ keeps small singular values accurate (the square root of a
    // roundoff-level eigenvalue would not). Right vectors vᵢ = Tᵀuᵢ/σᵢ where
    // σᵢ is resolvable, otherwise completed from the eigenvectors of TᵀT
    // orthogonal to those already found.
    let mut us = Vec::with_capacity(dim);
    let mut sigmas = Vec::with_capacity(dim);
    let mut vs: Vec<Option<Vec<f64>>> = Vec::with_capacity(dim);
    for i in 0..dim {
        let u = left.vector(i);
        let tu = t.t_matmul(&Matrix::from_columns(std::slice::from_ref(&u))?).column(0);
        let s = crate::linalg::norm(&tu);
        if s > 1e-10 {
            vs.push(Some(tu.iter().map(|x| x / s).collect()));
        } else {
            vs.push(None);
        }
        sigmas.push(s);
        us.push(u);
    }
    if vs.iter().any(Option::is_none) {
        let right = sym_eig(&t.t_matmul(&t).symmetrize())?;
        let mut found: Vec<Vec<f64>> = vs.iter().flatten().cloned().collect();
        for slot in vs.iter_mut().filter(|s| s.is_none()) {
            let candidates: Vec<Vec<f64>> = (0..d2).map(|j| right.vector(j)).collect();
            let mut basis = found.clone();
            basis.extend(candidates);
            let q = orthonormal_basis(&Matrix::from_columns(&basis)?);
            let next = q.column(found.len());
            found.push(next.clone());
            *slot = Some(next);
        }
    }

    let mut proj_a = Matrix::zeros(dim, d1);
    let mut proj_b = Matrix::zeros(dim, d2);
    for i in 0..dim {
        let mut av = w1.matvec(&us[i]);
        let mut bv = w2.matvec(vs[i].as_ref().expect("filled above"));
        let va = dot(&av, &c11.matvec(&av)).sqrt();
        let vb = dot(&bv, &c22.matvec(&bv)).sqrt();
        let sign = match av.iter().copied().reduce(|m, x| if x.abs() > m.abs() + 1e-12 { x } else { m }) {
            Some(m) if m < 0.0 => -1.0,
            _ => 1.0,
        };
        for x in &mut av {
            *x *= sign / va.max(f64::MIN_POSITIVE);
        }
        for x in &mut bv {
            *x *= sign / vb.max(f64::MIN_POSITIVE);
        }
        proj_a.row_mut(i).copy_from_slice(&av);
        proj_b.row_mut(i).copy_from_slice(&bv);
    }
    Ok(CcaModel {
        proj_a,
        proj_b,
        correlations: sigmas,
        ridge,
    })
}

/// Canonical variates of `x` (`dim × N`): the projection of `x` centered by
/// its own sample mean.
pub fn transform(model: &CcaModel, x: &Matrix, side: Side) -> Result<Matrix> {
    let proj = model.projection(side);
    if x.rows() != proj.cols() {
        return Err(Error::shape(format!(
            "expected {} features, got {}",
            proj.cols(),
            x.rows()
        )));
    }
    Ok(proj.matmul(&center(x)?))
}

struct LossParts {
    loss: f64,
    hv: Matrix,
    hw: Matrix,
    inv_v: Matrix,
    inv_w: Matrix,
    cvw: Matrix,
}

fn loss_parts(hv: &Matrix, hw: &Matrix, ridge: f64) -> Result<LossParts> {
    if hv.cols() != hw.cols() {
        return Err(Error::shape(format!(
            "embeddings have {} and {} samples",
            hv.cols(),
            hw.cols()
        )));
    }
    if hv.cols() <= 1 {
        return Err(Error::shape("correlation loss needs at least two samples"));
    }
    let hv = center(hv)?;
    let hw = center(hw)?;
    let cv = covariance(&hv, &hv, Divisor::Unbiased)?;
    let cw = covariance(&hw, &hw, Divisor::Unbiased)?;
    let cvw = covariance(&hv, &hw, Divisor::Unbiased)?;
    let inv_v = inv_psd(&cv, ridge)?;
    let inv_w = inv_psd(&cw, ridge)?;
    let loss = -inv_v.matmul(&cvw).matmul(&inv_w).frobenius_dot(&cvw);
    Ok(LossParts {
        loss,
        hv,
        hw,
        inv_v,
        inv_w,
        cvw,
    })
}

/// `−tr(C_v⁻¹ C_vw C_w⁻¹ C_wv)` with `C_v + ridge·I` and `C_w + ridge·I`
/// inverted. Equals minus the sum of squared canonical correlations.
pub fn correlation_loss(hv: &Matrix, hw: &Matrix, ridge: f64) -> Result<f64> {
    Ok(loss_parts(hv, hw, ridge)?.loss)
}

/// Loss value and its gradients with respect to `hv` and `hw`, including the
/// effect of within-batch centering.
pub fn correlation_loss_gradient(hv: &Matrix, hw: &Matrix, ridge: f64) -> Result<(f64, Matrix, Matrix)> {
    let p = loss_parts(hv, hw, ridge)?;
    let m = (hv.cols() - 1) as f64;
    // M = C_v⁻¹ C_vw C_w⁻¹, G_v = M C_wv C_v⁻¹, G_w = C_w⁻¹ C_wv M.
    let mm = p.inv_v.matmul(&p.cvw).matmul(&p.inv_w);
    let gv = mm.matmul_t(&p.cvw).matmul(&p.inv_v);
    let gw = p.inv_w.matmul(&p.cvw.t_matmul(&mm));
    let dv = gv.matmul(&p.hv).sub(&mm.matmul(&p.hw)).scale(2.0 / m);
    let dw = gw.matmul(&p.hw).sub(&mm.t_matmul(&p.hv)).scale(2.0 / m);
    let dv = dv.sub_row_offsets(&dv.row_means());
    let dw = dw.sub_row_offsets(&dw.row_means());
    Ok((p.loss, dv, dw))
}

/// Sum of [`correlation_loss_gradient`] over all unordered view pairs, in
/// pair order `(0,1), (0,2), …, (1,2), …`.
pub fn pairwise_loss_gradient(views: &[&Matrix], ridge: f64) -> Result<(f64, Vec<Matrix>)> {
    let mut grads: Vec<Matrix> = views.iter().map(|h| Matrix::zeros(h.rows(), h.cols())).collect();
    let mut total = 0.0;
    for i in 0..views.len() {
        for j in (i + 1)..views.len() {
            let (l, gi, gj) = correlation_loss_gradient(views[i], views[j], ridge)?;
            total += l;
            grads[i].add_assign_scaled(&gi, 1.0);
            grads[j].add_assign_scaled(&gj, 1.0);
        }
    }
    Ok((total, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
    }

    fn correlated_pair(n: usize, seed: u64) -> (Matrix, Matrix) {
        let z = gaussian(2, n, seed);
        let x1 = gaussian(3, 2, seed + 100).matmul(&z).add(&gaussian(3, n, seed + 200).scale(0.5));
        let x2 = gaussian(3, 2, seed + 300).matmul(&z).add(&gaussian(3, n, seed + 400).scale(0.8));
        (x1, x2)
    }

    #[test]
    fn view_with_itself_has_unit_correlations() {
        let x = gaussian(3, 40, 1);
        let m = fit_cca(&x, &x, 3, 0.0).unwrap();
        for r in m.correlations {
            assert!((r - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn independent_views_have_small_correlations() {
        for seed in 0..10 {
            let m = fit_cca(&gaussian(2, 2000, seed), &gaussian(2, 2000, seed + 50), 2, DEFAULT_RIDGE).unwrap();
            assert!(m.correlations.iter().all(|&r| r <= 0.15), "{:?}", m.correlations);
        }
    }

    #[test]
    fn two_by_two_matches_characteristic_polynomial() {
        let (x1, x2) = correlated_pair(50, 3);
        let (x1, x2) = (x1.top_rows(2), x2.top_rows(2));
        let m = fit_cca(&x1, &x2, 2, 0.0).unwrap();
        let a = center(&x1).unwrap();
        let b = center(&x2).unwrap();
        let c11 = covariance(&a, &a, Divisor::Unbiased).unwrap();
        let c22 = covariance(&b, &b, Divisor::Unbiased).unwrap();
        let c12 = covariance(&a, &b, Divisor::Unbiased).unwrap();
        let inv2 = |c: &Matrix| {
            let det = c[(0, 0)] * c[(1, 1)] - c[(0, 1)] * c[(1, 0)];
            Matrix::from_rows(&[&[c[(1, 1)] / det, -c[(0, 1)] / det], &[-c[(1, 0)] / det, c[(0, 0)] / det]])
        };
        let k = inv2(&c11).matmul(&c12).matmul(&inv2(&c22)).matmul(&c12.transpose());
        let tr = k.trace();
        let det = k[(0, 0)] * k[(1, 1)] - k[(0, 1)] * k[(1, 0)];
        let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
        let eig = [(tr + disc) / 2.0, (tr - disc) / 2.0];
        for i in 0..2 {
            assert!((m.correlations[i].powi(2) - eig[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn variates_are_unit_variance_with_matching_correlation() {
        let (x1, x2) = correlated_pair(200, 4);
        let m = fit_cca(&x1, &x2, 3, 0.0).unwrap();
        let u = transform(&m, &x1, Side::First).unwrap();
        let v = transform(&m, &x2, Side::Second).unwrap();
        let cuv = covariance(&u, &v, Divisor::Unbiased).unwrap();
        let cuu = covariance(&u, &u, Divisor::Unbiased).unwrap();
        let cvv = covariance(&v, &v, Divisor::Unbiased).unwrap();
        for i in 0..3 {
            assert!((cuu[(i, i)] - 1.0).abs() < 1e-6);
            assert!((cvv[(i, i)] - 1.0).abs() < 1e-6);
            assert!((cuv[(i, i)] - m.correlations[i]).abs() < 1e-6);
            for j in 0..3 {
                if i != j {
                    assert!(cuv[(i, j)].abs() < 1e-6);
                }
            }
        }
        assert!(m.correlations.windows(2).all(|w| w[0] >= w[1]));
        for i in 0..3 {
            let row = m.proj_a.row(i);
            let big = row.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn transform_is_linear_and_zero_preserving() {
        let (x1, x2) = correlated_pair(60, 5);
        let m = fit_cca(&x1, &x2, 2, DEFAULT_RIDGE).unwrap();
        assert_eq!(transform(&m, &Matrix::zeros(3, 7), Side::First).unwrap(), Matrix::zeros(2, 7));
        let t1 = transform(&m, &x1, Side::First).unwrap();
        let t2 = transform(&m, &x1.scale(2.5), Side::First).unwrap();
        assert!(t2.sub(&t1.scale(2.5)).max_abs() < 1e-10);
        assert!(transform(&m, &x1, Side::Second).is_ok());
        assert!(transform(&m, &Matrix::zeros(4, 3), Side::First).is_err());
    }

    #[test]
    fn zero_correlation_pair_is_completed_orthogonally() {
        // Second row of x2 is exactly uncorrelated with x1, so sigma_2 = 0.
        let x1 = center(&gaussian(2, 100, 8)).unwrap();
        let mut r = center(&gaussian(1, 100, 9)).unwrap().row(0).to_vec();
        let q = orthonormal_basis(&x1.transpose());
        for i in 0..q.cols() {
            let qi = q.column(i);
            let p = dot(&r, &qi);
            for (a, b) in r.iter_mut().zip(&qi) {
                *a -= p * b;
            }
        }
        let x2 = Matrix::from_rows(&[x1.row(0), &r]);
        let m = fit_cca(&x1, &x2, 2, 0.0).unwrap();
        assert!((m.correlations[0] - 1.0).abs() < 1e-8);
        assert!(m.correlations[1] < 1e-7);
        let v = transform(&m, &x2, Side::Second).unwrap();
        let c = covariance(&v, &v, Divisor::Unbiased).unwrap();
        assert!(c.sub(&Matrix::identity(2)).max_abs() < 1e-8);
    }

    #[test]
    fn singular_covariance_without_ridge() {
        let x = gaussian(1, 30, 1);
        let dup = Matrix::vcat(&[&x, &x]).unwrap();
        assert!(matches!(fit_cca(&dup, &dup, 1, 0.0), Err(Error::SingularCovariance)));
        assert!(fit_cca(&dup, &dup, 1, DEFAULT_RIDGE).is_ok());
    }

    #[test]
    fn loss_examples() {
        let h = gaussian(3, 30, 1);
        assert!((correlation_loss(&h, &h, 0.0).unwrap() + 3.0).abs() < 1e-8);
        let l = correlation_loss(&gaussian(2, 5000, 2), &gaussian(2, 5000, 3), DEFAULT_RIDGE).unwrap();
        assert!((-0.05..=0.0).contains(&l), "{l}");
        assert!(correlation_loss(&gaussian(2, 1, 0), &gaussian(2, 1, 1), 0.0).is_err());
    }

    #[test]
    fn loss_is_minus_sum_of_squared_correlations() {
        for seed in 0..20 {
            let (x1, x2) = correlated_pair(25, seed);
            let x2 = x2.top_rows(2);
            let m = fit_cca(&x1, &x2, 2, DEFAULT_RIDGE).unwrap();
            let s: f64 = m.correlations.iter().map(|r| r * r).sum();
            let l = correlation_loss(&x1, &x2, DEFAULT_RIDGE).unwrap();
            assert!((l + s).abs() < 1e-8);
            let sym = correlation_loss(&x2, &x1, DEFAULT_RIDGE).unwrap();
            assert!((l - sym).abs() < 1e-8);
        }
    }

    fn finite_difference(hv: &Matrix, hw: &Matrix, ridge: f64, first: bool) -> Matrix {
        let target = if first { hv } else { hw };
        let step = 1e-5;
        Matrix::from_fn(target.rows(), target.cols(), |i, j| {
            let mut plus = target.clone();
            let mut minus = target.clone();
            plus[(i, j)] += step;
            minus[(i, j)] -= step;
            let (lp, lm) = if first {
                (correlation_loss(&plus, hw, ridge).unwrap(), correlation_loss(&minus, hw, ridge).unwrap())
            } else {
                (correlation_loss(hv, &plus, ridge).unwrap(), correlation_loss(hv, &minus, ridge).unwrap())
            };
            (lp - lm) / (2.0 * step)
        })
    }

    fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
        a.sub(b).max_abs() / b.max_abs().max(1e-12)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..5 {
            let hv = gaussian(3, 20, seed);
            let hw = gaussian(3, 3, seed + 7).matmul(&hv).add(&gaussian(3, 20, seed + 9));
            let (_, dv, dw) = correlation_loss_gradient(&hv, &hw, DEFAULT_RIDGE).unwrap();
            assert!(rel_err(&dv, &finite_difference(&hv, &hw, DEFAULT_RIDGE, true)) <= 1e-4);
            assert!(rel_err(&dw, &finite_difference(&hv, &hw, DEFAULT_RIDGE, false)) <= 1e-4);
        }
    }

    #[test]
    fn gradient_vanishes_at_perfect_correlation() {
        let h = gaussian(3, 20, 1);
        let (_, dv, dw) = correlation_loss_gradient(&h, &h, 0.0).unwrap();
        assert!(dv.max_abs() < 1e-6 && dw.max_abs() < 1e-6);
    }

    #[test]
    fn gradient_is_rotation_equivariant() {
        let hv = gaussian(3, 20, 2);
        let hw = gaussian(3, 20, 3).add(&hv);
        let q = orthonormal_basis(&gaussian(3, 3, 4));
        let (l, dv, dw) = correlation_loss_gradient(&hv, &hw, DEFAULT_RIDGE).unwrap();
        let (lq, dvq, dwq) = correlation_loss_gradient(&q.matmul(&hv), &q.matmul(&hw), DEFAULT_RIDGE).unwrap();
        assert!((l - lq).abs() < 1e-10);
        assert!(dvq.sub(&q.matmul(&dv)).max_abs() < 1e-10);
        assert!(dwq.sub(&q.matmul(&dw)).max_abs() < 1e-10);
    }

    #[test]
    fn pairwise_sum_over_three_views() {
        let a = gaussian(2, 15, 1);
        let b = gaussian(2, 15, 2).add(&a);
        let c = gaussian(2, 15, 3).sub(&a);
        let (l, g) = pairwise_loss_gradient(&[&a, &b, &c], DEFAULT_RIDGE).unwrap();
        let (lab, ga, _) = correlation_loss_gradient(&a, &b, DEFAULT_RIDGE).unwrap();
        let (lac, ga2, _) = correlation_loss_gradient(&a, &c, DEFAULT_RIDGE).unwrap();
        let (lbc, _, _) = correlation_loss_gradient(&b, &c, DEFAULT_RIDGE).unwrap();
        assert!((l - (lab + lac + lbc)).abs() < 1e-12);
        assert!(g[0].sub(&ga.add(&ga2)).max_abs() < 1e-12);
    }
}
