//! Cross-entropy, reconstruction error and weighted fusion, each with its
//! gradient. Batches are `features × samples`.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

use super::mlp::{Layer, MlpNetwork};

pub const CE_EPS: f64 = 1e-12;

/// `−(1/n) Σᵢ Σₖ yₖᵢ log(pₖᵢ + ε)` for `K × n` probabilities and targets,
/// with its gradient in `p`.
pub fn cross_entropy(p: &Matrix, y: &Matrix) -> Result<(f64, Matrix)> {
    if p.shape() != y.shape() {
        return Err(Error::shape(format!("predictions {:?} vs targets {:?}", p.shape(), y.shape())));
    }
    let n = p.cols();
    if n == 0 {
        return Ok((0.0, Matrix::zeros(p.rows(), 0)));
    }
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(p.rows(), n);
    for c in 0..n {
        for r in 0..p.rows() {
            let (pv, yv) = (p[(r, c)], y[(r, c)]);
            loss -= yv * (pv + CE_EPS).ln();
            grad[(r, c)] = -yv / (pv + CE_EPS) / n as f64;
        }
    }
    Ok((loss / n as f64, grad))
}

/// Mean of squared entrywise differences, with its gradient in `pred`.
pub fn mse(pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(format!("prediction {:?} vs target {:?}", pred.shape(), target.shape())));
    }
    let count = (pred.rows() * pred.cols()).max(1) as f64;
    let diff = pred.sub(target);
    let loss = diff.data().iter().map(|d| d * d).sum::<f64>() / count;
    Ok((loss, diff.scale(2.0 / count)))
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    /// Mean over views of the per-view [`mse`].
    pub loss: f64,
    pub decoder_grads: Vec<Vec<Layer>>,
    /// `∂loss/∂H^(v)`.
    pub embedding_grads: Vec<Matrix>,
}

/// Decodes each `hs[v]` with `decoders[v]` and compares with `xs[v]`.
pub fn reconstruction_loss(decoders: &[MlpNetwork], xs: &[&Matrix], hs: &[&Matrix]) -> Result<Reconstruction> {
    if decoders.len() != xs.len() || xs.len() != hs.len() || xs.is_empty() {
        return Err(Error::shape(format!(
            "{} decoders, {} inputs, {} embeddings",
            decoders.len(),
            xs.len(),
            hs.len()
        )));
    }
    let scale = 1.0 / xs.len() as f64;
    let mut out = Reconstruction {
        loss: 0.0,
        decoder_grads: Vec::with_capacity(xs.len()),
        embedding_grads: Vec::with_capacity(xs.len()),
    };
    for ((dec, x), h) in decoders.iter().zip(xs).zip(hs) {
        let cache = dec.forward(h)?;
        let (l, g) = mse(&cache.output, x)?;
        let (dg, dh) = dec.backward(&cache, &g.scale(scale))?;
        out.loss += scale * l;
        out.decoder_grads.push(dg);
        out.embedding_grads.push(dh);
    }
    Ok(out)
}

/// `Σ_v w_v H^(v)`.
pub fn fuse(hs: &[&Matrix], weights: &[f64]) -> Result<Matrix> {
    if hs.is_empty() || hs.len() != weights.len() {
        return Err(Error::shape(format!("{} embeddings for {} weights", hs.len(), weights.len())));
    }
    let mut out = Matrix::zeros(hs[0].rows(), hs[0].cols());
    for (h, &w) in hs.iter().zip(weights) {
        if h.shape() != out.shape() {
            return Err(Error::shape(format!("embedding {:?} vs {:?}", h.shape(), out.shape())));
        }
        out.add_assign_scaled(h, w);
    }
    Ok(out)
}

/// Gradients of [`fuse`]: `(w_v·upstream for each v, ⟨upstream, H^(v)⟩ for each v)`.
pub fn fuse_backward(hs: &[&Matrix], weights: &[f64], upstream: &Matrix) -> (Vec<Matrix>, Vec<f64>) {
    let dh = weights.iter().map(|&w| upstream.scale(w)).collect();
    let dw = hs.iter().map(|h| upstream.frobenius_dot(h)).collect();
    (dh, dw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::mlp::Output;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(r: usize, c: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn columns_normalized(m: &Matrix) -> Matrix {
        let m = m.map(f64::abs);
        let s: Vec<f64> = (0..m.cols()).map(|c| m.column(c).iter().sum()).collect();
        Matrix::from_fn(m.rows(), m.cols(), |r, c| m[(r, c)] / s[c])
    }

    #[test]
    fn cross_entropy_examples() {
        let one_hot = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let (l, _) = cross_entropy(&one_hot, &one_hot).unwrap();
        assert!(l.abs() <= 2.0 * CE_EPS);
        let k = 4;
        let uniform = Matrix::from_fn(k, 3, |_, _| 0.25);
        let y = columns_normalized(&random(k, 3, 1));
        let (l, _) = cross_entropy(&uniform, &y).unwrap();
        assert!((l - (k as f64).ln()).abs() < 1e-10);
        assert!(cross_entropy(&uniform, &one_hot).is_err());
    }

    #[test]
    fn cross_entropy_formula_and_gradient() {
        let p = columns_normalized(&random(3, 5, 2));
        let y = columns_normalized(&random(3, 5, 3));
        let (l, g) = cross_entropy(&p, &y).unwrap();
        let mut want = 0.0;
        for c in 0..5 {
            for r in 0..3 {
                want += -y[(r, c)] * (p[(r, c)] + CE_EPS).ln() / 5.0;
            }
        }
        assert!((l - want).abs() < 1e-12);
        let h = 1e-6;
        for i in 0..15 {
            let mut a = p.clone();
            a.data_mut()[i] += h;
            let f1 = cross_entropy(&a, &y).unwrap().0;
            a.data_mut()[i] -= 2.0 * h;
            let f0 = cross_entropy(&a, &y).unwrap().0;
            assert!(((f1 - f0) / (2.0 * h) - g.data()[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn reconstruction_examples() {
        let x = random(3, 6, 4);
        let x = x.sub_row_offsets(&x.row_means());
        let identity = MlpNetwork::from_layers(
            3,
            vec![Layer {
                weight: Matrix::identity(3),
                bias: vec![0.0; 3],
            }],
            Output::Linear,
        )
        .unwrap();
        let r = reconstruction_loss(&[identity], &[&x], &[&x]).unwrap();
        assert_eq!(r.loss, 0.0);
        let zero = MlpNetwork::from_layers(2, vec![Layer::zeros(3, 2)], Output::Linear).unwrap();
        let h = random(2, 6, 5);
        let r = reconstruction_loss(&[zero], &[&x], &[&h]).unwrap();
        let want = x.frobenius_norm().powi(2) / 18.0;
        assert!((r.loss - want).abs() < 1e-14);
    }

    #[test]
    fn reconstruction_matches_direct_formula_over_views() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let decs: Vec<MlpNetwork> = (0..2).map(|_| MlpNetwork::new(&[2, 4, 3], Output::Linear, &mut rng).unwrap()).collect();
        let xs = [random(3, 5, 7), random(3, 5, 8)];
        let hs = [random(2, 5, 9), random(2, 5, 10)];
        let r = reconstruction_loss(&decs, &[&xs[0], &xs[1]], &[&hs[0], &hs[1]]).unwrap();
        let mut want = 0.0;
        for v in 0..2 {
            let d = decs[v].apply(&hs[v]).unwrap().sub(&xs[v]);
            want += d.data().iter().map(|e| e * e).sum::<f64>() / 15.0 / 2.0;
        }
        assert!((r.loss - want).abs() < 1e-12);
    }

    #[test]
    fn fusion_examples_and_weight_gradient() {
        let a = random(2, 4, 11);
        let b = random(2, 4, 12);
        assert_eq!(fuse(&[&a, &b], &[1.0, 0.0]).unwrap(), a);
        assert_eq!(fuse(&[&a, &a], &[0.5, 0.5]).unwrap(), a);
        assert!(fuse(&[&a, &random(3, 4, 0)], &[0.5, 0.5]).is_err());
        let up = random(2, 4, 13);
        let w = [0.3, 0.9];
        let (_, dw) = fuse_backward(&[&a, &b], &w, &up);
        let h = 1e-6;
        for v in 0..2 {
            let mut wp = w;
            wp[v] += h;
            let f1 = fuse(&[&a, &b], &wp).unwrap().frobenius_dot(&up);
            wp[v] -= 2.0 * h;
            let f0 = fuse(&[&a, &b], &wp).unwrap().frobenius_dot(&up);
            assert!(((f1 - f0) / (2.0 * h) - dw[v]).abs() < 1e-8);
        }
    }
}
