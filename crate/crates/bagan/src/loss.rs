//! Training losses. The cross-entropy variants fuse with their final
//! activation: their gradients are taken w.r.t. the pre-activation logits
//! (`p − target`), which avoids log(0) and cancels the softmax Jacobian.
//! Feed those gradients to [`crate::network::Network::backward_fused`].

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Floor applied to probabilities inside logarithms.
pub const PROB_CLAMP: f64 = 1e-12;

/// Mean squared error over all elements, with its gradient
/// `2(pred − target)/numel`.
pub fn l2_loss<S: Scalar>(pred: &Tensor<S>, target: &Tensor<S>) -> Result<(S, Tensor<S>)> {
    if pred.shape() != target.shape() {
        return Err(Error::ShapeMismatch(format!(
            "l2_loss shapes {:?} vs {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let n = S::from_f64c(pred.numel() as f64);
    let mut grad = vec![S::zero(); pred.numel()];
    let mut loss = S::zero();
    let two = S::from_f64c(2.0);
    for ((g, p), t) in grad.iter_mut().zip(pred.data()).zip(target.data()) {
        let d = *p - *t;
        loss += d * d;
        *g = two * d / n;
    }
    loss = loss / n;
    if !loss.is_finite() {
        return Err(Error::NonFinite("l2 loss".to_string()));
    }
    Ok((loss, Tensor::from_vec(pred.shape(), grad)?))
}

/// Result of a fused cross-entropy evaluation.
pub struct CrossEntropyOut<S: Scalar = f32> {
    /// Mean loss over the batch.
    pub loss: S,
    /// Gradient w.r.t. the pre-softmax (or pre-sigmoid) logits.
    pub dlogits: Tensor<S>,
    /// How many probabilities hit the [`PROB_CLAMP`] floor inside a log.
    pub clamped: usize,
}

/// Sparse categorical cross-entropy over softmax probabilities `[N, K]`
/// against integer labels. Loss is `−log p[label]` averaged over the batch;
/// the fused gradient w.r.t. logits is `(p − one_hot(label))/N`.
pub fn sparse_categorical_cross_entropy<S: Scalar>(
    probs: &Tensor<S>,
    labels: &[usize],
) -> Result<CrossEntropyOut<S>> {
    if probs.shape().len() != 2 || probs.shape()[0] != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "probabilities {:?} vs {} labels",
            probs.shape(),
            labels.len()
        )));
    }
    let (n, k) = (probs.shape()[0], probs.shape()[1]);
    let tol = S::from_f64c(1e-5);
    let clamp = S::from_f64c(PROB_CLAMP);
    let inv_n = S::one() / S::from_f64c(n as f64);
    let mut dlogits = probs.data().to_vec();
    let mut loss = S::zero();
    let mut clamped = 0usize;
    for (row, &label) in (0..n).zip(labels) {
        if label >= k {
            return Err(Error::InvalidArgument(format!(
                "label {label} out of range for {k} classes"
            )));
        }
        let r = &mut dlogits[row * k..(row + 1) * k];
        let sum = r.iter().fold(S::zero(), |a, v| a + *v);
        if (sum - S::one()).abs() > tol {
            return Err(Error::InvalidArgument(format!(
                "probabilities in row {row} sum to {sum}, not 1"
            )));
        }
        let mut p = r[label];
        if p < clamp {
            p = clamp;
            clamped += 1;
        }
        loss -= p.ln();
        r[label] -= S::one();
        for v in r.iter_mut() {
            *v *= inv_n;
        }
    }
    loss = loss * inv_n;
    if !loss.is_finite() {
        return Err(Error::NonFinite("cross-entropy loss".to_string()));
    }
    Ok(CrossEntropyOut { loss, dlogits: Tensor::from_vec(&[n, k], dlogits)?, clamped })
}

/// Binary cross-entropy over sigmoid probabilities `[N, 1]` against 0/1
/// targets, fused: gradient w.r.t. logits is `(p − t)/N`.
pub fn binary_cross_entropy<S: Scalar>(
    probs: &Tensor<S>,
    targets: &[S],
) -> Result<CrossEntropyOut<S>> {
    let n = targets.len();
    if probs.numel() != n {
        return Err(Error::ShapeMismatch(format!(
            "probabilities {:?} vs {} targets",
            probs.shape(),
            n
        )));
    }
    let clamp = S::from_f64c(PROB_CLAMP);
    let one = S::one();
    let inv_n = S::one() / S::from_f64c(n as f64);
    let mut dlogits = vec![S::zero(); n];
    let mut loss = S::zero();
    let mut clamped = 0usize;
    for ((g, p), t) in dlogits.iter_mut().zip(probs.data()).zip(targets) {
        let mut pc = *p;
        if pc < clamp {
            pc = clamp;
            clamped += 1;
        }
        if one - pc < clamp {
            pc = one - clamp;
            clamped += 1;
        }
        loss -= *t * pc.ln() + (one - *t) * (one - pc).ln();
        *g = (*p - *t) * inv_n;
    }
    loss = loss * inv_n;
    if !loss.is_finite() {
        return Err(Error::NonFinite("binary cross-entropy loss".to_string()));
    }
    Ok(CrossEntropyOut { loss, dlogits: Tensor::from_vec(probs.shape(), dlogits)?, clamped })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l2_of_identical_tensors_is_zero() {
        let a = Tensor::<f64>::full(&[2, 3], 0.4);
        let (loss, grad) = l2_loss(&a, &a).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn l2_of_unit_offset_is_one() {
        let a = Tensor::<f64>::full(&[2, 3], 1.5);
        let b = Tensor::<f64>::full(&[2, 3], 0.5);
        let (loss, _) = l2_loss(&a, &b).unwrap();
        assert!((loss - 1.0).abs() < 1e-12);
    }

    #[test]
    fn l2_matches_scalar_loop_oracle() {
        let a = Tensor::<f64>::from_vec(&[4], vec![0.1, -0.7, 2.0, 0.3]).unwrap();
        let b = Tensor::<f64>::from_vec(&[4], vec![-0.2, 0.4, 1.0, 0.25]).unwrap();
        let (loss, grad) = l2_loss(&a, &b).unwrap();
        let mut expect = 0.0;
        for i in 0..4 {
            let d = a.data()[i] - b.data()[i];
            expect += d * d;
            assert!((grad.data()[i] - 2.0 * d / 4.0).abs() < 1e-12);
        }
        assert!((loss - expect / 4.0).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_of_one_hot_at_target_is_zero() {
        let p = Tensor::<f64>::from_vec(&[1, 3], vec![0.0, 1.0, 0.0]).unwrap();
        let out = sparse_categorical_cross_entropy(&p, &[1]).unwrap();
        assert_eq!(out.loss, 0.0);
    }

    #[test]
    fn cross_entropy_of_uniform_over_eleven_labels_is_ln_eleven() {
        let p = Tensor::<f64>::full(&[2, 11], 1.0 / 11.0);
        let out = sparse_categorical_cross_entropy(&p, &[0, 7]).unwrap();
        assert!((out.loss - 11.0f64.ln()).abs() < 1e-9, "loss {}", out.loss);
    }

    #[test]
    fn cross_entropy_gradient_is_probability_minus_one_hot() {
        let p = Tensor::<f64>::from_vec(&[1, 3], vec![0.2, 0.5, 0.3]).unwrap();
        let out = sparse_categorical_cross_entropy(&p, &[2]).unwrap();
        let g = out.dlogits.data();
        assert!((g[0] - 0.2).abs() < 1e-12);
        assert!((g[1] - 0.5).abs() < 1e-12);
        assert!((g[2] - (0.3 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_rejects_bad_rows_and_labels() {
        let p = Tensor::<f64>::from_vec(&[1, 3], vec![0.5, 0.2, 0.2]).unwrap();
        assert!(sparse_categorical_cross_entropy(&p, &[0]).is_err(), "non-normalized row");
        let p = Tensor::<f64>::from_vec(&[1, 3], vec![0.3, 0.4, 0.3]).unwrap();
        assert!(sparse_categorical_cross_entropy(&p, &[3]).is_err(), "label out of range");
    }

    #[test]
    fn cross_entropy_clamps_zero_probability_and_reports_it() {
        let p = Tensor::<f64>::from_vec(&[1, 2], vec![0.0, 1.0]).unwrap();
        let out = sparse_categorical_cross_entropy(&p, &[0]).unwrap();
        assert_eq!(out.clamped, 1);
        assert!(out.loss.is_finite());
    }

    #[test]
    fn binary_cross_entropy_gradient_is_p_minus_t_over_n() {
        let p = Tensor::<f64>::from_vec(&[2, 1], vec![0.8, 0.3]).unwrap();
        let out = binary_cross_entropy(&p, &[1.0, 0.0]).unwrap();
        assert!((out.dlogits.data()[0] - (0.8 - 1.0) / 2.0).abs() < 1e-12);
        assert!((out.dlogits.data()[1] - 0.3 / 2.0).abs() < 1e-12);
        let expect = -(0.8f64.ln() + 0.7f64.ln()) / 2.0;
        assert!((out.loss - expect).abs() < 1e-12);
    }

    #[test]
    fn fused_cross_entropy_gradient_matches_finite_differences_through_softmax() {
        // Perturb logits directly: d(−ln softmax(z)[t])/dz must equal p − onehot.
        let logits = [0.3f64, -1.1, 0.8, 0.05];
        let t = 2usize;
        let softmax = |z: &[f64]| {
            let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|v| v / s).collect::<Vec<_>>()
        };
        let p = Tensor::from_vec(&[1, 4], softmax(&logits)).unwrap();
        let out = sparse_categorical_cross_entropy(&p, &[t]).unwrap();
        let h = 1e-6;
        for i in 0..4 {
            let mut zp = logits;
            zp[i] += h;
            let mut zm = logits;
            zm[i] -= h;
            let lp = -softmax(&zp)[t].ln();
            let lm = -softmax(&zm)[t].ln();
            let numeric = (lp - lm) / (2.0 * h);
            let analytic = out.dlogits.data()[i];
            assert!((numeric - analytic).abs() < 1e-8, "coord {i}: {numeric} vs {analytic}");
        }
    }
}
