//! Forward pass, softmax, cross-entropy, and dataset evaluation.

use rayon::prelude::*;

use crate::data::Frame;
use crate::error::{Error, Result};
use crate::nn::matrix::Matrix;
use crate::nn::params::ModelParams;

/// Probabilities below this are clamped before taking logs so a confidently
/// wrong prediction yields a large finite loss instead of infinity.
pub const LOG_CLAMP: f64 = 1e-12;

/// Frames evaluated per parallel work item. Fixed independently of thread
/// count so the chunk-ordered loss reduction is bit-identical no matter how
/// many workers participate.
const EVAL_CHUNK: usize = 256;

/// Intermediate activations retained for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// The batch that produced these activations, `batch x input`.
    pub inputs: Matrix,
    /// Hidden pre-activations, `batch x hidden`.
    pub hidden_pre: Matrix,
    /// Hidden post-ReLU activations, `batch x hidden`.
    pub hidden_post: Matrix,
    /// Softmax class probabilities, `batch x output`.
    pub probs: Matrix,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.inputs.rows()
    }
}

/// Aggregate loss/accuracy over a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalMetrics {
    /// Mean cross-entropy over all frames.
    pub loss: f64,
    /// Fraction of frames whose argmax class matches the label.
    pub accuracy: f64,
}

/// Row-wise softmax with max-subtraction for numerical stability.
///
/// Fails with [`Error::InvalidValue`] if any logit is non-finite, since the
/// result would silently propagate NaNs into the loss.
pub fn softmax_rows(logits: &Matrix) -> Result<Matrix> {
    let mut probs = Matrix::zeros(logits.rows(), logits.cols());
    for r in 0..logits.rows() {
        let row = logits.row(r);
        let out = probs.row_mut(r);
        let mut max = f32::NEG_INFINITY;
        for &v in row {
            if !v.is_finite() {
                return Err(Error::InvalidValue(format!(
                    "non-finite logit {v} in softmax row {r}"
                )));
            }
            if v > max {
                max = v;
            }
        }
        let mut sum = 0.0f32;
        for (o, &v) in out.iter_mut().zip(row) {
            let e = (v - max).exp();
            *o = e;
            sum += e;
        }
        // sum >= exp(0) = 1 because the max logit contributes 1 exactly.
        for o in out.iter_mut() {
            *o /= sum;
        }
    }
    Ok(probs)
}

/// Runs the two-layer network on a batch: `x.W1 + b1 -> ReLU -> .W2 + b2 ->
/// softmax`. `x` is `batch x input`, row-major.
pub fn forward(params: &ModelParams, x: &Matrix) -> Result<ForwardCache> {
    let d = params.dims();
    if x.cols() != d.input {
        return Err(Error::ShapeMismatch(format!(
            "input has {} features, model expects {}",
            x.cols(),
            d.input
        )));
    }
    if x.rows() == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if !x.all_finite() {
        return Err(Error::InvalidValue("non-finite feature in batch".into()));
    }

    let batch = x.rows();
    let mut hidden_pre = Matrix::zeros(batch, d.hidden);
    for b in 0..batch {
        let xrow = x.row(b);
        let out = hidden_pre.row_mut(b);
        out.copy_from_slice(params.b1());
        for (k, &xv) in xrow.iter().enumerate() {
            let wrow = params.w1().row(k);
            for (o, &w) in out.iter_mut().zip(wrow) {
                *o += xv * w;
            }
        }
    }

    let mut hidden_post = hidden_pre.clone();
    for v in hidden_post.as_mut_slice() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }

    let mut logits = Matrix::zeros(batch, d.output);
    for b in 0..batch {
        let hrow = hidden_post.row(b);
        let out = logits.row_mut(b);
        out.copy_from_slice(params.b2());
        for (k, &hv) in hrow.iter().enumerate() {
            let wrow = params.w2().row(k);
            for (o, &w) in out.iter_mut().zip(wrow) {
                *o += hv * w;
            }
        }
    }

    let probs = softmax_rows(&logits)?;
    Ok(ForwardCache {
        inputs: x.clone(),
        hidden_pre,
        hidden_post,
        probs,
    })
}

/// Mean categorical cross-entropy of `probs` against integer `labels`,
/// accumulated in f64.
pub fn cross_entropy_loss(probs: &Matrix, labels: &[u8]) -> Result<f64> {
    if probs.rows() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} probability rows vs {} labels",
            probs.rows(),
            labels.len()
        )));
    }
    if probs.rows() == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let mut sum = 0.0f64;
    for (r, &label) in labels.iter().enumerate() {
        if usize::from(label) >= probs.cols() {
            return Err(Error::InvalidArgument(format!(
                "label {label} out of range for {} classes",
                probs.cols()
            )));
        }
        let p = f64::from(probs.get(r, usize::from(label))).max(LOG_CLAMP);
        sum -= p.ln();
    }
    Ok(sum / probs.rows() as f64)
}

/// Index of the largest value, preferring the lowest index on ties.
pub fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    let mut best_v = row[0];
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Computes mean loss and accuracy of `params` over `frames`.
///
/// Frames are processed in fixed-size chunks whose partial sums are reduced
/// in chunk order, so the result is bit-identical regardless of how many
/// Rayon workers are available.
pub fn evaluate(params: &ModelParams, frames: &[Frame]) -> Result<EvalMetrics> {
    if frames.is_empty() {
        return Err(Error::InvalidArgument("cannot evaluate on zero frames".into()));
    }
    let d = params.dims();
    let partials: Vec<Result<(f64, usize)>> = frames
        .par_chunks(EVAL_CHUNK)
        .map(|chunk| {
            let (x, labels) = batch_from_frames(chunk, d.input)?;
            let cache = forward(params, &x)?;
            let mut loss_sum = 0.0f64;
            let mut correct = 0usize;
            for (r, &label) in labels.iter().enumerate() {
                if usize::from(label) >= d.output {
                    return Err(Error::InvalidArgument(format!(
                        "label {label} out of range for {} classes",
                        d.output
                    )));
                }
                let p = f64::from(cache.probs.get(r, usize::from(label))).max(LOG_CLAMP);
                loss_sum -= p.ln();
                if argmax(cache.probs.row(r)) == usize::from(label) {
                    correct += 1;
                }
            }
            Ok((loss_sum, correct))
        })
        .collect();

    let mut loss_sum = 0.0f64;
    let mut correct = 0usize;
    for partial in partials {
        let (l, c) = partial?;
        loss_sum += l;
        correct += c;
    }
    let n = frames.len() as f64;
    Ok(EvalMetrics {
        loss: loss_sum / n,
        accuracy: correct as f64 / n,
    })
}

/// Packs frames into a `len x dim` feature matrix plus labels.
pub(crate) fn batch_from_frames(frames: &[Frame], dim: usize) -> Result<(Matrix, Vec<u8>)> {
    let mut x = Matrix::zeros(frames.len(), dim);
    let mut labels = Vec::with_capacity(frames.len());
    for (r, frame) in frames.iter().enumerate() {
        if frame.features.len() != dim {
            return Err(Error::ShapeMismatch(format!(
                "frame has {} features, expected {dim}",
                frame.features.len()
            )));
        }
        x.row_mut(r).copy_from_slice(&frame.features);
        labels.push(frame.label);
    }
    Ok((x, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::{init_params, Dims, ModelParams};

    fn uniform_ce() -> f64 {
        (8.0f64).ln()
    }

    #[test]
    fn softmax_matches_independent_exp_normalize() {
        let logits = Matrix::from_vec(1, 3, vec![1.0, 2.0, 3.0]);
        let probs = softmax_rows(&logits).unwrap();
        // Independent computation without max-subtraction.
        let exps: Vec<f64> = [1.0f64, 2.0, 3.0].iter().map(|v| v.exp()).collect();
        let sum: f64 = exps.iter().sum();
        for (i, e) in exps.iter().enumerate() {
            let expected = e / sum;
            assert!(
                (f64::from(probs.get(0, i)) - expected).abs() < 1e-6,
                "class {i}: {} vs {expected}",
                probs.get(0, i)
            );
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let logits = Matrix::from_vec(2, 4, vec![0.1, -3.0, 2.5, 0.0, 9.0, 9.0, 9.0, 9.0]);
        let probs = softmax_rows(&logits).unwrap();
        for r in 0..2 {
            let s: f32 = probs.row(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn softmax_is_stable_for_large_logits() {
        let logits = Matrix::from_vec(1, 2, vec![1000.0, 1001.0]);
        let probs = softmax_rows(&logits).unwrap();
        // Shift-invariant: must equal softmax(0, 1).
        let small = softmax_rows(&Matrix::from_vec(1, 2, vec![0.0, 1.0])).unwrap();
        assert!((probs.get(0, 0) - small.get(0, 0)).abs() < 1e-7);
        assert!(probs.as_slice().iter().all(|p| p.is_finite()));
    }

    #[test]
    fn softmax_rejects_non_finite_logits() {
        let logits = Matrix::from_vec(1, 2, vec![f32::NAN, 0.0]);
        assert!(matches!(
            softmax_rows(&logits),
            Err(Error::InvalidValue(_))
        ));
        let logits = Matrix::from_vec(1, 2, vec![f32::INFINITY, 0.0]);
        assert!(softmax_rows(&logits).is_err());
    }

    #[test]
    fn uniform_probs_give_log_k_loss() {
        let probs = Matrix::from_vec(2, 8, vec![0.125; 16]);
        let loss = cross_entropy_loss(&probs, &[3, 7]).unwrap();
        assert!((loss - uniform_ce()).abs() < 1e-6, "{loss}");
    }

    #[test]
    fn zero_probability_is_clamped() {
        let mut probs = Matrix::zeros(1, 2);
        probs.set(0, 1, 1.0);
        let loss = cross_entropy_loss(&probs, &[0]).unwrap();
        assert!((loss - (-LOG_CLAMP.ln())).abs() < 1e-9);
        assert!(loss.is_finite());
    }

    #[test]
    fn cross_entropy_rejects_bad_label() {
        let probs = Matrix::from_vec(1, 2, vec![0.5, 0.5]);
        assert!(cross_entropy_loss(&probs, &[2]).is_err());
    }

    #[test]
    fn zero_params_give_uniform_probs() {
        let params = ModelParams::zeros(Dims::new(4, 3, 8)).unwrap();
        let x = Matrix::from_vec(2, 4, vec![1.0, -2.0, 0.5, 3.0, 0.0, 0.0, 1.0, 1.0]);
        let cache = forward(&params, &x).unwrap();
        for r in 0..2 {
            for c in 0..8 {
                assert!((cache.probs.get(r, c) - 0.125).abs() < 1e-7);
            }
        }
        let loss = cross_entropy_loss(&cache.probs, &[0, 5]).unwrap();
        assert!((loss - uniform_ce()).abs() < 1e-6);
    }

    #[test]
    fn relu_masks_negative_preactivations() {
        // One input, one hidden unit with weight -1: positive input drives the
        // pre-activation negative, so the hidden output must be exactly zero.
        let params =
            ModelParams::from_tensors(vec![-1.0], vec![0.0], vec![1.0, 0.0], vec![0.0, 0.0])
                .unwrap();
        let x = Matrix::from_vec(1, 1, vec![2.0]);
        let cache = forward(&params, &x).unwrap();
        assert_eq!(cache.hidden_pre.get(0, 0), -2.0);
        assert_eq!(cache.hidden_post.get(0, 0), 0.0);
        // With the hidden unit dead, logits are the (zero) biases.
        assert!((cache.probs.get(0, 0) - 0.5).abs() < 1e-7);
    }

    #[test]
    fn forward_rejects_shape_and_value_errors() {
        let params = ModelParams::zeros(Dims::new(4, 3, 2)).unwrap();
        let wrong = Matrix::zeros(1, 5);
        assert!(matches!(
            forward(&params, &wrong),
            Err(Error::ShapeMismatch(_))
        ));
        let nan = Matrix::from_vec(1, 4, vec![0.0, f32::NAN, 0.0, 0.0]);
        assert!(matches!(forward(&params, &nan), Err(Error::InvalidValue(_))));
    }

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[5.0, 5.0]), 0);
        assert_eq!(argmax(&[-1.0, -2.0]), 0);
    }

    #[test]
    fn evaluate_matches_single_batch_reference() {
        let dims = Dims::new(16, 6, 8);
        let params = init_params(11, dims).unwrap();
        let mut rng = crate::rng::seeded_rng(99);
        use rand::Rng;
        let frames: Vec<Frame> = (0..600)
            .map(|_| Frame {
                features: (0..16).map(|_| rng.random_range(-1.0..1.0)).collect(),
                label: rng.random_range(0..8u8),
            })
            .collect();

        let metrics = evaluate(&params, &frames).unwrap();

        // Unchunked reference.
        let (x, labels) = batch_from_frames(&frames, 16).unwrap();
        let cache = forward(&params, &x).unwrap();
        let ref_loss = cross_entropy_loss(&cache.probs, &labels).unwrap();
        let ref_correct = labels
            .iter()
            .enumerate()
            .filter(|(r, &l)| argmax(cache.probs.row(*r)) == usize::from(l))
            .count();

        assert!((metrics.loss - ref_loss).abs() < 1e-12 * ref_loss.abs().max(1.0));
        assert_eq!(metrics.accuracy, ref_correct as f64 / 600.0);
    }

    #[test]
    fn evaluate_is_bit_deterministic() {
        let params = init_params(4, Dims::new(8, 4, 8)).unwrap();
        let frames: Vec<Frame> = (0..300)
            .map(|i| Frame {
                features: (0..8).map(|j| ((i * 8 + j) as f32).sin()).collect(),
                label: (i % 8) as u8,
            })
            .collect();
        let a = evaluate(&params, &frames).unwrap();
        let b = evaluate(&params, &frames).unwrap();
        assert_eq!(a.loss.to_bits(), b.loss.to_bits());
        assert_eq!(a.accuracy.to_bits(), b.accuracy.to_bits());
    }
}
