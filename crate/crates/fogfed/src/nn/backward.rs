//! Hand-derived backpropagation for the fixed two-layer architecture.
//!
//! For mean cross-entropy over a batch of size `B` with softmax outputs, the
//! output-layer delta is `(probs - onehot(labels)) / B`; from there the
//! standard dense-layer chain rule applies, with the ReLU subgradient taken
//! as 0 at exactly 0. Per-sample contributions are accumulated in f64 and
//! cast to f32 once at the end, so reorderings that are exact in real
//! arithmetic (such as duplicating every sample) stay far inside the 1e-9
//! tolerance the invariants promise.

use crate::error::{Error, Result};
use crate::nn::forward::ForwardCache;
use crate::nn::matrix::Matrix;
use crate::nn::params::{Gradients, ModelParams};

/// Computes exact analytic gradients of `cross_entropy_loss ∘ forward` with
/// respect to all parameters. `cache` must come from [`forward`] on the same
/// `params` and batch.
///
/// [`forward`]: crate::nn::forward::forward
pub fn backward(params: &ModelParams, cache: &ForwardCache, labels: &[u8]) -> Result<Gradients> {
    let d = params.dims();
    let batch = cache.batch_size();
    if labels.len() != batch {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for a batch of {batch}",
            labels.len()
        )));
    }
    if cache.inputs.cols() != d.input
        || cache.hidden_pre.rows() != batch
        || cache.hidden_pre.cols() != d.hidden
        || cache.hidden_post.rows() != batch
        || cache.hidden_post.cols() != d.hidden
        || cache.probs.rows() != batch
        || cache.probs.cols() != d.output
    {
        return Err(Error::ShapeMismatch(
            "forward cache shapes do not match params".into(),
        ));
    }
    for &label in labels {
        if usize::from(label) >= d.output {
            return Err(Error::InvalidArgument(format!(
                "label {label} out of range for {} classes",
                d.output
            )));
        }
    }

    let inv_b = 1.0f64 / batch as f64;
    let mut dw2 = vec![0.0f64; d.hidden * d.output];
    let mut db2 = vec![0.0f64; d.output];
    let mut dw1 = vec![0.0f64; d.input * d.hidden];
    let mut db1 = vec![0.0f64; d.hidden];
    let mut delta_out = vec![0.0f64; d.output];
    let mut delta_hidden = vec![0.0f64; d.hidden];

    for b in 0..batch {
        let probs = cache.probs.row(b);
        for (o, &p) in probs.iter().enumerate() {
            delta_out[o] = f64::from(p) * inv_b;
        }
        delta_out[usize::from(labels[b])] -= inv_b;

        let hidden = cache.hidden_post.row(b);
        for (h, &hv) in hidden.iter().enumerate() {
            let hv = f64::from(hv);
            let acc = &mut dw2[h * d.output..(h + 1) * d.output];
            for (a, &dout) in acc.iter_mut().zip(&delta_out) {
                *a += hv * dout;
            }
        }
        for (a, &dout) in db2.iter_mut().zip(&delta_out) {
            *a += dout;
        }

        let pre = cache.hidden_pre.row(b);
        for h in 0..d.hidden {
            delta_hidden[h] = if pre[h] > 0.0 {
                let wrow = params.w2().row(h);
                let mut s = 0.0f64;
                for (&w, &dout) in wrow.iter().zip(&delta_out) {
                    s += f64::from(w) * dout;
                }
                s
            } else {
                0.0
            };
        }

        let xrow = cache.inputs.row(b);
        for (i, &xv) in xrow.iter().enumerate() {
            let xv = f64::from(xv);
            let acc = &mut dw1[i * d.hidden..(i + 1) * d.hidden];
            for (a, &dh) in acc.iter_mut().zip(&delta_hidden) {
                *a += xv * dh;
            }
        }
        for (a, &dh) in db1.iter_mut().zip(&delta_hidden) {
            *a += dh;
        }
    }

    let grads = Gradients {
        dw1: Matrix::from_vec(d.input, d.hidden, dw1.iter().map(|&v| v as f32).collect()),
        db1: db1.iter().map(|&v| v as f32).collect(),
        dw2: Matrix::from_vec(d.hidden, d.output, dw2.iter().map(|&v| v as f32).collect()),
        db2: db2.iter().map(|&v| v as f32).collect(),
    };
    if !grads.all_finite() {
        return Err(Error::InvalidValue("non-finite gradient".into()));
    }
    Ok(grads)
}
