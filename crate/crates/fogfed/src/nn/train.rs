//! Local (per-fog) training: a few epochs of minibatch Adam over one window.

use rand::seq::SliceRandom;

use crate::data::Frame;
use crate::error::{Error, Result};
use crate::nn::backward::backward;
use crate::nn::forward::{batch_from_frames, cross_entropy_loss, forward};
use crate::nn::matrix::Matrix;
use crate::nn::optim::{adam_step, AdamState};
use crate::nn::params::{HyperParams, ModelParams};
use crate::rng::{derive_seed, seeded_rng};

/// Outcome of one local training pass.
#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Parameters after the final optimizer step.
    pub params: ModelParams,
    /// Mean cross-entropy over the whole window under the returned params.
    pub loss: f64,
    /// Total optimizer steps taken (`epochs * ceil(window / batch_size)`).
    pub optimizer_steps: u64,
}

/// Trains `params` on `window` for `hyper.local_epochs` epochs.
///
/// Each epoch shuffles the window with a generator seeded by `(seed, epoch)`
/// and walks it in minibatches of `hyper.batch_size` (the last batch may be
/// smaller). The optimizer state is fresh: moment estimates from older
/// parameters would be invalid after a global-model swap, so none are carried
/// in. Identical `(params, window, hyper, seed)` give bit-identical results.
pub fn train_local(
    params: ModelParams,
    window: &[Frame],
    hyper: &HyperParams,
    seed: u64,
) -> Result<TrainReport> {
    if window.is_empty() {
        return Err(Error::InvalidArgument("empty training window".into()));
    }
    hyper.validate()?;
    let dims = params.dims();

    let mut params = params;
    let mut state = AdamState::new(&params);
    let mut order: Vec<usize> = (0..window.len()).collect();

    for epoch in 0..hyper.local_epochs {
        let mut rng = seeded_rng(derive_seed(seed, &[epoch as u64]));
        order.shuffle(&mut rng);
        for batch_idxs in order.chunks(hyper.batch_size) {
            let (x, labels) = gather_batch(window, batch_idxs, dims.input)?;
            let cache = forward(&params, &x)?;
            let grads = backward(&params, &cache, &labels)?;
            let (next, next_state) = adam_step(params, &grads, state, hyper)?;
            params = next;
            state = next_state;
        }
    }

    let (x, labels) = batch_from_frames(window, dims.input)?;
    let cache = forward(&params, &x)?;
    let loss = cross_entropy_loss(&cache.probs, &labels)?;

    Ok(TrainReport {
        params,
        loss,
        optimizer_steps: state.t(),
    })
}

/// Packs the frames selected by `idxs` into a batch matrix plus labels.
fn gather_batch(frames: &[Frame], idxs: &[usize], dim: usize) -> Result<(Matrix, Vec<u8>)> {
    let mut x = Matrix::zeros(idxs.len(), dim);
    let mut labels = Vec::with_capacity(idxs.len());
    for (r, &i) in idxs.iter().enumerate() {
        let frame = &frames[i];
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
