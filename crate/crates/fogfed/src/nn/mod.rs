//! From-scratch dense network: 512 -> 64 (ReLU) -> 8 (softmax), trained with
//! hand-derived backprop and Adam. No autograd; the architecture is fixed at
//! two layers so the gradients are written out directly.

pub mod backward;
pub mod forward;
pub mod matrix;
pub mod optim;
pub mod params;
pub mod train;

pub use backward::backward;
pub use forward::{
    argmax, cross_entropy_loss, evaluate, forward, softmax_rows, EvalMetrics, ForwardCache,
    LOG_CLAMP,
};
pub use matrix::Matrix;
pub use optim::{adam_step, AdamState};
pub use params::{
    init_params, Dims, Gradients, HyperParams, ModelParams, DEFAULT_HIDDEN_DIM,
    DEFAULT_INPUT_DIM, DEFAULT_OUTPUT_DIM,
};
pub use train::{train_local, TrainReport};
