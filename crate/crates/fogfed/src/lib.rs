//! Deterministic three-tier (edge → fog → cloud) federated-learning
//! simulator for streaming radar range profiles.
//!
//! Edge devices stream 512-point frames to their fog node; each round, every
//! fog trains a small MLP locally on its newest 60-frame window, ships only
//! the model parameters to the cloud, and receives back the sample-weighted
//! federated average. Raw frames never leave the fog tier.
//!
//! The crate is organized as:
//!
//! - [`nn`]: the from-scratch network — forward pass, softmax cross-entropy,
//!   hand-derived backprop, Adam, local window training, and evaluation.
//! - [`data`]: dataset loading (CSV, raw-f32), the synthetic generator, the
//!   distance → class rules, partitioning, and stream windows.
//! - [`protocol`] / [`wire`]: federated-averaging semantics and the byte-level
//!   message codec used on every simulated link.
//! - [`sim`]: topology construction and the synchronous round loop.
//! - [`metrics`] / [`config`] / [`cli`]: run artifacts and the `fogfed`
//!   binary's interface.
//!
//! Every run is a pure function of its configuration: seeded ChaCha8 streams,
//! ordered aggregation, and fixed-chunk parallel evaluation make results
//! bit-identical across repeats and thread counts.

pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod protocol;
pub mod rng;
pub mod sim;
pub mod wire;

pub use config::{DataSource, EmitFormat, PartialConfig, RunConfig};
pub use data::{Dataset, Frame, Shard};
pub use error::{Error, Result};
pub use nn::{
    adam_step, backward, evaluate, forward, init_params, train_local, AdamState, Dims,
    EvalMetrics, Gradients, HyperParams, Matrix, ModelParams, TrainReport,
};
pub use protocol::{aggregate, GlobalModel, ModelUpdate};
pub use sim::{RoundReport, Simulation, TopologyConfig, TransportRecord};
pub use wire::{decode, encode, WireError, WireMessage};
