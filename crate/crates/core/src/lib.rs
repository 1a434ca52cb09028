//! Grip-force forecasting for handovers.
//!
//! A two-layer LSTM reads a window of the 6-axis interaction wrench and a
//! dense head emits the giver's grip force over the next 70 samples
//! (583.33 ms at 120 Hz). The crate is `no_std` and only needs `alloc`; file
//! formats and the command line live in the `gripcast` crate.
//!
//! - [`numerics`]: matrices, kernels and the seeded generator
//! - [`dataset`]: records, alignment, window sampling, splits, normalization
//! - [`lstm`]: parameters, forward pass and backpropagation through time
//! - [`optim`]: Adam, the mini-batch training loop and evaluation metrics
//! - [`synth`]: parametric handover generator with planted ground truth
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dataset;
pub mod error;
pub mod lstm;
pub mod numerics;
pub mod optim;
pub mod synth;

pub use dataset::{
    align_handover, apply_norm, extract_samples, fit_norm_stats, invert_norm, split_by_pair,
    HandoverRecord, NormStats, NormalizedSample, SamplingPolicy, TrainingSample, WrenchSample,
    HORIZON, SAMPLE_PERIOD_MS,
};
pub use error::{Error, Result};
pub use lstm::{init_params, predict_grip, Gradients, LstmLayerParams, ModelParams};
pub use numerics::{Matrix, Rng};
pub use optim::{adam_step, evaluate, train, AdamState, LossHistory, Metrics, TrainConfig};
pub use synth::{generate_dataset, generate_handover, SynthParams};
