//! Training loop for generator-based global optimization.
//!
//! A generator maps Gaussian latents to a batch of designs. Each step evaluates the batch,
//! weights every sample's design gradient by `exp(g / T)` of its normalized objective, and
//! backpropagates the weighted gradients into the generator parameters, which Adam then moves
//! uphill on the exponential loss.

mod adam;
mod loss;
mod trace;
mod train;

pub use adam::{adam_update, AdamConfig, OptimizerState};
pub(crate) use adam::adam_update_slice;
pub use loss::{
    glonet_log_loss, glonet_loss, normalize_batch, pathwise_weights,
    temperature_from_division_point, NormState, Normalization, Normalized,
};
pub use trace::{RunTrace, TraceRecord, TRACE_COLUMNS};
pub use train::{
    pathwise_gradient, run, run_with_counter, train_step, RunOutcome, StepOutcome, TrainConfig,
    TrainState, DEFAULT_EMA_DECAY,
};
