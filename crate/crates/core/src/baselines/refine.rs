use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam_x::adam_descent;
use super::{BaselineOutcome, Tracker};
use crate::engine::AdamConfig;
use crate::error::{Error, Result};
use crate::generator::{sample_latent, Generator};
use crate::objectives::{EvalCounter, ObjectiveSpec};

fn default_samples() -> usize {
    100
}
fn default_iterations() -> usize {
    200
}
fn default_step_size() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefinementConfig {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_step_size")]
    pub step_size: f64,
    #[serde(default)]
    pub stop_eps: Option<f64>,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        RefinementConfig {
            samples: default_samples(),
            iterations: default_iterations(),
            step_size: default_step_size(),
            stop_eps: None,
        }
    }
}

/// Draws `samples` designs from a trained generator (with all blocks fully grown unless
/// `alphas` says otherwise) and runs Adam on each. The incumbent, typically the best point of
/// the training run, is kept if nothing beats it.
#[allow(clippy::too_many_arguments)]
pub fn local_refinement<G: Generator>(
    gen: &G,
    objective: &ObjectiveSpec,
    alphas: &[f64],
    incumbent: Option<(Vec<f64>, f64)>,
    config: &RefinementConfig,
    seed: u64,
    counter: EvalCounter,
) -> Result<BaselineOutcome> {
    if gen.output_dim() != objective.dim() {
        return Err(Error::DimensionMismatch {
            expected: objective.dim(),
            actual: gen.output_dim(),
        });
    }
    let adam = AdamConfig::with_step_size(config.step_size);
    adam.validate()?;
    let mut tracker = Tracker::new(objective, counter, config.stop_eps);
    if let Some((x, f)) = incumbent {
        tracker.seed_best(x, f);
    }
    if config.samples == 0 {
        return tracker.finish();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = sample_latent(&mut rng, config.samples, gen.latent_dim());
    let designs = gen.forward(&z, alphas)?.designs().clone();
    for col in designs.column_iter() {
        adam_descent(&mut tracker, col.iter().copied().collect(), config.iterations, &adam)?;
        tracker.record()?;
        if tracker.should_stop() {
            break;
        }
    }
    tracker.finish()
}
