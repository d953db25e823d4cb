use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{uniform_in_bounds, BaselineOutcome, Tracker};
use crate::engine::{adam_update_slice, AdamConfig, OptimizerState};
use crate::error::{Error, Result};
use crate::objectives::{EvalCounter, ObjectiveSpec};

fn default_starts() -> usize {
    1
}
fn default_iterations() -> usize {
    200
}
fn default_step_size() -> f64 {
    0.05
}
fn default_stop_eps() -> Option<f64> {
    Some(1e-3)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamMultistartConfig {
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_step_size")]
    pub step_size: f64,
    /// Stop as soon as the known optimum is reached within this tolerance.
    #[serde(default = "default_stop_eps")]
    pub stop_eps: Option<f64>,
}

impl Default for AdamMultistartConfig {
    fn default() -> Self {
        AdamMultistartConfig {
            starts: default_starts(),
            iterations: default_iterations(),
            step_size: default_step_size(),
            stop_eps: default_stop_eps(),
        }
    }
}

/// Adam on the design from `x`, projected onto the box after every step. Stops early when the
/// tracker reports the target or the budget. Returns the last iterate.
pub(crate) fn adam_descent(
    tracker: &mut Tracker<'_>,
    mut x: Vec<f64>,
    iterations: usize,
    config: &AdamConfig,
) -> Result<Vec<f64>> {
    let objective = tracker.objective();
    let mut state = OptimizerState::for_vector(x.len());
    let mut grad = vec![0.0; x.len()];
    for _ in 0..iterations {
        if tracker.eval(&x, &mut grad).is_none() || tracker.reached() {
            break;
        }
        adam_update_slice(&mut state, &mut x, &grad, config)?;
        objective.clamp_into_bounds(&mut x);
    }
    Ok(x)
}

/// `starts` independent Adam descents from uniform random points in the box, one trace row
/// per start.
pub fn adam_multistart(
    objective: &ObjectiveSpec,
    config: &AdamMultistartConfig,
    seed: u64,
    counter: EvalCounter,
) -> Result<BaselineOutcome> {
    if config.starts == 0 {
        return Err(Error::InvalidParameter("adam_multistart needs at least one start".into()));
    }
    let adam = AdamConfig::with_step_size(config.step_size);
    adam.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tracker = Tracker::new(objective, counter, config.stop_eps);
    for _ in 0..config.starts {
        let x0 = uniform_in_bounds(&mut rng, objective);
        adam_descent(&mut tracker, x0, config.iterations, &adam)?;
        tracker.record()?;
        if tracker.should_stop() {
            break;
        }
    }
    tracker.finish()
}

/// Single Adam descent from `x0` for `iterations` evaluations.
pub fn adam_from(
    objective: &ObjectiveSpec,
    x0: &[f64],
    iterations: usize,
    step_size: f64,
    counter: EvalCounter,
) -> Result<(Vec<f64>, BaselineOutcome)> {
    if x0.len() != objective.dim() {
        return Err(Error::DimensionMismatch {
            expected: objective.dim(),
            actual: x0.len(),
        });
    }
    let adam = AdamConfig::with_step_size(step_size);
    adam.validate()?;
    let mut tracker = Tracker::new(objective, counter, None);
    let x = adam_descent(&mut tracker, x0.to_vec(), iterations, &adam)?;
    Ok((x, tracker.finish()?))
}
