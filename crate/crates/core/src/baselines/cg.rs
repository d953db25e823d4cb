use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{uniform_in_bounds, BaselineOutcome, Tracker};
use crate::error::{Error, Result};
use crate::objectives::{EvalCounter, ObjectiveSpec};

fn default_iterations() -> usize {
    100
}
fn default_armijo_c() -> f64 {
    1e-4
}
fn default_max_halvings() -> usize {
    40
}
fn default_grad_tol() -> f64 {
    1e-12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CgConfig {
    /// Outer iterations (accepted line-search steps) per start.
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    /// Number of random starts for the multistart variant; `None` restarts until the budget
    /// runs out.
    #[serde(default)]
    pub starts: Option<usize>,
    #[serde(default = "default_armijo_c")]
    pub armijo_c: f64,
    #[serde(default = "default_max_halvings")]
    pub max_halvings: usize,
    /// Gradient infinity-norm at which a start counts as stationary.
    #[serde(default = "default_grad_tol")]
    pub grad_tol: f64,
    #[serde(default)]
    pub stop_eps: Option<f64>,
}

impl Default for CgConfig {
    fn default() -> Self {
        CgConfig {
            iterations: default_iterations(),
            starts: None,
            armijo_c: default_armijo_c(),
            max_halvings: default_max_halvings(),
            grad_tol: default_grad_tol(),
            stop_eps: None,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

enum Search {
    Accepted { step: f64 },
    Failed,
    OutOfBudget,
}

/// Projected Armijo backtracking along `dir`. On success `x`, `f`, `grad` hold the new point.
#[allow(clippy::too_many_arguments)]
fn line_search(
    tracker: &mut Tracker<'_>,
    x: &mut Vec<f64>,
    f: &mut f64,
    grad: &mut Vec<f64>,
    dir: &[f64],
    initial_step: f64,
    config: &CgConfig,
) -> Search {
    let objective = tracker.objective();
    let mut t = initial_step;
    let mut trial = vec![0.0; x.len()];
    let mut trial_grad = vec![0.0; x.len()];
    for _ in 0..=config.max_halvings {
        for i in 0..x.len() {
            trial[i] = x[i] + t * dir[i];
        }
        objective.clamp_into_bounds(&mut trial);
        let moved: Vec<f64> = trial.iter().zip(x.iter()).map(|(a, b)| a - b).collect();
        let decrease = dot(grad, &moved);
        if decrease >= 0.0 {
            // projection removed every descent component
            t *= 0.5;
            continue;
        }
        let Some(ft) = tracker.eval(&trial, &mut trial_grad) else {
            return Search::OutOfBudget;
        };
        if ft <= *f + config.armijo_c * decrease {
            std::mem::swap(x, &mut trial);
            std::mem::swap(grad, &mut trial_grad);
            *f = ft;
            return Search::Accepted { step: t };
        }
        if tracker.reached() {
            return Search::OutOfBudget;
        }
        t *= 0.5;
    }
    Search::Failed
}

/// Polak-Ribiere+ nonlinear conjugate gradient from `x0` with projected Armijo backtracking.
/// Every trial point counts as one evaluation. Returns the final iterate and its value.
pub(crate) fn cg_from(
    tracker: &mut Tracker<'_>,
    x0: Vec<f64>,
    config: &CgConfig,
) -> Result<Option<(Vec<f64>, f64)>> {
    let mut x = x0;
    let mut grad = vec![0.0; x.len()];
    let Some(mut f) = tracker.eval(&x, &mut grad) else {
        return Ok(None);
    };
    let mut dir: Vec<f64> = grad.iter().map(|g| -g).collect();
    let mut step = 1.0 / inf_norm(&grad).max(1.0);
    for _ in 0..config.iterations {
        if tracker.should_stop() || inf_norm(&grad) <= config.grad_tol {
            break;
        }
        let mut steepest = dir.iter().zip(&grad).all(|(d, g)| *d == -g);
        if dot(&grad, &dir) >= 0.0 {
            dir = grad.iter().map(|g| -g).collect();
            steepest = true;
        }
        let old_grad = grad.clone();
        let mut outcome = line_search(tracker, &mut x, &mut f, &mut grad, &dir, 2.0 * step, config);
        if matches!(outcome, Search::Failed) && !steepest {
            // fall back to steepest descent once before giving up
            dir = grad.iter().map(|g| -g).collect();
            outcome = line_search(tracker, &mut x, &mut f, &mut grad, &dir, 2.0 * step, config);
        }
        match outcome {
            Search::Accepted { step: t } => step = t,
            Search::Failed | Search::OutOfBudget => break,
        }
        let denom = dot(&old_grad, &old_grad);
        let beta = if denom > 0.0 {
            let num: f64 = grad.iter().zip(&old_grad).map(|(g, o)| g * (g - o)).sum();
            (num / denom).max(0.0)
        } else {
            0.0
        };
        for (d, g) in dir.iter_mut().zip(&grad) {
            *d = -g + beta * *d;
        }
    }
    Ok(Some((x, f)))
}

/// Single nonlinear CG descent from `x0`.
pub fn nonlinear_cg(
    objective: &ObjectiveSpec,
    x0: &[f64],
    config: &CgConfig,
    counter: EvalCounter,
) -> Result<BaselineOutcome> {
    if x0.len() != objective.dim() {
        return Err(Error::DimensionMismatch {
            expected: objective.dim(),
            actual: x0.len(),
        });
    }
    let mut tracker = Tracker::new(objective, counter, config.stop_eps);
    cg_from(&mut tracker, x0.to_vec(), config)?;
    tracker.finish()
}

/// Nonlinear CG restarted from uniform random points, one trace row per start.
pub fn nonlinear_cg_multistart(
    objective: &ObjectiveSpec,
    config: &CgConfig,
    seed: u64,
    counter: EvalCounter,
) -> Result<BaselineOutcome> {
    if config.starts.is_none() && counter.budget().is_none() {
        return Err(Error::InvalidParameter(
            "unbounded CG multistart needs either a start count or an evaluation budget".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tracker = Tracker::new(objective, counter, config.stop_eps);
    let mut k = 0;
    while config.starts.is_none_or(|s| k < s) && !tracker.should_stop() {
        let x0 = uniform_in_bounds(&mut rng, objective);
        let before = tracker.count();
        cg_from(&mut tracker, x0, config)?;
        tracker.record()?;
        k += 1;
        if tracker.count() == before {
            break;
        }
    }
    tracker.finish()
}
