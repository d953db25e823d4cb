use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_update, AdamConfig, OptimizerState};
use super::loss::{glonet_log_loss, normalize_batch, pathwise_weights, temperature_from_division_point, NormState, Normalization};
use super::trace::{RunTrace, TraceRecord};
use crate::error::{Error, Result};
use crate::generator::{sample_latent, AlphaSchedule, ForwardPass, Generator, LatentBatch};
use crate::objectives::{batch_eval, BatchEval, EvalCounter, ObjectiveSpec};

fn default_batch_size() -> usize {
    20
}
fn default_iterations() -> usize {
    200
}
fn default_temperature() -> f64 {
    1.3
}
fn default_early_stop_eps() -> f64 {
    1e-3
}
fn default_patience() -> usize {
    1
}
fn default_alpha_ramp() -> [f64; 2] {
    [0.0, 0.5]
}
pub const DEFAULT_EMA_DECAY: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    /// When set, overrides `temperature` through the division-point rule.
    #[serde(default)]
    pub division_point: Option<f64>,
    /// `None` picks fixed bounds from the objective's value range when it has one, and an EMA
    /// min/max otherwise.
    #[serde(default)]
    pub normalization: Option<Normalization>,
    #[serde(default)]
    pub adam: AdamConfig,
    #[serde(default = "default_early_stop_eps")]
    pub early_stop_eps: f64,
    #[serde(default = "default_patience")]
    pub patience: usize,
    /// Treat the objective as a maximization problem.
    #[serde(default)]
    pub maximize: bool,
    /// Fractions of the run over which the growing blocks ramp their alphas, left to right.
    #[serde(default = "default_alpha_ramp")]
    pub alpha_ramp: [f64; 2],
    #[serde(default)]
    pub max_evaluations: Option<u64>,
    #[serde(default)]
    pub record_best_x: bool,
    /// Off by default so traces are reproducible byte for byte.
    #[serde(default)]
    pub record_wall_clock: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: default_batch_size(),
            iterations: default_iterations(),
            temperature: default_temperature(),
            division_point: None,
            normalization: None,
            adam: AdamConfig::default(),
            early_stop_eps: default_early_stop_eps(),
            patience: default_patience(),
            maximize: false,
            alpha_ramp: default_alpha_ramp(),
            max_evaluations: None,
            record_best_x: false,
            record_wall_clock: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch_size must be at least 1".into()));
        }
        self.effective_temperature()?;
        if !(self.early_stop_eps >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "early_stop_eps must be >= 0, got {}",
                self.early_stop_eps
            )));
        }
        if self.patience == 0 {
            return Err(Error::InvalidParameter("patience must be at least 1".into()));
        }
        if let Some(n) = &self.normalization {
            n.validate()?;
        }
        self.adam.validate()
    }

    pub fn effective_temperature(&self) -> Result<f64> {
        let t = match self.division_point {
            Some(fd) => temperature_from_division_point(fd)?,
            None => self.temperature,
        };
        if t > 0.0 && t.is_finite() {
            Ok(t)
        } else {
            Err(Error::InvalidParameter(format!("temperature must be positive, got {t}")))
        }
    }

    /// Normalization actually used for `objective`. Under maximization the fixed bounds are
    /// the negated value range.
    pub fn resolved_normalization(&self, objective: &ObjectiveSpec) -> Normalization {
        if let Some(n) = self.normalization {
            return n;
        }
        match objective.value_range() {
            Some((lo, hi)) if self.maximize => Normalization::FixedBounds { lo, hi },
            Some((lo, hi)) => Normalization::FixedBounds { lo: -hi, hi: -lo },
            None => Normalization::EmaMinmax {
                decay: DEFAULT_EMA_DECAY,
            },
        }
    }

    /// Schedule ramping every block of `gen` over `alpha_ramp` of the run.
    pub fn schedule_for(&self, gen: &impl Generator) -> Result<AlphaSchedule> {
        AlphaSchedule::sequential(
            gen.num_alphas(),
            self.iterations,
            self.alpha_ramp[0],
            self.alpha_ramp[1],
        )
    }

    fn sign(&self) -> f64 {
        if self.maximize {
            1.0
        } else {
            -1.0
        }
    }

    fn better(&self, a: f64, b: f64) -> bool {
        if self.maximize {
            a > b
        } else {
            a < b
        }
    }

    fn reached(&self, objective: &ObjectiveSpec, f: f64) -> bool {
        match objective.known_optimum() {
            Some(o) if self.maximize => f >= o.value - self.early_stop_eps,
            Some(o) => f <= o.value + self.early_stop_eps,
            None => false,
        }
    }
}

/// Mutable state carried across training steps.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub optimizer: OptimizerState,
    pub norm: NormState,
    pub counter: EvalCounter,
    best: Option<(Vec<f64>, f64)>,
    hits: usize,
    started: Instant,
}

impl TrainState {
    pub fn new(gen: &impl Generator, counter: EvalCounter) -> Self {
        TrainState {
            optimizer: OptimizerState::new(gen.params()),
            norm: NormState::default(),
            counter,
            best: None,
            hits: 0,
            started: Instant::now(),
        }
    }

    pub fn best(&self) -> Option<(&[f64], f64)> {
        self.best.as_ref().map(|(x, f)| (x.as_slice(), *f))
    }
}

/// What one training step produced.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// `None` when the budget was already spent and nothing was evaluated.
    pub record: Option<TraceRecord>,
    /// The budget ran out during this step; the parameters were not updated.
    pub budget_exhausted: bool,
}

fn check_finite(eval: &BatchEval, designs: &DMatrix<f64>) -> Result<()> {
    for (j, &v) in eval.values.iter().enumerate() {
        if !v.is_finite() {
            let x: Vec<f64> = designs.column(j).iter().copied().collect();
            log::error!("objective returned {v} at x = {x:?}");
            return Err(Error::NonFinite {
                value: v,
                context: format!("objective value for sample {j}"),
            });
        }
    }
    Ok(())
}

struct Estimate {
    grads: Vec<DMatrix<f64>>,
    log_loss: f64,
    log_shift: f64,
}

/// Ascent direction of the exponential loss, scaled down by `exp(log_shift)`.
fn estimate(
    gen: &impl Generator,
    pass: &ForwardPass,
    eval: &BatchEval,
    sign: f64,
    normalization: &Normalization,
    norm_state: &mut NormState,
    temperature: f64,
) -> Result<Estimate> {
    let f: Vec<f64> = eval.values.iter().map(|v| sign * v).collect();
    let g = normalize_batch(&f, normalization, norm_state)?;
    let log_loss = glonet_log_loss(&g.values, temperature)?;
    let (w, log_shift) = pathwise_weights(&g.values, temperature)?;
    let mut upstream = eval.gradients.clone();
    for (j, mut col) in upstream.column_iter_mut().enumerate() {
        col *= w[j] * g.slopes[j] * sign;
    }
    let grads = gen.backward(pass, &upstream)?;
    Ok(Estimate {
        grads,
        log_loss,
        log_shift,
    })
}

/// Unshifted pathwise estimate of the loss gradient with respect to every generator parameter,
/// for a given latent batch. Evaluations are not counted.
pub fn pathwise_gradient(
    gen: &impl Generator,
    objective: &ObjectiveSpec,
    z: &LatentBatch,
    alphas: &[f64],
    config: &TrainConfig,
) -> Result<Vec<DMatrix<f64>>> {
    let pass = gen.forward(z, alphas)?;
    let eval = batch_eval(objective, pass.designs(), &mut EvalCounter::new())?;
    check_finite(&eval, pass.designs())?;
    let mut norm = NormState::default();
    let est = estimate(
        gen,
        &pass,
        &eval,
        config.sign(),
        &config.resolved_normalization(objective),
        &mut norm,
        config.effective_temperature()?,
    )?;
    let s = est.log_shift.exp();
    Ok(est.grads.into_iter().map(|g| g * s).collect())
}

/// One iteration: sample, evaluate, weight, backpropagate and take an Adam ascent step.
#[allow(clippy::too_many_arguments)]
pub fn train_step<G: Generator>(
    gen: &mut G,
    objective: &ObjectiveSpec,
    config: &TrainConfig,
    schedule: &AlphaSchedule,
    iteration: usize,
    rng: &mut ChaCha8Rng,
    state: &mut TrainState,
) -> Result<StepOutcome> {
    if gen.output_dim() != objective.dim() {
        return Err(Error::DimensionMismatch {
            expected: objective.dim(),
            actual: gen.output_dim(),
        });
    }
    if schedule.num_blocks() != gen.num_alphas() {
        return Err(Error::ShapeMismatch(format!(
            "schedule has {} blocks, generator {}",
            schedule.num_blocks(),
            gen.num_alphas()
        )));
    }
    let alphas = schedule.alpha_at(iteration);
    let z = sample_latent(rng, config.batch_size, gen.latent_dim());
    let pass = gen.forward(&z, &alphas)?;
    let eval = batch_eval(objective, pass.designs(), &mut state.counter)?;
    if eval.is_empty() {
        return Ok(StepOutcome {
            record: None,
            budget_exhausted: true,
        });
    }
    check_finite(&eval, pass.designs())?;

    let mut batch_best = 0;
    for j in 1..eval.len() {
        if config.better(eval.values[j], eval.values[batch_best]) {
            batch_best = j;
        }
    }
    let batch_f = eval.values[batch_best];
    if state.best.as_ref().is_none_or(|(_, f)| config.better(batch_f, *f)) {
        let x = pass.designs().column(batch_best).iter().copied().collect();
        state.best = Some((x, batch_f));
    }
    let (best_x, global_best) = state.best.clone().expect("set above");

    let truncated = eval.len() < config.batch_size;
    let (loss, log_loss) = if truncated {
        (None, None)
    } else {
        let est = estimate(
            gen,
            &pass,
            &eval,
            config.sign(),
            &config.resolved_normalization(objective),
            &mut state.norm,
            config.effective_temperature()?,
        )?;
        let descent: Vec<DMatrix<f64>> = est.grads.into_iter().map(|g| -g).collect();
        adam_update(&mut state.optimizer, gen.params_mut(), &descent, &config.adam)?;
        (Some(est.log_loss.exp()), Some(est.log_loss))
    };

    let record = TraceRecord {
        iteration,
        evaluations: state.counter.count(),
        batch_best: batch_f,
        global_best,
        loss,
        log_loss,
        alphas,
        best_x: config.record_best_x.then_some(best_x),
        wall_ms: if config.record_wall_clock {
            state.started.elapsed().as_millis() as u64
        } else {
            0
        },
    };
    Ok(StepOutcome {
        record: Some(record),
        budget_exhausted: truncated || state.counter.exhausted(),
    })
}

#[derive(Debug, Clone)]
pub struct RunOutcome<G> {
    pub generator: G,
    pub trace: RunTrace,
    /// Best sample seen, in objective units; `None` if nothing was evaluated.
    pub best: Option<(Vec<f64>, f64)>,
    pub evaluations: u64,
    pub early_stopped: bool,
}

/// Trains `gen` for `config.iterations` steps or until the known optimum is reached for
/// `config.patience` consecutive iterations.
pub fn run<G: Generator>(
    gen: G,
    objective: &ObjectiveSpec,
    config: &TrainConfig,
    schedule: &AlphaSchedule,
    seed: u64,
) -> Result<RunOutcome<G>> {
    let counter = match config.max_evaluations {
        Some(b) => EvalCounter::with_budget(b),
        None => EvalCounter::new(),
    };
    run_with_counter(gen, objective, config, schedule, seed, counter)
}

pub fn run_with_counter<G: Generator>(
    mut gen: G,
    objective: &ObjectiveSpec,
    config: &TrainConfig,
    schedule: &AlphaSchedule,
    seed: u64,
    counter: EvalCounter,
) -> Result<RunOutcome<G>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = TrainState::new(&gen, counter);
    let mut trace = RunTrace::new();
    let mut early_stopped = false;
    for it in 0..config.iterations {
        let step = train_step(&mut gen, objective, config, schedule, it, &mut rng, &mut state)?;
        if let Some(rec) = step.record {
            log::debug!(
                "iter {it}: evals {} batch best {:.6e} global best {:.6e}",
                rec.evaluations,
                rec.batch_best,
                rec.global_best
            );
            if config.reached(objective, rec.global_best) {
                state.hits += 1;
            } else {
                state.hits = 0;
            }
            trace.push(rec)?;
        }
        if state.hits >= config.patience {
            early_stopped = true;
            break;
        }
        if step.budget_exhausted {
            break;
        }
    }
    Ok(RunOutcome {
        generator: gen,
        trace,
        evaluations: state.counter.count(),
        best: state.best,
        early_stopped,
    })
}
