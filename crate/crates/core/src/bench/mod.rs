//! Experiment harness: seeded repetitions of one algorithm on one objective under a shared
//! evaluation budget, with per-run records, summaries and CSV output.

mod metrics;
mod records;

use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use metrics::{aggregate, evals_to_target, format_mean_std, mean_std, summary_report, SummaryRow};
pub use records::{
    read_records_csv, read_records_from, write_records_csv, write_records_to, BenchmarkRecord,
    RECORD_COLUMNS,
};

use crate::baselines::{
    adam_multistart, cma_es, local_refinement, nonlinear_cg_multistart, AdamMultistartConfig,
    BaselineOutcome, CgConfig, CmaEsConfig, RefinementConfig,
};
use crate::engine::{run_with_counter, RunTrace, TraceRecord, TrainConfig};
use crate::error::{Error, Result};
use crate::generator::{
    init_fc_generator, init_pg_generator, pg_architecture_with_base, Activation, Generator,
};
use crate::objectives::{EvalCounter, ObjectiveConfig, ObjectiveSpec};

/// SplitMix64 output for state `x`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of repetition `k` under `base`: the `k`-th output of a SplitMix64 stream started at
/// `base`, so adding repetitions never changes earlier ones.
pub fn repetition_seed(base: u64, k: usize) -> u64 {
    splitmix64(base.wrapping_add((k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

fn default_activation() -> Activation {
    Activation::Tanh
}
fn default_base_dim() -> usize {
    1
}
fn default_latent_dim() -> usize {
    4
}
fn default_hidden() -> Vec<usize> {
    vec![32, 32]
}

/// Shape of the progressive-growing generator. `num_blocks` defaults to the fewest blocks
/// covering the objective dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PgNetworkConfig {
    #[serde(default = "default_base_dim")]
    pub base_dim: usize,
    #[serde(default)]
    pub num_blocks: Option<usize>,
    #[serde(default = "default_activation")]
    pub activation: Activation,
}

impl Default for PgNetworkConfig {
    fn default() -> Self {
        PgNetworkConfig {
            base_dim: default_base_dim(),
            num_blocks: None,
            activation: default_activation(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FcNetworkConfig {
    #[serde(default = "default_latent_dim")]
    pub latent_dim: usize,
    #[serde(default = "default_hidden")]
    pub hidden_widths: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: Activation,
}

impl Default for FcNetworkConfig {
    fn default() -> Self {
        FcNetworkConfig {
            latent_dim: default_latent_dim(),
            hidden_widths: default_hidden(),
            activation: default_activation(),
        }
    }
}

/// Algorithm selection, tagged by `id`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgorithmConfig {
    PgGlonet {
        #[serde(default)]
        network: PgNetworkConfig,
        #[serde(default)]
        train: TrainConfig,
        /// Adam refinement from generator samples after training.
        #[serde(default)]
        refinement: Option<RefinementConfig>,
    },
    FcGlonet {
        #[serde(default)]
        network: FcNetworkConfig,
        #[serde(default)]
        train: TrainConfig,
        #[serde(default)]
        refinement: Option<RefinementConfig>,
    },
    AdamMultistart(AdamMultistartConfig),
    NonlinearCg(CgConfig),
    CmaEs(CmaEsConfig),
}

impl AlgorithmConfig {
    /// Label used in records and reports.
    pub fn label(&self) -> &'static str {
        match self {
            AlgorithmConfig::PgGlonet { refinement: None, .. } => "pg_glonet",
            AlgorithmConfig::PgGlonet { .. } => "pg_glonet+refine",
            AlgorithmConfig::FcGlonet { refinement: None, .. } => "fc_glonet",
            AlgorithmConfig::FcGlonet { .. } => "fc_glonet+refine",
            AlgorithmConfig::AdamMultistart(_) => "adam_multistart",
            AlgorithmConfig::NonlinearCg(_) => "nonlinear_cg",
            AlgorithmConfig::CmaEs(_) => "cma_es",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    /// Hard cap on evaluations per repetition, enforced mid-iteration.
    #[serde(default)]
    pub max_evaluations: Option<u64>,
    /// Overrides the algorithm's own iteration count (training iterations, Adam steps per
    /// start, CG iterations per start, CMA-ES generations).
    #[serde(default)]
    pub max_iterations: Option<usize>,
}

fn default_repetitions() -> usize {
    10
}
fn default_target_eps() -> f64 {
    1e-3
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub objective: ObjectiveConfig,
    pub algorithm: AlgorithmConfig,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    /// Explicit per-repetition seeds; when absent they derive from `base_seed`.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub budget: Budget,
    /// Distance to the known optimum that counts as reaching it.
    #[serde(default = "default_target_eps")]
    pub target_eps: f64,
    /// Stop a repetition as soon as the target is reached.
    #[serde(default = "default_true")]
    pub early_stop: bool,
    #[serde(default)]
    pub record_best_x: bool,
    /// Off by default so record files are reproducible byte for byte.
    #[serde(default)]
    pub record_wall_clock: bool,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(objective: ObjectiveConfig, algorithm: AlgorithmConfig) -> Self {
        ExperimentConfig {
            objective,
            algorithm,
            repetitions: default_repetitions(),
            seeds: None,
            base_seed: 0,
            budget: Budget::default(),
            target_eps: default_target_eps(),
            early_stop: true,
            record_best_x: false,
            record_wall_clock: false,
            output_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if let Some(seeds) = &self.seeds {
            if seeds.len() != self.repetitions {
                return Err(Error::Config(format!(
                    "{} seeds given for {} repetitions",
                    seeds.len(),
                    self.repetitions
                )));
            }
        }
        if !(self.target_eps >= 0.0) {
            return Err(Error::Config(format!(
                "target_eps must be >= 0, got {}",
                self.target_eps
            )));
        }
        if self.budget.max_evaluations.is_none() && self.budget.max_iterations.is_none() {
            let unbounded = match &self.algorithm {
                AlgorithmConfig::NonlinearCg(config) => config.starts.is_none(),
                AlgorithmConfig::CmaEs(config) => config.generations == usize::MAX,
                _ => false,
            };
            if unbounded {
                return Err(Error::Config(format!(
                    "{} needs budget.max_evaluations or budget.max_iterations",
                    self.algorithm.label()
                )));
            }
        }
        Ok(())
    }

    pub fn seeds(&self) -> Vec<u64> {
        match &self.seeds {
            Some(s) => s.clone(),
            None => (0..self.repetitions)
                .map(|k| repetition_seed(self.base_seed, k))
                .collect(),
        }
    }

    fn counter(&self) -> EvalCounter {
        match self.budget.max_evaluations {
            Some(b) => EvalCounter::with_budget(b),
            None => EvalCounter::new(),
        }
    }

    fn stop_eps(&self) -> Option<f64> {
        self.early_stop.then_some(self.target_eps)
    }
}

/// Record and trace of one repetition.
#[derive(Debug, Clone)]
pub struct Repetition {
    pub record: BenchmarkRecord,
    pub trace: RunTrace,
}

/// Appends `extra` to `base`, keeping evaluations strictly increasing and iteration numbers
/// running on.
fn chain_traces(base: &mut RunTrace, extra: &RunTrace) -> Result<()> {
    let offset = base.last().map_or(0, |r| r.iteration + 1);
    let best_before = base.last().map_or(f64::INFINITY, |r| r.global_best);
    for r in extra.records() {
        let mut r: TraceRecord = r.clone();
        r.iteration += offset;
        r.global_best = r.global_best.min(best_before);
        base.push(r)?;
    }
    Ok(())
}

fn run_glonet<G: Generator>(
    config: &ExperimentConfig,
    objective: &ObjectiveSpec,
    gen: G,
    train: &TrainConfig,
    refinement: &Option<RefinementConfig>,
    seed: u64,
) -> Result<(Option<(Vec<f64>, f64)>, RunTrace, u64)> {
    let mut train = train.clone();
    if let Some(n) = config.budget.max_iterations {
        train.iterations = n;
    }
    train.max_evaluations = config.budget.max_evaluations;
    train.early_stop_eps = config.target_eps;
    if !config.early_stop {
        train.patience = usize::MAX;
    }
    let schedule = train.schedule_for(&gen)?;
    let out = run_with_counter(gen, objective, &train, &schedule, seed, config.counter())?;
    let Some(refine) = refinement else {
        return Ok((out.best, out.trace, out.evaluations));
    };
    let reached = out.early_stopped
        || out
            .best
            .as_ref()
            .is_some_and(|b| objective.reached(b.1, config.target_eps));
    if reached && config.early_stop {
        return Ok((out.best, out.trace, out.evaluations));
    }
    let mut refine = refine.clone();
    refine.stop_eps = config.stop_eps();
    let counter = EvalCounter::resumed(out.evaluations, config.budget.max_evaluations);
    let alphas = schedule.alpha_at(train.iterations);
    let r = local_refinement(
        &out.generator,
        objective,
        &alphas,
        out.best.clone(),
        &refine,
        splitmix64(seed ^ 0x5EED_0F_AE11),
        counter,
    )?;
    let mut trace = out.trace;
    chain_traces(&mut trace, &r.trace)?;
    Ok((r.best, trace, r.evaluations))
}

fn baseline_result(out: BaselineOutcome) -> (Option<(Vec<f64>, f64)>, RunTrace, u64) {
    (out.best, out.trace, out.evaluations)
}

/// Runs one repetition of `config` with `seed`.
pub fn run_repetition(config: &ExperimentConfig, seed: u64) -> Result<Repetition> {
    config.validate()?;
    let objective = config.objective.build()?;
    let d = objective.dim();
    let started = Instant::now();
    let iters = config.budget.max_iterations;
    let (best, trace, evaluations) = match &config.algorithm {
        AlgorithmConfig::PgGlonet {
            network,
            train,
            refinement,
        } => {
            let (base, auto_blocks) = pg_architecture_with_base(d, network.base_dim);
            let blocks = network.num_blocks.unwrap_or(auto_blocks);
            let gen = init_pg_generator(
                base,
                blocks,
                network.activation,
                objective.lower(),
                objective.upper(),
                seed,
            )?;
            run_glonet(config, &objective, gen, train, refinement, seed)?
        }
        AlgorithmConfig::FcGlonet {
            network,
            train,
            refinement,
        } => {
            let gen = init_fc_generator(
                network.latent_dim,
                &network.hidden_widths,
                network.activation,
                objective.lower(),
                objective.upper(),
                seed,
            )?;
            run_glonet(config, &objective, gen, train, refinement, seed)?
        }
        AlgorithmConfig::AdamMultistart(c) => {
            let mut c = c.clone();
            if let Some(n) = iters {
                c.iterations = n;
            }
            c.stop_eps = config.stop_eps();
            baseline_result(adam_multistart(&objective, &c, seed, config.counter())?)
        }
        AlgorithmConfig::NonlinearCg(c) => {
            let mut c = c.clone();
            if let Some(n) = iters {
                c.iterations = n;
            }
            c.stop_eps = config.stop_eps();
            baseline_result(nonlinear_cg_multistart(&objective, &c, seed, config.counter())?)
        }
        AlgorithmConfig::CmaEs(c) => {
            let mut c = c.clone();
            if let Some(n) = iters {
                c.generations = n;
            }
            c.stop_eps = config.stop_eps();
            baseline_result(cma_es(&objective, &c, seed, config.counter())?)
        }
    };
    let hit = objective
        .known_optimum()
        .and_then(|o| evals_to_target(&trace, o.value, config.target_eps));
    if evaluations == 0 {
        log::warn!("{} on {}: no evaluations within the budget", config.algorithm.label(), objective.name());
    }
    let (best_x, best_f) = match best {
        Some((x, f)) => (Some(x), f),
        None => (None, f64::INFINITY),
    };
    let record = BenchmarkRecord {
        objective: objective.name().to_string(),
        dim: d,
        algorithm: config.algorithm.label().to_string(),
        seed,
        best_f,
        best_x: if config.record_best_x { best_x } else { None },
        evals_total: evaluations,
        evals_to_target: hit,
        reached: hit.is_some(),
        wall_ms: if config.record_wall_clock {
            started.elapsed().as_millis() as u64
        } else {
            0
        },
    };
    Ok(Repetition { record, trace })
}

/// Runs every repetition of `config` and returns their records in repetition order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<BenchmarkRecord>> {
    Ok(run_experiment_with_traces(config)?
        .into_iter()
        .map(|r| r.record)
        .collect())
}

pub fn run_experiment_with_traces(config: &ExperimentConfig) -> Result<Vec<Repetition>> {
    config.validate()?;
    config
        .seeds()
        .into_iter()
        .map(|seed| run_repetition(config, seed))
        .collect()
}

#[cfg(test)]
mod tests;
