//! Reference optimizers sharing the engine's evaluation accounting and trace format.

mod adam_x;
mod cg;
mod cmaes;
mod refine;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use adam_x::{adam_from, adam_multistart, AdamMultistartConfig};
pub use cg::{nonlinear_cg, nonlinear_cg_multistart, CgConfig};
pub use cmaes::{cma_es, default_population, CmaEsConfig};
pub use refine::{local_refinement, RefinementConfig};

use crate::engine::{RunTrace, TraceRecord};
use crate::error::Result;
use crate::objectives::{EvalCounter, ObjectiveSpec};

/// Result of a baseline run.
#[derive(Debug, Clone)]
pub struct BaselineOutcome {
    /// Best point found and its objective value; `None` if nothing was evaluated.
    pub best: Option<(Vec<f64>, f64)>,
    pub trace: RunTrace,
    pub evaluations: u64,
    /// The known optimum was reached within the stop tolerance.
    pub reached: bool,
}

impl BaselineOutcome {
    pub fn best_f(&self) -> f64 {
        self.best.as_ref().map_or(f64::INFINITY, |b| b.1)
    }
}

/// Counts evaluations, tracks the best point and writes trace rows.
pub(crate) struct Tracker<'a> {
    objective: &'a ObjectiveSpec,
    counter: EvalCounter,
    best: Option<(Vec<f64>, f64)>,
    trace: RunTrace,
    stop_eps: Option<f64>,
    reached: bool,
    iteration: usize,
    since_record: f64,
    /// Counter value at the last row (or at creation, for resumed counters).
    recorded: u64,
}

impl<'a> Tracker<'a> {
    pub(crate) fn new(objective: &'a ObjectiveSpec, counter: EvalCounter, stop_eps: Option<f64>) -> Self {
        Tracker {
            objective,
            recorded: counter.count(),
            counter,
            best: None,
            trace: RunTrace::new(),
            stop_eps,
            reached: false,
            iteration: 0,
            since_record: f64::INFINITY,
        }
    }

    pub(crate) fn objective(&self) -> &'a ObjectiveSpec {
        self.objective
    }

    /// Evaluates value and gradient; `None` once the budget is spent.
    pub(crate) fn eval(&mut self, x: &[f64], grad: &mut [f64]) -> Option<f64> {
        let f = self.counter.eval(self.objective, x, grad)?;
        self.observe(x, f);
        Some(f)
    }

    fn observe(&mut self, x: &[f64], f: f64) {
        self.since_record = self.since_record.min(f);
        if self.best.as_ref().is_none_or(|(_, b)| f < *b) {
            self.best = Some((x.to_vec(), f));
        }
        if let Some(eps) = self.stop_eps {
            if self.objective.reached(f, eps) {
                self.reached = true;
            }
        }
    }

    /// Accepts an externally known point without counting an evaluation.
    pub(crate) fn seed_best(&mut self, x: Vec<f64>, f: f64) {
        if self.best.as_ref().is_none_or(|(_, b)| f < *b) {
            self.best = Some((x, f));
        }
    }

    pub(crate) fn reached(&self) -> bool {
        self.reached
    }

    pub(crate) fn should_stop(&self) -> bool {
        self.reached || self.counter.exhausted()
    }

    pub(crate) fn count(&self) -> u64 {
        self.counter.count()
    }

    pub(crate) fn best_f(&self) -> f64 {
        self.best.as_ref().map_or(f64::INFINITY, |b| b.1)
    }

    /// Writes a trace row if anything was evaluated since the last one.
    pub(crate) fn record(&mut self) -> Result<()> {
        if self.recorded == self.counter.count() {
            return Ok(());
        }
        self.recorded = self.counter.count();
        let rec = TraceRecord::plain(
            self.iteration,
            self.counter.count(),
            self.since_record,
            self.best_f(),
        );
        self.trace.push(rec)?;
        self.iteration += 1;
        self.since_record = f64::INFINITY;
        Ok(())
    }

    pub(crate) fn finish(mut self) -> Result<BaselineOutcome> {
        self.record()?;
        Ok(BaselineOutcome {
            best: self.best,
            evaluations: self.counter.count(),
            trace: self.trace,
            reached: self.reached,
        })
    }
}

pub(crate) fn uniform_in_bounds(rng: &mut ChaCha8Rng, objective: &ObjectiveSpec) -> Vec<f64> {
    objective
        .lower()
        .iter()
        .zip(objective.upper())
        .map(|(&l, &u)| rng.random_range(l..u))
        .collect()
}
