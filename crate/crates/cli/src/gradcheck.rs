//! Finite-difference checks of objective gradients and generator backward passes.

use nalgebra::DMatrix;
use pgglonet::bench::ExperimentConfig;
use pgglonet::generator::{
    check_backward, init_fc_generator, init_pg_generator, Activation, Generator, LatentBatch,
};
use pgglonet::objectives::{
    finite_difference_gradient, relative_error, BaseFunction, LsgoConfig, ObjectiveConfig,
    ObjectiveSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const OBJECTIVE_TOL: f64 = 1e-6;
pub const GENERATOR_TOL: f64 = 1e-5;
const FD_STEP: f64 = 1e-6;
const POINTS_PER_OBJECTIVE: usize = 5;
const WEIGHTS_PER_GENERATOR: usize = 50;

pub struct CaseResult {
    pub label: String,
    pub max_rel_error: f64,
}

pub struct Report {
    pub objectives: Vec<CaseResult>,
    pub generators: Vec<CaseResult>,
}

fn worst(cases: &[CaseResult]) -> f64 {
    cases.iter().map(|c| c.max_rel_error).fold(0.0, f64::max)
}

impl Report {
    pub fn objective_error(&self) -> f64 {
        worst(&self.objectives)
    }

    pub fn generator_error(&self) -> f64 {
        worst(&self.generators)
    }

    pub fn passed(&self) -> bool {
        self.objective_error() <= OBJECTIVE_TOL && self.generator_error() <= GENERATOR_TOL
    }
}

pub fn shipped_objectives() -> Vec<ObjectiveConfig> {
    let mut out = vec![
        ObjectiveConfig::ModifiedRastrigin { dim: 2, rho: 0.0 },
        ObjectiveConfig::ModifiedRastrigin { dim: 2, rho: 5.0 },
        ObjectiveConfig::Rastrigin { dim: 10 },
        ObjectiveConfig::ShiftedRastrigin {
            dim: 10,
            seed: 7,
            fraction: 0.8,
        },
        ObjectiveConfig::Schwefel { dim: 10 },
        ObjectiveConfig::Ackley { dim: 10 },
        ObjectiveConfig::Sphere { dim: 5 },
    ];
    for (k, base) in [
        BaseFunction::Rastrigin,
        BaseFunction::Ackley,
        BaseFunction::Schwefel,
        BaseFunction::Sphere,
    ]
    .into_iter()
    .enumerate()
    {
        out.push(ObjectiveConfig::LsgoComposite {
            config: LsgoConfig::partially_separable(60, &[10, 5, 5, 20, 10], base, 3 + k as u64),
        });
    }
    out
}

/// Interior point, kept 5% of the width away from each face.
fn random_point(spec: &ObjectiveSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    spec.lower()
        .iter()
        .zip(spec.upper())
        .map(|(&lo, &hi)| {
            let margin = 0.05 * (hi - lo);
            rng.random_range(lo + margin..hi - margin)
        })
        .collect()
}

pub fn check_objective(config: &ObjectiveConfig, seed: u64) -> pgglonet::Result<CaseResult> {
    let spec = config.build()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut err = 0.0f64;
    for _ in 0..POINTS_PER_OBJECTIVE {
        let x = random_point(&spec, &mut rng);
        let numeric = finite_difference_gradient(&spec, &x, FD_STEP);
        err = err.max(relative_error(&spec.gradient(&x), &numeric));
    }
    Ok(CaseResult {
        label: format!("{} (d={})", spec.name(), spec.dim()),
        max_rel_error: err,
    })
}

fn check_generator<G: Generator + Clone>(gen: &G, label: String, seed: u64) -> pgglonet::Result<CaseResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = 4;
    let z = LatentBatch::from_seed(seed, m, gen.latent_dim());
    let alphas: Vec<f64> = (0..gen.num_alphas()).map(|_| rng.random_range(0.0..1.0)).collect();
    let upstream = DMatrix::from_fn(gen.output_dim(), m, |_, _| rng.random_range(-1.0..1.0));
    let check = check_backward(gen, &z, &alphas, &upstream, WEIGHTS_PER_GENERATOR, FD_STEP, seed)?;
    Ok(CaseResult {
        label,
        max_rel_error: check.max_rel_error,
    })
}

pub fn generator_cases(seed: u64) -> pgglonet::Result<Vec<CaseResult>> {
    let mut out = Vec::new();
    let activations = [Activation::Tanh, Activation::LeakyRelu, Activation::Identity];
    for (i, &act) in activations.iter().enumerate() {
        for (base, blocks, d) in [(1, 3, 8), (2, 2, 7), (4, 1, 8)] {
            let lower = vec![-2.0; d];
            let upper = vec![3.0; d];
            let s = seed + (10 * i + base) as u64;
            let gen = init_pg_generator(base, blocks, act, &lower, &upper, s)?;
            out.push(check_generator(&gen, format!("pg base={base} blocks={blocks} d={d} {act:?}"), s)?);
        }
        for (latent, hidden, d) in [(4, vec![16], 3), (2, vec![8, 8], 6)] {
            let lower = vec![-1.0; d];
            let upper = vec![1.0; d];
            let s = seed + (100 + 10 * i + latent) as u64;
            let gen = init_fc_generator(latent, &hidden, act, &lower, &upper, s)?;
            out.push(check_generator(&gen, format!("fc latent={latent} hidden={hidden:?} d={d} {act:?}"), s)?);
        }
    }
    Ok(out)
}

/// Runs the shipped suites, plus the objective of `config` when one is given.
pub fn run(config: Option<&ExperimentConfig>, seed: u64) -> pgglonet::Result<Report> {
    let mut objectives = shipped_objectives();
    if let Some(c) = config {
        objectives.push(c.objective.clone());
    }
    let objectives = objectives
        .iter()
        .enumerate()
        .map(|(k, o)| check_objective(o, seed.wrapping_add(k as u64)))
        .collect::<pgglonet::Result<Vec<_>>>()?;
    Ok(Report {
        objectives,
        generators: generator_cases(seed)?,
    })
}
