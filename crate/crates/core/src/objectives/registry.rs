use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    make_ackley, make_lsgo_composite, make_modified_rastrigin, make_rastrigin, make_schwefel,
    make_sphere, LsgoConfig, ObjectiveSpec,
};
use crate::error::Result;

fn default_shift_fraction() -> f64 {
    0.8
}

/// Objective selection as it appears in experiment configs, tagged by `name`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveConfig {
    ModifiedRastrigin {
        dim: usize,
        rho: f64,
    },
    Rastrigin {
        dim: usize,
    },
    ShiftedRastrigin {
        dim: usize,
        seed: u64,
        #[serde(default = "default_shift_fraction")]
        fraction: f64,
    },
    Schwefel {
        dim: usize,
    },
    Ackley {
        dim: usize,
    },
    Sphere {
        dim: usize,
    },
    LsgoComposite {
        config: LsgoConfig,
    },
}

impl ObjectiveConfig {
    pub fn dim(&self) -> usize {
        match self {
            ObjectiveConfig::ModifiedRastrigin { dim, .. }
            | ObjectiveConfig::Rastrigin { dim }
            | ObjectiveConfig::ShiftedRastrigin { dim, .. }
            | ObjectiveConfig::Schwefel { dim }
            | ObjectiveConfig::Ackley { dim }
            | ObjectiveConfig::Sphere { dim } => *dim,
            ObjectiveConfig::LsgoComposite { config } => config.dim,
        }
    }

    pub fn build(&self) -> Result<ObjectiveSpec> {
        build_objective(self)
    }
}

pub fn build_objective(config: &ObjectiveConfig) -> Result<ObjectiveSpec> {
    match config {
        ObjectiveConfig::ModifiedRastrigin { dim, rho } => make_modified_rastrigin(*dim, *rho),
        ObjectiveConfig::Rastrigin { dim } => make_rastrigin(*dim),
        ObjectiveConfig::ShiftedRastrigin {
            dim,
            seed,
            fraction,
        } => {
            let base = make_rastrigin(*dim)?;
            let half = fraction * base.upper()[0];
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let shift = (0..*dim).map(|_| rng.random_range(-half..=half)).collect();
            Ok(base
                .shifted(shift)?
                .renamed(format!("shifted_rastrigin[seed={seed}]")))
        }
        ObjectiveConfig::Schwefel { dim } => make_schwefel(*dim),
        ObjectiveConfig::Ackley { dim } => make_ackley(*dim),
        ObjectiveConfig::Sphere { dim } => make_sphere(*dim),
        ObjectiveConfig::LsgoComposite { config } => make_lsgo_composite(config),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ObjectiveInfo {
    pub name: &'static str,
    pub params: &'static str,
    pub description: &'static str,
}

pub fn registered_objectives() -> &'static [ObjectiveInfo] {
    &[
        ObjectiveInfo {
            name: "modified_rastrigin",
            params: "dim (>=1), rho (>=0)",
            description: "rho*d + sum(x^2 - rho*cos(2 pi x)) on [-5.12, 5.12]^d; convex at rho=0",
        },
        ObjectiveInfo {
            name: "rastrigin",
            params: "dim (>=1)",
            description: "modified_rastrigin with rho = 10",
        },
        ObjectiveInfo {
            name: "shifted_rastrigin",
            params: "dim (>=1), seed, fraction (default 0.8)",
            description: "rastrigin translated to a seeded optimum within fraction*5.12 of the origin",
        },
        ObjectiveInfo {
            name: "schwefel",
            params: "dim (>=1)",
            description: "418.9829*d - sum(x sin(sqrt|x|)) on [-500, 500]^d",
        },
        ObjectiveInfo {
            name: "ackley",
            params: "dim (>=1)",
            description: "Ackley (a=20, b=0.2, c=2 pi) on [-32.768, 32.768]^d",
        },
        ObjectiveInfo {
            name: "sphere",
            params: "dim (>=1)",
            description: "sum(x^2) on [-5.12, 5.12]^d",
        },
        ObjectiveInfo {
            name: "lsgo_composite",
            params: "config: {dim, subcomponents[{size, weight, base, rotation}], tail_base, shift, transforms, transform_order, conditioning_exponent, asymmetry_beta, bound}",
            description: "shifted/rotated imbalanced subcomponents with irregularity, symmetry-breaking and conditioning transforms",
        },
    ]
}
