//! LSGO-style composite generator: shifted, rotated, imbalanced subcomponents over a set of
//! base functions, with optional irregularity, symmetry-breaking and conditioning transforms.
//!
//! `value(x) = sum_k w_k * base_k(T(R_k (x - o)_k)) + tail(T((x - o)_tail))` where `T` applies
//! the enabled transforms in `transform_order`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::functions::{
    ackley_value_grad, rastrigin_value_grad, schwefel12_value_grad, sphere_value_grad,
};
use super::transforms::{
    conditioning_weights, transform_irregularity_with_derivative,
    transform_symmetry_breaking_with_derivative,
};
use super::{check_dim, KnownOptimum, Landscape, ObjectiveSpec};
use crate::error::{Error, Result};

const ORTHOGONALITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseFunction {
    /// Rastrigin with amplitude 10.
    Rastrigin,
    Ackley,
    /// Schwefel's problem 1.2 (squared prefix sums), non-separable with minimum 0 at 0.
    Schwefel,
    Sphere,
}

impl BaseFunction {
    fn value_grad(self, z: &[f64], grad: &mut [f64]) -> f64 {
        match self {
            BaseFunction::Rastrigin => rastrigin_value_grad(z, 10.0, grad),
            BaseFunction::Ackley => ackley_value_grad(z, grad),
            BaseFunction::Schwefel => schwefel12_value_grad(z, grad),
            BaseFunction::Sphere => sphere_value_grad(z, grad),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RotationSpec {
    Identity,
    /// Orthogonalized standard-normal matrix drawn from `seed`.
    Seeded { seed: u64 },
    /// Row-major orthogonal matrix.
    Explicit { matrix: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShiftSpec {
    Zero,
    /// Uniform in `[-fraction * bound, fraction * bound]` per coordinate.
    Seeded { seed: u64, fraction: f64 },
    Explicit { values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    Irregularity,
    SymmetryBreaking,
    IllConditioning,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformFlags {
    pub ill_conditioning: bool,
    pub irregularity: bool,
    pub symmetry_breaking: bool,
}

impl TransformFlags {
    pub const NONE: TransformFlags = TransformFlags {
        ill_conditioning: false,
        irregularity: false,
        symmetry_breaking: false,
    };

    pub const ALL: TransformFlags = TransformFlags {
        ill_conditioning: true,
        irregularity: true,
        symmetry_breaking: true,
    };

    fn enabled(&self, kind: TransformKind) -> bool {
        match kind {
            TransformKind::Irregularity => self.irregularity,
            TransformKind::SymmetryBreaking => self.symmetry_breaking,
            TransformKind::IllConditioning => self.ill_conditioning,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Subcomponent {
    pub size: usize,
    pub weight: f64,
    pub base: BaseFunction,
    pub rotation: RotationSpec,
}

fn default_tail_base() -> BaseFunction {
    BaseFunction::Rastrigin
}

fn default_bound() -> f64 {
    5.12
}

fn default_conditioning_exponent() -> f64 {
    1.0
}

fn default_beta() -> f64 {
    0.2
}

fn default_order() -> Vec<TransformKind> {
    vec![
        TransformKind::Irregularity,
        TransformKind::SymmetryBreaking,
        TransformKind::IllConditioning,
    ]
}

fn default_flags() -> TransformFlags {
    TransformFlags::ALL
}

fn default_shift() -> ShiftSpec {
    ShiftSpec::Zero
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LsgoConfig {
    pub dim: usize,
    pub subcomponents: Vec<Subcomponent>,
    /// Base function of the separable tail (coordinates not covered by any subcomponent).
    #[serde(default = "default_tail_base")]
    pub tail_base: BaseFunction,
    #[serde(default = "default_shift")]
    pub shift: ShiftSpec,
    #[serde(default = "default_flags")]
    pub transforms: TransformFlags,
    #[serde(default = "default_order")]
    pub transform_order: Vec<TransformKind>,
    #[serde(default = "default_conditioning_exponent")]
    pub conditioning_exponent: f64,
    #[serde(default = "default_beta")]
    pub asymmetry_beta: f64,
    /// Symmetric box half-width.
    #[serde(default = "default_bound")]
    pub bound: f64,
}

impl LsgoConfig {
    /// Plain sum of base functions: no shift, no transforms, identity rotations, unit weights.
    pub fn plain(dim: usize, sizes: &[usize], base: BaseFunction) -> Self {
        LsgoConfig {
            dim,
            subcomponents: sizes
                .iter()
                .map(|&size| Subcomponent {
                    size,
                    weight: 1.0,
                    base,
                    rotation: RotationSpec::Identity,
                })
                .collect(),
            tail_base: base,
            shift: ShiftSpec::Zero,
            transforms: TransformFlags::NONE,
            transform_order: default_order(),
            conditioning_exponent: default_conditioning_exponent(),
            asymmetry_beta: default_beta(),
            bound: default_bound(),
        }
    }

    /// Partially separable composite: rotated subcomponents of the given sizes with
    /// log-normal imbalance weights `10^N(0,1)`, a seeded shift and all transforms enabled.
    /// Every random quantity derives from `seed`.
    pub fn partially_separable(
        dim: usize,
        sizes: &[usize],
        base: BaseFunction,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let subcomponents = sizes
            .iter()
            .enumerate()
            .map(|(k, &size)| {
                let exponent: f64 = rng.sample(StandardNormal);
                Subcomponent {
                    size,
                    weight: 10f64.powf(exponent),
                    base,
                    rotation: RotationSpec::Seeded {
                        seed: seed.wrapping_add(k as u64 + 1),
                    },
                }
            })
            .collect();
        LsgoConfig {
            subcomponents,
            shift: ShiftSpec::Seeded {
                seed,
                fraction: 0.8,
            },
            transforms: TransformFlags::ALL,
            ..LsgoConfig::plain(dim, &[], base)
        }
    }

    fn validate(&self) -> Result<()> {
        check_dim(self.dim)?;
        let covered: usize = self.subcomponents.iter().map(|s| s.size).sum();
        if covered > self.dim {
            return Err(Error::InvalidParameter(format!(
                "subcomponent sizes sum to {covered}, exceeding dimension {}",
                self.dim
            )));
        }
        for (k, s) in self.subcomponents.iter().enumerate() {
            if s.size == 0 {
                return Err(Error::InvalidParameter(format!(
                    "subcomponent {k} has size 0"
                )));
            }
            if !(s.weight > 0.0 && s.weight.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "subcomponent {k} weight must be strictly positive, got {}",
                    s.weight
                )));
            }
        }
        if !(self.bound > 0.0) {
            return Err(Error::InvalidParameter("bound must be positive".into()));
        }
        if self.asymmetry_beta < 0.0 {
            return Err(Error::InvalidParameter(
                "asymmetry_beta must be non-negative".into(),
            ));
        }
        Ok(())
    }

    fn seed_tag(&self) -> String {
        let mut tags = Vec::new();
        if let ShiftSpec::Seeded { seed, .. } = self.shift {
            tags.push(format!("shift_seed={seed}"));
        }
        let rot: Vec<String> = self
            .subcomponents
            .iter()
            .filter_map(|s| match s.rotation {
                RotationSpec::Seeded { seed } => Some(seed.to_string()),
                _ => None,
            })
            .collect();
        if !rot.is_empty() {
            tags.push(format!("rotation_seeds={}", rot.join(":")));
        }
        tags.join(",")
    }
}

/// Orthogonal `n x n` matrix from the QR factorization of a seeded standard-normal matrix.
/// Column signs are fixed so the diagonal of `R` is positive.
pub fn orthogonal_from_seed(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gaussian = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = gaussian.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn check_orthogonal(m: &DMatrix<f64>, k: usize) -> Result<()> {
    let n = m.nrows();
    let gram = m.transpose() * m;
    let err = (gram - DMatrix::<f64>::identity(n, n)).amax();
    if err > ORTHOGONALITY_TOL {
        return Err(Error::InvalidParameter(format!(
            "rotation for subcomponent {k} is not orthogonal (max |R^T R - I| = {err:.3e})"
        )));
    }
    Ok(())
}

#[derive(Debug)]
struct Block {
    start: usize,
    size: usize,
    weight: f64,
    base: BaseFunction,
    rotation: Option<DMatrix<f64>>,
    conditioning: Vec<f64>,
}

#[derive(Debug)]
struct LsgoLandscape {
    blocks: Vec<Block>,
    shift: Vec<f64>,
    order: Vec<TransformKind>,
    beta: f64,
}

impl LsgoLandscape {
    fn block_value_grad(&self, block: &Block, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let range = block.start..block.start + block.size;
        let u: Vec<f64> = x[range.clone()]
            .iter()
            .zip(&self.shift[range.clone()])
            .map(|(a, b)| a - b)
            .collect();
        let mut v = match &block.rotation {
            Some(r) => (r * DVector::from_vec(u)).data.into(),
            None => u,
        };
        let mut jac = vec![1.0; block.size];
        for kind in &self.order {
            let (out, dv) = match kind {
                TransformKind::Irregularity => transform_irregularity_with_derivative(&v),
                TransformKind::SymmetryBreaking => {
                    transform_symmetry_breaking_with_derivative(&v, self.beta)
                }
                TransformKind::IllConditioning => (
                    v.iter().zip(&block.conditioning).map(|(a, w)| a * w).collect(),
                    block.conditioning.clone(),
                ),
            };
            v = out;
            for (j, d) in jac.iter_mut().zip(dv) {
                *j *= d;
            }
        }
        let mut g = vec![0.0; block.size];
        let value = block.base.value_grad(&v, &mut g);
        if let Some(grad) = grad {
            for (gi, j) in g.iter_mut().zip(&jac) {
                *gi *= j;
            }
            let g = match &block.rotation {
                Some(r) => r.tr_mul(&DVector::from_vec(g)).data.into(),
                None => g,
            };
            for (out, gi) in grad[range].iter_mut().zip(g) {
                *out = block.weight * gi;
            }
        }
        block.weight * value
    }
}

impl Landscape for LsgoLandscape {
    fn value(&self, x: &[f64]) -> f64 {
        self.blocks
            .iter()
            .map(|b| self.block_value_grad(b, x, None))
            .sum()
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.blocks
            .iter()
            .map(|b| self.block_value_grad(b, x, Some(&mut *grad)))
            .sum()
    }
}

/// Builds the composite objective described by `config`.
pub fn make_lsgo_composite(config: &LsgoConfig) -> Result<ObjectiveSpec> {
    config.validate()?;
    let dim = config.dim;
    let shift = match &config.shift {
        ShiftSpec::Zero => vec![0.0; dim],
        ShiftSpec::Seeded { seed, fraction } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let half = fraction * config.bound;
            (0..dim).map(|_| rng.random_range(-half..=half)).collect()
        }
        ShiftSpec::Explicit { values } => {
            if values.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: values.len(),
                });
            }
            values.clone()
        }
    };

    let exponent = if config.transforms.ill_conditioning {
        Some(config.conditioning_exponent)
    } else {
        None
    };
    let conditioning =
        |n: usize| exponent.map_or_else(|| vec![1.0; n], |e| conditioning_weights(n, e));

    let mut blocks = Vec::new();
    let mut start = 0;
    for (k, sub) in config.subcomponents.iter().enumerate() {
        let rotation = match &sub.rotation {
            RotationSpec::Identity => None,
            RotationSpec::Seeded { seed } => Some(orthogonal_from_seed(sub.size, *seed)),
            RotationSpec::Explicit { matrix } => {
                if matrix.len() != sub.size || matrix.iter().any(|r| r.len() != sub.size) {
                    return Err(Error::ShapeMismatch(format!(
                        "rotation for subcomponent {k} must be {0}x{0}",
                        sub.size
                    )));
                }
                let m = DMatrix::from_fn(sub.size, sub.size, |i, j| matrix[i][j]);
                check_orthogonal(&m, k)?;
                Some(m)
            }
        };
        blocks.push(Block {
            start,
            size: sub.size,
            weight: sub.weight,
            base: sub.base,
            rotation,
            conditioning: conditioning(sub.size),
        });
        start += sub.size;
    }
    if start < dim {
        blocks.push(Block {
            start,
            size: dim - start,
            weight: 1.0,
            base: config.tail_base,
            rotation: None,
            conditioning: conditioning(dim - start),
        });
    }

    let order = config
        .transform_order
        .iter()
        .copied()
        .filter(|k| config.transforms.enabled(*k))
        .collect();

    let tag = config.seed_tag();
    let name = if tag.is_empty() {
        format!("lsgo_composite[d={dim},k={}]", config.subcomponents.len())
    } else {
        format!(
            "lsgo_composite[d={dim},k={},{tag}]",
            config.subcomponents.len()
        )
    };
    Ok(ObjectiveSpec::new(
        name,
        vec![-config.bound; dim],
        vec![config.bound; dim],
        Some(KnownOptimum {
            location: shift.clone(),
            value: 0.0,
        }),
        Arc::new(LsgoLandscape {
            blocks,
            shift,
            order,
            beta: config.asymmetry_beta,
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::make_rastrigin;
    use approx::assert_relative_eq;

    #[test]
    fn single_plain_block_equals_rastrigin() {
        let cfg = LsgoConfig::plain(6, &[6], BaseFunction::Rastrigin);
        let f = make_lsgo_composite(&cfg).unwrap();
        let r = make_rastrigin(6).unwrap();
        let x = [0.3, -1.1, 2.7, 4.0, -0.01, 1.5];
        assert_relative_eq!(f.value(&x), r.value(&x), epsilon = 1e-12);
        let (ga, gb) = (f.gradient(&x), r.gradient(&x));
        for (a, b) in ga.iter().zip(&gb) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn value_at_shift_is_zero() {
        let cfg = LsgoConfig::partially_separable(40, &[10, 5, 15], BaseFunction::Rastrigin, 3);
        let f = make_lsgo_composite(&cfg).unwrap();
        let opt = f.known_optimum().unwrap().clone();
        assert!(f.value(&opt.location).abs() <= 1e-9);
    }

    #[test]
    fn seeded_rotation_is_orthogonal() {
        let q = orthogonal_from_seed(25, 11);
        let err = (q.transpose() * &q - DMatrix::<f64>::identity(25, 25)).amax();
        assert!(err < 1e-10);
    }

    #[test]
    fn oversized_subcomponents_rejected() {
        let cfg = LsgoConfig::plain(5, &[3, 3], BaseFunction::Sphere);
        assert!(make_lsgo_composite(&cfg).is_err());
    }

    #[test]
    fn non_orthogonal_rotation_rejected() {
        let mut cfg = LsgoConfig::plain(2, &[2], BaseFunction::Sphere);
        cfg.subcomponents[0].rotation = RotationSpec::Explicit {
            matrix: vec![vec![1.0, 0.5], vec![0.0, 1.0]],
        };
        assert!(make_lsgo_composite(&cfg).is_err());
    }

    #[test]
    fn non_positive_weight_rejected() {
        let mut cfg = LsgoConfig::plain(4, &[2], BaseFunction::Sphere);
        cfg.subcomponents[0].weight = 0.0;
        assert!(make_lsgo_composite(&cfg).is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = LsgoConfig::partially_separable(100, &[20, 30], BaseFunction::Ackley, 9);
        let text = serde_json::to_string(&cfg).unwrap();
        let back: LsgoConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
        let a = make_lsgo_composite(&cfg).unwrap();
        let b = make_lsgo_composite(&back).unwrap();
        let x = vec![0.25; 100];
        assert_eq!(a.value(&x).to_bits(), b.value(&x).to_bits());
        assert!(a.name().contains("shift_seed=9"));
    }
}
