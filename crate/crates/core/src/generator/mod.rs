//! Generative networks mapping standard-normal latents onto design vectors.
//!
//! Two families share the [`Generator`] contract: the progressive-growing network
//! ([`PgGenerator`]) whose growing blocks interpolate between duplication and a learned linear
//! map, and a plain fully connected network ([`FcGenerator`]).
//!
//! Batches are stored one sample per column: latents are `D x M`, designs are `d x M`.

mod checkpoint;
mod fc;
mod gradcheck;
mod pg;
mod schedule;

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use checkpoint::{load_checkpoint, save_checkpoint, write_checkpoint, read_checkpoint};
pub use fc::{init_fc_generator, FcGenerator};
pub use gradcheck::{check_backward, BackwardCheck};
pub use pg::{
    init_pg_generator, pg_architecture, pg_architecture_with_base, GrowingBlock, PgGenerator,
};
pub use schedule::AlphaSchedule;

static REVISION: AtomicU64 = AtomicU64::new(1);

/// Globally unique parameter revision id. Forward passes remember the revision they saw.
pub(crate) fn next_revision() -> u64 {
    REVISION.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    /// Leaky ReLU with negative slope 0.2.
    LeakyRelu,
    Identity,
}

const LEAKY_SLOPE: f64 = 0.2;

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::LeakyRelu => {
                if x > 0.0 {
                    x
                } else {
                    LEAKY_SLOPE * x
                }
            }
            Activation::Identity => x,
        }
    }

    /// Derivative at pre-activation `x`.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::LeakyRelu => {
                if x > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Identity => 1.0,
        }
    }

    pub(crate) fn id(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::LeakyRelu => "leaky_relu",
            Activation::Identity => "identity",
        }
    }

    pub(crate) fn from_id(s: &str) -> Option<Self> {
        match s {
            "tanh" => Some(Activation::Tanh),
            "leaky_relu" => Some(Activation::LeakyRelu),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Per-coordinate map from raw network output onto the objective box:
/// `x_i = center_i + half_i * s(u_i)`, with `s = tanh` when `squash` is set.
///
/// Networks whose last stage is already a tanh skip the extra squash so the full box stays
/// reachable.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputMap {
    center: Vec<f64>,
    half: Vec<f64>,
    squash: bool,
}

impl OutputMap {
    pub fn from_bounds(lower: &[f64], upper: &[f64], squash: bool) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::ShapeMismatch(
                "output bounds must be non-empty and of equal length".into(),
            ));
        }
        if lower.iter().zip(upper).any(|(l, u)| !(l < u)) {
            return Err(Error::InvalidParameter(
                "every lower bound must be below its upper bound".into(),
            ));
        }
        Ok(OutputMap {
            center: lower.iter().zip(upper).map(|(l, u)| 0.5 * (l + u)).collect(),
            half: lower.iter().zip(upper).map(|(l, u)| 0.5 * (u - l)).collect(),
            squash,
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn squash(&self) -> bool {
        self.squash
    }

    pub fn lower(&self) -> Vec<f64> {
        self.center.iter().zip(&self.half).map(|(c, h)| c - h).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.center.iter().zip(&self.half).map(|(c, h)| c + h).collect()
    }

    /// Maps the first `dim()` rows of `raw` onto designs.
    pub(crate) fn apply(&self, raw: &DMatrix<f64>) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, raw.ncols(), |i, j| {
            let u = raw[(i, j)];
            let s = if self.squash { u.tanh() } else { u };
            // tanh may round to +/-1 exactly; keep the result inside the box
            (self.center[i] + self.half[i] * s).clamp(self.center[i] - self.half[i], self.center[i] + self.half[i])
        })
    }

    /// Pulls a `d x M` design-space gradient back to the full raw output (zero-padded).
    pub(crate) fn pullback(&self, raw: &DMatrix<f64>, upstream: &DMatrix<f64>) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(raw.nrows(), raw.ncols());
        for j in 0..raw.ncols() {
            for i in 0..self.dim() {
                let ds = if self.squash {
                    let t = raw[(i, j)].tanh();
                    1.0 - t * t
                } else {
                    1.0
                };
                g[(i, j)] = upstream[(i, j)] * self.half[i] * ds;
            }
        }
        g
    }
}

/// Standard-normal latent batch, one sample per column.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentBatch {
    z: DMatrix<f64>,
    seed: Option<u64>,
}

impl LatentBatch {
    pub fn new(z: DMatrix<f64>) -> Self {
        LatentBatch { z, seed: None }
    }

    /// Reproducible batch drawn from its own seeded stream.
    pub fn from_seed(seed: u64, m: usize, dim: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        LatentBatch {
            seed: Some(seed),
            ..sample_latent(&mut rng, m, dim)
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.z.nrows()
    }

    pub fn len(&self) -> usize {
        self.z.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.z.ncols() == 0
    }
}

/// Draws `m` i.i.d. `N(0, I_dim)` latents.
pub fn sample_latent<R: Rng + ?Sized>(rng: &mut R, m: usize, dim: usize) -> LatentBatch {
    LatentBatch::new(DMatrix::from_fn(dim, m, |_, _| rng.sample(StandardNormal)))
}

/// Intermediates of one forward pass, needed by `backward`.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub(crate) revision: u64,
    pub(crate) alphas: Vec<f64>,
    /// Input of each stage (latent first).
    pub(crate) inputs: Vec<DMatrix<f64>>,
    /// Pre-activation of each stage.
    pub(crate) pre: Vec<DMatrix<f64>>,
    pub(crate) raw: DMatrix<f64>,
    pub(crate) designs: DMatrix<f64>,
}

impl ForwardPass {
    /// `d x M` designs inside the objective box.
    pub fn designs(&self) -> &DMatrix<f64> {
        &self.designs
    }

    /// Network output before the output map (full `2^L * D` rows for the PG network).
    pub fn raw_output(&self) -> &DMatrix<f64> {
        &self.raw
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }
}

/// Shared contract of the generator families.
pub trait Generator {
    fn latent_dim(&self) -> usize;

    fn output_dim(&self) -> usize;

    /// Number of scheduled blend coefficients expected by `forward`.
    fn num_alphas(&self) -> usize;

    fn params(&self) -> &[DMatrix<f64>];

    /// Mutable parameter access; invalidates outstanding forward passes.
    fn params_mut(&mut self) -> &mut [DMatrix<f64>];

    fn forward(&self, z: &LatentBatch, alphas: &[f64]) -> Result<ForwardPass>;

    /// Reverse-mode gradient of `sum_m <upstream_m, x_m>` with respect to every parameter,
    /// alphas held constant. `upstream` is `d x M`.
    fn backward(&self, pass: &ForwardPass, upstream: &DMatrix<f64>) -> Result<Vec<DMatrix<f64>>>;

    fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}

/// Either generator family, selected at runtime.
#[derive(Debug, Clone)]
pub enum AnyGenerator {
    Pg(PgGenerator),
    Fc(FcGenerator),
}

macro_rules! delegate {
    ($self:ident, $g:ident => $e:expr) => {
        match $self {
            AnyGenerator::Pg($g) => $e,
            AnyGenerator::Fc($g) => $e,
        }
    };
}

impl Generator for AnyGenerator {
    fn latent_dim(&self) -> usize {
        delegate!(self, g => g.latent_dim())
    }

    fn output_dim(&self) -> usize {
        delegate!(self, g => g.output_dim())
    }

    fn num_alphas(&self) -> usize {
        delegate!(self, g => g.num_alphas())
    }

    fn params(&self) -> &[DMatrix<f64>] {
        delegate!(self, g => g.params())
    }

    fn params_mut(&mut self) -> &mut [DMatrix<f64>] {
        delegate!(self, g => g.params_mut())
    }

    fn forward(&self, z: &LatentBatch, alphas: &[f64]) -> Result<ForwardPass> {
        delegate!(self, g => g.forward(z, alphas))
    }

    fn backward(&self, pass: &ForwardPass, upstream: &DMatrix<f64>) -> Result<Vec<DMatrix<f64>>> {
        delegate!(self, g => g.backward(pass, upstream))
    }
}

pub(crate) fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, std: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| std * rng.sample::<f64, _>(StandardNormal))
}

pub(crate) fn check_upstream(pass: &ForwardPass, upstream: &DMatrix<f64>) -> Result<()> {
    if upstream.shape() != pass.designs.shape() {
        return Err(Error::ShapeMismatch(format!(
            "upstream is {}x{}, designs are {}x{}",
            upstream.nrows(),
            upstream.ncols(),
            pass.designs.nrows(),
            pass.designs.ncols()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latent_determinism() {
        let a = LatentBatch::from_seed(42, 16, 3);
        let b = LatentBatch::from_seed(42, 16, 3);
        assert_eq!(a, b);
        assert_eq!(a.seed(), Some(42));
    }

    #[test]
    fn latent_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let dim = 4;
        let z = sample_latent(&mut rng, 100_000, dim);
        let n = (100_000 * dim) as f64;
        let mean = z.matrix().sum() / n;
        let var = z.matrix().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() <= 0.02, "mean {mean}");
        assert!((var - 1.0).abs() <= 0.03, "var {var}");
    }

    #[test]
    fn activations() {
        assert_eq!(Activation::LeakyRelu.apply(-1.0), -0.2);
        assert_eq!(Activation::LeakyRelu.derivative(2.0), 1.0);
        assert_eq!(Activation::Identity.apply(3.5), 3.5);
        assert!((Activation::Tanh.derivative(0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn output_map_rejects_bad_bounds() {
        assert!(OutputMap::from_bounds(&[1.0], &[0.0], true).is_err());
        assert!(OutputMap::from_bounds(&[], &[], true).is_err());
    }
}
