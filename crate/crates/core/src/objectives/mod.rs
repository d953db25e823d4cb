//! Analytic benchmark objectives with exact gradients.
//!
//! All objectives are minimization problems. The training engine maximizes the negated value.

mod functions;
mod lsgo;
mod registry;
mod transforms;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub use functions::{
    ackley_value, ackley_value_grad, make_ackley, make_modified_rastrigin, make_rastrigin,
    make_schwefel, make_sphere, rastrigin_value, rastrigin_value_grad, schwefel12_value,
    schwefel12_value_grad, schwefel_value, schwefel_value_grad, sphere_value, sphere_value_grad,
    SCHWEFEL_ARGMIN, SCHWEFEL_OFFSET,
};
pub use lsgo::{
    make_lsgo_composite, orthogonal_from_seed, BaseFunction, LsgoConfig, RotationSpec, ShiftSpec,
    Subcomponent, TransformFlags, TransformKind,
};
pub use registry::{build_objective, registered_objectives, ObjectiveConfig, ObjectiveInfo};
pub use transforms::{
    conditioning_weights, transform_irregularity, transform_irregularity_with_derivative,
    transform_symmetry_breaking, transform_symmetry_breaking_with_derivative,
};

/// A pure, reentrant scalar field with an analytic gradient.
pub trait Landscape: Send + Sync + fmt::Debug {
    fn value(&self, x: &[f64]) -> f64;

    /// Writes the gradient at `x` into `grad` and returns the value.
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnownOptimum {
    pub location: Vec<f64>,
    pub value: f64,
}

/// A benchmark objective: dimension, box bounds, value/gradient and optional known optimum.
#[derive(Clone)]
pub struct ObjectiveSpec {
    name: String,
    lower: Vec<f64>,
    upper: Vec<f64>,
    known_optimum: Option<KnownOptimum>,
    value_range: Option<(f64, f64)>,
    landscape: Arc<dyn Landscape>,
}

impl fmt::Debug for ObjectiveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObjectiveSpec")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("known_optimum", &self.known_optimum.as_ref().map(|o| o.value))
            .finish()
    }
}

pub(crate) fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        Err(Error::InvalidDimension("dimension must be at least 1".into()))
    } else {
        Ok(())
    }
}

impl ObjectiveSpec {
    pub fn new(
        name: impl Into<String>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        known_optimum: Option<KnownOptimum>,
        landscape: Arc<dyn Landscape>,
    ) -> Self {
        assert_eq!(lower.len(), upper.len(), "bound vectors differ in length");
        ObjectiveSpec {
            name: name.into(),
            lower,
            upper,
            known_optimum,
            value_range: None,
            landscape,
        }
    }

    /// Attaches a prior `(min, max)` estimate of the objective over the box, used for fixed
    /// normalization.
    pub fn with_value_range(mut self, lo: f64, hi: f64) -> Self {
        self.value_range = Some((lo, hi));
        self
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn known_optimum(&self) -> Option<&KnownOptimum> {
        self.known_optimum.as_ref()
    }

    pub fn value_range(&self) -> Option<(f64, f64)> {
        self.value_range
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim(), "design vector has wrong length");
        self.landscape.value(x)
    }

    pub fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        assert_eq!(x.len(), self.dim(), "design vector has wrong length");
        assert_eq!(grad.len(), self.dim(), "gradient buffer has wrong length");
        self.landscape.value_grad(x, grad)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.value_grad(x, &mut g);
        g
    }

    /// True when `f` lies within `eps` of the known optimum value.
    pub fn reached(&self, f: f64, eps: f64) -> bool {
        self.known_optimum
            .as_ref()
            .is_some_and(|o| f <= o.value + eps)
    }

    pub fn clamp_into_bounds(&self, x: &mut [f64]) {
        for ((xi, lo), hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *xi = xi.clamp(*lo, *hi);
        }
    }

    /// Translates the landscape so its origin sits at `shift`: `g(x) = f(x - shift)`.
    /// Bounds are unchanged; the known optimum moves with the shift.
    pub fn shifted(self, shift: Vec<f64>) -> Result<Self> {
        if shift.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: shift.len(),
            });
        }
        let known_optimum = self.known_optimum.as_ref().map(|o| KnownOptimum {
            location: o.location.iter().zip(&shift).map(|(a, b)| a + b).collect(),
            value: o.value,
        });
        Ok(ObjectiveSpec {
            name: format!("shifted_{}", self.name),
            lower: self.lower,
            upper: self.upper,
            known_optimum,
            value_range: self.value_range,
            landscape: Arc::new(Shifted {
                inner: self.landscape,
                shift,
            }),
        })
    }
}

#[derive(Debug)]
struct Shifted {
    inner: Arc<dyn Landscape>,
    shift: Vec<f64>,
}

impl Shifted {
    fn translate(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.shift).map(|(a, b)| a - b).collect()
    }
}

impl Landscape for Shifted {
    fn value(&self, x: &[f64]) -> f64 {
        self.inner.value(&self.translate(x))
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.inner.value_grad(&self.translate(x), grad)
    }
}

/// Shared evaluation accounting. One value+gradient call counts as one evaluation.
#[derive(Debug, Clone, Default)]
pub struct EvalCounter {
    count: u64,
    budget: Option<u64>,
}

impl EvalCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_budget(budget: u64) -> Self {
        EvalCounter {
            count: 0,
            budget: Some(budget),
        }
    }

    /// Counter continuing from `count` evaluations already spent, e.g. by an earlier stage.
    pub fn resumed(count: u64, budget: Option<u64>) -> Self {
        EvalCounter { count, budget }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn budget(&self) -> Option<u64> {
        self.budget
    }

    pub fn remaining(&self) -> u64 {
        self.budget
            .map_or(u64::MAX, |b| b.saturating_sub(self.count))
    }

    pub fn exhausted(&self) -> bool {
        self.remaining() == 0
    }

    /// Evaluates one point if budget remains.
    pub fn eval(&mut self, spec: &ObjectiveSpec, x: &[f64], grad: &mut [f64]) -> Option<f64> {
        if self.exhausted() {
            return None;
        }
        self.count += 1;
        Some(spec.value_grad(x, grad))
    }
}

/// Values and gradients for a batch of designs stored one per column.
#[derive(Debug, Clone)]
pub struct BatchEval {
    pub values: Vec<f64>,
    /// `d x M`, column `m` is the gradient at design `m`.
    pub gradients: DMatrix<f64>,
}

impl BatchEval {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Evaluates every column of `designs` (`d x M`). When the counter has a budget, evaluation
/// stops as soon as it is exhausted and only the evaluated prefix is returned.
pub fn batch_eval(
    spec: &ObjectiveSpec,
    designs: &DMatrix<f64>,
    counter: &mut EvalCounter,
) -> Result<BatchEval> {
    let d = spec.dim();
    if designs.nrows() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: designs.nrows(),
        });
    }
    let m = designs.ncols().min(counter.remaining().try_into().unwrap_or(usize::MAX));
    let mut values = Vec::with_capacity(m);
    let mut gradients = DMatrix::zeros(d, m);
    for j in 0..m {
        let x = designs.column(j);
        let mut g = gradients.column_mut(j);
        let v = counter
            .eval(spec, x.as_slice(), g.as_mut_slice())
            .expect("budget checked above");
        values.push(v);
    }
    Ok(BatchEval { values, gradients })
}

/// Relative gradient error `max|a - b| / max(max|a|, max|b|, 1)`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let scale = a
        .iter()
        .chain(b)
        .map(|v| v.abs())
        .fold(1.0, f64::max);
    diff / scale
}

/// Central finite-difference gradient with per-coordinate step `h * max(1, |x_i|)`.
pub fn finite_difference_gradient(spec: &ObjectiveSpec, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let step = h * x[i].abs().max(1.0);
            probe[i] = x[i] + step;
            let up = spec.value(&probe);
            probe[i] = x[i] - step;
            let down = spec.value(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_eval_empty() {
        let f = make_rastrigin(3).unwrap();
        let mut c = EvalCounter::new();
        let out = batch_eval(&f, &DMatrix::zeros(3, 0), &mut c).unwrap();
        assert!(out.is_empty());
        assert_eq!(out.gradients.ncols(), 0);
        assert_eq!(c.count(), 0);
    }

    #[test]
    fn batch_eval_identical_rows_and_accounting() {
        let f = make_ackley(4).unwrap();
        let x = [0.3, -1.2, 2.0, 0.7];
        let designs = DMatrix::from_fn(4, 3, |i, _| x[i]);
        let mut c = EvalCounter::new();
        let before = c.count();
        let out = batch_eval(&f, &designs, &mut c).unwrap();
        assert_eq!(c.count(), before + 3);
        assert_eq!(out.values[0], out.values[1]);
        assert_eq!(out.values[1], out.values[2]);
        assert_eq!(out.gradients.column(0), out.gradients.column(2));
    }

    #[test]
    fn batch_eval_dimension_mismatch() {
        let f = make_rastrigin(3).unwrap();
        let mut c = EvalCounter::new();
        assert!(matches!(
            batch_eval(&f, &DMatrix::zeros(2, 4), &mut c),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn batch_eval_respects_budget() {
        let f = make_sphere(2).unwrap();
        let mut c = EvalCounter::with_budget(5);
        let out = batch_eval(&f, &DMatrix::zeros(2, 4), &mut c).unwrap();
        assert_eq!(out.len(), 4);
        let out = batch_eval(&f, &DMatrix::zeros(2, 4), &mut c).unwrap();
        assert_eq!(out.len(), 1);
        assert!(c.exhausted());
        assert_eq!(c.count(), 5);
    }

    #[test]
    fn shifted_moves_optimum() {
        let f = make_rastrigin(2).unwrap().shifted(vec![1.5, -2.0]).unwrap();
        assert_eq!(f.value(&[1.5, -2.0]), 0.0);
        assert_eq!(f.known_optimum().unwrap().location, vec![1.5, -2.0]);
    }

    #[test]
    fn evaluation_is_pure() {
        let f = make_schwefel(3).unwrap();
        let x = [12.5, -300.1, 77.0];
        assert_eq!(f.value(&x).to_bits(), f.value(&x).to_bits());
    }
}
