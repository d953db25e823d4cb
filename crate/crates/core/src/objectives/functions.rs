//! Closed-form benchmark landscapes and their exact gradients.
//!
//! Every function here is a minimization problem. Each comes as a pair of free functions over
//! slices (`*_value`, `*_value_grad`) so the LSGO composite can reuse them as base functions, plus
//! a `make_*` constructor that wraps them into an [`ObjectiveSpec`].

use std::f64::consts::{E, PI};
use std::sync::Arc;

use super::{check_dim, KnownOptimum, Landscape, ObjectiveSpec};
use crate::error::Result;

const TWO_PI: f64 = 2.0 * PI;

/// Offset making the standard Schwefel function non-negative on its box.
pub const SCHWEFEL_OFFSET: f64 = 418.9829;
/// Per-coordinate minimizer of the standard Schwefel function.
pub const SCHWEFEL_ARGMIN: f64 = 420.968_746;

const RASTRIGIN_BOUND: f64 = 5.12;
const SCHWEFEL_BOUND: f64 = 500.0;
const ACKLEY_BOUND: f64 = 32.768;

pub fn rastrigin_value(x: &[f64], rho: f64) -> f64 {
    let n = x.len() as f64;
    rho * n
        + x.iter()
            .map(|&xi| xi * xi - rho * (TWO_PI * xi).cos())
            .sum::<f64>()
}

pub fn rastrigin_value_grad(x: &[f64], rho: f64, grad: &mut [f64]) -> f64 {
    for (g, &xi) in grad.iter_mut().zip(x) {
        *g = 2.0 * xi + TWO_PI * rho * (TWO_PI * xi).sin();
    }
    rastrigin_value(x, rho)
}

pub fn sphere_value(x: &[f64]) -> f64 {
    x.iter().map(|xi| xi * xi).sum()
}

pub fn sphere_value_grad(x: &[f64], grad: &mut [f64]) -> f64 {
    for (g, &xi) in grad.iter_mut().zip(x) {
        *g = 2.0 * xi;
    }
    sphere_value(x)
}

pub fn schwefel_value(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    SCHWEFEL_OFFSET * n - x.iter().map(|&xi| xi * xi.abs().sqrt().sin()).sum::<f64>()
}

/// d/dx [x sin(sqrt|x|)] = sin(sqrt|x|) + (sqrt|x| / 2) cos(sqrt|x|); the second term vanishes at 0.
pub fn schwefel_value_grad(x: &[f64], grad: &mut [f64]) -> f64 {
    for (g, &xi) in grad.iter_mut().zip(x) {
        let r = xi.abs().sqrt();
        *g = if xi == 0.0 {
            0.0
        } else {
            -(r.sin() + 0.5 * r * r.cos())
        };
    }
    schwefel_value(x)
}

pub fn ackley_value(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sq = x.iter().map(|xi| xi * xi).sum::<f64>();
    let cos = x.iter().map(|&xi| (TWO_PI * xi).cos()).sum::<f64>();
    -20.0 * (-0.2 * (sq / n).sqrt()).exp() - (cos / n).exp() + 20.0 + E
}

pub fn ackley_value_grad(x: &[f64], grad: &mut [f64]) -> f64 {
    let n = x.len() as f64;
    let sq = x.iter().map(|xi| xi * xi).sum::<f64>();
    let cos = x.iter().map(|&xi| (TWO_PI * xi).cos()).sum::<f64>();
    let r = (sq / n).sqrt();
    let radial = (-0.2 * r).exp();
    let periodic = (cos / n).exp();
    for (g, &xi) in grad.iter_mut().zip(x) {
        // radial singularity at the origin resolved to zero
        let radial_term = if r > 0.0 {
            4.0 * radial * xi / (n * r)
        } else {
            0.0
        };
        *g = radial_term + periodic * TWO_PI / n * (TWO_PI * xi).sin();
    }
    -20.0 * radial - periodic + 20.0 + E
}

/// Schwefel's problem 1.2: sum of squared prefix sums. Used as a non-separable LSGO base.
pub fn schwefel12_value(x: &[f64]) -> f64 {
    let mut prefix = 0.0;
    let mut total = 0.0;
    for &xi in x {
        prefix += xi;
        total += prefix * prefix;
    }
    total
}

pub fn schwefel12_value_grad(x: &[f64], grad: &mut [f64]) -> f64 {
    let mut prefix = 0.0;
    let mut total = 0.0;
    for (g, &xi) in grad.iter_mut().zip(x) {
        prefix += xi;
        total += prefix * prefix;
        *g = 2.0 * prefix;
    }
    // suffix sums of 2 * prefix_i
    let mut acc = 0.0;
    for g in grad.iter_mut().rev() {
        acc += *g;
        *g = acc;
    }
    total
}

#[derive(Debug)]
struct ModifiedRastrigin {
    rho: f64,
}

impl Landscape for ModifiedRastrigin {
    fn value(&self, x: &[f64]) -> f64 {
        rastrigin_value(x, self.rho)
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        rastrigin_value_grad(x, self.rho, grad)
    }
}

#[derive(Debug)]
struct Sphere;

impl Landscape for Sphere {
    fn value(&self, x: &[f64]) -> f64 {
        sphere_value(x)
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        sphere_value_grad(x, grad)
    }
}

#[derive(Debug)]
struct Schwefel;

impl Landscape for Schwefel {
    fn value(&self, x: &[f64]) -> f64 {
        schwefel_value(x)
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        schwefel_value_grad(x, grad)
    }
}

#[derive(Debug)]
struct Ackley;

impl Landscape for Ackley {
    fn value(&self, x: &[f64]) -> f64 {
        ackley_value(x)
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        ackley_value_grad(x, grad)
    }
}

/// Rastrigin with tunable modulation amplitude `rho`:
/// `f(x) = rho*d + sum(x_i^2 - rho*cos(2*pi*x_i))`. Convex at `rho = 0`.
pub fn make_modified_rastrigin(dim: usize, rho: f64) -> Result<ObjectiveSpec> {
    check_dim(dim)?;
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(crate::Error::InvalidParameter(format!(
            "rho must be a finite non-negative number, got {rho}"
        )));
    }
    // max of x^2 - rho*cos(2 pi x) on the box is below bound^2 + rho
    let upper = dim as f64 * (2.0 * rho + RASTRIGIN_BOUND * RASTRIGIN_BOUND);
    Ok(ObjectiveSpec::new(
        format!("modified_rastrigin[rho={rho}]"),
        vec![-RASTRIGIN_BOUND; dim],
        vec![RASTRIGIN_BOUND; dim],
        Some(KnownOptimum {
            location: vec![0.0; dim],
            value: 0.0,
        }),
        Arc::new(ModifiedRastrigin { rho }),
    )
    .with_value_range(0.0, upper))
}

/// Standard Rastrigin (amplitude 10).
pub fn make_rastrigin(dim: usize) -> Result<ObjectiveSpec> {
    Ok(make_modified_rastrigin(dim, 10.0)?.renamed("rastrigin"))
}

pub fn make_sphere(dim: usize) -> Result<ObjectiveSpec> {
    check_dim(dim)?;
    let upper = dim as f64 * RASTRIGIN_BOUND * RASTRIGIN_BOUND;
    Ok(ObjectiveSpec::new(
        "sphere",
        vec![-RASTRIGIN_BOUND; dim],
        vec![RASTRIGIN_BOUND; dim],
        Some(KnownOptimum {
            location: vec![0.0; dim],
            value: 0.0,
        }),
        Arc::new(Sphere),
    )
    .with_value_range(0.0, upper))
}

/// Standard Schwefel function on `[-500, 500]^d`. The known optimum value is the function
/// evaluated at the tabulated minimizer (about `1.3e-5 * d`, not exactly zero).
pub fn make_schwefel(dim: usize) -> Result<ObjectiveSpec> {
    check_dim(dim)?;
    let location = vec![SCHWEFEL_ARGMIN; dim];
    let value = schwefel_value(&location);
    Ok(ObjectiveSpec::new(
        "schwefel",
        vec![-SCHWEFEL_BOUND; dim],
        vec![SCHWEFEL_BOUND; dim],
        Some(KnownOptimum { location, value }),
        Arc::new(Schwefel),
    )
    .with_value_range(value, 2.0 * SCHWEFEL_OFFSET * dim as f64))
}

/// Ackley with a = 20, b = 0.2, c = 2*pi.
pub fn make_ackley(dim: usize) -> Result<ObjectiveSpec> {
    check_dim(dim)?;
    Ok(ObjectiveSpec::new(
        "ackley",
        vec![-ACKLEY_BOUND; dim],
        vec![ACKLEY_BOUND; dim],
        Some(KnownOptimum {
            location: vec![0.0; dim],
            value: 0.0,
        }),
        Arc::new(Ackley),
    )
    .with_value_range(0.0, 20.0 + E))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn modified_rastrigin_hand_values() {
        let f = make_modified_rastrigin(2, 0.0).unwrap();
        assert_eq!(f.value(&[1.0, 1.0]), 2.0);
        let f = make_modified_rastrigin(2, 2.0).unwrap();
        assert_relative_eq!(f.value(&[0.5, 0.0]), 4.25, epsilon = 1e-12);
        let f = make_modified_rastrigin(10, 10.0).unwrap();
        assert_eq!(f.value(&[0.0; 10]), 0.0);
    }

    #[test]
    fn rastrigin_matches_modified_with_rho_ten() {
        let f = make_rastrigin(3).unwrap();
        assert_eq!(f.value(&[0.0; 3]), 0.0);
        let f1 = make_rastrigin(1).unwrap();
        assert_relative_eq!(f1.value(&[0.5]), 20.25, epsilon = 1e-12);
        let f2 = make_rastrigin(2).unwrap();
        let mut g = [1.0; 2];
        f2.value_grad(&[0.0, 0.0], &mut g);
        assert_eq!(g, [0.0, 0.0]);
        let m = make_modified_rastrigin(4, 10.0).unwrap();
        let x = [0.3, -1.7, 2.2, 4.9];
        assert_eq!(make_rastrigin(4).unwrap().value(&x), m.value(&x));
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(make_modified_rastrigin(0, 1.0).is_err());
        assert!(make_rastrigin(0).is_err());
        assert!(make_schwefel(0).is_err());
        assert!(make_ackley(0).is_err());
    }

    #[test]
    fn negative_rho_rejected() {
        assert!(make_modified_rastrigin(2, -1.0).is_err());
    }

    #[test]
    fn schwefel_values() {
        let f = make_schwefel(2).unwrap();
        assert_relative_eq!(f.value(&[0.0, 0.0]), 837.9658, epsilon = 1e-9);
        let f1 = make_schwefel(1).unwrap();
        assert!(f1.value(&[420.9687]) <= 1e-3);
        let mut g = [9.0; 2];
        f.value_grad(&[0.0, 100.0], &mut g);
        assert_eq!(g[0], 0.0);
    }

    #[test]
    fn ackley_values() {
        let f = make_ackley(5).unwrap();
        assert!(f.value(&[0.0; 5]).abs() < 1e-12);
        let f1 = make_ackley(1).unwrap();
        assert_relative_eq!(f1.value(&[1.0]), 3.625384938440363, epsilon = 1e-12);
        let mut g = [1.0; 5];
        f.value_grad(&[0.0; 5], &mut g);
        assert!(g.iter().all(|&gi| gi == 0.0));
    }

    #[test]
    fn schwefel12_gradient_is_suffix_sum() {
        let x = [1.0, -2.0, 0.5];
        let mut g = [0.0; 3];
        let v = schwefel12_value_grad(&x, &mut g);
        // prefixes 1, -1, -0.5
        assert_relative_eq!(v, 1.0 + 1.0 + 0.25);
        assert_relative_eq!(g[2], -1.0);
        assert_relative_eq!(g[1], -2.0 - 1.0);
        assert_relative_eq!(g[0], 2.0 - 2.0 - 1.0);
    }
}
