use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Divide the step of each matrix by its column count (fan-in), so that one step moves
    /// every layer's output by a comparable amount regardless of width.
    #[serde(default)]
    pub fan_in_scaling: bool,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            step_size: 0.01,
            beta1: 0.9,
            beta2: 0.99,
            eps: 1e-8,
            fan_in_scaling: false,
        }
    }
}

impl AdamConfig {
    pub fn with_step_size(step_size: f64) -> Self {
        AdamConfig {
            step_size,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.step_size > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "adam needs step_size > 0, betas in [0, 1), eps > 0; got {self:?}"
            )))
        }
    }
}

/// Moment accumulators for a list of parameter matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    first: Vec<DMatrix<f64>>,
    second: Vec<DMatrix<f64>>,
    step: u64,
}

impl OptimizerState {
    pub fn new(params: &[DMatrix<f64>]) -> Self {
        let zeros: Vec<_> = params
            .iter()
            .map(|p| DMatrix::zeros(p.nrows(), p.ncols()))
            .collect();
        OptimizerState {
            first: zeros.clone(),
            second: zeros,
            step: 0,
        }
    }

    /// Flat-vector state, used by the baselines that run Adam directly on designs.
    pub fn for_vector(len: usize) -> Self {
        Self::new(&[DMatrix::zeros(len, 1)])
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[DMatrix<f64>] {
        &self.first
    }

    pub fn second_moments(&self) -> &[DMatrix<f64>] {
        &self.second
    }
}

/// One bias-corrected Adam step that descends along `grads`.
pub fn adam_update(
    state: &mut OptimizerState,
    params: &mut [DMatrix<f64>],
    grads: &[DMatrix<f64>],
    config: &AdamConfig,
) -> Result<()> {
    if params.len() != state.first.len() || grads.len() != params.len() {
        return Err(Error::ShapeMismatch(format!(
            "adam state has {} tensors, params {}, grads {}",
            state.first.len(),
            params.len(),
            grads.len()
        )));
    }
    for (k, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || p.shape() != state.first[k].shape() {
            return Err(Error::ShapeMismatch(format!(
                "parameter {k}: param {:?}, grad {:?}, state {:?}",
                p.shape(),
                g.shape(),
                state.first[k].shape()
            )));
        }
        if let Some(bad) = g.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                value: *bad,
                context: format!("gradient of parameter {k} at step {}", state.step + 1),
            });
        }
    }
    state.step += 1;
    let t = state.step as f64;
    let c1 = 1.0 - config.beta1.powf(t);
    let c2 = 1.0 - config.beta2.powf(t);
    for k in 0..params.len() {
        let (b1, b2) = (config.beta1, config.beta2);
        state.first[k].zip_apply(&grads[k], |m, g| *m = b1 * *m + (1.0 - b1) * g);
        state.second[k].zip_apply(&grads[k], |v, g| *v = b2 * *v + (1.0 - b2) * g * g);
        let p = &mut params[k];
        let lr = if config.fan_in_scaling {
            config.step_size / p.ncols() as f64
        } else {
            config.step_size
        };
        for ((x, m), v) in p
            .iter_mut()
            .zip(state.first[k].iter())
            .zip(state.second[k].iter())
        {
            let m_hat = m / c1;
            let v_hat = v / c2;
            *x -= lr * m_hat / (v_hat.sqrt() + config.eps);
        }
    }
    Ok(())
}

/// Adam step on a plain slice, sharing the matrix implementation.
pub(crate) fn adam_update_slice(
    state: &mut OptimizerState,
    x: &mut [f64],
    grad: &[f64],
    config: &AdamConfig,
) -> Result<()> {
    let mut p = [DMatrix::from_column_slice(x.len(), 1, x)];
    let g = [DMatrix::from_column_slice(grad.len(), 1, grad)];
    adam_update(state, &mut p, &g, config)?;
    x.copy_from_slice(p[0].as_slice());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![DMatrix::from_element(2, 3, 0.7)];
        let before = p.clone();
        let mut s = OptimizerState::new(&p);
        let g = vec![DMatrix::zeros(2, 3)];
        for _ in 0..5 {
            adam_update(&mut s, &mut p, &g, &AdamConfig::default()).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_is_step_size() {
        let mut p = vec![DMatrix::from_element(1, 1, 0.0)];
        let mut s = OptimizerState::new(&p);
        let cfg = AdamConfig::with_step_size(0.1);
        adam_update(&mut s, &mut p, &[DMatrix::from_element(1, 1, 1.0)], &cfg).unwrap();
        assert!((p[0][(0, 0)] + 0.1).abs() < 1e-8);
        // constant gradient keeps the bias-corrected ratio at 1
        adam_update(&mut s, &mut p, &[DMatrix::from_element(1, 1, 1.0)], &cfg).unwrap();
        assert!((p[0][(0, 0)] + 0.2).abs() < 1e-8);
    }

    #[test]
    fn shapes_preserved_and_checked() {
        let mut p = vec![DMatrix::zeros(3, 2), DMatrix::zeros(3, 1)];
        let mut s = OptimizerState::new(&p);
        let g = vec![DMatrix::from_element(3, 2, 0.5), DMatrix::from_element(3, 1, -0.5)];
        adam_update(&mut s, &mut p, &g, &AdamConfig::default()).unwrap();
        assert_eq!(s.first_moments()[0].shape(), (3, 2));
        assert_eq!(s.second_moments()[1].shape(), (3, 1));
        let bad = vec![DMatrix::zeros(2, 2), DMatrix::zeros(3, 1)];
        assert!(adam_update(&mut s, &mut p, &bad, &AdamConfig::default()).is_err());
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut p = vec![DMatrix::zeros(1, 1)];
        let mut s = OptimizerState::new(&p);
        let g = vec![DMatrix::from_element(1, 1, f64::NAN)];
        assert!(matches!(
            adam_update(&mut s, &mut p, &g, &AdamConfig::default()),
            Err(Error::NonFinite { .. })
        ));
        assert_eq!(s.step(), 0);
    }
}
