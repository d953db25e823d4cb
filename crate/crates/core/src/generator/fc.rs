use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    check_upstream, gaussian_matrix, next_revision, Activation, ForwardPass, Generator,
    LatentBatch, OutputMap,
};
use crate::error::{Error, Result};

/// Fully connected generator: hidden layers apply the activation, the last layer is linear and
/// feeds the tanh output map. Parameters are `[W_1, b_1, ..., W_k, b_k]`.
#[derive(Debug, Clone)]
pub struct FcGenerator {
    widths: Vec<usize>,
    activation: Activation,
    params: Vec<DMatrix<f64>>,
    output: OutputMap,
    revision: u64,
}

pub fn init_fc_generator(
    latent_dim: usize,
    hidden_widths: &[usize],
    activation: Activation,
    lower: &[f64],
    upper: &[f64],
    seed: u64,
) -> Result<FcGenerator> {
    if latent_dim == 0 || hidden_widths.contains(&0) {
        return Err(Error::InvalidDimension(
            "latent and hidden widths must be at least 1".into(),
        ));
    }
    let output = OutputMap::from_bounds(lower, upper, true)?;
    let mut widths = vec![latent_dim];
    widths.extend_from_slice(hidden_widths);
    widths.push(lower.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = Vec::with_capacity(2 * (widths.len() - 1));
    for w in widths.windows(2) {
        params.push(gaussian_matrix(&mut rng, w[1], w[0], 1.0 / (w[0] as f64).sqrt()));
        params.push(DMatrix::zeros(w[1], 1));
    }
    Ok(FcGenerator {
        widths,
        activation,
        params,
        output,
        revision: next_revision(),
    })
}

impl FcGenerator {
    pub(crate) fn from_parts(
        widths: Vec<usize>,
        activation: Activation,
        params: Vec<DMatrix<f64>>,
        output: OutputMap,
    ) -> Result<Self> {
        if widths.len() < 2 || params.len() != 2 * (widths.len() - 1) {
            return Err(Error::ShapeMismatch("layer widths do not match parameters".into()));
        }
        for (k, w) in widths.windows(2).enumerate() {
            if params[2 * k].shape() != (w[1], w[0]) || params[2 * k + 1].shape() != (w[1], 1) {
                return Err(Error::ShapeMismatch(format!("layer {k} has inconsistent shapes")));
            }
        }
        if output.dim() != *widths.last().unwrap() {
            return Err(Error::ShapeMismatch("output map width mismatch".into()));
        }
        Ok(FcGenerator {
            widths,
            activation,
            params,
            output,
            revision: next_revision(),
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn output_map(&self) -> &OutputMap {
        &self.output
    }

    fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }
}

impl Generator for FcGenerator {
    fn latent_dim(&self) -> usize {
        self.widths[0]
    }

    fn output_dim(&self) -> usize {
        self.output.dim()
    }

    fn num_alphas(&self) -> usize {
        0
    }

    fn params(&self) -> &[DMatrix<f64>] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [DMatrix<f64>] {
        self.revision = next_revision();
        &mut self.params
    }

    fn forward(&self, z: &LatentBatch, alphas: &[f64]) -> Result<ForwardPass> {
        if !alphas.is_empty() {
            return Err(Error::ShapeMismatch(
                "fully connected generator takes no alphas".into(),
            ));
        }
        if z.dim() != self.latent_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.latent_dim(),
                actual: z.dim(),
            });
        }
        let n = self.num_layers();
        let mut h = z.matrix().clone();
        let mut inputs = Vec::with_capacity(n);
        let mut pre = Vec::with_capacity(n);
        for k in 0..n {
            let mut p = &self.params[2 * k] * &h;
            for j in 0..p.ncols() {
                p.column_mut(j).axpy(1.0, &self.params[2 * k + 1].column(0), 1.0);
            }
            let out = if k + 1 < n {
                let act = self.activation;
                p.map(|v| act.apply(v))
            } else {
                p.clone()
            };
            inputs.push(h);
            pre.push(p);
            h = out;
        }
        let designs = self.output.apply(&h);
        Ok(ForwardPass {
            revision: self.revision,
            alphas: Vec::new(),
            inputs,
            pre,
            raw: h,
            designs,
        })
    }

    fn backward(&self, pass: &ForwardPass, upstream: &DMatrix<f64>) -> Result<Vec<DMatrix<f64>>> {
        if pass.revision != self.revision {
            return Err(Error::StaleCache);
        }
        check_upstream(pass, upstream)?;
        let n = self.num_layers();
        let mut grads = vec![DMatrix::zeros(0, 0); 2 * n];
        let mut g = self.output.pullback(&pass.raw, upstream);
        let act = self.activation;
        for k in (0..n).rev() {
            let g_pre = if k + 1 < n {
                g.zip_map(&pass.pre[k], |gv, pv| gv * act.derivative(pv))
            } else {
                g
            };
            grads[2 * k] = &g_pre * pass.inputs[k].transpose();
            grads[2 * k + 1] = DMatrix::from_fn(g_pre.nrows(), 1, |i, _| g_pre.row(i).sum());
            g = self.params[2 * k].tr_mul(&g_pre);
        }
        Ok(grads)
    }
}
