use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    check_upstream, gaussian_matrix, next_revision, Activation, ForwardPass, Generator,
    LatentBatch, OutputMap,
};
use crate::error::{Error, Result};

/// One growing block: doubles its input by blending duplication with a learned map,
/// `q((1 - alpha) [x; x] + alpha A x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowingBlock {
    pub transform: DMatrix<f64>,
    pub alpha: f64,
}

impl GrowingBlock {
    pub fn new(transform: DMatrix<f64>, alpha: f64) -> Result<Self> {
        if transform.nrows() != 2 * transform.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "block transform must be 2d x d, got {}x{}",
                transform.nrows(),
                transform.ncols()
            )));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in [0, 1], got {alpha}"
            )));
        }
        Ok(GrowingBlock { transform, alpha })
    }

    pub fn in_dim(&self) -> usize {
        self.transform.ncols()
    }

    /// Applies the block to a single input vector.
    pub fn forward(&self, x: &[f64], activation: Activation) -> Result<Vec<f64>> {
        let d = self.in_dim();
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: x.len(),
            });
        }
        let input = DMatrix::from_column_slice(d, 1, x);
        let pre = blend(&self.transform, &input, self.alpha);
        Ok(pre.iter().map(|&v| activation.apply(v)).collect())
    }
}

/// `(1 - alpha) [x; x] + alpha A x` for a batch `x` of columns.
fn blend(transform: &DMatrix<f64>, input: &DMatrix<f64>, alpha: f64) -> DMatrix<f64> {
    let d = input.nrows();
    let mut pre = if alpha == 0.0 {
        DMatrix::zeros(2 * d, input.ncols())
    } else {
        transform * input * alpha
    };
    if alpha != 1.0 {
        let keep = 1.0 - alpha;
        for j in 0..input.ncols() {
            for i in 0..d {
                let v = keep * input[(i, j)];
                pre[(i, j)] += v;
                pre[(i + d, j)] += v;
            }
        }
    }
    pre
}

/// Progressive-growing generator: a trainable affine map `z -> x0` (D -> D) followed by `L`
/// growing blocks, each doubling the width, and an output map onto the objective box.
///
/// Parameter layout: `[W_in (D x D), b_in (D x 1), A_1, ..., A_L]` with `A_l` of shape
/// `(2^l D) x (2^(l-1) D)`.
#[derive(Debug, Clone)]
pub struct PgGenerator {
    base_dim: usize,
    num_blocks: usize,
    activation: Activation,
    params: Vec<DMatrix<f64>>,
    output: OutputMap,
    revision: u64,
}

/// Default `(D, L)` for a target dimension: a single seed coordinate doubled until it covers
/// `d`, so that early in training every coordinate moves together and the search starts on a
/// one-dimensional slice.
pub fn pg_architecture(dim: usize) -> (usize, usize) {
    pg_architecture_with_base(dim, 1)
}

/// Smallest `L` with `base_dim * 2^L >= dim`.
pub fn pg_architecture_with_base(dim: usize, base_dim: usize) -> (usize, usize) {
    let base_dim = base_dim.max(1);
    let mut blocks = 0;
    while base_dim << blocks < dim {
        blocks += 1;
    }
    (base_dim, blocks)
}

/// Initializes a PG generator with `1/sqrt(fan_in)` Gaussian weights and zero bias, mapping
/// onto the box `[lower, upper]`. `2^L * D` must cover `lower.len()`.
pub fn init_pg_generator(
    base_dim: usize,
    num_blocks: usize,
    activation: Activation,
    lower: &[f64],
    upper: &[f64],
    seed: u64,
) -> Result<PgGenerator> {
    if base_dim == 0 {
        return Err(Error::InvalidDimension("base dimension must be at least 1".into()));
    }
    if num_blocks > 24 {
        return Err(Error::InvalidParameter(format!(
            "{num_blocks} growing blocks is unreasonably deep"
        )));
    }
    let full = base_dim << num_blocks;
    if lower.len() > full {
        return Err(Error::InvalidDimension(format!(
            "network output {full} cannot cover dimension {}",
            lower.len()
        )));
    }
    // the last block's tanh already bounds the output
    let squash = !(activation == Activation::Tanh && num_blocks > 0);
    let output = OutputMap::from_bounds(lower, upper, squash)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = Vec::with_capacity(num_blocks + 2);
    params.push(gaussian_matrix(
        &mut rng,
        base_dim,
        base_dim,
        1.0 / (base_dim as f64).sqrt(),
    ));
    params.push(DMatrix::zeros(base_dim, 1));
    for l in 1..=num_blocks {
        let d_in = base_dim << (l - 1);
        params.push(gaussian_matrix(
            &mut rng,
            2 * d_in,
            d_in,
            1.0 / (d_in as f64).sqrt(),
        ));
    }
    Ok(PgGenerator {
        base_dim,
        num_blocks,
        activation,
        params,
        output,
        revision: next_revision(),
    })
}

impl PgGenerator {
    pub(crate) fn from_parts(
        base_dim: usize,
        num_blocks: usize,
        activation: Activation,
        params: Vec<DMatrix<f64>>,
        output: OutputMap,
    ) -> Result<Self> {
        if params.len() != num_blocks + 2 {
            return Err(Error::ShapeMismatch(format!(
                "expected {} parameter matrices, got {}",
                num_blocks + 2,
                params.len()
            )));
        }
        let mut expected = vec![(base_dim, base_dim), (base_dim, 1)];
        expected.extend((1..=num_blocks).map(|l| (base_dim << l, base_dim << (l - 1))));
        for (p, shape) in params.iter().zip(&expected) {
            if p.shape() != *shape {
                return Err(Error::ShapeMismatch(format!(
                    "parameter is {:?}, expected {shape:?}",
                    p.shape()
                )));
            }
        }
        if output.dim() > base_dim << num_blocks {
            return Err(Error::ShapeMismatch("output map wider than the network".into()));
        }
        Ok(PgGenerator {
            base_dim,
            num_blocks,
            activation,
            params,
            output,
            revision: next_revision(),
        })
    }

    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn output_map(&self) -> &OutputMap {
        &self.output
    }

    /// Full network width `2^L * D` before truncation to the objective dimension.
    pub fn raw_dim(&self) -> usize {
        self.base_dim << self.num_blocks
    }

    /// Block `l` (0-based) with the given alpha attached.
    pub fn block(&self, l: usize, alpha: f64) -> Result<GrowingBlock> {
        GrowingBlock::new(self.params[l + 2].clone(), alpha)
    }
}

impl Generator for PgGenerator {
    fn latent_dim(&self) -> usize {
        self.base_dim
    }

    fn output_dim(&self) -> usize {
        self.output.dim()
    }

    fn num_alphas(&self) -> usize {
        self.num_blocks
    }

    fn params(&self) -> &[DMatrix<f64>] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [DMatrix<f64>] {
        self.revision = next_revision();
        &mut self.params
    }

    fn forward(&self, z: &LatentBatch, alphas: &[f64]) -> Result<ForwardPass> {
        if alphas.len() != self.num_blocks {
            return Err(Error::ShapeMismatch(format!(
                "expected {} alphas, got {}",
                self.num_blocks,
                alphas.len()
            )));
        }
        if let Some(a) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in [0, 1], got {a}"
            )));
        }
        if z.dim() != self.base_dim {
            return Err(Error::DimensionMismatch {
                expected: self.base_dim,
                actual: z.dim(),
            });
        }
        let m = z.len();
        let latent = z.matrix().clone();
        let mut h = &self.params[0] * &latent;
        for j in 0..m {
            h.column_mut(j).axpy(1.0, &self.params[1].column(0), 1.0);
        }
        let mut inputs = vec![latent];
        let mut pre = vec![h.clone()];
        for (l, &alpha) in alphas.iter().enumerate() {
            let p = blend(&self.params[l + 2], &h, alpha);
            let act = self.activation;
            let out = p.map(|v| act.apply(v));
            inputs.push(h);
            pre.push(p);
            h = out;
        }
        let designs = self.output.apply(&h);
        Ok(ForwardPass {
            revision: self.revision,
            alphas: alphas.to_vec(),
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
        let mut grads: Vec<DMatrix<f64>> = self
            .params
            .iter()
            .map(|p| DMatrix::zeros(p.nrows(), p.ncols()))
            .collect();
        let mut g = self.output.pullback(&pass.raw, upstream);
        let act = self.activation;
        for l in (1..=self.num_blocks).rev() {
            let alpha = pass.alphas[l - 1];
            let pre = &pass.pre[l];
            let input = &pass.inputs[l];
            let d = input.nrows();
            let g_pre = g.zip_map(pre, |gv, pv| gv * act.derivative(pv));
            let transform = &self.params[l + 1];
            let mut g_in = DMatrix::zeros(d, g_pre.ncols());
            if alpha != 0.0 {
                grads[l + 1] = &g_pre * input.transpose() * alpha;
                g_in = transform.tr_mul(&g_pre) * alpha;
            }
            if alpha != 1.0 {
                let keep = 1.0 - alpha;
                g_in += (g_pre.rows(0, d) + g_pre.rows(d, d)) * keep;
            }
            g = g_in;
        }
        // the input affine stage has no activation
        grads[0] = &g * pass.inputs[0].transpose();
        grads[1] = DMatrix::from_fn(self.base_dim, 1, |i, _| g.row(i).sum());
        Ok(grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn box_bounds(d: usize) -> (Vec<f64>, Vec<f64>) {
        (vec![-5.12; d], vec![5.12; d])
    }

    #[test]
    fn block_forward_examples() {
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        let x = [0.3, -0.7];
        let dup = GrowingBlock::new(a.clone(), 0.0)
            .unwrap()
            .forward(&x, Activation::Identity)
            .unwrap();
        assert_eq!(dup, vec![0.3, -0.7, 0.3, -0.7]);
        let lin = GrowingBlock::new(a.clone(), 1.0)
            .unwrap()
            .forward(&x, Activation::Identity)
            .unwrap();
        let ax: Vec<f64> = (&a * DMatrix::from_column_slice(2, 1, &x)).iter().copied().collect();
        assert_eq!(lin, ax);

        let a1 = DMatrix::from_column_slice(2, 1, &[2.0, 0.0]);
        let out = GrowingBlock::new(a1, 0.5)
            .unwrap()
            .forward(&[0.6], Activation::Tanh)
            .unwrap();
        assert!((out[0] - 0.9f64.tanh()).abs() < 1e-15);
        assert!((out[1] - 0.3f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn block_rejects_bad_input() {
        let b = GrowingBlock::new(DMatrix::zeros(4, 2), 0.5).unwrap();
        assert!(b.forward(&[1.0], Activation::Tanh).is_err());
        assert!(GrowingBlock::new(DMatrix::zeros(3, 2), 0.5).is_err());
        assert!(GrowingBlock::new(DMatrix::zeros(4, 2), 1.5).is_err());
    }

    #[test]
    fn architecture_rule() {
        assert_eq!(pg_architecture(1), (1, 0));
        assert_eq!(pg_architecture(2), (1, 1));
        assert_eq!(pg_architecture(10), (1, 4));
        assert_eq!(pg_architecture(32), (1, 5));
        assert_eq!(pg_architecture(1000), (1, 10));
        assert_eq!(pg_architecture_with_base(10, 5), (5, 1));
        assert_eq!(pg_architecture_with_base(1000, 4), (4, 8));
        assert_eq!(pg_architecture_with_base(3, 4), (4, 0));
    }

    #[test]
    fn shapes_and_output_width() {
        let (lo, hi) = box_bounds(24);
        let g = init_pg_generator(3, 3, Activation::Tanh, &lo, &hi, 1).unwrap();
        assert_eq!(g.params()[2].shape(), (6, 3));
        assert_eq!(g.params()[4].shape(), (24, 12));
        let z = LatentBatch::from_seed(2, 5, 3);
        let pass = g.forward(&z, &[0.2, 0.5, 1.0]).unwrap();
        assert_eq!(pass.designs().shape(), (24, 5));
        assert_eq!(pass.raw_output().nrows(), 24);
    }

    #[test]
    fn zero_blocks_is_affine_plus_output_map() {
        let (lo, hi) = box_bounds(3);
        let g = init_pg_generator(3, 0, Activation::Tanh, &lo, &hi, 9).unwrap();
        assert_eq!(g.params().len(), 2);
        let z = LatentBatch::from_seed(1, 4, 3);
        let pass = g.forward(&z, &[]).unwrap();
        assert_eq!(pass.designs().nrows(), 3);
        let expect = (&g.params()[0] * z.matrix()).map(|v| 5.12 * v.tanh());
        assert!((pass.designs() - expect).amax() < 1e-12);
    }

    #[test]
    fn alpha_zero_duplicates() {
        let (lo, hi) = box_bounds(16);
        for act in [Activation::Tanh, Activation::LeakyRelu, Activation::Identity] {
            let g = init_pg_generator(2, 3, act, &lo, &hi, 3).unwrap();
            let z = LatentBatch::from_seed(5, 6, 2);
            let pass = g.forward(&z, &[0.0; 3]).unwrap();
            let x = pass.designs();
            for j in 0..6 {
                for i in 0..16 {
                    assert_eq!(x[(i, j)], x[(i % 2, j)]);
                }
            }
        }
    }

    #[test]
    fn rows_are_independent() {
        let (lo, hi) = box_bounds(8);
        let g = init_pg_generator(2, 2, Activation::Tanh, &lo, &hi, 3).unwrap();
        let z8 = LatentBatch::from_seed(11, 8, 2);
        let z1 = LatentBatch::new(z8.matrix().columns(3, 1).into_owned());
        let a = g.forward(&z8, &[0.4, 0.9]).unwrap();
        let b = g.forward(&z1, &[0.4, 0.9]).unwrap();
        assert_eq!(a.designs().column(3), b.designs().column(0));
    }

    #[test]
    fn alpha_length_checked() {
        let (lo, hi) = box_bounds(8);
        let g = init_pg_generator(2, 2, Activation::Tanh, &lo, &hi, 3).unwrap();
        let z = LatentBatch::from_seed(1, 2, 2);
        assert!(g.forward(&z, &[0.0]).is_err());
        assert!(g.forward(&z, &[0.0, 2.0]).is_err());
    }

    #[test]
    fn stale_cache_rejected() {
        let (lo, hi) = box_bounds(4);
        let mut g = init_pg_generator(2, 1, Activation::Tanh, &lo, &hi, 3).unwrap();
        let z = LatentBatch::from_seed(1, 3, 2);
        let pass = g.forward(&z, &[0.5]).unwrap();
        g.params_mut()[0][(0, 0)] += 0.1;
        let up = DMatrix::zeros(4, 3);
        assert!(matches!(g.backward(&pass, &up), Err(Error::StaleCache)));
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let (lo, hi) = box_bounds(8);
        let g = init_pg_generator(2, 2, Activation::Tanh, &lo, &hi, 3).unwrap();
        let z = LatentBatch::from_seed(1, 3, 2);
        let pass = g.forward(&z, &[0.3, 0.6]).unwrap();
        let grads = g.backward(&pass, &DMatrix::zeros(8, 3)).unwrap();
        assert!(grads.iter().all(|m| m.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn duplicated_sample_doubles_gradient() {
        let (lo, hi) = box_bounds(8);
        let g = init_pg_generator(2, 2, Activation::LeakyRelu, &lo, &hi, 3).unwrap();
        let z1 = LatentBatch::from_seed(4, 1, 2);
        let z2 = LatentBatch::new(DMatrix::from_fn(2, 2, |i, _| z1.matrix()[(i, 0)]));
        let up1 = DMatrix::from_fn(8, 1, |i, _| (i as f64 - 3.0) * 0.1);
        let up2 = DMatrix::from_fn(8, 2, |i, _| up1[(i, 0)]);
        let g1 = g.backward(&g.forward(&z1, &[0.5, 0.2]).unwrap(), &up1).unwrap();
        let g2 = g.backward(&g.forward(&z2, &[0.5, 0.2]).unwrap(), &up2).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a * 2.0 - b).amax() <= 1e-12 * (1.0 + b.amax()));
        }
    }
}
