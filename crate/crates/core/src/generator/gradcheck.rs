use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Generator, LatentBatch};
use crate::error::{Error, Result};

/// Outcome of comparing `backward` against central differences on sampled weights.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardCheck {
    /// `max |analytic - numeric| / max(max |analytic|, max |numeric|)` over the sampled weights.
    pub max_rel_error: f64,
    pub weights_checked: usize,
}

fn probe_loss(gen: &impl Generator, z: &LatentBatch, alphas: &[f64], upstream: &DMatrix<f64>) -> Result<f64> {
    Ok(gen.forward(z, alphas)?.designs().dot(upstream))
}

/// Checks the parameter gradient of `sum <upstream, G(z)>` on `samples` weights drawn with
/// `seed`, each perturbed by `+/- h`.
pub fn check_backward<G: Generator + Clone>(
    gen: &G,
    z: &LatentBatch,
    alphas: &[f64],
    upstream: &DMatrix<f64>,
    samples: usize,
    h: f64,
    seed: u64,
) -> Result<BackwardCheck> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {h}")));
    }
    let pass = gen.forward(z, alphas)?;
    let analytic = gen.backward(&pass, upstream)?;
    let total = gen.num_params();
    if total == 0 {
        return Err(Error::InvalidParameter("generator has no parameters".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe = gen.clone();
    let (mut diff, mut scale) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let mut k = rng.random_range(0..total);
        let mut p = 0;
        while k >= analytic[p].len() {
            k -= analytic[p].len();
            p += 1;
        }
        let w = gen.params()[p][k];
        probe.params_mut()[p][k] = w + h;
        let up = probe_loss(&probe, z, alphas, upstream)?;
        probe.params_mut()[p][k] = w - h;
        let down = probe_loss(&probe, z, alphas, upstream)?;
        probe.params_mut()[p][k] = w;
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[p][k];
        diff = diff.max((a - numeric).abs());
        scale = scale.max(a.abs()).max(numeric.abs());
    }
    Ok(BackwardCheck {
        max_rel_error: if scale > 0.0 { diff / scale } else { diff },
        weights_checked: samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{init_pg_generator, Activation};

    #[test]
    fn small_pg_passes() {
        let gen = init_pg_generator(2, 2, Activation::LeakyRelu, &[-1.0; 8], &[1.0; 8], 3).unwrap();
        let z = LatentBatch::from_seed(4, 3, 2);
        let up = DMatrix::from_fn(8, 3, |i, j| ((i + 2 * j) as f64 * 0.7).sin());
        let c = check_backward(&gen, &z, &[0.3, 0.8], &up, 50, 1e-6, 1).unwrap();
        assert!(c.max_rel_error <= 1e-5, "{}", c.max_rel_error);
        assert!(check_backward(&gen, &z, &[0.3, 0.8], &up, 5, 0.0, 1).is_err());
    }
}
