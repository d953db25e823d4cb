use nalgebra::DMatrix;
use pgglonet::generator::{
    init_fc_generator, init_pg_generator, Activation, Generator, LatentBatch,
};
use proptest::prelude::*;

/// Central-difference derivative of `sum <up, G(z)>` with respect to parameter `(p, k)`.
fn numeric_derivative<G: Generator + Clone>(
    gen: &G,
    z: &LatentBatch,
    alphas: &[f64],
    up: &DMatrix<f64>,
    p: usize,
    k: usize,
) -> f64 {
    let h = 1e-6;
    let mut g = gen.clone();
    let w = gen.params()[p][k];
    g.params_mut()[p][k] = w + h;
    let plus = g.forward(z, alphas).unwrap().designs().component_mul(up).sum();
    g.params_mut()[p][k] = w - h;
    let minus = g.forward(z, alphas).unwrap().designs().component_mul(up).sum();
    (plus - minus) / (2.0 * h)
}

/// Worst relative disagreement over 50 pseudo-randomly chosen weights.
fn backward_error<G: Generator + Clone>(gen: &G, seed: u64) -> f64 {
    let d = gen.output_dim();
    let z = LatentBatch::from_seed(seed, 4, gen.latent_dim());
    let alphas: Vec<f64> = (0..gen.num_alphas())
        .map(|i| ((seed as f64 + i as f64) * 0.61803).fract())
        .collect();
    let up = DMatrix::from_fn(d, 4, |i, j| ((seed as f64) + 1.3 * i as f64 - 0.7 * j as f64).cos());
    let pass = gen.forward(&z, &alphas).unwrap();
    let grads = gen.backward(&pass, &up).unwrap();
    let index: Vec<(usize, usize)> = grads
        .iter()
        .enumerate()
        .flat_map(|(p, m)| (0..m.len()).map(move |k| (p, k)))
        .collect();
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let (mut diff, mut scale) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let (p, k) = index[(state >> 33) as usize % index.len()];
        let a = grads[p][k];
        let n = numeric_derivative(gen, &z, &alphas, &up, p, k);
        diff = diff.max((a - n).abs());
        scale = scale.max(a.abs()).max(n.abs());
    }
    diff / scale.max(1e-300)
}

fn activation(i: usize) -> Activation {
    [Activation::Tanh, Activation::LeakyRelu][i]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pg_backward_matches_central_differences(
        base in prop::sample::select(vec![2usize, 4, 8]),
        blocks in 1usize..=3,
        act in 0usize..2,
        trim in 0usize..3,
        seed in 0u64..1000,
    ) {
        let d = (base << blocks) - trim;
        let gen = init_pg_generator(base, blocks, activation(act), &vec![-2.0; d], &vec![3.0; d], seed).unwrap();
        let err = backward_error(&gen, seed);
        prop_assert!(err <= 1e-5, "rel err {err}");
    }

    #[test]
    fn fc_backward_matches_central_differences(
        latent in prop::sample::select(vec![2usize, 4, 8]),
        depth in 1usize..=3,
        act in 0usize..2,
        d in 1usize..12,
        seed in 0u64..1000,
    ) {
        let widths = vec![16; depth];
        let gen = init_fc_generator(latent, &widths, activation(act), &vec![-1.0; d], &vec![1.0; d], seed).unwrap();
        let err = backward_error(&gen, seed);
        prop_assert!(err <= 1e-5, "rel err {err}");
    }
}

#[test]
fn identity_pg_is_affine_in_latent() {
    let gen = init_pg_generator(4, 3, Activation::Identity, &[-1.0; 32], &[1.0; 32], 5).unwrap();
    let z1 = LatentBatch::from_seed(1, 6, 4);
    let z2 = LatentBatch::from_seed(2, 6, 4);
    let sum = LatentBatch::new(z1.matrix() + z2.matrix());
    let zero = LatentBatch::new(DMatrix::zeros(4, 6));
    let alphas = [0.2, 0.5, 0.9];
    let raw = |z: &LatentBatch| gen.forward(z, &alphas).unwrap().raw_output().clone();
    let residual = raw(&sum) - raw(&z1) - raw(&z2) + raw(&zero);
    assert!(residual.amax() <= 1e-10, "{}", residual.amax());
}

#[test]
fn outputs_stay_in_bounds_and_straddle_the_center() {
    let lower: Vec<f64> = (0..20).map(|i| -1.0 - 0.5 * i as f64).collect();
    let upper: Vec<f64> = (0..20).map(|i| 1.0 + 0.25 * i as f64).collect();
    for act in [Activation::Tanh, Activation::LeakyRelu, Activation::Identity] {
        let gen = init_pg_generator(1, 5, act, &lower, &upper, 8).unwrap();
        let z = LatentBatch::from_seed(3, 1000, 1);
        // every blend coefficient starts at zero
        let alphas = vec![0.0; gen.num_alphas()];
        let x = gen.forward(&z, &alphas).unwrap().designs().clone();
        for i in 0..20 {
            let row = x.row(i);
            assert!(row.iter().all(|v| *v >= lower[i] && *v <= upper[i]));
            let center = 0.5 * (lower[i] + upper[i]);
            assert!(row.min() < center && row.max() > center, "{act:?} coordinate {i}");
        }
    }
}
