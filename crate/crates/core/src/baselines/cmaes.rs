use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{uniform_in_bounds, BaselineOutcome, Tracker};
use crate::error::{Error, Result};
use crate::objectives::{EvalCounter, ObjectiveSpec};

fn default_sigma_fraction() -> f64 {
    0.3
}
fn default_max_restarts() -> usize {
    9
}
fn default_generations() -> usize {
    usize::MAX
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CmaEsConfig {
    /// Population size; `None` uses `4 + floor(3 ln d)`.
    #[serde(default)]
    pub population: Option<usize>,
    /// Initial step size as a fraction of the box width.
    #[serde(default = "default_sigma_fraction")]
    pub sigma_fraction: f64,
    /// Generation cap over all restarts; the evaluation budget usually binds first.
    #[serde(default = "default_generations")]
    pub generations: usize,
    /// IPOP restarts with doubled population after stagnation.
    #[serde(default = "default_max_restarts")]
    pub max_restarts: usize,
    #[serde(default)]
    pub stop_eps: Option<f64>,
}

impl Default for CmaEsConfig {
    fn default() -> Self {
        CmaEsConfig {
            population: None,
            sigma_fraction: default_sigma_fraction(),
            generations: default_generations(),
            max_restarts: default_max_restarts(),
            stop_eps: None,
        }
    }
}

pub fn default_population(dim: usize) -> usize {
    4 + (3.0 * (dim as f64).ln()).floor() as usize
}

const EIGEN_FLOOR: f64 = 1e-14;

/// Strategy parameters derived from `(d, lambda)`.
struct Params {
    lambda: usize,
    weights: Vec<f64>,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c1: f64,
    c_mu: f64,
    chi_n: f64,
}

impl Params {
    fn new(d: usize, lambda: usize) -> Self {
        let n = d as f64;
        let mu = lambda / 2;
        let raw: Vec<f64> = (1..=mu)
            .map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - (i as f64).ln())
            .collect();
        let sum: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / sum).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
        let c1 = 2.0 / ((n + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0).powi(2) + mu_eff));
        let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
        Params {
            lambda,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c1,
            c_mu,
            chi_n,
        }
    }
}

enum Ended {
    Stop,
    Restart,
}

/// Eigen basis `B` and axis lengths `D` of the covariance, with `C^{-1/2} = B D^{-1} B^T`.
struct Basis {
    b: DMatrix<f64>,
    d: DVector<f64>,
}

impl Basis {
    fn of(c: &DMatrix<f64>) -> Self {
        let eig = SymmetricEigen::new(c.clone());
        let mut repaired = false;
        let d = eig.eigenvalues.map(|v| {
            if v < EIGEN_FLOOR {
                repaired = true;
                EIGEN_FLOOR.sqrt()
            } else {
                v.sqrt()
            }
        });
        if repaired {
            log::debug!("cma-es covariance lost definiteness; eigenvalues floored at {EIGEN_FLOOR}");
        }
        Basis {
            b: eig.eigenvectors,
            d,
        }
    }
}

/// One CMA-ES descent from a random mean. Returns whether to restart.
fn descend(
    tracker: &mut Tracker<'_>,
    rng: &mut ChaCha8Rng,
    params: &Params,
    sigma0: f64,
    generations_left: &mut usize,
) -> Result<Ended> {
    let objective = tracker.objective();
    let n = objective.dim();
    let nf = n as f64;
    let lambda = params.lambda;
    let mu = params.weights.len();
    let mut mean = DVector::from_vec(uniform_in_bounds(rng, objective));
    let mut sigma = sigma0;
    let mut c = DMatrix::<f64>::identity(n, n);
    let mut p_sigma = DVector::<f64>::zeros(n);
    let mut p_c = DVector::<f64>::zeros(n);
    let mut basis = Basis {
        b: DMatrix::identity(n, n),
        d: DVector::from_element(n, 1.0),
    };
    let mut since_eigen = 0usize;
    // lazy decomposition: the covariance drifts by O(c1 + c_mu) per generation
    let eigen_every = ((0.5 / ((params.c1 + params.c_mu) * nf)).floor() as usize).max(1);
    let stall_window = 10 + (30.0 * nf / lambda as f64).ceil() as usize;
    let mut history: Vec<f64> = Vec::new();
    let mut grad = vec![0.0; n];
    let mut gen = 0usize;

    loop {
        if *generations_left == 0 {
            return Ok(Ended::Stop);
        }
        *generations_left -= 1;
        gen += 1;

        // y_k = B D z_k, x_k = m + sigma y_k
        let z = DMatrix::<f64>::from_fn(n, lambda, |_, _| StandardNormal.sample(rng));
        let mut scaled = z;
        for (i, mut row) in scaled.row_iter_mut().enumerate() {
            row *= basis.d[i];
        }
        let y = &basis.b * scaled;
        let mut fitness = Vec::with_capacity(lambda);
        for k in 0..lambda {
            let x_raw: Vec<f64> = (0..n).map(|i| mean[i] + sigma * y[(i, k)]).collect();
            let mut x = x_raw.clone();
            objective.clamp_into_bounds(&mut x);
            let Some(f) = tracker.eval(&x, &mut grad) else {
                return Ok(Ended::Stop);
            };
            let violation: f64 = x_raw.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
            fitness.push((f + violation * (1.0 + f.abs()), k));
            if tracker.reached() {
                return Ok(Ended::Stop);
            }
        }
        tracker.record()?;
        fitness.sort_by(|a, b| a.0.total_cmp(&b.0));

        // recombination
        let mut y_w = DVector::<f64>::zeros(n);
        for (w, &(_, k)) in params.weights.iter().zip(&fitness) {
            y_w.axpy(*w, &y.column(k), 1.0);
        }
        mean.axpy(sigma, &y_w, 1.0);

        // step-size path uses C^{-1/2} y_w = B D^{-1} B^T y_w
        let mut bt_y = basis.b.tr_mul(&y_w);
        bt_y.component_div_assign(&basis.d);
        let c_inv_sqrt_y = &basis.b * bt_y;
        let cs = params.c_sigma;
        p_sigma *= 1.0 - cs;
        p_sigma.axpy((cs * (2.0 - cs) * params.mu_eff).sqrt(), &c_inv_sqrt_y, 1.0);
        let ps_norm = p_sigma.norm();
        let h_sigma = ps_norm / (1.0 - (1.0 - cs).powi(2 * gen as i32)).sqrt()
            < (1.4 + 2.0 / (nf + 1.0)) * params.chi_n;
        let cc = params.c_c;
        p_c *= 1.0 - cc;
        if h_sigma {
            p_c.axpy((cc * (2.0 - cc) * params.mu_eff).sqrt(), &y_w, 1.0);
        }

        // covariance: rank-one plus rank-mu
        let delta = if h_sigma { 0.0 } else { cc * (2.0 - cc) };
        c *= 1.0 - params.c1 - params.c_mu + params.c1 * delta;
        c.ger(params.c1, &p_c, &p_c, 1.0);
        let mut y_sel = DMatrix::<f64>::zeros(n, mu);
        for (j, (w, &(_, k))) in params.weights.iter().zip(&fitness).enumerate() {
            y_sel.set_column(j, &(y.column(k) * (params.c_mu * w).sqrt()));
        }
        c.gemm(1.0, &y_sel, &y_sel.transpose(), 1.0);

        sigma *= ((cs / params.d_sigma) * (ps_norm / params.chi_n - 1.0)).exp();

        since_eigen += 1;
        if since_eigen >= eigen_every {
            c = (&c + c.transpose()) * 0.5;
            basis = Basis::of(&c);
            since_eigen = 0;
        }

        // restart tests
        history.push(fitness[0].0);
        let max_d = basis.d.max();
        let min_d = basis.d.min();
        let tiny_step = sigma * max_d < 1e-12 * sigma0;
        let ill = (max_d / min_d).powi(2) > 1e14;
        let stalled = history.len() > stall_window && {
            let recent = &history[history.len() - stall_window..];
            let hi = recent.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = recent.iter().copied().fold(f64::INFINITY, f64::min);
            hi - lo < 1e-12 * (1.0 + lo.abs())
        };
        if !sigma.is_finite() || tiny_step || ill || stalled {
            log::debug!("cma-es restart after {gen} generations (sigma {sigma:.3e})");
            return Ok(Ended::Restart);
        }
    }
}

/// CMA-ES with rank-one and rank-mu covariance updates, cumulative step-size adaptation and
/// IPOP restarts. Candidates outside the box are evaluated at their projection and ranked
/// with a quadratic penalty on the distance moved.
pub fn cma_es(
    objective: &ObjectiveSpec,
    config: &CmaEsConfig,
    seed: u64,
    counter: EvalCounter,
) -> Result<BaselineOutcome> {
    let d = objective.dim();
    let lambda0 = config.population.unwrap_or_else(|| default_population(d));
    if lambda0 < 2 {
        return Err(Error::InvalidParameter("cma-es population must be at least 2".into()));
    }
    if !(config.sigma_fraction > 0.0) {
        return Err(Error::InvalidParameter("cma-es sigma_fraction must be positive".into()));
    }
    if config.generations == usize::MAX && counter.budget().is_none() && config.stop_eps.is_none() {
        return Err(Error::InvalidParameter(
            "cma-es needs a generation cap, an evaluation budget or a stop tolerance".into(),
        ));
    }
    let width = objective
        .lower()
        .iter()
        .zip(objective.upper())
        .map(|(l, u)| u - l)
        .fold(0.0, f64::max);
    let sigma0 = config.sigma_fraction * width;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tracker = Tracker::new(objective, counter, config.stop_eps);
    let mut generations_left = config.generations;
    let mut lambda = lambda0;
    for restart in 0..=config.max_restarts {
        let params = Params::new(d, lambda);
        match descend(&mut tracker, &mut rng, &params, sigma0, &mut generations_left)? {
            Ended::Stop => break,
            Ended::Restart if restart < config.max_restarts => lambda *= 2,
            Ended::Restart => break,
        }
    }
    tracker.finish()
}
