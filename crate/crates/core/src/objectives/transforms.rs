//! Elementwise landscape transforms used by the LSGO composite: oscillating irregularity
//! (`T_osz`), symmetry breaking (`T_asy`) and diagonal ill-conditioning.
//!
//! Each transform has a `*_with_derivative` form returning the elementwise derivative so the
//! composite can chain gradients analytically.

const OSZ_AMPLITUDE: f64 = 0.049;

fn osz_scalar(x: f64) -> (f64, f64) {
    if x == 0.0 {
        // no limit exists for the derivative at 0; use the unperturbed slope
        return (0.0, 1.0);
    }
    let u = x.abs().ln();
    let (c1, c2) = if x > 0.0 { (10.0, 7.9) } else { (5.5, 3.1) };
    let y = x.signum() * (u + OSZ_AMPLITUDE * ((c1 * u).sin() + (c2 * u).sin())).exp();
    let slope = 1.0 + OSZ_AMPLITUDE * (c1 * (c1 * u).cos() + c2 * (c2 * u).cos());
    (y, y / x * slope)
}

/// Irregularity transform: `sign(x) * exp(log|x| + 0.049 (sin(c1 log|x|) + sin(c2 log|x|)))`.
pub fn transform_irregularity(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&xi| osz_scalar(xi).0).collect()
}

pub fn transform_irregularity_with_derivative(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    x.iter().map(|&xi| osz_scalar(xi)).unzip()
}

fn asy_exponent_scale(i: usize, n: usize, beta: f64) -> f64 {
    if n <= 1 {
        0.0
    } else {
        beta * i as f64 / (n - 1) as f64
    }
}

/// Symmetry breaking: positive coordinates are raised to `1 + beta * i/(n-1) * sqrt(x_i)`.
pub fn transform_symmetry_breaking(x: &[f64], beta: f64) -> Vec<f64> {
    transform_symmetry_breaking_with_derivative(x, beta).0
}

pub fn transform_symmetry_breaking_with_derivative(x: &[f64], beta: f64) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    x.iter()
        .enumerate()
        .map(|(i, &xi)| {
            let c = asy_exponent_scale(i, n, beta);
            if xi <= 0.0 || c == 0.0 {
                return (xi, 1.0);
            }
            let s = xi.sqrt();
            let exponent = 1.0 + c * s;
            let y = xi.powf(exponent);
            // d/dx exp(e(x) ln x) = y * (e/x + e'(x) ln x), e'(x) = c / (2 sqrt x)
            let dy = y * (exponent / xi + 0.5 * c / s * xi.ln());
            (y, dy)
        })
        .unzip()
}

/// Diagonal conditioning weights `w_i = 10^(exponent * (i-1) / (2 (d-1)))`.
pub fn conditioning_weights(d: usize, exponent: f64) -> Vec<f64> {
    if d <= 1 {
        return vec![1.0; d];
    }
    (0..d)
        .map(|i| 10f64.powf(exponent * i as f64 / (2.0 * (d - 1) as f64)))
        .collect()
}
