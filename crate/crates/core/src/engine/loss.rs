use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_inputs(f_values: &[f64], temperature: f64) -> Result<f64> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "temperature must be positive and finite, got {temperature}"
        )));
    }
    if f_values.is_empty() {
        return Err(Error::InvalidParameter("empty batch".into()));
    }
    let mut max = f64::NEG_INFINITY;
    for &f in f_values {
        if !f.is_finite() {
            return Err(Error::NonFinite {
                value: f,
                context: "batch value passed to the exponential loss".into(),
            });
        }
        max = max.max(f);
    }
    Ok(max)
}

/// `ln((1/M) sum exp(f_m / T))`, computed with the max shift so it never overflows.
pub fn glonet_log_loss(f_values: &[f64], temperature: f64) -> Result<f64> {
    let max = check_inputs(f_values, temperature)?;
    let sum: f64 = f_values
        .iter()
        .map(|&f| ((f - max) / temperature).exp())
        .sum();
    Ok(max / temperature + (sum / f_values.len() as f64).ln())
}

/// Batch estimate `(1/M) sum exp(f_m / T)`. Overflows to `inf` for large `f/T`; the log form
/// from [`glonet_log_loss`] stays finite.
pub fn glonet_loss(f_values: &[f64], temperature: f64) -> Result<f64> {
    Ok(glonet_log_loss(f_values, temperature)?.exp())
}

/// Per-sample pathwise weights `exp((f_m - max f) / T) / (M T)`.
///
/// The true weights are these times `exp(max f / T)`, a positive factor common to the batch,
/// which is returned as the second element in log form.
pub fn pathwise_weights(f_values: &[f64], temperature: f64) -> Result<(Vec<f64>, f64)> {
    let max = check_inputs(f_values, temperature)?;
    let scale = 1.0 / (f_values.len() as f64 * temperature);
    let w = f_values
        .iter()
        .map(|&f| scale * ((f - max) / temperature).exp())
        .collect();
    Ok((w, max / temperature))
}

/// Temperature that places the amplification threshold at normalized level `f_d`.
pub fn temperature_from_division_point(f_d: f64) -> Result<f64> {
    if !(f_d > 0.0 && f_d < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "division point must lie in (0, 1), got {f_d}"
        )));
    }
    Ok(f_d / f_d.ln_1p())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Normalization {
    None,
    FixedBounds { lo: f64, hi: f64 },
    EmaMinmax { decay: f64 },
}

impl Normalization {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Normalization::None => Ok(()),
            Normalization::FixedBounds { lo, hi } if lo < hi && lo.is_finite() && hi.is_finite() => {
                Ok(())
            }
            Normalization::EmaMinmax { decay } if (0.0..1.0).contains(&decay) => Ok(()),
            other => Err(Error::InvalidParameter(format!(
                "invalid normalization {other:?}"
            ))),
        }
    }
}

/// Running extremes for [`Normalization::EmaMinmax`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NormState {
    range: Option<(f64, f64)>,
}

impl NormState {
    pub fn range(&self) -> Option<(f64, f64)> {
        self.range
    }
}

/// Normalized values plus `dg/df` for each sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub values: Vec<f64>,
    pub slopes: Vec<f64>,
}

const DEGENERATE_RANGE: f64 = 1e-12;

/// Maps batch values into roughly `(0, 1)` by the chosen mode.
///
/// The EMA mode relaxes the running min/max toward each batch's extremes but always widens to
/// cover the current batch, so batch values never clip.
pub fn normalize_batch(f_values: &[f64], mode: &Normalization, state: &mut NormState) -> Result<Normalized> {
    let n = f_values.len();
    let affine = |lo: f64, hi: f64, clamp: bool| {
        if hi - lo < DEGENERATE_RANGE {
            log::debug!("degenerate normalization range [{lo}, {hi}], no learning signal");
            return Normalized {
                values: vec![0.5; n],
                slopes: vec![0.0; n],
            };
        }
        let s = 1.0 / (hi - lo);
        let mut values = Vec::with_capacity(n);
        let mut slopes = Vec::with_capacity(n);
        for &f in f_values {
            let g = (f - lo) * s;
            if clamp && !(0.0..=1.0).contains(&g) {
                values.push(g.clamp(0.0, 1.0));
                slopes.push(0.0);
            } else {
                values.push(g);
                slopes.push(s);
            }
        }
        Normalized { values, slopes }
    };
    match *mode {
        Normalization::None => Ok(Normalized {
            values: f_values.to_vec(),
            slopes: vec![1.0; n],
        }),
        Normalization::FixedBounds { lo, hi } => {
            mode.validate()?;
            Ok(affine(lo, hi, true))
        }
        Normalization::EmaMinmax { decay } => {
            mode.validate()?;
            if n == 0 {
                return Ok(Normalized {
                    values: Vec::new(),
                    slopes: Vec::new(),
                });
            }
            let bmin = f_values.iter().copied().fold(f64::INFINITY, f64::min);
            let bmax = f_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let (lo, hi) = match state.range {
                None => (bmin, bmax),
                Some((lo, hi)) => (
                    bmin.min(decay * lo + (1.0 - decay) * bmin),
                    bmax.max(decay * hi + (1.0 - decay) * bmax),
                ),
            };
            state.range = Some((lo, hi));
            Ok(affine(lo, hi, false))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn loss_examples() {
        assert_relative_eq!(glonet_loss(&[0.0; 4], 1.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(glonet_loss(&[1.0], 1.0).unwrap(), std::f64::consts::E, epsilon = 1e-14);
        let expect = (0.5f64.exp() + 1.5f64.exp()) / 2.0;
        assert_relative_eq!(glonet_loss(&[1.0, 3.0], 2.0).unwrap(), expect, epsilon = 1e-13);
        assert_relative_eq!(expect, 3.065, epsilon = 1e-3);
    }

    #[test]
    fn log_loss_survives_large_values() {
        let l = glonet_log_loss(&[1000.0, 999.0], 0.5).unwrap();
        assert!(l.is_finite());
        assert_relative_eq!(l, 2000.0 + ((1.0 + (-2.0f64).exp()) / 2.0).ln(), epsilon = 1e-9);
        assert!(glonet_loss(&[1.0], 0.0).is_err());
        assert!(glonet_loss(&[f64::NAN], 1.0).is_err());
    }

    #[test]
    fn weight_examples() {
        assert_eq!(pathwise_weights(&[0.0], 1.0).unwrap().0, vec![1.0]);
        assert_eq!(pathwise_weights(&[0.0, 0.0], 0.5).unwrap().0, vec![1.0, 1.0]);
        let (w, shift) = pathwise_weights(&[2.0, 4.0], 2.0).unwrap();
        assert_relative_eq!(w[0] * shift.exp(), (1.0f64).exp() / 4.0, epsilon = 1e-14);
        assert_relative_eq!(w[1] * shift.exp(), (2.0f64).exp() / 4.0, epsilon = 1e-14);
    }

    #[test]
    fn temperature_rule() {
        assert!((temperature_from_division_point(0.618).unwrap() - 1.284).abs() < 5e-3);
        assert_relative_eq!(temperature_from_division_point(0.5).unwrap(), 1.233, epsilon = 1e-3);
        assert_relative_eq!(temperature_from_division_point(1e-9).unwrap(), 1.0, epsilon = 1e-8);
        for bad in [0.0, 1.0, -0.2, f64::NAN] {
            assert!(temperature_from_division_point(bad).is_err());
        }
    }

    #[test]
    fn fixed_bounds_and_identity() {
        let mut st = NormState::default();
        let n = normalize_batch(&[0.0, 5.0, 10.0], &Normalization::FixedBounds { lo: 0.0, hi: 10.0 }, &mut st)
            .unwrap();
        assert_eq!(n.values, vec![0.0, 0.5, 1.0]);
        let n = normalize_batch(&[-3.0, 12.0], &Normalization::FixedBounds { lo: 0.0, hi: 10.0 }, &mut st)
            .unwrap();
        assert_eq!(n.values, vec![0.0, 1.0]);
        assert_eq!(n.slopes, vec![0.0, 0.0]);
        let n = normalize_batch(&[-3.0, 12.0], &Normalization::None, &mut st).unwrap();
        assert_eq!(n.values, vec![-3.0, 12.0]);
        assert!(Normalization::FixedBounds { lo: 1.0, hi: 1.0 }.validate().is_err());
    }

    #[test]
    fn ema_degenerate_range() {
        let mut st = NormState::default();
        let mode = Normalization::EmaMinmax { decay: 0.9 };
        let n = normalize_batch(&[2.0, 2.0, 2.0], &mode, &mut st).unwrap();
        assert_eq!(n.values, vec![0.5; 3]);
        assert_eq!(n.slopes, vec![0.0; 3]);
    }

    #[test]
    fn ema_tracks_and_relaxes() {
        let mut st = NormState::default();
        let mode = Normalization::EmaMinmax { decay: 0.5 };
        normalize_batch(&[0.0, 10.0], &mode, &mut st).unwrap();
        assert_eq!(st.range(), Some((0.0, 10.0)));
        normalize_batch(&[4.0, 6.0], &mode, &mut st).unwrap();
        assert_eq!(st.range(), Some((2.0, 8.0)));
        normalize_batch(&[4.0, 6.0], &mode, &mut st).unwrap();
        // two relaxations toward [4, 6]: 0 -> 2 -> 3 and 10 -> 8 -> 7
        assert_eq!(st.range(), Some((3.0, 7.0)));
    }

    proptest! {
        #[test]
        fn ema_preserves_argmax(batches in proptest::collection::vec(
            proptest::collection::vec(-100.0f64..100.0, 1..12), 1..6)) {
            let mut st = NormState::default();
            let mode = Normalization::EmaMinmax { decay: 0.9 };
            for b in &batches {
                let n = normalize_batch(b, &mode, &mut st).unwrap();
                let arg = |v: &[f64]| v.iter().enumerate()
                    .fold(0, |best, (i, &x)| if x > v[best] { i } else { best });
                if n.slopes[0] > 0.0 {
                    prop_assert_eq!(arg(&n.values), arg(b));
                    prop_assert!(n.values.iter().all(|&g| (-1e-12..=1.0 + 1e-12).contains(&g)));
                }
            }
        }

        #[test]
        fn weights_increase_with_f(f in proptest::collection::vec(-50.0f64..50.0, 2..20),
                                   t in 0.1f64..5.0) {
            let (w, _) = pathwise_weights(&f, t).unwrap();
            for i in 0..f.len() {
                for j in 0..f.len() {
                    if f[i] < f[j] {
                        prop_assert!(w[i] <= w[j]);
                    }
                }
            }
        }
    }
}
