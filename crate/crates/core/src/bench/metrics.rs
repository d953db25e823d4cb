use std::collections::BTreeMap;

use crate::engine::RunTrace;

use super::BenchmarkRecord;

/// First cumulative evaluation count at which the best-so-far value is within `eps` of
/// `target` (minimization convention).
pub fn evals_to_target(trace: &RunTrace, target: f64, eps: f64) -> Option<u64> {
    trace
        .records()
        .iter()
        .find(|r| r.global_best <= target + eps)
        .map(|r| r.evaluations)
}

/// Sample mean and standard deviation (`n - 1` denominator, 0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Formats `mean ± std` with a shared power of ten: `1740 ± 10` becomes `(1.74 ± 0.01)e+03`.
pub fn format_mean_std(mean: f64, std: f64) -> String {
    if !mean.is_finite() || !std.is_finite() {
        return format!("{mean} ± {std}");
    }
    let exponent = if mean == 0.0 {
        if std == 0.0 {
            0
        } else {
            std.abs().log10().floor() as i32
        }
    } else {
        mean.abs().log10().floor() as i32
    };
    let scale = 10f64.powi(exponent);
    let (mut m, mut s) = (mean / scale, std / scale);
    let mut exponent = exponent;
    // rounding 9.995 up to 10.00 moves the exponent
    if (m.abs() * 100.0).round() >= 1000.0 {
        exponent += 1;
        m /= 10.0;
        s /= 10.0;
    }
    let sign = if exponent < 0 { '-' } else { '+' };
    format!("({m:.2} ± {s:.2})e{sign}{:02}", exponent.abs())
}

/// One row of the summary report for an (objective, dimension, algorithm) group.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub objective: String,
    pub dim: usize,
    pub algorithm: String,
    pub runs: usize,
    pub best_mean: f64,
    pub best_std: f64,
    /// Mean and std of evaluations-to-target over the runs that reached it.
    pub evals_mean: Option<f64>,
    pub evals_std: Option<f64>,
    pub reached: usize,
    /// Only one run in the group, so the spread is not meaningful.
    pub single_run: bool,
    /// Some run in the group never evaluated anything (zero budget).
    pub has_empty_runs: bool,
}

impl SummaryRow {
    pub fn reach_rate(&self) -> f64 {
        self.reached as f64 / self.runs as f64
    }
}

/// Groups records by (objective, dimension, algorithm), sorted by that key.
pub fn aggregate(records: &[BenchmarkRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, usize, String), Vec<&BenchmarkRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.objective.clone(), r.dim, r.algorithm.clone()))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((objective, dim, algorithm), mut rs)| {
            // fixed order keeps floating-point sums independent of input order
            rs.sort_by_key(|r| r.seed);
            let best: Vec<f64> = rs.iter().map(|r| r.best_f).collect();
            let (best_mean, best_std) = mean_std(&best);
            let hits: Vec<f64> = rs
                .iter()
                .filter_map(|r| r.evals_to_target.map(|e| e as f64))
                .collect();
            let (evals_mean, evals_std) = if hits.is_empty() {
                (None, None)
            } else {
                let (m, s) = mean_std(&hits);
                (Some(m), Some(s))
            };
            SummaryRow {
                objective,
                dim,
                algorithm,
                runs: rs.len(),
                best_mean,
                best_std,
                evals_mean,
                evals_std,
                reached: hits.len(),
                single_run: rs.len() == 1,
                has_empty_runs: rs.iter().any(|r| r.evals_total == 0),
            }
        })
        .collect()
}

/// Plain-text table: one line per group with best f and evaluations-to-target.
pub fn summary_report(rows: &[SummaryRow]) -> String {
    let mut out = String::from(
        "objective                        dim  algorithm              runs  best f                      evals to target             reached\n",
    );
    for r in rows {
        let evals = match (r.evals_mean, r.evals_std) {
            (Some(m), Some(s)) => format_mean_std(m, s),
            _ => "not reached".to_string(),
        };
        let mut notes = Vec::new();
        if r.single_run {
            notes.push("single run, std 0");
        }
        if r.has_empty_runs {
            notes.push("no evaluations in some runs");
        }
        let notes = if notes.is_empty() {
            String::new()
        } else {
            format!("  [{}]", notes.join("; "))
        };
        out.push_str(&format!(
            "{:<32} {:>4}  {:<22} {:>4}  {:<27} {:<27} {}/{}{}\n",
            r.objective,
            r.dim,
            r.algorithm,
            r.runs,
            format_mean_std(r.best_mean, r.best_std),
            evals,
            r.reached,
            r.runs,
            notes
        ));
    }
    out
}
