use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// One row of a run trace. Objective values are raw (minimization convention unless the run
/// maximizes).
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub evaluations: u64,
    pub batch_best: f64,
    pub global_best: f64,
    /// Batch estimate of the exponential loss (`inf` if it overflows); absent for algorithms
    /// without one and for budget-truncated batches.
    pub loss: Option<f64>,
    pub log_loss: Option<f64>,
    pub alphas: Vec<f64>,
    pub best_x: Option<Vec<f64>>,
    pub wall_ms: u64,
}

impl TraceRecord {
    /// Record for algorithms without a generator loss (the baselines).
    pub fn plain(iteration: usize, evaluations: u64, batch_best: f64, global_best: f64) -> Self {
        TraceRecord {
            iteration,
            evaluations,
            batch_best,
            global_best,
            loss: None,
            log_loss: None,
            alphas: Vec::new(),
            best_x: None,
            wall_ms: 0,
        }
    }
}

pub const TRACE_COLUMNS: [&str; 9] = [
    "iteration",
    "evaluations",
    "batch_best",
    "global_best",
    "loss",
    "log_loss",
    "alphas",
    "best_x",
    "wall_ms",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    records: Vec<TraceRecord>,
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(";")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

fn split(s: &str) -> Option<Vec<f64>> {
    if s.is_empty() {
        return Some(Vec::new());
    }
    s.split(';').map(|t| t.parse().ok()).collect()
}

impl RunTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a record, enforcing strictly increasing evaluations.
    pub fn push(&mut self, record: TraceRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if record.evaluations <= last.evaluations {
                return Err(Error::InvalidParameter(format!(
                    "trace evaluations must increase: {} after {}",
                    record.evaluations, last.evaluations
                )));
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn total_evaluations(&self) -> u64 {
        self.records.last().map_or(0, |r| r.evaluations)
    }

    pub fn write_csv_to<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TRACE_COLUMNS)?;
        for r in &self.records {
            w.write_record([
                r.iteration.to_string(),
                r.evaluations.to_string(),
                format!("{:?}", r.batch_best),
                format!("{:?}", r.global_best),
                opt(r.loss),
                opt(r.log_loss),
                join(&r.alphas),
                r.best_x.as_deref().map(join).unwrap_or_default(),
                r.wall_ms.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(std::io::BufWriter::new(file))
            .map_err(|e| Error::csv(path, e))
    }

    pub fn read_csv_from<R: Read>(input: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let bad = |line: usize, what: &str| Error::Config(format!("trace row {line}: bad {what}"));
        let mut trace = RunTrace::new();
        for (i, row) in rd.records().enumerate() {
            let row = row.map_err(|e| Error::Config(format!("trace row {}: {e}", i + 1)))?;
            if row.len() != TRACE_COLUMNS.len() {
                return Err(bad(i + 1, "column count"));
            }
            let num = |k: usize| row[k].parse::<f64>().map_err(|_| bad(i + 1, TRACE_COLUMNS[k]));
            let opt_num = |k: usize| {
                if row[k].is_empty() {
                    Ok(None)
                } else {
                    num(k).map(Some)
                }
            };
            let best_x = if row[7].is_empty() {
                None
            } else {
                Some(split(&row[7]).ok_or_else(|| bad(i + 1, "best_x"))?)
            };
            trace.push(TraceRecord {
                iteration: row[0].parse().map_err(|_| bad(i + 1, "iteration"))?,
                evaluations: row[1].parse().map_err(|_| bad(i + 1, "evaluations"))?,
                batch_best: num(2)?,
                global_best: num(3)?,
                loss: opt_num(4)?,
                log_loss: opt_num(5)?,
                alphas: split(&row[6]).ok_or_else(|| bad(i + 1, "alphas"))?,
                best_x,
                wall_ms: row[8].parse().map_err(|_| bad(i + 1, "wall_ms"))?,
            })?;
        }
        Ok(trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let mut t = RunTrace::new();
        t.push(TraceRecord::plain(0, 20, 3.5, 3.5)).unwrap();
        let mut r = TraceRecord::plain(1, 40, 1.0 / 3.0, 1.0 / 3.0);
        r.alphas = vec![0.25, 0.0];
        r.best_x = Some(vec![-1e-300, 2.5]);
        r.loss = Some(f64::INFINITY);
        r.log_loss = Some(812.5);
        t.push(r).unwrap();
        let mut buf = Vec::new();
        t.write_csv_to(&mut buf).unwrap();
        let back = RunTrace::read_csv_from(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.records()[1].alphas, vec![0.25, 0.0]);
        assert_eq!(back.records()[1].best_x, t.records()[1].best_x);
        assert_eq!(back.records()[1].global_best, 1.0 / 3.0);
        assert_eq!(back.records()[0].loss, None);
        assert_eq!(back, t);
    }

    #[test]
    fn evaluations_must_increase() {
        let mut t = RunTrace::new();
        t.push(TraceRecord::plain(0, 20, 1.0, 1.0)).unwrap();
        assert!(t.push(TraceRecord::plain(1, 20, 1.0, 1.0)).is_err());
        assert_eq!(t.total_evaluations(), 20);
    }
}
