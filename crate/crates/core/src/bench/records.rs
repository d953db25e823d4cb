use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outcome of one seeded repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub objective: String,
    pub dim: usize,
    pub algorithm: String,
    pub seed: u64,
    /// `inf` when nothing was evaluated.
    pub best_f: f64,
    /// Only kept when the experiment asks for it; never written to the records CSV.
    #[serde(skip)]
    pub best_x: Option<Vec<f64>>,
    pub evals_total: u64,
    pub evals_to_target: Option<u64>,
    pub reached: bool,
    pub wall_ms: u64,
}

impl BenchmarkRecord {
    pub fn no_evaluations(&self) -> bool {
        self.evals_total == 0
    }
}

pub const RECORD_COLUMNS: [&str; 9] = [
    "objective",
    "dim",
    "algorithm",
    "seed",
    "best_f",
    "evals_total",
    "evals_to_target",
    "reached",
    "wall_ms",
];

fn sort_key(r: &BenchmarkRecord) -> (&str, usize, &str, u64) {
    (&r.objective, r.dim, &r.algorithm, r.seed)
}

/// Writes the header and one row per record, sorted by (objective, dim, algorithm, seed).
pub fn write_records_to<W: Write>(records: &[BenchmarkRecord], out: W) -> csv::Result<()> {
    let mut sorted: Vec<&BenchmarkRecord> = records.iter().collect();
    sorted.sort_by(|a, b| sort_key(a).cmp(&sort_key(b)));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_COLUMNS)?;
    for r in sorted {
        w.write_record([
            r.objective.clone(),
            r.dim.to_string(),
            r.algorithm.clone(),
            r.seed.to_string(),
            format!("{:?}", r.best_f),
            r.evals_total.to_string(),
            r.evals_to_target.map(|e| e.to_string()).unwrap_or_default(),
            r.reached.to_string(),
            r.wall_ms.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_records_csv(records: &[BenchmarkRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_records_to(records, std::io::BufWriter::new(file)).map_err(|e| Error::csv(path, e))
}

pub fn read_records_from<R: Read>(input: R) -> Result<Vec<BenchmarkRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let headers = rd
        .headers()
        .map_err(|e| Error::Config(format!("records header: {e}")))?;
    if headers.iter().ne(RECORD_COLUMNS) {
        return Err(Error::Config(format!(
            "records header must be {}",
            RECORD_COLUMNS.join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, row) in rd.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::Config(format!("records line {line}: {e}")))?;
        let bad = |what: &str| Error::Config(format!("records line {line}: bad {what}"));
        if row.len() != RECORD_COLUMNS.len() {
            return Err(bad("column count"));
        }
        out.push(BenchmarkRecord {
            objective: row[0].to_string(),
            dim: row[1].parse().map_err(|_| bad("dim"))?,
            algorithm: row[2].to_string(),
            seed: row[3].parse().map_err(|_| bad("seed"))?,
            best_f: row[4].parse().map_err(|_| bad("best_f"))?,
            best_x: None,
            evals_total: row[5].parse().map_err(|_| bad("evals_total"))?,
            evals_to_target: if row[6].is_empty() {
                None
            } else {
                Some(row[6].parse().map_err(|_| bad("evals_to_target"))?)
            },
            reached: row[7].parse().map_err(|_| bad("reached"))?,
            wall_ms: row[8].parse().map_err(|_| bad("wall_ms"))?,
        });
    }
    Ok(out)
}

pub fn read_records_csv(path: impl AsRef<Path>) -> Result<Vec<BenchmarkRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_records_from(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(objective: &str, dim: usize, algorithm: &str, seed: u64) -> BenchmarkRecord {
        BenchmarkRecord {
            objective: objective.into(),
            dim,
            algorithm: algorithm.into(),
            seed,
            best_f: 0.1 + seed as f64 / 3.0,
            best_x: None,
            evals_total: 400,
            evals_to_target: (seed % 2 == 0).then_some(120),
            reached: seed % 2 == 0,
            wall_ms: 0,
        }
    }

    #[test]
    fn empty_list_is_header_only() {
        let mut buf = Vec::new();
        write_records_to(&[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "objective,dim,algorithm,seed,best_f,evals_total,evals_to_target,reached,wall_ms\n"
        );
    }

    #[test]
    fn round_trip_in_sorted_order() {
        let records = vec![
            rec("schwefel", 2, "cma_es", 3),
            rec("lsgo_composite[a, \"b\"]", 10, "pg_glonet", 1),
            rec("rastrigin", 10, "adam_multistart", 2),
            rec("rastrigin", 2, "pg_glonet", 5),
            rec("rastrigin", 2, "pg_glonet", 4),
        ];
        let mut buf = Vec::new();
        write_records_to(&records, &mut buf).unwrap();
        let back = read_records_from(buf.as_slice()).unwrap();
        let mut expected = records.clone();
        expected.sort_by(|a, b| sort_key(a).cmp(&sort_key(b)));
        assert_eq!(back, expected);
        assert_eq!(back[0].objective, "lsgo_composite[a, \"b\"]");
        assert_eq!((back[1].dim, back[1].seed), (2, 4));
    }

    #[test]
    fn infinite_best_survives() {
        let mut r = rec("sphere", 1, "cma_es", 0);
        r.best_f = f64::INFINITY;
        let mut buf = Vec::new();
        write_records_to(&[r.clone()], &mut buf).unwrap();
        assert_eq!(read_records_from(buf.as_slice()).unwrap(), vec![r]);
    }

    #[test]
    fn wrong_header_rejected() {
        assert!(read_records_from("objective,dim\nx,1\n".as_bytes()).is_err());
    }
}
