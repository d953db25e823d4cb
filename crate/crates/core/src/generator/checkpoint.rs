//! Plain-text generator checkpoints.
//!
//! ```text
//! pgglonet-generator 1
//! family pg|fc
//! activation tanh|leaky_relu|identity
//! base_dim <D>          (pg only)
//! blocks <L>            (pg only)
//! widths <w0> <w1> ...  (fc only)
//! squash 0|1
//! lower <d values>
//! upper <d values>
//! params <count>
//! matrix <rows> <cols>
//! <rows*cols values, row-major, space separated>
//! ...
//! ```
//!
//! Values are written in shortest round-trip form, so save/load is lossless.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::{Activation, AnyGenerator, FcGenerator, Generator, OutputMap, PgGenerator};
use crate::error::{Error, Result};

const MAGIC: &str = "pgglonet-generator 1";

fn join(values: impl IntoIterator<Item = f64>) -> String {
    let mut s = String::new();
    for (i, v) in values.into_iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{v:?}").unwrap();
    }
    s
}

pub fn write_checkpoint<W: Write>(gen: &AnyGenerator, mut out: W) -> std::io::Result<()> {
    let (activation, output) = match gen {
        AnyGenerator::Pg(g) => (g.activation(), g.output_map()),
        AnyGenerator::Fc(g) => (g.activation(), g.output_map()),
    };
    writeln!(out, "{MAGIC}")?;
    match gen {
        AnyGenerator::Pg(g) => {
            writeln!(out, "family pg")?;
            writeln!(out, "activation {}", activation.id())?;
            writeln!(out, "base_dim {}", g.base_dim())?;
            writeln!(out, "blocks {}", g.num_blocks())?;
        }
        AnyGenerator::Fc(g) => {
            writeln!(out, "family fc")?;
            writeln!(out, "activation {}", activation.id())?;
            let widths: Vec<String> = g.widths().iter().map(|w| w.to_string()).collect();
            writeln!(out, "widths {}", widths.join(" "))?;
        }
    }
    writeln!(out, "squash {}", u8::from(output.squash()))?;
    writeln!(out, "lower {}", join(output.lower()))?;
    writeln!(out, "upper {}", join(output.upper()))?;
    writeln!(out, "params {}", gen.params().len())?;
    for p in gen.params() {
        writeln!(out, "matrix {} {}", p.nrows(), p.ncols())?;
        let row_major = (0..p.nrows()).flat_map(|i| (0..p.ncols()).map(move |j| p[(i, j)]));
        writeln!(out, "{}", join(row_major))?;
    }
    Ok(())
}

struct Lines<R: BufRead> {
    inner: std::io::Lines<R>,
    line_no: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self) -> Result<String> {
        self.line_no += 1;
        match self.inner.next() {
            Some(Ok(l)) => Ok(l),
            Some(Err(e)) => Err(Error::Checkpoint(format!("line {}: {e}", self.line_no))),
            None => Err(Error::Checkpoint(format!(
                "unexpected end of file at line {}",
                self.line_no
            ))),
        }
    }

    fn keyed(&mut self, key: &str) -> Result<String> {
        let line = self.next_line()?;
        match line.split_once(' ') {
            Some((k, rest)) if k == key => Ok(rest.to_string()),
            None if line == key => Ok(String::new()),
            _ => Err(Error::Checkpoint(format!(
                "line {}: expected `{key}`, found `{line}`",
                self.line_no
            ))),
        }
    }

    fn err(&self, msg: impl std::fmt::Display) -> Error {
        Error::Checkpoint(format!("line {}: {msg}", self.line_no))
    }
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Option<Vec<T>> {
    s.split_whitespace().map(|t| t.parse().ok()).collect()
}

pub fn read_checkpoint<R: Read>(input: R) -> Result<AnyGenerator> {
    let mut lines = Lines {
        inner: BufReader::new(input).lines(),
        line_no: 0,
    };
    if lines.next_line()? != MAGIC {
        return Err(lines.err("not a generator checkpoint"));
    }
    let family = lines.keyed("family")?;
    let act_id = lines.keyed("activation")?;
    let activation =
        Activation::from_id(&act_id).ok_or_else(|| lines.err(format!("unknown activation `{act_id}`")))?;
    let shape_info: Vec<usize> = match family.as_str() {
        "pg" => {
            let d = lines.keyed("base_dim")?;
            let l = lines.keyed("blocks")?;
            let d = d.parse().map_err(|_| lines.err("bad base_dim"))?;
            let l = l.parse().map_err(|_| lines.err("bad blocks"))?;
            vec![d, l]
        }
        "fc" => {
            let w = lines.keyed("widths")?;
            parse_list(&w).ok_or_else(|| lines.err("bad widths"))?
        }
        other => return Err(lines.err(format!("unknown family `{other}`"))),
    };
    let squash = match lines.keyed("squash")?.as_str() {
        "0" => false,
        "1" => true,
        _ => return Err(lines.err("squash must be 0 or 1")),
    };
    let lower_s = lines.keyed("lower")?;
    let lower: Vec<f64> = parse_list(&lower_s).ok_or_else(|| lines.err("bad lower bounds"))?;
    let upper_s = lines.keyed("upper")?;
    let upper: Vec<f64> = parse_list(&upper_s).ok_or_else(|| lines.err("bad upper bounds"))?;
    let output = OutputMap::from_bounds(&lower, &upper, squash)?;
    let count_s = lines.keyed("params")?;
    let count: usize = count_s.parse().map_err(|_| lines.err("bad parameter count"))?;
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        let dims_s = lines.keyed("matrix")?;
        let dims: Vec<usize> = parse_list(&dims_s).ok_or_else(|| lines.err("bad matrix header"))?;
        if dims.len() != 2 {
            return Err(lines.err("matrix header needs rows and cols"));
        }
        let values_s = lines.next_line()?;
        let values: Vec<f64> = parse_list(&values_s).ok_or_else(|| lines.err("bad matrix values"))?;
        if values.len() != dims[0] * dims[1] {
            return Err(lines.err(format!(
                "expected {} values, found {}",
                dims[0] * dims[1],
                values.len()
            )));
        }
        params.push(DMatrix::from_row_slice(dims[0], dims[1], &values));
    }
    match family.as_str() {
        "pg" => Ok(AnyGenerator::Pg(PgGenerator::from_parts(
            shape_info[0],
            shape_info[1],
            activation,
            params,
            output,
        )?)),
        _ => Ok(AnyGenerator::Fc(FcGenerator::from_parts(
            shape_info, activation, params, output,
        )?)),
    }
}

pub fn save_checkpoint(gen: &AnyGenerator, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_checkpoint(gen, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<AnyGenerator> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{init_fc_generator, init_pg_generator, LatentBatch};

    #[test]
    fn pg_round_trip_is_lossless() {
        let g = init_pg_generator(3, 2, Activation::LeakyRelu, &[-2.0; 10], &[3.0; 10], 8).unwrap();
        let any = AnyGenerator::Pg(g);
        let mut buf = Vec::new();
        write_checkpoint(&any, &mut buf).unwrap();
        let back = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(any.params(), back.params());
        let z = LatentBatch::from_seed(1, 4, 3);
        let a = any.forward(&z, &[0.3, 0.8]).unwrap();
        let b = back.forward(&z, &[0.3, 0.8]).unwrap();
        assert_eq!(a.designs(), b.designs());
    }

    #[test]
    fn fc_round_trip() {
        let g = init_fc_generator(2, &[5, 3], Activation::Tanh, &[-1.0; 4], &[1.0; 4], 2).unwrap();
        let any = AnyGenerator::Fc(g);
        let mut buf = Vec::new();
        write_checkpoint(&any, &mut buf).unwrap();
        let back = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(any.params(), back.params());
    }

    #[test]
    fn truncated_file_rejected() {
        let g = init_pg_generator(2, 1, Activation::Tanh, &[-1.0; 4], &[1.0; 4], 8).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&AnyGenerator::Pg(g), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text.lines().take(9).collect::<Vec<_>>().join("\n");
        assert!(matches!(read_checkpoint(cut.as_bytes()), Err(Error::Checkpoint(_))));
        assert!(read_checkpoint("hello".as_bytes()).is_err());
    }
}
