//! Plain-text model files.
//!
//! ```text
//! frustlab-model v1 <kind>
//! <name> <rows> <cols>
//! <row 0: cols space-separated numbers>
//! ...
//! ```
//!
//! Tensors follow one another in a fixed order per model kind. Numbers use
//! Rust's shortest round-trip formatting, so save/load is bit-exact.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

const MAGIC: &str = "frustlab-model";
const VERSION: &str = "v1";

pub(crate) struct TensorWriter {
    out: String,
}

impl TensorWriter {
    pub fn new(kind: &str) -> Self {
        TensorWriter {
            out: format!("{MAGIC} {VERSION} {kind}\n"),
        }
    }

    pub fn matrix(&mut self, name: &str, m: &Matrix) {
        let _ = writeln!(self.out, "{name} {} {}", m.rows(), m.cols());
        for r in m.row_iter() {
            self.row(r);
        }
    }

    pub fn vector(&mut self, name: &str, v: &[f64]) {
        let _ = writeln!(self.out, "{name} 1 {}", v.len());
        self.row(v);
    }

    fn row(&mut self, r: &[f64]) {
        for (j, x) in r.iter().enumerate() {
            if j > 0 {
                self.out.push(' ');
            }
            let _ = write!(self.out, "{x}");
        }
        self.out.push('\n');
    }

    pub fn finish(self) -> String {
        self.out
    }
}

pub(crate) struct TensorReader {
    tensors: HashMap<String, Matrix>,
}

impl TensorReader {
    pub fn parse(text: &str, kind: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidArgument(format!("model file: {msg}"));
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| bad("empty".into()))?;
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 3 || head[0] != MAGIC || head[1] != VERSION {
            return Err(bad(format!("unrecognised header {header:?}")));
        }
        if head[2] != kind {
            return Err(bad(format!("expected a {kind} model, found {}", head[2])));
        }
        let mut tensors = HashMap::new();
        while let Some((lineno, line)) = lines.next() {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(bad(format!(
                    "line {}: expected `<name> <rows> <cols>`",
                    lineno + 1
                )));
            }
            let rows: usize = parts[1]
                .parse()
                .map_err(|_| bad(format!("line {}: bad row count", lineno + 1)))?;
            let cols: usize = parts[2]
                .parse()
                .map_err(|_| bad(format!("line {}: bad column count", lineno + 1)))?;
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (ln, row) = lines
                    .next()
                    .ok_or_else(|| bad(format!("tensor {} truncated", parts[0])))?;
                let before = data.len();
                for tok in row.split_whitespace() {
                    let v: f64 = tok
                        .parse()
                        .map_err(|_| bad(format!("line {}: bad number {tok:?}", ln + 1)))?;
                    if !v.is_finite() {
                        return Err(bad(format!("line {}: non-finite value", ln + 1)));
                    }
                    data.push(v);
                }
                if data.len() - before != cols {
                    return Err(bad(format!("line {}: expected {cols} values", ln + 1)));
                }
            }
            tensors.insert(parts[0].to_string(), Matrix::from_vec(rows, cols, data)?);
        }
        Ok(TensorReader { tensors })
    }

    pub fn matrix(&mut self, name: &str) -> Result<Matrix> {
        self.tensors
            .remove(name)
            .ok_or_else(|| Error::InvalidArgument(format!("model file: missing tensor {name}")))
    }

    pub fn vector(&mut self, name: &str) -> Result<Vec<f64>> {
        let m = self.matrix(name)?;
        if m.rows() != 1 {
            return Err(Error::dims(format!("tensor {name} should be a single row")));
        }
        Ok(m.into_vec())
    }

    pub fn scalar(&mut self, name: &str) -> Result<f64> {
        let v = self.vector(name)?;
        if v.len() != 1 {
            return Err(Error::dims(format!("tensor {name} should be a scalar")));
        }
        Ok(v[0])
    }
}
