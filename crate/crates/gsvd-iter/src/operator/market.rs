use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{CsrMatrix, DenseOperator, SharedOperator};
use crate::error::{GsvdError, Result};

/// A matrix as stored on disk: coordinate files become CSR, array files dense.
#[derive(Clone, Debug)]
pub enum MarketMatrix {
    Sparse(CsrMatrix),
    Dense(DMatrix<f64>),
}

impl MarketMatrix {
    pub fn into_operator(self) -> SharedOperator {
        match self {
            MarketMatrix::Sparse(m) => Arc::new(m),
            MarketMatrix::Dense(m) => Arc::new(DenseOperator::new(m)),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            MarketMatrix::Sparse(m) => m.to_dense_matrix(),
            MarketMatrix::Dense(m) => m.clone(),
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Layout {
    Coordinate,
    Array,
}

#[derive(Clone, Copy, PartialEq)]
enum Symmetry {
    General,
    Symmetric,
}

fn parse_err(line: usize, message: impl Into<String>) -> GsvdError {
    GsvdError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_banner(line: &str, lineno: usize) -> Result<(Layout, Symmetry)> {
    let tokens: Vec<String> = line.split_whitespace().map(str::to_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(lineno, "missing %%MatrixMarket matrix banner"));
    }
    let layout = match tokens[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(GsvdError::Unsupported(format!("format `{other}`"))),
    };
    match tokens[3].as_str() {
        "real" | "double" | "integer" => {}
        other => return Err(GsvdError::Unsupported(format!("field `{other}`"))),
    }
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(GsvdError::Unsupported(format!("symmetry `{other}`"))),
    };
    Ok((layout, symmetry))
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, lineno: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(lineno, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| parse_err(lineno, format!("cannot parse {what} `{tok}`")))
}

/// Parse a real general (or symmetric) Matrix Market stream.
pub fn parse_matrix_market<R: BufRead>(reader: R) -> Result<MarketMatrix> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (lineno, banner) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file"))?;
    let (layout, symmetry) = parse_banner(&banner?, lineno)?;

    let mut data = lines.filter_map(|(i, l)| match l {
        Ok(s) if s.trim().is_empty() || s.trim_start().starts_with('%') => None,
        other => Some((i, other)),
    });

    let (size_line, size) = data
        .next()
        .ok_or_else(|| parse_err(lineno + 1, "missing size line"))?;
    let size = size?;
    let mut tok = size.split_whitespace();
    let rows: usize = parse_num(tok.next(), size_line, "row count")?;
    let cols: usize = parse_num(tok.next(), size_line, "column count")?;

    match layout {
        Layout::Coordinate => {
            let nnz: usize = parse_num(tok.next(), size_line, "entry count")?;
            let mut trip = Vec::with_capacity(nnz);
            for _ in 0..nnz {
                let (ln, line) = data
                    .next()
                    .ok_or_else(|| parse_err(size_line, "fewer entries than declared"))?;
                let line = line?;
                let mut t = line.split_whitespace();
                let i: usize = parse_num(t.next(), ln, "row index")?;
                let j: usize = parse_num(t.next(), ln, "column index")?;
                let v: f64 = parse_num(t.next(), ln, "value")?;
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(parse_err(ln, format!("index ({i}, {j}) out of range")));
                }
                trip.push((i - 1, j - 1, v));
                if symmetry == Symmetry::Symmetric && i != j {
                    trip.push((j - 1, i - 1, v));
                }
            }
            Ok(MarketMatrix::Sparse(CsrMatrix::from_triplets(rows, cols, &trip)?))
        }
        Layout::Array => {
            let mut m = DMatrix::zeros(rows, cols);
            for j in 0..cols {
                let start = if symmetry == Symmetry::Symmetric { j } else { 0 };
                for i in start..rows {
                    let (ln, line) = data
                        .next()
                        .ok_or_else(|| parse_err(size_line, "fewer values than declared"))?;
                    let line = line?;
                    let v: f64 = parse_num(line.split_whitespace().next(), ln, "value")?;
                    m[(i, j)] = v;
                    if symmetry == Symmetry::Symmetric {
                        m[(j, i)] = v;
                    }
                }
            }
            Ok(MarketMatrix::Dense(m))
        }
    }
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<MarketMatrix> {
    parse_matrix_market(BufReader::new(File::open(path)?))
}

pub fn write_matrix_market_csr(path: impl AsRef<Path>, m: &CsrMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", m.nrows(), m.ncols(), m.nnz())?;
    for (i, j, v) in m.triplets() {
        writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_matrix_market_dense(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} {}", m.nrows(), m.ncols())?;
    for v in m.iter() {
        writeln!(w, "{v:e}")?;
    }
    w.flush()?;
    Ok(())
}

/// Vectors are stored as the columns of an array file.
pub fn write_vectors(path: impl AsRef<Path>, vectors: &[DVector<f64>]) -> Result<()> {
    let n = vectors.first().map_or(0, |v| v.len());
    let mut m = DMatrix::zeros(n, vectors.len());
    for (j, v) in vectors.iter().enumerate() {
        if v.len() != n {
            return Err(GsvdError::DimensionMismatch {
                context: "write_vectors",
                expected: n,
                found: v.len(),
            });
        }
        m.set_column(j, v);
    }
    write_matrix_market_dense(path, &m)
}

pub fn read_vectors(path: impl AsRef<Path>) -> Result<Vec<DVector<f64>>> {
    let m = read_matrix_market(path)?.to_dense();
    Ok(m.column_iter().map(|c| c.into_owned()).collect())
}
