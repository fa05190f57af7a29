//! Matrix Market coordinate-format IO.
//!
//! Only `matrix coordinate real {general|symmetric}` is supported. Symmetric
//! files store the lower triangle; reading mirrors it.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::csr::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmSymmetry {
    General,
    Symmetric,
}

fn mm_err(line: usize, msg: impl Into<String>) -> Error {
    Error::MatrixMarket {
        line,
        msg: msg.into(),
    }
}

pub fn read_matrix_market<R: BufRead>(reader: R) -> Result<SparseMatrix> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| mm_err(1, "empty input"))?;
    let header = header?;
    let tokens: Vec<String> = header.split_whitespace().map(str::to_lowercase).collect();
    if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(mm_err(1, "missing %%MatrixMarket matrix header"));
    }
    if tokens[2] != "coordinate" {
        return Err(mm_err(1, format!("unsupported format {}", tokens[2])));
    }
    if tokens[3] != "real" && tokens[3] != "integer" {
        return Err(mm_err(1, format!("unsupported field {}", tokens[3])));
    }
    let symmetry = match tokens[4].as_str() {
        "general" => MmSymmetry::General,
        "symmetric" => MmSymmetry::Symmetric,
        s => return Err(mm_err(1, format!("unsupported symmetry {s}"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(mm_err(lineno, "expected `rows cols entries`"));
                }
                let p = |s: &str| s.parse::<usize>().map_err(|e| mm_err(lineno, e.to_string()));
                let (m, n, nnz) = (p(fields[0])?, p(fields[1])?, p(fields[2])?);
                triplets.reserve(if symmetry == MmSymmetry::Symmetric { 2 * nnz } else { nnz });
                size = Some((m, n, nnz));
            }
            Some((m, n, _)) => {
                if fields.len() != 3 {
                    return Err(mm_err(lineno, "expected `row col value`"));
                }
                let i: usize = fields[0].parse().map_err(|_| mm_err(lineno, "bad row index"))?;
                let j: usize = fields[1].parse().map_err(|_| mm_err(lineno, "bad column index"))?;
                let v: f64 = fields[2].parse().map_err(|_| mm_err(lineno, "bad value"))?;
                if i == 0 || j == 0 || i > m || j > n {
                    return Err(mm_err(lineno, format!("index ({i},{j}) outside {m}x{n}")));
                }
                triplets.push((i - 1, j - 1, v));
                if symmetry == MmSymmetry::Symmetric && i != j {
                    triplets.push((j - 1, i - 1, v));
                }
            }
        }
    }
    let (m, n, nnz) = size.ok_or_else(|| mm_err(0, "missing size line"))?;
    let stored = match symmetry {
        MmSymmetry::General => triplets.len(),
        MmSymmetry::Symmetric => triplets.iter().filter(|t| t.0 >= t.1).count(),
    };
    if stored != nnz {
        return Err(mm_err(0, format!("expected {nnz} entries, found {stored}")));
    }
    SparseMatrix::from_triplets(m, n, &triplets)
}

pub fn write_matrix_market<W: Write>(
    mut w: W,
    a: &SparseMatrix,
    symmetry: MmSymmetry,
) -> Result<()> {
    let entries: Vec<(usize, usize, f64)> = match symmetry {
        MmSymmetry::General => a.triplets().collect(),
        MmSymmetry::Symmetric => a.triplets().filter(|&(i, j, _)| i >= j).collect(),
    };
    let kind = match symmetry {
        MmSymmetry::General => "general",
        MmSymmetry::Symmetric => "symmetric",
    };
    let mut out = String::with_capacity(32 * entries.len() + 64);
    writeln!(out, "%%MatrixMarket matrix coordinate real {kind}").unwrap();
    writeln!(out, "{} {} {}", a.nrows(), a.ncols(), entries.len()).unwrap();
    for (i, j, v) in entries {
        // `{:e}` round-trips f64 exactly
        writeln!(out, "{} {} {:e}", i + 1, j + 1, v).unwrap();
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}

pub fn read_matrix_market_file(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    let f = std::fs::File::open(path)?;
    read_matrix_market(std::io::BufReader::new(f))
}

pub fn write_matrix_market_file(
    path: impl AsRef<Path>,
    a: &SparseMatrix,
    symmetry: MmSymmetry,
) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_matrix_market(std::io::BufWriter::new(f), a, symmetry)
}
