//! File formats: Matrix Market (coordinate, symmetric), CSV datasets, and a
//! little-endian binary dense format with magic header `LSPECDM1`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::{DataMatrix, SymmetricMatrix};

pub const BINARY_MAGIC: &[u8; 8] = b"LSPECDM1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Csv,
    Binary,
}

fn format_err(line: usize, message: impl Into<String>) -> Error {
    Error::Format {
        line,
        message: message.into(),
    }
}

/// Reads a Matrix Market coordinate file into a `SymmetricMatrix`.
///
/// The `symmetric` qualifier is the expected form (lower triangle stored);
/// `general` files are accepted only when their entries form an exactly
/// symmetric matrix. Duplicate coordinates are summed.
pub fn load_matrix_market(path: impl AsRef<Path>) -> Result<SymmetricMatrix> {
    let file = File::open(path.as_ref())?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| format_err(1, "empty file"))
        .and_then(|(n, l)| Ok((n, l?)))?;
    let head: Vec<String> = header
        .split_whitespace()
        .map(|t| t.to_lowercase())
        .collect();
    if head.len() < 5 || head[0] != "%%matrixmarket" || head[1] != "matrix" {
        return Err(format_err(1, "missing %%MatrixMarket matrix header"));
    }
    if head[2] != "coordinate" {
        return Err(format_err(1, format!("unsupported layout '{}'", head[2])));
    }
    match head[3].as_str() {
        "real" | "integer" => {}
        other => return Err(format_err(1, format!("unsupported field '{other}'"))),
    }
    let declared_symmetric = match head[4].as_str() {
        "symmetric" => true,
        "general" => false,
        other => return Err(format_err(1, format!("unsupported symmetry '{other}'"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut general: Vec<(usize, usize, f64)> = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let mut toks = trimmed.split_whitespace();
        if size.is_none() {
            let rows: usize = parse_tok(&mut toks, lineno, "row count")?;
            let cols: usize = parse_tok(&mut toks, lineno, "column count")?;
            let nnz: usize = parse_tok(&mut toks, lineno, "entry count")?;
            if rows != cols {
                return Err(Error::Dimension(format!(
                    "matrix is {rows}x{cols}, expected square"
                )));
            }
            if rows == 0 {
                return Err(Error::Dimension("matrix dimension must be >= 1".into()));
            }
            size = Some((rows, cols, nnz));
            triplets.reserve(nnz);
            continue;
        }
        let i: usize = parse_tok(&mut toks, lineno, "row index")?;
        let j: usize = parse_tok(&mut toks, lineno, "column index")?;
        let v: f64 = parse_tok(&mut toks, lineno, "value")?;
        let (dim, _, _) = size.unwrap();
        if i == 0 || j == 0 || i > dim || j > dim {
            return Err(format_err(lineno, format!("index ({i}, {j}) out of range")));
        }
        if declared_symmetric {
            if j > i {
                return Err(format_err(
                    lineno,
                    "symmetric file stores only the lower triangle",
                ));
            }
            triplets.push((i - 1, j - 1, v));
        } else {
            general.push((i - 1, j - 1, v));
        }
    }
    let (dim, _, declared_nnz) = size.ok_or_else(|| format_err(1, "missing size line"))?;
    let read = if declared_symmetric {
        triplets.len()
    } else {
        general.len()
    };
    if read != declared_nnz {
        return Err(format_err(
            0,
            format!("header declares {declared_nnz} entries, file has {read}"),
        ));
    }

    if !declared_symmetric {
        // A general file must describe an exactly symmetric matrix: every
        // off-diagonal entry needs a matching transpose partner.
        let mut merged: std::collections::BTreeMap<(usize, usize), f64> =
            std::collections::BTreeMap::new();
        for (i, j, v) in &general {
            *merged.entry((*i, *j)).or_insert(0.0) += v;
        }
        for (&(i, j), &v) in &merged {
            if i < j {
                continue;
            }
            let vt = merged.get(&(j, i)).copied().unwrap_or(0.0);
            if i != j && v != vt {
                return Err(Error::Value(format!(
                    "general file is not symmetric: entry ({}, {}) = {v} but ({}, {}) = {vt}",
                    i + 1,
                    j + 1,
                    j + 1,
                    i + 1
                )));
            }
            triplets.push((i, j, v));
        }
    }
    SymmetricMatrix::from_triplets(dim, &triplets)
}

fn parse_tok<'a, T: std::str::FromStr>(
    toks: &mut impl Iterator<Item = &'a str>,
    lineno: usize,
    what: &str,
) -> Result<T> {
    let tok = toks
        .next()
        .ok_or_else(|| format_err(lineno, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| format_err(lineno, format!("cannot parse {what} from '{tok}'")))
}

/// Writes the lower triangle in Matrix Market symmetric coordinate form.
/// Values use shortest round-trip formatting, so save/load is bit-exact.
pub fn save_matrix_market(m: &SymmetricMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    let entries: Vec<(usize, usize, f64)> = m.upper_entries().collect();
    writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
    writeln!(w, "{} {} {}", m.dim(), m.dim(), entries.len())?;
    for (i, j, v) in entries {
        // emit (row >= col) as the format expects
        writeln!(w, "{} {} {}", j + 1, i + 1, v)?;
    }
    Ok(())
}

/// Reads a rectangular numeric table.
pub fn load_dataset(path: impl AsRef<Path>, format: DatasetFormat) -> Result<DataMatrix> {
    match format {
        DatasetFormat::Csv => load_csv(path),
        DatasetFormat::Binary => load_binary(path),
    }
}

fn load_csv(path: impl AsRef<Path>) -> Result<DataMatrix> {
    let file = File::open(path.as_ref())?;
    let reader = BufReader::new(file);
    let mut data = Vec::new();
    let mut cols: Option<usize> = None;
    let mut rows = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut count = 0usize;
        for tok in trimmed.split(',') {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|_| format_err(lineno, format!("cannot parse value '{}'", tok.trim())))?;
            if !v.is_finite() {
                return Err(Error::Value(format!(
                    "non-finite value at line {lineno}: {v}"
                )));
            }
            data.push(v);
            count += 1;
        }
        match cols {
            None => cols = Some(count),
            Some(c) if c != count => {
                return Err(format_err(
                    lineno,
                    format!("ragged row: expected {c} values, got {count}"),
                ))
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| format_err(0, "empty dataset"))?;
    DataMatrix::new(rows, cols, data)
}

fn load_binary(path: impl AsRef<Path>) -> Result<DataMatrix> {
    let mut f = BufReader::new(File::open(path.as_ref())?);
    let mut magic = [0u8; 8];
    f.read_exact(&mut magic)
        .map_err(|_| format_err(0, "file too short for magic header"))?;
    if &magic != BINARY_MAGIC {
        return Err(format_err(0, "bad magic header, expected LSPECDM1"));
    }
    let rows = read_u64(&mut f)? as usize;
    let cols = read_u64(&mut f)? as usize;
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| format_err(0, "dimension overflow"))?;
    let mut data = Vec::with_capacity(count);
    let mut buf = [0u8; 8];
    for k in 0..count {
        f.read_exact(&mut buf)
            .map_err(|_| format_err(0, format!("truncated payload at value {k}")))?;
        let v = f64::from_le_bytes(buf);
        if !v.is_finite() {
            return Err(Error::Value(format!("non-finite value at index {k}")));
        }
        data.push(v);
    }
    DataMatrix::new(rows, cols, data)
}

fn read_u64(f: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    f.read_exact(&mut buf)
        .map_err(|_| format_err(0, "truncated header"))?;
    Ok(u64::from_le_bytes(buf))
}

/// Writes a dense row-major matrix in the `LSPECDM1` binary format.
pub fn save_binary(rows: usize, cols: usize, data: &[f64], path: impl AsRef<Path>) -> Result<()> {
    assert_eq!(rows * cols, data.len());
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&(rows as u64).to_le_bytes())?;
    w.write_all(&(cols as u64).to_le_bytes())?;
    for v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}
