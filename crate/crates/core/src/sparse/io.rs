//! Matrix Market coordinate files for matrices, array files (or plain
//! whitespace-separated numbers) for vectors.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::SparseMatrix;
use crate::error::{AmgError, Result};

fn parse_err<T>(line: usize, msg: impl Into<String>) -> Result<T> {
    Err(AmgError::Parse {
        line,
        msg: msg.into(),
    })
}

/// Parses a `%%MatrixMarket matrix coordinate` document. `real`, `integer`
/// and `pattern` fields are accepted (pattern entries become 1), with
/// `general` or `symmetric` storage.
pub fn parse_matrix_market(text: &str) -> Result<SparseMatrix> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (_, header) = lines
        .next()
        .ok_or(AmgError::Parse { line: 1, msg: "empty input".into() })?;
    let head: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if head.len() != 5 || head[0] != "%%matrixmarket" || head[1] != "matrix" {
        return parse_err(1, "expected '%%MatrixMarket matrix ...' header");
    }
    if head[2] != "coordinate" {
        return parse_err(1, format!("unsupported format '{}'", head[2]));
    }
    let pattern = match head[3].as_str() {
        "real" | "integer" | "double" => false,
        "pattern" => true,
        f => return parse_err(1, format!("unsupported field '{f}'")),
    };
    let symmetric = match head[4].as_str() {
        "general" => false,
        "symmetric" => true,
        s => return parse_err(1, format!("unsupported symmetry '{s}'")),
    };

    let mut body = lines.filter(|(_, l)| !l.is_empty() && !l.starts_with('%'));
    let (size_line, size) = body
        .next()
        .ok_or(AmgError::Parse { line: 1, msg: "missing size line".into() })?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .or_else(|_| parse_err(size_line, "malformed size line"))?;
    if dims.len() != 3 {
        return parse_err(size_line, "size line needs rows, cols and entries");
    }
    let (n_rows, n_cols, count) = (dims[0], dims[1], dims[2]);

    let mut triplets = Vec::with_capacity(if symmetric { 2 * count } else { count });
    let mut seen = 0;
    for (ln, line) in body {
        let tok: Vec<&str> = line.split_whitespace().collect();
        let want = if pattern { 2 } else { 3 };
        if tok.len() != want {
            return parse_err(ln, format!("expected {want} fields"));
        }
        let idx = |t: &str| -> Result<usize> {
            match t.parse::<usize>() {
                Ok(v) if v >= 1 => Ok(v - 1),
                _ => parse_err(ln, format!("bad index '{t}'")),
            }
        };
        let (r, c) = (idx(tok[0])?, idx(tok[1])?);
        if r >= n_rows || c >= n_cols {
            return parse_err(ln, "index out of range");
        }
        let v = if pattern {
            1.0
        } else {
            tok[2]
                .parse::<f64>()
                .or_else(|_| parse_err(ln, format!("bad value '{}'", tok[2])))?
        };
        triplets.push((r, c, v));
        if symmetric && r != c {
            triplets.push((c, r, v));
        }
        seen += 1;
    }
    if seen != count {
        return parse_err(size_line, format!("declared {count} entries, found {seen}"));
    }
    SparseMatrix::from_triplets(n_rows, n_cols, &triplets)
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    parse_matrix_market(&fs::read_to_string(path)?)
}

/// Serializes as `real general` coordinate data with round-trip precision.
pub fn format_matrix_market(a: &SparseMatrix) -> String {
    let mut s = String::with_capacity(32 * a.nnz() + 64);
    s.push_str("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(s, "{} {} {}", a.n_rows(), a.n_cols(), a.nnz());
    for i in 0..a.n_rows() {
        for (j, v) in a.row_iter(i) {
            let _ = writeln!(s, "{} {} {:e}", i + 1, j + 1, v);
        }
    }
    s
}

pub fn write_matrix_market(path: impl AsRef<Path>, a: &SparseMatrix) -> Result<()> {
    fs::write(path, format_matrix_market(a))?;
    Ok(())
}

/// Reads a dense vector from either a Matrix Market `array` file with a
/// single column or a plain list of whitespace-separated numbers.
pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    let mut header_seen = false;
    let mut size: Option<usize> = None;
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let line = raw.trim();
        if line.to_ascii_lowercase().starts_with("%%matrixmarket") {
            if !line.to_ascii_lowercase().contains("array") {
                return parse_err(ln, "only array-format vectors are supported");
            }
            header_seen = true;
            continue;
        }
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if header_seen && size.is_none() {
            let dims: Vec<&str> = line.split_whitespace().collect();
            if dims.len() != 2 || dims[1] != "1" {
                return parse_err(ln, "vector size line must be 'n 1'");
            }
            size = Some(dims[0].parse().or_else(|_| parse_err(ln, "bad size"))?);
            continue;
        }
        for t in line.split_whitespace() {
            values.push(
                t.parse::<f64>()
                    .or_else(|_| parse_err(ln, format!("bad value '{t}'")))?,
            );
        }
    }
    if let Some(n) = size {
        if n != values.len() {
            return parse_err(1, format!("declared {n} values, found {}", values.len()));
        }
    }
    Ok(values)
}

pub fn read_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    parse_vector(&fs::read_to_string(path)?)
}

pub fn format_vector(v: &[f64]) -> String {
    let mut s = String::with_capacity(24 * v.len() + 48);
    s.push_str("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(s, "{} 1", v.len());
    for x in v {
        let _ = writeln!(s, "{x:e}");
    }
    s
}

pub fn write_vector(path: impl AsRef<Path>, v: &[f64]) -> Result<()> {
    fs::write(path, format_vector(v))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let a = SparseMatrix::from_triplets(
            3,
            2,
            &[(0, 0, 1.5), (2, 1, -1.0 / 3.0), (1, 0, 1e-300)],
        )
        .unwrap();
        assert_eq!(parse_matrix_market(&format_matrix_market(&a)).unwrap(), a);
    }

    #[test]
    fn symmetric_and_pattern() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n% c\n2 2 2\n1 1 4\n2 1 -1\n";
        let a = parse_matrix_market(text).unwrap();
        assert_eq!(a.get(0, 1), -1.0);
        assert_eq!(a.get(1, 0), -1.0);
        let p = parse_matrix_market("%%MatrixMarket matrix coordinate pattern general\n2 2 1\n1 2\n")
            .unwrap();
        assert_eq!(p.get(0, 1), 1.0);
    }

    #[test]
    fn malformed() {
        assert!(parse_matrix_market("").is_err());
        assert!(parse_matrix_market("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n").is_err());
        assert!(parse_matrix_market("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n").is_err());
        assert!(parse_matrix_market("%%MatrixMarket matrix coordinate complex general\n1 1 0\n").is_err());
    }

    #[test]
    fn vectors() {
        let v = vec![1.0, -2.5, 1e-17];
        assert_eq!(parse_vector(&format_vector(&v)).unwrap(), v);
        assert_eq!(parse_vector("1 2\n3\n").unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(parse_vector("1 x").is_err());
    }
}
