//! Matrix Market coordinate files: the lingua franca for published sparse
//! matrices. Reads real/integer/pattern entries with general or symmetric
//! storage; writes the canonical real/general form.
//!
//! Indices are 1-based on disk and 0-based in memory. Pattern entries load
//! as 1.0; a symmetric file contributes each off-diagonal entry to both
//! triangles.

use std::fs;
use std::path::Path;

use sparse_code::SparseMatrix;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum MtxError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {detail}")]
    Malformed {
        path: String,
        line: usize,
        detail: String,
    },
}

pub fn load_matrix_market(path: &Path) -> Result<SparseMatrix, MtxError> {
    let text = fs::read_to_string(path).map_err(|source| MtxError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_matrix_market(&text, &path.display().to_string())
}

pub fn write_matrix_market(path: &Path, matrix: &SparseMatrix) -> Result<(), MtxError> {
    fs::write(path, format_matrix_market(matrix)).map_err(|source| MtxError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Canonical emission: real/general, entries in row-major order, shortest
/// round-trip value formatting. Deterministic byte for byte.
pub fn format_matrix_market(matrix: &SparseMatrix) -> String {
    let mut out = format!(
        "%%MatrixMarket matrix coordinate real general\n{} {} {}\n",
        matrix.rows(),
        matrix.cols(),
        matrix.nnz()
    );
    for (r, c, v) in matrix.iter_entries() {
        out.push_str(&format!("{} {} {}\n", r + 1, c + 1, v));
    }
    out
}

pub fn parse_matrix_market(text: &str, label: &str) -> Result<SparseMatrix, MtxError> {
    let fail = |line: usize, detail: String| MtxError::Malformed {
        path: label.to_string(),
        line,
        detail,
    };

    let mut lines = text.lines().enumerate();
    let banner = lines
        .next()
        .ok_or_else(|| fail(1, "empty file".to_string()))?
        .1;
    let header: Vec<String> = banner
        .split_whitespace()
        .map(|t| t.to_ascii_lowercase())
        .collect();
    if header.len() != 5 || header[0] != "%%matrixmarket" || header[1] != "matrix" {
        return Err(fail(
            1,
            format!("expected '%%MatrixMarket matrix coordinate <field> <symmetry>', got '{banner}'"),
        ));
    }
    if header[2] != "coordinate" {
        return Err(fail(1, format!("unsupported format '{}' (only coordinate)", header[2])));
    }
    let pattern = match header[3].as_str() {
        "real" | "integer" => false,
        "pattern" => true,
        other => return Err(fail(1, format!("unsupported field '{other}'"))),
    };
    let symmetric = match header[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(fail(1, format!("unsupported symmetry '{other}'"))),
    };

    let mut shape: Option<(usize, usize, usize)> = None;
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut seen_entries = 0usize;
    let mut last_line = 1usize;
    for (idx, raw) in lines {
        let line_no = idx + 1;
        last_line = line_no;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        let Some((rows, cols, declared)) = shape else {
            if tokens.len() != 3 {
                return Err(fail(
                    line_no,
                    format!("size line needs 'rows cols nnz', got '{trimmed}'"),
                ));
            }
            let parse = |t: &str, what: &str| {
                t.parse::<usize>()
                    .map_err(|_| fail(line_no, format!("bad {what} '{t}'")))
            };
            let rows = parse(tokens[0], "row count")?;
            let cols = parse(tokens[1], "column count")?;
            let declared = parse(tokens[2], "entry count")?;
            if symmetric && rows != cols {
                return Err(fail(
                    line_no,
                    format!("symmetric matrix must be square, got {rows} x {cols}"),
                ));
            }
            shape = Some((rows, cols, declared));
            continue;
        };
        if seen_entries == declared {
            return Err(fail(
                line_no,
                format!("unexpected content after {declared} declared entries"),
            ));
        }
        let want = if pattern { 2 } else { 3 };
        if tokens.len() != want {
            return Err(fail(
                line_no,
                format!("expected {want} fields per entry, got '{trimmed}'"),
            ));
        }
        let r: usize = tokens[0]
            .parse()
            .map_err(|_| fail(line_no, format!("bad row index '{}'", tokens[0])))?;
        let c: usize = tokens[1]
            .parse()
            .map_err(|_| fail(line_no, format!("bad column index '{}'", tokens[1])))?;
        if r < 1 || r > rows || c < 1 || c > cols {
            return Err(fail(
                line_no,
                format!("entry ({r}, {c}) outside {rows} x {cols}"),
            ));
        }
        let v: f64 = if pattern {
            1.0
        } else {
            let parsed = tokens[2]
                .parse()
                .map_err(|_| fail(line_no, format!("bad value '{}'", tokens[2])))?;
            if !f64::is_finite(parsed) {
                return Err(fail(line_no, format!("non-finite value '{}'", tokens[2])));
            }
            parsed
        };
        triplets.push((r - 1, c - 1, v));
        if symmetric && r != c {
            triplets.push((c - 1, r - 1, v));
        }
        seen_entries += 1;
    }
    let Some((rows, cols, declared)) = shape else {
        return Err(fail(last_line, "missing size line".to_string()));
    };
    if seen_entries != declared {
        return Err(fail(
            last_line,
            format!("declared {declared} entries, found {seen_entries}"),
        ));
    }
    SparseMatrix::from_triplets(rows, cols, &triplets).map_err(|e| fail(last_line, e.to_string()))
}

// ---------------------------------------------------------------------------
