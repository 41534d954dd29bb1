//! Matrix dump format and content hashing.
//!
//! Matrices are written as dense row-major text preceded by a header line
//! `# name rows cols`. Hashes are hex-encoded SHA-256 over canonical bytes.

use crate::Mat;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;

/// Hex SHA-256 of arbitrary bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of a matrix over its shape and little-endian entries (row-major).
pub fn matrix_hash(m: &Mat) -> String {
    let mut h = Sha256::new();
    h.update((m.nrows() as u64).to_le_bytes());
    h.update((m.ncols() as u64).to_le_bytes());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            h.update(m[(i, j)].to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// Hash over several matrices in order.
pub fn matrices_hash(ms: &[&Mat]) -> String {
    let joined: String = ms.iter().map(|m| matrix_hash(m)).collect();
    sha256_hex(joined.as_bytes())
}

/// Render a matrix in the dump format.
pub fn dump_matrix(name: &str, m: &Mat) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {} {} {}", name, m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.17e}", m[(i, j)])).collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
    s
}

/// Parse every matrix in a dump, in order of appearance.
pub fn parse_matrices(text: &str) -> Result<Vec<(String, Mat)>, String> {
    let mut out = Vec::new();
    let mut lines = text.lines().peekable();
    while let Some(line) = lines.next() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some(rest) = line.strip_prefix('#') else {
            return Err(format!("expected header, found `{line}`"));
        };
        let parts: Vec<&str> = rest.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(format!("bad header `{line}`"));
        }
        let rows: usize = parts[1].parse().map_err(|_| format!("bad rows in `{line}`"))?;
        let cols: usize = parts[2].parse().map_err(|_| format!("bad cols in `{line}`"))?;
        let mut m = Mat::zeros(rows, cols);
        for i in 0..rows {
            let row = lines.next().ok_or("truncated matrix")?;
            let vals: Vec<f64> = row
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| format!("bad number `{t}`")))
                .collect::<Result<_, _>>()?;
            if vals.len() != cols {
                return Err(format!("row {i} of {} has {} entries", parts[0], vals.len()));
            }
            for (j, v) in vals.into_iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        out.push((parts[0].to_string(), m));
    }
    Ok(out)
}
