//! Feature cache: one JSON header line, then one little-endian f32 row per
//! clip.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::FeatureDims;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheHeader {
    pub dims: FeatureDims,
    pub dim: usize,
    pub rows: usize,
    /// Owner of each row, typically a video id.
    pub ids: Vec<String>,
}

pub fn write_cache(
    mut out: impl Write,
    dims: FeatureDims,
    ids: &[String],
    rows: &[Vec<f64>],
) -> Result<()> {
    let dim = dims.fused_dim();
    if ids.len() != rows.len() {
        return Err(Error::dims(format!("{} ids", rows.len()), ids.len()));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != dim) {
        return Err(Error::dims(dim, r.len()));
    }
    let header = CacheHeader {
        dims,
        dim,
        rows: rows.len(),
        ids: ids.to_vec(),
    };
    let io = |e| Error::io("<feature cache>", e);
    let line = serde_json::to_string(&header).map_err(|e| Error::Parse(e.to_string()))?;
    out.write_all(line.as_bytes()).map_err(io)?;
    out.write_all(b"\n").map_err(io)?;
    let mut buf = Vec::with_capacity(rows.len() * dim * 4);
    for r in rows {
        for &v in r {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out.write_all(&buf).map_err(io)
}

pub fn read_cache(mut input: impl BufRead) -> Result<(CacheHeader, Vec<Vec<f64>>)> {
    let io = |e| Error::io("<feature cache>", e);
    let mut line = String::new();
    input.read_line(&mut line).map_err(io)?;
    let header: CacheHeader =
        serde_json::from_str(line.trim_end()).map_err(|e| Error::Parse(format!("cache header: {e}")))?;
    if header.dim != header.dims.fused_dim() || header.ids.len() != header.rows {
        return Err(Error::Parse("inconsistent cache header".into()));
    }
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(io)?;
    if bytes.len() != header.rows * header.dim * 4 {
        return Err(Error::Parse(format!(
            "cache body has {} bytes, expected {}",
            bytes.len(),
            header.rows * header.dim * 4
        )));
    }
    let rows = bytes
        .chunks_exact(header.dim * 4)
        .map(|row| {
            row.chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
                .collect()
        })
        .collect();
    Ok((header, rows))
}
