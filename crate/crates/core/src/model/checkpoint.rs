//! Checkpoint: one JSON header line, then the weights as little-endian f32
//! in the order w1, b1, w2, b2.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::mlp::{ModelParams, NormStats, HIDDEN};
use super::{Model, Pipeline};
use crate::error::{Error, Result};
use crate::features::FeatureDims;

const FORMAT: &str = "stabilitykit-mlp";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    input_dim: usize,
    hidden: usize,
    dims: FeatureDims,
    pipeline: Pipeline,
    norm_stats: NormStats,
    config_hash: String,
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn write_checkpoint(mut out: impl Write, model: &Model) -> Result<()> {
    let p = &model.params;
    if p.norm.dim() != p.input_dim || model.dims.fused_dim() != p.input_dim {
        return Err(Error::dims(p.input_dim, model.dims.fused_dim()));
    }
    let header = Header {
        format: FORMAT.into(),
        version: VERSION,
        input_dim: p.input_dim,
        hidden: HIDDEN,
        dims: model.dims,
        pipeline: model.pipeline,
        norm_stats: p.norm.clone(),
        config_hash: format!("{:016x}", model.config_hash),
    };
    let io = |e| Error::io("<checkpoint>", e);
    let line = serde_json::to_string(&header).map_err(|e| Error::Parse(e.to_string()))?;
    out.write_all(line.as_bytes()).map_err(io)?;
    out.write_all(b"\n").map_err(io)?;
    let mut blob = Vec::with_capacity(p.param_count() * 4);
    for t in p.tensors() {
        for &v in t {
            blob.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out.write_all(&blob).map_err(io)
}

pub fn read_checkpoint(mut input: impl BufRead) -> Result<Model> {
    let io = |e| Error::io("<checkpoint>", e);
    let mut line = String::new();
    input.read_line(&mut line).map_err(io)?;
    let h: Header = serde_json::from_str(line.trim_end())
        .map_err(|e| Error::Parse(format!("checkpoint header: {e}")))?;
    if h.format != FORMAT || h.version != VERSION {
        return Err(Error::Parse(format!("unsupported checkpoint {} v{}", h.format, h.version)));
    }
    if h.hidden != HIDDEN || h.dims.fused_dim() != h.input_dim || h.norm_stats.dim() != h.input_dim {
        return Err(Error::Parse("inconsistent checkpoint header".into()));
    }
    let config_hash = u64::from_str_radix(&h.config_hash, 16)
        .map_err(|e| Error::Parse(format!("config hash: {e}")))?;
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(io)?;
    let mut params = ModelParams::zeros(h.input_dim);
    if bytes.len() != params.param_count() * 4 {
        return Err(Error::Parse(format!(
            "checkpoint blob has {} bytes, expected {}",
            bytes.len(),
            params.param_count() * 4
        )));
    }
    let mut vals = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64);
    for t in params.tensors_mut() {
        for w in t.iter_mut() {
            *w = vals.next().unwrap_or(0.0);
        }
    }
    params.norm = h.norm_stats;
    Ok(Model {
        params,
        pipeline: h.pipeline,
        dims: h.dims,
        config_hash,
    })
}
