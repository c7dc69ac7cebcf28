use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;

pub const HIDDEN: usize = 128;

/// Per-coordinate standardization fitted on training features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn identity(dim: usize) -> Self {
        NormStats {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Mean and population std per coordinate; a zero-variance coordinate
    /// gets std 1.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::InsufficientData("no rows to fit normalization".into()))?;
        let d = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            if r.len() != d {
                return Err(Error::dims(d, r.len()));
            }
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(NormStats { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        f.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// Two-layer regression head: D -> 128 (ReLU) -> 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub input_dim: usize,
    /// Row-major, `HIDDEN` rows of `input_dim`.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
    pub norm: NormStats,
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub z: Vec<f64>,
    pub pre: Vec<f64>,
    pub output: f64,
}

impl ModelParams {
    pub fn zeros(input_dim: usize) -> Self {
        ModelParams {
            input_dim,
            w1: vec![0.0; HIDDEN * input_dim],
            b1: vec![0.0; HIDDEN],
            w2: vec![0.0; HIDDEN],
            b2: 0.0,
            norm: NormStats::identity(input_dim),
        }
    }

    /// He-style uniform initialization scaled by fan-in; biases start at zero.
    pub fn init(input_dim: usize, seed: u64) -> Self {
        let mut rng = seeded(seed);
        let mut p = Self::zeros(input_dim);
        let l1 = (6.0 / input_dim as f64).sqrt();
        p.w1.iter_mut().for_each(|w| *w = rng.random_range(-l1..l1));
        let l2 = (6.0 / HIDDEN as f64).sqrt();
        p.w2.iter_mut().for_each(|w| *w = rng.random_range(-l2..l2));
        p
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    pub fn tensors(&self) -> [&[f64]; 4] {
        [&self.w1, &self.b1, &self.w2, std::slice::from_ref(&self.b2)]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 4] {
        [
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            std::slice::from_mut(&mut self.b2),
        ]
    }

    pub fn forward_cached(&self, f: &[f64]) -> Result<ForwardCache> {
        if f.len() != self.input_dim {
            return Err(Error::dims(self.input_dim, f.len()));
        }
        let z = self.norm.apply(f);
        let mut pre = self.b1.clone();
        for (j, a) in pre.iter_mut().enumerate() {
            let row = &self.w1[j * self.input_dim..(j + 1) * self.input_dim];
            *a += row.iter().zip(&z).map(|(w, x)| w * x).sum::<f64>();
        }
        let output = self.b2
            + pre
                .iter()
                .zip(&self.w2)
                .map(|(a, w)| a.max(0.0) * w)
                .sum::<f64>();
        Ok(ForwardCache { z, pre, output })
    }

    pub fn forward(&self, f: &[f64]) -> Result<f64> {
        Ok(self.forward_cached(f)?.output)
    }
}

/// Gradient of the loss with respect to every parameter, same layout as
/// [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl Gradients {
    pub fn zeros(input_dim: usize) -> Self {
        Gradients {
            w1: vec![0.0; HIDDEN * input_dim],
            b1: vec![0.0; HIDDEN],
            w2: vec![0.0; HIDDEN],
            b2: 0.0,
        }
    }

    pub fn tensors(&self) -> [&[f64]; 4] {
        [&self.w1, &self.b1, &self.w2, std::slice::from_ref(&self.b2)]
    }

    pub fn norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }
}

/// Accumulate parameter gradients given dL/d(output) for each cached sample.
pub fn backprop(params: &ModelParams, caches: &[ForwardCache], d_out: &[f64]) -> Gradients {
    let d = params.input_dim;
    let mut g = Gradients::zeros(d);
    for (c, &go) in caches.iter().zip(d_out) {
        if go == 0.0 {
            continue;
        }
        g.b2 += go;
        for j in 0..HIDDEN {
            if c.pre[j] <= 0.0 {
                continue;
            }
            g.w2[j] += go * c.pre[j];
            let da = go * params.w2[j];
            g.b1[j] += da;
            let row = &mut g.w1[j * d..(j + 1) * d];
            for (gw, z) in row.iter_mut().zip(&c.z) {
                *gw += da * z;
            }
        }
    }
    g
}
