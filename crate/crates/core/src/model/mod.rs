//! Learned stability regressor: a two-layer MLP over fused clip features,
//! trained with a correlation loss plus a pairwise ranking hinge.

mod checkpoint;
mod loss;
mod mlp;
mod train;

pub use checkpoint::{fnv1a, read_checkpoint, write_checkpoint};
pub use loss::{loss_and_grad, loss_total, plcc_grad, plcc_loss, rank_grad, rank_loss};
pub use mlp::{backprop, ForwardCache, Gradients, ModelParams, NormStats, HIDDEN};
pub use train::{
    backward, predict_sample, train, write_log_csv, EpochLog, Schedule, TrainConfig,
    TrainOutcome, TrainSample,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_features, fuse, FeatureConfig, FeatureDims};
use crate::media::{sample_clip, FrameSequence};
use crate::rng::derive_seed;

/// Clip sampling and feature extraction settings shared by training and
/// inference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Pipeline {
    pub clip_len: usize,
    pub clip_interval: usize,
    pub features: FeatureConfig,
}

impl Default for Pipeline {
    fn default() -> Self {
        Pipeline {
            clip_len: 32,
            clip_interval: 2,
            features: FeatureConfig::default(),
        }
    }
}

impl Pipeline {
    pub fn dims(&self) -> Result<FeatureDims> {
        FeatureDims::new(self.clip_len, self.features.tau_b)
    }

    /// Fused features of the clip drawn with `seed`.
    pub fn clip_features(&self, seq: &FrameSequence, seed: u64) -> Result<Vec<f64>> {
        let clip = sample_clip(seq, self.clip_len, self.clip_interval, seed)?;
        Ok(fuse(&extract_features(&clip, &self.features)?).f)
    }

    /// Features of `count` clips with seeds derived from `seed`, in order.
    pub fn video_features(&self, seq: &FrameSequence, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        (0..count as u64)
            .into_par_iter()
            .map(|k| self.clip_features(seq, derive_seed(seed, k)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub params: ModelParams,
    pub pipeline: Pipeline,
    pub dims: FeatureDims,
    pub config_hash: u64,
}

impl ModelParams {
    /// Copy with every weight rounded to f32, the precision of a saved
    /// checkpoint.
    pub fn quantized(&self) -> Self {
        let mut q = self.clone();
        for t in q.tensors_mut() {
            t.iter_mut().for_each(|w| *w = *w as f32 as f64);
        }
        q
    }
}

/// Mean prediction over `n_clips` clips sampled with seeds derived from
/// `seed`.
pub fn predict_video(model: &Model, seq: &FrameSequence, n_clips: usize, seed: u64) -> Result<f64> {
    if n_clips == 0 {
        return Err(Error::Config("n_clips must be positive".into()));
    }
    let feats = model.pipeline.video_features(seq, n_clips, seed)?;
    let mut total = 0.0;
    for f in &feats {
        total += model.params.forward(f)?;
    }
    Ok(total / n_clips as f64)
}
