//! JSON run configurations. Every field is optional in the file; unknown
//! keys are rejected.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::StabilityConfig;
use crate::model::{Pipeline, Schedule, TrainConfig};
use crate::mos::RejectConfig;
use crate::motion::MotionModel;
use crate::synth::DatasetConfig;

pub(super) fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Options for `score` and `trajectory`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScoreConfig {
    pub seed: Option<u64>,
    pub motion_model: MotionModel,
    /// Forward-backward averaging of each pair's motion.
    pub symmetric: bool,
    pub stability: StabilityConfig,
    /// Clips averaged for the learned prediction.
    pub clips: usize,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            seed: None,
            motion_model: MotionModel::Similarity,
            symmetric: true,
            stability: StabilityConfig::default(),
            clips: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainRunConfig {
    pub seed: Option<u64>,
    pub lambda: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_head: f64,
    pub schedule: Schedule,
    pub pipeline: Pipeline,
    /// Clips cached per video; each epoch draws one of them.
    pub clips_per_video: usize,
    /// Share of the manifest held out for validation.
    pub val_fraction: f64,
}

impl Default for TrainRunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            seed: None,
            lambda: t.lambda,
            epochs: t.epochs,
            batch_size: t.batch_size,
            lr_head: t.lr_head,
            schedule: t.schedule,
            pipeline: Pipeline::default(),
            clips_per_video: 4,
            val_fraction: 0.2,
        }
    }
}

impl TrainRunConfig {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            lambda: self.lambda,
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr_head: self.lr_head,
            seed,
            schedule: self.schedule,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MosRunConfig {
    /// Apply subject screening; plain averaging otherwise.
    pub clean: bool,
    pub reject: RejectConfig,
}

impl Default for MosRunConfig {
    fn default() -> Self {
        Self {
            clean: true,
            reject: RejectConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthRunConfig {
    pub seed: Option<u64>,
    pub dataset: DatasetConfig,
}
