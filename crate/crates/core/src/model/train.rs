use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loss::loss_and_grad;
use super::mlp::{backprop, ForwardCache, Gradients, ModelParams, NormStats};
use crate::error::{Error, Result};
use crate::eval::srocc;
use crate::numfmt::sig6;
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    /// Learning-rate factor falls from 1 to 0 along a half cosine over all steps.
    Cosine,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lambda: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_head: f64,
    pub seed: u64,
    pub schedule: Schedule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 0.3,
            epochs: 30,
            batch_size: 4,
            lr_head: 1e-3,
            seed: 0,
            schedule: Schedule::Cosine,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.batch_size < 2 {
            return Err(Error::Config(format!(
                "batch_size must be >= 2, got {}",
                self.batch_size
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if !(self.lr_head >= 0.0 && self.lr_head.is_finite()) {
            return Err(Error::Config(format!("lr_head must be >= 0, got {}", self.lr_head)));
        }
        Ok(())
    }
}

/// One labeled video: fused features of one or more cached clips.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub clips: Vec<Vec<f64>>,
    pub mos: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub val_srocc: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub log: Vec<EpochLog>,
    /// Epoch whose parameters were returned (1-based).
    pub best_epoch: usize,
}

pub fn write_log_csv(mut out: impl Write, log: &[EpochLog]) -> std::io::Result<()> {
    writeln!(out, "epoch,loss,val_srocc")?;
    for e in log {
        let v = e.val_srocc.map(sig6).unwrap_or_default();
        writeln!(out, "{},{},{}", e.epoch, sig6(e.loss), v)?;
    }
    Ok(())
}

/// Loss over a batch and its gradient with respect to every parameter.
pub fn backward(params: &ModelParams, batch: &[(&[f64], f64)], lambda: f64) -> Result<(f64, Gradients)> {
    if batch.len() < 2 {
        return Err(Error::InsufficientData("a batch needs at least 2 samples".into()));
    }
    let caches: Vec<ForwardCache> = batch
        .iter()
        .map(|(f, _)| params.forward_cached(f))
        .collect::<Result<_>>()?;
    let pred: Vec<f64> = caches.iter().map(|c| c.output).collect();
    let mos: Vec<f64> = batch.iter().map(|b| b.1).collect();
    let (loss, d_out) = loss_and_grad(&pred, &mos, lambda)?;
    Ok((loss, backprop(params, &caches, &d_out)))
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(p: &ModelParams) -> Self {
        let shapes: Vec<Vec<f64>> = p.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Adam {
            m: shapes.clone(),
            v: shapes,
            t: 0,
        }
    }

    fn step(&mut self, p: &mut ModelParams, g: &Gradients, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for (k, (w, gr)) in p.tensors_mut().into_iter().zip(g.tensors()).enumerate() {
            for i in 0..w.len() {
                let m = &mut self.m[k][i];
                let v = &mut self.v[k][i];
                *m = Self::B1 * *m + (1.0 - Self::B1) * gr[i];
                *v = Self::B2 * *v + (1.0 - Self::B2) * gr[i] * gr[i];
                w[i] -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
            }
        }
    }
}

fn lr_factor(schedule: Schedule, step: usize, total: usize) -> f64 {
    match schedule {
        Schedule::Constant => 1.0,
        Schedule::Cosine => 0.5 * (1.0 + (std::f64::consts::PI * step as f64 / total as f64).cos()),
    }
}

/// Mean prediction over every cached clip of a sample.
pub fn predict_sample(params: &ModelParams, sample: &TrainSample) -> Result<f64> {
    if sample.clips.is_empty() {
        return Err(Error::EmptyInput("sample without clips".into()));
    }
    let mut s = 0.0;
    for c in &sample.clips {
        s += params.forward(c)?;
    }
    Ok(s / sample.clips.len() as f64)
}

fn batches(order: &[usize], size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(size).collect();
    // a trailing singleton cannot form a pair; fold it into its predecessor
    if out.len() > 1 && out[out.len() - 1].len() < 2 {
        out.pop();
        let keep = out.len() - 1;
        out[keep] = &order[keep * size..];
    }
    out
}

/// Train the regression head. Each epoch shuffles the videos and draws one
/// cached clip per video. With a validation set the parameters of the epoch
/// with the best validation SROCC are returned, else the final parameters.
pub fn train(
    data: &[TrainSample],
    val: Option<&[TrainSample]>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.len() < 2 * cfg.batch_size {
        return Err(Error::InsufficientData(format!(
            "training needs at least {} videos, got {}",
            2 * cfg.batch_size,
            data.len()
        )));
    }
    if data.iter().any(|s| s.clips.is_empty()) {
        return Err(Error::EmptyInput("training sample without clips".into()));
    }
    if data.iter().all(|s| s.mos == data[0].mos) {
        return Err(Error::InsufficientData("every training MOS is identical".into()));
    }
    let rows: Vec<Vec<f64>> = data.iter().flat_map(|s| s.clips.iter().cloned()).collect();
    let dim = rows[0].len();
    let mut params = ModelParams::init(dim, derive_seed(cfg.seed, 0));
    params.norm = NormStats::fit(&rows)?;
    params.b2 = data.iter().map(|s| s.mos).sum::<f64>() / data.len() as f64;

    let mut rng = seeded(derive_seed(cfg.seed, 1));
    let mut adam = Adam::new(&params);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let per_epoch = batches(&order, cfg.batch_size).len();
    let total = per_epoch * cfg.epochs;
    let mut step = 0usize;
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, ModelParams)> = None;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let picks: Vec<usize> = order
            .iter()
            .map(|&i| rng.random_range(0..data[i].clips.len()))
            .collect();
        let mut loss_sum = 0.0;
        let mut n_batches = 0usize;
        let positions: Vec<usize> = (0..order.len()).collect();
        for chunk in batches(&positions, cfg.batch_size) {
            let batch: Vec<(&[f64], f64)> = chunk
                .iter()
                .map(|&p| {
                    let s = &data[order[p]];
                    (s.clips[picks[p]].as_slice(), s.mos)
                })
                .collect();
            let (loss, grads) = backward(&params, &batch, cfg.lambda)?;
            adam.step(&mut params, &grads, cfg.lr_head * lr_factor(cfg.schedule, step, total));
            step += 1;
            loss_sum += loss;
            n_batches += 1;
        }
        let val_srocc = match val {
            Some(v) if v.len() >= 2 => {
                let pred: Vec<f64> = v
                    .iter()
                    .map(|s| predict_sample(&params, s))
                    .collect::<Result<_>>()?;
                let mos: Vec<f64> = v.iter().map(|s| s.mos).collect();
                srocc(&pred, &mos).ok()
            }
            _ => None,
        };
        if let Some(r) = val_srocc {
            if best.as_ref().map_or(true, |b| r > b.0) {
                best = Some((r, epoch, params.clone()));
            }
        }
        log.push(EpochLog {
            epoch,
            loss: loss_sum / n_batches as f64,
            val_srocc,
        });
    }
    let (params, best_epoch) = match best {
        Some((_, e, p)) => (p, e),
        None => (params, cfg.epochs),
    };
    Ok(TrainOutcome {
        params,
        log,
        best_epoch,
    })
}
