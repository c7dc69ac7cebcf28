use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::estimate::{estimate_motion_pyramids, MotionModel, MotionOptions, MotionParams};
use super::lk::Pyramid;
use crate::error::{Error, Result};
use crate::media::FrameSequence;
use crate::numfmt::sig6;

/// Cumulative camera path, one sample per frame, starting at the origin.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub theta: Vec<f64>,
}

impl Trajectory {
    pub fn zeros(len: usize) -> Self {
        Self {
            x: vec![0.0; len],
            y: vec![0.0; len],
            theta: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// CSV with header `frame,x,y,theta`, six significant digits.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "frame,x,y,theta")?;
        for i in 0..self.len() {
            writeln!(
                out,
                "{i},{},{},{}",
                sig6(self.x[i]),
                sig6(self.y[i]),
                sig6(self.theta[i])
            )?;
        }
        Ok(())
    }

    /// Whitespace-separated columns with the frame time in seconds, for gnuplot.
    pub fn write_plot_data(&self, fps: f64, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "# t_seconds x_px y_px theta_rad")?;
        for i in 0..self.len() {
            writeln!(
                out,
                "{} {} {} {}",
                sig6(i as f64 / fps),
                sig6(self.x[i]),
                sig6(self.y[i]),
                sig6(self.theta[i])
            )?;
        }
        Ok(())
    }
}

/// Prefix-sum per-pair motions into a path with `params.len() + 1` samples.
pub fn accumulate_trajectory(params: &[MotionParams]) -> Result<Trajectory> {
    let Some(first) = params.first() else {
        return Err(Error::EmptyInput("no motion parameters to accumulate".into()));
    };
    if params.iter().any(|p| p.model != first.model) {
        return Err(Error::InvalidValue("mixed motion models in one trajectory".into()));
    }
    let mut t = Trajectory::zeros(params.len() + 1);
    for (k, p) in params.iter().enumerate() {
        t.x[k + 1] = t.x[k] + p.dx;
        t.y[k + 1] = t.y[k] + p.dy;
        t.theta[k + 1] = t.theta[k] + p.theta;
    }
    Ok(t)
}

/// Estimate motion for every adjacent pair (in parallel, order-stable).
pub fn estimate_pair_motions(
    seq: &FrameSequence,
    model: MotionModel,
    opts: &MotionOptions,
) -> Result<Vec<MotionParams>> {
    let pyramids: Vec<Pyramid> = seq
        .frames()
        .par_iter()
        .map(|f| Pyramid::new(&f.to_luma(), opts.lk.levels))
        .collect();
    (0..pyramids.len() - 1)
        .into_par_iter()
        .map(|k| estimate_motion_pyramids(&pyramids[k], &pyramids[k + 1], model, opts))
        .collect()
}

pub fn trajectory_from_sequence(
    seq: &FrameSequence,
    model: MotionModel,
    opts: &MotionOptions,
) -> Result<Trajectory> {
    accumulate_trajectory(&estimate_pair_motions(seq, model, opts)?)
}
