use rand::Rng as _;

use super::{Frame, FrameSequence};
use crate::error::{Error, Result};
use crate::rng;

/// `n` frames taken every `tau` frames from a sequence.
#[derive(Debug, Clone)]
pub struct Clip {
    pub frames: Vec<Frame>,
    pub source_indices: Vec<usize>,
    pub n: usize,
    pub tau: usize,
}

impl Clip {
    /// Number of source frames a clip of this shape spans.
    pub fn span(n: usize, tau: usize) -> usize {
        (n - 1) * tau + 1
    }
}

/// Draw a clip start uniformly from all valid positions using `seed`.
pub fn sample_clip(seq: &FrameSequence, n: usize, tau: usize, seed: u64) -> Result<Clip> {
    if n == 0 || tau == 0 {
        return Err(Error::Config(format!("clip shape n={n}, tau={tau} must be positive")));
    }
    let required = Clip::span(n, tau);
    if seq.len() < required {
        return Err(Error::InsufficientFrames {
            required,
            available: seq.len(),
        });
    }
    let mut rng = rng::seeded(seed);
    let start = rng.random_range(0..=seq.len() - required);
    Ok(clip_at(seq, start, n, tau))
}

pub(crate) fn clip_at(seq: &FrameSequence, start: usize, n: usize, tau: usize) -> Clip {
    let source_indices: Vec<usize> = (0..n).map(|k| start + k * tau).collect();
    let frames = source_indices
        .iter()
        .map(|&i| seq.frames()[i].clone())
        .collect();
    Clip {
        frames,
        source_indices,
        n,
        tau,
    }
}
