//! Frame containers, Y4M and PNM ingestion, clip sampling and resampling.

mod clip;
mod pnm;
mod resize;
pub mod y4m;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::plane::Plane;

pub use clip::{sample_clip, Clip};
#[cfg(test)]
pub(crate) use clip::clip_at;
pub use pnm::{load_frame_dir, read_pnm, write_pnm};
pub use resize::{resize_bilinear, resize_rgb8};
pub use y4m::{load_y4m, read_y4m, write_y4m};

pub const MIN_FRAME_SIDE: usize = 16;
pub const DEFAULT_FPS: f64 = 30.0;

/// An 8-bit RGB frame, row-major, interleaved.
#[derive(Debug, Clone)]
pub struct Frame {
    width: usize,
    height: usize,
    rgb: Arc<[u8]>,
    // Planar 4:4:4 YUV the frame was decoded from, kept so it can be
    // re-emitted bit-exactly.
    source_yuv: Option<Arc<[u8]>>,
}

impl PartialEq for Frame {
    fn eq(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height && self.rgb == other.rgb
    }
}

impl Frame {
    pub fn new(width: usize, height: usize, rgb: Vec<u8>) -> Result<Self> {
        if width < MIN_FRAME_SIDE || height < MIN_FRAME_SIDE {
            return Err(Error::InvalidValue(format!(
                "frame {width}x{height} is smaller than {MIN_FRAME_SIDE}x{MIN_FRAME_SIDE}"
            )));
        }
        if rgb.len() != width * height * 3 {
            return Err(Error::dims(width * height * 3, rgb.len()));
        }
        Ok(Self {
            width,
            height,
            rgb: rgb.into(),
            source_yuv: None,
        })
    }

    pub(crate) fn with_source_yuv(mut self, yuv: Vec<u8>) -> Self {
        debug_assert_eq!(yuv.len(), self.width * self.height * 3);
        self.source_yuv = Some(yuv.into());
        self
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Result<Self> {
        let mut rgb = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                rgb.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, rgb)
    }

    /// Gray frame replicated across channels from a plane (values rounded, clamped).
    pub fn from_luma(plane: &Plane) -> Result<Self> {
        Self::from_fn(plane.width(), plane.height(), |x, y| {
            let v = plane.get(x, y).round().clamp(0.0, 255.0) as u8;
            [v, v, v]
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn rgb(&self) -> &[u8] {
        &self.rgb
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    pub(crate) fn source_yuv(&self) -> Option<&[u8]> {
        self.source_yuv.as_deref()
    }

    /// Rec.601 luma, Y = 0.299 R + 0.587 G + 0.114 B.
    pub fn to_luma(&self) -> Plane {
        let data = self
            .rgb
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
            .map(|y| y.clamp(0.0, 255.0) as f32)
            .collect();
        Plane::new(self.width, self.height, data)
    }
}

pub fn to_luma(frame: &Frame) -> Plane {
    frame.to_luma()
}

/// Ordered frames sharing one size, with a frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Vec<Frame>,
    fps: f64,
}

impl FrameSequence {
    pub fn new(frames: Vec<Frame>, fps: f64) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::InsufficientFrames {
                required: 2,
                available: frames.len(),
            });
        }
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::InvalidValue(format!("fps must be positive, got {fps}")));
        }
        let (w, h) = (frames[0].width, frames[0].height);
        if let Some(bad) = frames.iter().find(|f| f.width != w || f.height != h) {
            return Err(Error::dims(
                format!("{w}x{h}"),
                format!("{}x{}", bad.width, bad.height),
            ));
        }
        Ok(Self { frames, fps })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn width(&self) -> usize {
        self.frames[0].width
    }

    pub fn height(&self) -> usize {
        self.frames[0].height
    }

    pub fn reversed(&self) -> Self {
        let mut frames = self.frames.clone();
        frames.reverse();
        Self {
            frames,
            fps: self.fps,
        }
    }
}
