//! Video stability assessment toolkit.
//!
//! The crate estimates camera motion from raw frames, scores stability with
//! the classic ITF and low-frequency-energy metrics, extracts the three-branch
//! (flow, semantic, blur) clip features used by the learned regressor, trains
//! that regressor, evaluates predictions against subjective scores, and cleans
//! subjective ratings into mean opinion scores. A synthetic shaky-video
//! generator supplies ground truth for all of the above.

pub mod cli;
pub mod error;
pub mod eval;
pub mod features;
pub mod media;
pub mod metrics;
pub mod model;
pub mod mos;
pub mod numfmt;
pub mod motion;
pub mod plane;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
pub use media::{Clip, Frame, FrameSequence};
pub use plane::Plane;
