//! Inter-frame motion: corner detection, pyramidal tracking, robust
//! parametric fits, grid flow fields and accumulated camera paths.

pub mod corners;
pub mod estimate;
pub mod flow;
pub mod lk;
pub mod trajectory;

pub use corners::{detect_corners, detect_corners_with, Corner, CornerParams};
pub use estimate::{
    estimate_motion, estimate_motion_pyramids, fit_tracks, MotionModel, MotionOptions,
    MotionParams, RansacConfig,
};
pub use flow::{grid_flow, grid_flow_pyramids, FlowField};
pub use lk::{track_lk, track_pyramids, LkParams, Pyramid, Track};
pub use trajectory::{
    accumulate_trajectory, estimate_pair_motions, trajectory_from_sequence, Trajectory,
};
