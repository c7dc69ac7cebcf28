//! Parametric inter-frame motion: RANSAC over tracked corners, followed by a
//! least-squares refit on the consensus set.

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::corners::{detect_corners_with, CornerParams};
use super::lk::{track_pyramids, LkParams, Pyramid, Track};
use crate::error::{Error, Result};
use crate::media::Frame;
use crate::plane::Plane;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MotionModel {
    Translation,
    #[default]
    Similarity,
    Homography,
}

impl MotionModel {
    fn min_samples(self) -> usize {
        match self {
            MotionModel::Translation => 1,
            MotionModel::Similarity => 2,
            MotionModel::Homography => 4,
        }
    }
}

impl std::str::FromStr for MotionModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "translation" => Ok(Self::Translation),
            "similarity" => Ok(Self::Similarity),
            "homography" => Ok(Self::Homography),
            other => Err(Error::Config(format!("unknown motion model {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RansacConfig {
    pub iters: usize,
    pub inlier_px: f64,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            iters: 500,
            inlier_px: 2.0,
            seed: 0,
        }
    }
}

/// Motion of image content from one frame to the next, expressed about the
/// image center: `p' = s R(theta) p + (dx, dy)` for the similarity family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionParams {
    pub model: MotionModel,
    pub dx: f64,
    pub dy: f64,
    pub theta: f64,
    pub scale: f64,
    pub h: Option<[[f64; 3]; 3]>,
    pub inlier_ratio: f64,
}

impl MotionParams {
    pub fn identity(model: MotionModel) -> Self {
        Self {
            model,
            dx: 0.0,
            dy: 0.0,
            theta: 0.0,
            scale: 1.0,
            h: (model == MotionModel::Homography)
                .then_some([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]),
            inlier_ratio: 1.0,
        }
    }

    /// Exact inverse for the translation and similarity families.
    pub fn inverse(&self) -> Option<Self> {
        if self.h.is_some() || self.scale <= 0.0 {
            return None;
        }
        let (s, c) = (-self.theta).sin_cos();
        let k = 1.0 / self.scale;
        Some(Self {
            dx: -k * (c * self.dx - s * self.dy),
            dy: -k * (s * self.dx + c * self.dy),
            theta: -self.theta,
            scale: k,
            ..*self
        })
    }

    /// Map a center-relative point through the motion.
    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        if let Some(h) = self.h {
            let w = h[2][0] * p[0] + h[2][1] * p[1] + h[2][2];
            [
                (h[0][0] * p[0] + h[0][1] * p[1] + h[0][2]) / w,
                (h[1][0] * p[0] + h[1][1] * p[1] + h[1][2]) / w,
            ]
        } else {
            let (s, c) = self.theta.sin_cos();
            let (a, b) = (self.scale * c, self.scale * s);
            [a * p[0] - b * p[1] + self.dx, b * p[0] + a * p[1] + self.dy]
        }
    }
}

/// Detection, tracking and fitting knobs bundled for reuse across frame pairs.
#[derive(Debug, Clone)]
pub struct MotionOptions {
    pub corners: CornerParams,
    pub lk: LkParams,
    pub ransac: RansacConfig,
    /// Average the forward estimate with the inverted backward one
    /// (ignored for homographies).
    pub symmetric: bool,
}

impl Default for MotionOptions {
    fn default() -> Self {
        Self {
            corners: CornerParams::default(),
            lk: LkParams::default(),
            ransac: RansacConfig::default(),
            symmetric: true,
        }
    }
}

pub fn estimate_motion(
    prev: &Frame,
    next: &Frame,
    model: MotionModel,
    ransac: &RansacConfig,
) -> Result<MotionParams> {
    if prev.width() != next.width() || prev.height() != next.height() {
        return Err(Error::dims(
            format!("{}x{}", prev.width(), prev.height()),
            format!("{}x{}", next.width(), next.height()),
        ));
    }
    let opts = MotionOptions {
        ransac: *ransac,
        ..MotionOptions::default()
    };
    let a = Pyramid::new(&prev.to_luma(), opts.lk.levels);
    let b = Pyramid::new(&next.to_luma(), opts.lk.levels);
    estimate_motion_pyramids(&a, &b, model, &opts)
}

pub fn estimate_motion_pyramids(
    prev: &Pyramid,
    next: &Pyramid,
    model: MotionModel,
    opts: &MotionOptions,
) -> Result<MotionParams> {
    let forward = one_way(prev, next, model, opts)?;
    if !opts.symmetric || model == MotionModel::Homography {
        return Ok(forward);
    }
    let Some(back) = one_way(next, prev, model, opts).ok().and_then(|b| b.inverse()) else {
        return Ok(forward);
    };
    Ok(MotionParams {
        dx: 0.5 * (forward.dx + back.dx),
        dy: 0.5 * (forward.dy + back.dy),
        theta: 0.5 * (forward.theta + back.theta),
        scale: (forward.scale * back.scale).sqrt(),
        inlier_ratio: forward.inlier_ratio.min(back.inlier_ratio),
        ..forward
    })
}

fn one_way(
    prev: &Pyramid,
    next: &Pyramid,
    model: MotionModel,
    opts: &MotionOptions,
) -> Result<MotionParams> {
    let base = prev.base();
    let corners = detect_corners_with(base, &opts.corners)?;
    let points: Vec<[f64; 2]> = corners.iter().map(|c| [c.x, c.y]).collect();
    let tracks: Vec<Track> = track_pyramids(prev, next, &points, &opts.lk)
        .into_iter()
        .flatten()
        .collect();
    if tracks.is_empty() {
        return Err(Error::TrackingFailure(format!(
            "none of {} corners could be tracked",
            points.len()
        )));
    }
    fit_tracks(&tracks, center_of(base), model, &opts.ransac)
}

pub fn center_of(plane: &Plane) -> [f64; 2] {
    [
        (plane.width() as f64 - 1.0) / 2.0,
        (plane.height() as f64 - 1.0) / 2.0,
    ]
}

type Match = ([f64; 2], [f64; 2]);

/// Robustly fit `model` to tracked points; coordinates are taken relative to `center`.
pub fn fit_tracks(
    tracks: &[Track],
    center: [f64; 2],
    model: MotionModel,
    cfg: &RansacConfig,
) -> Result<MotionParams> {
    let matches: Vec<Match> = tracks
        .iter()
        .map(|t| {
            (
                [t.from[0] - center[0], t.from[1] - center[1]],
                [t.to[0] - center[0], t.to[1] - center[1]],
            )
        })
        .collect();
    let total = matches.len();
    if total < model.min_samples() {
        return Err(Error::UnderDetermined(format!(
            "{total} match(es) for a {model:?} fit"
        )));
    }
    if matches
        .iter()
        .all(|(p, q)| (q[0] - p[0]).abs() < 1e-12 && (q[1] - p[1]).abs() < 1e-12)
    {
        return Ok(MotionParams::identity(model));
    }

    let mut rng = rng::seeded(cfg.seed);
    let thr2 = cfg.inlier_px * cfg.inlier_px;
    let mut best: Option<(usize, MotionParams)> = None;
    for _ in 0..cfg.iters {
        let idx = sample(&mut rng, total, model.min_samples());
        let subset: Vec<Match> = idx.iter().map(|i| matches[i]).collect();
        let Some(candidate) = fit_exact(&subset, model) else {
            continue;
        };
        let count = count_inliers(&matches, &candidate, thr2);
        if best.as_ref().is_none_or(|(c, _)| count > *c) {
            best = Some((count, candidate));
        }
        if count == total {
            break;
        }
    }
    let (_, seed_model) = best.ok_or_else(|| {
        Error::UnderDetermined("every RANSAC sample was degenerate".into())
    })?;

    // least-squares refit on the consensus set, then once more on the
    // consensus of the refined model
    let mut current = seed_model;
    for _ in 0..2 {
        let inliers: Vec<Match> = matches
            .iter()
            .copied()
            .filter(|m| residual2(m, &current) <= thr2)
            .collect();
        if inliers.len() < model.min_samples() {
            return Err(Error::UnderDetermined(format!(
                "{} inlier match(es) for a {model:?} fit",
                inliers.len()
            )));
        }
        current = fit_least_squares(&inliers, model).ok_or_else(|| {
            Error::UnderDetermined("inlier set is degenerate".into())
        })?;
    }
    let inliers = count_inliers(&matches, &current, thr2);
    current.inlier_ratio = inliers as f64 / total as f64;
    Ok(current)
}

fn residual2(m: &Match, params: &MotionParams) -> f64 {
    let q = params.apply(m.0);
    (q[0] - m.1[0]).powi(2) + (q[1] - m.1[1]).powi(2)
}

fn count_inliers(matches: &[Match], params: &MotionParams, thr2: f64) -> usize {
    matches.iter().filter(|m| residual2(m, params) <= thr2).count()
}

fn fit_exact(subset: &[Match], model: MotionModel) -> Option<MotionParams> {
    match model {
        MotionModel::Translation => {
            let (p, q) = subset[0];
            Some(translation(q[0] - p[0], q[1] - p[1]))
        }
        MotionModel::Similarity => fit_similarity(subset),
        MotionModel::Homography => fit_homography(subset),
    }
}

fn fit_least_squares(inliers: &[Match], model: MotionModel) -> Option<MotionParams> {
    match model {
        MotionModel::Translation => {
            let dx = median(inliers.iter().map(|(p, q)| q[0] - p[0]).collect());
            let dy = median(inliers.iter().map(|(p, q)| q[1] - p[1]).collect());
            Some(translation(dx, dy))
        }
        MotionModel::Similarity => fit_similarity(inliers),
        MotionModel::Homography => fit_homography(inliers),
    }
}

fn translation(dx: f64, dy: f64) -> MotionParams {
    MotionParams {
        dx,
        dy,
        ..MotionParams::identity(MotionModel::Translation)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Closed-form least squares for q = [a -b; b a] p + t.
fn fit_similarity(m: &[Match]) -> Option<MotionParams> {
    let n = m.len() as f64;
    let (mut px, mut py, mut qx, mut qy) = (0.0, 0.0, 0.0, 0.0);
    for (p, q) in m {
        px += p[0];
        py += p[1];
        qx += q[0];
        qy += q[1];
    }
    let (px, py, qx, qy) = (px / n, py / n, qx / n, qy / n);
    let (mut dot, mut cross, mut norm) = (0.0, 0.0, 0.0);
    for (p, q) in m {
        let (ax, ay) = (p[0] - px, p[1] - py);
        let (bx, by) = (q[0] - qx, q[1] - qy);
        dot += ax * bx + ay * by;
        cross += ax * by - ay * bx;
        norm += ax * ax + ay * ay;
    }
    if norm < 1e-9 {
        return None;
    }
    let (a, b) = (dot / norm, cross / norm);
    let scale = a.hypot(b);
    if scale < 1e-6 {
        return None;
    }
    Some(MotionParams {
        model: MotionModel::Similarity,
        dx: qx - (a * px - b * py),
        dy: qy - (b * px + a * py),
        theta: b.atan2(a),
        scale,
        h: None,
        inlier_ratio: 1.0,
    })
}

fn normalizer(points: impl Iterator<Item = [f64; 2]> + Clone) -> Matrix3<f64> {
    let n = points.clone().count() as f64;
    let (mx, my) = points
        .clone()
        .fold((0.0, 0.0), |(x, y), p| (x + p[0] / n, y + p[1] / n));
    let mean_dist = points.map(|p| (p[0] - mx).hypot(p[1] - my)).sum::<f64>() / n;
    let s = if mean_dist > 1e-12 {
        std::f64::consts::SQRT_2 / mean_dist
    } else {
        1.0
    };
    Matrix3::new(s, 0.0, -s * mx, 0.0, s, -s * my, 0.0, 0.0, 1.0)
}

/// Normalized direct linear transform.
fn fit_homography(m: &[Match]) -> Option<MotionParams> {
    let tp = normalizer(m.iter().map(|x| x.0));
    let tq = normalizer(m.iter().map(|x| x.1));
    let rows = (2 * m.len()).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (p, q)) in m.iter().enumerate() {
        let p = tp * Vector3::new(p[0], p[1], 1.0);
        let q = tq * Vector3::new(q[0], q[1], 1.0);
        let (x, y) = (p[0] / p[2], p[1] / p[2]);
        let (u, v) = (q[0] / q[2], q[1] / q[2]);
        let r0 = [-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u];
        let r1 = [0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v];
        for j in 0..9 {
            a[(2 * i, j)] = r0[j];
            a[(2 * i + 1, j)] = r1[j];
        }
    }
    let svd = a.svd(false, true);
    let vt = svd.v_t?;
    let (k, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    let hn = Matrix3::from_row_slice(vt.row(k).transpose().as_slice());
    let h = tq.try_inverse()? * hn * tp;
    if h[(2, 2)].abs() < 1e-12 {
        return None;
    }
    let h = h / h[(2, 2)];
    if h.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let det = h[(0, 0)] * h[(1, 1)] - h[(0, 1)] * h[(1, 0)];
    if det <= 1e-9 {
        return None;
    }
    let hh = [
        [h[(0, 0)], h[(0, 1)], h[(0, 2)]],
        [h[(1, 0)], h[(1, 1)], h[(1, 2)]],
        [h[(2, 0)], h[(2, 1)], 1.0],
    ];
    Some(MotionParams {
        model: MotionModel::Homography,
        dx: hh[0][2],
        dy: hh[1][2],
        theta: (hh[1][0] - hh[0][1]).atan2(hh[0][0] + hh[1][1]),
        scale: det.sqrt(),
        h: Some(hh),
        inlier_ratio: 1.0,
    })
}
