//! Pyramidal Lucas–Kanade point tracking.

use crate::error::{Error, Result};
use crate::plane::{floor_i, Plane};

#[derive(Debug, Clone)]
pub struct LkParams {
    /// Pyramid levels including full resolution.
    pub levels: usize,
    /// Half-width of the square integration window (7 → 15x15).
    pub half_window: usize,
    pub max_iters: usize,
    /// Per-iteration update norm (pixels) below which a level has converged.
    pub epsilon: f64,
    /// Largest accepted mean absolute intensity residual over the window.
    pub max_residual: f64,
    /// Smallest accepted structure-tensor eigenvalue, per window pixel.
    pub min_eigen: f64,
}

impl Default for LkParams {
    fn default() -> Self {
        Self {
            levels: 3,
            half_window: 7,
            max_iters: 30,
            epsilon: 0.01,
            max_residual: 12.0,
            min_eigen: 1e-2,
        }
    }
}

/// A point tracked from `from` in the previous frame to `to` in the next.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Track {
    pub from: [f64; 2],
    pub to: [f64; 2],
    pub residual: f64,
}

impl Track {
    pub fn displacement(&self) -> [f64; 2] {
        [self.to[0] - self.from[0], self.to[1] - self.from[1]]
    }
}

/// Image pyramid with per-level gradients, built once per frame and reused
/// across every pair the frame takes part in.
#[derive(Debug, Clone)]
pub struct Pyramid {
    levels: Vec<Plane>,
    grads: Vec<(Plane, Plane)>,
}

impl Pyramid {
    pub fn new(base: &Plane, levels: usize) -> Self {
        let mut planes = vec![base.binomial5()];
        for _ in 1..levels.max(1) {
            let next = planes.last().unwrap().pyr_down();
            planes.push(next);
        }
        let grads = planes.iter().map(Plane::scharr).collect();
        Self {
            levels: planes,
            grads,
        }
    }

    pub fn base(&self) -> &Plane {
        &self.levels[0]
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }
}

pub fn track_lk(prev: &Plane, next: &Plane, points: &[[f64; 2]]) -> Result<Vec<Track>> {
    let params = LkParams::default();
    if prev.width() != next.width() || prev.height() != next.height() {
        return Err(Error::dims(
            format!("{}x{}", prev.width(), prev.height()),
            format!("{}x{}", next.width(), next.height()),
        ));
    }
    if points.is_empty() {
        return Err(Error::InvalidValue("no points to track".into()));
    }
    let a = Pyramid::new(prev, params.levels);
    let b = Pyramid::new(next, params.levels);
    let tracks: Vec<Track> = track_pyramids(&a, &b, points, &params)
        .into_iter()
        .flatten()
        .collect();
    if tracks.is_empty() {
        return Err(Error::TrackingFailure(format!(
            "all {} point(s) were lost",
            points.len()
        )));
    }
    Ok(tracks)
}

/// Track every point; `None` marks points that were dropped.
pub fn track_pyramids(
    prev: &Pyramid,
    next: &Pyramid,
    points: &[[f64; 2]],
    params: &LkParams,
) -> Vec<Option<Track>> {
    points
        .iter()
        .map(|&p| track_point(prev, next, p, params))
        .collect()
}

/// Bilinear samples of the (2r+1)^2 window centered at (cx, cy), row-major,
/// with clamp-to-edge borders as in `Plane::sample`.
fn sample_window(img: &Plane, cx: f64, cy: f64, r: isize, out: &mut [f64]) {
    let (x0, y0) = (floor_i(cx), floor_i(cy));
    let (ax, ay) = (cx - x0 as f64, cy - y0 as f64);
    let (w, h) = (img.width() as isize, img.height() as isize);
    let data = img.data();
    let side = (2 * r + 1) as usize;
    let clamp = |v: isize, n: isize| v.clamp(0, n - 1) as usize;
    let interior = x0 - r >= 0 && y0 - r >= 0 && x0 + r + 1 < w && y0 + r + 1 < h;
    let mut k = 0;
    for dy in -r..=r {
        let top = clamp(y0 + dy, h) * w as usize;
        let bot = clamp(y0 + dy + 1, h) * w as usize;
        if interior {
            let base = (x0 - r) as usize;
            for col in 0..side {
                let (i, j) = (base + col, base + col + 1);
                out[k] = (1.0 - ay) * ((1.0 - ax) * data[top + i] as f64 + ax * data[top + j] as f64)
                    + ay * ((1.0 - ax) * data[bot + i] as f64 + ax * data[bot + j] as f64);
                k += 1;
            }
        } else {
            for dx in -r..=r {
                let (i, j) = (clamp(x0 + dx, w), clamp(x0 + dx + 1, w));
                out[k] = (1.0 - ay) * ((1.0 - ax) * data[top + i] as f64 + ax * data[top + j] as f64)
                    + ay * ((1.0 - ax) * data[bot + i] as f64 + ax * data[bot + j] as f64);
                k += 1;
            }
        }
    }
}

/// Marks window pixels that fall inside a `w` x `h` image; true when all do.
fn window_mask(w: f64, h: f64, cx: f64, cy: f64, r: isize, mask: &mut [bool]) -> bool {
    let rf = r as f64;
    if cx - rf >= 0.0 && cy - rf >= 0.0 && cx + rf <= w - 1.0 && cy + rf <= h - 1.0 {
        mask.fill(true);
        return true;
    }
    let mut k = 0;
    for dy in -r..=r {
        for dx in -r..=r {
            let (x, y) = (cx + dx as f64, cy + dy as f64);
            mask[k] = x >= 0.0 && y >= 0.0 && x <= w - 1.0 && y <= h - 1.0;
            k += 1;
        }
    }
    false
}

fn track_point(prev: &Pyramid, next: &Pyramid, p: [f64; 2], params: &LkParams) -> Option<Track> {
    let depth = prev.depth().min(next.depth());
    let r = params.half_window as isize;
    let npix = ((2 * r + 1) * (2 * r + 1)) as usize;
    let mut tmpl = vec![0.0f64; npix];
    let mut gxs = vec![0.0f64; npix];
    let mut gys = vec![0.0f64; npix];
    let mut inside = vec![false; npix];
    let mut warped = vec![0.0f64; npix];
    let mut landed = vec![false; npix];
    let mut guess = [0.0f64; 2];

    for level in (0..depth).rev() {
        let s = (1u32 << level) as f64;
        let (px, py) = (p[0] / s, p[1] / s);
        let img = &prev.levels[level];
        let (gx, gy) = &prev.grads[level];
        let tgt = &next.levels[level];
        let (w, h) = (img.width() as f64, img.height() as f64);
        let in_bounds = |x: f64, y: f64| x >= 0.0 && y >= 0.0 && x <= w - 1.0 && y <= h - 1.0;

        sample_window(img, px, py, r, &mut tmpl);
        sample_window(gx, px, py, r, &mut gxs);
        sample_window(gy, px, py, r, &mut gys);
        let all_inside = window_mask(w, h, px, py, r, &mut inside);

        let mut v = [0.0f64; 2];
        let mut converged = false;
        let mut usable = true;
        for _ in 0..params.max_iters {
            let (cx, cy) = (px + guess[0] + v[0], py + guess[1] + v[1]);
            if !in_bounds(cx, cy) {
                return None;
            }
            sample_window(tgt, cx, cy, r, &mut warped);
            let all_landed = window_mask(w, h, cx, cy, r, &mut landed);
            // only window pixels that lie inside both images contribute
            let (mut a, mut b, mut c, mut bx, mut by) = (0.0, 0.0, 0.0, 0.0, 0.0);
            let mut count = 0usize;
            for k in 0..npix {
                if (all_inside && all_landed) || (inside[k] && landed[k]) {
                    let (ix, iy) = (gxs[k], gys[k]);
                    let diff = tmpl[k] - warped[k];
                    a += ix * ix;
                    b += ix * iy;
                    c += iy * iy;
                    bx += diff * ix;
                    by += diff * iy;
                    count += 1;
                }
            }
            let det = a * c - b * b;
            let min_eig = 0.5 * (a + c) - (0.25 * (a - c) * (a - c) + b * b).sqrt();
            if 2 * count < npix || min_eig / (count as f64) < params.min_eigen || det.abs() < 1e-12 {
                usable = false;
                break;
            }
            let d = [(c * bx - b * by) / det, (a * by - b * bx) / det];
            v[0] += d[0];
            v[1] += d[1];
            if d[0].hypot(d[1]) < params.epsilon {
                converged = true;
                break;
            }
        }

        if level > 0 {
            // a coarse level without usable structure just passes its guess down
            let (ux, uy) = if usable { (v[0], v[1]) } else { (0.0, 0.0) };
            guess = [2.0 * (guess[0] + ux), 2.0 * (guess[1] + uy)];
            continue;
        }
        if !usable || !converged {
            return None;
        }
        let to = [p[0] + guess[0] + v[0], p[1] + guess[1] + v[1]];
        if !in_bounds(to[0], to[1]) {
            return None;
        }
        sample_window(tgt, to[0], to[1], r, &mut warped);
        window_mask(w, h, to[0], to[1], r, &mut landed);
        let (mut sad, mut count) = (0.0, 0usize);
        for k in 0..npix {
            if inside[k] && landed[k] {
                sad += (tmpl[k] - warped[k]).abs();
                count += 1;
            }
        }
        let residual = sad / count.max(1) as f64;
        if residual > params.max_residual {
            return None;
        }
        return Some(Track { from: p, to, residual });
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::corners::detect_corners;
    use rand::Rng;

    // smooth band-limited texture so that sub-pixel shifts are exact
    pub(crate) fn texture(w: usize, h: usize, ox: f64, oy: f64) -> Plane {
        Plane::from_fn(w, h, |x, y| {
            let (x, y) = (x as f64 - ox, y as f64 - oy);
            (128.0
                + 40.0 * (x * 0.21).sin() * (y * 0.17).cos()
                + 30.0 * (x * 0.07 + y * 0.11).sin()
                + 25.0 * ((x - 2.0 * y) * 0.13).cos()) as f32
        })
    }

    fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    }

    #[test]
    fn identical_frames_give_zero_motion() {
        let a = texture(96, 96, 0.0, 0.0);
        let pts: Vec<[f64; 2]> = detect_corners(&a, 50, 0.01)
            .unwrap()
            .iter()
            .map(|c| [c.x, c.y])
            .collect();
        let tracks = track_lk(&a, &a, &pts).unwrap();
        assert_eq!(tracks.len(), pts.len());
        for t in tracks {
            let d = t.displacement();
            assert!(d[0].abs() < 0.01 && d[1].abs() < 0.01);
        }
    }

    #[test]
    fn recovers_horizontal_shift() {
        let a = texture(96, 96, 0.0, 0.0);
        let b = texture(96, 96, 3.0, 0.0);
        let pts: Vec<[f64; 2]> = detect_corners(&a, 60, 0.01)
            .unwrap()
            .iter()
            .map(|c| [c.x, c.y])
            .collect();
        let tracks = track_lk(&a, &b, &pts).unwrap();
        let dx = median(tracks.iter().map(|t| t.displacement()[0]).collect());
        let dy = median(tracks.iter().map(|t| t.displacement()[1]).collect());
        assert!((dx - 3.0).abs() < 0.25, "dx={dx}");
        assert!(dy.abs() < 0.25, "dy={dy}");
    }

    #[test]
    fn recovers_large_shift_through_pyramid() {
        let a = texture(128, 128, 0.0, 0.0);
        let b = texture(128, 128, -9.5, 6.25);
        let pts: Vec<[f64; 2]> = (0..6)
            .flat_map(|i| (0..6).map(move |j| [30.0 + 12.0 * i as f64, 30.0 + 12.0 * j as f64]))
            .collect();
        let tracks = track_lk(&a, &b, &pts).unwrap();
        let dx = median(tracks.iter().map(|t| t.displacement()[0]).collect());
        let dy = median(tracks.iter().map(|t| t.displacement()[1]).collect());
        assert!((dx + 9.5).abs() < 0.05 && (dy - 6.25).abs() < 0.05, "{dx} {dy}");
    }

    #[test]
    fn uncorrelated_noise_is_not_tracked() {
        let mut rng = crate::rng::seeded(11);
        let a = Plane::from_fn(96, 96, |_, _| rng.random_range(0.0..255.0));
        let b = Plane::from_fn(96, 96, |_, _| rng.random_range(0.0..255.0));
        let pts: Vec<[f64; 2]> = detect_corners(&a, 100, 0.01)
            .unwrap()
            .iter()
            .map(|c| [c.x, c.y])
            .collect();
        match track_lk(&a, &b, &pts) {
            Err(Error::TrackingFailure(_)) => {}
            Ok(t) => assert!((t.len() as f64) < 0.2 * pts.len() as f64, "{} of {}", t.len(), pts.len()),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn flat_region_points_dropped() {
        let a = Plane::filled(64, 64, 90.0);
        assert!(matches!(
            track_lk(&a, &a, &[[32.0, 32.0]]),
            Err(Error::TrackingFailure(_))
        ));
    }
}
