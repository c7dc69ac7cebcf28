use crate::error::{Error, Result};
use crate::plane::Plane;

/// A detected corner with sub-pixel position and its minimum-eigenvalue score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corner {
    pub x: f64,
    pub y: f64,
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct CornerParams {
    pub max_corners: usize,
    /// Relative threshold against the strongest response.
    pub quality: f64,
    /// Non-maximum suppression radius in pixels.
    pub min_distance: f64,
    /// Side of the structure-tensor window.
    pub block_size: usize,
    /// Fewer accepted corners than this is reported as a degenerate scene.
    pub min_count: usize,
}

impl Default for CornerParams {
    fn default() -> Self {
        Self {
            max_corners: 400,
            quality: 0.01,
            min_distance: 8.0,
            block_size: 3,
            min_count: 8,
        }
    }
}

const BORDER: usize = 4;

/// Shi–Tomasi response: smaller eigenvalue of the gradient structure tensor
/// summed over a `block_size` window.
pub fn min_eigen_response(luma: &Plane, block_size: usize) -> Plane {
    let (gx, gy) = luma.sobel();
    let (w, h) = (luma.width(), luma.height());
    let n = w * h;
    let mut xx = vec![0.0f64; n];
    let mut xy = vec![0.0f64; n];
    let mut yy = vec![0.0f64; n];
    for i in 0..n {
        // Sobel carries a factor 8 relative to a unit-slope derivative
        let dx = gx.data()[i] as f64 / 8.0;
        let dy = gy.data()[i] as f64 / 8.0;
        xx[i] = dx * dx;
        xy[i] = dx * dy;
        yy[i] = dy * dy;
    }
    let r = (block_size / 2) as isize;
    let at = |buf: &[f64], x: isize, y: isize| -> f64 {
        let xc = x.clamp(0, w as isize - 1) as usize;
        let yc = y.clamp(0, h as isize - 1) as usize;
        buf[yc * w + xc]
    };
    Plane::from_fn(w, h, |x, y| {
        let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
        for dy in -r..=r {
            for dx in -r..=r {
                let (px, py) = (x as isize + dx, y as isize + dy);
                a += at(&xx, px, py);
                b += at(&xy, px, py);
                c += at(&yy, px, py);
            }
        }
        let half_trace = 0.5 * (a + c);
        let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        (half_trace - disc).max(0.0) as f32
    })
}

pub fn detect_corners(luma: &Plane, max_n: usize, quality: f64) -> Result<Vec<Corner>> {
    detect_corners_with(
        luma,
        &CornerParams {
            max_corners: max_n,
            quality,
            ..CornerParams::default()
        },
    )
}

pub fn detect_corners_with(luma: &Plane, params: &CornerParams) -> Result<Vec<Corner>> {
    if luma.width() < 32 || luma.height() < 32 {
        return Err(Error::InvalidValue(format!(
            "corner detection needs at least 32x32, got {}x{}",
            luma.width(),
            luma.height()
        )));
    }
    let resp = min_eigen_response(luma, params.block_size);
    let (w, h) = (resp.width(), resp.height());
    let max = resp.data().iter().cloned().fold(0.0f32, f32::max) as f64;
    if max <= 1e-9 {
        return Err(Error::DegenerateScene("image has no gradient structure".into()));
    }
    let threshold = params.quality * max;

    let mut candidates = Vec::new();
    for y in BORDER..h - BORDER {
        for x in BORDER..w - BORDER {
            let v = resp.get(x, y);
            if (v as f64) < threshold || v <= 0.0 {
                continue;
            }
            let mut is_max = true;
            'nb: for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    if (dx, dy) == (0, 0) {
                        continue;
                    }
                    let n = resp.get((x as isize + dx) as usize, (y as isize + dy) as usize);
                    // plateau ties resolve to the first pixel in raster order
                    if n > v || (n == v && (dy < 0 || (dy == 0 && dx < 0))) {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                candidates.push((x, y, v));
            }
        }
    }
    candidates.sort_by(|a, b| b.2.total_cmp(&a.2).then((a.1, a.0).cmp(&(b.1, b.0))));

    let min_d2 = params.min_distance * params.min_distance;
    let mut out: Vec<Corner> = Vec::new();
    for (x, y, v) in candidates {
        if out.len() >= params.max_corners {
            break;
        }
        let (sx, sy) = subpixel(&resp, x, y);
        if out
            .iter()
            .any(|c| (c.x - sx).powi(2) + (c.y - sy).powi(2) < min_d2)
        {
            continue;
        }
        out.push(Corner {
            x: sx,
            y: sy,
            score: v as f64,
        });
    }
    if out.len() < params.min_count {
        return Err(Error::DegenerateScene(format!(
            "only {} corner(s) found, need {}",
            out.len(),
            params.min_count
        )));
    }
    Ok(out)
}

fn subpixel(resp: &Plane, x: usize, y: usize) -> (f64, f64) {
    let c = resp.get(x, y) as f64;
    let off = |l: f64, r: f64| {
        let denom = l - 2.0 * c + r;
        if denom < -1e-12 {
            (0.5 * (l - r) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        }
    };
    let dx = off(resp.get(x - 1, y) as f64, resp.get(x + 1, y) as f64);
    let dy = off(resp.get(x, y - 1) as f64, resp.get(x, y + 1) as f64);
    (x as f64 + dx, y as f64 + dy)
}
