//! Clip features for the learned regressor.
//!
//! Three fixed extractors stand in for learned backbones: motion statistics
//! over the clip's flow fields, per-frame appearance statistics, and
//! per-frame sharpness measures on a sparser frame subset. [`fuse`]
//! concatenates them in that order.

mod cache;

pub use cache::{read_cache, write_cache, CacheHeader};

use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media::{resize_bilinear, Clip, Frame};
use crate::motion::{grid_flow_pyramids, FlowField, LkParams, Pyramid};
use crate::plane::Plane;

pub const FLOW_DIM: usize = 16;
pub const SEMANTIC_DIM: usize = 8;
pub const BLUR_DIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDims {
    pub c_o: usize,
    pub c_s: usize,
    pub c_b: usize,
    pub n: usize,
    pub n_b: usize,
    pub tau_b: usize,
}

impl FeatureDims {
    pub fn new(n: usize, tau_b: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config(format!("clip length must be at least 2, got {n}")));
        }
        if tau_b == 0 || n % tau_b != 0 {
            return Err(Error::Config(format!(
                "blur interval {tau_b} does not divide clip length {n}"
            )));
        }
        Ok(FeatureDims {
            c_o: FLOW_DIM,
            c_s: SEMANTIC_DIM,
            c_b: BLUR_DIM,
            n,
            n_b: n / tau_b,
            tau_b,
        })
    }

    pub fn fused_dim(&self) -> usize {
        self.c_o + self.n * self.c_s + self.n_b * self.c_b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBundle {
    pub f_o: Vec<f64>,
    pub f_s: Vec<f64>,
    pub f_b: Vec<f64>,
    pub dims: FeatureDims,
}

impl FeatureBundle {
    pub fn zeros(dims: FeatureDims) -> Self {
        FeatureBundle {
            f_o: vec![0.0; dims.c_o],
            f_s: vec![0.0; dims.n * dims.c_s],
            f_b: vec![0.0; dims.n_b * dims.c_b],
            dims,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.dims;
        for (name, v, want) in [
            ("flow", &self.f_o, d.c_o),
            ("semantic", &self.f_s, d.n * d.c_s),
            ("blur", &self.f_b, d.n_b * d.c_b),
        ] {
            if v.len() != want {
                return Err(Error::dims(format!("{name} length {want}"), v.len()));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidValue(format!("non-finite {name} feature")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedFeature {
    pub f: Vec<f64>,
}

impl FusedFeature {
    pub fn dim(&self) -> usize {
        self.f.len()
    }
}

pub fn fuse(bundle: &FeatureBundle) -> FusedFeature {
    let mut f = Vec::with_capacity(bundle.dims.fused_dim());
    f.extend_from_slice(&bundle.f_o);
    f.extend_from_slice(&bundle.f_s);
    f.extend_from_slice(&bundle.f_b);
    FusedFeature { f }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    /// Flow grid cells per side.
    pub grid: usize,
    /// Side of the square frame used by the appearance and sharpness branches.
    pub size: usize,
    pub tau_b: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            grid: 16,
            size: 224,
            tau_b: 8,
        }
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, var.max(0.0).sqrt())
}

/// Motion statistics over a clip's flow fields: eight per-field statistics,
/// summarized by their temporal mean followed by their temporal std.
pub fn flow_features(flows: &[FlowField]) -> Result<Vec<f64>> {
    if flows.len() < 2 {
        return Err(Error::InsufficientFrames {
            required: 2,
            available: flows.len(),
        });
    }
    let mut stats: Vec<[f64; 8]> = Vec::with_capacity(flows.len());
    for (t, field) in flows.iter().enumerate() {
        let u: Vec<f64> = field.u.iter().map(|&x| x as f64).collect();
        let v: Vec<f64> = field.v.iter().map(|&x| x as f64).collect();
        let mag: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a.hypot(*b)).collect();
        let (mu, su) = mean_std(&u);
        let (mv, sv) = mean_std(&v);
        let (mm, sm) = mean_std(&mag);
        let (du, dv) = if t == 0 {
            (0.0, 0.0)
        } else {
            let prev = &flows[t - 1];
            if prev.len() != field.len() {
                return Err(Error::dims(prev.len(), field.len()));
            }
            let n = field.len().max(1) as f64;
            let du = field.u.iter().zip(&prev.u).map(|(a, b)| (*a as f64 - *b as f64).abs()).sum::<f64>();
            let dv = field.v.iter().zip(&prev.v).map(|(a, b)| (*a as f64 - *b as f64).abs()).sum::<f64>();
            (du / n, dv / n)
        };
        stats.push([mu, mv, su, sv, mm, sm, du, dv]);
    }
    let mut out = vec![0.0; FLOW_DIM];
    for k in 0..8 {
        let col: Vec<f64> = stats.iter().map(|s| s[k]).collect();
        let (m, s) = mean_std(&col);
        out[k] = m;
        out[8 + k] = s;
    }
    Ok(out)
}

fn gradient_magnitude(luma: &Plane) -> (Plane, Plane, Vec<f64>) {
    let (gx, gy) = luma.sobel();
    let mag = gx
        .data()
        .iter()
        .zip(gy.data())
        .map(|(a, b)| (*a as f64 / 8.0).hypot(*b as f64 / 8.0))
        .collect();
    (gx, gy, mag)
}

/// Eight appearance values for one luma plane: mean, std, mean gradient
/// magnitude, orientation entropy (bits, 8 magnitude-weighted bins over
/// [0, pi)), and the means of the four quadrants in TL, TR, BL, BR order.
pub fn frame_semantic(luma: &Plane) -> [f64; SEMANTIC_DIM] {
    let (w, h) = (luma.width(), luma.height());
    let (gx, gy, mag) = gradient_magnitude(luma);
    let mut bins = [0.0f64; 8];
    for i in 0..mag.len() {
        if mag[i] > 0.0 {
            let mut a = (gy.data()[i] as f64).atan2(gx.data()[i] as f64);
            if a < 0.0 {
                a += std::f64::consts::PI;
            }
            let b = ((a / std::f64::consts::PI * 8.0) as usize).min(7);
            bins[b] += mag[i];
        }
    }
    let total: f64 = bins.iter().sum();
    let entropy = if total > 0.0 {
        bins.iter()
            .filter(|&&b| b > 0.0)
            .map(|&b| {
                let p = b / total;
                -p * p.log2()
            })
            .sum::<f64>()
            + 0.0
    } else {
        0.0
    };
    let (hw, hh) = (w / 2, h / 2);
    let block = |x0: usize, x1: usize, y0: usize, y1: usize| {
        let mut s = 0.0;
        for y in y0..y1 {
            for x in x0..x1 {
                s += luma.get(x, y) as f64;
            }
        }
        s / ((x1 - x0) * (y1 - y0)) as f64
    };
    [
        luma.mean(),
        luma.std(),
        mag.iter().sum::<f64>() / mag.len() as f64,
        entropy,
        block(0, hw, 0, hh),
        block(hw, w, 0, hh),
        block(0, hw, hh, h),
        block(hw, w, hh, h),
    ]
}

const LAPLACIAN: [[f32; 3]; 3] = [[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]];

/// Share of non-DC spectral energy outside the central (low-frequency)
/// quarter of the centered 2-D spectrum. Zero for a flat plane.
pub fn high_freq_ratio(luma: &Plane) -> f64 {
    let (w, h) = (luma.width(), luma.height());
    let mean = luma.mean();
    let mut buf: Vec<Complex<f64>> = luma
        .data()
        .iter()
        .map(|&v| Complex::new(v as f64 - mean, 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    let row = planner.plan_fft_forward(w);
    for r in buf.chunks_mut(w) {
        row.process(r);
    }
    let col = planner.plan_fft_forward(h);
    let mut column = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            column[y] = buf[y * w + x];
        }
        col.process(&mut column);
        for y in 0..h {
            buf[y * w + x] = column[y];
        }
    }
    // signed frequency index of bin k for an n-point transform
    let freq = |k: usize, n: usize| if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
    let (mut total, mut high) = (0.0, 0.0);
    for y in 0..h {
        let fy = freq(y, h).abs();
        for x in 0..w {
            if x == 0 && y == 0 {
                continue;
            }
            let e = buf[y * w + x].norm_sqr();
            total += e;
            if freq(x, w).abs() >= w as f64 / 4.0 || fy >= h as f64 / 4.0 {
                high += e;
            }
        }
    }
    // mean removal leaves round-off at DC-free flat planes
    if total <= 1e-12 * (w * h) as f64 {
        0.0
    } else {
        high / total
    }
}

/// Four sharpness values for one luma plane: Laplacian variance, mean
/// gradient magnitude, high-frequency energy ratio, Tenengrad.
pub fn frame_blur(luma: &Plane) -> [f64; BLUR_DIM] {
    let lap = luma.filter3(&LAPLACIAN);
    let (_, _, mag) = gradient_magnitude(luma);
    let n = mag.len() as f64;
    let tenengrad = mag.iter().map(|m| m * m).sum::<f64>() / n;
    [
        lap.std().powi(2),
        mag.iter().sum::<f64>() / n,
        high_freq_ratio(luma),
        tenengrad,
    ]
}

fn resized_luma(frame: &Frame, size: usize) -> Result<Plane> {
    if frame.width() == size && frame.height() == size {
        Ok(frame.to_luma())
    } else {
        Ok(resize_bilinear(frame, size, size)?.to_luma())
    }
}

pub fn semantic_features(clip: &Clip, size: usize) -> Result<Vec<f64>> {
    let per_frame: Vec<[f64; SEMANTIC_DIM]> = clip
        .frames
        .par_iter()
        .map(|f| resized_luma(f, size).map(|l| frame_semantic(&l)))
        .collect::<Result<_>>()?;
    Ok(per_frame.concat())
}

/// Sharpness features on every `tau_b`-th frame of the clip, ending at the
/// last frame of each interval.
pub fn blur_features(clip: &Clip, tau_b: usize, size: usize) -> Result<Vec<f64>> {
    let n = clip.frames.len();
    if tau_b == 0 || n % tau_b != 0 {
        return Err(Error::Config(format!(
            "blur interval {tau_b} does not divide clip length {n}"
        )));
    }
    let per_frame: Vec<[f64; BLUR_DIM]> = (1..=n / tau_b)
        .into_par_iter()
        .map(|k| resized_luma(&clip.frames[k * tau_b - 1], size).map(|l| frame_blur(&l)))
        .collect::<Result<_>>()?;
    Ok(per_frame.concat())
}

/// Grid flow between consecutive clip frames at native resolution. A pair
/// with nothing trackable contributes an all-zero field.
pub fn clip_flows(clip: &Clip, grid: usize) -> Result<Vec<FlowField>> {
    let lk = LkParams::default();
    let pyramids: Vec<Pyramid> = clip
        .frames
        .par_iter()
        .map(|f| Pyramid::new(&f.to_luma(), lk.levels))
        .collect();
    pyramids
        .par_windows(2)
        .map(|p| match grid_flow_pyramids(&p[0], &p[1], grid, &lk) {
            Ok(f) => Ok(f),
            Err(e) if e.is_degenerate_content() => Ok(FlowField::zeros(grid, grid)),
            Err(e) => Err(e),
        })
        .collect()
}

pub fn extract_features(clip: &Clip, cfg: &FeatureConfig) -> Result<FeatureBundle> {
    let dims = FeatureDims::new(clip.frames.len(), cfg.tau_b)?;
    let (flow, (sem, blur)) = rayon::join(
        || clip_flows(clip, cfg.grid).and_then(|f| flow_features(&f)),
        || {
            rayon::join(
                || semantic_features(clip, cfg.size),
                || blur_features(clip, cfg.tau_b, cfg.size),
            )
        },
    );
    let bundle = FeatureBundle {
        f_o: flow?,
        f_s: sem?,
        f_b: blur?,
        dims,
    };
    bundle.validate()?;
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::clip_at;
    use crate::FrameSequence;

    fn gray_clip(levels: &[u8]) -> Clip {
        let frames: Vec<Frame> = levels
            .iter()
            .map(|&g| Frame::from_fn(32, 32, |_, _| [g, g, g]).unwrap())
            .collect();
        let n = frames.len();
        let seq = FrameSequence::new(frames, 30.0).unwrap();
        clip_at(&seq, 0, n, 1)
    }

    #[test]
    fn zero_and_constant_flows() {
        let zero = vec![FlowField::zeros(4, 4); 5];
        assert!(flow_features(&zero).unwrap().iter().all(|&v| v == 0.0));
        let pan = vec![FlowField::uniform(4, 4, 3.0, 0.0); 5];
        let f = flow_features(&pan).unwrap();
        assert_eq!(f[0], 3.0);
        assert_eq!(f[4], 3.0);
        for k in [1, 2, 3, 5, 6, 7] {
            assert_eq!(f[k], 0.0, "stat {k}");
        }
        assert!(f[8..].iter().all(|&v| v == 0.0));
        assert!(matches!(
            flow_features(&zero[..1]),
            Err(Error::InsufficientFrames { .. })
        ));
    }

    #[test]
    fn alternating_flows() {
        let fields: Vec<FlowField> = (0..4)
            .map(|t| FlowField::uniform(4, 4, if t % 2 == 0 { 2.0 } else { -2.0 }, 0.0))
            .collect();
        let f = flow_features(&fields).unwrap();
        // mean-u per field: 2, -2, 2, -2
        assert_eq!(f[0], 0.0);
        assert_eq!(f[8], 2.0);
        // mean |du| per field: 0, 4, 4, 4
        assert_eq!(f[6], 3.0);
        let expected_std = ((9.0 + 1.0 + 1.0 + 1.0) / 4.0f64).sqrt();
        assert!((f[14] - expected_std).abs() < 1e-12);
    }

    #[test]
    fn constant_gray_semantics() {
        let clip = gray_clip(&[90; 4]);
        let f = semantic_features(&clip, 224).unwrap();
        assert_eq!(f.len(), 32);
        for frame in f.chunks(8) {
            assert_eq!(frame, &[90.0, 0.0, 0.0, 0.0, 90.0, 90.0, 90.0, 90.0]);
        }
    }

    #[test]
    fn luma_ramp_leads_each_frame_block() {
        let levels: Vec<u8> = (0..6).map(|k| k * 8).collect();
        let f = semantic_features(&gray_clip(&levels), 224).unwrap();
        for (k, frame) in f.chunks(8).enumerate() {
            assert_eq!(frame[0], (k * 8) as f64);
        }
    }

    #[test]
    fn vertical_edge_block_means() {
        let p = Plane::from_fn(224, 224, |x, _| if x < 112 { 0.0 } else { 255.0 });
        let f = frame_semantic(&p);
        assert_eq!(&f[4..], &[0.0, 255.0, 0.0, 255.0]);
        // every gradient is horizontal: one orientation bin
        assert_eq!(f[3], 0.0);
        assert!(f[2] > 0.0);
    }

    #[test]
    fn entropy_of_two_equal_orientations_is_one_bit() {
        let p = Plane::from_fn(64, 64, |x, y| if x < 20 || y < 20 { 0.0 } else { 200.0 });
        let f = frame_semantic(&p);
        assert!(f[3] > 0.9 && f[3] < 2.0, "{}", f[3]);
    }

    #[test]
    fn blur_reduces_sharpness() {
        let sharp = Plane::from_fn(224, 224, |x, y| if (x / 7 + y / 7) % 2 == 0 { 0.0 } else { 255.0 });
        let soft = sharp.box_blur(5);
        let (a, b) = (frame_blur(&sharp), frame_blur(&soft));
        assert!(a[0] > b[0], "laplacian {} vs {}", a[0], b[0]);
        for k in 0..4 {
            assert!(a[k] >= b[k], "measure {k}: {} vs {}", a[k], b[k]);
        }
    }

    #[test]
    fn flat_frame_blur_is_zero() {
        assert_eq!(frame_blur(&Plane::filled(64, 48, 77.0)), [0.0; 4]);
    }

    #[test]
    fn high_freq_ratio_matches_direct_dft() {
        let p = Plane::from_fn(12, 8, |x, y| ((x * 37 + y * 11) % 17) as f32 * 9.0);
        let (w, h) = (12usize, 8usize);
        let m = p.mean();
        let (mut total, mut high) = (0.0, 0.0);
        for ky in 0..h {
            for kx in 0..w {
                if kx == 0 && ky == 0 {
                    continue;
                }
                let (mut re, mut im) = (0.0, 0.0);
                for y in 0..h {
                    for x in 0..w {
                        let a = -2.0
                            * std::f64::consts::PI
                            * (kx as f64 * x as f64 / w as f64 + ky as f64 * y as f64 / h as f64);
                        let v = p.get(x, y) as f64 - m;
                        re += v * a.cos();
                        im += v * a.sin();
                    }
                }
                let e = re * re + im * im;
                total += e;
                let fx = kx.min(w - kx) as f64;
                let fy = ky.min(h - ky) as f64;
                if fx >= w as f64 / 4.0 || fy >= h as f64 / 4.0 {
                    high += e;
                }
            }
        }
        assert!((high_freq_ratio(&p) - high / total).abs() < 1e-12);
    }

    #[test]
    fn blur_shape_and_interval_check() {
        let clip = gray_clip(&[10; 32]);
        assert_eq!(blur_features(&clip, 8, 32).unwrap().len(), 16);
        assert!(matches!(blur_features(&clip, 5, 32), Err(Error::Config(_))));
        assert!(FeatureDims::new(32, 5).is_err());
    }

    #[test]
    fn fused_layout() {
        let dims = FeatureDims::new(32, 8).unwrap();
        assert_eq!(dims.fused_dim(), 288);
        let zero = fuse(&FeatureBundle::zeros(dims));
        assert_eq!(zero.dim(), 288);
        assert!(zero.f.iter().all(|&v| v == 0.0));
        let mut b = FeatureBundle::zeros(dims);
        b.f_o = (1..=16).map(|v| v as f64).collect();
        let f = fuse(&b).f;
        assert_eq!(&f[..16], &b.f_o[..]);
        assert!(f[16..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn flat_clip_extracts_finite_features() {
        let clip = gray_clip(&[128; 8]);
        let cfg = FeatureConfig {
            grid: 4,
            size: 32,
            tau_b: 4,
        };
        let b = extract_features(&clip, &cfg).unwrap();
        assert_eq!(fuse(&b).dim(), 16 + 8 * 8 + 2 * 4);
        assert!(b.f_o.iter().all(|&v| v == 0.0));
    }
}
