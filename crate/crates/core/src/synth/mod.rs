//! Synthetic shaky videos with known camera paths and stability labels.

mod base;

pub use base::procedural_base;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media::{write_y4m, Frame, FrameSequence, DEFAULT_FPS};
use crate::motion::Trajectory;
use crate::numfmt::sig6;
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Theta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShakeComponent {
    /// Pixels for x and y, radians for theta.
    pub amplitude: f64,
    /// Cycles over the whole trajectory.
    pub frequency: f64,
    pub phase: f64,
    pub axis: Axis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShakeSpec {
    pub components: Vec<ShakeComponent>,
    /// Gaussian jitter added to x and y, in pixels.
    pub noise_sigma: f64,
    pub length: usize,
}

impl ShakeSpec {
    pub fn still(length: usize) -> Self {
        ShakeSpec {
            components: Vec::new(),
            noise_sigma: 0.0,
            length,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.length < 16 {
            return Err(Error::Config(format!("trajectory length {} < 16", self.length)));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config("noise_sigma must be finite and >= 0".into()));
        }
        for c in &self.components {
            if !(c.amplitude >= 0.0 && c.amplitude.is_finite()) {
                return Err(Error::Config(format!("negative amplitude {}", c.amplitude)));
            }
            if !(0.0..=self.length as f64 / 2.0).contains(&c.frequency) {
                return Err(Error::Config(format!(
                    "frequency {} outside [0, {}]",
                    c.frequency,
                    self.length as f64 / 2.0
                )));
            }
        }
        Ok(())
    }
}

/// Sum of the ShakeSpec sinusoids per axis plus seeded Gaussian noise on x
/// and y.
pub fn gen_trajectory(spec: &ShakeSpec, seed: u64) -> Result<Trajectory> {
    spec.validate()?;
    let n = spec.length;
    let mut t = Trajectory::zeros(n);
    for c in &spec.components {
        let path = match c.axis {
            Axis::X => &mut t.x,
            Axis::Y => &mut t.y,
            Axis::Theta => &mut t.theta,
        };
        for (k, v) in path.iter_mut().enumerate() {
            *v += c.amplitude
                * (2.0 * std::f64::consts::PI * c.frequency * k as f64 / n as f64 + c.phase).sin();
        }
    }
    if spec.noise_sigma > 0.0 {
        let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
        let mut rng = seeded(seed);
        for k in 0..n {
            t.x[k] += noise.sample(&mut rng);
            t.y[k] += noise.sample(&mut rng);
        }
    }
    Ok(t)
}

/// Camera pose per frame as a map from base (centered) to frame (centered)
/// coordinates, q -> R(phi) q + e. Poses are chained from the trajectory's
/// increments so the motion between consecutive frames is exactly the
/// similarity (R(dtheta), d(x, y)).
fn poses(traj: &Trajectory) -> Vec<(f64, [f64; 2])> {
    let n = traj.x.len();
    let mut out = Vec::with_capacity(n);
    let (mut phi, mut e) = (traj.theta[0], [traj.x[0], traj.y[0]]);
    out.push((phi, e));
    for k in 1..n {
        let dt = traj.theta[k] - traj.theta[k - 1];
        let (s, c) = dt.sin_cos();
        e = [
            c * e[0] - s * e[1] + traj.x[k] - traj.x[k - 1],
            s * e[0] + c * e[1] + traj.y[k] - traj.y[k - 1],
        ];
        phi = traj.theta[k];
        out.push((phi, e));
    }
    out
}

fn to_base(pose: (f64, [f64; 2]), p: [f64; 2]) -> [f64; 2] {
    let (s, c) = pose.0.sin_cos();
    let (x, y) = (p[0] - pose.1[0], p[1] - pose.1[1]);
    [c * x + s * y, -s * x + c * y]
}

/// Half extent of the base region the rendered frames touch, relative to
/// the base center.
pub fn required_half_extent(traj: &Trajectory, out_size: usize) -> f64 {
    let h = (out_size as f64 - 1.0) / 2.0;
    let mut m: f64 = 0.0;
    for pose in poses(traj) {
        for p in [[-h, -h], [h, -h], [-h, h], [h, h]] {
            let q = to_base(pose, p);
            m = m.max(q[0].abs()).max(q[1].abs());
        }
    }
    m
}

fn bilinear_rgb(base: &Frame, x: f64, y: f64) -> [u8; 3] {
    let (w, h) = (base.width(), base.height());
    let x0 = (x as usize).min(w - 1);
    let y0 = (y as usize).min(h - 1);
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let rgb = base.rgb();
    let at = |xx: usize, yy: usize, ch: usize| rgb[(yy * w + xx) * 3 + ch] as f64;
    let mut out = [0u8; 3];
    for (ch, o) in out.iter_mut().enumerate() {
        let top = at(x0, y0, ch) * (1.0 - fx) + at(x1, y0, ch) * fx;
        let bot = at(x0, y1, ch) * (1.0 - fx) + at(x1, y1, ch) * fx;
        *o = (top * (1.0 - fy) + bot * fy).round().clamp(0.0, 255.0) as u8;
    }
    out
}

/// Render one square frame per trajectory sample by warping `base` with the
/// chained camera poses and cropping around its center.
pub fn render_shaky(base: &Frame, traj: &Trajectory, out_size: usize) -> Result<FrameSequence> {
    let n = traj.x.len();
    if traj.y.len() != n || traj.theta.len() != n {
        return Err(Error::dims(n, format!("{}/{}", traj.y.len(), traj.theta.len())));
    }
    let bc = [
        (base.width() as f64 - 1.0) / 2.0,
        (base.height() as f64 - 1.0) / 2.0,
    ];
    let h = (out_size as f64 - 1.0) / 2.0;
    let poses = poses(traj);
    for (k, &pose) in poses.iter().enumerate() {
        for p in [[-h, -h], [h, -h], [-h, h], [h, h]] {
            let q = to_base(pose, p);
            let (x, y) = (q[0] + bc[0], q[1] + bc[1]);
            if !(x >= 0.0 && y >= 0.0 && x <= base.width() as f64 - 1.0 && y <= base.height() as f64 - 1.0) {
                return Err(Error::Margin { frame: k });
            }
        }
    }
    let frames: Vec<Frame> = poses
        .par_iter()
        .map(|&pose| {
            Frame::from_fn(out_size, out_size, |x, y| {
                let q = to_base(pose, [x as f64 - h, y as f64 - h]);
                bilinear_rgb(base, q[0] + bc[0], q[1] + bc[1])
            })
        })
        .collect::<Result<_>>()?;
    FrameSequence::new(frames, DEFAULT_FPS)
}

/// Root-mean-square of the x/y path after removing DFT bins with
/// |k| < `cutoff`.
pub fn rms_high_freq(traj: &Trajectory, cutoff: usize) -> f64 {
    let n = traj.x.len();
    if n == 0 {
        return 0.0;
    }
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut energy = 0.0;
    for path in [&traj.x, &traj.y] {
        let mut buf: Vec<Complex<f64>> = path.iter().map(|&v| Complex::new(v, 0.0)).collect();
        fwd.process(&mut buf);
        for (k, b) in buf.iter_mut().enumerate() {
            if k.min(n - k) < cutoff {
                *b = Complex::new(0.0, 0.0);
            }
        }
        inv.process(&mut buf);
        energy += buf.iter().map(|c| (c.re / n as f64).powi(2)).sum::<f64>();
    }
    (energy / n as f64).sqrt()
}

/// Stability label on a 0..100 scale, 100 for a path without high-frequency
/// content.
pub fn gt_score(traj: &Trajectory, alpha: f64, cutoff: usize) -> f64 {
    100.0 * (-alpha * rms_high_freq(traj, cutoff)).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub count: usize,
    /// Target high-frequency jitter levels in pixels, assigned round-robin.
    pub amplitude_ladder: Vec<f64>,
    /// Each video scales its ladder level by a uniform factor in this range.
    pub amplitude_jitter: (f64, f64),
    pub length: usize,
    pub out_size: usize,
    pub alpha: f64,
    pub hf_cutoff: usize,
    /// Rotation amplitude per pixel of translation amplitude.
    pub theta_per_px: f64,
    /// Upper bound of the slow pan amplitude in pixels.
    pub pan_max: f64,
    /// Gaussian jitter as a fraction of the amplitude.
    pub noise_fraction: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            count: 200,
            amplitude_ladder: vec![0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            amplitude_jitter: (0.8, 1.2),
            length: 96,
            out_size: 128,
            alpha: 0.35,
            hf_cutoff: 6,
            theta_per_px: 0.002,
            pan_max: 6.0,
            noise_fraction: 0.05,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.count < 10 {
            return Err(Error::Config(format!("dataset count {} < 10", self.count)));
        }
        if self.amplitude_ladder.is_empty() || self.amplitude_ladder.iter().any(|a| !(*a >= 0.0)) {
            return Err(Error::Config("amplitude ladder must be non-empty and >= 0".into()));
        }
        let (lo, hi) = self.amplitude_jitter;
        if !(lo > 0.0 && lo <= hi) {
            return Err(Error::Config("amplitude_jitter must satisfy 0 < lo <= hi".into()));
        }
        if self.length < 16 || self.hf_cutoff + 1 > self.length / 2 {
            return Err(Error::Config("length too short for the high-frequency band".into()));
        }
        if self.out_size < 32 {
            return Err(Error::Config(format!("out_size {} < 32", self.out_size)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LabeledVideo {
    pub id: String,
    pub seq: FrameSequence,
    pub gt_trajectory: Trajectory,
    pub gt_score: f64,
    pub spec: ShakeSpec,
    pub level: f64,
    pub seed: u64,
}

/// Randomized high-frequency shake at amplitude `amp` (px), plus a slow pan
/// and a proportional rotation.
pub fn random_spec(cfg: &DatasetConfig, amp: f64, rng: &mut impl Rng) -> ShakeSpec {
    let l = cfg.length;
    let hf = |rng: &mut dyn rand::RngCore| rng.random_range(cfg.hf_cutoff..l / 2) as f64;
    let phase = |rng: &mut dyn rand::RngCore| rng.random_range(0.0..std::f64::consts::TAU);
    let mut components = Vec::new();
    if amp > 0.0 {
        for axis in [Axis::X, Axis::Y] {
            // two tones sharing the axis amplitude; their RMS is amp / sqrt(2)
            let split: f64 = rng.random_range(0.3..0.7);
            for share in [split, 1.0 - split] {
                components.push(ShakeComponent {
                    amplitude: amp * share.sqrt(),
                    frequency: hf(rng),
                    phase: phase(rng),
                    axis,
                });
            }
        }
        components.push(ShakeComponent {
            amplitude: amp * cfg.theta_per_px,
            frequency: hf(rng),
            phase: phase(rng),
            axis: Axis::Theta,
        });
    }
    for axis in [Axis::X, Axis::Y] {
        components.push(ShakeComponent {
            amplitude: rng.random_range(0.0..=cfg.pan_max),
            frequency: rng.random_range(1..=2) as f64,
            phase: phase(rng),
            axis,
        });
    }
    ShakeSpec {
        components,
        noise_sigma: cfg.noise_fraction * amp,
        length: l,
    }
}

pub fn gen_video(cfg: &DatasetConfig, index: usize, seed: u64) -> Result<LabeledVideo> {
    let vseed = derive_seed(seed, index as u64);
    let mut rng = seeded(vseed);
    let level = cfg.amplitude_ladder[index % cfg.amplitude_ladder.len()];
    let (lo, hi) = cfg.amplitude_jitter;
    let amp = level * if lo < hi { rng.random_range(lo..hi) } else { lo };
    let spec = random_spec(cfg, amp, &mut rng);
    let traj = gen_trajectory(&spec, derive_seed(vseed, 1))?;
    let half = required_half_extent(&traj, cfg.out_size).ceil() as usize + 2;
    let base = procedural_base(2 * half + 1, 2 * half + 1, derive_seed(vseed, 2))?;
    let seq = render_shaky(&base, &traj, cfg.out_size)?;
    Ok(LabeledVideo {
        id: format!("vid_{index:04}"),
        seq,
        gt_score: gt_score(&traj, cfg.alpha, cfg.hf_cutoff),
        gt_trajectory: traj,
        spec,
        level,
        seed: vseed,
    })
}

/// `cfg.count` labeled videos, deterministic for a seed.
pub fn gen_dataset(cfg: &DatasetConfig, seed: u64) -> Result<Vec<LabeledVideo>> {
    cfg.validate()?;
    (0..cfg.count)
        .into_par_iter()
        .map(|i| gen_video(cfg, i, seed))
        .collect()
}

#[derive(Serialize)]
struct VideoDump<'a> {
    id: &'a str,
    seed: u64,
    level: f64,
    gt_score: f64,
    spec: &'a ShakeSpec,
}

/// Write `<id>.y4m` and `<id>.json` per video plus `manifest.csv`
/// (video_id,path,gt_score) into `dir`.
pub fn write_dataset(videos: &[LabeledVideo], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    videos.par_iter().try_for_each(|v| -> Result<()> {
        let path = dir.join(format!("{}.y4m", v.id));
        let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(f);
        write_y4m(&v.seq, &mut w).map_err(|e| Error::io(&path, e))?;
        w.flush().map_err(|e| Error::io(&path, e))?;
        let jpath = dir.join(format!("{}.json", v.id));
        let dump = VideoDump {
            id: &v.id,
            seed: v.seed,
            level: v.level,
            gt_score: v.gt_score,
            spec: &v.spec,
        };
        let text = serde_json::to_string_pretty(&dump).map_err(|e| Error::Parse(e.to_string()))?;
        fs::write(&jpath, text + "\n").map_err(|e| Error::io(&jpath, e))
    })?;
    let mpath = dir.join("manifest.csv");
    let mut m = String::from("video_id,path,gt_score\n");
    for v in videos {
        m.push_str(&format!("{},{}.y4m,{}\n", v.id, v.id, sig6(v.gt_score)));
    }
    fs::write(&mpath, m).map_err(|e| Error::io(&mpath, e))
}
