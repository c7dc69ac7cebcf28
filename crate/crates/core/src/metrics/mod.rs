//! Classic stability baselines: inter-frame transformation fidelity (mean
//! adjacent-frame PSNR) and the low-frequency energy share of the camera path.

use std::ops::RangeInclusive;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media::FrameSequence;
use crate::motion::Trajectory;
use crate::plane::Plane;

pub const PSNR_CAP_DB: f64 = 100.0;
pub const MIN_PATH_LEN: usize = 16;

pub fn psnr(a: &Plane, b: &Plane) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::dims(
            format!("{}x{}", a.width(), a.height()),
            format!("{}x{}", b.width(), b.height()),
        ));
    }
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
        .sum::<f64>()
        / a.data().len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (255.0f64 * 255.0 / mse).log10()).min(PSNR_CAP_DB))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItfResult {
    pub score_db: f64,
    pub per_pair_db: Vec<f64>,
}

pub fn itf(seq: &FrameSequence) -> Result<ItfResult> {
    if seq.len() < 2 {
        return Err(Error::InsufficientFrames {
            required: 2,
            available: seq.len(),
        });
    }
    let lumas: Vec<Plane> = seq.frames().iter().map(|f| f.to_luma()).collect();
    let per_pair_db = lumas
        .windows(2)
        .map(|w| psnr(&w[0], &w[1]))
        .collect::<Result<Vec<_>>>()?;
    let score_db = per_pair_db.iter().sum::<f64>() / per_pair_db.len() as f64;
    Ok(ItfResult {
        score_db,
        per_pair_db,
    })
}

/// Share of non-DC spectral energy (bins 1..=M/2) that falls inside `band`.
/// A path with no non-DC energy is treated as perfectly smooth (ratio 1).
pub fn freq_energy_ratio(path: &[f64], band: RangeInclusive<usize>) -> Result<f64> {
    let m = path.len();
    if m < MIN_PATH_LEN {
        return Err(Error::InsufficientFrames {
            required: MIN_PATH_LEN,
            available: m,
        });
    }
    let power = power_spectrum(path);
    let half = m / 2;
    let total: f64 = power[1..=half].iter().sum();
    if total <= 0.0 {
        return Ok(1.0);
    }
    let lo = (*band.start()).max(1);
    let hi = (*band.end()).min(half);
    let inside: f64 = if lo <= hi { power[lo..=hi].iter().sum() } else { 0.0 };
    Ok((inside / total).clamp(0.0, 1.0))
}

/// |X_k|^2 for k = 0..M-1.
pub(crate) fn power_spectrum(path: &[f64]) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = path.iter().map(|&x| Complex::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf.iter().map(|c| c.norm_sqr()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Combine {
    #[default]
    Min,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityConfig {
    /// Lowest and highest non-DC bin counted as low frequency.
    pub band: (usize, usize),
    pub combine: Combine,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            band: (1, 5),
            combine: Combine::Min,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentScores {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityResult {
    pub score: f64,
    pub component_scores: ComponentScores,
}

pub fn stability_score(traj: &Trajectory) -> Result<StabilityResult> {
    stability_score_with(traj, &StabilityConfig::default())
}

pub fn stability_score_with(traj: &Trajectory, cfg: &StabilityConfig) -> Result<StabilityResult> {
    let band = cfg.band.0..=cfg.band.1;
    let c = ComponentScores {
        x: freq_energy_ratio(&traj.x, band.clone())?,
        y: freq_energy_ratio(&traj.y, band.clone())?,
        theta: freq_energy_ratio(&traj.theta, band)?,
    };
    let score = match cfg.combine {
        Combine::Min => c.x.min(c.y).min(c.theta),
        Combine::Mean => (c.x + c.y + c.theta) / 3.0,
    };
    Ok(StabilityResult {
        score,
        component_scores: c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::Frame;
    use std::f64::consts::PI;

    fn sinus(m: usize, bin: f64, amp: f64) -> Vec<f64> {
        (0..m)
            .map(|t| amp * (2.0 * PI * bin * t as f64 / m as f64).sin())
            .collect()
    }

    // Direct O(M^2) DFT, independent of the FFT path.
    fn dft_ratio(path: &[f64], lo: usize, hi: usize) -> f64 {
        let m = path.len();
        let p: Vec<f64> = (0..m)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, &x) in path.iter().enumerate() {
                    let a = -2.0 * PI * (k * t) as f64 / m as f64;
                    re += x * a.cos();
                    im += x * a.sin();
                }
                re * re + im * im
            })
            .collect();
        let total: f64 = p[1..=m / 2].iter().sum();
        if total == 0.0 {
            return 1.0;
        }
        p[lo..=hi.min(m / 2)].iter().sum::<f64>() / total
    }

    #[test]
    fn psnr_reference_values() {
        let a = Plane::filled(16, 16, 10.0);
        assert_eq!(psnr(&a, &a).unwrap(), 100.0);
        let b = Plane::filled(16, 16, 11.0);
        assert!((psnr(&a, &b).unwrap() - 48.130_803_608_679).abs() < 1e-4);
        let z = Plane::filled(16, 16, 0.0);
        let f = Plane::filled(16, 16, 255.0);
        assert!(psnr(&z, &f).unwrap().abs() < 1e-12);
        assert!(psnr(&z, &Plane::filled(8, 16, 0.0)).is_err());
    }

    #[test]
    fn itf_averages_pairs() {
        let g = |v: u8| Frame::from_fn(16, 16, |_, _| [v; 3]).unwrap();
        let seq = FrameSequence::new(vec![g(10), g(10), g(11)], 30.0).unwrap();
        let r = itf(&seq).unwrap();
        assert_eq!(r.per_pair_db.len(), 2);
        assert!((r.score_db - 74.065_401_8).abs() < 1e-4, "{}", r.score_db);
        let still = FrameSequence::new(vec![g(50); 10], 30.0).unwrap();
        assert_eq!(itf(&still).unwrap().score_db, 100.0);
        let rev = itf(&seq.reversed()).unwrap();
        assert!((rev.score_db - r.score_db).abs() < 1e-12);
    }

    #[test]
    fn energy_ratio_reference_cases() {
        assert_eq!(freq_energy_ratio(&[0.0; 32], 1..=5).unwrap(), 1.0);
        let low = sinus(64, 3.0, 2.0);
        assert!((freq_energy_ratio(&low, 1..=5).unwrap() - 1.0).abs() < 1e-12);
        assert!((dft_ratio(&low, 1, 5) - 1.0).abs() < 1e-12);
        let high = sinus(64, 20.0, 2.0);
        assert!(freq_energy_ratio(&high, 1..=5).unwrap().abs() < 1e-9);
        assert!(matches!(
            freq_energy_ratio(&[1.0; 8], 1..=5),
            Err(Error::InsufficientFrames { .. })
        ));
    }

    #[test]
    fn fft_matches_direct_dft() {
        let mut rng = crate::rng::seeded(3);
        use rand::Rng;
        for m in [16usize, 17, 40, 64, 97] {
            let path: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
            for (lo, hi) in [(1, 5), (2, 6), (1, 1), (4, 40)] {
                let a = freq_energy_ratio(&path, lo..=hi).unwrap();
                let b = dft_ratio(&path, lo, hi);
                assert!((a - b).abs() < 1e-10, "m={m} {a} {b}");
            }
        }
    }

    #[test]
    fn ratio_falls_as_frequency_leaves_band() {
        let ratios: Vec<f64> = [3.0, 5.5, 8.0, 12.0, 20.0]
            .iter()
            .map(|&f| freq_energy_ratio(&sinus(64, f, 1.0), 1..=5).unwrap())
            .collect();
        assert!(ratios.windows(2).all(|w| w[0] >= w[1] - 1e-12), "{ratios:?}");
    }

    #[test]
    fn stability_score_cases() {
        assert_eq!(stability_score(&Trajectory::zeros(64)).unwrap().score, 1.0);
        let mut t = Trajectory::zeros(64);
        t.x = sinus(64, 2.0, 10.0);
        let r = stability_score(&t).unwrap();
        assert!((r.score - 1.0).abs() < 1e-12);
        t.x = sinus(64, 25.0, 3.0);
        let r = stability_score(&t).unwrap();
        assert!(r.score < 1e-9);
        assert_eq!(r.component_scores.y, 1.0);
        let mean = stability_score_with(
            &t,
            &StabilityConfig {
                combine: Combine::Mean,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((mean.score - 2.0 / 3.0).abs() < 1e-9);
    }

    proptest::proptest! {
        #[test]
        fn psnr_symmetric(a in proptest::collection::vec(0.0f32..255.0, 64),
                          b in proptest::collection::vec(0.0f32..255.0, 64)) {
            let (pa, pb) = (Plane::new(8, 8, a), Plane::new(8, 8, b));
            proptest::prop_assert_eq!(psnr(&pa, &pb).unwrap(), psnr(&pb, &pa).unwrap());
        }

        #[test]
        fn ratio_bounded_and_scale_invariant(
            path in proptest::collection::vec(-10.0f64..10.0, 16..80),
            k in 0.01f64..100.0,
        ) {
            let r = freq_energy_ratio(&path, 1..=5).unwrap();
            proptest::prop_assert!((0.0..=1.0).contains(&r));
            let scaled: Vec<f64> = path.iter().map(|v| v * k).collect();
            let rs = freq_energy_ratio(&scaled, 1..=5).unwrap();
            proptest::prop_assert!((r - rs).abs() < 1e-9);
        }
    }
}
