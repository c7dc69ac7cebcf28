use std::collections::HashMap;

use proptest::prelude::*;
use rand::seq::SliceRandom;

use stabilitykit::eval::pearson;
use stabilitykit::metrics::{freq_energy_ratio, itf, stability_score};
use stabilitykit::model::{loss_total, plcc_loss, rank_loss};
use stabilitykit::mos::{compute_mos, reject_outlier_subjects, simulate_ratings, split_half, RatingsTable, RejectConfig};
use stabilitykit::motion::Trajectory;
use stabilitykit::rng::seeded;
use stabilitykit::synth::{gen_trajectory, gt_score, procedural_base, render_shaky, required_half_extent, Axis, ShakeComponent, ShakeSpec};

type Row = (String, String, f64);

fn table(rows: &[Row]) -> RatingsTable {
    RatingsTable::from_rows(rows.iter().map(|(s, v, x)| (s.as_str(), v.as_str(), *x, None))).unwrap()
}

fn mos_by_video(t: &RatingsTable) -> HashMap<String, (f64, f64)> {
    let r = compute_mos(t).unwrap();
    r.videos.into_iter().zip(r.mos.into_iter().zip(r.std)).collect()
}

/// Full (subject × video) grid of ratings.
fn grid() -> impl Strategy<Value = Vec<Row>> {
    (2usize..6, 1usize..6).prop_flat_map(|(subjects, videos)| {
        proptest::collection::vec(0.0f64..=100.0, subjects * videos).prop_map(move |scores| {
            let mut rows = Vec::new();
            for s in 0..subjects {
                for v in 0..videos {
                    rows.push((format!("s{s}"), format!("v{v}"), scores[s * videos + v]));
                }
            }
            rows
        })
    })
}

/// Partially rated table; every kept video has at least three raters.
fn sparse() -> impl Strategy<Value = Vec<Row>> {
    (proptest::collection::vec((0.0f64..=100.0, prop::bool::weighted(0.7)), 8 * 8), 0.0f64..60.0).prop_map(
        |(cells, outlier_shift)| {
            let mut rows = Vec::new();
            for v in 0..8 {
                let video: Vec<Row> = (0..8)
                    .filter(|s| cells[s * 8 + v].1)
                    .map(|s| {
                        // subject 0 sits far from everyone else
                        let base = 40.0 + cells[s * 8 + v].0 * 0.1;
                        let x = if s == 0 { (base + outlier_shift).min(100.0) } else { base };
                        (format!("s{s}"), format!("v{v}"), x)
                    })
                    .collect();
                if video.len() >= 3 {
                    rows.extend(video);
                }
            }
            rows
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mos_ignores_row_order(rows in grid(), seed in any::<u64>()) {
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut seeded(seed));
        let a = mos_by_video(&table(&rows));
        let b = mos_by_video(&table(&shuffled));
        prop_assert_eq!(a.len(), b.len());
        for (video, (m, s)) in &a {
            let (m2, s2) = b[video];
            prop_assert!((m - m2).abs() < 1e-9 && (s - s2).abs() < 1e-9);
        }
    }

    #[test]
    fn rejection_leaves_clean_videos_alone(rows in sparse()) {
        let t = table(&rows);
        let cfg = RejectConfig::default();
        let cleaned = reject_outlier_subjects(&t, &cfg);
        prop_assume!(cleaned.is_ok());
        let cleaned = cleaned.unwrap();
        prop_assert_eq!(&cleaned, &reject_outlier_subjects(&t, &cfg).unwrap());
        let raw = mos_by_video(&t);
        for (i, v) in cleaned.videos.iter().enumerate() {
            let touched = rows
                .iter()
                .any(|(s, rv, _)| rv == v && cleaned.rejected_subjects.contains(s));
            if !touched {
                prop_assert!((cleaned.mos[i] - raw[v].0).abs() < 1e-9);
            }
        }
        prop_assert!(cleaned.mos.iter().all(|m| (0.0..=100.0).contains(m)));
        prop_assert!(cleaned.std.iter().all(|s| *s >= 0.0));
    }

    #[test]
    fn loss_is_permutation_invariant(
        pairs in proptest::collection::vec((-50.0f64..50.0, 0.0f64..100.0), 2..12),
        seed in any::<u64>(),
        lambda in 0.0f64..2.0,
    ) {
        let (pred, mos): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
        let mut shuffled = pairs.clone();
        shuffled.shuffle(&mut seeded(seed));
        let (sp, sm): (Vec<f64>, Vec<f64>) = shuffled.into_iter().unzip();
        let a = loss_total(&pred, &mos, lambda).unwrap();
        let b = loss_total(&sp, &sm, lambda).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn rank_loss_vanishes_when_gaps_cover_mos_gaps(
        mos in proptest::collection::vec(0.0f64..100.0, 2..12),
        stretch in 1.01f64..4.0,
        shift in -100.0f64..100.0,
        noise in proptest::collection::vec(-50.0f64..50.0, 12),
    ) {
        let stretched: Vec<f64> = mos.iter().map(|m| stretch * m + shift).collect();
        prop_assert_eq!(rank_loss(&stretched, &mos).unwrap(), 0.0);
        let arbitrary = &noise[..mos.len()];
        prop_assert!(rank_loss(arbitrary, &mos).unwrap() >= 0.0);
    }

    #[test]
    fn plcc_loss_flips_under_negation(
        pairs in proptest::collection::vec((-50.0f64..50.0, 0.0f64..100.0), 3..12),
        a in 0.1f64..10.0,
    ) {
        let (pred, mos): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        prop_assume!(pearson(&pred, &mos).is_ok());
        let l = plcc_loss(&pred, &mos).unwrap();
        let flipped: Vec<f64> = pred.iter().map(|p| -a * p).collect();
        prop_assert!((plcc_loss(&flipped, &mos).unwrap() - (1.0 - l)).abs() < 1e-10);
        prop_assert!((0.0..=1.0).contains(&l));
    }

    #[test]
    fn energy_ratio_is_a_fraction(path in proptest::collection::vec(-20.0f64..20.0, 16..80), lo in 1usize..4, width in 0usize..6) {
        let r = freq_energy_ratio(&path, lo..=lo + width).unwrap();
        prop_assert!((0.0..=1.0).contains(&r));
    }

    #[test]
    fn stability_score_ignores_uniform_scaling(
        x in proptest::collection::vec(-10.0f64..10.0, 16..64),
        k in 0.01f64..100.0,
    ) {
        let n = x.len();
        let traj = Trajectory {
            y: x.iter().rev().copied().collect(),
            theta: x.iter().map(|v| v * 0.01).collect(),
            x,
        };
        prop_assume!(traj.x.iter().any(|v| *v != traj.x[0]));
        let scaled = Trajectory {
            x: traj.x.iter().map(|v| v * k).collect(),
            y: traj.y.iter().map(|v| v * k).collect(),
            theta: traj.theta.iter().map(|v| v * k).collect(),
        };
        let a = stability_score(&traj).unwrap().score;
        let b = stability_score(&scaled).unwrap().score;
        prop_assert!((a - b).abs() < 1e-9, "n={} {} vs {}", n, a, b);
    }

    #[test]
    fn gt_score_decreases_with_jitter(a in 0.0f64..10.0, extra in 0.05f64..5.0) {
        let spec = |amp: f64| ShakeSpec {
            components: vec![ShakeComponent { amplitude: amp, frequency: 11.0, phase: 0.2, axis: Axis::X }],
            noise_sigma: 0.0,
            length: 64,
        };
        let lo = gt_score(&gen_trajectory(&spec(a), 0).unwrap(), 0.35, 6);
        let hi = gt_score(&gen_trajectory(&spec(a + extra), 0).unwrap(), 0.35, 6);
        prop_assert!(hi < lo);
        prop_assert!(lo <= 100.0);
    }

    #[test]
    fn split_half_is_bounded(subjects in 4usize..12, n in 1usize..3, seed in any::<u64>()) {
        let latent: Vec<f64> = (0..15).map(|i| 5.0 + 6.0 * i as f64).collect();
        let t = simulate_ratings(&latent, subjects, 20.0, seed).unwrap();
        let r = split_half(&t, n, 10, seed).unwrap();
        prop_assert!((-1.0..=1.0).contains(&r));
    }
}

#[test]
fn split_half_of_clones_is_one() {
    let latent: Vec<f64> = (0..20).map(|i| (i * 37 % 100) as f64).collect();
    let t = simulate_ratings(&latent, 10, 0.0, 1).unwrap();
    for n in 1..=5 {
        assert_eq!(split_half(&t, n, 20, 2).unwrap(), 1.0);
    }
}

#[test]
fn itf_is_reversal_invariant() {
    let spec = ShakeSpec {
        components: vec![
            ShakeComponent { amplitude: 3.0, frequency: 9.0, phase: 0.5, axis: Axis::X },
            ShakeComponent { amplitude: 0.01, frequency: 4.0, phase: 0.0, axis: Axis::Theta },
        ],
        noise_sigma: 0.0,
        length: 24,
    };
    let traj = gen_trajectory(&spec, 0).unwrap();
    let half = required_half_extent(&traj, 64).ceil() as usize + 2;
    let base = procedural_base(2 * half + 1, 2 * half + 1, 8).unwrap();
    let seq = render_shaky(&base, &traj, 64).unwrap();
    let fwd = itf(&seq).unwrap().score_db;
    let back = itf(&seq.reversed()).unwrap().score_db;
    assert!((fwd - back).abs() < 1e-9, "{fwd} vs {back}");
}
