//! Subjective ratings: mean opinion scores, outlier-subject screening,
//! golden and repeated video checks, and split-half reliability.

use std::collections::HashMap;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{rmse, srocc};
use crate::numfmt::sig6;
use crate::rng::{derive_seed, seeded};

/// Ratings of videos by subjects. Only the first rating of a
/// (subject, video) pair enters the score matrix; later ones are kept as
/// re-ratings.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingsTable {
    pub subjects: Vec<String>,
    pub videos: Vec<String>,
    /// `scores[subject][video]`.
    pub scores: Vec<Vec<Option<f64>>>,
    pub sessions: Vec<Vec<Option<String>>>,
    /// (subject, video, first score, repeated score).
    pub repeats: Vec<(usize, usize, f64, f64)>,
}

impl RatingsTable {
    pub fn new() -> Self {
        RatingsTable {
            subjects: Vec::new(),
            videos: Vec::new(),
            scores: Vec::new(),
            sessions: Vec::new(),
            repeats: Vec::new(),
        }
    }

    fn index(names: &mut Vec<String>, lookup: &mut HashMap<String, usize>, name: &str) -> usize {
        *lookup.entry(name.to_string()).or_insert_with(|| {
            names.push(name.to_string());
            names.len() - 1
        })
    }

    /// Build from (subject, video, score, session) rows in order of appearance.
    pub fn from_rows<'a>(
        rows: impl IntoIterator<Item = (&'a str, &'a str, f64, Option<&'a str>)>,
    ) -> Result<Self> {
        let mut t = RatingsTable::new();
        let (mut subj, mut vids) = (HashMap::new(), HashMap::new());
        let mut cells: Vec<(usize, usize, f64, Option<String>)> = Vec::new();
        for (s, v, score, session) in rows {
            if !(0.0..=100.0).contains(&score) {
                return Err(Error::InvalidValue(format!(
                    "rating {score} of {v} by {s} outside [0, 100]"
                )));
            }
            let si = Self::index(&mut t.subjects, &mut subj, s);
            let vi = Self::index(&mut t.videos, &mut vids, v);
            cells.push((si, vi, score, session.map(str::to_string)));
        }
        t.scores = vec![vec![None; t.videos.len()]; t.subjects.len()];
        t.sessions = vec![vec![None; t.videos.len()]; t.subjects.len()];
        for (si, vi, score, session) in cells {
            match t.scores[si][vi] {
                None => {
                    t.scores[si][vi] = Some(score);
                    t.sessions[si][vi] = session;
                }
                Some(first) => t.repeats.push((si, vi, first, score)),
            }
        }
        Ok(t)
    }

    /// CSV with columns subject_id,video_id,score and an optional session;
    /// a leading header row is skipped.
    pub fn read_csv(input: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(input);
        let mut rows: Vec<(String, String, f64, Option<String>)> = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse(format!("ratings csv: {e}")))?;
            if line == 0 && rec.get(0) == Some("subject_id") {
                continue;
            }
            if rec.len() < 3 || rec.len() > 4 {
                return Err(Error::Parse(format!(
                    "ratings csv line {}: expected 3 or 4 fields, got {}",
                    line + 1,
                    rec.len()
                )));
            }
            let score: f64 = rec[2].parse().map_err(|_| {
                Error::Parse(format!("ratings csv line {}: bad score {:?}", line + 1, &rec[2]))
            })?;
            let session = rec.get(3).filter(|s| !s.is_empty()).map(str::to_string);
            rows.push((rec[0].to_string(), rec[1].to_string(), score, session));
        }
        Self::from_rows(
            rows.iter()
                .map(|(s, v, x, se)| (s.as_str(), v.as_str(), *x, se.as_deref())),
        )
    }

    fn without(&self, dropped: &[bool]) -> Vec<Vec<Option<f64>>> {
        self.scores
            .iter()
            .zip(dropped)
            .map(|(row, &d)| if d { vec![None; row.len()] } else { row.clone() })
            .collect()
    }
}

impl Default for RatingsTable {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MosResult {
    pub videos: Vec<String>,
    pub mos: Vec<f64>,
    pub std: Vec<f64>,
    pub n: Vec<usize>,
    pub rejected_subjects: Vec<String>,
}

impl MosResult {
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "video_id,mos,std,n")?;
        for i in 0..self.videos.len() {
            writeln!(
                out,
                "{},{},{},{}",
                self.videos[i],
                sig6(self.mos[i]),
                sig6(self.std[i]),
                self.n[i]
            )?;
        }
        Ok(())
    }
}

fn mean_pop_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt())
}

fn mean_sample_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let d = if v.len() > 1 { n - 1.0 } else { 1.0 };
    (m, (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / d).sqrt())
}

fn column(scores: &[Vec<Option<f64>>], video: usize) -> Vec<f64> {
    scores.iter().filter_map(|row| row[video]).collect()
}

fn mos_from(table: &RatingsTable, scores: &[Vec<Option<f64>>], rejected: Vec<String>) -> Result<MosResult> {
    let mut r = MosResult {
        videos: table.videos.clone(),
        mos: Vec::with_capacity(table.videos.len()),
        std: Vec::with_capacity(table.videos.len()),
        n: Vec::with_capacity(table.videos.len()),
        rejected_subjects: rejected,
    };
    for (v, name) in table.videos.iter().enumerate() {
        let col = column(scores, v);
        if col.len() < 2 {
            return Err(Error::InsufficientRatings {
                video: name.clone(),
                count: col.len(),
            });
        }
        let (m, s) = mean_pop_std(&col);
        r.mos.push(m);
        r.std.push(s);
        r.n.push(col.len());
    }
    Ok(r)
}

/// Per-video mean and population standard deviation, no screening.
pub fn compute_mos(table: &RatingsTable) -> Result<MosResult> {
    mos_from(table, &table.scores, Vec::new())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectDenominator {
    /// Videos the subject rated.
    Rated,
    /// Every video in the table.
    AllVideos,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RejectConfig {
    /// A rating is an outlier when it lies more than this many stds from the
    /// video mean.
    pub sigmas: f64,
    /// A subject is rejected when their outlier share exceeds this fraction.
    pub max_outlier_fraction: f64,
    pub denominator: RejectDenominator,
    /// Population (true) or sample (false) std for the outlier test.
    pub population_std: bool,
}

impl Default for RejectConfig {
    fn default() -> Self {
        RejectConfig {
            sigmas: 2.0,
            max_outlier_fraction: 0.05,
            denominator: RejectDenominator::Rated,
            population_std: true,
        }
    }
}

/// Single-pass screening: flag ratings beyond the sigma band of their
/// video, reject subjects with too many flags, and average the rest.
pub fn reject_outlier_subjects(table: &RatingsTable, cfg: &RejectConfig) -> Result<MosResult> {
    let stats: Vec<(f64, f64)> = (0..table.videos.len())
        .map(|v| {
            let col = column(&table.scores, v);
            if col.is_empty() {
                (0.0, 0.0)
            } else if cfg.population_std {
                mean_pop_std(&col)
            } else {
                mean_sample_std(&col)
            }
        })
        .collect();
    let mut dropped = vec![false; table.subjects.len()];
    for (s, row) in table.scores.iter().enumerate() {
        let mut rated = 0usize;
        let mut outliers = 0usize;
        for (v, cell) in row.iter().enumerate() {
            if let Some(x) = cell {
                rated += 1;
                let (m, sd) = stats[v];
                if (x - m).abs() > cfg.sigmas * sd {
                    outliers += 1;
                }
            }
        }
        let denom = match cfg.denominator {
            RejectDenominator::Rated => rated,
            RejectDenominator::AllVideos => table.videos.len(),
        };
        dropped[s] = outliers as f64 > cfg.max_outlier_fraction * denom as f64;
    }
    if !dropped.is_empty() && dropped.iter().all(|&d| d) {
        return Err(Error::EmptyAfterCleaning);
    }
    let rejected = table
        .subjects
        .iter()
        .zip(&dropped)
        .filter(|(_, &d)| d)
        .map(|(s, _)| s.clone())
        .collect();
    mos_from(table, &table.without(&dropped), rejected)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GoldenCheck {
    pub srocc: f64,
    pub flagged: bool,
}

pub const GOLDEN_THRESHOLD: f64 = 0.6;

/// Rank agreement of a subject with the pilot MOS of the golden videos.
pub fn golden_check(subject: &[f64], golden_mos: &[f64], threshold: f64) -> Result<GoldenCheck> {
    if subject.len() < 3 {
        return Err(Error::InsufficientData("golden check needs at least 3 videos".into()));
    }
    let r = srocc(subject, golden_mos)?;
    Ok(GoldenCheck {
        srocc: r,
        flagged: r < threshold,
    })
}

/// RMSE between first and second ratings of repeated videos.
pub fn repeated_check(first: &[f64], second: &[f64]) -> Result<f64> {
    if first.len() < 2 {
        return Err(Error::InsufficientData("repeated check needs at least 2 videos".into()));
    }
    rmse(first, second)
}

fn group_mos(scores: &[Vec<Option<f64>>], group: &[usize], video: usize) -> Option<f64> {
    let vals: Vec<f64> = group.iter().filter_map(|&s| scores[s][video]).collect();
    if vals.is_empty() {
        None
    } else {
        Some(vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

fn split_once(table: &RatingsTable, n: usize, seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let mut ids: Vec<usize> = (0..table.subjects.len()).collect();
    ids.shuffle(&mut rng);
    let (a, b) = (&ids[..n], &ids[n..2 * n]);
    let (mut ma, mut mb) = (Vec::new(), Vec::new());
    for v in 0..table.videos.len() {
        if let (Some(x), Some(y)) = (group_mos(&table.scores, a, v), group_mos(&table.scores, b, v)) {
            ma.push(x);
            mb.push(y);
        }
    }
    if ma.len() >= 2 && ma == mb {
        return 1.0;
    }
    // no rank information (all ties or too few shared videos)
    srocc(&ma, &mb).unwrap_or(0.0)
}

/// Mean SROCC between the MOS of two disjoint random groups of `n`
/// subjects, over `repeats` draws seeded from `seed`. Repeat `r` uses the
/// same draw for every `n`.
pub fn split_half(table: &RatingsTable, n: usize, repeats: usize, seed: u64) -> Result<f64> {
    if n == 0 || repeats == 0 {
        return Err(Error::Config("group size and repeats must be positive".into()));
    }
    if table.subjects.len() < 2 * n {
        return Err(Error::InsufficientData(format!(
            "split-half with groups of {n} needs {} subjects, have {}",
            2 * n,
            table.subjects.len()
        )));
    }
    let vals: Vec<f64> = (0..repeats as u64)
        .into_par_iter()
        .map(|r| split_once(table, n, derive_seed(seed, r)))
        .collect();
    Ok(vals.iter().sum::<f64>() / repeats as f64)
}

/// Table in which every subject rates every video as the latent score plus
/// independent Gaussian noise, clamped to [0, 100].
pub fn simulate_ratings(latent: &[f64], subjects: usize, noise_sigma: f64, seed: u64) -> Result<RatingsTable> {
    let noise = Normal::new(0.0, noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = seeded(seed);
    let mut t = RatingsTable::new();
    t.subjects = (0..subjects).map(|s| format!("s{s:03}")).collect();
    t.videos = (0..latent.len()).map(|v| format!("v{v:04}")).collect();
    t.scores = (0..subjects)
        .map(|_| {
            latent
                .iter()
                .map(|m| Some((m + noise.sample(&mut rng)).clamp(0.0, 100.0)))
                .collect()
        })
        .collect();
    t.sessions = vec![vec![None; latent.len()]; subjects];
    Ok(t)
}
