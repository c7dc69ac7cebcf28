use std::cmp::Ordering;

use super::{check_lengths, pearson};
use crate::error::{Error, Result};

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && v[idx[j]] == v[idx[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

fn check_rank_input(a: &[f64], b: &[f64]) -> Result<()> {
    check_lengths(a, b)?;
    if a.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "rank correlation needs at least 3 samples, got {}",
            a.len()
        )));
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(Error::InvalidValue("NaN in rank correlation input".into()));
    }
    Ok(())
}

/// Spearman rank-order correlation with average ranks for ties.
pub fn srocc(a: &[f64], b: &[f64]) -> Result<f64> {
    check_rank_input(a, b)?;
    pearson(&average_ranks(a), &average_ranks(b))
        .map_err(|_| Error::DegenerateInput("constant vector in SROCC".into()))
}

/// Kendall tau-b in O(n log n): sort by (a, b), count ties, then count
/// discordant pairs as merge-sort inversions of b.
pub fn krcc(a: &[f64], b: &[f64]) -> Result<f64> {
    check_rank_input(a, b)?;
    let n = a.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a[i].total_cmp(&a[j]).then(b[i].total_cmp(&b[j])));

    let pairs = |run: u64| run * run.saturating_sub(1) / 2;
    let (mut ties_a, mut ties_ab) = (0u64, 0u64);
    let (mut run_a, mut run_ab) = (1u64, 1u64);
    for w in idx.windows(2) {
        let (p, q) = (w[0], w[1]);
        if a[p] == a[q] {
            run_a += 1;
            if b[p] == b[q] {
                run_ab += 1;
            } else {
                ties_ab += pairs(run_ab);
                run_ab = 1;
            }
        } else {
            ties_a += pairs(run_a);
            ties_ab += pairs(run_ab);
            run_a = 1;
            run_ab = 1;
        }
    }
    ties_a += pairs(run_a);
    ties_ab += pairs(run_ab);

    let mut bs: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
    let swaps = merge_count(&mut bs);

    let mut ties_b = 0u64;
    let mut run_b = 1u64;
    for w in bs.windows(2) {
        if w[0] == w[1] {
            run_b += 1;
        } else {
            ties_b += pairs(run_b);
            run_b = 1;
        }
    }
    ties_b += pairs(run_b);

    let total = pairs(n as u64);
    let denom_a = (total - ties_a) as f64;
    let denom_b = (total - ties_b) as f64;
    if denom_a == 0.0 || denom_b == 0.0 {
        return Err(Error::DegenerateInput("all-tied vector in KRCC".into()));
    }
    let numer = total as f64 - ties_a as f64 - ties_b as f64 + ties_ab as f64 - 2.0 * swaps as f64;
    Ok((numer / (denom_a * denom_b).sqrt()).clamp(-1.0, 1.0))
}

/// Stable merge sort returning the number of strict inversions.
fn merge_count(v: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = merge_count(&mut v[..mid]) + merge_count(&mut v[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j].total_cmp(&v[i]) == Ordering::Less {
            merged.push(v[j]);
            count += (mid - i) as u64;
            j += 1;
        } else {
            merged.push(v[i]);
            i += 1;
        }
    }
    merged.extend_from_slice(&v[i..mid]);
    merged.extend_from_slice(&v[j..n]);
    v.copy_from_slice(&merged);
    count
}
