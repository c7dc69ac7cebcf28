use crate::error::{Error, Result};

/// `(b1 - b2) / (1 + exp(-(x - b3) / b4)) + b2`, evaluated without overflow.
pub fn logistic(beta: &[f64; 4], x: f64) -> f64 {
    let [b1, b2, b3, b4] = *beta;
    let t = (x - b3) / b4;
    let s = if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    };
    (b1 - b2) * s + b2
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub beta: [f64; 4],
    pub mapped: Vec<f64>,
    pub sse: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub max_iter: usize,
    /// Stop once every vertex lies within this (max-norm) distance of the best.
    pub diameter_tol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            diameter_tol: 1e-8,
        }
    }
}

/// Downhill simplex minimization. Returns the best vertex, its value and the
/// number of iterations used.
pub fn nelder_mead<const D: usize>(
    f: impl Fn(&[f64; D]) -> f64,
    start: [f64; D],
    opts: NelderMeadOptions,
) -> ([f64; D], f64, usize) {
    const REFLECT: f64 = 1.0;
    const EXPAND: f64 = 2.0;
    const CONTRACT: f64 = 0.5;
    const SHRINK: f64 = 0.5;

    let mut simplex: Vec<([f64; D], f64)> = Vec::with_capacity(D + 1);
    simplex.push((start, f(&start)));
    for i in 0..D {
        let mut v = start;
        v[i] = if v[i] != 0.0 { v[i] * 1.05 } else { 0.00025 };
        simplex.push((v, f(&v)));
    }

    let lerp = |a: &[f64; D], b: &[f64; D], t: f64| -> [f64; D] {
        let mut out = [0.0; D];
        for k in 0..D {
            out[k] = a[k] + t * (b[k] - a[k]);
        }
        out
    };

    let mut iter = 0;
    while iter < opts.max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].0;
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(v, _)| v.iter().zip(&best).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if diameter < opts.diameter_tol {
            break;
        }
        iter += 1;

        let mut centroid = [0.0; D];
        for (v, _) in &simplex[..D] {
            for k in 0..D {
                centroid[k] += v[k] / D as f64;
            }
        }
        let (worst, f_worst) = simplex[D];
        let f_second = simplex[D - 1].1;
        let f_best = simplex[0].1;

        let xr = lerp(&centroid, &worst, -REFLECT);
        let fr = f(&xr);
        if fr < f_best {
            let xe = lerp(&centroid, &worst, -REFLECT * EXPAND);
            let fe = f(&xe);
            simplex[D] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < f_second {
            simplex[D] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < f_worst {
            let xc = lerp(&centroid, &xr, CONTRACT);
            (xc, f(&xc))
        } else {
            let xc = lerp(&centroid, &worst, CONTRACT);
            (xc, f(&xc))
        };
        if fc < fr.min(f_worst) {
            simplex[D] = (xc, fc);
            continue;
        }
        for i in 1..=D {
            let v = lerp(&best, &simplex[i].0, SHRINK);
            simplex[i] = (v, f(&v));
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    (simplex[0].0, simplex[0].1, iter)
}

/// Least-squares fit of the four-parameter logistic mapping `pred` onto `mos`.
pub fn logistic_fit(pred: &[f64], mos: &[f64]) -> Result<LogisticFit> {
    super::check_lengths(pred, mos)?;
    if pred.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "logistic fit needs at least 5 samples, got {}",
            pred.len()
        )));
    }
    let n = pred.len() as f64;
    let mean = pred.iter().sum::<f64>() / n;
    let std = (pred.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n).sqrt();
    if std == 0.0 || !std.is_finite() {
        return Err(Error::DegenerateInput("constant predictions".into()));
    }
    let mut sorted = pred.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    };
    let max = mos.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = mos.iter().cloned().fold(f64::INFINITY, f64::min);
    let start = [max, min, median, (std / 4.0).max(1e-6)];

    let sse = |b: &[f64; 4]| -> f64 {
        let v: f64 = pred
            .iter()
            .zip(mos)
            .map(|(&x, &y)| (logistic(b, x) - y).powi(2))
            .sum();
        if v.is_finite() {
            v
        } else {
            f64::MAX
        }
    };
    let (beta, sse_value, iterations) = nelder_mead(sse, start, NelderMeadOptions::default());
    let mapped = pred.iter().map(|&x| logistic(&beta, x)).collect();
    Ok(LogisticFit {
        beta,
        mapped,
        sse: sse_value,
        iterations,
    })
}
