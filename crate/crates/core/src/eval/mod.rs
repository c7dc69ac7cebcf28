//! Agreement between predicted scores and subjective scores: rank
//! correlations on raw predictions, linear correlation and RMSE after a
//! four-parameter logistic mapping.

mod logistic;
mod rank;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use logistic::{logistic, logistic_fit, nelder_mead, LogisticFit, NelderMeadOptions};
pub use rank::{average_ranks, krcc, srocc};

pub fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::dims(a.len(), b.len()));
    }
    Ok(())
}

/// Pearson linear correlation. Errors when either side is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    check_lengths(a, b)?;
    if a.len() < 2 {
        return Err(Error::InsufficientData("correlation needs at least 2 samples".into()));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return Err(Error::DegenerateInput("constant vector in correlation".into()));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

pub fn rmse(a: &[f64], b: &[f64]) -> Result<f64> {
    check_lengths(a, b)?;
    if a.is_empty() {
        return Err(Error::InsufficientData("rmse of empty vectors".into()));
    }
    let mse = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        / a.len() as f64;
    Ok(mse.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(rename = "SROCC")]
    pub srocc: f64,
    #[serde(rename = "PLCC")]
    pub plcc: f64,
    #[serde(rename = "KRCC")]
    pub krcc: f64,
    #[serde(rename = "RMSE")]
    pub rmse: f64,
    /// PLCC of the unmapped predictions, for reference.
    pub plcc_raw: f64,
    pub logistic_beta: [f64; 4],
}

/// Full evaluation. Argument order matters: predictions first, subjective
/// scores second; the logistic maps predictions onto the subjective scale.
pub fn evaluate(pred: &[f64], mos: &[f64]) -> Result<MetricReport> {
    check_lengths(pred, mos)?;
    if pred.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "evaluation needs at least 5 samples, got {}",
            pred.len()
        )));
    }
    let srocc = srocc(pred, mos)?;
    let krcc = krcc(pred, mos)?;
    let plcc_raw = pearson(pred, mos)?;
    let fit = logistic_fit(pred, mos)?;
    // a flat fitted curve carries no linear information
    let plcc = pearson(&fit.mapped, mos).unwrap_or(0.0);
    let rmse = rmse(&fit.mapped, mos)?;
    Ok(MetricReport {
        srocc,
        plcc,
        krcc,
        rmse,
        plcc_raw,
        logistic_beta: fit.beta,
    })
}
