use crate::error::{Error, Result};

fn check(pred: &[f64], mos: &[f64]) -> Result<()> {
    if pred.len() != mos.len() {
        return Err(Error::dims(mos.len(), pred.len()));
    }
    if pred.len() < 2 {
        return Err(Error::InsufficientData("loss needs at least 2 samples".into()));
    }
    Ok(())
}

struct Moments {
    dp: Vec<f64>,
    dm: Vec<f64>,
    spp: f64,
    smm: f64,
    spm: f64,
}

fn moments(pred: &[f64], mos: &[f64]) -> Moments {
    let n = pred.len() as f64;
    let mp = pred.iter().sum::<f64>() / n;
    let mm = mos.iter().sum::<f64>() / n;
    let dp: Vec<f64> = pred.iter().map(|p| p - mp).collect();
    let dm: Vec<f64> = mos.iter().map(|m| m - mm).collect();
    let spp = dp.iter().map(|x| x * x).sum();
    let smm = dm.iter().map(|x| x * x).sum();
    let spm = dp.iter().zip(&dm).map(|(a, b)| a * b).sum();
    Moments { dp, dm, spp, smm, spm }
}

/// (1 - r) / 2 with r the Pearson correlation; r is taken as 0 for a
/// constant prediction.
pub fn plcc_loss(pred: &[f64], mos: &[f64]) -> Result<f64> {
    check(pred, mos)?;
    let m = moments(pred, mos);
    if m.smm <= 0.0 {
        return Err(Error::DegenerateBatch("constant MOS in batch".into()));
    }
    let r = if m.spp <= 0.0 {
        0.0
    } else {
        m.spm / (m.spp * m.smm).sqrt()
    };
    Ok((1.0 - r) / 2.0)
}

/// dL_plcc/dpred. Zero for a constant MOS or constant prediction.
pub fn plcc_grad(pred: &[f64], mos: &[f64]) -> Result<Vec<f64>> {
    check(pred, mos)?;
    let m = moments(pred, mos);
    if m.smm <= 0.0 || m.spp <= 0.0 {
        return Ok(vec![0.0; pred.len()]);
    }
    let norm = (m.spp * m.smm).sqrt();
    let r = m.spm / norm;
    Ok(m
        .dp
        .iter()
        .zip(&m.dm)
        .map(|(dp, dm)| -0.5 * (dm / norm - r * dp / m.spp))
        .collect())
}

/// Pairwise hinge over all ordered pairs, margin |mos_i - mos_j|,
/// normalized by n^2.
pub fn rank_loss(pred: &[f64], mos: &[f64]) -> Result<f64> {
    check(pred, mos)?;
    let n = pred.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let e = if mos[i] >= mos[j] { 1.0 } else { -1.0 };
            total += ((mos[i] - mos[j]).abs() - e * (pred[i] - pred[j])).max(0.0);
        }
    }
    Ok(total / (n * n) as f64)
}

pub fn rank_grad(pred: &[f64], mos: &[f64]) -> Result<Vec<f64>> {
    check(pred, mos)?;
    let n = pred.len();
    let scale = 1.0 / (n * n) as f64;
    let mut g = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            let e = if mos[i] >= mos[j] { 1.0 } else { -1.0 };
            if (mos[i] - mos[j]).abs() - e * (pred[i] - pred[j]) > 0.0 {
                g[i] -= e * scale;
                g[j] += e * scale;
            }
        }
    }
    Ok(g)
}

pub fn loss_total(pred: &[f64], mos: &[f64], lambda: f64) -> Result<f64> {
    Ok(plcc_loss(pred, mos)? + lambda * rank_loss(pred, mos)?)
}

/// Loss and dL/dpred as used in training: a constant-MOS batch contributes
/// no correlation term.
pub fn loss_and_grad(pred: &[f64], mos: &[f64], lambda: f64) -> Result<(f64, Vec<f64>)> {
    let plcc = match plcc_loss(pred, mos) {
        Ok(v) => v,
        Err(Error::DegenerateBatch(_)) => 0.0,
        Err(e) => return Err(e),
    };
    let mut g = plcc_grad(pred, mos)?;
    let loss = plcc + lambda * rank_loss(pred, mos)?;
    if lambda != 0.0 {
        for (a, b) in g.iter_mut().zip(rank_grad(pred, mos)?) {
            *a += lambda * b;
        }
    }
    Ok((loss, g))
}
