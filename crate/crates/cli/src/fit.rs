//! Least-squares fits of `log(E)` against time or against `φ̄`.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least {needed} samples, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("value {value} at index {index} is not positive")]
    NonPositive { index: usize, value: f64 },
    #[error("abscissae are all equal")]
    Degenerate,
    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),
}

pub const MIN_SAMPLES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn fit_affine(xs: &[f64], ys: &[f64]) -> Result<Fit, FitError> {
    if xs.len() != ys.len() {
        return Err(FitError::Length(xs.len(), ys.len()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(FitError::Degenerate);
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r2 = if ss_tot == 0.0 || ys.iter().all(|y| *y == ys[0]) { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(Fit { slope, intercept, r2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Abscissa {
    Time,
    Phibar,
}

/// Fits `log(values)` against `times` or against the matching `phibar`.
pub fn fit_rate(times: &[f64], values: &[f64], against: Abscissa, phibar: &[f64]) -> Result<Fit, FitError> {
    if times.len() != values.len() {
        return Err(FitError::Length(times.len(), values.len()));
    }
    if values.len() < MIN_SAMPLES {
        return Err(FitError::TooFew { needed: MIN_SAMPLES, got: values.len() });
    }
    if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(FitError::NonPositive { index, value });
    }
    let xs = match against {
        Abscissa::Time => times,
        Abscissa::Phibar => {
            if phibar.len() != values.len() {
                return Err(FitError::Length(phibar.len(), values.len()));
            }
            phibar
        }
    };
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    fit_affine(xs, &logs)
}
