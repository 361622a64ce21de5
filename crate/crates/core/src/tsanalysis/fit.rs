//! Small regression helpers for the sweep curves.

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::measure::Measured;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: Measured,
    pub intercept: Measured,
    pub r_squared: f64,
}

/// Ordinary least squares `y = intercept + slope x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit, AnalysisError> {
    let n = xs.len().min(ys.len());
    if n < 3 {
        return Err(AnalysisError::TooFewPoints { needed: 3, got: n });
    }
    let nf = n as f64;
    let mx = xs[..n].iter().sum::<f64>() / nf;
    let my = ys[..n].iter().sum::<f64>() / nf;
    let sxx: f64 = xs[..n].iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs[..n]
        .iter()
        .zip(&ys[..n])
        .map(|(x, y)| (x - mx) * (y - my))
        .sum();
    let syy: f64 = ys[..n].iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(AnalysisError::TooFewPoints { needed: 2, got: 1 });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs[..n]
        .iter()
        .zip(&ys[..n])
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let s2 = sse / (nf - 2.0);
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(LinearFit {
        slope: Measured::new(slope, (s2 / sxx).sqrt()),
        intercept: Measured::new(intercept, (s2 * (1.0 / nf + mx * mx / sxx)).sqrt()),
        r_squared,
    })
}

/// Exponent of a power law `y = c x^k` fitted in log-log space over the
/// strictly positive points.
pub fn power_law_exponent(xs: &[f64], ys: &[f64]) -> Result<Measured, AnalysisError> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .unzip();
    Ok(linear_fit(&lx, &ly)?.slope)
}
