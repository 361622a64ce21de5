use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::record::Channel;
use super::AnalysisError;
use crate::measure::{weighted_mean, Measured};
use crate::tomography::HeraldLabel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringePoint {
    /// Commanded phase, radians.
    pub phase: f64,
    pub herald: HeraldLabel,
    pub signal: Channel,
    pub coincidences: u64,
    /// Heralds recorded at this setpoint; used to normalise the counts.
    pub heralds: u64,
    /// Measurement time at this setpoint, seconds.
    pub integration: f64,
}

impl FringePoint {
    /// Counts per herald, or per second when herald numbers are unavailable.
    fn exposure(&self) -> f64 {
        if self.heralds > 0 {
            self.heralds as f64
        } else {
            self.integration
        }
    }
}

/// Phase-tagged coincidence counts. Every (herald, signal) curve must have
/// at least five distinct setpoints covering a full period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeSet {
    points: Vec<FringePoint>,
}

pub const MIN_SETPOINTS: usize = 5;

impl FringeSet {
    pub fn new(points: Vec<FringePoint>) -> Result<Self, AnalysisError> {
        let set = Self { points };
        for (key, curve) in set.curves() {
            let mut phases: Vec<f64> = curve.iter().map(|p| p.phase).collect();
            phases.sort_by(f64::total_cmp);
            phases.dedup();
            if phases.len() < MIN_SETPOINTS {
                return Err(AnalysisError::FringeSetpoints {
                    curve: format!("{}/{}", key.0.as_str(), key.1),
                    found: phases.len(),
                });
            }
            let span = phases[phases.len() - 1] - phases[0];
            if span < TAU - 1e-9 {
                return Err(AnalysisError::FringeSpan {
                    curve: format!("{}/{}", key.0.as_str(), key.1),
                    span,
                });
            }
            if curve.iter().any(|p| !(p.exposure() > 0.0)) {
                return Err(AnalysisError::NoExposure(key.0.as_str().to_string()));
            }
        }
        Ok(set)
    }

    pub fn points(&self) -> &[FringePoint] {
        &self.points
    }

    pub fn curves(&self) -> BTreeMap<(HeraldLabel, Channel), Vec<FringePoint>> {
        let mut out: BTreeMap<_, Vec<_>> = BTreeMap::new();
        for p in &self.points {
            out.entry((p.herald, p.signal)).or_default().push(*p);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    /// Fitted visibility clipped to [0, 1].
    pub visibility: Measured,
    pub raw_visibility: f64,
    /// Phase offset in (-pi, pi] of `A (1 + V cos(phase + phase_offset))`.
    pub phase: Measured,
    /// Mean level `A` in counts per herald (or per second).
    pub offset: Measured,
    pub chi2: f64,
    pub dof: usize,
    pub iterations: usize,
}

const MAX_ITERATIONS: usize = 50;

/// Weighted least-squares fit of `A (1 + V cos(phase + phi0))` to one curve.
///
/// The model is linear in `a + b cos + c sin`; Poisson weights are
/// recomputed from the fitted curve until the parameters settle.
pub fn fit_curve(points: &[FringePoint]) -> Result<FringeFit, AnalysisError> {
    if points.is_empty() {
        return Err(AnalysisError::NoCounts);
    }
    let ys: Vec<f64> = points
        .iter()
        .map(|p| p.coincidences as f64 / p.exposure())
        .collect();
    if ys.iter().all(|&y| y == 0.0) {
        return Err(AnalysisError::NoCounts);
    }
    // variance of y is (expected counts) / exposure^2; start from observed counts
    let mut var: Vec<f64> = points
        .iter()
        .map(|p| (p.coincidences as f64).max(1.0) / p.exposure().powi(2))
        .collect();
    let mut params = Vector3::zeros();
    let mut cov = Matrix3::zeros();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut xtwx = Matrix3::zeros();
        let mut xtwy = Vector3::zeros();
        for ((p, &y), &v) in points.iter().zip(&ys).zip(&var) {
            let x = Vector3::new(1.0, p.phase.cos(), p.phase.sin());
            let w = 1.0 / v;
            xtwx += w * x * x.transpose();
            xtwy += w * y * x;
        }
        let inv = xtwx.try_inverse().ok_or(AnalysisError::SingularFit)?;
        let next = inv * xtwy;
        let change = (next - params).norm() / next.norm().max(f64::MIN_POSITIVE);
        params = next;
        cov = inv;
        if change < 1e-10 {
            converged = true;
            break;
        }
        let mut updated = Vec::with_capacity(points.len());
        for (p, old) in points.iter().zip(&var) {
            let pred = params[0] + params[1] * p.phase.cos() + params[2] * p.phase.sin();
            updated.push(if pred > 0.0 {
                pred / p.exposure()
            } else {
                *old
            });
        }
        var = updated;
    }
    let chi2: f64 = points
        .iter()
        .zip(&ys)
        .zip(&var)
        .map(|((p, y), v)| {
            let pred = params[0] + params[1] * p.phase.cos() + params[2] * p.phase.sin();
            (y - pred).powi(2) / v
        })
        .sum();
    if !converged {
        return Err(AnalysisError::FitNotConverged { iterations, chi2 });
    }
    let (a, b, c) = (params[0], params[1], params[2]);
    if !(a > 0.0) {
        return Err(AnalysisError::SingularFit);
    }
    let r = b.hypot(c);
    let v = r / a;
    let (gv, gp) = if r > 0.0 {
        (
            Vector3::new(-v / a, b / (a * r), c / (a * r)),
            Vector3::new(0.0, c / (r * r), -b / (r * r)),
        )
    } else {
        (Vector3::zeros(), Vector3::zeros())
    };
    let sv = (gv.transpose() * cov * gv)[0].max(0.0).sqrt();
    let sp = if r > 0.0 {
        (gp.transpose() * cov * gp)[0].max(0.0).sqrt()
    } else {
        PI
    };
    Ok(FringeFit {
        visibility: Measured::new(v.clamp(0.0, 1.0), sv),
        raw_visibility: v,
        phase: Measured::new(wrap_phase((-c).atan2(b)), sp),
        offset: Measured::new(a, cov[(0, 0)].sqrt()),
        chi2,
        dof: points.len().saturating_sub(3),
        iterations,
    })
}

/// Fits every (herald, signal) curve of the set.
pub fn fringe_fit(
    set: &FringeSet,
) -> Result<BTreeMap<(HeraldLabel, Channel), FringeFit>, AnalysisError> {
    set.curves()
        .into_iter()
        .map(|(k, pts)| fit_curve(&pts).map(|f| (k, f)))
        .collect()
}

/// Visibility of one herald label from its S1 and S2 curves, combined by
/// inverse variance.
pub fn herald_visibility(
    fits: &BTreeMap<(HeraldLabel, Channel), FringeFit>,
    herald: HeraldLabel,
) -> Option<Measured> {
    let items: Vec<Measured> = fits
        .iter()
        .filter(|((h, _), _)| *h == herald)
        .map(|(_, f)| Measured::new(f.raw_visibility.clamp(0.0, 1.0), f.visibility.stderr))
        .collect();
    weighted_mean(&items)
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y > PI {
        y - TAU
    } else {
        y
    }
}

/// Phase difference `a - b` wrapped into (-pi, pi] with combined error.
pub fn phase_difference(a: Measured, b: Measured) -> Measured {
    Measured::new(
        wrap_phase(a.value - b.value),
        (a.stderr.powi(2) + b.stderr.powi(2)).sqrt(),
    )
}

/// Phase setpoints `0, step, ..., 2 pi` with `n` intervals per period.
pub fn default_setpoints(n: usize) -> Vec<f64> {
    (0..=n).map(|k| TAU * k as f64 / n as f64).collect()
}
