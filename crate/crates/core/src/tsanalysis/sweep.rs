//! Window-size, mode-count and dead-time sweeps.

use serde::{Deserialize, Serialize};

use super::accumulate::{HeraldSelection, RunAnalysis};
use super::fit::{linear_fit, LinearFit};
use super::histogram::WindowSpec;
use super::pipeline::{self, P11Source};
use super::record::Channel;
use super::AnalysisError;
use crate::linksim::{self, ScenarioConfig};
use crate::measure::{weighted_mean, Measured};
use crate::tomography::{Concurrence, HeraldLabel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowPoint {
    /// Detection window width, seconds.
    pub window: f64,
    pub p10: Measured,
    pub p01: Measured,
    pub p_acc_10: Measured,
    pub p11: Measured,
    pub p11_direct: Measured,
    pub visibility: Measured,
    pub concurrence: Concurrence,
}

/// Recomputes the tomography chain for each window width.
pub fn window_sweep(
    diag: &RunAnalysis,
    fringe: &RunAnalysis,
    windows: &[f64],
    spec: &WindowSpec,
    label: HeraldLabel,
) -> Result<Vec<WindowPoint>, AnalysisError> {
    check_ascending(windows)?;
    windows
        .iter()
        .map(|&w| {
            let s = spec.with_window(w);
            let t = pipeline::tomography(diag, fringe, &s, label, P11Source::Estimate)?;
            Ok(WindowPoint {
                window: w,
                p10: t.elements.p10,
                p01: t.elements.p01,
                p_acc_10: t.diagonal.p10.p_acc,
                p11: t.diagonal.p11_estimate,
                p11_direct: t.diagonal.p11_direct,
                visibility: t.visibility,
                concurrence: t.concurrence,
            })
        })
        .collect()
}

/// Populations only, for runs without a fringe measurement.
pub fn p11_window_curve(
    diag: &RunAnalysis,
    windows: &[f64],
    spec: &WindowSpec,
    label: HeraldLabel,
) -> Result<Vec<(f64, Measured, Measured)>, AnalysisError> {
    check_ascending(windows)?;
    windows
        .iter()
        .map(|&w| {
            let d = pipeline::diagonal(diag, &spec.with_window(w), label)?;
            Ok((w, d.p11_direct, d.p11_estimate))
        })
        .collect()
}

fn check_ascending(xs: &[f64]) -> Result<(), AnalysisError> {
    if xs.is_empty() {
        return Err(AnalysisError::TooFewPoints { needed: 1, got: 0 });
    }
    if xs.windows(2).any(|w| !(w[1] > w[0])) || !(xs[0] > 0.0) {
        return Err(AnalysisError::BadLayout(
            "sweep values must be positive and ascending".into(),
        ));
    }
    Ok(())
}

/// Window of the largest concurrence when it is not at either end of the
/// sweep.
pub fn interior_maximum(points: &[WindowPoint]) -> Option<&WindowPoint> {
    let (i, _) = points
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.concurrence.signed.value.total_cmp(&b.1.concurrence.signed.value))?;
    (i > 0 && i + 1 < points.len()).then(|| &points[i])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeRates {
    pub n_modes: i32,
    /// Heralds per second on I1 and I2.
    pub rate_i1: Measured,
    pub rate_i2: Measured,
    pub visibility_i1: Option<Measured>,
    pub visibility_i2: Option<Measured>,
}

/// Heralding rate per idler detector counting only the first `n` temporal
/// modes, and the fringe visibility of those heralds when the run has phase
/// setpoints.
pub fn mode_resolved_rates(
    run: &RunAnalysis,
    n: i32,
    spec: &WindowSpec,
) -> Result<ModeRates, AnalysisError> {
    let available = run.mode_count();
    if n < 0 || n > available {
        return Err(AnalysisError::ModeOutOfRange {
            requested: n,
            available,
        });
    }
    let t = run.duration();
    let rate = |label| {
        let k = run.herald_count(&HeraldSelection::label(label).modes_below(n));
        if t > 0.0 {
            Measured::new(k as f64 / t, (k as f64).sqrt() / t)
        } else {
            Measured::exact(0.0)
        }
    };
    let vis = |label| -> Option<Measured> {
        if n == 0 || run.setpoints().len() < super::fringe::MIN_SETPOINTS {
            return None;
        }
        let sel = HeraldSelection::label(label).modes_below(n);
        let fits: Vec<Measured> = [Channel::S1, Channel::S2]
            .into_iter()
            .filter_map(|s| pipeline::curve_fit(run, spec, sel, s).ok())
            .map(|f| Measured::new(f.raw_visibility.clamp(0.0, 1.0), f.visibility.stderr))
            .collect();
        weighted_mean(&fits)
    };
    Ok(ModeRates {
        n_modes: n,
        rate_i1: rate(HeraldLabel::I1),
        rate_i2: rate(HeraldLabel::I2),
        visibility_i1: vis(HeraldLabel::I1),
        visibility_i2: vis(HeraldLabel::I2),
    })
}

/// Linear fit of the per-detector heralding rate (mean of I1 and I2)
/// against the number of modes.
pub fn mode_scaling(rates: &[ModeRates]) -> Result<LinearFit, AnalysisError> {
    let xs: Vec<f64> = rates.iter().map(|r| r.n_modes as f64).collect();
    let ys: Vec<f64> = rates
        .iter()
        .map(|r| 0.5 * (r.rate_i1.value + r.rate_i2.value))
        .collect();
    linear_fit(&xs, &ys)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeadTimePoint {
    pub dead_time: f64,
    /// Heralds per second over both idler detectors in the fringe run.
    pub heralding_rate: Measured,
    pub concurrence: Concurrence,
}

/// Reruns the diagonal and fringe scenarios for each memory dead time.
pub fn dead_time_sweep(
    diag: &ScenarioConfig,
    fringe: &ScenarioConfig,
    dead_times: &[f64],
    spec: &WindowSpec,
    label: HeraldLabel,
) -> Result<Vec<DeadTimePoint>, AnalysisError> {
    check_ascending(dead_times)?;
    dead_times
        .iter()
        .map(|&dt| {
            let d = linksim::run_analysis(&diag.with_dead_time(dt)?)?;
            let f = linksim::run_analysis(&fringe.with_dead_time(dt)?)?;
            let heralds = f.herald_count(&HeraldSelection::all()) as f64;
            let t = f.duration();
            let tomo = pipeline::tomography(&d, &f, spec, label, P11Source::Estimate)?;
            Ok(DeadTimePoint {
                dead_time: dt,
                heralding_rate: Measured::new(heralds / t, heralds.sqrt() / t),
                concurrence: tomo.concurrence,
            })
        })
        .collect()
}
