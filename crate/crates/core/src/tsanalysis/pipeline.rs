//! From accumulated runs to density-matrix elements: the diagonal run gives
//! the populations, the fringe run the coherence.

use serde::{Deserialize, Serialize};

use super::accumulate::{HeraldSelection, RunAnalysis};
use super::fringe::{fit_curve, herald_visibility, FringeFit, FringePoint, FringeSet};
use super::histogram::{g2_at_peak, split_at_peak, G2Value, TrueAccidental, WindowSpec};
use super::record::Channel;
use super::AnalysisError;
use crate::measure::Measured;
use crate::tomography::{
    assemble, concurrence, effective_fidelity, offdiag_from_visibility, p11_estimate,
    two_photon_suppression, Concurrence, DensityMatrixElements, HeraldLabel,
};

/// Populations for one herald label from a run with each memory read out on
/// its own detector (node A on S1, node B on S2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalResult {
    pub label: HeraldLabel,
    pub n_heralds: u64,
    pub p10: TrueAccidental,
    pub p01: TrueAccidental,
    pub g2_a: G2Value,
    pub g2_b: G2Value,
    pub p11_direct: Measured,
    pub p11_estimate: Measured,
}

pub fn diagonal(
    run: &RunAnalysis,
    spec: &WindowSpec,
    label: HeraldLabel,
) -> Result<DiagonalResult, AnalysisError> {
    let peak = run.pooled_peak().ok_or(AnalysisError::EmptyHistogram)?;
    let sel = HeraldSelection::label(label);
    let ha = run.histogram(&sel, Some(Channel::S1));
    let hb = run.histogram(&sel, Some(Channel::S2));
    let p10 = split_at_peak(&ha, peak, spec)?;
    let p01 = split_at_peak(&hb, peak, spec)?;
    let g2_a = g2_at_peak(&ha, peak, spec)?.g2;
    let g2_b = g2_at_peak(&hb, peak, spec)?.g2;
    let twofold = run.twofold_signal_heralds(&sel, &p10.bins.signal, &p01.bins.signal);
    let n = ha.n_heralds;
    Ok(DiagonalResult {
        label,
        n_heralds: n,
        p11_direct: Measured::poisson_fraction(twofold, n),
        p11_estimate: p11_estimate(p10.p_coinc, p10.p_acc, p01.p_coinc, p01.p_acc),
        p10,
        p01,
        g2_a,
        g2_b,
    })
}

/// Per-setpoint coincidence counts in the detection window for the given
/// herald labels and both signal detectors.
pub fn fringe_points(
    run: &RunAnalysis,
    spec: &WindowSpec,
    labels: &[HeraldLabel],
) -> Result<FringeSet, AnalysisError> {
    let setpoints = run.setpoints();
    if setpoints.is_empty() {
        return Err(AnalysisError::NoSetpoints);
    }
    let peak = run.pooled_peak().ok_or(AnalysisError::EmptyHistogram)?;
    let mut points = Vec::new();
    for &label in labels {
        for signal in [Channel::S1, Channel::S2] {
            for &phase in &setpoints {
                let sel = HeraldSelection::label(label).at_setpoint(phase);
                let h = run.histogram(&sel, Some(signal));
                let bins = super::histogram::place_windows(&h.layout, peak, spec)?;
                points.push(FringePoint {
                    phase,
                    herald: label,
                    signal,
                    coincidences: h.sum(bins.signal),
                    heralds: h.n_heralds,
                    integration: run.exposure(Some(phase)),
                });
            }
        }
    }
    FringeSet::new(points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveFit {
    pub herald: HeraldLabel,
    pub signal: Channel,
    pub fit: FringeFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilityResult {
    pub label: HeraldLabel,
    /// S1 and S2 visibilities combined by inverse variance.
    pub visibility: Measured,
    pub curves: Vec<CurveFit>,
}

pub fn visibility(
    run: &RunAnalysis,
    spec: &WindowSpec,
    label: HeraldLabel,
) -> Result<VisibilityResult, AnalysisError> {
    let set = fringe_points(run, spec, &[label])?;
    let fits = super::fringe::fringe_fit(&set)?;
    let v = herald_visibility(&fits, label).ok_or(AnalysisError::NoCounts)?;
    Ok(VisibilityResult {
        label,
        visibility: v,
        curves: fits
            .into_iter()
            .map(|((herald, signal), fit)| CurveFit { herald, signal, fit })
            .collect(),
    })
}

/// Fits one (herald, signal) curve restricted to a herald selection.
pub fn curve_fit(
    run: &RunAnalysis,
    spec: &WindowSpec,
    sel: HeraldSelection,
    signal: Channel,
) -> Result<FringeFit, AnalysisError> {
    let peak = run.pooled_peak().ok_or(AnalysisError::EmptyHistogram)?;
    let mut points = Vec::new();
    for phase in run.setpoints() {
        let h = run.histogram(&sel.at_setpoint(phase), Some(signal));
        let bins = super::histogram::place_windows(&h.layout, peak, spec)?;
        points.push(FringePoint {
            phase,
            herald: sel.label,
            signal,
            coincidences: h.sum(bins.signal),
            heralds: h.n_heralds,
            integration: run.exposure(Some(phase)),
        });
    }
    let set = FringeSet::new(points)?;
    fit_curve(set.points())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum P11Source {
    /// Inferred from the true/accidental split of each arm.
    Estimate,
    /// Counted heralds with a click on both signal detectors.
    Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyResult {
    pub label: HeraldLabel,
    pub diagonal: DiagonalResult,
    pub visibility: Measured,
    pub elements: DensityMatrixElements,
    pub concurrence: Concurrence,
    pub h2c: Option<Measured>,
    pub effective_fidelity: Option<Measured>,
}

pub fn tomography(
    diag: &RunAnalysis,
    fringe: &RunAnalysis,
    spec: &WindowSpec,
    label: HeraldLabel,
    p11_source: P11Source,
) -> Result<TomographyResult, AnalysisError> {
    let diagonal = diagonal(diag, spec, label)?;
    let v = visibility(fringe, spec, label)?.visibility;
    tomography_from_parts(diagonal, v, p11_source)
}

pub fn tomography_from_parts(
    diagonal: DiagonalResult,
    visibility: Measured,
    p11_source: P11Source,
) -> Result<TomographyResult, AnalysisError> {
    let label = diagonal.label;
    let p10 = diagonal.p10.p_raw;
    let p01 = diagonal.p01.p_raw;
    let p11 = match p11_source {
        P11Source::Estimate => diagonal.p11_estimate,
        P11Source::Direct => diagonal.p11_direct,
    };
    let d = offdiag_from_visibility(visibility, p10, p01, label.sign())?;
    let elements = assemble(p10, p01, p11, d, label)?;
    Ok(TomographyResult {
        label,
        visibility,
        concurrence: concurrence(&elements),
        h2c: two_photon_suppression(&elements).ok(),
        effective_fidelity: effective_fidelity(&elements).ok(),
        elements,
        diagonal,
    })
}
