//! Timestamp-stream analysis: coincidence histograms, cross-correlations,
//! fringe fits and the parameter sweeps built on them.

mod accumulate;
pub mod fit;
pub mod fringe;
pub mod histogram;
pub mod pipeline;
pub mod record;
pub mod sweep;

use thiserror::Error;

pub use accumulate::{HeraldSelection, PhaseKey, RunAnalysis};
pub use fringe::{fringe_fit, FringeFit, FringePoint, FringeSet};
pub use histogram::{
    build_histogram, g2_from_histogram, split_true_accidental, CoincidenceHistogram, G2Estimate,
    G2Value, HistogramLayout, TrueAccidental, WindowSpec,
};
pub use record::{Channel, DetectionRecord};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("stream not time-sorted at line {line}: {time} after {previous}")]
    Unsorted { line: u64, previous: u64, time: u64 },
    #[error("unexpected header {0:?}")]
    BadHeader(String),
    #[error("record file: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("histogram layout: {0}")]
    BadLayout(String),
    #[error("window {window} s with noise windows {noise_window} s does not fit in the histogram span")]
    WindowOutOfSpan { window: f64, noise_window: f64 },
    #[error("histogram has no counts")]
    EmptyHistogram,
    #[error("no heralds in selection")]
    NoHeralds,
    #[error("fringe curve {curve} has {found} distinct setpoints, need at least 5")]
    FringeSetpoints { curve: String, found: usize },
    #[error("fringe curve {curve} spans {span} rad, need a full period")]
    FringeSpan { curve: String, span: f64 },
    #[error("fringe curve for {0} has a setpoint without heralds or integration time")]
    NoExposure(String),
    #[error("fringe curve has no counts")]
    NoCounts,
    #[error("singular fringe fit")]
    SingularFit,
    #[error("fringe fit did not converge after {iterations} iterations (chi2 {chi2})")]
    FitNotConverged { iterations: usize, chi2: f64 },
    #[error("mode count {requested} outside 0..={available}")]
    ModeOutOfRange { requested: i32, available: i32 },
    #[error("no phase setpoints in run")]
    NoSetpoints,
    #[error("fit needs at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error(transparent)]
    Tomography(#[from] crate::tomography::TomographyError),
    #[error(transparent)]
    Simulation(#[from] crate::linksim::SimError),
}
