//! Seeded Monte Carlo simulation of the heralded link and its closed-form
//! rate budget.

mod budget;
mod calibrate;
mod config;
mod engine;
mod manifest;
pub mod presets;
mod schedule;

use thiserror::Error;

pub use budget::{link_budget, LimitingFactor, RateBudget};
pub use calibrate::{
    calibrate_noise, echo_capture, node_rates, twofold_per_herald, NodeRates, NoiseCalibration,
};
pub use config::{
    AnalysisSettings, Detection, EchoProfile, Protocol, ScenarioConfig, ScheduleModel,
    SCHEMA_VERSION,
};
pub use engine::{analysis_layout, run, run_analysis, simulate, ChunkOutput, RunOutput};
pub use manifest::{config_digest, RunManifest};
pub use schedule::{duty_cycle, open_intervals, Interval};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("{}", config_message(path, message, *line))]
    Config {
        path: String,
        message: String,
        line: Option<usize>,
    },
    #[error(transparent)]
    Model(#[from] crate::models::ModelError),
    #[error("node {node}: {reason}")]
    Unattainable { node: char, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("output: {0}")]
    Output(String),
}

fn config_message(path: &str, message: &str, line: Option<usize>) -> String {
    let at = match (path.is_empty(), line) {
        (false, Some(l)) => format!("line {l}, {path}: "),
        (false, None) => format!("{path}: "),
        (true, Some(l)) => format!("line {l}: "),
        (true, None) => String::new(),
    };
    format!("config error at {at}{message}")
}
