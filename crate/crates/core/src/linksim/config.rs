use serde::{Deserialize, Serialize};

use super::SimError;
use crate::models::{ChannelModel, MemoryModel, ModelError, SourceModel};
use crate::tsanalysis::WindowSpec;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// Each herald triggers storage, closes the pump and the memory.
    Conditional,
    /// Fixed storage cycle with a multi-mode acceptance window.
    Unconditional,
    /// Conditional storage read out through the signal interferometer while
    /// the phase setpoint steps between measurement slots.
    FringeScan,
    /// No storage: signal photons reach the detectors directly.
    Transparency,
}

/// How the two memory outputs reach the signal detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detection {
    /// Node A on S1, node B on S2.
    Direct,
    /// Both outputs combined on a beam splitter ahead of S1 and S2.
    Interference,
}

/// Timing of the source locks, memory preparation and storage cycles.
/// Times in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleModel {
    pub t_lock: f64,
    pub t_phase: f64,
    pub t_meas: f64,
    /// The memories are re-prepared at the start of every period.
    pub prep_period: f64,
    pub prep_duration: f64,
    pub pump_off_time: f64,
    /// Unconditional protocol only.
    pub spdc_cycle: f64,
    pub open_window: f64,
    pub n_modes: u32,
}

impl ScheduleModel {
    pub fn lock_cycle(&self) -> f64 {
        self.t_lock + self.t_phase + self.t_meas
    }
}

/// Temporal shape of a retrieved photon around its nominal time: a Gaussian
/// truncated to one mode duration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EchoProfile {
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSettings {
    pub bin_width: f64,
    /// Histograms cover the expected delay plus and minus this span.
    pub half_span: f64,
    #[serde(flatten)]
    pub windows: WindowSpec,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self {
            bin_width: 10e-9,
            half_span: 5e-6,
            windows: WindowSpec::default(),
        }
    }
}

fn default_one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub protocol: Protocol,
    /// Defaults to interference for fringe scans and direct otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detection: Option<Detection>,
    pub source_a: SourceModel,
    pub source_b: SourceModel,
    pub memory_a: MemoryModel,
    pub memory_b: MemoryModel,
    pub channel: ChannelModel,
    pub schedule: ScheduleModel,
    /// Spin storage time, seconds.
    pub storage_time: f64,
    pub feed_forward: bool,
    #[serde(default)]
    pub phase_setpoints: Vec<f64>,
    pub signal_phase_jitter_sigma: f64,
    pub echo_profile: EchoProfile,
    #[serde(default)]
    pub analysis: AnalysisSettings,
    /// Signal-path transmission in the transparency protocol on top of
    /// setup and detector efficiency.
    #[serde(default = "default_one")]
    pub transparency_transmission: f64,
    pub seed: u64,
    /// Simulated time, seconds.
    pub duration: f64,
}

fn issue(path: &str, message: impl Into<String>) -> SimError {
    SimError::Config {
        path: path.to_string(),
        message: message.into(),
        line: None,
    }
}

impl ScenarioConfig {
    pub fn detection(&self) -> Detection {
        self.detection.unwrap_or(match self.protocol {
            Protocol::FringeScan => Detection::Interference,
            _ => Detection::Direct,
        })
    }

    /// Delay between a herald and the nominal arrival of the stored photon.
    pub fn readout_delay(&self) -> f64 {
        match self.protocol {
            Protocol::Transparency => 0.0,
            _ => self.memory_a.storage_time(self.storage_time),
        }
    }

    pub fn mode_duration(&self) -> f64 {
        self.memory_a.mode_duration
    }

    pub fn dead_time(&self) -> f64 {
        self.memory_a.dead_time.max(self.memory_b.dead_time)
    }

    /// Heralds closer than this to the end of a measurement slot are not
    /// accepted, so every readout and its noise windows fall inside the slot.
    pub fn herald_guard(&self) -> f64 {
        match self.protocol {
            Protocol::Conditional | Protocol::FringeScan => {
                self.readout_delay() + self.analysis.half_span + self.mode_duration()
            }
            Protocol::Transparency => self.analysis.half_span + self.mode_duration(),
            Protocol::Unconditional => 0.0,
        }
    }

    pub fn with_dead_time(&self, dead_time: f64) -> Result<Self, SimError> {
        let mut c = self.clone();
        c.memory_a.dead_time = dead_time;
        c.memory_b.dead_time = dead_time;
        c.validate()?;
        Ok(c)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn with_duration(&self, duration: f64) -> Self {
        Self {
            duration,
            ..self.clone()
        }
    }

    /// Scales both pump powers and pair numbers by `k`.
    pub fn with_pump_factor(&self, k: f64) -> Result<Self, SimError> {
        let mut c = self.clone();
        c.source_a = c.source_a.scaled_pump(k)?;
        c.source_b = c.source_b.scaled_pump(k)?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(issue(
                "schema_version",
                format!("unsupported schema version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        let model = |path: &str, r: Result<(), ModelError>| {
            r.map_err(|e| match e {
                ModelError::OutOfRange { name, .. } => issue(&format!("{path}.{name}"), e.to_string()),
                other => issue(path, other.to_string()),
            })
        };
        model("source_a", self.source_a.validate())?;
        model("source_b", self.source_b.validate())?;
        model("memory_a", self.memory_a.validate())?;
        model("memory_b", self.memory_b.validate())?;
        model("channel", self.channel.validate())?;

        if (self.memory_a.mode_duration - self.memory_b.mode_duration).abs()
            > 1e-9 * self.memory_a.mode_duration
        {
            return Err(issue("memory_b.mode_duration", "both memories must use the same mode duration"));
        }
        if (self.memory_a.tau_afc - self.memory_b.tau_afc).abs() > 1e-12 {
            return Err(issue("memory_b.tau_afc", "both memories must share the AFC delay"));
        }
        if !(self.storage_time >= 0.0 && self.storage_time.is_finite()) {
            return Err(issue("storage_time", "must be finite and >= 0"));
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(issue("duration", "must be finite and >= 0"));
        }
        if !(self.echo_profile.sigma > 0.0) {
            return Err(issue("echo_profile.sigma", "must be > 0"));
        }
        if !(self.signal_phase_jitter_sigma >= 0.0) {
            return Err(issue("signal_phase_jitter_sigma", "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.transparency_transmission) {
            return Err(issue("transparency_transmission", "must be in [0, 1]"));
        }

        let s = &self.schedule;
        for (name, v) in [
            ("schedule.t_lock", s.t_lock),
            ("schedule.t_phase", s.t_phase),
            ("schedule.prep_duration", s.prep_duration),
            ("schedule.pump_off_time", s.pump_off_time),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(issue(name, "must be finite and >= 0"));
            }
        }
        if !(s.t_meas > 0.0) {
            return Err(issue("schedule.t_meas", "must be > 0"));
        }
        if !(s.prep_period > 0.0) {
            return Err(issue("schedule.prep_period", "must be > 0"));
        }
        if s.prep_duration >= s.prep_period {
            return Err(issue("schedule.prep_duration", "must be shorter than prep_period"));
        }
        if s.pump_off_time > self.memory_a.dead_time || s.pump_off_time > self.memory_b.dead_time {
            return Err(issue("schedule.pump_off_time", "must not exceed the memory dead time"));
        }
        if self.protocol == Protocol::Unconditional {
            let expected = s.n_modes as f64 * self.mode_duration();
            if s.n_modes == 0 || (s.open_window - expected).abs() > 1e-9 * expected.max(1e-12) {
                return Err(issue(
                    "schedule.open_window",
                    format!("must equal n_modes x mode_duration = {expected:e} s"),
                ));
            }
            let needed = s.open_window + self.readout_delay() + self.analysis.half_span;
            if !(s.spdc_cycle >= needed) {
                return Err(issue(
                    "schedule.spdc_cycle",
                    format!("must cover the acceptance window, readout and analysis span ({needed:e} s)"),
                ));
            }
            if s.spdc_cycle > s.t_meas {
                return Err(issue("schedule.spdc_cycle", "must fit inside t_meas"));
            }
        } else if s.t_meas <= self.herald_guard() {
            return Err(issue(
                "schedule.t_meas",
                "must exceed the readout delay plus analysis span",
            ));
        }

        match (self.protocol, self.detection()) {
            (Protocol::FringeScan, Detection::Direct) => {
                return Err(issue("detection", "fringe scans need interference detection"));
            }
            (Protocol::Transparency, Detection::Interference) => {
                return Err(issue("detection", "transparency runs use direct detection"));
            }
            _ => {}
        }
        if self.detection() == Detection::Interference {
            if self.phase_setpoints.is_empty() {
                return Err(issue("phase_setpoints", "interference detection needs at least one setpoint"));
            }
            if self.phase_setpoints.iter().any(|p| !p.is_finite()) {
                return Err(issue("phase_setpoints", "setpoints must be finite"));
            }
        }
        let a = &self.analysis;
        if !(a.bin_width > 0.0) || !(a.half_span > 0.0) || !(a.windows.window > 0.0) {
            return Err(issue("analysis", "bin_width, half_span and window must be > 0"));
        }
        Ok(())
    }

    /// Parses and validates a JSON configuration. Errors carry the line of
    /// the offending text where it can be located.
    pub fn from_json_str(text: &str) -> Result<Self, SimError> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| SimError::Config {
            path: String::new(),
            message: e.to_string(),
            line: Some(e.line()),
        })?;
        cfg.validate().map_err(|e| match e {
            SimError::Config { path, message, .. } => {
                let line = locate_key(text, &path);
                SimError::Config { path, message, line }
            }
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }
}

/// Line (1-based) where the dotted `path` is defined: the first occurrence of
/// its last key after the line of its parent key.
fn locate_key(text: &str, path: &str) -> Option<usize> {
    if path.is_empty() {
        return None;
    }
    let mut from = 0usize;
    let mut found = None;
    for part in path.split('.') {
        let needle = format!("\"{part}\"");
        let lines: Vec<&str> = text.lines().collect();
        let idx = lines[from..].iter().position(|l| l.contains(&needle))?;
        from += idx;
        found = Some(from + 1);
    }
    found
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linksim::presets;

    #[test]
    fn presets_validate() {
        for p in [
            Protocol::Conditional,
            Protocol::FringeScan,
            Protocol::Unconditional,
            Protocol::Transparency,
        ] {
            presets::calibrated(p).validate().unwrap();
        }
    }

    #[test]
    fn json_round_trip() {
        let cfg = presets::calibrated(Protocol::FringeScan);
        let text = cfg.to_json_pretty();
        assert_eq!(ScenarioConfig::from_json_str(&text).unwrap(), cfg);
    }

    #[test]
    fn semantic_error_reports_line() {
        let mut cfg = presets::calibrated(Protocol::Conditional);
        cfg.schedule.t_meas = -1.0;
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let expected = text.lines().position(|l| l.contains("\"t_meas\"")).unwrap() + 1;
        match ScenarioConfig::from_json_str(&text) {
            Err(SimError::Config { path, line, .. }) => {
                assert_eq!(path, "schedule.t_meas");
                assert_eq!(line, Some(expected));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_error_reports_line() {
        match ScenarioConfig::from_json_str("{\n  \"schema_version\": 1,\n  oops\n}") {
            Err(SimError::Config { line, .. }) => assert_eq!(line, Some(3)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_fields_rejected() {
        let cfg = presets::calibrated(Protocol::Conditional);
        let mut v = serde_json::to_value(&cfg).unwrap();
        v["schedule"]["t_mesa"] = serde_json::json!(1.0);
        assert!(ScenarioConfig::from_json_str(&v.to_string()).is_err());
    }

    #[test]
    fn protocol_detection_combinations() {
        let mut cfg = presets::calibrated(Protocol::FringeScan);
        cfg.detection = Some(Detection::Direct);
        assert!(cfg.validate().is_err());
        let mut cfg = presets::calibrated(Protocol::FringeScan);
        cfg.phase_setpoints.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = presets::calibrated(Protocol::Unconditional);
        cfg.schedule.open_window = 5e-6;
        assert!(cfg.validate().is_err());
        let cfg = presets::calibrated(Protocol::Conditional);
        assert!(cfg.with_dead_time(10e-6).is_err());
        assert!(cfg.with_dead_time(25e-6).is_ok());
    }
}
