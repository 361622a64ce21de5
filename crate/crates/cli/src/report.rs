use std::collections::BTreeMap;
use std::path::Path;

use qlink_core::Measured;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub value: f64,
    pub stderr: f64,
    pub unit: String,
    /// Input files the value was derived from.
    #[serde(default)]
    pub provenance: Vec<String>,
}

/// Named metrics, serialised with sorted keys so reruns are byte-identical.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Report {
    pub metrics: BTreeMap<String, Metric>,
    #[serde(skip)]
    provenance: Vec<String>,
}

impl Report {
    pub fn new(provenance: Vec<String>) -> Self {
        Self {
            metrics: BTreeMap::new(),
            provenance,
        }
    }

    pub fn measured(&mut self, name: impl Into<String>, m: Measured, unit: &str) {
        self.metrics.insert(
            name.into(),
            Metric {
                value: m.value,
                stderr: m.stderr,
                unit: unit.to_string(),
                provenance: self.provenance.clone(),
            },
        );
    }

    pub fn exact(&mut self, name: impl Into<String>, value: f64, unit: &str) {
        self.measured(name, Measured::exact(value), unit);
    }

    #[cfg(test)]
    pub fn get(&self, name: &str) -> Option<&Metric> {
        self.metrics.get(name)
    }

    pub fn to_json(&self) -> String {
        // NaN and infinities are not JSON; they become null
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(CliError::io(path))
    }

    #[cfg(test)]
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        serde_json::from_str(&text).map_err(|e| CliError::Input {
            path: path.into(),
            message: e.to_string(),
        })
    }
}
