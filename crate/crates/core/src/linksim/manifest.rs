use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{Protocol, ScenarioConfig};

/// Provenance of a simulated run, written next to the detection streams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_digest: String,
    pub seed: u64,
    pub tool_version: String,
    pub protocol: Protocol,
    /// Simulated seconds.
    pub duration: f64,
    pub counts_per_channel: BTreeMap<String, u64>,
    /// Seconds spent generating the run.
    pub wall_time: f64,
}

impl RunManifest {
    pub fn new(cfg: &ScenarioConfig, counts: BTreeMap<String, u64>, wall_time: f64) -> Self {
        Self {
            config_digest: config_digest(cfg),
            seed: cfg.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            protocol: cfg.protocol,
            duration: cfg.duration,
            counts_per_channel: counts,
            wall_time,
        }
    }

    pub fn with_tool_version(mut self, version: impl Into<String>) -> Self {
        self.tool_version = version.into();
        self
    }
}

/// SHA-256 of the configuration serialised with sorted keys, so equal
/// configurations hash equally regardless of field order in the source file.
pub fn config_digest(cfg: &ScenarioConfig) -> String {
    let value = serde_json::to_value(cfg).expect("config serialises");
    let canonical = serde_json::to_string(&value).expect("value serialises");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linksim::presets;

    #[test]
    fn digest_ignores_key_order() {
        let cfg = presets::calibrated(Protocol::Conditional);
        let text = cfg.to_json_pretty();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        let obj = value.as_object().unwrap();
        // rebuild the document with reversed key order by hand
        let reversed = format!(
            "{{{}}}",
            obj.iter()
                .rev()
                .map(|(k, v)| format!("\"{k}\":{v}"))
                .collect::<Vec<_>>()
                .join(",")
        );
        assert_ne!(reversed, serde_json::to_string(&value).unwrap());
        let back = ScenarioConfig::from_json_str(&reversed).unwrap();
        assert_eq!(config_digest(&back), config_digest(&cfg));
        assert_eq!(config_digest(&cfg).len(), 64);
        assert_ne!(config_digest(&cfg.with_seed(9)), config_digest(&cfg));
    }
}
