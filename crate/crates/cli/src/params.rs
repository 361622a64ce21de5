use std::collections::BTreeMap;

use crate::error::{CliError, Result};

/// `key=value` arguments; bare values fill the declared names in order.
#[derive(Debug, Clone, Default)]
pub struct Params {
    values: BTreeMap<String, f64>,
}

impl Params {
    pub fn parse(args: &[String], names: &[&str]) -> Result<Self> {
        let mut values = BTreeMap::new();
        let mut next = 0usize;
        for arg in args {
            let (key, text) = match arg.split_once('=') {
                Some((k, v)) => (k.trim().to_string(), v.trim()),
                None => {
                    let key = names.get(next).ok_or_else(|| {
                        CliError::Usage(format!("unexpected extra value {arg:?}"))
                    })?;
                    next += 1;
                    (key.to_string(), arg.as_str())
                }
            };
            if !names.contains(&key.as_str()) {
                return Err(CliError::Usage(format!(
                    "unknown parameter {key:?}, expected one of: {}",
                    names.join(", ")
                )));
            }
            let v: f64 = text
                .parse()
                .map_err(|_| CliError::Usage(format!("{key}: cannot parse {text:?} as a number")))?;
            values.insert(key, v);
        }
        Ok(Self { values })
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }

    pub fn or(&self, name: &str, default: f64) -> f64 {
        self.get(name).unwrap_or(default)
    }

    /// All of `names`, or an error listing every one that is missing.
    pub fn require<const N: usize>(&self, names: [&str; N]) -> Result<[f64; N]> {
        let missing: Vec<String> = names
            .iter()
            .filter(|n| !self.values.contains_key(**n))
            .map(|n| n.to_string())
            .collect();
        if !missing.is_empty() {
            return Err(CliError::MissingParams(missing));
        }
        Ok(names.map(|n| self.values[n]))
    }
}
