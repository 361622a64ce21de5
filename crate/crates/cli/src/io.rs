use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use qlink_core::linksim::{analysis_layout, presets, Protocol, RunManifest, ScenarioConfig};
use qlink_core::tsanalysis::record::{merge_streams, read_records, RecordWriter};
use qlink_core::tsanalysis::{Channel, DetectionRecord, RunAnalysis, WindowSpec};

use crate::error::{CliError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.json";

pub fn tool_version() -> &'static str {
    env!("QLINK_GIT_DESCRIBE")
}

pub fn event_file(dir: &Path, ch: Channel) -> PathBuf {
    dir.join(format!("{ch}.csv"))
}

/// Reads a config document, or the built-in calibration for `mode` when no
/// path is given.
pub fn load_config(path: Option<&Path>, mode: Option<Protocol>) -> Result<ScenarioConfig> {
    let Some(path) = path else {
        return Ok(presets::calibrated(mode.unwrap_or(Protocol::Conditional)));
    };
    let text = std::fs::read_to_string(path).map_err(|source| CliError::ReadConfig {
        path: path.into(),
        source,
    })?;
    let bad = |source| CliError::Config {
        path: path.display().to_string(),
        source,
    };
    let mut cfg = ScenarioConfig::from_json_str(&text).map_err(bad)?;
    if let Some(m) = mode {
        cfg.protocol = m;
        cfg.validate().map_err(bad)?;
    }
    Ok(cfg)
}

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serialisable");
    text.push('\n');
    std::fs::write(path, text).map_err(CliError::io(path))
}

/// One CSV writer per detector channel.
pub struct EventWriters {
    dir: PathBuf,
    writers: BTreeMap<Channel, RecordWriter<BufWriter<File>>>,
    counts: BTreeMap<Channel, u64>,
}

impl EventWriters {
    pub fn create(dir: &Path) -> Result<Self> {
        create_dir(dir)?;
        let mut writers = BTreeMap::new();
        for ch in Channel::ALL {
            let p = event_file(dir, ch);
            let f = File::create(&p).map_err(CliError::io(&p))?;
            let w = RecordWriter::new(BufWriter::new(f)).map_err(|e| CliError::Input {
                path: p.clone(),
                message: e.to_string(),
            })?;
            writers.insert(ch, w);
        }
        Ok(Self {
            dir: dir.into(),
            writers,
            counts: Channel::ALL.iter().map(|&c| (c, 0)).collect(),
        })
    }

    pub fn write(&mut self, records: &[DetectionRecord]) -> Result<()> {
        for r in records {
            let w = self.writers.get_mut(&r.channel).expect("all channels open");
            w.write(r).map_err(|e| CliError::Input {
                path: event_file(&self.dir, r.channel),
                message: e.to_string(),
            })?;
            *self.counts.get_mut(&r.channel).expect("all channels counted") += 1;
        }
        Ok(())
    }

    pub fn finish(self) -> Result<BTreeMap<String, u64>> {
        for (ch, w) in self.writers {
            w.finish().map_err(|e| CliError::Input {
                path: event_file(&self.dir, ch),
                message: e.to_string(),
            })?;
        }
        Ok(self.counts.into_iter().map(|(c, n)| (c.to_string(), n)).collect())
    }
}

/// Event files loaded for analysis.
pub struct EventSet {
    pub records: Vec<DetectionRecord>,
    pub provenance: Vec<String>,
    pub manifest: Option<RunManifest>,
    pub config: Option<ScenarioConfig>,
}

fn read_event_file(path: &Path) -> Result<Vec<DetectionRecord>> {
    let f = File::open(path).map_err(CliError::io(path))?;
    read_records(std::io::BufReader::new(f)).map_err(|e| CliError::Input {
        path: path.into(),
        message: e.to_string(),
    })
}

/// Loads event files. A directory argument stands for the four channel
/// files inside it plus its manifest and config when present. Every
/// channel must be covered, either by a file named after it or by records.
pub fn read_events(inputs: &[PathBuf]) -> Result<EventSet> {
    if inputs.is_empty() {
        return Err(CliError::Usage("no input files".into()));
    }
    let mut files = Vec::new();
    let mut manifest = None;
    let mut config = None;
    for input in inputs {
        if input.is_dir() {
            files.extend(Channel::ALL.iter().map(|&c| event_file(input, c)));
            let m = input.join(MANIFEST_FILE);
            if m.exists() {
                let text = std::fs::read_to_string(&m).map_err(CliError::io(&m))?;
                manifest = Some(serde_json::from_str(&text).map_err(|e| CliError::Input {
                    path: m.clone(),
                    message: e.to_string(),
                })?);
            }
            let c = input.join(CONFIG_FILE);
            if c.exists() {
                config = Some(load_config(Some(&c), None)?);
            }
        } else {
            files.push(input.clone());
        }
    }
    let mut covered = std::collections::BTreeSet::new();
    let mut streams = Vec::new();
    for f in &files {
        if !f.exists() {
            return Err(CliError::Input {
                path: f.clone(),
                message: "missing event file".into(),
            });
        }
        let recs = read_event_file(f)?;
        if let Some(ch) = f
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(|s| s.parse::<Channel>().ok())
        {
            covered.insert(ch);
        }
        covered.extend(recs.iter().map(|r| r.channel));
        streams.push(recs);
    }
    let missing: Vec<&str> = Channel::ALL
        .iter()
        .filter(|c| !covered.contains(c))
        .map(|c| c.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Input {
            path: files[0].clone(),
            message: format!("missing channels: {}", missing.join(", ")),
        });
    }
    Ok(EventSet {
        records: merge_streams(&streams),
        provenance: files.iter().map(|p| p.display().to_string()).collect(),
        manifest,
        config,
    })
}

/// Window widths from the command line on top of the config's.
pub fn window_spec(cfg: &ScenarioConfig, window_ns: Option<f64>, noise_ns: Option<f64>) -> Result<WindowSpec> {
    let mut spec = cfg.analysis.windows;
    if let Some(w) = window_ns {
        if !(w > 0.0 && w.is_finite()) {
            return Err(CliError::Usage(format!("--window-ns must be > 0, got {w}")));
        }
        spec.window = w * 1e-9;
    }
    if let Some(w) = noise_ns {
        if !(w > 0.0 && w.is_finite()) {
            return Err(CliError::Usage(format!("--noise-window-ns must be > 0, got {w}")));
        }
        spec.noise_window = w * 1e-9;
    }
    Ok(spec)
}

/// Accumulates an event set for analysis. The histogram layout comes from
/// `config` when given, else from the config stored next to the events.
pub fn analyse_events(events: &EventSet, config: Option<&ScenarioConfig>) -> Result<(RunAnalysis, ScenarioConfig)> {
    let cfg = config
        .or(events.config.as_ref())
        .cloned()
        .ok_or_else(|| CliError::Usage("no configuration for these events: pass --config".into()))?;
    let mut acc = RunAnalysis::new(analysis_layout(&cfg)?);
    acc.ingest(&events.records);
    let duration = events.manifest.as_ref().map_or(cfg.duration, |m| m.duration);
    acc.add_duration(duration);
    Ok((acc, cfg))
}
