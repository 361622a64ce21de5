use std::path::Path;
use std::time::Instant;

use qlink_core::linksim::{simulate, RunManifest, ScenarioConfig};

use crate::error::Result;
use crate::io::{self, EventWriters, CONFIG_FILE, MANIFEST_FILE};

/// Writes one event file per channel, the resolved config and the manifest.
pub fn run(cfg: &ScenarioConfig, out: &Path) -> Result<RunManifest> {
    let started = Instant::now();
    let mut writers = EventWriters::create(out)?;
    let mut failed = None;
    simulate(cfg, |chunk| {
        if let Err(e) = writers.write(chunk.records) {
            failed = Some(e);
            return Err(qlink_core::linksim::SimError::Output("event write failed".into()));
        }
        Ok(())
    })
    .or_else(|e| failed.take().map_or(Err(e.into()), Err))?;
    let counts = writers.finish()?;
    let manifest = RunManifest::new(cfg, counts, started.elapsed().as_secs_f64())
        .with_tool_version(io::tool_version());
    std::fs::write(out.join(CONFIG_FILE), cfg.to_json_pretty() + "\n")
        .map_err(crate::error::CliError::io(out.join(CONFIG_FILE)))?;
    io::write_json(&out.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}
