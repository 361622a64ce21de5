use std::path::Path;
use std::time::Instant;

use qlink_core::linksim::{run_analysis, Protocol, RunManifest, ScenarioConfig};
use qlink_core::measure::Measured;
use qlink_core::tomography::HeraldLabel;
use qlink_core::tsanalysis::pipeline;
use qlink_core::tsanalysis::sweep::{
    dead_time_sweep, interior_maximum, mode_resolved_rates, mode_scaling, window_sweep,
};
use qlink_core::tsanalysis::{Channel, RunAnalysis, WindowSpec};
use rayon::prelude::*;

use crate::error::{CliError, Result};
use crate::io;
use crate::report::Report;
use crate::{SweepArgs, SweepKind};

/// `start:stop:step` (inclusive) or `a,b,c`.
pub fn parse_range(text: &str) -> Result<Vec<f64>> {
    let bad = |m: &str| CliError::Usage(format!("range {text:?}: {m}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
    let values = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [a, b, step] = parts[..] else {
            return Err(bad("expected start:stop:step"));
        };
        let (a, b, step) = (num(a)?, num(b)?, num(step)?);
        if !(step > 0.0) {
            return Err(bad("step must be > 0"));
        }
        let n = ((b - a) / step + 1e-9).floor();
        if n < 0.0 {
            return Err(bad("stop below start"));
        }
        (0..=n as usize).map(|i| a + i as f64 * step).collect()
    } else {
        text.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(num)
            .collect::<Result<Vec<_>>>()?
    };
    if values.is_empty() {
        return Err(bad("empty range"));
    }
    if values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(bad("values must increase"));
    }
    Ok(values)
}

fn default_range(kind: SweepKind) -> &'static str {
    match kind {
        SweepKind::Window => "40:600:40",
        SweepKind::Deadtime => "25,50,100,200",
        SweepKind::Modes => "1:15:1",
        SweepKind::Pump => "1,2,4",
    }
}

fn manifest(cfg: &ScenarioConfig, acc: &RunAnalysis, started: Instant) -> RunManifest {
    let counts = Channel::ALL
        .iter()
        .map(|&c| (c.to_string(), acc.channel_count(c)))
        .collect();
    RunManifest::new(cfg, counts, started.elapsed().as_secs_f64()).with_tool_version(io::tool_version())
}

/// Simulates straight into an accumulator, leaving the manifest in `dir`.
fn simulate(cfg: &ScenarioConfig, dir: Option<&Path>) -> Result<RunAnalysis> {
    let started = Instant::now();
    let acc = run_analysis(cfg)?;
    if let Some(d) = dir {
        io::create_dir(d)?;
        io::write_json(&d.join(io::MANIFEST_FILE), &manifest(cfg, &acc, started))?;
    }
    Ok(acc)
}

fn point_dir(out: Option<&Path>, name: &str) -> Option<std::path::PathBuf> {
    out.map(|o| o.join(name))
}

struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn row(&mut self, values: Vec<f64>) {
        self.rows.push(values.iter().map(|v| format!("{v}")).collect());
    }

    fn write(&self, path: &Path) -> Result<()> {
        let err = |e: csv::Error| CliError::Input {
            path: path.into(),
            message: e.to_string(),
        };
        let mut w = csv::Writer::from_path(path).map_err(err)?;
        w.write_record(&self.header).map_err(err)?;
        for r in &self.rows {
            w.write_record(r).map_err(err)?;
        }
        w.flush().map_err(CliError::io(path))
    }
}

fn fringe_config(a: &SweepArgs) -> Result<ScenarioConfig> {
    let base = io::load_config(a.fringe_config.as_deref(), Some(Protocol::FringeScan))?;
    let mut cfg = a.run.apply(base)?;
    if a.fringe_config.is_none() {
        cfg.feed_forward = true;
    }
    Ok(cfg)
}

pub fn run(a: &SweepArgs) -> Result<Report> {
    if a.jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let values = parse_range(a.range.as_deref().unwrap_or(default_range(a.kind)))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    let out = a.out.as_deref();
    if let Some(o) = out {
        io::create_dir(o)?;
    }
    let (report, table) = pool.install(|| match a.kind {
        SweepKind::Window => window(a, &values, out),
        SweepKind::Deadtime => dead_time(a, &values, out),
        SweepKind::Modes => modes(a, &values, out),
        SweepKind::Pump => pump(a, &values, out),
    })?;
    if let Some(o) = out {
        table.write(&o.join("sweep.csv"))?;
    }
    Ok(report)
}

fn spec_for(a: &SweepArgs, cfg: &ScenarioConfig) -> Result<WindowSpec> {
    io::window_spec(cfg, a.windows.window_ns, a.windows.noise_window_ns)
}

fn window(a: &SweepArgs, ns: &[f64], out: Option<&Path>) -> Result<(Report, Csv)> {
    let diag_cfg = a.run.resolve(Protocol::Conditional)?;
    let fringe_cfg = fringe_config(a)?;
    let spec = spec_for(a, &diag_cfg)?;
    let (d, f) = rayon::join(
        || simulate(&diag_cfg, point_dir(out, "diag").as_deref()),
        || simulate(&fringe_cfg, point_dir(out, "fringe").as_deref()),
    );
    let (d, f) = (d?, f?);
    let windows: Vec<f64> = ns.iter().map(|w| w * 1e-9).collect();
    let points = window_sweep(&d, &f, &windows, &spec, a.label)?;
    let mut t = Csv::new(&[
        "window_ns", "p10", "p10_err", "p01", "p01_err", "p11", "p11_err", "p11_direct",
        "p11_direct_err", "visibility", "visibility_err", "concurrence", "concurrence_err",
        "concurrence_signed",
    ]);
    for p in &points {
        t.row(vec![
            p.window * 1e9,
            p.p10.value,
            p.p10.stderr,
            p.p01.value,
            p.p01.stderr,
            p.p11.value,
            p.p11.stderr,
            p.p11_direct.value,
            p.p11_direct.stderr,
            p.visibility.value,
            p.visibility.stderr,
            p.concurrence.value.value,
            p.concurrence.value.stderr,
            p.concurrence.signed.value,
        ]);
    }
    let mut r = Report::new(Vec::new());
    match interior_maximum(&points) {
        Some(p) => {
            r.exact("concurrence_max_window", p.window * 1e9, "ns");
            r.measured("concurrence_max", p.concurrence.signed, "");
        }
        None => eprintln!("warning: concurrence maximum lies at an end of the window range"),
    }
    Ok((r, t))
}

fn dead_time(a: &SweepArgs, us: &[f64], out: Option<&Path>) -> Result<(Report, Csv)> {
    let diag_cfg = a.run.resolve(Protocol::Conditional)?;
    let fringe_cfg = fringe_config(a)?;
    let spec = spec_for(a, &diag_cfg)?;
    let points = us
        .par_iter()
        .enumerate()
        .map(|(i, &dt)| {
            let p = dead_time_sweep(&diag_cfg, &fringe_cfg, &[dt * 1e-6], &spec, a.label)?.remove(0);
            if let Some(dir) = point_dir(out, &format!("point_{i:03}")) {
                io::create_dir(&dir)?;
                io::write_json(&dir.join("point.json"), &p)?;
            }
            Ok(p)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Csv::new(&[
        "dead_time_us", "heralding_rate", "heralding_rate_err", "concurrence", "concurrence_err",
        "concurrence_signed",
    ]);
    let mut r = Report::new(Vec::new());
    for p in &points {
        t.row(vec![
            p.dead_time * 1e6,
            p.heralding_rate.value,
            p.heralding_rate.stderr,
            p.concurrence.value.value,
            p.concurrence.value.stderr,
            p.concurrence.signed.value,
        ]);
        let tag = format!("{}us", p.dead_time * 1e6);
        r.measured(format!("heralding_rate_{tag}"), p.heralding_rate, "cps");
        r.measured(format!("concurrence_{tag}"), p.concurrence.signed, "");
    }
    let flips = points
        .windows(2)
        .filter(|w| (w[0].concurrence.signed.value > 0.0) != (w[1].concurrence.signed.value > 0.0))
        .count();
    r.exact("concurrence_sign_changes", flips as f64, "counts");
    Ok((r, t))
}

fn modes(a: &SweepArgs, ns: &[f64], out: Option<&Path>) -> Result<(Report, Csv)> {
    let cfg = a.run.resolve(Protocol::Unconditional)?;
    let spec = spec_for(a, &cfg)?;
    let acc = simulate(&cfg, point_dir(out, "run").as_deref())?;
    let counts: Vec<i32> = ns
        .iter()
        .map(|&n| {
            if n.fract() != 0.0 {
                Err(CliError::Usage(format!("mode count {n} is not an integer")))
            } else {
                Ok(n as i32)
            }
        })
        .collect::<Result<_>>()?;
    let rates = counts
        .par_iter()
        .map(|&n| mode_resolved_rates(&acc, n, &spec))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mut t = Csv::new(&[
        "n_modes", "rate_i1", "rate_i1_err", "rate_i2", "rate_i2_err", "visibility_i1",
        "visibility_i1_err", "visibility_i2", "visibility_i2_err",
    ]);
    let nan = Measured::new(f64::NAN, f64::NAN);
    for m in &rates {
        let v1 = m.visibility_i1.unwrap_or(nan);
        let v2 = m.visibility_i2.unwrap_or(nan);
        t.row(vec![
            m.n_modes as f64,
            m.rate_i1.value,
            m.rate_i1.stderr,
            m.rate_i2.value,
            m.rate_i2.stderr,
            v1.value,
            v1.stderr,
            v2.value,
            v2.stderr,
        ]);
    }
    let mut r = Report::new(Vec::new());
    let fit = mode_scaling(&rates)?;
    r.measured("slope", fit.slope, "cps/mode");
    r.measured("intercept", fit.intercept, "cps");
    r.exact("r_squared", fit.r_squared, "");
    let last = rates.last().expect("range is non-empty");
    r.measured("rate_i1_max_modes", last.rate_i1, "cps");
    r.measured("rate_i2_max_modes", last.rate_i2, "cps");
    Ok((r, t))
}

fn pump(a: &SweepArgs, factors: &[f64], out: Option<&Path>) -> Result<(Report, Csv)> {
    let base = a.run.resolve(Protocol::Transparency)?;
    let spec = spec_for(a, &base)?;
    let points = factors
        .par_iter()
        .enumerate()
        .map(|(i, &k)| {
            let cfg = base.with_pump_factor(k)?;
            let acc = simulate(&cfg, point_dir(out, &format!("point_{i:03}")).as_deref())?;
            let d = pipeline::diagonal(&acc, &spec, HeraldLabel::Combined)?;
            Ok((k, d))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Csv::new(&[
        "pump_factor", "p11_direct", "p11_direct_err", "p11_estimate", "p11_estimate_err",
        "sigma_distance", "p10", "p01",
    ]);
    let mut r = Report::new(Vec::new());
    for (k, d) in &points {
        let diff = d.p11_direct.value - d.p11_estimate.value;
        let sigma = d.p11_direct.stderr.hypot(d.p11_estimate.stderr);
        let dist = if sigma > 0.0 { diff / sigma } else { f64::NAN };
        t.row(vec![
            *k,
            d.p11_direct.value,
            d.p11_direct.stderr,
            d.p11_estimate.value,
            d.p11_estimate.stderr,
            dist,
            d.p10.p_raw.value,
            d.p01.p_raw.value,
        ]);
        r.measured(format!("p11_direct_x{k}"), d.p11_direct, "probability");
        r.measured(format!("p11_estimate_x{k}"), d.p11_estimate, "probability");
    }
    Ok((r, t))
}
