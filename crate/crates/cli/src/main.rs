//! `qlink`: simulate heralded entanglement runs, analyse detection streams,
//! sweep parameters and evaluate the closed-form models.

mod analyze;
mod error;
mod io;
mod model;
mod params;
mod report;
mod simulate;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qlink_core::linksim::{presets, Protocol, ScenarioConfig};
use qlink_core::tomography::HeraldLabel;

use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "qlink", version = env!("QLINK_GIT_DESCRIBE"), about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a run and write one event file per detector plus a manifest.
    Simulate(SimulateArgs),
    /// Analyse event files.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Rerun simulation and analysis over a parameter range.
    Sweep(SweepArgs),
    /// Evaluate a closed-form model from key=value parameters.
    Model(ModelArgs),
    /// Print the built-in configuration for a protocol.
    Config(ConfigArgs),
}

fn parse_protocol(s: &str) -> std::result::Result<Protocol, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
        .map_err(|_| format!("unknown protocol {s:?} (conditional, unconditional, fringe_scan, transparency)"))
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Node {
    A,
    B,
}

impl Node {
    fn index(self) -> usize {
        match self {
            Node::A => 0,
            Node::B => 1,
        }
    }
}

#[derive(Debug, Args)]
struct RunOptions {
    /// Scenario config (JSON). Defaults to the built-in calibration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, env = "QLINK_SEED")]
    seed: Option<u64>,
    /// Simulated seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Protocol: conditional, unconditional, fringe_scan or transparency.
    #[arg(long, value_parser = parse_protocol)]
    mode: Option<Protocol>,
}

impl RunOptions {
    fn resolve(&self, default_mode: Protocol) -> Result<ScenarioConfig> {
        let mode = self.mode.or(self.config.is_none().then_some(default_mode));
        let cfg = io::load_config(self.config.as_deref(), mode)?;
        self.apply(cfg)
    }

    fn apply(&self, mut cfg: ScenarioConfig) -> Result<ScenarioConfig> {
        if let Some(s) = self.seed {
            cfg = cfg.with_seed(s);
        }
        if let Some(d) = self.duration {
            cfg = cfg.with_duration(d);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct WindowOptions {
    /// Detection window width, ns.
    #[arg(long)]
    window_ns: Option<f64>,
    /// Width of each noise window, ns.
    #[arg(long)]
    noise_window_ns: Option<f64>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    run: RunOptions,
    /// Built-in calibration with only this node's source active.
    #[arg(long, value_enum, conflicts_with = "config")]
    node: Option<Node>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum AnalyzeCommand {
    /// Cross-correlation and in-window click probabilities per signal detector.
    G2(AnalyzeArgs),
    /// Density-matrix elements and entanglement metrics.
    Tomography(TomographyArgs),
    /// Fringe fits per herald and signal detector.
    Fringes(AnalyzeArgs),
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Event directories or files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Config for the histogram layout; defaults to the one next to the events.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    windows: WindowOptions,
    /// Output directory for the report and CSV curves.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum P11Choice {
    Estimate,
    Direct,
}

#[derive(Debug, Args)]
struct TomographyArgs {
    /// Populations run (signal detectors read the memories separately).
    #[arg(long, num_args = 1.., requires = "fringe")]
    diag: Vec<PathBuf>,
    /// Fringe-scan run.
    #[arg(long, num_args = 1..)]
    fringe: Vec<PathBuf>,
    #[arg(long, default_value = "i1")]
    label: HeraldLabel,
    #[arg(long, value_enum, default_value = "estimate")]
    p11: P11Choice,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    windows: WindowOptions,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Element values instead of event files: p10, p01, p11, d with optional
    /// *_err, plus eta_det, eta_setup, eta_read_a, eta_read_b to back-propagate.
    params: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepKind {
    Window,
    Deadtime,
    Modes,
    Pump,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(value_enum)]
    kind: SweepKind,
    #[command(flatten)]
    run: RunOptions,
    /// Fringe-scan config for window and dead-time sweeps.
    #[arg(long)]
    fringe_config: Option<PathBuf>,
    /// `start:stop:step` or a comma list. Units: ns (window), us (deadtime),
    /// modes, pump factor.
    #[arg(long)]
    range: Option<String>,
    #[arg(long, default_value = "i1")]
    label: HeraldLabel,
    #[command(flatten)]
    windows: WindowOptions,
    /// Sweep points run concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelKind {
    G2si,
    Visibility,
    Threshold,
    Pumpfactor,
    Linkbudget,
    Efficiency,
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(value_enum)]
    which: ModelKind,
    /// `name=value` pairs, or bare values in the model's parameter order.
    #[arg(allow_negative_numbers = true)]
    params: Vec<String>,
    /// Base config for the link budget.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    #[arg(long, value_parser = parse_protocol, default_value = "conditional")]
    mode: Protocol,
    #[arg(long, value_enum)]
    node: Option<Node>,
}

fn print_report(r: &report::Report, out: Option<&std::path::Path>) -> Result<()> {
    if let Some(dir) = out {
        io::create_dir(dir)?;
        r.write(&dir.join("report.json"))?;
    }
    print!("{}", r.to_json());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => {
            let cfg = match a.node {
                Some(n) => a.run.apply(presets::single_node(a.run.mode.unwrap_or(Protocol::Conditional), n.index()))?,
                None => a.run.resolve(Protocol::Conditional)?,
            };
            let m = simulate::run(&cfg, &a.out)?;
            println!("{}", serde_json::to_string_pretty(&m).expect("manifest serialises"));
            Ok(())
        }
        Command::Analyze(AnalyzeCommand::G2(a)) => {
            let r = analyze::g2(&a.inputs, a.config.as_deref(), &a.windows, a.out.as_deref())?;
            print_report(&r, a.out.as_deref())
        }
        Command::Analyze(AnalyzeCommand::Fringes(a)) => {
            let r = analyze::fringes(&a.inputs, a.config.as_deref(), &a.windows, a.out.as_deref())?;
            print_report(&r, a.out.as_deref())
        }
        Command::Analyze(AnalyzeCommand::Tomography(a)) => {
            let r = analyze::tomography(&a)?;
            print_report(&r, a.out.as_deref())
        }
        Command::Sweep(a) => {
            let r = sweep::run(&a)?;
            print_report(&r, a.out.as_deref())
        }
        Command::Model(a) => {
            let r = model::run(a.which, &a.params, a.config.as_deref())?;
            if let Some(dir) = a.out.as_deref() {
                io::create_dir(dir)?;
                r.write(&dir.join("report.json"))?;
            }
            Ok(())
        }
        Command::Config(a) => {
            let cfg = match a.node {
                Some(n) => presets::single_node(a.mode, n.index()),
                None => presets::calibrated(a.mode),
            };
            println!("{}", cfg.to_json_pretty());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

