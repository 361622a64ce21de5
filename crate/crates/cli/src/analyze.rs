use std::fs::File;
use std::path::{Path, PathBuf};

use qlink_core::measure::Measured;
use qlink_core::tomography::{
    assemble, backpropagate, concurrence, effective_fidelity, two_photon_suppression,
    DensityMatrixElements, EfficiencyChain, HeraldLabel,
};
use qlink_core::tsanalysis::histogram::{g2_at_peak, split_at_peak};
use qlink_core::tsanalysis::pipeline::{self, fringe_points, P11Source, TomographyResult};
use qlink_core::tsanalysis::{fringe_fit, Channel, FringePoint, FringeSet, G2Value, HeraldSelection};

use crate::error::{CliError, Result};
use crate::io::{self, EventSet};
use crate::params::Params;
use crate::report::Report;
use crate::{P11Choice, TomographyArgs, WindowOptions};

fn signal_suffix(ch: Channel) -> &'static str {
    if ch == Channel::S1 {
        "a"
    } else {
        "b"
    }
}

fn load_config(path: Option<&Path>) -> Result<Option<qlink_core::linksim::ScenarioConfig>> {
    path.map(|p| io::load_config(Some(p), None)).transpose()
}

pub fn g2(
    inputs: &[PathBuf],
    config: Option<&Path>,
    windows: &WindowOptions,
    out: Option<&Path>,
) -> Result<Report> {
    let events = io::read_events(inputs)?;
    let cfg = load_config(config)?;
    let (acc, cfg) = io::analyse_events(&events, cfg.as_ref())?;
    let spec = io::window_spec(&cfg, windows.window_ns, windows.noise_window_ns)?;
    let peak = acc.pooled_peak().ok_or(qlink_core::tsanalysis::AnalysisError::EmptyHistogram)?;

    let mut r = Report::new(events.provenance.clone());
    let all = HeraldSelection::all();
    let n = acc.herald_count(&all);
    let t = acc.duration();
    r.exact("heralds_i1", acc.herald_count(&HeraldSelection::label(HeraldLabel::I1)) as f64, "counts");
    r.exact("heralds_i2", acc.herald_count(&HeraldSelection::label(HeraldLabel::I2)) as f64, "counts");
    if t > 0.0 {
        r.measured("heralding_rate", Measured::new(n as f64 / t, (n as f64).sqrt() / t), "cps");
    }
    r.exact("peak_delay", acc.layout().bin_center(peak) * 1e9, "ns");
    r.exact("window", spec.window * 1e9, "ns");

    let mut hists = Vec::new();
    for ch in [Channel::S1, Channel::S2] {
        let h = acc.histogram(&all, Some(ch));
        let x = signal_suffix(ch);
        match g2_at_peak(&h, peak, &spec)?.g2 {
            G2Value::Finite(g) => r.measured(format!("g2si_{x}"), g, ""),
            other => eprintln!("warning: g2si_{x} is {other:?}, left out of the report"),
        }
        let split = split_at_peak(&h, peak, &spec)?;
        r.measured(format!("p_raw_{x}"), split.p_raw, "probability");
        r.measured(format!("p_coinc_{x}"), split.p_coinc, "probability");
        r.measured(format!("p_acc_{x}"), split.p_acc, "probability");
        hists.push(h);
    }
    if let Some(dir) = out {
        io::create_dir(dir)?;
        let p = dir.join("histogram.csv");
        let mut w = csv::Writer::from_path(&p).map_err(|e| csv_err(&p, e))?;
        w.write_record(["delay_ns", "s1", "s2"]).map_err(|e| csv_err(&p, e))?;
        for (i, (a, b)) in hists[0].counts.iter().zip(&hists[1].counts).enumerate() {
            let d = acc.layout().bin_center(i) * 1e9;
            w.write_record([format!("{d}"), a.to_string(), b.to_string()])
                .map_err(|e| csv_err(&p, e))?;
        }
        w.flush().map_err(CliError::io(&p))?;
    }
    Ok(r)
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    CliError::Input {
        path: path.into(),
        message: e.to_string(),
    }
}

pub fn write_fringe_points(path: &Path, points: &[FringePoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for p in points {
        w.serialize(p).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(CliError::io(path))
}

pub fn read_fringe_points(path: &Path) -> Result<Vec<FringePoint>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    rdr.deserialize()
        .map(|row| row.map_err(|e| csv_err(path, e)))
        .collect()
}

fn is_fringe_file(path: &Path) -> bool {
    if path.is_dir() {
        return false;
    }
    File::open(path)
        .ok()
        .and_then(|f| csv::Reader::from_reader(f).headers().ok().cloned())
        .is_some_and(|h| h.get(0) == Some("phase"))
}

pub fn fringes(
    inputs: &[PathBuf],
    config: Option<&Path>,
    windows: &WindowOptions,
    out: Option<&Path>,
) -> Result<Report> {
    let (set, provenance) = if inputs.len() == 1 && is_fringe_file(&inputs[0]) {
        let pts = read_fringe_points(&inputs[0])?;
        (FringeSet::new(pts)?, vec![inputs[0].display().to_string()])
    } else {
        let events = io::read_events(inputs)?;
        let cfg = load_config(config)?;
        let (acc, cfg) = io::analyse_events(&events, cfg.as_ref())?;
        let spec = io::window_spec(&cfg, windows.window_ns, windows.noise_window_ns)?;
        let set = fringe_points(&acc, &spec, &[HeraldLabel::I1, HeraldLabel::I2])?;
        (set, events.provenance)
    };
    let fits = fringe_fit(&set)?;
    let mut r = Report::new(provenance);
    for ((label, signal), f) in &fits {
        let key = format!("{}_{}", label.as_str(), signal.as_str().to_ascii_lowercase());
        r.measured(format!("visibility_{key}"), f.visibility, "");
        r.measured(format!("phase_{key}"), f.phase, "rad");
        r.exact(format!("chi2_{key}"), f.chi2, "");
    }
    for label in [HeraldLabel::I1, HeraldLabel::I2, HeraldLabel::Combined] {
        if let Some(v) = qlink_core::tsanalysis::fringe::herald_visibility(&fits, label) {
            r.measured(format!("visibility_{}", label.as_str()), v, "");
        }
    }
    if let Some(dir) = out {
        io::create_dir(dir)?;
        write_fringe_points(&dir.join("fringes.csv"), set.points())?;
    }
    Ok(r)
}

const ELEMENT_PARAMS: [&str; 12] = [
    "p10", "p01", "p11", "d", "p10_err", "p01_err", "p11_err", "d_err", "eta_det", "eta_setup",
    "eta_read_a", "eta_read_b",
];

fn report_elements(r: &mut Report, rho: &DensityMatrixElements, suffix: &str) {
    r.measured(format!("p00{suffix}"), rho.p00, "probability");
    r.measured(format!("p10{suffix}"), rho.p10, "probability");
    r.measured(format!("p01{suffix}"), rho.p01, "probability");
    r.measured(format!("p11{suffix}"), rho.p11, "probability");
    r.measured(format!("d{suffix}"), rho.d, "probability");
    let c = concurrence(rho);
    r.measured(format!("concurrence{suffix}"), c.value, "");
    r.measured(format!("concurrence_signed{suffix}"), c.signed, "");
    if let Ok(h) = two_photon_suppression(rho) {
        r.measured(format!("h2c{suffix}"), h, "");
    }
    if let Ok(f) = effective_fidelity(rho) {
        r.measured(format!("effective_fidelity{suffix}"), f, "");
    }
}

fn report_run(r: &mut Report, t: &TomographyResult) {
    report_elements(r, &t.elements, "");
    r.measured("visibility", t.visibility, "");
    r.measured("p11_direct", t.diagonal.p11_direct, "probability");
    r.measured("p11_estimate", t.diagonal.p11_estimate, "probability");
    r.exact("heralds", t.diagonal.n_heralds as f64, "counts");
}

pub fn tomography(a: &TomographyArgs) -> Result<Report> {
    let p = Params::parse(&a.params, &ELEMENT_PARAMS)?;
    let chain_names = ["eta_det", "eta_setup", "eta_read_a", "eta_read_b"];
    let chain = if chain_names.iter().any(|n| p.get(n).is_some()) {
        let [eta_det, eta_setup, eta_read_a, eta_read_b] = p.require(chain_names)?;
        Some(EfficiencyChain {
            eta_det,
            eta_setup,
            eta_read_a,
            eta_read_b,
        })
    } else {
        None
    };
    let (mut r, rho) = if a.diag.is_empty() {
        if !a.fringe.is_empty() {
            return Err(CliError::Usage("--fringe needs --diag".into()));
        }
        let [p10, p01, p11, d] = p.require(["p10", "p01", "p11", "d"])?;
        let m = |v: f64, k: &str| Measured::new(v, p.or(k, 0.0));
        let rho = assemble(
            m(p10, "p10_err"),
            m(p01, "p01_err"),
            m(p11, "p11_err"),
            m(d, "d_err"),
            a.label,
        )?;
        let mut r = Report::new(Vec::new());
        report_elements(&mut r, &rho, "");
        (r, rho)
    } else {
        let cfg = load_config(a.config.as_deref())?;
        let diag: EventSet = io::read_events(&a.diag)?;
        let fringe: EventSet = io::read_events(&a.fringe)?;
        let (dacc, dcfg) = io::analyse_events(&diag, cfg.as_ref())?;
        let (facc, _) = io::analyse_events(&fringe, cfg.as_ref())?;
        let spec = io::window_spec(&dcfg, a.windows.window_ns, a.windows.noise_window_ns)?;
        let source = match a.p11 {
            P11Choice::Estimate => P11Source::Estimate,
            P11Choice::Direct => P11Source::Direct,
        };
        let t = pipeline::tomography(&dacc, &facc, &spec, a.label, source)?;
        let mut prov = diag.provenance;
        prov.extend(fringe.provenance);
        let mut r = Report::new(prov);
        report_run(&mut r, &t);
        (r, t.elements)
    };
    if let Some(chain) = chain {
        let back = backpropagate(&rho, &chain)?;
        report_elements(&mut r, &back, "_backpropagated");
    }
    Ok(r)
}
