//! Acceptance gate. Prints one PASS/FAIL line per criterion with the
//! individual checks indented underneath, then exits non-zero if any check
//! failed that is not in the list of documented discrepancies.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qlink_core::linksim::{
    link_budget, presets, run, run_analysis, Protocol, ScenarioConfig,
};
use qlink_core::measure::Measured;
use qlink_core::models::{g2_si_model, visibility_model, ChannelModel};
use qlink_core::tomography::{
    assemble, backpropagate, concurrence, effective_fidelity, p11_estimate, p11_from_g2,
    two_photon_suppression, EfficiencyChain, HeraldLabel,
};
use qlink_core::tsanalysis::fit::power_law_exponent;
use qlink_core::tsanalysis::fringe::phase_difference;
use qlink_core::tsanalysis::histogram::{argmax_earliest, g2_at_peak};
use qlink_core::tsanalysis::pipeline::{self, curve_fit};
use qlink_core::tsanalysis::sweep::{
    dead_time_sweep, interior_maximum, mode_resolved_rates, mode_scaling, p11_window_curve,
    window_sweep,
};
use qlink_core::tsanalysis::{
    build_histogram, Channel, G2Value, HeraldSelection, HistogramLayout, RunAnalysis, WindowSpec,
};

/// Checks whose failure is an inconsistency in the source material rather
/// than in this implementation. They are still evaluated and reported.
const DOCUMENTED: &[(&str, &str)] = &[(
    "p11 estimate reduces to closed form",
    "the closed form equals 4 p_coinc p_acc while the three-term estimate gives \
     2 p_coinc p_acc + p_acc^2; they differ by 4(g-1)/(2g-1)",
)];

struct Gate {
    checks: Vec<(String, bool)>,
    unexpected: Vec<String>,
}

impl Gate {
    fn new() -> Self {
        Self {
            checks: Vec::new(),
            unexpected: Vec::new(),
        }
    }

    fn check(&mut self, name: &str, ok: bool, detail: String) {
        println!("    [{}] {name}: {detail}", if ok { "ok" } else { "FAIL" });
        self.checks.push((name.to_string(), ok));
    }

    fn band(&mut self, name: &str, value: f64, lo: f64, hi: f64) {
        self.check(name, (lo..=hi).contains(&value), format!("{value:.6e} in [{lo:.6e}, {hi:.6e}]"));
    }

    fn near(&mut self, name: &str, value: f64, target: f64, tol: f64) {
        self.check(
            name,
            (value - target).abs() <= tol,
            format!("{value:.6e} vs {target:.6e} +- {tol:.1e}"),
        );
    }

    fn info(&self, text: String) {
        println!("    [info] {text}");
    }

    fn criterion(&mut self, n: u32, title: &str) {
        let failed: Vec<&String> = self.checks.iter().filter(|c| !c.1).map(|c| &c.0).collect();
        let status = if failed.is_empty() { "PASS" } else { "FAIL" };
        println!("{status} criterion {n}: {title}");
        for f in failed {
            if !DOCUMENTED.iter().any(|(d, _)| d == f) {
                self.unexpected.push(format!("criterion {n}: {f}"));
            }
        }
        self.checks.clear();
        println!();
    }
}

fn m(v: f64, e: f64) -> Measured {
    Measured::new(v, e)
}

fn closed_form_oracles(g: &mut Gate) {
    let start = Instant::now();
    let rho = assemble(
        m(4.4e-4, 0.1e-4),
        m(5.0e-4, 0.1e-4),
        m(5.9e-8, 0.1e-8),
        m(3.0e-4, 0.1e-4),
        HeraldLabel::I1,
    )
    .unwrap();
    g.near("concurrence", concurrence(&rho).value.value, 1.14e-4, 1e-6);
    g.near("h2c", two_photon_suppression(&rho).unwrap().value, 0.268, 0.005);
    g.near("p00", rho.p00.value, 0.99906, 2e-5);
    g.near("effective fidelity", effective_fidelity(&rho).unwrap().value, 0.819, 0.005);
    g.near("g2si node A", g2_si_model(92.0, 0.20, 0.01).unwrap(), 17.25, 0.01);
    g.near("g2si node B", g2_si_model(157.0, 0.20, 0.01).unwrap(), 18.62, 0.01);
    let ch = ChannelModel {
        eta_setup: 0.1,
        eta_det: 0.71,
        idler_fiber_transmission: 0.25,
        signal_class_visibility: 0.87,
        dfg_class_visibility: 0.95,
        eta_s: 0.9,
        eta_i: 0.9,
        dark_count_rate: 0.0,
    };
    g.near("visibility model", visibility_model(&ch, 17.0).unwrap(), 0.596, 0.005);
    let chain = EfficiencyChain {
        eta_det: 0.71,
        eta_setup: 0.10,
        eta_read_a: 0.0625,
        eta_read_b: 0.0865,
    };
    let c = concurrence(&backpropagate(&rho, &chain).unwrap()).value.value;
    g.near("back-propagated concurrence", c, 3.1e-2, 0.2e-2);
    g.check("inside 3.5(6)e-2", (c - 3.5e-2).abs() <= 0.6e-2, format!("{c:.4e}"));
    let secs = start.elapsed().as_secs_f64();
    g.check("runtime", secs < 1.0, format!("{secs:.4} s"));
}

struct Runs {
    fringe_ff: RunAnalysis,
    fringe_cfg: ScenarioConfig,
    diag: RunAnalysis,
}

fn phase_gaps(acc: &RunAnalysis, spec: &WindowSpec) -> Vec<(Channel, Measured)> {
    [Channel::S1, Channel::S2]
        .into_iter()
        .map(|s| {
            let a = curve_fit(acc, spec, HeraldSelection::label(HeraldLabel::I1), s).unwrap();
            let b = curve_fit(acc, spec, HeraldSelection::label(HeraldLabel::I2), s).unwrap();
            (s, phase_difference(a.phase, b.phase))
        })
        .collect()
}

fn simulation_statistics(g: &mut Gate) -> Runs {
    let spec = WindowSpec::default();
    for (node, band) in [(0usize, (9.0, 17.0)), (1, (16.0, 28.0))] {
        let cfg = presets::single_node(Protocol::Conditional, node).with_duration(1000.0);
        let acc = run_analysis(&cfg).unwrap();
        let signal = if node == 0 { Channel::S1 } else { Channel::S2 };
        let h = acc.histogram(&HeraldSelection::all(), Some(signal));
        let est = g2_at_peak(&h, acc.pooled_peak().unwrap(), &spec).unwrap();
        let name = if node == 0 { "g2si node A" } else { "g2si node B" };
        g.check(&format!("{name} heralds"), h.n_heralds >= 100_000, format!("{}", h.n_heralds));
        match est.g2 {
            G2Value::Finite(v) => {
                g.info(format!("{name} = {v}"));
                g.band(name, v.value, band.0, band.1);
            }
            other => g.check(name, false, format!("{other:?}")),
        }
    }

    let mut fringe_cfg = presets::calibrated(Protocol::FringeScan).with_duration(300_000.0);
    fringe_cfg.feed_forward = false;
    let plain = run_analysis(&fringe_cfg).unwrap();
    fringe_cfg.feed_forward = true;
    let fringe_ff = run_analysis(&fringe_cfg).unwrap();

    let heralds = fringe_ff.herald_count(&HeraldSelection::all());
    let rate = heralds as f64 / fringe_ff.duration();
    g.band("heralding rate with feed-forward (cps)", rate, 510.0 * 0.85, 510.0 * 1.15);

    for (label, centre) in [(HeraldLabel::I1, 0.63), (HeraldLabel::I2, 0.61)] {
        let v = pipeline::visibility(&plain, &spec, label).unwrap().visibility;
        g.check(
            &format!("visibility {}", label.as_str()),
            (v.value - centre).abs() <= 0.03,
            format!("{v} in {centre} +- 0.03 ({} heralds)", plain.herald_count(&HeraldSelection::label(label))),
        );
    }
    for (s, d) in phase_gaps(&plain, &spec) {
        let off = (d.value.abs() - PI).abs();
        g.check(
            &format!("pi shift at {s}"),
            off <= 3.0 * d.stderr,
            format!("|gap| - pi = {off:.4} (sigma {:.4})", d.stderr),
        );
    }
    for (s, d) in phase_gaps(&fringe_ff, &spec) {
        g.check(
            &format!("feed-forward alignment at {s}"),
            d.value.abs() <= 3.0 * d.stderr,
            format!("gap = {:.4} (sigma {:.4})", d.value, d.stderr),
        );
    }

    let diag_cfg = presets::calibrated(Protocol::Conditional).with_duration(300_000.0);
    let diag = run_analysis(&diag_cfg).unwrap();
    Runs {
        fringe_ff,
        fringe_cfg,
        diag,
    }
}

fn scaling_laws(g: &mut Gate, runs: &Runs) -> RunAnalysis {
    let spec = WindowSpec::default();
    let cfg = presets::calibrated(Protocol::Unconditional).with_duration(20_000.0);
    let acc = run_analysis(&cfg).unwrap();
    let rates: Vec<_> = (1..=15)
        .map(|n| mode_resolved_rates(&acc, n, &spec).unwrap())
        .collect();
    let fit = mode_scaling(&rates).unwrap();
    g.band("mode sweep R^2", fit.r_squared, 0.99, 1.0);
    g.band("mode sweep slope (cps/mode)", fit.slope.value, 1.505 * 0.9, 1.505 * 1.1);
    let last = &rates[14];
    g.band("rate(15) i1 (cps)", last.rate_i1.value, 19.0, 25.0);
    g.band("rate(15) i2 (cps)", last.rate_i2.value, 19.0, 25.0);

    let windows: Vec<f64> = (1..=15).map(|k| k as f64 * 40e-9).collect();
    let points = window_sweep(&runs.diag, &runs.fringe_ff, &windows, &spec, HeraldLabel::I1).unwrap();
    for p in &points {
        g.info(format!(
            "w = {:>3.0} ns  C = {}  p11 = {}",
            p.window * 1e9,
            p.concurrence.signed,
            p.p11
        ));
    }
    match interior_maximum(&points) {
        Some(p) => g.band("C(w) interior maximum (ns)", p.window * 1e9, 200.0, 400.0),
        None => g.check("C(w) interior maximum (ns)", false, "maximum at an end of the sweep".into()),
    }
    let small: Vec<f64> = (1..=5).map(|k| k as f64 * 10e-9).collect();
    let curve = p11_window_curve(&runs.diag, &small, &spec, HeraldLabel::I1).unwrap();
    let ys: Vec<f64> = curve.iter().map(|c| c.2.value).collect();
    let k = power_law_exponent(&small, &ys).unwrap();
    g.near("p11(w) exponent near w = 0", k.value, 2.0, 0.3);

    let dts = [25e-6, 50e-6, 100e-6, 200e-6];
    let diag_cfg = presets::calibrated(Protocol::Conditional).with_duration(20_000.0);
    let fringe_cfg = runs.fringe_cfg.with_duration(20_000.0);
    let sweep = dead_time_sweep(&diag_cfg, &fringe_cfg, &dts, &spec, HeraldLabel::I1).unwrap();
    for p in &sweep {
        g.info(format!(
            "dead time {:>3.0} us  rate {}  C {}",
            p.dead_time * 1e6,
            p.heralding_rate,
            p.concurrence.signed
        ));
    }
    g.band("rate at 25 us (cps)", sweep[0].heralding_rate.value, 750.0 * 0.85, 750.0 * 1.15);
    let signs: Vec<bool> = sweep.iter().map(|p| p.concurrence.signed.value > 0.0).collect();
    g.check(
        "concurrence sign unchanged",
        signs.iter().all(|&s| s == signs[0]),
        format!("{signs:?}"),
    );
    g.check(
        "rate decreases with dead time",
        sweep.windows(2).all(|w| w[1].heralding_rate.value < w[0].heralding_rate.value),
        String::new(),
    );
    acc
}

fn model_validation(g: &mut Gate) {
    let wide = WindowSpec::default().with_window(800e-9);
    let mut high = None;
    for (k, secs) in [(1.0, 40_000.0), (2.0, 40_000.0), (4.0, 100_000.0)] {
        let cfg = presets::calibrated(Protocol::Transparency)
            .with_duration(secs)
            .with_pump_factor(k)
            .unwrap();
        let acc = run_analysis(&cfg).unwrap();
        let d = pipeline::diagonal(&acc, &wide, HeraldLabel::Combined).unwrap();
        let diff = d.p11_direct.value - d.p11_estimate.value;
        let sigma = (d.p11_direct.stderr.powi(2) + d.p11_estimate.stderr.powi(2)).sqrt();
        g.check(
            &format!("pump x{k}: direct vs estimated p11"),
            diff.abs() <= 3.0 * sigma,
            format!("{} vs {} ({:.2} sigma)", d.p11_direct, d.p11_estimate, diff / sigma),
        );
        high = Some(acc);
    }
    let acc = high.unwrap();
    let windows: Vec<f64> = (5..=16).map(|k| k as f64 * 50e-9).collect();
    let curve = p11_window_curve(&acc, &windows, &WindowSpec::default(), HeraldLabel::Combined).unwrap();
    let mut worst: f64 = 0.0;
    let mut above = 0;
    for (w, direct, est) in &curve {
        let rel = (direct.value - est.value) / est.value;
        g.info(format!("w = {:>3.0} ns  direct {direct}  estimate {est}  rel {rel:+.3}", w * 1e9));
        worst = worst.max(rel.abs());
        above += usize::from(est.value > direct.value);
    }
    g.band("max relative deviation above 200 ns", worst, 0.0, 0.20);
    g.info(format!("estimate above direct at {above} of {} windows", curve.len()));
}

fn link(g: &mut Gate) {
    let cfg = presets::calibrated(Protocol::Unconditional).with_dead_time(100e-6).unwrap();
    let b = link_budget(&cfg, 20.0, 0.2, 3.9).unwrap();
    g.info(format!("limiting factor {:?}, dead-time cap {:.0} cps", b.limiting_factor, b.dead_time_cap));
    g.near("heralding rate (cps)", b.heralding_rate, 111.0, 11.0);
    g.near("detection rate (cps)", b.detection_rate, 0.071, 0.007);
}

fn properties(g: &mut Gate, unconditional: &RunAnalysis) {
    let cfg = presets::calibrated(Protocol::FringeScan).with_duration(3.0);
    let a = run(&cfg).unwrap();
    let b = run(&cfg).unwrap();
    g.check("determinism", a.streams == b.streams, format!("{} records", a.manifest.counts_per_channel.values().sum::<u64>()));

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut trace_ok = true;
    for _ in 0..1000 {
        let p10 = rng.gen::<f64>() * 0.3;
        let p01 = rng.gen::<f64>() * 0.3;
        let p11 = rng.gen::<f64>() * 0.1;
        let d = (rng.gen::<f64>() * 2.0 - 1.0) * (p10 * p01).sqrt();
        let rho = assemble(m(p10, 0.0), m(p01, 0.0), m(p11, 0.0), m(d, 0.0), HeraldLabel::I1).unwrap();
        trace_ok &= (rho.trace() - 1.0).abs() < 1e-12;
    }
    g.check("trace normalisation", trace_ok, "1000 random states".into());

    let span = 20_000_000_000_000u64;
    let stream = |rate: f64, rng: &mut ChaCha8Rng| {
        let mut t = 0.0;
        let mut v = Vec::new();
        loop {
            t += -rng.gen::<f64>().ln() / rate;
            let ps = (t * 1e12) as u64;
            if ps >= span {
                return v;
            }
            v.push(ps);
        }
    };
    let heralds = stream(2e3, &mut rng);
    let signals = stream(5e3, &mut rng);
    let layout = HistogramLayout::centered(16.5e-6, 5e-6, 10e-9).unwrap();
    let h = build_histogram(&heralds, &signals, layout).unwrap();
    let est = g2_at_peak(&h, 500, &WindowSpec::default()).unwrap();
    let v = est.g2.finite().unwrap();
    g.check("Poisson g2 = 1", (v.value - 1.0).abs() <= 3.0 * v.stderr, format!("{v}"));

    let ties = [1u64, 4, 2, 4, 4, 0];
    let first = argmax_earliest(&ties);
    g.check(
        "argmax tie-break",
        first == Some(1) && (0..10).all(|_| argmax_earliest(&ties) == first),
        format!("{first:?}"),
    );

    let spec = WindowSpec::default();
    let rates: Vec<f64> = (0..=15)
        .map(|n| mode_resolved_rates(unconditional, n, &spec).unwrap())
        .map(|r| r.rate_i1.value + r.rate_i2.value)
        .collect();
    g.check(
        "mode-resolved rates monotone",
        rates.windows(2).all(|w| w[1] >= w[0]),
        format!("{:.2} .. {:.2} cps", rates[0], rates[15]),
    );

    let rho = assemble(m(4.4e-4, 1e-5), m(5e-4, 1e-5), m(5.9e-8, 1e-9), m(3e-4, 1e-5), HeraldLabel::I2).unwrap();
    let unit = EfficiencyChain {
        eta_det: 1.0,
        eta_setup: 1.0,
        eta_read_a: 1.0,
        eta_read_b: 1.0,
    };
    g.check("back-propagation identity", backpropagate(&rho, &unit).unwrap() == rho, String::new());

    let mut worst: f64 = 0.0;
    for &p in &[1e-5, 4.7e-4, 3e-3] {
        for &gg in &[2.0, 5.0, 17.0, 50.0] {
            let acc = p / gg;
            let coinc = p - acc;
            let est = p11_estimate(m(coinc, 0.0), m(acc, 0.0), m(coinc, 0.0), m(acc, 0.0)).value;
            let closed = p11_from_g2(p, gg).unwrap();
            worst = worst.max((est - closed).abs() / closed);
        }
    }
    g.check(
        "p11 estimate reduces to closed form",
        worst < 1e-9,
        format!("max relative difference {worst:.3}"),
    );
}

fn main() -> ExitCode {
    let mut g = Gate::new();
    let t0 = Instant::now();

    closed_form_oracles(&mut g);
    g.criterion(1, "closed-form oracle suite");

    let runs = simulation_statistics(&mut g);
    g.criterion(2, "simulation statistical suite");

    let unconditional = scaling_laws(&mut g, &runs);
    g.criterion(3, "scaling-law suite");

    model_validation(&mut g);
    g.criterion(4, "p11 model validation without storage");

    link(&mut g);
    g.criterion(5, "link budget");

    properties(&mut g, &unconditional);
    g.criterion(6, "property suites");

    println!("documented discrepancies:");
    for (name, why) in DOCUMENTED {
        println!("    {name}: {why}");
    }
    println!("total {:.1} s", t0.elapsed().as_secs_f64());
    if g.unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {:?}", g.unexpected);
        ExitCode::FAILURE
    }
}
