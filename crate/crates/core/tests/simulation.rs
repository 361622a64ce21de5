use qlink_core::linksim::{
    analysis_layout, calibrate_noise, echo_capture, node_rates, presets, run, run_analysis,
    Protocol, ScenarioConfig,
};
use qlink_core::tomography::HeraldLabel;
use qlink_core::tsanalysis::fringe::phase_difference;
use qlink_core::tsanalysis::histogram::{g2_at_peak, split_at_peak};
use qlink_core::tsanalysis::pipeline::curve_fit;
use qlink_core::tsanalysis::{Channel, HeraldSelection, WindowSpec};

fn ps(s: f64) -> u64 {
    (s * 1e12).round() as u64
}

#[test]
fn no_sources_and_no_darks_give_empty_streams() {
    let mut cfg = presets::calibrated(Protocol::Conditional).with_duration(5.0);
    cfg.source_a.mu = 0.0;
    cfg.source_b.mu = 0.0;
    cfg.channel.dark_count_rate = 0.0;
    let out = run(&cfg).unwrap();
    assert!(out.streams.values().all(|v| v.is_empty()));
}

#[test]
fn echoes_stay_inside_their_mode() {
    // near noiseless storage so every signal click is an echo
    let mut cfg = presets::calibrated(Protocol::Conditional).with_duration(200.0);
    cfg.channel.dark_count_rate = 0.0;
    for s in [&mut cfg.source_a, &mut cfg.source_b] {
        s.a_coeff = 1e-9;
        s.mu1 = 1e-12;
    }
    let noise = calibrate_noise(&cfg).unwrap();
    assert!(noise.iter().all(|n| n.background_rate < 1e-3));
    let out = run(&cfg).unwrap();
    let mut heralds: Vec<u64> = out.streams[&Channel::I1]
        .iter()
        .chain(&out.streams[&Channel::I2])
        .map(|r| r.time_ps)
        .collect();
    heralds.sort_unstable();
    let delay = ps(cfg.readout_delay());
    let half = ps(cfg.mode_duration() / 2.0);
    let signals: Vec<u64> = out.streams[&Channel::S1]
        .iter()
        .chain(&out.streams[&Channel::S2])
        .map(|r| r.time_ps)
        .collect();
    assert!(signals.len() > 50);
    for t in signals {
        let i = heralds.partition_point(|&h| h + delay <= t + half);
        assert!(i > 0);
        let h = heralds[i - 1];
        assert!(t + half >= h + delay && t <= h + delay + half, "signal {t} herald {h}");
    }
}

#[test]
fn unconditional_heralds_inside_open_window() {
    let cfg = presets::calibrated(Protocol::Unconditional).with_duration(10.0);
    let out = run(&cfg).unwrap();
    let cycle = ps(cfg.schedule.spdc_cycle);
    let open = ps(cfg.schedule.open_window);
    for r in out.streams[&Channel::I1].iter().chain(&out.streams[&Channel::I2]) {
        assert!(r.time_ps % cycle < open);
        assert_eq!(r.mode as u64, (r.time_ps % cycle) / ps(cfg.mode_duration()));
    }
}

#[test]
fn herald_detectors_are_balanced() {
    let cfg = presets::calibrated(Protocol::Conditional).with_duration(400.0);
    let out = run(&cfg).unwrap();
    let n1 = out.streams[&Channel::I1].len() as f64;
    let n2 = out.streams[&Channel::I2].len() as f64;
    let n = n1 + n2;
    let sigma = (n * 0.25).sqrt();
    assert!((n1 - n / 2.0).abs() < 3.0 * sigma, "{n1} vs {n2}");
}

#[test]
fn echo_peak_at_storage_time() {
    let cfg = presets::calibrated(Protocol::Conditional).with_duration(400.0);
    let acc = run_analysis(&cfg).unwrap();
    let peak = acc.pooled_peak().unwrap();
    let centre = analysis_layout(&cfg).unwrap().bin_center(peak);
    assert!((centre - 16.5e-6).abs() < 50e-9, "{centre}");
}

fn single_node_check(node: usize) {
    let cfg: ScenarioConfig =
        presets::single_node(Protocol::Conditional, node).with_duration(if node == 0 { 4000.0 } else { 3500.0 });
    let acc = run_analysis(&cfg).unwrap();
    let spec = cfg.analysis.windows;
    let sel = HeraldSelection::all();
    let signal = if node == 0 { Channel::S1 } else { Channel::S2 };
    let h = acc.histogram(&sel, Some(signal));
    assert!(h.n_heralds >= 1_000_000, "{}", h.n_heralds);
    let peak = acc.pooled_peak().unwrap();

    // cross-correlation against the calibrated prediction
    let noise = calibrate_noise(&cfg).unwrap()[node];
    let g = g2_at_peak(&h, peak, &spec).unwrap().g2.finite().unwrap();
    let predicted = noise.predicted_g2.unwrap();
    assert!(g.sigma_distance(predicted) < 3.0, "g2 {g} vs {predicted}");

    // in-window click probability against the chained closed form
    let rates = node_rates(&cfg).unwrap()[node];
    let dark = cfg.channel.dark_count_rate;
    let real = rates.idler_rate / (rates.idler_rate + 2.0 * dark);
    let w = spec.window;
    let capture = echo_capture(cfg.echo_profile.sigma, cfg.mode_duration(), w);
    let extra = [&cfg.source_a, &cfg.source_b][node].mu * rates.stored_transmission;
    let expected = real * rates.stored_transmission * capture + extra + (noise.background_rate + dark) * w;
    let split = split_at_peak(&h, peak, &spec).unwrap();
    assert!(
        split.p_raw.sigma_distance(expected) < 3.0,
        "p10 {} vs {expected}",
        split.p_raw
    );
}

#[test]
fn single_node_a_matches_closed_form() {
    single_node_check(0);
}

#[test]
fn single_node_b_matches_closed_form() {
    single_node_check(1);
}

fn fringe_phase_gap(feed_forward: bool) -> Vec<(f64, f64)> {
    let mut cfg = presets::calibrated(Protocol::FringeScan).with_duration(20_000.0);
    cfg.feed_forward = feed_forward;
    let acc = run_analysis(&cfg).unwrap();
    let spec = WindowSpec::default();
    [Channel::S1, Channel::S2]
        .into_iter()
        .map(|s| {
            let a = curve_fit(&acc, &spec, HeraldSelection::label(HeraldLabel::I1), s).unwrap();
            let b = curve_fit(&acc, &spec, HeraldSelection::label(HeraldLabel::I2), s).unwrap();
            let d = phase_difference(a.phase, b.phase);
            (d.value, d.stderr)
        })
        .collect()
}

#[test]
fn herald_detectors_give_opposite_fringes() {
    for (d, err) in fringe_phase_gap(false) {
        let off = (d.abs() - std::f64::consts::PI).abs();
        assert!(off < 3.0 * err, "gap {d} +- {err}");
    }
}

#[test]
fn feed_forward_aligns_fringes() {
    for (d, err) in fringe_phase_gap(true) {
        assert!(d.abs() < 3.0 * err, "gap {d} +- {err}");
    }
}
