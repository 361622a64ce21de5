use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use super::config::{Protocol, ScenarioConfig};
use super::SimError;
use crate::models::g2_si_model;

/// Fraction of a truncated-Gaussian pulse (width `sigma`, truncated to
/// `±mode_duration/2`) that falls inside a window of width `window` centred
/// on it.
pub fn echo_capture(sigma: f64, mode_duration: f64, window: f64) -> f64 {
    let half = 0.5 * mode_duration;
    let w = window.min(mode_duration).max(0.0);
    let s2 = std::f64::consts::SQRT_2 * sigma;
    erf(0.5 * w / s2) / erf(half / s2)
}

/// Per-node rates derived from the configuration, in events per second of
/// measurement time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeRates {
    pub pair_rate: f64,
    /// Idler clicks at the heralding station.
    pub idler_rate: f64,
    /// Probability that the signal of a heralded pair is detected after
    /// storage.
    pub stored_transmission: f64,
    /// Same without storage, for the transparency protocol.
    pub prompt_transmission: f64,
}

pub fn node_rates(cfg: &ScenarioConfig) -> Result<[NodeRates; 2], SimError> {
    let ch = &cfg.channel;
    let mode = cfg.mode_duration();
    let mut out = [NodeRates {
        pair_rate: 0.0,
        idler_rate: 0.0,
        stored_transmission: 0.0,
        prompt_transmission: 0.0,
    }; 2];
    for (o, (src, mem)) in out
        .iter_mut()
        .zip([(&cfg.source_a, &cfg.memory_a), (&cfg.source_b, &cfg.memory_b)])
    {
        let after = ch.eta_setup * ch.eta_det;
        o.pair_rate = src.mu / mode;
        o.idler_rate = o.pair_rate * ch.idler_fiber_transmission;
        o.stored_transmission = src.eta_h * mem.spin_wave_efficiency(cfg.storage_time)? * after;
        o.prompt_transmission = src.eta_h * after * cfg.transparency_transmission;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseCalibration {
    /// Storage-noise clicks per second at the node's signal detector, on top
    /// of dark counts.
    pub background_rate: f64,
    /// Cross-correlation the background was tuned to, when the node's source
    /// is on.
    pub predicted_g2: Option<f64>,
}

/// Background rate per node that makes the simulated cross-correlation of a
/// single-node run match the closed-form storage model.
///
/// With only node X pumped, a herald carries a detectable stored photon with
/// probability `f T F(w)`, where `f` is the share of heralds that are real
/// idlers (not dark counts), `T` the stored transmission and `F(w)` the
/// echo fraction inside the detection window. The flat level is
/// `(b + dark) w`, so `g2 = 1 + f T F(w) / ((b + dark) w)` is solved for `b`.
pub fn calibrate_noise(cfg: &ScenarioConfig) -> Result<[NoiseCalibration; 2], SimError> {
    let rates = node_rates(cfg)?;
    let dark = cfg.channel.dark_count_rate;
    let w = cfg.analysis.windows.window;
    let capture = echo_capture(cfg.echo_profile.sigma, cfg.mode_duration(), w);
    let mut out = [NoiseCalibration {
        background_rate: 0.0,
        predicted_g2: None,
    }; 2];
    if cfg.protocol == Protocol::Transparency {
        return Ok(out);
    }
    for (i, (o, src)) in out
        .iter_mut()
        .zip([&cfg.source_a, &cfg.source_b])
        .enumerate()
    {
        let r = &rates[i];
        if src.mu == 0.0 || r.idler_rate == 0.0 {
            continue;
        }
        let g = g2_si_model(src.g2_afc_at(src.pump_power)?, src.eta_h, src.mu1)?;
        let real_share = r.idler_rate / (r.idler_rate + 2.0 * dark);
        let true_prob = real_share * r.stored_transmission * capture;
        let b = true_prob / ((g - 1.0) * w) - dark;
        let node = if i == 0 { 'A' } else { 'B' };
        if !(b >= 0.0) {
            return Err(SimError::Unattainable {
                node,
                reason: format!(
                    "dark counts alone ({dark} cps) already push the cross-correlation below the target {g:.3}"
                ),
            });
        }
        o.background_rate = b;
        o.predicted_g2 = Some(g);
    }
    Ok(out)
}

/// Closed-form probability per herald of a signal click inside the detection
/// window, both nodes pumped (true and accidental coincidences).
pub fn twofold_per_herald(cfg: &ScenarioConfig) -> Result<f64, SimError> {
    let rates = node_rates(cfg)?;
    let noise = calibrate_noise(cfg)?;
    let dark = cfg.channel.dark_count_rate;
    let w = cfg.analysis.windows.window;
    let capture = echo_capture(cfg.echo_profile.sigma, cfg.mode_duration(), w);
    let heralds: f64 = rates.iter().map(|r| r.idler_rate).sum::<f64>() + 2.0 * dark;
    if heralds <= 0.0 {
        return Ok(0.0);
    }
    let transmission = match cfg.protocol {
        Protocol::Transparency => |r: &NodeRates| r.prompt_transmission,
        _ => |r: &NodeRates| r.stored_transmission,
    };
    let true_part: f64 = rates
        .iter()
        .map(|r| r.idler_rate / heralds * transmission(r) * capture)
        .sum();
    let flat: f64 = noise.iter().map(|n| (n.background_rate + dark) * w).sum();
    Ok(true_part + flat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linksim::presets;

    #[test]
    fn capture_limits() {
        assert!((echo_capture(120e-9, 400e-9, 400e-9) - 1.0).abs() < 1e-12);
        assert!((echo_capture(120e-9, 400e-9, 1e-6) - 1.0).abs() < 1e-12);
        assert_eq!(echo_capture(120e-9, 400e-9, 0.0), 0.0);
        let f = echo_capture(120e-9, 400e-9, 280e-9);
        assert!(f > 0.7 && f < 0.85, "{f}");
    }

    #[test]
    fn background_reproduces_target() {
        let cfg = presets::calibrated(Protocol::Conditional);
        let noise = calibrate_noise(&cfg).unwrap();
        let rates = node_rates(&cfg).unwrap();
        let dark = cfg.channel.dark_count_rate;
        let w = cfg.analysis.windows.window;
        let f = echo_capture(cfg.echo_profile.sigma, cfg.mode_duration(), w);
        for i in 0..2 {
            let r = rates[i];
            let share = r.idler_rate / (r.idler_rate + 2.0 * dark);
            let g = 1.0 + share * r.stored_transmission * f / ((noise[i].background_rate + dark) * w);
            assert!((g - noise[i].predicted_g2.unwrap()).abs() < 1e-9);
        }
        assert!((noise[0].predicted_g2.unwrap() - 13.0).abs() < 1e-9);
        assert!((noise[1].predicted_g2.unwrap() - 22.0).abs() < 1e-9);
    }

    #[test]
    fn noise_free_storage_leaves_source_limit() {
        let mut cfg = presets::calibrated(Protocol::Conditional);
        cfg.source_a.mu1 = 1e-15;
        let noise = calibrate_noise(&cfg).unwrap();
        let g_afc = cfg.source_a.g2_afc_at(cfg.source_a.pump_power).unwrap();
        assert!((noise[0].predicted_g2.unwrap() - g_afc).abs() < 1e-6);
        let mut noisy = cfg.clone();
        noisy.source_a.mu1 = 1.0;
        let more = calibrate_noise(&noisy).unwrap();
        assert!(more[0].background_rate > noise[0].background_rate);
    }

    #[test]
    fn predicted_g2_from_source_model() {
        let mut cfg = presets::calibrated(Protocol::Conditional);
        cfg.source_a.pump_power = presets::G2_AFC_CALIBRATION[0].1;
        cfg.source_a.eta_h = 0.20;
        cfg.source_a.mu1 = 0.01;
        let noise = calibrate_noise(&cfg).unwrap();
        assert!((noise[0].predicted_g2.unwrap() - 17.25).abs() < 0.01);
    }

    #[test]
    fn unattainable_target_flagged() {
        let mut cfg = presets::calibrated(Protocol::Conditional);
        cfg.channel.dark_count_rate = 1e4;
        assert!(matches!(calibrate_noise(&cfg), Err(SimError::Unattainable { .. })));
    }
}
