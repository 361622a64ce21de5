//! Parameter sets matching the reference two-node experiment.
//!
//! Measured quantities are used directly. The numbers that were not measured
//! are calibrated so the simulator lands on the observed operating point:
//!
//! - source heralding efficiency, from signal detections per herald
//! - signal-mode overlap, from the observed fringe visibility
//! - per-node storage noise, from the observed cross-correlations

use super::config::{
    AnalysisSettings, Detection, EchoProfile, Protocol, ScenarioConfig, ScheduleModel,
    SCHEMA_VERSION,
};
use crate::models::{calibrate_a_coeff, eta0_for, ChannelModel, MemoryModel, SourceModel};
use crate::tsanalysis::fringe::default_setpoints;

pub const MODE_DURATION: f64 = 400e-9;
pub const TAU_AFC: f64 = 10e-6;
pub const STORAGE_TIME: f64 = 6.5e-6;
pub const GAMMA_INH: f64 = 12.5e3;
pub const ETA_WRITE: f64 = 0.625;
/// Dephasing factor used to split the readout efficiency out of the
/// spin-wave efficiency.
pub const ETA_INH_READOUT: f64 = 0.804;
pub const SPIN_WAVE_EFFICIENCY: [f64; 2] = [0.0325, 0.045];
pub const DEAD_TIME: f64 = 200e-6;
pub const PUMP_OFF_TIME: f64 = 20e-6;

/// Operating pump powers, mW.
pub const PUMP_POWER: [f64; 2] = [2.95, 3.65];
/// AFC-only cross-correlations and the pump powers they were measured at.
pub const G2_AFC_CALIBRATION: [(f64, f64); 2] = [(92.0, 3.55), (157.0, 4.2)];
/// Cross-correlations after spin-wave storage at the operating point.
pub const G2_SI_TARGET: [f64; 2] = [13.0, 22.0];
/// Idler clicks per second at the heralding station, both sources on.
pub const COMBINED_IDLER_RATE: f64 = 2800.0;
pub const IDLER_TRANSMISSION: f64 = 0.25;
pub const HERALDING_EFFICIENCY: f64 = 0.235;

pub const ECHO_SIGMA: f64 = 120e-9;

pub fn channel() -> ChannelModel {
    ChannelModel {
        eta_setup: 0.10,
        eta_det: 0.71,
        idler_fiber_transmission: IDLER_TRANSMISSION,
        signal_class_visibility: 0.87,
        dfg_class_visibility: 0.95,
        eta_s: 0.95,
        eta_i: 0.90,
        dark_count_rate: 5.0,
    }
}

/// Phase noise whose average contrast equals the classical signal
/// interferometer visibility: `exp(-sigma^2/2) = V`.
pub fn jitter_for_visibility(v: f64) -> f64 {
    (-2.0 * v.ln()).sqrt()
}

pub fn memory(node: usize) -> MemoryModel {
    let eta0 = eta0_for(SPIN_WAVE_EFFICIENCY[node], STORAGE_TIME, GAMMA_INH)
        .expect("reference efficiencies are valid");
    MemoryModel::new(eta0, GAMMA_INH, ETA_WRITE, TAU_AFC, DEAD_TIME, MODE_DURATION)
        .and_then(|m| m.with_eta_inh_override(ETA_INH_READOUT))
        .expect("reference memory is valid")
}

/// Noise level `mu1` that turns the AFC cross-correlation `g_afc` into the
/// target `g` after storage.
fn mu1_for(g_afc: f64, g: f64, eta_h: f64) -> f64 {
    let x = g_afc * (g - 1.0) / (g_afc - g);
    eta_h / x
}

pub fn source(node: usize) -> SourceModel {
    let (g_cal, p_cal) = G2_AFC_CALIBRATION[node];
    let a = calibrate_a_coeff(g_cal, p_cal).expect("calibration point is valid");
    let pump = PUMP_POWER[node];
    let share = pump / (PUMP_POWER[0] + PUMP_POWER[1]);
    let mu = COMBINED_IDLER_RATE * share * MODE_DURATION / IDLER_TRANSMISSION;
    let g_afc = 1.0 + 1.0 / (a * pump);
    let mu1 = mu1_for(g_afc, G2_SI_TARGET[node], HERALDING_EFFICIENCY);
    SourceModel::new(mu, HERALDING_EFFICIENCY, pump, a, mu1).expect("reference source is valid")
}

fn schedule(t_lock: f64, t_phase: f64) -> ScheduleModel {
    ScheduleModel {
        t_lock,
        t_phase,
        t_meas: 18e-3,
        prep_period: 1.0,
        prep_duration: 0.6,
        pump_off_time: PUMP_OFF_TIME,
        spdc_cycle: 100e-6,
        open_window: 15.0 * MODE_DURATION,
        n_modes: 15,
    }
}

/// Lock cycle without phase stabilisation, used for population measurements.
pub fn schedule_populations() -> ScheduleModel {
    schedule(10.5e-3, 0.0)
}

/// Lock cycle with interferometer phase stabilisation.
pub fn schedule_interference() -> ScheduleModel {
    schedule(3e-3, 5e-3)
}

/// Reference configuration for a protocol. Fringe scans use the
/// phase-stabilised schedule, the others the plain lock cycle except the
/// unconditional sequence, which shares the fringe-scan timing.
pub fn calibrated(protocol: Protocol) -> ScenarioConfig {
    let ch = channel();
    let (sched, detection, setpoints) = match protocol {
        Protocol::FringeScan => (
            schedule_interference(),
            Some(Detection::Interference),
            default_setpoints(8),
        ),
        Protocol::Unconditional => (schedule_interference(), None, default_setpoints(8)),
        Protocol::Conditional | Protocol::Transparency => (schedule_populations(), None, Vec::new()),
    };
    ScenarioConfig {
        schema_version: SCHEMA_VERSION,
        protocol,
        detection,
        source_a: source(0),
        source_b: source(1),
        memory_a: memory(0),
        memory_b: memory(1),
        channel: ch,
        schedule: sched,
        storage_time: STORAGE_TIME,
        feed_forward: false,
        phase_setpoints: setpoints,
        signal_phase_jitter_sigma: jitter_for_visibility(ch.signal_class_visibility),
        echo_profile: EchoProfile { sigma: ECHO_SIGMA },
        analysis: AnalysisSettings::default(),
        transparency_transmission: 1.0,
        seed: 1,
        duration: 60.0,
    }
}

/// Reference configuration with only one node's source pumped.
pub fn single_node(protocol: Protocol, node: usize) -> ScenarioConfig {
    let mut cfg = calibrated(protocol);
    match node {
        0 => cfg.source_b.mu = 0.0,
        _ => cfg.source_a.mu = 0.0,
    }
    cfg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let m = memory(0);
        assert!((m.spin_wave_efficiency(STORAGE_TIME).unwrap() - 0.0325).abs() < 1e-12);
        assert!((m.readout_efficiency_at(STORAGE_TIME).unwrap() - 0.0325 / (0.625 * 0.804)).abs() < 1e-12);
        for node in 0..2 {
            let s = source(node);
            assert!((s.g2_si().unwrap() - G2_SI_TARGET[node]).abs() < 1e-9);
        }
        let total = (source(0).mu + source(1).mu) / MODE_DURATION * IDLER_TRANSMISSION;
        assert!((total - COMBINED_IDLER_RATE).abs() < 1e-6);
        assert!((jitter_for_visibility(0.87) - 0.528).abs() < 1e-3);
    }
}
