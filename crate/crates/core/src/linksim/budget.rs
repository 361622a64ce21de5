use serde::{Deserialize, Serialize};

use super::calibrate::twofold_per_herald;
use super::config::ScenarioConfig;
use super::schedule::duty_cycle;
use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitingFactor {
    Pump,
    DeadTime,
    DutyCycle,
    FiberLoss,
}

/// Heralding and detection rates of a multimode link, cps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateBudget {
    /// Both idler detectors together.
    pub heralding_rate: f64,
    pub heralding_rate_per_detector: f64,
    pub detection_rate: f64,
    pub limiting_factor: LimitingFactor,
    /// Heralding rate of the unscaled configuration without fiber.
    pub baseline_heralding_rate: f64,
    /// Transmission of one idler arm.
    pub fiber_transmission: f64,
    pub duty_cycle: f64,
    /// Largest heralding rate the memory dead time allows.
    pub dead_time_cap: f64,
    pub detection_per_herald: f64,
}

/// Rate budget of the unconditional multimode sequence with the heralding
/// station `fiber_length_km` away in total, half of it in each idler arm.
pub fn link_budget(
    cfg: &ScenarioConfig,
    fiber_length_km: f64,
    loss_db_per_km: f64,
    pump_factor: f64,
) -> Result<RateBudget, SimError> {
    let bad = |path: &str, message: &str| SimError::Config {
        path: path.into(),
        message: message.into(),
        line: None,
    };
    if !(fiber_length_km >= 0.0 && fiber_length_km.is_finite()) {
        return Err(bad("fiber_length_km", "must be finite and >= 0"));
    }
    if !(loss_db_per_km >= 0.0 && loss_db_per_km.is_finite()) {
        return Err(bad("loss_db_per_km", "must be finite and >= 0"));
    }
    if !(pump_factor > 0.0 && pump_factor.is_finite()) {
        return Err(bad("pump_factor", "must be finite and > 0"));
    }
    let s = &cfg.schedule;
    let mode = cfg.mode_duration();
    let t_idler = cfg.channel.idler_fiber_transmission;
    let dark = cfg.channel.dark_count_rate;
    let duty = duty_cycle(s);
    let cycles = s.n_modes as f64 / s.spdc_cycle * duty;
    let pairs = (cfg.source_a.mu + cfg.source_b.mu) * t_idler;
    let darks = 2.0 * dark * mode;
    let fiber = 10f64.powf(-loss_db_per_km * 0.5 * fiber_length_km / 10.0);

    let baseline = (pairs + darks) * cycles;
    let uncapped = (pairs * pump_factor * fiber + darks) * cycles;
    let dead = cfg.dead_time();
    let cap = if dead > 0.0 { duty / dead } else { f64::INFINITY };
    let heralding = uncapped.min(cap);
    let ratio = twofold_per_herald(cfg)?;

    let limiting_factor = if uncapped >= cap {
        LimitingFactor::DeadTime
    } else if duty < 1.0 || fiber < 1.0 {
        if fiber < duty {
            LimitingFactor::FiberLoss
        } else {
            LimitingFactor::DutyCycle
        }
    } else {
        LimitingFactor::Pump
    };
    Ok(RateBudget {
        heralding_rate: heralding,
        heralding_rate_per_detector: 0.5 * heralding,
        detection_rate: heralding * ratio,
        limiting_factor,
        baseline_heralding_rate: baseline,
        fiber_transmission: fiber,
        duty_cycle: duty,
        dead_time_cap: cap,
        detection_per_herald: ratio,
    })
}
