use std::path::Path;

use qlink_core::linksim::{link_budget, Protocol};
use qlink_core::models::{
    calibrate_a_coeff, g2_si_model, max_pump_factor, min_g2_threshold, readout_efficiency,
    visibility_model, ChannelModel, MemoryModel, PumpFactor, SourceModel,
};

use crate::error::Result;
use crate::io;
use crate::params::Params;
use crate::report::Report;
use crate::ModelKind;

fn names(which: ModelKind) -> &'static [&'static str] {
    match which {
        ModelKind::G2si => &["g2_afc", "eta_h", "mu1"],
        ModelKind::Visibility => &["g2_si", "eta_s", "eta_i", "v_signal", "v_dfg"],
        ModelKind::Threshold => &["p00", "v_lim"],
        ModelKind::Pumpfactor => &["g2_afc", "pump_power", "eta_h", "mu1", "g2_target"],
        ModelKind::Linkbudget => &["length_km", "loss_db_per_km", "pump_factor", "dead_time_us"],
        ModelKind::Efficiency => &["eta_sw", "eta_write", "eta_inh", "t_s", "gamma_inh"],
    }
}

fn show(r: &mut Report, name: &str, value: f64, unit: &str) {
    println!("{name} = {value} {unit}");
    r.exact(name, value, unit);
}

pub fn run(which: ModelKind, args: &[String], config: Option<&Path>) -> Result<Report> {
    let p = Params::parse(args, names(which))?;
    let mut r = Report::new(config.map(|c| vec![c.display().to_string()]).unwrap_or_default());
    match which {
        ModelKind::G2si => {
            let [g, eta_h, mu1] = p.require(["g2_afc", "eta_h", "mu1"])?;
            println!("g2_si = g2_afc (x + 1) / (x + g2_afc), x = eta_h / mu1");
            show(&mut r, "g2_si", g2_si_model(g, eta_h, mu1)?, "");
        }
        ModelKind::Visibility => {
            let [g, eta_s, eta_i, v_signal, v_dfg] =
                p.require(["g2_si", "eta_s", "eta_i", "v_signal", "v_dfg"])?;
            let ch = ChannelModel {
                eta_s,
                eta_i,
                signal_class_visibility: v_signal,
                dfg_class_visibility: v_dfg,
                ..qlink_core::linksim::presets::channel()
            };
            ch.validate()?;
            println!("V = V_lim (g2_si - 1) / (g2_si + 1), V_lim = eta_s eta_i v_signal v_dfg");
            show(&mut r, "v_lim", ch.v_lim(), "");
            show(&mut r, "visibility", visibility_model(&ch, g)?, "");
        }
        ModelKind::Threshold => {
            let [p00, v_lim] = p.require(["p00", "v_lim"])?;
            println!("g2_min solves g sqrt(g - 1) / (2 (g + 1)) = sqrt(p00) / V_lim");
            show(&mut r, "g2_min", min_g2_threshold(p00, v_lim)?, "");
        }
        ModelKind::Pumpfactor => {
            let [g, pump, eta_h, mu1, target] =
                p.require(["g2_afc", "pump_power", "eta_h", "mu1", "g2_target"])?;
            let src = SourceModel::new(0.0, eta_h, pump, calibrate_a_coeff(g, pump)?, mu1)?;
            println!("k = P_max / P, with g2_si(g2_afc(P_max)) = g2_target and g2_afc(P) = 1 + 1/(a P)");
            match max_pump_factor(&src, target)? {
                PumpFactor::Finite(k) => {
                    show(&mut r, "pump_factor", k, "");
                    show(&mut r, "max_pump_power", k * pump, "mW");
                }
                PumpFactor::Unbounded => println!("pump_factor unbounded: every pump power meets the target"),
                PumpFactor::Unreachable => {
                    println!("pump_factor unreachable: target at or above 1 + eta_h / mu1")
                }
            }
        }
        ModelKind::Linkbudget => {
            let [length, loss, k] = p.require(["length_km", "loss_db_per_km", "pump_factor"])?;
            let mut cfg = io::load_config(config, config.is_none().then_some(Protocol::Unconditional))?;
            if let Some(dt) = p.get("dead_time_us") {
                cfg = cfg.with_dead_time(dt * 1e-6)?;
            }
            let b = link_budget(&cfg, length, loss, k)?;
            println!("R_H = min(cycles (k mu T_i 10^(-loss L / 20) + 2 dark t_mode), duty / dead_time)");
            show(&mut r, "heralding_rate", b.heralding_rate, "cps");
            show(&mut r, "heralding_rate_per_detector", b.heralding_rate_per_detector, "cps");
            show(&mut r, "detection_rate", b.detection_rate, "cps");
            show(&mut r, "fiber_transmission", b.fiber_transmission, "");
            show(&mut r, "duty_cycle", b.duty_cycle, "");
            show(&mut r, "dead_time_cap", b.dead_time_cap, "cps");
            println!("limiting_factor = {}", serde_json::to_string(&b.limiting_factor).expect("enum serialises"));
        }
        ModelKind::Efficiency => {
            let [eta_sw, eta_write] = p.require(["eta_sw", "eta_write"])?;
            let eta_inh = match p.get("eta_inh") {
                Some(v) => v,
                None => {
                    let [t_s, gamma_inh] = p.require(["t_s", "gamma_inh"])?;
                    let probe = MemoryModel {
                        eta0: 1.0,
                        gamma_inh,
                        eta_write,
                        tau_afc: 0.0,
                        dead_time: 0.0,
                        mode_duration: 0.0,
                        eta_inh_override: None,
                    };
                    probe.dephasing_factor(t_s)?
                }
            };
            println!("eta_read = eta_sw / (eta_write eta_inh)");
            show(&mut r, "eta_inh", eta_inh, "");
            show(&mut r, "readout_efficiency", readout_efficiency(eta_sw, eta_write, eta_inh)?, "");
        }
    }
    Ok(r)
}
