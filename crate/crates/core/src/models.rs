//! Closed-form physical models of the memories, the pair sources and the
//! single-photon interferometer.
//!
//! These are used standalone by the `model` calculators and as calibration
//! inputs for the link simulator.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),
    #[error("cross-correlation {0} <= 1 leaves no interference visibility")]
    NoVisibility(f64),
    #[error("no finite solution: {0}")]
    NoSolution(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;

pub(crate) fn check_unit(name: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(ModelError::OutOfRange {
            name,
            value,
            range: "[0, 1]",
        })
    }
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(ModelError::OutOfRange {
            name,
            value,
            range: "(0, inf)",
        })
    }
}

pub(crate) fn check_nonneg(name: &'static str, value: f64) -> Result<f64> {
    if value >= 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(ModelError::OutOfRange {
            name,
            value,
            range: "[0, inf)",
        })
    }
}

/// Spin-wave AFC memory parameters. Times in seconds, linewidth in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryModel {
    /// Zero-delay spin-wave efficiency.
    pub eta0: f64,
    /// Inhomogeneous linewidth of the spin transition.
    pub gamma_inh: f64,
    pub eta_write: f64,
    pub tau_afc: f64,
    /// Closed duration after each storage attempt.
    pub dead_time: f64,
    pub mode_duration: f64,
    /// Replaces the dephasing factor in the readout decomposition only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_inh_override: Option<f64>,
}

impl MemoryModel {
    pub fn new(
        eta0: f64,
        gamma_inh: f64,
        eta_write: f64,
        tau_afc: f64,
        dead_time: f64,
        mode_duration: f64,
    ) -> Result<Self> {
        let m = Self {
            eta0,
            gamma_inh,
            eta_write,
            tau_afc,
            dead_time,
            mode_duration,
            eta_inh_override: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_eta_inh_override(mut self, eta_inh: f64) -> Result<Self> {
        check_unit("eta_inh_override", eta_inh)?;
        self.eta_inh_override = Some(eta_inh);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_unit("eta0", self.eta0)?;
        check_nonneg("gamma_inh", self.gamma_inh)?;
        check_unit("eta_write", self.eta_write)?;
        check_positive("tau_afc", self.tau_afc)?;
        check_nonneg("dead_time", self.dead_time)?;
        check_positive("mode_duration", self.mode_duration)?;
        if let Some(v) = self.eta_inh_override {
            check_unit("eta_inh_override", v)?;
        }
        Ok(())
    }

    /// Dephasing factor `exp[-(T_S γ π)² / (2 ln 2)]`.
    pub fn dephasing_factor(&self, t_s: f64) -> Result<f64> {
        check_nonneg("T_S", t_s)?;
        let x = t_s * self.gamma_inh * std::f64::consts::PI;
        Ok((-(x * x) / (2.0 * std::f64::consts::LN_2)).exp())
    }

    /// Spin-wave storage efficiency after a spin storage time `t_s`.
    pub fn spin_wave_efficiency(&self, t_s: f64) -> Result<f64> {
        Ok(self.eta0 * self.dephasing_factor(t_s)?)
    }

    /// Dephasing factor used for readout decomposition: the override when set.
    pub fn inhomogeneous_factor(&self, t_s: f64) -> Result<f64> {
        match self.eta_inh_override {
            Some(v) => Ok(v),
            None => self.dephasing_factor(t_s),
        }
    }

    pub fn readout_efficiency_at(&self, t_s: f64) -> Result<f64> {
        readout_efficiency(
            self.spin_wave_efficiency(t_s)?,
            self.eta_write,
            self.inhomogeneous_factor(t_s)?,
        )
    }

    /// Total storage time (AFC delay plus spin storage).
    pub fn storage_time(&self, t_s: f64) -> f64 {
        self.tau_afc + t_s
    }
}

/// Zero-delay efficiency that reproduces `eta_sw` at `t_s` with linewidth `gamma_inh`.
pub fn eta0_for(eta_sw: f64, t_s: f64, gamma_inh: f64) -> Result<f64> {
    let probe = MemoryModel {
        eta0: 1.0,
        gamma_inh,
        eta_write: 1.0,
        tau_afc: 1.0,
        dead_time: 0.0,
        mode_duration: 1.0,
        eta_inh_override: None,
    };
    let f = probe.dephasing_factor(t_s)?;
    if f <= 0.0 {
        return Err(ModelError::ZeroDenominator("eta0_for"));
    }
    check_unit("eta0", eta_sw / f)
}

/// Readout efficiency `η_sw / (η_write η_inh)`.
pub fn readout_efficiency(eta_sw: f64, eta_write: f64, eta_inh: f64) -> Result<f64> {
    check_nonneg("eta_sw", eta_sw)?;
    if eta_write <= 0.0 || eta_inh <= 0.0 {
        return Err(ModelError::ZeroDenominator("readout_efficiency"));
    }
    Ok(eta_sw / (eta_write * eta_inh))
}

/// Photon-pair source operating point. Pump power in mW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceModel {
    /// Mean pair number per temporal mode.
    pub mu: f64,
    /// In-fiber heralding efficiency of the signal photon.
    pub eta_h: f64,
    pub pump_power: f64,
    /// Inverse-law coefficient in 1/mW.
    pub a_coeff: f64,
    /// Input photon number at which storage noise equals signal.
    pub mu1: f64,
}

impl SourceModel {
    pub fn new(mu: f64, eta_h: f64, pump_power: f64, a_coeff: f64, mu1: f64) -> Result<Self> {
        let s = Self {
            mu,
            eta_h,
            pump_power,
            a_coeff,
            mu1,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        check_nonneg("mu", self.mu)?;
        check_unit("eta_h", self.eta_h)?;
        check_positive("pump_power", self.pump_power)?;
        check_positive("a_coeff", self.a_coeff)?;
        check_positive("mu1", self.mu1)?;
        Ok(())
    }

    /// AFC-only cross-correlation at pump power `p`.
    pub fn g2_afc_at(&self, p: f64) -> Result<f64> {
        g2_afc_vs_pump(self.a_coeff, p)
    }

    /// Predicted cross-correlation after spin-wave storage at the configured pump.
    pub fn g2_si(&self) -> Result<f64> {
        g2_si_model(self.g2_afc_at(self.pump_power)?, self.eta_h, self.mu1)
    }

    /// Pump power and pair number both scaled by `k`.
    pub fn scaled_pump(&self, k: f64) -> Result<Self> {
        check_positive("pump factor", k)?;
        Ok(Self {
            mu: self.mu * k,
            pump_power: self.pump_power * k,
            ..*self
        })
    }

    /// Node-averaged source: pump powers, AFC cross-correlations, heralding
    /// efficiencies, noise levels and pair numbers are averaged, and the
    /// inverse-law coefficient is rederived from the averaged point.
    pub fn node_average(a: &Self, b: &Self) -> Result<Self> {
        let pump = 0.5 * (a.pump_power + b.pump_power);
        let g = 0.5 * (a.g2_afc_at(a.pump_power)? + b.g2_afc_at(b.pump_power)?);
        Self::new(
            0.5 * (a.mu + b.mu),
            0.5 * (a.eta_h + b.eta_h),
            pump,
            calibrate_a_coeff(g, pump)?,
            0.5 * (a.mu1 + b.mu1),
        )
    }
}

/// `1 + 1/(a P)`.
pub fn g2_afc_vs_pump(a_coeff: f64, pump_power: f64) -> Result<f64> {
    check_positive("a_coeff", a_coeff)?;
    check_positive("P", pump_power)?;
    Ok(1.0 + 1.0 / (a_coeff * pump_power))
}

/// Inverse-law coefficient from one observed AFC cross-correlation.
pub fn calibrate_a_coeff(g2_afc: f64, pump_power: f64) -> Result<f64> {
    check_positive("P", pump_power)?;
    if !(g2_afc > 1.0 && g2_afc.is_finite()) {
        return Err(ModelError::OutOfRange {
            name: "g2_afc",
            value: g2_afc,
            range: "(1, inf)",
        });
    }
    Ok(1.0 / ((g2_afc - 1.0) * pump_power))
}

/// Cross-correlation after spin-wave storage, `G (x + 1) / (x + G)` with `x = η_H/μ1`.
pub fn g2_si_model(g2_afc: f64, eta_h: f64, mu1: f64) -> Result<f64> {
    if !(g2_afc >= 1.0) {
        return Err(ModelError::OutOfRange {
            name: "g2_afc",
            value: g2_afc,
            range: "[1, inf)",
        });
    }
    check_positive("eta_h", eta_h)?;
    check_positive("mu1", mu1)?;
    let x = eta_h / mu1;
    Ok(g2_afc * (x + 1.0) / (x + g2_afc))
}

/// Noise of the storage in units of input photons per herald, split into the
/// AFC part and the control-pulse part implied by [`g2_si_model`].
pub fn storage_noise_split(g2_afc: f64, eta_h: f64, mu1: f64) -> Result<(f64, f64)> {
    g2_si_model(g2_afc, eta_h, mu1)?;
    if g2_afc <= 1.0 {
        return Err(ModelError::ZeroDenominator("storage_noise_split"));
    }
    Ok((eta_h / (g2_afc - 1.0), mu1 * g2_afc / (g2_afc - 1.0)))
}

/// Transmission and interference quality of the signal and idler channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelModel {
    pub eta_setup: f64,
    pub eta_det: f64,
    /// Idler transmission from source to a click at the heralding station.
    pub idler_fiber_transmission: f64,
    pub signal_class_visibility: f64,
    pub dfg_class_visibility: f64,
    pub eta_s: f64,
    pub eta_i: f64,
    /// Per detector, counts/s.
    pub dark_count_rate: f64,
}

impl ChannelModel {
    pub fn validate(&self) -> Result<()> {
        check_unit("eta_setup", self.eta_setup)?;
        check_unit("eta_det", self.eta_det)?;
        check_unit("idler_fiber_transmission", self.idler_fiber_transmission)?;
        check_unit("signal_class_visibility", self.signal_class_visibility)?;
        check_unit("dfg_class_visibility", self.dfg_class_visibility)?;
        check_unit("eta_s", self.eta_s)?;
        check_unit("eta_i", self.eta_i)?;
        check_nonneg("dark_count_rate", self.dark_count_rate)?;
        Ok(())
    }

    /// Noise-free visibility ceiling `η_s η_i V_606 V_DFG`.
    pub fn v_lim(&self) -> f64 {
        self.eta_s * self.eta_i * self.signal_class_visibility * self.dfg_class_visibility
    }

    /// Interference contrast of a single stored excitation before phase noise.
    pub fn mode_visibility(&self) -> f64 {
        self.eta_s * self.eta_i * self.dfg_class_visibility
    }
}

/// Expected single-photon visibility `V_lim (g-1)/(g+1)`.
pub fn visibility_model(ch: &ChannelModel, g2_si: f64) -> Result<f64> {
    if !(g2_si > 1.0) {
        return Err(ModelError::NoVisibility(g2_si));
    }
    if g2_si.is_infinite() {
        return Ok(ch.v_lim());
    }
    Ok(ch.v_lim() * (g2_si - 1.0) / (g2_si + 1.0))
}

fn threshold_lhs(g: f64) -> f64 {
    g * (g - 1.0).sqrt() / (2.0 * (g + 1.0))
}

/// Smallest cross-correlation that keeps the concurrence positive, i.e. the
/// root of `g √(g-1) / (2(g+1)) = √p00 / V_lim`. The left side is strictly
/// increasing above 1, so bisection on a doubling bracket converges.
pub fn min_g2_threshold(p00: f64, v_lim: f64) -> Result<f64> {
    if !(p00 > 0.0 && p00 <= 1.0) {
        return Err(ModelError::OutOfRange {
            name: "p00",
            value: p00,
            range: "(0, 1]",
        });
    }
    if !(v_lim > 0.0 && v_lim <= 1.0) {
        return Err(ModelError::OutOfRange {
            name: "v_lim",
            value: v_lim,
            range: "(0, 1]",
        });
    }
    let target = p00.sqrt() / v_lim;
    let mut lo = 1.0_f64;
    let mut hi = 2.0_f64;
    while threshold_lhs(hi) <= target {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(ModelError::NoSolution(format!(
                "threshold target {target} not reachable"
            )));
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if threshold_lhs(mid) > target {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Outcome of inverting the pump-power models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum PumpFactor {
    Finite(f64),
    /// Any pump power satisfies the target.
    Unbounded,
    /// The target exceeds `1 + η_H/μ1` and no pump power reaches it.
    Unreachable,
}

/// Largest multiplier on the source pump power that keeps the predicted
/// post-storage cross-correlation at or above `g2_target`.
pub fn max_pump_factor(src: &SourceModel, g2_target: f64) -> Result<PumpFactor> {
    src.validate()?;
    if g2_target.is_nan() {
        return Err(ModelError::OutOfRange {
            name: "g2_target",
            value: g2_target,
            range: "finite",
        });
    }
    if g2_target <= 1.0 {
        return Ok(PumpFactor::Unbounded);
    }
    let x = src.eta_h / src.mu1;
    if g2_target >= 1.0 + x {
        return Ok(PumpFactor::Unreachable);
    }
    // invert g = G(x+1)/(x+G) for G, then 1/(aP) = G - 1 for P
    let g2_afc = g2_target * x / (x + 1.0 - g2_target);
    let pump = 1.0 / (src.a_coeff * (g2_afc - 1.0));
    Ok(PumpFactor::Finite(pump / src.pump_power))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn memory(eta0: f64) -> MemoryModel {
        MemoryModel::new(eta0, 12.5e3, 0.625, 10e-6, 200e-6, 400e-9).unwrap()
    }

    #[test]
    fn zero_delay_returns_eta0() {
        let m = memory(0.0341);
        assert_eq!(m.spin_wave_efficiency(0.0).unwrap(), 0.0341);
    }

    #[test]
    fn dephasing_at_operating_point() {
        // direct evaluation of the formula: exp(-(6.5e-6*12.5e3*pi)^2 / (2 ln 2))
        let x: f64 = 6.5e-6 * 12.5e3 * std::f64::consts::PI;
        let expected = (-(x * x) / (2.0 * 2f64.ln())).exp();
        let m = memory(1.0);
        assert_relative_eq!(m.dephasing_factor(6.5e-6).unwrap(), expected, max_relative = 1e-12);
        assert!((expected - 0.954).abs() < 5e-4);
    }

    #[test]
    fn eta0_inversion() {
        let eta0 = eta0_for(0.0325, 6.5e-6, 12.5e3).unwrap();
        assert!((eta0 - 0.0341).abs() < 1e-4, "{eta0}");
        assert_relative_eq!(
            memory(eta0).spin_wave_efficiency(6.5e-6).unwrap(),
            0.0325,
            max_relative = 1e-12
        );
    }

    #[test]
    fn negative_storage_time_rejected() {
        assert!(memory(0.03).spin_wave_efficiency(-1e-6).is_err());
    }

    #[test]
    fn override_only_touches_readout() {
        let m = memory(0.0341).with_eta_inh_override(0.804).unwrap();
        let sw = m.spin_wave_efficiency(6.5e-6).unwrap();
        assert!((sw - 0.0325).abs() < 1e-4);
        assert_relative_eq!(
            m.readout_efficiency_at(6.5e-6).unwrap(),
            sw / (0.625 * 0.804),
            max_relative = 1e-12
        );
    }

    #[test]
    fn readout_quotients() {
        assert!((readout_efficiency(0.0325, 0.625, 0.804).unwrap() - 0.0647).abs() < 5e-5);
        assert!((readout_efficiency(0.045, 0.625, 0.804).unwrap() - 0.0896).abs() < 5e-5);
        assert_relative_eq!(readout_efficiency(0.5, 0.625, 0.8).unwrap(), 1.0);
        assert_eq!(
            readout_efficiency(0.03, 0.0, 0.8),
            Err(ModelError::ZeroDenominator("readout_efficiency"))
        );
    }

    #[test]
    fn pump_calibration() {
        let a = calibrate_a_coeff(92.0, 3.55).unwrap();
        assert!((a - 3.096e-3).abs() < 1e-6, "{a}");
        let b = calibrate_a_coeff(157.0, 4.2).unwrap();
        assert!((b - 1.527e-3).abs() < 1e-6, "{b}");
        assert_relative_eq!(g2_afc_vs_pump(a, 3.55).unwrap(), 92.0, max_relative = 1e-12);
        assert!(g2_afc_vs_pump(a, 1e12).unwrap() - 1.0 < 1e-6);
        assert!(g2_afc_vs_pump(a, 0.0).is_err());
        assert!(g2_afc_vs_pump(a, -1.0).is_err());
    }

    #[test]
    fn g2_si_values() {
        assert!((g2_si_model(92.0, 0.20, 0.01).unwrap() - 17.25).abs() < 0.01);
        assert!((g2_si_model(157.0, 0.20, 0.01).unwrap() - 18.62).abs() < 0.01);
        assert_eq!(g2_si_model(1.0, 0.2, 0.01).unwrap(), 1.0);
        assert!(g2_si_model(0.5, 0.2, 0.01).is_err());
        assert!(g2_si_model(10.0, 0.0, 0.01).is_err());
    }

    #[test]
    fn noise_split_reproduces_model() {
        let (afc, cp) = storage_noise_split(92.0, 0.2, 0.01).unwrap();
        let g = 1.0 + 0.2 / (afc + cp);
        assert_relative_eq!(g, g2_si_model(92.0, 0.2, 0.01).unwrap(), max_relative = 1e-12);
    }

    fn reference_channel() -> ChannelModel {
        ChannelModel {
            eta_setup: 0.1,
            eta_det: 0.71,
            idler_fiber_transmission: 0.25,
            signal_class_visibility: 0.87,
            dfg_class_visibility: 0.95,
            eta_s: 0.9,
            eta_i: 0.9,
            dark_count_rate: 0.0,
        }
    }

    #[test]
    fn visibility_values() {
        let ch = reference_channel();
        assert!((ch.v_lim() - 0.669).abs() < 5e-4);
        let v = visibility_model(&ch, 17.0).unwrap();
        assert!((v - ch.v_lim() * 16.0 / 18.0).abs() < 1e-12);
        assert!((v - 0.596).abs() < 5e-3);
        assert_eq!(visibility_model(&ch, 1.0), Err(ModelError::NoVisibility(1.0)));
        let ideal = ChannelModel {
            signal_class_visibility: 1.0,
            dfg_class_visibility: 1.0,
            eta_s: 1.0,
            eta_i: 1.0,
            ..ch
        };
        assert_eq!(visibility_model(&ideal, f64::INFINITY).unwrap(), 1.0);
        assert!(visibility_model(&ideal, 1e9).unwrap() > 1.0 - 1e-8);
    }

    #[test]
    fn threshold_values() {
        // frozen from an independent Brent root of the equality
        let g = min_g2_threshold(0.999, 0.67).unwrap();
        assert!((g - 11.515009).abs() < 1e-5, "{g}");
        let edge = min_g2_threshold(1e-12, 1.0).unwrap();
        assert!(edge < 1.0 + 1e-9);
        assert!(min_g2_threshold(0.0, 0.5).is_err());
        assert!(min_g2_threshold(0.5, 0.0).is_err());
    }

    fn node_a() -> SourceModel {
        SourceModel::new(2e-3, 0.2, 3.55, calibrate_a_coeff(92.0, 3.55).unwrap(), 0.01).unwrap()
    }

    #[test]
    fn pump_factor_identity_and_bounds() {
        let src = node_a();
        let current = src.g2_si().unwrap();
        match max_pump_factor(&src, current).unwrap() {
            PumpFactor::Finite(k) => assert_relative_eq!(k, 1.0, max_relative = 1e-10),
            other => panic!("{other:?}"),
        }
        assert_eq!(max_pump_factor(&src, 0.9).unwrap(), PumpFactor::Unbounded);
        assert_eq!(max_pump_factor(&src, 21.0).unwrap(), PumpFactor::Unreachable);
    }

    #[test]
    fn node_average_pump_factor() {
        let b = SourceModel::new(2e-3, 0.2, 4.2, calibrate_a_coeff(157.0, 4.2).unwrap(), 0.01)
            .unwrap();
        let avg = SourceModel::node_average(&node_a(), &b).unwrap();
        assert_relative_eq!(avg.g2_afc_at(avg.pump_power).unwrap(), 124.5, max_relative = 1e-12);
        // closed form: G = 16*20/(21-16) = 64, P = 123.5*3.875/63
        let PumpFactor::Finite(k) = max_pump_factor(&avg, 16.0).unwrap() else {
            panic!()
        };
        assert_relative_eq!(k, 123.5 / 63.0, max_relative = 1e-10);
    }

    #[test]
    fn inverse_law_scaling_identity() {
        let src = node_a();
        for k in [0.5, 2.0, 3.9] {
            let lhs = src.g2_afc_at(k * src.pump_power).unwrap() - 1.0;
            let rhs = (src.g2_afc_at(src.pump_power).unwrap() - 1.0) / k;
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
        }
    }

    #[test]
    fn construction_validates() {
        assert!(MemoryModel::new(1.2, 1.0, 0.5, 1e-6, 0.0, 1e-7).is_err());
        assert!(MemoryModel::new(0.2, 1.0, 0.5, 0.0, 0.0, 1e-7).is_err());
        assert!(SourceModel::new(-0.1, 0.2, 1.0, 1.0, 0.01).is_err());
        assert!(SourceModel::new(0.1, 0.2, 1.0, 0.0, 0.01).is_err());
    }
}
