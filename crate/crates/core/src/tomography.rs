//! Density-matrix elements of the heralded two-memory state and the
//! entanglement metrics derived from them.
//!
//! The state is block diagonal in the photon-number basis
//! {|00>, |10>, |01>, |11>} with a single coherence `d` between |10> and |01>.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measure::Measured;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TomographyError {
    #[error("{name} = {value} is negative")]
    Negative { name: &'static str, value: f64 },
    #[error("probabilities sum to {0} > 1")]
    TraceExceedsOne(f64),
    #[error("|d| = {d} exceeds sqrt(p10 p01) = {bound} by more than 3 sigma ({sigma})")]
    Unphysical { d: f64, bound: f64, sigma: f64 },
    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),
    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
}

pub type Result<T> = std::result::Result<T, TomographyError>;

/// Idler detector whose click heralded the state. A click at `I1` heralds the
/// symmetric superposition, `I2` the antisymmetric one. `Combined` pools both
/// detectors after feed-forward has mapped them onto the same state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum HeraldLabel {
    #[serde(rename = "i1", alias = "I1")]
    I1,
    #[serde(rename = "i2", alias = "I2")]
    I2,
    #[serde(rename = "combined")]
    Combined,
}

impl HeraldLabel {
    /// Sign of the coherence expected for this herald.
    pub fn sign(self) -> f64 {
        match self {
            HeraldLabel::I1 | HeraldLabel::Combined => 1.0,
            HeraldLabel::I2 => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            HeraldLabel::I1 => "i1",
            HeraldLabel::I2 => "i2",
            HeraldLabel::Combined => "combined",
        }
    }
}

impl std::str::FromStr for HeraldLabel {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "i1" => Ok(HeraldLabel::I1),
            "i2" => Ok(HeraldLabel::I2),
            "combined" => Ok(HeraldLabel::Combined),
            other => Err(format!("unknown herald label {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Physicality {
    Physical,
    /// |d| exceeds sqrt(p10 p01) but by less than 3 standard errors.
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrixElements {
    pub p00: Measured,
    pub p10: Measured,
    pub p01: Measured,
    pub p11: Measured,
    pub d: Measured,
    pub herald_label: HeraldLabel,
    pub physicality: Physicality,
}

fn nonneg(name: &'static str, m: Measured) -> Result<()> {
    if m.value < 0.0 || m.value.is_nan() {
        return Err(TomographyError::Negative {
            name,
            value: m.value,
        });
    }
    Ok(())
}

/// Builds the element set with `p00` as the complement of the other three
/// populations.
pub fn assemble(
    p10: Measured,
    p01: Measured,
    p11: Measured,
    d: Measured,
    herald_label: HeraldLabel,
) -> Result<DensityMatrixElements> {
    nonneg("p10", p10)?;
    nonneg("p01", p01)?;
    nonneg("p11", p11)?;
    let occupied = p10.value + p01.value + p11.value;
    if occupied > 1.0 {
        return Err(TomographyError::TraceExceedsOne(occupied));
    }
    let p00 = Measured::new(
        1.0 - occupied,
        (p10.stderr.powi(2) + p01.stderr.powi(2) + p11.stderr.powi(2)).sqrt(),
    );
    let bound = (p10.value * p01.value).sqrt();
    let excess = d.value.abs() - bound;
    let physicality = if excess <= 0.0 {
        Physicality::Physical
    } else if excess <= 3.0 * d.stderr {
        Physicality::Marginal
    } else {
        return Err(TomographyError::Unphysical {
            d: d.value,
            bound,
            sigma: d.stderr,
        });
    };
    Ok(DensityMatrixElements {
        p00,
        p10,
        p01,
        p11,
        d,
        herald_label,
        physicality,
    })
}

impl DensityMatrixElements {
    pub fn trace(&self) -> f64 {
        self.p00.value + self.p10.value + self.p01.value + self.p11.value
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Concurrence {
    /// `max(0, 2|d| - 2 sqrt(p00 p11))`.
    pub value: Measured,
    /// The same expression before clamping, for significance tests.
    pub signed: Measured,
}

/// Concurrence with first-order error propagation over the independent
/// elements (p10, p01, p11, d); p00 enters through the complement.
pub fn concurrence(rho: &DensityMatrixElements) -> Concurrence {
    let p00 = rho.p00.value;
    let p11 = rho.p11.value;
    let root = (p00 * p11).sqrt();
    let signed = 2.0 * rho.d.value.abs() - 2.0 * root;

    let var_d = (2.0 * rho.d.stderr).powi(2);
    let var_rest = if root > 0.0 {
        let dp1 = (p11 / p00).sqrt();
        let dp11 = (p00 - p11) / root;
        (dp1 * rho.p10.stderr).powi(2)
            + (dp1 * rho.p01.stderr).powi(2)
            + (dp11 * rho.p11.stderr).powi(2)
    } else {
        // derivative diverges at p11 = 0; use the shift caused by one sigma of p11
        (2.0 * (p00 * rho.p11.stderr).sqrt()).powi(2)
    };
    let err = (var_d + var_rest).sqrt();
    Concurrence {
        value: Measured::new(signed.max(0.0), err),
        signed: Measured::new(signed, err),
    }
}

/// Heralded two-photon suppression `p11 / (p10 p01)`.
pub fn two_photon_suppression(rho: &DensityMatrixElements) -> Result<Measured> {
    let den = rho.p10.value * rho.p01.value;
    if den <= 0.0 {
        return Err(TomographyError::ZeroDenominator("two_photon_suppression"));
    }
    let h = rho.p11.value / den;
    let rel2 = (rho.p10.stderr / rho.p10.value).powi(2) + (rho.p01.stderr / rho.p01.value).powi(2);
    let err = (rho.p11.stderr / den).powi(2) + h * h * rel2;
    Ok(Measured::new(h, err.sqrt()))
}

/// Coherence from an interference visibility, `d = s V (p10 + p01) / 2`.
pub fn offdiag_from_visibility(
    v: Measured,
    p10: Measured,
    p01: Measured,
    sign: f64,
) -> Result<Measured> {
    if !(0.0..=1.0).contains(&v.value) {
        return Err(TomographyError::OutOfRange {
            name: "visibility",
            value: v.value,
            range: "[0, 1]",
        });
    }
    let s = if sign < 0.0 { -1.0 } else { 1.0 };
    let sum = p10.value + p01.value;
    let err = (0.5 * sum * v.stderr).powi(2)
        + (0.5 * v.value).powi(2) * (p10.stderr.powi(2) + p01.stderr.powi(2));
    Ok(Measured::new(s * v.value * sum / 2.0, err.sqrt()))
}

/// Two-excitation probability from the split of each arm into true and
/// accidental coincidences:
/// `p_c10 p_a01 + p_a10 p_c01 + p_a10 p_a01`.
pub fn p11_estimate(
    p_coinc_10: Measured,
    p_acc_10: Measured,
    p_coinc_01: Measured,
    p_acc_01: Measured,
) -> Measured {
    let (c10, a10, c01, a01) = (
        p_coinc_10.value,
        p_acc_10.value,
        p_coinc_01.value,
        p_acc_01.value,
    );
    let value = c10 * a01 + a10 * c01 + a10 * a01;
    let var = (a01 * p_coinc_10.stderr).powi(2)
        + ((c01 + a01) * p_acc_10.stderr).powi(2)
        + (a10 * p_coinc_01.stderr).powi(2)
        + ((c10 + a10) * p_acc_01.stderr).powi(2);
    Measured::new(value, var.sqrt())
}

/// Symmetric-arm reduction of [`p11_estimate`]: `4 (p10/g)^2 (g - 1)`.
pub fn p11_from_g2(p10: f64, g2_si: f64) -> Result<f64> {
    if !(g2_si > 1.0) {
        return Err(TomographyError::OutOfRange {
            name: "g2_si",
            value: g2_si,
            range: "(1, inf)",
        });
    }
    if p10 < 0.0 {
        return Err(TomographyError::Negative {
            name: "p10",
            value: p10,
        });
    }
    Ok(4.0 * (p10 / g2_si).powi(2) * (g2_si - 1.0))
}

/// Overlap with the maximally entangled state after restricting to the one-
/// and two-excitation subspace.
pub fn effective_fidelity(rho: &DensityMatrixElements) -> Result<Measured> {
    let den = rho.p10.value + rho.p01.value + rho.p11.value;
    if den <= 0.0 {
        return Err(TomographyError::ZeroDenominator("effective_fidelity"));
    }
    let num = 0.5 * (rho.p10.value + rho.p01.value) + rho.d.value.abs();
    let f = num / den;
    let d_pop = 0.5 / den - num / (den * den);
    let d_p11 = -num / (den * den);
    let var = (d_pop * rho.p10.stderr).powi(2)
        + (d_pop * rho.p01.stderr).powi(2)
        + (d_p11 * rho.p11.stderr).powi(2)
        + (rho.d.stderr / den).powi(2);
    Ok(Measured::new(f, var.sqrt()))
}

/// Detection and readout efficiencies between the memories and the signal
/// detectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyChain {
    pub eta_det: f64,
    pub eta_setup: f64,
    pub eta_read_a: f64,
    pub eta_read_b: f64,
}

impl EfficiencyChain {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eta_det", self.eta_det),
            ("eta_setup", self.eta_setup),
            ("eta_read_a", self.eta_read_a),
            ("eta_read_b", self.eta_read_b),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(TomographyError::OutOfRange {
                    name,
                    value: v,
                    range: "(0, 1]",
                });
            }
        }
        Ok(())
    }

    pub fn node_a(&self) -> f64 {
        self.eta_det * self.eta_setup * self.eta_read_a
    }

    pub fn node_b(&self) -> f64 {
        self.eta_det * self.eta_setup * self.eta_read_b
    }
}

/// Corrects the elements for losses after the memories, giving the state
/// inside the crystals.
pub fn backpropagate(
    rho: &DensityMatrixElements,
    chain: &EfficiencyChain,
) -> Result<DensityMatrixElements> {
    chain.validate()?;
    let ea = chain.node_a();
    let eb = chain.node_b();
    let p10 = rho.p10.scale(1.0 / ea);
    let p01 = rho.p01.scale(1.0 / eb);
    let p11 = rho.p11.scale(1.0 / (ea * eb));
    let d = rho.d.scale(1.0 / (ea * eb).sqrt());
    for (name, m) in [("p10", p10), ("p01", p01), ("p11", p11)] {
        if m.value > 1.0 {
            return Err(TomographyError::OutOfRange {
                name,
                value: m.value,
                range: "[0, 1] after loss correction",
            });
        }
    }
    assemble(p10, p01, p11, d, rho.herald_label)
}

/// Number of standard deviations separating `value` from zero.
pub fn significance(value: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(TomographyError::OutOfRange {
            name: "sigma",
            value: sigma,
            range: "(0, inf)",
        });
    }
    Ok(value / sigma)
}
