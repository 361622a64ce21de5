use serde::{Deserialize, Serialize};

/// A value with its one-standard-deviation uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub value: f64,
    pub stderr: f64,
}

impl Measured {
    pub const fn new(value: f64, stderr: f64) -> Self {
        Self { value, stderr }
    }

    pub const fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0 }
    }

    /// Probability estimate `k / n` with a Poisson error on `k`.
    pub fn poisson_fraction(k: u64, n: u64) -> Self {
        if n == 0 {
            return Self::exact(0.0);
        }
        let n = n as f64;
        Self::new(k as f64 / n, (k as f64).sqrt() / n)
    }

    pub fn scale(self, k: f64) -> Self {
        Self::new(self.value * k, self.stderr * k.abs())
    }

    pub fn relative_error(&self) -> f64 {
        if self.value == 0.0 {
            f64::INFINITY
        } else {
            (self.stderr / self.value).abs()
        }
    }

    /// Distance to `other` in units of the combined uncertainty.
    pub fn sigma_distance(&self, other: f64) -> f64 {
        (self.value - other).abs() / self.stderr
    }
}

impl std::fmt::Display for Measured {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.6e} ± {:.2e}", self.value, self.stderr)
    }
}

/// Inverse-variance weighted mean. Entries with zero or non-finite error are
/// skipped; returns `None` when nothing usable remains.
pub fn weighted_mean(items: &[Measured]) -> Option<Measured> {
    let mut sw = 0.0;
    let mut swx = 0.0;
    for m in items {
        if m.stderr > 0.0 && m.stderr.is_finite() && m.value.is_finite() {
            let w = 1.0 / (m.stderr * m.stderr);
            sw += w;
            swx += w * m.value;
        }
    }
    (sw > 0.0).then(|| Measured::new(swx / sw, sw.sqrt().recip()))
}
