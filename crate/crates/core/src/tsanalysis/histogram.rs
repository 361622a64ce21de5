use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::record::check_sorted;
use super::AnalysisError;
use crate::measure::Measured;

/// Bin layout of a herald-relative coincidence histogram, in picoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramLayout {
    /// Herald-relative offset of the left edge of bin 0.
    pub origin_ps: i64,
    pub bin_ps: u64,
    pub n_bins: usize,
}

impl HistogramLayout {
    /// Layout covering `[lo, hi)` seconds relative to the herald.
    pub fn covering(lo: f64, hi: f64, bin_width: f64) -> Result<Self, AnalysisError> {
        if !(bin_width > 0.0) || !(hi > lo) {
            return Err(AnalysisError::BadLayout(format!(
                "span [{lo}, {hi}) with bin width {bin_width}"
            )));
        }
        let bin_ps = (bin_width * 1e12).round() as u64;
        if bin_ps == 0 {
            return Err(AnalysisError::BadLayout("bin width below 1 ps".into()));
        }
        let origin_ps = (lo * 1e12).round() as i64;
        let n_bins = (((hi - lo) * 1e12) / bin_ps as f64).ceil() as usize;
        Ok(Self {
            origin_ps,
            bin_ps,
            n_bins,
        })
    }

    /// Layout of `±half_span` around `center`.
    pub fn centered(center: f64, half_span: f64, bin_width: f64) -> Result<Self, AnalysisError> {
        Self::covering(center - half_span, center + half_span, bin_width)
    }

    pub fn end_ps(&self) -> i64 {
        self.origin_ps + (self.n_bins as u64 * self.bin_ps) as i64
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_ps as f64 * 1e-12
    }

    /// Herald-relative time of the centre of `bin`, seconds.
    pub fn bin_center(&self, bin: usize) -> f64 {
        (self.origin_ps as f64 + (bin as f64 + 0.5) * self.bin_ps as f64) * 1e-12
    }

    fn bins_for(&self, width: f64) -> usize {
        ((width * 1e12) / self.bin_ps as f64).round().max(0.0) as usize
    }
}

/// Counts of signal clicks binned by their delay after a herald.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceHistogram {
    pub layout: HistogramLayout,
    pub counts: Vec<u64>,
    pub n_heralds: u64,
}

impl CoincidenceHistogram {
    pub fn empty(layout: HistogramLayout) -> Self {
        Self {
            layout,
            counts: vec![0; layout.n_bins],
            n_heralds: 0,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn sum(&self, bins: Range<usize>) -> u64 {
        self.counts[bins].iter().sum()
    }

    /// Adds another histogram with the same layout.
    pub fn accumulate(&mut self, other: &CoincidenceHistogram) -> Result<(), AnalysisError> {
        if self.layout != other.layout {
            return Err(AnalysisError::BadLayout("histogram layouts differ".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.n_heralds += other.n_heralds;
        Ok(())
    }

    /// Index of the largest bin; ties go to the earliest bin.
    pub fn peak_bin(&self) -> Option<usize> {
        argmax_earliest(&self.counts)
    }
}

pub fn argmax_earliest(counts: &[u64]) -> Option<usize> {
    let mut best: Option<(usize, u64)> = None;
    for (i, &c) in counts.iter().enumerate() {
        if best.map_or(true, |(_, b)| c > b) {
            best = Some((i, c));
        }
    }
    best.map(|(i, _)| i)
}

/// Calls `f(herald_index, bin)` for every (herald, signal) pair whose delay
/// falls inside the layout. Both streams must be sorted; runs in one pass.
pub fn scan_coincidences(
    heralds: &[u64],
    signals: &[u64],
    layout: &HistogramLayout,
    mut f: impl FnMut(usize, usize),
) {
    let mut start = 0usize;
    let bin = layout.bin_ps as i128;
    let span = bin * layout.n_bins as i128;
    for (hi, &h) in heralds.iter().enumerate() {
        let lower = h as i128 + layout.origin_ps as i128;
        while start < signals.len() && (signals[start] as i128) < lower {
            start += 1;
        }
        let mut j = start;
        while j < signals.len() {
            let off = signals[j] as i128 - lower;
            if off >= span {
                break;
            }
            f(hi, (off / bin) as usize);
            j += 1;
        }
    }
}

/// Histogram of `t_signal - t_herald` over the layout span.
pub fn build_histogram(
    heralds: &[u64],
    signals: &[u64],
    layout: HistogramLayout,
) -> Result<CoincidenceHistogram, AnalysisError> {
    check_sorted(heralds)?;
    check_sorted(signals)?;
    let mut h = CoincidenceHistogram::empty(layout);
    scan_coincidences(heralds, signals, &layout, |_, b| h.counts[b] += 1);
    h.n_heralds = heralds.len() as u64;
    Ok(h)
}

/// Widths of the detection window and the flanking noise windows, seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub window: f64,
    /// Width of each of the two noise windows.
    pub noise_window: f64,
    /// Gap between the detection window edge and each noise window.
    pub noise_gap: f64,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            window: 280e-9,
            noise_window: 2e-6,
            noise_gap: 500e-9,
        }
    }
}

impl WindowSpec {
    pub fn with_window(self, window: f64) -> Self {
        Self { window, ..self }
    }
}

/// Bin ranges of the detection window and the two noise windows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowBins {
    pub peak: usize,
    pub signal: Range<usize>,
    pub before: Range<usize>,
    pub after: Range<usize>,
}

impl WindowBins {
    pub fn noise_len(&self) -> usize {
        self.before.len() + self.after.len()
    }
}

/// Places the detection window centred on `peak` and the noise windows on
/// either side of it.
pub fn place_windows(
    layout: &HistogramLayout,
    peak: usize,
    spec: &WindowSpec,
) -> Result<WindowBins, AnalysisError> {
    let n = layout.bins_for(spec.window).max(1);
    let nb = layout.bins_for(spec.noise_window);
    let gap = layout.bins_for(spec.noise_gap);
    let start = peak as i64 - (n / 2) as i64;
    let end = start + n as i64;
    let before_start = start - gap as i64 - nb as i64;
    let after_end = end + gap as i64 + nb as i64;
    if before_start < 0 || after_end > layout.n_bins as i64 {
        return Err(AnalysisError::WindowOutOfSpan {
            window: spec.window,
            noise_window: spec.noise_window,
        });
    }
    let (start, end) = (start as usize, end as usize);
    Ok(WindowBins {
        peak,
        signal: start..end,
        before: before_start as usize..start - gap,
        after: end + gap..after_end as usize,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum G2Value {
    Finite(Measured),
    /// Coincidences in the window but none in the noise windows.
    Infinite,
    /// No counts anywhere.
    Undefined,
}

impl G2Value {
    pub fn finite(&self) -> Option<Measured> {
        match self {
            G2Value::Finite(m) => Some(*m),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Estimate {
    pub g2: G2Value,
    pub window_counts: u64,
    pub noise_counts: u64,
    pub bins: WindowBins,
}

/// Cross-correlation from the counts in the detection window relative to the
/// mean level of the two noise windows.
pub fn g2_from_histogram(
    h: &CoincidenceHistogram,
    spec: &WindowSpec,
) -> Result<G2Estimate, AnalysisError> {
    let peak = h.peak_bin().ok_or(AnalysisError::EmptyHistogram)?;
    g2_at_peak(h, peak, spec)
}

/// As [`g2_from_histogram`] with the window centred on a given bin.
pub fn g2_at_peak(
    h: &CoincidenceHistogram,
    peak: usize,
    spec: &WindowSpec,
) -> Result<G2Estimate, AnalysisError> {
    let bins = place_windows(&h.layout, peak, spec)?;
    let nw = h.sum(bins.signal.clone());
    let nn = h.sum(bins.before.clone()) + h.sum(bins.after.clone());
    let g2 = if nn == 0 {
        if nw == 0 {
            G2Value::Undefined
        } else {
            G2Value::Infinite
        }
    } else if nw == 0 {
        // no coincidences: value 0 with the error of a single count
        let scale = bins.noise_len() as f64 / (bins.signal.len() as f64 * nn as f64);
        G2Value::Finite(Measured::new(0.0, scale))
    } else {
        let g = nw as f64 * bins.noise_len() as f64 / (nn as f64 * bins.signal.len() as f64);
        let rel = (1.0 / nw as f64 + 1.0 / nn as f64).sqrt();
        G2Value::Finite(Measured::new(g, g * rel))
    };
    Ok(G2Estimate {
        g2,
        window_counts: nw,
        noise_counts: nn,
        bins,
    })
}

/// Per-herald probabilities in the detection window, split into true and
/// accidental coincidences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueAccidental {
    pub p_raw: Measured,
    pub p_coinc: Measured,
    pub p_acc: Measured,
    /// The accidental estimate exceeded the raw probability and `p_coinc` was
    /// set to zero.
    pub clamped: bool,
    pub bins: WindowBins,
}

pub fn split_true_accidental(
    h: &CoincidenceHistogram,
    spec: &WindowSpec,
) -> Result<TrueAccidental, AnalysisError> {
    let peak = h.peak_bin().ok_or(AnalysisError::EmptyHistogram)?;
    split_at_peak(h, peak, spec)
}

pub fn split_at_peak(
    h: &CoincidenceHistogram,
    peak: usize,
    spec: &WindowSpec,
) -> Result<TrueAccidental, AnalysisError> {
    if h.n_heralds == 0 {
        return Err(AnalysisError::NoHeralds);
    }
    let bins = place_windows(&h.layout, peak, spec)?;
    let n = h.n_heralds as f64;
    let nw = h.sum(bins.signal.clone()) as f64;
    let nn = (h.sum(bins.before.clone()) + h.sum(bins.after.clone())) as f64;
    let ratio = if bins.noise_len() == 0 {
        0.0
    } else {
        bins.signal.len() as f64 / bins.noise_len() as f64
    };
    let p_raw = Measured::new(nw / n, nw.sqrt() / n);
    let p_acc = Measured::new(nn * ratio / n, nn.sqrt() * ratio / n);
    let diff = p_raw.value - p_acc.value;
    let err = (p_raw.stderr.powi(2) + p_acc.stderr.powi(2)).sqrt();
    Ok(TrueAccidental {
        p_raw,
        p_coinc: Measured::new(diff.max(0.0), err),
        p_acc,
        clamped: diff < -1e-12 * p_raw.value.max(p_acc.value),
        bins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout() -> HistogramLayout {
        HistogramLayout::centered(16.5e-6, 5e-6, 10e-9).unwrap()
    }

    #[test]
    fn layout_geometry() {
        let l = layout();
        assert_eq!(l.n_bins, 1000);
        assert_eq!(l.origin_ps, 11_500_000);
        assert!((l.bin_center(500) - 16.505e-6).abs() < 1e-15);
        assert!(HistogramLayout::covering(1.0, 0.0, 1e-9).is_err());
    }

    #[test]
    fn single_coincidence_lands_in_expected_bin() {
        let h = build_histogram(&[0], &[16_500_000], layout()).unwrap();
        assert_eq!(h.total(), 1);
        assert_eq!(h.counts[500], 1);
        assert_eq!(h.n_heralds, 1);
    }

    #[test]
    fn empty_signals_give_zero_histogram() {
        let h = build_histogram(&[0, 100], &[], layout()).unwrap();
        assert_eq!(h.total(), 0);
        assert_eq!(h.n_heralds, 2);
    }

    #[test]
    fn unsorted_streams_rejected() {
        assert!(build_histogram(&[5, 1], &[], layout()).is_err());
        assert!(build_histogram(&[1], &[9, 3], layout()).is_err());
    }

    #[test]
    fn overlapping_heralds_each_see_signal() {
        let h = build_histogram(&[0, 1_000_000], &[17_000_000], layout()).unwrap();
        assert_eq!(h.total(), 2);
    }

    #[test]
    fn argmax_tie_goes_to_earliest() {
        assert_eq!(argmax_earliest(&[1, 5, 3, 5]), Some(1));
        assert_eq!(argmax_earliest(&[0, 0]), Some(0));
        assert_eq!(argmax_earliest(&[]), None);
    }

    #[test]
    fn window_placement_and_bounds() {
        let l = layout();
        let b = place_windows(&l, 500, &WindowSpec::default()).unwrap();
        assert_eq!(b.signal, 486..514);
        assert_eq!(b.before, 236..436);
        assert_eq!(b.after, 564..764);
        assert!(place_windows(&l, 100, &WindowSpec::default()).is_err());
    }

    #[test]
    fn flat_histogram_has_unit_g2_and_no_true_coincidences() {
        let mut h = CoincidenceHistogram::empty(layout());
        h.counts.iter_mut().for_each(|c| *c = 7);
        h.counts[500] = 8;
        h.n_heralds = 1000;
        let g = g2_from_histogram(&h, &WindowSpec::default()).unwrap();
        let v = g.g2.finite().unwrap().value;
        assert!((v - (7.0 * 28.0 + 1.0) / (7.0 * 28.0)).abs() < 1e-12);
        h.counts[500] = 7;
        let s = split_at_peak(&h, 500, &WindowSpec::default()).unwrap();
        assert_eq!(s.p_coinc.value, 0.0);
        assert!(!s.clamped);
    }

    #[test]
    fn zero_baseline_flagged() {
        let mut h = CoincidenceHistogram::empty(layout());
        h.counts[500] = 3;
        h.n_heralds = 10;
        assert_eq!(g2_from_histogram(&h, &WindowSpec::default()).unwrap().g2, G2Value::Infinite);
        let s = split_true_accidental(&h, &WindowSpec::default()).unwrap();
        assert_eq!(s.p_acc.value, 0.0);
        assert!((s.p_coinc.value - 0.3).abs() < 1e-15);
    }

    #[test]
    fn negative_true_part_is_clamped() {
        let mut h = CoincidenceHistogram::empty(layout());
        h.counts.iter_mut().for_each(|c| *c = 2);
        h.counts[500] = 3;
        for b in 486..514 {
            h.counts[b] = if b == 500 { 3 } else { 0 };
        }
        h.n_heralds = 100;
        let s = split_at_peak(&h, 500, &WindowSpec::default()).unwrap();
        assert!(s.clamped);
        assert_eq!(s.p_coinc.value, 0.0);
    }
}
