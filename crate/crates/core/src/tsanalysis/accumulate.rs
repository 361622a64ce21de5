use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::ops::Range;

use super::histogram::{argmax_earliest, CoincidenceHistogram, HistogramLayout};
use super::record::{Channel, DetectionRecord};
use crate::tomography::HeraldLabel;

/// A phase setpoint usable as a map key (total order on the float).
#[derive(Debug, Clone, Copy)]
pub struct PhaseKey(pub f64);

impl PartialEq for PhaseKey {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits()
    }
}

impl Eq for PhaseKey {}

impl PartialOrd for PhaseKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PhaseKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct HeraldKey {
    setpoint: Option<PhaseKey>,
    mode: i32,
    herald: Channel,
}

impl HeraldKey {
    fn of(r: &DetectionRecord) -> Self {
        Self {
            setpoint: r.phase_setpoint.map(PhaseKey),
            mode: r.mode,
            herald: r.channel,
        }
    }
}

/// Which heralds to include when reading results back.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeraldSelection {
    /// `Combined` selects both idler detectors.
    pub label: HeraldLabel,
    /// Keep only heralds tagged with modes `0..n`.
    pub modes_below: Option<i32>,
    /// Keep only heralds recorded at this setpoint.
    pub setpoint: Option<f64>,
}

impl HeraldSelection {
    pub fn label(label: HeraldLabel) -> Self {
        Self {
            label,
            modes_below: None,
            setpoint: None,
        }
    }

    pub fn all() -> Self {
        Self::label(HeraldLabel::Combined)
    }

    pub fn at_setpoint(self, phase: f64) -> Self {
        Self {
            setpoint: Some(phase),
            ..self
        }
    }

    pub fn modes_below(self, n: i32) -> Self {
        Self {
            modes_below: Some(n),
            ..self
        }
    }

    fn matches(&self, k: &HeraldKey) -> bool {
        let label_ok = match self.label {
            HeraldLabel::I1 => k.herald == Channel::I1,
            HeraldLabel::I2 => k.herald == Channel::I2,
            HeraldLabel::Combined => true,
        };
        let mode_ok = self.modes_below.map_or(true, |n| k.mode >= 0 && k.mode < n);
        let sp_ok = self
            .setpoint
            .map_or(true, |p| k.setpoint == Some(PhaseKey(p)));
        label_ok && mode_ok && sp_ok
    }
}

/// Heralds with at least one click on each signal detector inside the
/// histogram span; kept for direct two-excitation counting.
#[derive(Debug, Clone, PartialEq)]
struct TripleCandidate {
    key: HeraldKey,
    s1: Vec<u32>,
    s2: Vec<u32>,
}

/// Streaming accumulator of everything the analyses need from a run:
/// herald-relative histograms keyed by setpoint, mode, herald and signal
/// detector, herald counts, and the rare heralds followed by clicks on both
/// signal detectors.
#[derive(Debug, Clone)]
pub struct RunAnalysis {
    layout: HistogramLayout,
    histograms: BTreeMap<(HeraldKey, Channel), Vec<u64>>,
    heralds: BTreeMap<HeraldKey, u64>,
    triples: Vec<TripleCandidate>,
    channel_counts: [u64; 4],
    exposure: BTreeMap<Option<PhaseKey>, f64>,
    duration: f64,
}

impl RunAnalysis {
    pub fn new(layout: HistogramLayout) -> Self {
        Self {
            layout,
            histograms: BTreeMap::new(),
            heralds: BTreeMap::new(),
            triples: Vec::new(),
            channel_counts: [0; 4],
            exposure: BTreeMap::new(),
            duration: 0.0,
        }
    }

    pub fn layout(&self) -> &HistogramLayout {
        &self.layout
    }

    /// Adds a time-sorted batch of records. Coincidences are only formed
    /// within the batch, so a batch must contain complete herald windows.
    pub fn ingest(&mut self, records: &[DetectionRecord]) {
        let mut herald_idx = Vec::new();
        let mut s1 = Vec::new();
        let mut s2 = Vec::new();
        for (i, r) in records.iter().enumerate() {
            self.channel_counts[r.channel.index()] += 1;
            match r.channel {
                Channel::I1 | Channel::I2 => herald_idx.push(i),
                Channel::S1 => s1.push(r.time_ps),
                Channel::S2 => s2.push(r.time_ps),
            }
        }

        let bin = self.layout.bin_ps as i128;
        let span = bin * self.layout.n_bins as i128;
        let (mut j1, mut j2) = (0usize, 0usize);
        let mut run: Option<(HeraldKey, u64)> = None;
        let mut bins1: Vec<u32> = Vec::new();
        let mut bins2: Vec<u32> = Vec::new();
        for &i in &herald_idx {
            let r = &records[i];
            let key = HeraldKey::of(r);
            match &mut run {
                Some((k, n)) if *k == key => *n += 1,
                _ => {
                    if let Some((k, n)) = run.take() {
                        *self.heralds.entry(k).or_default() += n;
                    }
                    run = Some((key, 1));
                }
            }
            let lower = r.time_ps as i128 + self.layout.origin_ps as i128;
            collect_bins(&s1, &mut j1, lower, span, bin, &mut bins1);
            collect_bins(&s2, &mut j2, lower, span, bin, &mut bins2);
            for (signal, bins) in [(Channel::S1, &bins1), (Channel::S2, &bins2)] {
                if bins.is_empty() {
                    continue;
                }
                let hist = self
                    .histograms
                    .entry((key, signal))
                    .or_insert_with(|| vec![0; self.layout.n_bins]);
                for &b in bins {
                    hist[b as usize] += 1;
                }
            }
            if !bins1.is_empty() && !bins2.is_empty() {
                self.triples.push(TripleCandidate {
                    key,
                    s1: bins1.clone(),
                    s2: bins2.clone(),
                });
            }
        }
        if let Some((k, n)) = run {
            *self.heralds.entry(k).or_default() += n;
        }
    }

    /// Records measurement time spent at a setpoint.
    pub fn add_exposure(&mut self, setpoint: Option<f64>, seconds: f64) {
        *self.exposure.entry(setpoint.map(PhaseKey)).or_default() += seconds;
    }

    pub fn add_duration(&mut self, seconds: f64) {
        self.duration += seconds;
    }

    /// Total run time covered, seconds.
    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn exposure(&self, setpoint: Option<f64>) -> f64 {
        self.exposure
            .get(&setpoint.map(PhaseKey))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn channel_count(&self, ch: Channel) -> u64 {
        self.channel_counts[ch.index()]
    }

    /// Distinct phase setpoints seen on heralds, ascending.
    pub fn setpoints(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .heralds
            .keys()
            .filter_map(|k| k.setpoint.map(|p| p.0))
            .collect();
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| a.to_bits() == b.to_bits());
        v
    }

    /// One past the largest mode index seen on a herald.
    pub fn mode_count(&self) -> i32 {
        self.heralds.keys().map(|k| k.mode + 1).max().unwrap_or(0).max(0)
    }

    pub fn herald_count(&self, sel: &HeraldSelection) -> u64 {
        self.heralds
            .iter()
            .filter(|(k, _)| sel.matches(k))
            .map(|(_, n)| n)
            .sum()
    }

    /// Histogram of the selected heralds against one signal detector, or both
    /// when `signal` is `None`.
    pub fn histogram(&self, sel: &HeraldSelection, signal: Option<Channel>) -> CoincidenceHistogram {
        let mut h = CoincidenceHistogram::empty(self.layout);
        for ((k, s), counts) in &self.histograms {
            if sel.matches(k) && signal.map_or(true, |c| c == *s) {
                for (a, b) in h.counts.iter_mut().zip(counts) {
                    *a += b;
                }
            }
        }
        h.n_heralds = self.herald_count(sel);
        h
    }

    /// Peak of the histogram pooled over every herald and signal detector;
    /// gives one window position shared by all sub-selections.
    pub fn pooled_peak(&self) -> Option<usize> {
        let h = self.histogram(&HeraldSelection::all(), None);
        if h.total() == 0 {
            return None;
        }
        argmax_earliest(&h.counts)
    }

    /// Number of selected heralds followed by a click on S1 inside `s1` and a
    /// click on S2 inside `s2` (bin ranges).
    pub fn twofold_signal_heralds(
        &self,
        sel: &HeraldSelection,
        s1: &Range<usize>,
        s2: &Range<usize>,
    ) -> u64 {
        self.triples
            .iter()
            .filter(|t| sel.matches(&t.key))
            .filter(|t| {
                t.s1.iter().any(|&b| s1.contains(&(b as usize)))
                    && t.s2.iter().any(|&b| s2.contains(&(b as usize)))
            })
            .count() as u64
    }

    /// Adds the content of another accumulator with the same layout.
    pub fn merge(&mut self, other: RunAnalysis) {
        assert_eq!(self.layout, other.layout, "merging analyses with different layouts");
        for (k, v) in other.histograms {
            let e = self
                .histograms
                .entry(k)
                .or_insert_with(|| vec![0; v.len()]);
            for (a, b) in e.iter_mut().zip(&v) {
                *a += b;
            }
        }
        for (k, n) in other.heralds {
            *self.heralds.entry(k).or_default() += n;
        }
        self.triples.extend(other.triples);
        for (a, b) in self.channel_counts.iter_mut().zip(other.channel_counts) {
            *a += b;
        }
        for (k, t) in other.exposure {
            *self.exposure.entry(k).or_default() += t;
        }
        self.duration += other.duration;
    }
}

fn collect_bins(
    signals: &[u64],
    start: &mut usize,
    lower: i128,
    span: i128,
    bin: i128,
    out: &mut Vec<u32>,
) {
    out.clear();
    while *start < signals.len() && (signals[*start] as i128) < lower {
        *start += 1;
    }
    for &s in &signals[*start..] {
        let off = s as i128 - lower;
        if off >= span {
            break;
        }
        out.push((off / bin) as u32);
    }
}
