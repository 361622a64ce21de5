//! Event generation. Time is cut into preparation periods, each simulated
//! with its own random stream so results do not depend on how the output is
//! consumed.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};

use super::calibrate::{calibrate_noise, node_rates};
use super::config::{Detection, Protocol, ScenarioConfig};
use super::manifest::RunManifest;
use super::schedule::{open_intervals, ps, Interval};
use super::SimError;
use crate::tsanalysis::{Channel, DetectionRecord, HistogramLayout, RunAnalysis};

const JITTER_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Everything generated for one preparation period.
#[derive(Debug)]
pub struct ChunkOutput<'a> {
    /// Sorted by time, then channel.
    pub records: &'a [DetectionRecord],
    /// Measurement seconds per phase setpoint.
    pub exposure: &'a [(Option<f64>, f64)],
    /// Wall-clock seconds of the run covered by the chunk.
    pub duration: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub streams: BTreeMap<Channel, Vec<DetectionRecord>>,
    pub manifest: RunManifest,
}

/// Histogram layout centred on the expected readout delay.
pub fn analysis_layout(cfg: &ScenarioConfig) -> Result<HistogramLayout, SimError> {
    let a = &cfg.analysis;
    HistogramLayout::centered(cfg.readout_delay(), a.half_span, a.bin_width).map_err(|e| {
        SimError::Config {
            path: "analysis".into(),
            message: e.to_string(),
            line: None,
        }
    })
}

/// Per-run constants derived from the configuration.
struct Plan {
    protocol: Protocol,
    interference: bool,
    /// Idler clicks per second from each source.
    idler: [f64; 2],
    pair: [f64; 2],
    idler_transmission: f64,
    /// Probability that the signal of a heralded pair from each node clicks.
    transmission: [f64; 2],
    /// Mean number of extra photons in the readout mode.
    extra: [f64; 2],
    /// Flat rate at each signal detector, including dark counts.
    flat: [f64; 2],
    dark: f64,
    delay: f64,
    guard: f64,
    dead_ps: u64,
    mode: f64,
    sigma: f64,
    /// Fringe contrast of a heralded readout photon before phase noise.
    /// Photons are routed as single-origin, so unequal node efficiencies do
    /// not lower it.
    contrast: f64,
    feed_forward: bool,
    setpoints: Vec<f64>,
    jitter_sigma: f64,
    seed: u64,
    cycle_ps: u64,
    open: f64,
    n_modes: i32,
}

impl Plan {
    fn new(cfg: &ScenarioConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let rates = node_rates(cfg)?;
        let noise = calibrate_noise(cfg)?;
        let ch = &cfg.channel;
        let transparency = cfg.protocol == Protocol::Transparency;
        let transmission = rates.map(|r| {
            if transparency {
                r.prompt_transmission
            } else {
                r.stored_transmission
            }
        });
        let srcs = [&cfg.source_a, &cfg.source_b];
        let extra = if transparency {
            [0.0; 2]
        } else {
            [
                srcs[0].mu * transmission[0],
                srcs[1].mu * transmission[1],
            ]
        };
        let interference = cfg.detection() == Detection::Interference;
        let dark = ch.dark_count_rate;
        let b = [noise[0].background_rate, noise[1].background_rate];
        let flat = if interference {
            let m = 0.5 * (b[0] + b[1]);
            [m + dark, m + dark]
        } else {
            [b[0] + dark, b[1] + dark]
        };
        let s = &cfg.schedule;
        Ok(Self {
            protocol: cfg.protocol,
            interference,
            idler: [rates[0].idler_rate, rates[1].idler_rate],
            pair: [rates[0].pair_rate, rates[1].pair_rate],
            idler_transmission: ch.idler_fiber_transmission,
            transmission,
            extra,
            flat,
            dark,
            delay: cfg.readout_delay(),
            guard: cfg.herald_guard(),
            dead_ps: ps(cfg.dead_time()),
            mode: cfg.mode_duration(),
            sigma: cfg.echo_profile.sigma,
            contrast: ch.mode_visibility(),
            feed_forward: cfg.feed_forward,
            setpoints: cfg.phase_setpoints.clone(),
            jitter_sigma: cfg.signal_phase_jitter_sigma,
            seed: cfg.seed,
            cycle_ps: ps(s.spdc_cycle),
            open: s.open_window,
            n_modes: s.n_modes as i32,
        })
    }

    fn setpoint(&self, slot: u64) -> Option<f64> {
        if self.interference {
            Some(self.setpoints[(slot % self.setpoints.len() as u64) as usize])
        } else {
            None
        }
    }

    /// Interferometer phase drift, constant over one lock slot.
    fn jitter(&self, slot: u64) -> f64 {
        if self.jitter_sigma == 0.0 {
            return 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ JITTER_SALT);
        rng.set_stream(slot);
        let z: f64 = StandardNormal.sample(&mut rng);
        z * self.jitter_sigma
    }

    fn echo_offset(&self, rng: &mut ChaCha8Rng) -> f64 {
        let half = 0.5 * self.mode;
        loop {
            let z: f64 = StandardNormal.sample(rng);
            let x = z * self.sigma;
            if x.abs() <= half {
                return x;
            }
        }
    }
}

/// Poisson draw by inversion, fast for the small means of per-herald noise.
fn poisson_small(lambda: f64, rng: &mut ChaCha8Rng) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    if lambda > 20.0 {
        return Poisson::new(lambda).map(|p| p.sample(rng) as u64).unwrap_or(0);
    }
    let mut p = (-lambda).exp();
    let mut cdf = p;
    let u: f64 = rng.gen();
    let mut k = 0u64;
    while u > cdf {
        k += 1;
        p *= lambda / k as f64;
        cdf += p;
        if p < 1e-300 {
            break;
        }
    }
    k
}

struct Chunk<'p> {
    plan: &'p Plan,
    rng: ChaCha8Rng,
    records: Vec<DetectionRecord>,
}

impl Chunk<'_> {
    fn push(&mut self, channel: Channel, t_ps: u64, trial: i64, mode: i32, setpoint: Option<f64>) {
        self.records.push(DetectionRecord {
            channel,
            time_ps: t_ps,
            trial,
            mode,
            phase_setpoint: setpoint,
        });
    }

    fn herald_channel(&mut self) -> Channel {
        if self.rng.gen::<bool>() {
            Channel::I1
        } else {
            Channel::I2
        }
    }

    /// Routes a readout photon from `node` to a signal detector.
    fn route(&mut self, node: usize, coherent: Option<(Channel, f64)>) -> Channel {
        if !self.plan.interference {
            return if node == 0 { Channel::S1 } else { Channel::S2 };
        }
        let p_s1 = match coherent {
            Some((herald, phase)) => {
                let sign = if herald == Channel::I1 { 1.0 } else { -1.0 };
                0.5 * (1.0 + sign * self.plan.contrast * phase.cos())
            }
            None => 0.5,
        };
        if self.rng.gen::<f64>() < p_s1 {
            Channel::S1
        } else {
            Channel::S2
        }
    }

    /// Number of pairs from `node` in `len` seconds with at least one photon
    /// detected, and the probability of that. Pairs lost on both sides leave
    /// no trace and are never drawn.
    fn detected_pairs(&mut self, node: usize, len: f64) -> (f64, u64) {
        let plan = self.plan;
        let ti = plan.idler_transmission;
        let ts = plan.transmission[node];
        let p_any = 1.0 - (1.0 - ti) * (1.0 - ts);
        (p_any, poisson_small(plan.pair[node] * len * p_any, &mut self.rng))
    }

    /// Which photons of a detected pair click: (idler, signal).
    fn split_detection(&mut self, node: usize, p_any: f64) -> (bool, bool) {
        let ti = self.plan.idler_transmission;
        let ts = self.plan.transmission[node];
        let r = self.rng.gen::<f64>() * p_any;
        if r < ti * ts {
            (true, true)
        } else if r < ti {
            (true, false)
        } else {
            (false, true)
        }
    }

    fn background(&mut self, iv: &Interval, setpoint: Option<f64>) {
        let len = iv.seconds();
        for (i, ch) in [Channel::S1, Channel::S2].into_iter().enumerate() {
            let n = poisson_small(self.plan.flat[i] * len, &mut self.rng);
            for _ in 0..n {
                let t = self.rng.gen::<f64>() * len;
                self.push(ch, iv.start_ps + ps(t), -1, -1, setpoint);
            }
        }
    }

    /// Heralded storage with a dead time after every herald.
    fn conditional(&mut self, iv: &Interval, trial: &mut i64, ready_ps: &mut u64) {
        let plan = self.plan;
        let setpoint = plan.setpoint(iv.slot);
        let phase0 = setpoint.unwrap_or(0.0) + plan.jitter(iv.slot);
        let len = iv.seconds();
        let limit = len - plan.guard;
        let total = plan.idler[0] + plan.idler[1] + 2.0 * plan.dark;
        let mut t = ready_ps.saturating_sub(iv.start_ps) as f64 * 1e-12;
        if total > 0.0 {
            loop {
                let e: f64 = Exp1.sample(&mut self.rng);
                t += e / total;
                if t >= limit {
                    break;
                }
                let herald = self.herald_channel();
                let herald_ps = iv.start_ps + ps(t);
                self.push(herald, herald_ps, *trial, 0, setpoint);
                let u = self.rng.gen::<f64>() * total;
                let source = if u < plan.idler[0] {
                    Some(0)
                } else if u < plan.idler[0] + plan.idler[1] {
                    Some(1)
                } else {
                    None
                };
                let ff = if plan.feed_forward && herald == Channel::I2 { PI } else { 0.0 };
                if let Some(node) = source {
                    if self.rng.gen::<f64>() < plan.transmission[node] {
                        let at = t + plan.delay + plan.echo_offset(&mut self.rng);
                        let ch = self.route(node, Some((herald, phase0 + ff)));
                        self.push(ch, iv.start_ps + ps(at), -1, -1, setpoint);
                    }
                }
                let lambda = plan.extra[0] + plan.extra[1];
                for _ in 0..poisson_small(lambda, &mut self.rng) {
                    let node = usize::from(self.rng.gen::<f64>() * lambda >= plan.extra[0]);
                    let at = t + plan.delay + plan.echo_offset(&mut self.rng);
                    let ch = self.route(node, None);
                    self.push(ch, iv.start_ps + ps(at), -1, -1, setpoint);
                }
                *trial += 1;
                *ready_ps = herald_ps + plan.dead_ps;
                t = (*ready_ps - iv.start_ps) as f64 * 1e-12;
            }
        }
        self.background(iv, setpoint);
    }

    /// Fixed storage cycles; every idler click inside the open window is a
    /// herald tagged with its temporal mode.
    fn unconditional(&mut self, iv: &Interval, trial: &mut i64) {
        let plan = self.plan;
        let setpoint = plan.setpoint(iv.slot);
        let phase0 = setpoint.unwrap_or(0.0) + plan.jitter(iv.slot);
        let cycle = plan.cycle_ps;
        let mut k = iv.start_ps.div_ceil(cycle);
        while (k + 1) * cycle <= iv.end_ps {
            let c = k * cycle;
            let cycle_trial = k as i64;
            for node in 0..2 {
                let (p_any, n) = self.detected_pairs(node, plan.open);
                for _ in 0..n {
                    let u = self.rng.gen::<f64>() * plan.open;
                    let (idler, signal) = self.split_detection(node, p_any);
                    let mut coherent = None;
                    if idler {
                        let herald = self.herald_channel();
                        let mode = ((u / plan.mode) as i32).min(plan.n_modes - 1);
                        self.push(herald, c + ps(u), cycle_trial, mode, setpoint);
                        let ff = if plan.feed_forward && herald == Channel::I2 { PI } else { 0.0 };
                        coherent = Some((herald, phase0 + ff));
                    }
                    if signal {
                        let at = u + plan.delay + plan.echo_offset(&mut self.rng);
                        let ch = self.route(node, coherent);
                        self.push(ch, c + ps(at), -1, -1, setpoint);
                    }
                }
            }
            let darks = poisson_small(2.0 * plan.dark * plan.open, &mut self.rng);
            for _ in 0..darks {
                let u = self.rng.gen::<f64>() * plan.open;
                let herald = self.herald_channel();
                let mode = ((u / plan.mode) as i32).min(plan.n_modes - 1);
                self.push(herald, c + ps(u), cycle_trial, mode, setpoint);
            }
            k += 1;
        }
        *trial = (*trial).max(k as i64);
        self.background(iv, setpoint);
    }

    /// No storage: signal photons are detected promptly and the source runs
    /// continuously.
    fn transparency(&mut self, iv: &Interval, trial: &mut i64) {
        let plan = self.plan;
        let len = iv.seconds();
        let limit = (len - plan.guard).max(0.0);
        for node in 0..2 {
            let (p_any, n) = self.detected_pairs(node, len);
            for _ in 0..n {
                let u = self.rng.gen::<f64>() * len;
                let (idler, signal) = self.split_detection(node, p_any);
                if idler && u < limit {
                    let herald = self.herald_channel();
                    self.push(herald, iv.start_ps + ps(u), *trial, 0, None);
                    *trial += 1;
                }
                if signal {
                    let at = (u + plan.echo_offset(&mut self.rng)).clamp(0.0, len);
                    let ch = self.route(node, None);
                    self.push(ch, iv.start_ps + ps(at), -1, -1, None);
                }
            }
        }
        let darks = poisson_small(2.0 * plan.dark * limit, &mut self.rng);
        for _ in 0..darks {
            let u = self.rng.gen::<f64>() * limit;
            let herald = self.herald_channel();
            self.push(herald, iv.start_ps + ps(u), *trial, 0, None);
            *trial += 1;
        }
        self.background(iv, None);
    }

    /// Sorts the chunk and tags signal clicks with the latest trial and, for
    /// the unconditional protocol, their temporal mode.
    fn finish(&mut self) {
        self.records.sort_by(|a, b| {
            a.sort_key()
                .cmp(&b.sort_key())
                .then(a.trial.cmp(&b.trial))
        });
        let plan = self.plan;
        let delay_ps = ps(plan.delay);
        let mode_ps = ps(plan.mode);
        let mut last = -1i64;
        for r in &mut self.records {
            if r.channel.is_herald() {
                last = r.trial;
                continue;
            }
            r.trial = last;
            if plan.protocol == Protocol::Unconditional && r.time_ps >= delay_ps && mode_ps > 0 {
                let m = ((r.time_ps - delay_ps) % plan.cycle_ps) / mode_ps;
                if (m as i64) < plan.n_modes as i64 {
                    r.mode = m as i32;
                }
            }
        }
    }
}

/// Runs the scenario, handing each preparation period to `sink` in order.
pub fn simulate<F>(cfg: &ScenarioConfig, mut sink: F) -> Result<(), SimError>
where
    F: FnMut(ChunkOutput<'_>) -> Result<(), SimError>,
{
    let plan = Plan::new(cfg)?;
    let period_ps = ps(cfg.schedule.prep_period);
    let total_ps = ps(cfg.duration);
    let mut trial = 0i64;
    let mut ready_ps = 0u64;
    let mut k = 0u64;
    while k * period_ps < total_ps {
        let from = k * period_ps;
        let to = ((k + 1) * period_ps).min(total_ps);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(k);
        let mut chunk = Chunk {
            plan: &plan,
            rng,
            records: Vec::new(),
        };
        let mut exposure: Vec<(Option<f64>, f64)> = Vec::new();
        for iv in open_intervals(&cfg.schedule, from, to) {
            match plan.protocol {
                Protocol::Conditional | Protocol::FringeScan => {
                    chunk.conditional(&iv, &mut trial, &mut ready_ps)
                }
                Protocol::Unconditional => chunk.unconditional(&iv, &mut trial),
                Protocol::Transparency => chunk.transparency(&iv, &mut trial),
            }
            let sp = plan.setpoint(iv.slot);
            match exposure.iter_mut().find(|(s, _)| *s == sp) {
                Some((_, secs)) => *secs += iv.seconds(),
                None => exposure.push((sp, iv.seconds())),
            }
        }
        chunk.finish();
        sink(ChunkOutput {
            records: &chunk.records,
            exposure: &exposure,
            duration: (to - from) as f64 * 1e-12,
        })?;
        k += 1;
    }
    Ok(())
}

/// Runs the scenario and keeps every record, split by channel.
pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput, SimError> {
    let started = Instant::now();
    let mut streams: BTreeMap<Channel, Vec<DetectionRecord>> =
        Channel::ALL.iter().map(|&c| (c, Vec::new())).collect();
    simulate(cfg, |chunk| {
        for r in chunk.records {
            streams.get_mut(&r.channel).expect("all channels present").push(*r);
        }
        Ok(())
    })?;
    let counts = streams
        .iter()
        .map(|(c, v)| (c.as_str().to_string(), v.len() as u64))
        .collect();
    let manifest = RunManifest::new(cfg, counts, started.elapsed().as_secs_f64());
    Ok(RunOutput { streams, manifest })
}

/// Runs the scenario straight into an analysis accumulator without keeping
/// the records.
pub fn run_analysis(cfg: &ScenarioConfig) -> Result<RunAnalysis, SimError> {
    let mut acc = RunAnalysis::new(analysis_layout(cfg)?);
    simulate(cfg, |chunk| {
        acc.ingest(chunk.records);
        for &(sp, secs) in chunk.exposure {
            acc.add_exposure(sp, secs);
        }
        acc.add_duration(chunk.duration);
        Ok(())
    })?;
    Ok(acc)
}
