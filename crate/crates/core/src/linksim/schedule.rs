use super::config::ScheduleModel;

/// Measurement fraction of the schedule: the lock-cycle measurement share
/// times the fraction of each preparation period the memories are ready.
pub fn duty_cycle(s: &ScheduleModel) -> f64 {
    let lock = s.t_meas / s.lock_cycle();
    let prep = if s.prep_period > 0.0 {
        1.0 - s.prep_duration / s.prep_period
    } else {
        1.0
    };
    lock * prep
}

/// A stretch of time in which sources and memories are measuring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interval {
    pub start_ps: u64,
    pub end_ps: u64,
    /// Index of the lock cycle the interval belongs to.
    pub slot: u64,
}

impl Interval {
    pub fn seconds(&self) -> f64 {
        (self.end_ps - self.start_ps) as f64 * 1e-12
    }
}

pub(crate) fn ps(seconds: f64) -> u64 {
    (seconds * 1e12).round() as u64
}

/// Measurement intervals inside `[from_ps, to_ps)`: the measurement part of
/// each lock cycle intersected with the ready part of each preparation
/// period. Both grids start at time zero.
pub fn open_intervals(s: &ScheduleModel, from_ps: u64, to_ps: u64) -> Vec<Interval> {
    let mut out = Vec::new();
    let period = ps(s.prep_period);
    let prep = ps(s.prep_duration);
    let lock = ps(s.lock_cycle());
    let meas_offset = ps(s.t_lock + s.t_phase);
    if period == 0 || lock == 0 || from_ps >= to_ps {
        return out;
    }
    let mut p = from_ps / period;
    while p * period < to_ps {
        let ready_start = (p * period + prep).max(from_ps);
        let ready_end = ((p + 1) * period).min(to_ps);
        if ready_start < ready_end {
            let mut m = ready_start / lock;
            while m * lock < ready_end {
                let a = (m * lock + meas_offset).max(ready_start);
                let b = ((m + 1) * lock).min(ready_end);
                if a < b {
                    out.push(Interval {
                        start_ps: a,
                        end_ps: b,
                        slot: m,
                    });
                }
                m += 1;
            }
        }
        p += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sched(t_lock: f64, t_phase: f64, t_meas: f64, prep: f64) -> ScheduleModel {
        ScheduleModel {
            t_lock,
            t_phase,
            t_meas,
            prep_period: 1.0,
            prep_duration: prep,
            pump_off_time: 20e-6,
            spdc_cycle: 100e-6,
            open_window: 6e-6,
            n_modes: 15,
        }
    }

    #[test]
    fn duty_cycle_values() {
        assert!((duty_cycle(&sched(10.5e-3, 0.0, 18e-3, 0.0)) - 18.0 / 28.5).abs() < 1e-12);
        assert!((duty_cycle(&sched(3e-3, 5e-3, 18e-3, 0.0)) - 18.0 / 26.0).abs() < 1e-12);
        assert!((duty_cycle(&sched(3e-3, 5e-3, 18e-3, 0.6)) - 0.4 * 18.0 / 26.0).abs() < 1e-12);
    }

    #[test]
    fn intervals_cover_the_duty_cycle() {
        let s = sched(3e-3, 5e-3, 18e-3, 0.6);
        let total: f64 = open_intervals(&s, 0, ps(10.0)).iter().map(|i| i.seconds()).sum();
        // the lock grid does not divide the preparation period, so allow edge effects
        assert!((total / 10.0 - duty_cycle(&s)).abs() < 0.01, "{total}");
        for w in open_intervals(&s, 0, ps(3.0)).windows(2) {
            assert!(w[0].end_ps <= w[1].start_ps);
        }
    }

    #[test]
    fn intervals_respect_bounds() {
        let s = sched(10.5e-3, 0.0, 18e-3, 0.0);
        let iv = open_intervals(&s, ps(0.01), ps(0.05));
        assert_eq!(iv[0].start_ps, ps(0.0105));
        assert_eq!(iv[0].end_ps, ps(0.0285));
        assert_eq!(iv.last().unwrap().end_ps, ps(0.05));
        assert!(open_intervals(&s, 5, 5).is_empty());
    }
}
