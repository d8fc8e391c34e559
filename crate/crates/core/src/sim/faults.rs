//! Device and network fault schedules, drawn up front per couple.

use std::collections::BTreeSet;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::scenario::Scenario;
use crate::session::Role;
use crate::time::{Duration, SimTime, Span, MS_PER_HOUR, MS_PER_MINUTE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Crash {
    pub role: Role,
    pub at: SimTime,
    pub restart_ok: bool,
}

impl Crash {
    /// When the app runs again: the next second after a successful
    /// self-restart, otherwise the next hourly watchdog check (or never,
    /// within the day, without a watchdog).
    pub fn back_at(&self, watchdog: bool) -> SimTime {
        if self.restart_ok {
            self.at.plus(Duration::from_secs(1))
        } else if watchdog {
            self.at.hour_floor().plus(Duration::from_ms(MS_PER_HOUR))
        } else {
            self.at.day_floor().plus(Duration::from_ms(24 * MS_PER_HOUR))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FaultSchedule {
    pub never_powered: bool,
    /// (role, day) pairs on which the watch had no charge.
    pub dead_days: BTreeSet<(Role, u32)>,
    pub crashes: Vec<Crash>,
    /// Internet outages of the male and female partner's phone.
    pub outages: [Vec<Span>; 2],
    pub server_hangups: Vec<Span>,
}

impl FaultSchedule {
    pub fn watch_on(&self, role: Role, day: u32) -> bool {
        !self.never_powered && !self.dead_days.contains(&(role, day))
    }
}

fn merge(mut spans: Vec<Span>) -> Vec<Span> {
    spans.sort_by_key(|s| (s.start, s.end));
    let mut out: Vec<Span> = Vec::new();
    for s in spans {
        match out.last_mut() {
            Some(last) if s.start <= last.end => last.end = last.end.max(s.end),
            _ => out.push(s),
        }
    }
    out
}

pub fn apply_faults<R: Rng>(s: &Scenario, couple: u32, rng: &mut R) -> FaultSchedule {
    let f = &s.faults;
    let t = &s.transport;
    let windows = s.windows_for(couple);
    let mut out = FaultSchedule {
        never_powered: f.never_powered.contains(&couple),
        ..Default::default()
    };
    let outage_len = Exp::new(1.0 / t.outage_mean_min).unwrap();
    let mut outages: [Vec<Span>; 2] = [Vec::new(), Vec::new()];
    for day in 0..s.days {
        for role in [Role::Central, Role::Peripheral] {
            if rng.gen::<f64>() < f.charge_failure_prob {
                out.dead_days.insert((role, day));
            }
        }
        let hours = windows.hours(day);
        for &hour in &hours {
            let start = SimTime::at(day, hour, 0, 0);
            for role in [Role::Central, Role::Peripheral] {
                if rng.gen::<f64>() < f.crash_prob_per_hour {
                    let at = start.plus(Duration::from_secs(rng.gen_range(1..3599)));
                    let restart_ok = rng.gen::<f64>() < f.restart_success_prob;
                    out.crashes.push(Crash { role, at, restart_ok });
                }
            }
            for o in outages.iter_mut() {
                if rng.gen::<f64>() < t.outage_prob_per_hour {
                    let from = start.plus(Duration::from_secs(rng.gen_range(0..3600)));
                    let mins = outage_len.sample(rng).max(1.0);
                    o.push(Span::new(from, from.plus(Duration::from_ms((mins * MS_PER_MINUTE as f64) as u64))));
                }
            }
        }
        if !hours.is_empty() && rng.gen::<f64>() < t.server_hangup_prob_per_day {
            let hour = hours[rng.gen_range(0..hours.len())];
            let from = SimTime::at(day, hour, rng.gen_range(0..60), 0);
            out.server_hangups.push(Span::new(
                from,
                from.plus(Duration::from_minutes(t.server_restart_after_min)),
            ));
        }
    }
    out.crashes.sort_by_key(|c| (c.at, c.role == Role::Peripheral));
    out.outages = outages.map(merge);
    out.server_hangups = merge(out.server_hangups);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn crash_downtime() {
        let at = SimTime::at(1, 9, 10, 0);
        let ok = Crash {
            role: Role::Central,
            at,
            restart_ok: true,
        };
        assert_eq!(ok.back_at(true).saturating_sub(at), Duration::from_secs(1));
        let failed = Crash { restart_ok: false, ..ok };
        assert_eq!(failed.back_at(true), SimTime::at(1, 10, 0, 0));
        assert_eq!(failed.back_at(false), SimTime::at(2, 0, 0, 0));
    }

    #[test]
    fn never_powered_couple_is_off_every_day() {
        let s = Scenario::default();
        let f = apply_faults(&s, 7, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(f.never_powered);
        assert!((0..7).all(|d| !f.watch_on(Role::Central, d) && !f.watch_on(Role::Peripheral, d)));
    }

    #[test]
    fn outages_are_disjoint_and_sorted() {
        let mut s = Scenario::default();
        s.transport.outage_prob_per_hour = 0.5;
        let f = apply_faults(&s, 0, &mut ChaCha8Rng::seed_from_u64(2));
        for o in &f.outages {
            assert!(!o.is_empty());
            assert!(o.windows(2).all(|w| w[0].end < w[1].start));
        }
    }

    #[test]
    fn fault_free_scenario() {
        let mut s = Scenario::default();
        s.faults.charge_failure_prob = 0.0;
        s.faults.crash_prob_per_hour = 0.0;
        s.faults.never_powered.clear();
        s.transport.outage_prob_per_hour = 0.0;
        s.transport.server_hangup_prob_per_day = 0.0;
        let f = apply_faults(&s, 0, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(f, FaultSchedule::default());
    }
}
