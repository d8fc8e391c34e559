//! Ground-truth couple behaviour, one second at a time, over the study's
//! availability hours.
//!
//! Co-location alternates between exponentially long together and apart
//! bouts. Each partner's speech is a two-state (talking/quiet) chain whose
//! long-run talking share depends on whether the couple is together and, if
//! so, whether the bout is a quiet one.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::scenario::Scenario;
use crate::transport::Partner;

pub const SPEAK_MALE: u8 = 1;
pub const SPEAK_FEMALE: u8 = 2;
pub const WORN: u8 = 4;
pub const TV: u8 = 8;

pub const SECONDS_PER_HOUR: usize = 3600;

/// Distance used while the watches lie next to each other off the wrist.
pub const TABLE_DISTANCE_M: f32 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourTrace {
    pub day: u32,
    pub hour: u32,
    pub distance_m: Vec<f32>,
    pub flags: Vec<u8>,
}

impl HourTrace {
    pub fn speaking(&self, s: usize, p: Partner) -> bool {
        self.flags[s] & speak_bit(p) != 0
    }

    pub fn worn(&self, s: usize) -> bool {
        self.flags[s] & WORN != 0
    }

    pub fn tv(&self, s: usize) -> bool {
        self.flags[s] & TV != 0
    }

    /// Whether `speaker` is heard on `listener`'s watch at second `s`.
    pub fn audible(&self, s: usize, listener: Partner, speaker: Partner, audible_m: f64) -> bool {
        self.worn(s) && self.speaking(s, speaker) && (listener == speaker || self.distance_m[s] as f64 <= audible_m)
    }

    /// Television audio reaches the watches when they are together or
    /// lying next to it.
    pub fn tv_audible(&self, s: usize, audible_m: f64) -> bool {
        self.tv(s) && (!self.worn(s) || self.distance_m[s] as f64 <= audible_m)
    }
}

pub fn speak_bit(p: Partner) -> u8 {
    match p {
        Partner::Male => SPEAK_MALE,
        Partner::Female => SPEAK_FEMALE,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupleTrace {
    pub couple: u32,
    pub hours: Vec<HourTrace>,
}

impl CoupleTrace {
    pub fn hour(&self, day: u32, hour: u32) -> Option<&HourTrace> {
        self.hours
            .binary_search_by_key(&(day, hour), |h| (h.day, h.hour))
            .ok()
            .map(|i| &self.hours[i])
    }

    pub fn speaking_seconds(&self, p: Partner) -> usize {
        self.hours
            .iter()
            .map(|h| (0..h.flags.len()).filter(|&s| h.speaking(s, p)).count())
            .sum()
    }
}

/// Two-state talk chain with long-run talking share `p` and mean spurt `len`.
struct TalkChain {
    talking: bool,
}

impl TalkChain {
    fn step<R: Rng>(&mut self, rng: &mut R, p: f64, spurt_s: f64) -> bool {
        if p <= 0.0 {
            self.talking = false;
        } else if p >= 1.0 {
            self.talking = true;
        } else {
            let end = (1.0 / spurt_s).min(1.0);
            let start = (p * end / (1.0 - p)).min(1.0);
            let u: f64 = rng.gen();
            self.talking = if self.talking { u >= end } else { u < start };
        }
        self.talking
    }
}

struct Bouts {
    together: bool,
    quiet: bool,
    distance: f32,
    remaining_s: f64,
}

fn together_share(s: &Scenario, avail_s: f64) -> (f64, f64) {
    let b = &s.behavior;
    let lt = b.together_bout_mean_min * 60.0;
    if b.bouts_per_day <= 0.0 {
        return (lt, f64::INFINITY);
    }
    let la = ((avail_s - b.bouts_per_day * lt) / b.bouts_per_day).max(60.0);
    (lt, la)
}

impl Bouts {
    fn begin<R: Rng>(&mut self, s: &Scenario, together: bool, lt: f64, la: f64, rng: &mut R) {
        let b = &s.behavior;
        self.together = together;
        if together {
            self.quiet = rng.gen::<f64>() < b.quiet_bout_fraction;
            let (lo, hi) = b.together_distance_m;
            self.distance = if hi > lo { rng.gen_range(lo..hi) as f32 } else { lo as f32 };
            self.remaining_s = Exp::new(1.0 / lt).unwrap().sample(rng);
        } else {
            self.quiet = false;
            self.distance = (b.apart_distance_m * (1.0 + rng.gen::<f64>())) as f32;
            self.remaining_s = if la.is_finite() {
                Exp::new(1.0 / la).unwrap().sample(rng)
            } else {
                f64::INFINITY
            };
        }
    }
}

/// Trace of one couple over every availability hour of the study.
pub fn generate_couple_trace<R: Rng>(s: &Scenario, couple: u32, rng: &mut R) -> CoupleTrace {
    let windows = s.windows_for(couple);
    let b = &s.behavior;
    let mut hours = Vec::new();
    let mut male = TalkChain { talking: false };
    let mut female = TalkChain { talking: false };
    for day in 0..s.days {
        let day_hours = windows.hours(day);
        if day_hours.is_empty() {
            continue;
        }
        let (lt, la) = together_share(s, day_hours.len() as f64 * 3600.0);
        let unworn: Option<(u32, u32)> = if rng.gen::<f64>() < b.unworn_prob_per_day {
            let first = day_hours[rng.gen_range(0..day_hours.len())];
            Some((first, first + rng.gen_range(1..=3)))
        } else {
            None
        };
        let mut bouts = Bouts {
            together: false,
            quiet: false,
            distance: 0.0,
            remaining_s: 0.0,
        };
        let mut prev_hour: Option<u32> = None;
        for &hour in &day_hours {
            if prev_hour != Some(hour.wrapping_sub(1)) {
                // new block: start from the stationary mix
                let p_together = if la.is_finite() { lt / (lt + la) } else { 0.0 };
                let t = rng.gen::<f64>() < p_together;
                bouts.begin(s, t, lt, la, rng);
            }
            prev_hour = Some(hour);
            let tv_span = if rng.gen::<f64>() < b.tv_prob_per_hour {
                let len = rng.gen_range(600..=2400);
                let start = rng.gen_range(0..SECONDS_PER_HOUR - 600);
                Some((start, start + len))
            } else {
                None
            };
            let off_wrist = unworn.is_some_and(|(a, z)| hour >= a && hour < z);
            let mut distance_m = Vec::with_capacity(SECONDS_PER_HOUR);
            let mut flags = Vec::with_capacity(SECONDS_PER_HOUR);
            for sec in 0..SECONDS_PER_HOUR {
                while bouts.remaining_s < 1.0 {
                    let carry = bouts.remaining_s;
                    let next = !bouts.together;
                    bouts.begin(s, next, lt, la, rng);
                    bouts.remaining_s += carry;
                }
                bouts.remaining_s -= 1.0;
                let p = if bouts.together && !bouts.quiet {
                    b.speech_prob_together
                } else {
                    b.speech_prob_apart
                };
                let mut f = 0u8;
                if male.step(rng, p, b.talk_spurt_mean_s) {
                    f |= SPEAK_MALE;
                }
                if female.step(rng, p, b.talk_spurt_mean_s) {
                    f |= SPEAK_FEMALE;
                }
                let tv_on = tv_span.is_some_and(|(a, z)| sec >= a && sec < z);
                if off_wrist {
                    f |= TV;
                    distance_m.push(TABLE_DISTANCE_M);
                } else {
                    f |= WORN;
                    if tv_on && bouts.together {
                        f |= TV;
                    }
                    distance_m.push(bouts.distance);
                }
                flags.push(f);
            }
            hours.push(HourTrace {
                day,
                hour,
                distance_m,
                flags,
            });
        }
    }
    CoupleTrace { couple, hours }
}
