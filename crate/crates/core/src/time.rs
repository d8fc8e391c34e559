//! Virtual study clock.
//!
//! All engine time is expressed as milliseconds since the study epoch, which
//! is midnight at the start of day 0 (a Monday). Nothing in the crate reads
//! the wall clock except [`crate::vad::measure_frame_latency`].

use std::fmt;

use serde::{Deserialize, Serialize};

pub const MS_PER_SECOND: u64 = 1_000;
pub const MS_PER_MINUTE: u64 = 60 * MS_PER_SECOND;
pub const MS_PER_HOUR: u64 = 60 * MS_PER_MINUTE;
pub const MS_PER_DAY: u64 = 24 * MS_PER_HOUR;

/// A point on the virtual clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_ms(ms: u64) -> Self {
        SimTime(ms)
    }

    pub fn from_secs(s: u64) -> Self {
        SimTime(s * MS_PER_SECOND)
    }

    pub fn from_minutes(m: u64) -> Self {
        SimTime(m * MS_PER_MINUTE)
    }

    /// Time of `hour:minute:second` on study day `day`.
    pub fn at(day: u32, hour: u32, minute: u32, second: u32) -> Self {
        SimTime(
            day as u64 * MS_PER_DAY
                + hour as u64 * MS_PER_HOUR
                + minute as u64 * MS_PER_MINUTE
                + second as u64 * MS_PER_SECOND,
        )
    }

    pub fn as_ms(self) -> u64 {
        self.0
    }

    pub fn day(self) -> u32 {
        (self.0 / MS_PER_DAY) as u32
    }

    pub fn hour_of_day(self) -> u32 {
        ((self.0 % MS_PER_DAY) / MS_PER_HOUR) as u32
    }

    pub fn minute_of_hour(self) -> u32 {
        ((self.0 % MS_PER_HOUR) / MS_PER_MINUTE) as u32
    }

    pub fn second_of_minute(self) -> u32 {
        ((self.0 % MS_PER_MINUTE) / MS_PER_SECOND) as u32
    }

    /// Milliseconds elapsed since the start of the enclosing hour.
    pub fn offset_in_hour(self) -> u64 {
        self.0 % MS_PER_HOUR
    }

    pub fn hour_floor(self) -> SimTime {
        SimTime(self.0 - self.0 % MS_PER_HOUR)
    }

    pub fn day_floor(self) -> SimTime {
        SimTime(self.0 - self.0 % MS_PER_DAY)
    }

    /// Days 5 and 6 of every study week are the weekend.
    pub fn is_weekend(self) -> bool {
        is_weekend_day(self.day())
    }

    pub fn plus(self, d: Duration) -> SimTime {
        SimTime(self.0 + d.0)
    }

    pub fn saturating_sub(self, other: SimTime) -> Duration {
        Duration(self.0.saturating_sub(other.0))
    }
}

pub fn is_weekend_day(day: u32) -> bool {
    day % 7 >= 5
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ms = self.0 % MS_PER_SECOND;
        write!(
            f,
            "d{}T{:02}:{:02}:{:02}",
            self.day(),
            self.hour_of_day(),
            self.minute_of_hour(),
            self.second_of_minute()
        )?;
        if ms != 0 {
            write!(f, ".{:03}", ms)?;
        }
        Ok(())
    }
}

/// A span of virtual time in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Duration(pub u64);

impl Duration {
    pub fn from_ms(ms: u64) -> Self {
        Duration(ms)
    }

    pub fn from_secs(s: u64) -> Self {
        Duration(s * MS_PER_SECOND)
    }

    pub fn from_minutes(m: u64) -> Self {
        Duration(m * MS_PER_MINUTE)
    }

    pub fn as_ms(self) -> u64 {
        self.0
    }

    pub fn as_minutes_f64(self) -> f64 {
        self.0 as f64 / MS_PER_MINUTE as f64
    }
}

/// Half-open interval `[start, end)` on the virtual clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: SimTime,
    pub end: SimTime,
}

impl Span {
    pub fn new(start: SimTime, end: SimTime) -> Self {
        Span { start, end }
    }

    pub fn contains(&self, t: SimTime) -> bool {
        self.start <= t && t < self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}
