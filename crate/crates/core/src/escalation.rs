//! Availability windows, expected self-report counts and the daily
//! adherence checks.
//!
//! Thresholds are compared in integer arithmetic: a period passes when at
//! least 60% of its expected self-reports were completed, and the day
//! escalates when fewer than 30% of all expected ones were.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::is_weekend_day;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EscalationError {
    #[error("invalid window {name}: {msg}")]
    InvalidWindow { name: &'static str, msg: String },
    #[error("completed {completed} exceeds expected {expected}")]
    CountOrder { completed: u32, expected: u32 },
}

/// Whole hours `[start, end)`; `start == end` is an empty window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HourRange {
    pub start: u32,
    pub end: u32,
}

impl HourRange {
    pub const EMPTY: HourRange = HourRange { start: 0, end: 0 };

    pub fn new(start: u32, end: u32) -> Self {
        HourRange { start, end }
    }

    pub fn len(&self) -> u32 {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, hour: u32) -> bool {
        hour >= self.start && hour < self.end
    }

    fn check(&self, name: &'static str, lo: u32, hi: u32) -> Result<(), EscalationError> {
        if self.is_empty() {
            return Ok(());
        }
        if self.start > self.end || self.start < lo || self.end > hi {
            return Err(EscalationError::InvalidWindow {
                name,
                msg: format!("{:02}-{:02} not within {lo:02}-{hi:02}", self.start, self.end),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayWindows {
    pub morning: HourRange,
    pub evening: HourRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AvailabilityWindows {
    pub weekday: DayWindows,
    pub weekend: DayWindows,
}

impl Default for AvailabilityWindows {
    fn default() -> Self {
        AvailabilityWindows {
            weekday: DayWindows {
                morning: HourRange::new(7, 10),
                evening: HourRange::new(17, 22),
            },
            weekend: DayWindows {
                morning: HourRange::new(8, 11),
                evening: HourRange::new(16, 20),
            },
        }
    }
}

impl AvailabilityWindows {
    pub fn validate(&self) -> Result<(), EscalationError> {
        self.weekday.morning.check("weekday.morning", 4, 11)?;
        self.weekday.evening.check("weekday.evening", 16, 23)?;
        self.weekend.morning.check("weekend.morning", 4, 11)?;
        self.weekend.evening.check("weekend.evening", 16, 23)?;
        Ok(())
    }

    pub fn for_day(&self, day: u32) -> &DayWindows {
        if is_weekend_day(day) {
            &self.weekend
        } else {
            &self.weekday
        }
    }

    pub fn is_available(&self, day: u32, hour: u32) -> bool {
        let w = self.for_day(day);
        w.morning.contains(hour) || w.evening.contains(hour)
    }

    /// Available hours of a day, ascending.
    pub fn hours(&self, day: u32) -> Vec<u32> {
        let w = self.for_day(day);
        let set: BTreeSet<u32> = (w.morning.start..w.morning.end).chain(w.evening.start..w.evening.end).collect();
        set.into_iter().collect()
    }

    /// Available hours over `days` consecutive study days as (day, hour).
    pub fn study_hours(&self, days: u32) -> Vec<(u32, u32)> {
        (0..days).flat_map(|d| self.hours(d).into_iter().map(move |h| (d, h))).collect()
    }
}

/// Expected (morning, evening) self-reports: one per available hour.
pub fn expected_counts(windows: &AvailabilityWindows, day: u32) -> (u32, u32) {
    let w = windows.for_day(day);
    (w.morning.len(), w.evening.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DayStats {
    pub expected_morning: u32,
    pub completed_morning: u32,
    pub expected_evening: u32,
    pub completed_evening: u32,
    pub diary_completed: bool,
}

impl DayStats {
    pub fn validate(&self) -> Result<(), EscalationError> {
        for (completed, expected) in [
            (self.completed_morning, self.expected_morning),
            (self.completed_evening, self.expected_evening),
        ] {
            if completed > expected {
                return Err(EscalationError::CountOrder { completed, expected });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EscalationAction {
    ReminderSmsMorningCheck,
    ReminderSmsEveningCheck,
    ParticipantSms,
    SupervisorEmail,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EscalationDecision {
    pub actions: BTreeSet<EscalationAction>,
}

impl EscalationDecision {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn of(actions: &[EscalationAction]) -> Self {
        EscalationDecision {
            actions: actions.iter().copied().collect(),
        }
    }

    pub fn contains(&self, a: EscalationAction) -> bool {
        self.actions.contains(&a)
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// `completed / expected < 60%`, false when nothing was expected.
fn below_sixty(completed: u32, expected: u32) -> bool {
    expected > 0 && 10 * completed < 6 * expected
}

/// `completed / expected < 30%`, false when nothing was expected.
fn below_thirty(completed: u32, expected: u32) -> bool {
    expected > 0 && 10 * completed < 3 * expected
}

/// The 2 pm check on the morning period.
pub fn afternoon_check(stats: &DayStats) -> EscalationDecision {
    if below_sixty(stats.completed_morning, stats.expected_morning) {
        EscalationDecision::of(&[EscalationAction::ReminderSmsMorningCheck])
    } else {
        EscalationDecision::none()
    }
}

/// The check after the end-of-day diary was sent.
pub fn end_of_day_check(stats: &DayStats) -> EscalationDecision {
    let mut d = EscalationDecision::none();
    if below_sixty(stats.completed_evening, stats.expected_evening) {
        d.actions.insert(EscalationAction::ReminderSmsEveningCheck);
    }
    let total_done = stats.completed_morning + stats.completed_evening;
    let total_expected = stats.expected_morning + stats.expected_evening;
    if !stats.diary_completed || below_thirty(total_done, total_expected) {
        d.actions.insert(EscalationAction::ParticipantSms);
        d.actions.insert(EscalationAction::SupervisorEmail);
    }
    d
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EscalationRecord {
    pub day: u32,
    pub check: String,
    pub actions: Vec<EscalationAction>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use EscalationAction::*;

    fn stats(em: u32, cm: u32, ee: u32, ce: u32, diary: bool) -> DayStats {
        DayStats {
            expected_morning: em,
            completed_morning: cm,
            expected_evening: ee,
            completed_evening: ce,
            diary_completed: diary,
        }
    }

    #[test]
    fn expected_count_examples() {
        let mut w = AvailabilityWindows::default();
        w.weekday = DayWindows {
            morning: HourRange::new(7, 11),
            evening: HourRange::new(17, 22),
        };
        assert_eq!(expected_counts(&w, 0), (4, 5));
        w.weekday.morning = HourRange::EMPTY;
        assert_eq!(expected_counts(&w, 0), (0, 5));
        w.weekend.morning = HourRange::new(6, 10);
        assert_eq!(expected_counts(&w, 5).0, 4);
        assert!(w.validate().is_ok());
    }

    #[test]
    fn default_windows_are_valid() {
        let w = AvailabilityWindows::default();
        w.validate().unwrap();
        assert_eq!(w.study_hours(7).len(), 5 * 8 + 2 * 7);
        assert_eq!(w.hours(0), vec![7, 8, 9, 17, 18, 19, 20, 21]);
    }

    #[test]
    fn window_bounds_rejected() {
        let mut w = AvailabilityWindows::default();
        w.weekday.morning = HourRange::new(3, 9);
        assert!(w.validate().is_err());
        w.weekday.morning = HourRange::new(7, 10);
        w.weekend.evening = HourRange::new(16, 24);
        assert!(w.validate().is_err());
    }

    #[test]
    fn afternoon_examples() {
        assert!(afternoon_check(&stats(5, 3, 0, 0, true)).is_empty());
        assert_eq!(afternoon_check(&stats(5, 2, 0, 0, true)), EscalationDecision::of(&[ReminderSmsMorningCheck]));
        assert!(afternoon_check(&stats(0, 0, 5, 0, true)).is_empty());
    }

    #[test]
    fn end_of_day_examples() {
        assert_eq!(
            end_of_day_check(&stats(4, 1, 5, 1, true)),
            EscalationDecision::of(&[ReminderSmsEveningCheck, ParticipantSms, SupervisorEmail])
        );
        assert_eq!(end_of_day_check(&stats(4, 4, 5, 5, false)), EscalationDecision::of(&[ParticipantSms, SupervisorEmail]));
        assert!(end_of_day_check(&stats(5, 3, 5, 3, true)).is_empty());
        // nothing expected: only the diary matters
        assert!(end_of_day_check(&stats(0, 0, 0, 0, true)).is_empty());
        assert!(!end_of_day_check(&stats(0, 0, 0, 0, false)).is_empty());
    }

    #[test]
    fn thirty_percent_is_strict() {
        // 3/10 is exactly 30%
        assert!(!end_of_day_check(&stats(5, 3, 5, 0, true)).contains(ParticipantSms));
        assert!(end_of_day_check(&stats(5, 2, 5, 0, true)).contains(ParticipantSms));
    }

    #[test]
    fn count_order_checked() {
        assert!(stats(2, 3, 0, 0, true).validate().is_err());
        assert!(stats(3, 3, 4, 0, true).validate().is_ok());
    }

    fn arb_stats() -> impl Strategy<Value = DayStats> {
        (0u32..12, 0u32..12, any::<bool>(), any::<(u32, u32)>()).prop_map(|(em, ee, diary, (a, b))| {
            stats(em, if em == 0 { 0 } else { a % (em + 1) }, ee, if ee == 0 { 0 } else { b % (ee + 1) }, diary)
        })
    }

    proptest! {
        #[test]
        fn more_completions_never_add_actions(s in arb_stats(), morning in any::<bool>()) {
            let mut more = s;
            if morning && s.completed_morning < s.expected_morning {
                more.completed_morning += 1;
            } else if s.completed_evening < s.expected_evening {
                more.completed_evening += 1;
            }
            for check in [afternoon_check, end_of_day_check] {
                let before = check(&s);
                let after = check(&more);
                prop_assert!(after.actions.is_subset(&before.actions));
            }
        }

        #[test]
        fn participant_and_supervisor_co_occur(s in arb_stats()) {
            let d = end_of_day_check(&s);
            prop_assert_eq!(d.contains(ParticipantSms), d.contains(SupervisorEmail));
            prop_assert_eq!(end_of_day_check(&s), d);
        }
    }
}
