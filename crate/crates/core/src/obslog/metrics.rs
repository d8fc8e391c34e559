//! Collection and conversation percentages.
//!
//! Percentages are rounded half-up to one decimal using integer arithmetic,
//! so 0.05 boundaries are exact. Undefined ratios (zero denominator) are
//! `None` and print as `n/a`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{HourlyLog, ObslogError, RecordingAnnotation, WatchLogs};
use crate::escalation::AvailabilityWindows;
use crate::session::RecordingKind;

/// `100 * num / den` rounded half-up to one decimal.
pub fn percent_half_up(num: u64, den: u64) -> Option<f64> {
    if den == 0 {
        return None;
    }
    let tenths = (2000 * num as u128 + den as u128) / (2 * den as u128);
    Some(tenths as f64 / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CollectionCounts {
    pub total_expected: u64,
    pub expected_app_running: u64,
    pub sensor_collected: u64,
    pub selfreport_triggered: u64,
    pub selfreport_started: u64,
    pub selfreport_completed: u64,
}

impl CollectionCounts {
    pub fn new(
        total_expected: u64,
        expected_app_running: u64,
        sensor_collected: u64,
        selfreport_triggered: u64,
        selfreport_started: u64,
        selfreport_completed: u64,
    ) -> Self {
        CollectionCounts {
            total_expected,
            expected_app_running,
            sensor_collected,
            selfreport_triggered,
            selfreport_started,
            selfreport_completed,
        }
    }

    pub fn validate(&self) -> Result<(), ObslogError> {
        let chain = [
            ("selfreport_completed", self.selfreport_completed, "selfreport_started", self.selfreport_started),
            ("selfreport_started", self.selfreport_started, "selfreport_triggered", self.selfreport_triggered),
            ("selfreport_triggered", self.selfreport_triggered, "expected_app_running", self.expected_app_running),
            ("sensor_collected", self.sensor_collected, "expected_app_running", self.expected_app_running),
            ("expected_app_running", self.expected_app_running, "total_expected", self.total_expected),
        ];
        for (a, x, b, y) in chain {
            if x > y {
                return Err(ObslogError::Counts(format!("{a} ({x}) exceeds {b} ({y})")));
            }
        }
        Ok(())
    }

    pub fn add(&mut self, o: &CollectionCounts) {
        self.total_expected += o.total_expected;
        self.expected_app_running += o.expected_app_running;
        self.sensor_collected += o.sensor_collected;
        self.selfreport_triggered += o.selfreport_triggered;
        self.selfreport_started += o.selfreport_started;
        self.selfreport_completed += o.selfreport_completed;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CollectionMetrics {
    pub collected_of_expected: Option<f64>,
    pub collected_of_running: Option<f64>,
    pub triggered_of_expected: Option<f64>,
    pub triggered_of_running: Option<f64>,
    pub started_of_triggered: Option<f64>,
    pub completed_of_triggered: Option<f64>,
}

impl CollectionMetrics {
    pub fn from_counts(c: &CollectionCounts) -> Self {
        CollectionMetrics {
            collected_of_expected: percent_half_up(c.sensor_collected, c.total_expected),
            collected_of_running: percent_half_up(c.sensor_collected, c.expected_app_running),
            triggered_of_expected: percent_half_up(c.selfreport_triggered, c.total_expected),
            triggered_of_running: percent_half_up(c.selfreport_triggered, c.expected_app_running),
            started_of_triggered: percent_half_up(c.selfreport_started, c.selfreport_triggered),
            completed_of_triggered: percent_half_up(c.selfreport_completed, c.selfreport_triggered),
        }
    }

    pub fn rows(&self) -> [(&'static str, Option<f64>); 6] {
        [
            ("Collected of total expected", self.collected_of_expected),
            ("Collected of expected with app running", self.collected_of_running),
            ("Self-reports triggered of total expected", self.triggered_of_expected),
            ("Self-reports triggered of expected with app running", self.triggered_of_running),
            ("Self-reports started of triggered", self.started_of_triggered),
            ("Self-reports completed of triggered", self.completed_of_triggered),
        ]
    }

    pub fn as_array(&self) -> [Option<f64>; 6] {
        self.rows().map(|(_, v)| v)
    }
}

/// All six percentages; fails on an invalid count chain or any zero
/// denominator.
pub fn collection_metrics(counts: &CollectionCounts) -> Result<CollectionMetrics, ObslogError> {
    counts.validate()?;
    let m = CollectionMetrics::from_counts(counts);
    if let Some((name, _)) = m.rows().iter().find(|(_, v)| v.is_none()) {
        return Err(ObslogError::UndefinedMetric(name.to_string()));
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct KindCounts {
    pub recordings: u64,
    pub speech: u64,
    pub conversation: u64,
    /// Recordings where at least one partner spoke; `None` when unknown.
    pub either_spoke: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConversationCounts {
    pub triggered: KindCounts,
    pub backup: KindCounts,
}

impl ConversationCounts {
    pub fn from_annotations(rows: &[RecordingAnnotation]) -> Self {
        let mut c = ConversationCounts {
            triggered: KindCounts {
                either_spoke: Some(0),
                ..Default::default()
            },
            backup: KindCounts {
                either_spoke: Some(0),
                ..Default::default()
            },
        };
        for r in rows {
            let k = match r.kind {
                RecordingKind::Triggered => &mut c.triggered,
                RecordingKind::Backup => &mut c.backup,
            };
            k.recordings += 1;
            k.speech += r.has_speech as u64;
            k.conversation += r.conversation as u64;
            if r.male_spoke || r.female_spoke {
                *k.either_spoke.as_mut().expect("set above") += 1;
            }
        }
        c
    }

    pub fn total(&self) -> u64 {
        self.triggered.recordings + self.backup.recordings
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConversationMetrics {
    pub speech_overall: Option<f64>,
    pub speech_triggered: Option<f64>,
    pub speech_backup: Option<f64>,
    pub conversation_overall: Option<f64>,
    pub conversation_triggered: Option<f64>,
    pub either_spoke_triggered: Option<f64>,
    pub conversation_backup: Option<f64>,
}

impl ConversationMetrics {
    pub fn from_counts(c: &ConversationCounts) -> Self {
        let (t, b) = (&c.triggered, &c.backup);
        ConversationMetrics {
            speech_overall: percent_half_up(t.speech + b.speech, c.total()),
            speech_triggered: percent_half_up(t.speech, t.recordings),
            speech_backup: percent_half_up(b.speech, b.recordings),
            conversation_overall: percent_half_up(t.conversation + b.conversation, c.total()),
            conversation_triggered: percent_half_up(t.conversation, t.recordings),
            either_spoke_triggered: t.either_spoke.and_then(|n| percent_half_up(n, t.recordings)),
            conversation_backup: percent_half_up(b.conversation, b.recordings),
        }
    }

    pub fn rows(&self) -> [(&'static str, Option<f64>); 7] {
        [
            ("Recordings with speech", self.speech_overall),
            ("Triggered recordings with speech", self.speech_triggered),
            ("Backup recordings with speech", self.speech_backup),
            ("Recordings with conversation", self.conversation_overall),
            ("Triggered recordings with conversation", self.conversation_triggered),
            ("Triggered recordings where a partner spoke", self.either_spoke_triggered),
            ("Backup recordings with conversation", self.conversation_backup),
        ]
    }

    pub fn as_array(&self) -> [Option<f64>; 7] {
        self.rows().map(|(_, v)| v)
    }
}

/// Conversation percentages of a nonempty annotation list. Percentages for
/// a kind with no recordings are `None`.
pub fn conversation_metrics(rows: &[RecordingAnnotation]) -> Result<ConversationMetrics, ObslogError> {
    if rows.is_empty() {
        return Err(ObslogError::UndefinedMetric("no annotated recordings".into()));
    }
    Ok(ConversationMetrics::from_counts(&ConversationCounts::from_annotations(rows)))
}

/// Availability hours of the study that have an hourly log.
pub fn app_running_hours(logs: &[HourlyLog], windows: &AvailabilityWindows, days: u32) -> u64 {
    let present: BTreeSet<(u32, u32)> = logs.iter().map(|h| h.covered_slot()).collect();
    windows.study_hours(days).into_iter().filter(|s| present.contains(s)).count() as u64
}

/// Per-watch counts: every availability hour of every configured watch is
/// expected; an hour counts as collected when it kept a recording and as
/// triggered/started/completed when the handshake reached that stage.
pub fn collection_counts(watches: &[WatchLogs]) -> CollectionCounts {
    let mut total = CollectionCounts::default();
    for w in watches {
        let Some(cfg) = &w.config else { continue };
        let slots: BTreeSet<(u32, u32)> = cfg.windows.study_hours(cfg.days).into_iter().collect();
        let in_window: Vec<&HourlyLog> = w.hourly.iter().filter(|h| slots.contains(&h.covered_slot())).collect();
        let c = CollectionCounts {
            total_expected: slots.len() as u64,
            expected_app_running: app_running_hours(&w.hourly, &cfg.windows, cfg.days),
            sensor_collected: in_window.iter().filter(|h| h.retained_start.is_some()).count() as u64,
            selfreport_triggered: in_window.iter().filter(|h| !h.selfreport_alert1.is_empty()).count() as u64,
            selfreport_started: in_window.iter().filter(|h| !h.selfreport_started.is_empty()).count() as u64,
            selfreport_completed: in_window.iter().filter(|h| !h.selfreport_completed.is_empty()).count() as u64,
        };
        total.add(&c);
    }
    total
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StudyMetrics {
    pub counts: CollectionCounts,
    pub collection: CollectionMetrics,
    pub conversation_counts: ConversationCounts,
    pub conversation: ConversationMetrics,
}

impl StudyMetrics {
    pub fn compute(watches: &[WatchLogs], annotations: &[RecordingAnnotation]) -> Result<Self, ObslogError> {
        let counts = collection_counts(watches);
        counts.validate()?;
        let conversation_counts = ConversationCounts::from_annotations(annotations);
        Ok(StudyMetrics {
            counts,
            collection: CollectionMetrics::from_counts(&counts),
            conversation_counts,
            conversation: ConversationMetrics::from_counts(&conversation_counts),
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let c = &self.counts;
        let _ = writeln!(s, "Data collection");
        let _ = writeln!(s, "  {:<52} {:>8}", "Total expected", c.total_expected);
        let _ = writeln!(s, "  {:<52} {:>8}", "Expected with app running", c.expected_app_running);
        let _ = writeln!(s, "  {:<52} {:>8}", "Sensor data collected", c.sensor_collected);
        let _ = writeln!(s, "  {:<52} {:>8}", "Self-reports triggered", c.selfreport_triggered);
        let _ = writeln!(s, "  {:<52} {:>8}", "Self-reports started", c.selfreport_started);
        let _ = writeln!(s, "  {:<52} {:>8}", "Self-reports completed", c.selfreport_completed);
        let _ = writeln!(s);
        let _ = writeln!(s, "Collection rates (%)");
        for (label, v) in self.collection.rows() {
            let _ = writeln!(s, "  {label:<52} {:>8}", fmt_pct(v));
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "Recording content (%)");
        for (label, v) in self.conversation.rows() {
            let _ = writeln!(s, "  {label:<52} {:>8}", fmt_pct(v));
        }
        s
    }
}

pub fn fmt_pct(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.1}"),
        None => "n/a".to_string(),
    }
}
