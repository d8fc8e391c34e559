//! Per-hour trigger state machine for one watch.
//!
//! The central watch scans for its partner, connects when the signal is
//! strong enough, runs voice activity detection and starts a 5-minute
//! recording on the first speech second (on both watches). After a
//! recording the wearer is asked for a self-report; two vibration alerts
//! two minutes apart are given and the audio is deleted when neither is
//! answered. If nothing has been collected by the backup minute a backup
//! recording is started instead. Recording starts are at least `min_gap`
//! apart and only the last recording of an hour is kept.
//!
//! The peripheral watch runs the same machine in a reduced role: its
//! "proximity" is the central connecting to it and its "speech" is the
//! central's start-recording message.
//!
//! [`advance`] is pure. Callers own the clock and deliver timers back as
//! [`SessionEvent::TimerFired`] at the scheduled time.

pub mod trace;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::{Duration, SimTime, MS_PER_HOUR, MS_PER_MINUTE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error("invalid transition: {event:?} in state {phase}")]
    InvalidTransition { phase: String, event: SessionEvent },
    #[error("event at {now} precedes session clock {clock}")]
    ClockRegression { now: SimTime, clock: SimTime },
    #[error("invalid timing config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingConfig {
    pub record_duration: Duration,
    pub first_alert_wait: Duration,
    pub second_alert_wait: Duration,
    pub min_gap: Duration,
    pub backup_minute: u32,
    /// Phone-side survey expiry after the alert.
    pub selfreport_expiry: Duration,
    /// Phone-side expiry of the end-of-day diary.
    pub eod_expiry: Duration,
    /// When false, a recording whose audio was deleted after an unanswered
    /// self-report no longer anchors the minimum gap.
    pub gap_after_failed_handshake: bool,
}

impl Default for TimingConfig {
    fn default() -> Self {
        TimingConfig {
            record_duration: Duration::from_minutes(5),
            first_alert_wait: Duration::from_minutes(2),
            second_alert_wait: Duration::from_minutes(2),
            min_gap: Duration::from_minutes(20),
            backup_minute: 44,
            selfreport_expiry: Duration::from_minutes(4),
            eod_expiry: Duration::from_minutes(45),
            gap_after_failed_handshake: true,
        }
    }
}

impl TimingConfig {
    pub fn validate(&self) -> Result<(), SessionError> {
        let positive = [
            ("record_duration", self.record_duration),
            ("first_alert_wait", self.first_alert_wait),
            ("second_alert_wait", self.second_alert_wait),
            ("min_gap", self.min_gap),
            ("selfreport_expiry", self.selfreport_expiry),
            ("eod_expiry", self.eod_expiry),
        ];
        for (name, d) in positive {
            if d.as_ms() == 0 {
                return Err(SessionError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if self.backup_offset().as_ms() + self.record_duration.as_ms() > MS_PER_HOUR {
            return Err(SessionError::InvalidConfig(format!(
                "backup at minute {} plus recording does not fit in the hour",
                self.backup_minute
            )));
        }
        Ok(())
    }

    pub fn backup_offset(&self) -> Duration {
        Duration::from_ms(self.backup_minute as u64 * MS_PER_MINUTE)
    }

    /// Latest offset into the hour at which a recording can still finish
    /// inside the hour.
    pub fn latest_start_offset(&self) -> Duration {
        Duration::from_ms(MS_PER_HOUR.saturating_sub(self.record_duration.as_ms()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    Central,
    Peripheral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordingKind {
    Triggered,
    Backup,
}

impl fmt::Display for RecordingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecordingKind::Triggered => "triggered",
            RecordingKind::Backup => "backup",
        })
    }
}

/// Kind of a recording judged from its start time alone: anything starting
/// at or after the backup minute is a backup.
pub fn classify_kind(start: SimTime, backup_minute: u32) -> RecordingKind {
    if start.minute_of_hour() >= backup_minute {
        RecordingKind::Backup
    } else {
        RecordingKind::Triggered
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SelfReportStatus {
    NotTriggered,
    Triggered,
    Started,
    Completed,
    Expired,
}

impl SelfReportStatus {
    pub fn answered(self) -> bool {
        matches!(self, SelfReportStatus::Started | SelfReportStatus::Completed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordingRecord {
    pub start: SimTime,
    pub end: SimTime,
    pub kind: RecordingKind,
    pub retained: bool,
    pub selfreport: SelfReportStatus,
    pub audio_deleted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TimerKind {
    Backup,
    SecondAlert,
    Expiry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimerId {
    pub kind: TimerKind,
    pub serial: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Idle,
    Scanning,
    Connected,
    Recording {
        kind: RecordingKind,
        started_at: SimTime,
    },
    AwaitingSelfReport {
        alerts_sent: u8,
        deadline: SimTime,
        timer: TimerId,
    },
    HourDone,
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::Idle => "Idle",
            Phase::Scanning => "Scanning",
            Phase::Connected => "Connected",
            Phase::Recording { .. } => "Recording",
            Phase::AwaitingSelfReport { .. } => "AwaitingSelfReport",
            Phase::HourDone => "HourDone",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phase::Recording { kind, started_at } => write!(f, "Recording({kind}, {started_at})"),
            Phase::AwaitingSelfReport {
                alerts_sent, deadline, ..
            } => write!(f, "AwaitingSelfReport({alerts_sent}, {deadline})"),
            other => f.write_str(other.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SessionEvent {
    HourStart,
    ProximityMet,
    ConnectFailed,
    SpeechDetected,
    RecordingComplete,
    SelfReportStarted,
    SelfReportCompleted,
    TimerFired(TimerId),
    BackupTimeReached,
    HourEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    StartScan,
    StartAdvertise,
    ConnectPeer,
    StartVad,
    StartRecording,
    StartPeerRecording,
    Vibrate,
    SendRecordingDoneIntent,
    DeleteAudio { recording_start: SimTime },
    RetainAudio { recording_start: SimTime },
    ScheduleTimer { id: TimerId, at: SimTime },
    StartBackupRecording,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub role: Role,
    pub phase: Phase,
    pub clock: SimTime,
    pub hour_start: Option<SimTime>,
    /// Start of the most recent recording, across hours.
    pub last_recording_start: Option<SimTime>,
    /// Start that the minimum gap is measured from.
    pub gap_anchor: Option<SimTime>,
    pub recordings_this_hour: u32,
    pub records: Vec<RecordingRecord>,
    pub backup_timer: Option<(TimerId, SimTime)>,
    next_serial: u32,
}

impl SessionState {
    pub fn new(role: Role) -> Self {
        SessionState {
            role,
            phase: Phase::Idle,
            clock: SimTime::ZERO,
            hour_start: None,
            last_recording_start: None,
            gap_anchor: None,
            recordings_this_hour: 0,
            records: Vec::new(),
            backup_timer: None,
            next_serial: 0,
        }
    }

    fn timer(&mut self, kind: TimerKind) -> TimerId {
        self.next_serial += 1;
        TimerId {
            kind,
            serial: self.next_serial,
        }
    }

    pub fn in_hour(&self, now: SimTime) -> bool {
        matches!(self.hour_start, Some(h) if now >= h && now.as_ms() < h.as_ms() + MS_PER_HOUR)
    }

    fn hour_offset(&self, now: SimTime) -> Option<Duration> {
        self.hour_start.map(|h| now.saturating_sub(h))
    }

    pub fn has_answered_record(&self) -> bool {
        self.records.iter().any(|r| r.selfreport.answered())
    }

    /// State after an app crash and restart at `now`. Persisted fields
    /// (gap anchor, this hour's finished records) survive; an in-flight
    /// recording or self-report wait is abandoned and its audio deleted.
    /// The caller follows up with [`SessionEvent::HourStart`] when the
    /// restart happens inside an assigned hour.
    pub fn after_restart(&self, now: SimTime) -> (SessionState, Vec<Action>) {
        let mut s = self.clone();
        s.clock = s.clock.max(now);
        let mut actions = Vec::new();
        abandon_in_flight(&mut s, now, &mut actions);
        s.phase = Phase::Idle;
        s.backup_timer = None;
        (s, actions)
    }
}

fn abandon_in_flight(s: &mut SessionState, now: SimTime, actions: &mut Vec<Action>) {
    match s.phase {
        Phase::Recording { kind, started_at } => {
            s.records.push(RecordingRecord {
                start: started_at,
                end: now,
                kind,
                retained: false,
                selfreport: SelfReportStatus::NotTriggered,
                audio_deleted: true,
            });
            actions.push(Action::DeleteAudio {
                recording_start: started_at,
            });
        }
        Phase::AwaitingSelfReport { .. } => {
            if let Some(r) = s.records.last_mut() {
                r.selfreport = SelfReportStatus::Expired;
                r.audio_deleted = true;
                actions.push(Action::DeleteAudio {
                    recording_start: r.start,
                });
            }
        }
        _ => {}
    }
}

/// True iff there is no previous recording or `now` is at least `min_gap`
/// after it (inclusive).
pub fn eligible_to_start(now: SimTime, last_recording_start: Option<SimTime>, config: &TimingConfig) -> bool {
    match last_recording_start {
        None => true,
        Some(last) => now >= last && now.saturating_sub(last) >= config.min_gap,
    }
}

/// Whether a backup recording should be started now: past the backup
/// minute of the current hour, nothing answered this hour, and no recording
/// or self-report wait in progress.
pub fn backup_due(state: &SessionState, now: SimTime, config: &TimingConfig) -> bool {
    if !state.in_hour(now) {
        return false;
    }
    let Some(offset) = state.hour_offset(now) else {
        return false;
    };
    offset >= config.backup_offset()
        && !state.has_answered_record()
        && matches!(state.phase, Phase::Scanning | Phase::Connected)
}

fn can_trigger(s: &SessionState, now: SimTime, cfg: &TimingConfig) -> bool {
    s.in_hour(now)
        && s.hour_offset(now).is_some_and(|o| o < cfg.backup_offset())
        && eligible_to_start(now, s.gap_anchor, cfg)
}

/// Sets the retention flags of one hour's records: only the last record by
/// start time can be kept, and only if its self-report was answered.
pub fn retain(hour_records: &[RecordingRecord]) -> Vec<RecordingRecord> {
    let mut out: Vec<RecordingRecord> = hour_records.to_vec();
    let last = out
        .iter()
        .enumerate()
        .max_by_key(|(i, r)| (r.start, *i))
        .map(|(i, _)| i);
    for (i, r) in out.iter_mut().enumerate() {
        r.retained = Some(i) == last && r.selfreport.answered() && !r.audio_deleted;
    }
    out
}

fn idle_actions(role: Role) -> Action {
    match role {
        Role::Central => Action::StartScan,
        Role::Peripheral => Action::StartAdvertise,
    }
}

/// Schedules the backup timer at the earliest instant a backup could start,
/// if that instant still leaves room for a full recording in the hour.
fn arm_backup(s: &mut SessionState, now: SimTime, cfg: &TimingConfig, actions: &mut Vec<Action>) {
    let Some(hour) = s.hour_start else { return };
    let mut at = hour.plus(cfg.backup_offset()).max(now);
    if let Some(anchor) = s.gap_anchor {
        at = at.max(anchor.plus(cfg.min_gap));
    }
    if at.saturating_sub(hour) <= cfg.latest_start_offset() {
        let id = s.timer(TimerKind::Backup);
        s.backup_timer = Some((id, at));
        actions.push(Action::ScheduleTimer { id, at });
    }
}

fn start_recording(s: &mut SessionState, kind: RecordingKind, now: SimTime, actions: &mut Vec<Action>) {
    s.phase = Phase::Recording { kind, started_at: now };
    s.last_recording_start = Some(now);
    s.gap_anchor = Some(now);
    s.recordings_this_hour += 1;
    match kind {
        RecordingKind::Triggered => actions.push(Action::StartRecording),
        RecordingKind::Backup => actions.push(Action::StartBackupRecording),
    }
    if s.role == Role::Central {
        actions.push(Action::StartPeerRecording);
    }
}

fn on_backup_time(s: &mut SessionState, now: SimTime, cfg: &TimingConfig, actions: &mut Vec<Action>) {
    match s.backup_timer {
        Some((_, at)) if now >= at => s.backup_timer = None,
        // early or unarmed: stale
        _ => return,
    }
    if !backup_due(s, now, cfg) {
        return;
    }
    let fits = s.hour_offset(now).is_some_and(|o| o <= cfg.latest_start_offset());
    if eligible_to_start(now, s.gap_anchor, cfg) && fits {
        start_recording(s, RecordingKind::Backup, now, actions);
    } else {
        arm_backup(s, now, cfg, actions);
    }
}

fn close_hour(s: &mut SessionState, now: SimTime, actions: &mut Vec<Action>) {
    abandon_in_flight(s, now, actions);
    s.records = retain(&s.records);
    for r in s.records.iter_mut() {
        if r.retained {
            actions.push(Action::RetainAudio {
                recording_start: r.start,
            });
        } else if !r.audio_deleted {
            r.audio_deleted = true;
            actions.push(Action::DeleteAudio {
                recording_start: r.start,
            });
        }
    }
    s.phase = Phase::Idle;
    s.backup_timer = None;
}

/// One transition. Returns the next state and the ordered actions the
/// watch must perform. Late timers and backup triggers that no longer
/// apply are dropped silently; any other event the current phase cannot
/// accept is an error.
pub fn advance(
    state: &SessionState,
    event: SessionEvent,
    config: &TimingConfig,
    now: SimTime,
) -> Result<(SessionState, Vec<Action>), SessionError> {
    if now < state.clock {
        return Err(SessionError::ClockRegression {
            now,
            clock: state.clock,
        });
    }
    let invalid = || SessionError::InvalidTransition {
        phase: state.phase.to_string(),
        event,
    };
    let mut s = state.clone();
    s.clock = now;
    let mut actions = Vec::new();

    match (state.phase, event) {
        (_, SessionEvent::TimerFired(id)) if Some(id) == state.backup_timer.map(|(t, _)| t) => {
            on_backup_time(&mut s, now, config, &mut actions);
        }
        (_, SessionEvent::BackupTimeReached) => on_backup_time(&mut s, now, config, &mut actions),

        (Phase::Idle, SessionEvent::HourStart) => {
            let hour = now.hour_floor();
            if s.hour_start != Some(hour) {
                s.records.clear();
                s.recordings_this_hour = 0;
            }
            s.hour_start = Some(hour);
            if s.has_answered_record() {
                s.phase = Phase::HourDone;
            } else {
                s.phase = Phase::Scanning;
                actions.push(idle_actions(s.role));
                arm_backup(&mut s, now, config, &mut actions);
            }
        }

        (Phase::Scanning, SessionEvent::ProximityMet) => {
            if can_trigger(&s, now, config) {
                s.phase = Phase::Connected;
                if s.role == Role::Central {
                    actions.push(Action::ConnectPeer);
                    actions.push(Action::StartVad);
                }
            }
        }
        (Phase::Connected, SessionEvent::ConnectFailed) => {
            s.phase = Phase::Scanning;
            actions.push(idle_actions(s.role));
        }
        (Phase::Connected, SessionEvent::SpeechDetected) => {
            if can_trigger(&s, now, config) {
                start_recording(&mut s, RecordingKind::Triggered, now, &mut actions);
            }
        }

        (Phase::Recording { kind, started_at }, SessionEvent::RecordingComplete) => {
            let end = started_at.plus(config.record_duration);
            if now < end {
                return Err(invalid());
            }
            s.records.push(RecordingRecord {
                start: started_at,
                end,
                kind,
                retained: false,
                selfreport: SelfReportStatus::Triggered,
                audio_deleted: false,
            });
            let timer = s.timer(TimerKind::SecondAlert);
            let deadline = now.plus(config.first_alert_wait);
            s.phase = Phase::AwaitingSelfReport {
                alerts_sent: 1,
                deadline,
                timer,
            };
            actions.push(Action::Vibrate);
            actions.push(Action::SendRecordingDoneIntent);
            actions.push(Action::ScheduleTimer { id: timer, at: deadline });
        }

        (Phase::AwaitingSelfReport { .. }, SessionEvent::SelfReportStarted) => {
            let r = s.records.last_mut().expect("awaiting implies a record");
            r.selfreport = SelfReportStatus::Started;
            s.phase = Phase::HourDone;
        }
        (Phase::AwaitingSelfReport { .. }, SessionEvent::SelfReportCompleted) => {
            let r = s.records.last_mut().expect("awaiting implies a record");
            r.selfreport = SelfReportStatus::Completed;
            s.phase = Phase::HourDone;
        }
        (Phase::HourDone, SessionEvent::SelfReportCompleted) => {
            match s.records.iter_mut().rev().find(|r| r.selfreport == SelfReportStatus::Started) {
                Some(r) => r.selfreport = SelfReportStatus::Completed,
                None => return Err(invalid()),
            }
        }

        (
            Phase::AwaitingSelfReport {
                alerts_sent, timer, ..
            },
            SessionEvent::TimerFired(id),
        ) if id == timer => {
            if alerts_sent == 1 {
                let timer = s.timer(TimerKind::Expiry);
                let deadline = now.plus(config.second_alert_wait);
                s.phase = Phase::AwaitingSelfReport {
                    alerts_sent: 2,
                    deadline,
                    timer,
                };
                actions.push(Action::Vibrate);
                actions.push(Action::ScheduleTimer { id: timer, at: deadline });
            } else {
                let r = s.records.last_mut().expect("awaiting implies a record");
                r.selfreport = SelfReportStatus::Expired;
                r.audio_deleted = true;
                let start = r.start;
                actions.push(Action::DeleteAudio { recording_start: start });
                if !config.gap_after_failed_handshake {
                    // re-anchor on the last recording whose audio survived
                    s.gap_anchor = s.records.iter().rev().find(|r| !r.audio_deleted).map(|r| r.start);
                }
                s.phase = Phase::Scanning;
                if s.backup_timer.is_none() {
                    arm_backup(&mut s, now, config, &mut actions);
                }
            }
        }
        // stale timer
        (_, SessionEvent::TimerFired(_)) => {}

        (Phase::Idle, SessionEvent::HourEnd) => return Err(invalid()),
        (_, SessionEvent::HourEnd) => close_hour(&mut s, now, &mut actions),

        _ => return Err(invalid()),
    }
    Ok((s, actions))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> TimingConfig {
        TimingConfig::default()
    }

    fn t(min: u64) -> SimTime {
        // 10:00 on day 0
        SimTime::at(0, 10, 0, 0).plus(Duration::from_minutes(min))
    }

    fn step(s: &SessionState, e: SessionEvent, at: SimTime) -> (SessionState, Vec<Action>) {
        advance(s, e, &cfg(), at).unwrap()
    }

    fn started_hour(role: Role) -> SessionState {
        step(&SessionState::new(role), SessionEvent::HourStart, t(0)).0
    }

    #[test]
    fn hour_start_scans_and_arms_backup() {
        let (s, a) = step(&SessionState::new(Role::Central), SessionEvent::HourStart, t(0));
        assert_eq!(s.phase, Phase::Scanning);
        assert_eq!(a[0], Action::StartScan);
        assert!(matches!(a[1], Action::ScheduleTimer { id, at } if id.kind == TimerKind::Backup && at == t(44)));

        let (p, a) = step(&SessionState::new(Role::Peripheral), SessionEvent::HourStart, t(0));
        assert_eq!(p.phase, Phase::Scanning);
        assert_eq!(a[0], Action::StartAdvertise);
    }

    #[test]
    fn speech_while_connected_starts_both_watches() {
        let s = started_hour(Role::Central);
        let (s, a) = step(&s, SessionEvent::ProximityMet, t(5));
        assert_eq!(s.phase, Phase::Connected);
        assert_eq!(a, vec![Action::ConnectPeer, Action::StartVad]);
        let (s, a) = step(&s, SessionEvent::SpeechDetected, t(6));
        assert_eq!(
            s.phase,
            Phase::Recording {
                kind: RecordingKind::Triggered,
                started_at: t(6)
            }
        );
        assert_eq!(a, vec![Action::StartRecording, Action::StartPeerRecording]);
    }

    #[test]
    fn peripheral_does_not_forward_start() {
        let s = started_hour(Role::Peripheral);
        let (s, a) = step(&s, SessionEvent::ProximityMet, t(5));
        assert!(a.is_empty());
        let (_, a) = step(&s, SessionEvent::SpeechDetected, t(5));
        assert_eq!(a, vec![Action::StartRecording]);
    }

    fn record_at(min: u64) -> SessionState {
        let s = started_hour(Role::Central);
        let (s, _) = step(&s, SessionEvent::ProximityMet, t(min));
        let (s, _) = step(&s, SessionEvent::SpeechDetected, t(min));
        step(&s, SessionEvent::RecordingComplete, t(min + 5)).0
    }

    fn awaiting_timer(s: &SessionState) -> TimerId {
        match s.phase {
            Phase::AwaitingSelfReport { timer, .. } => timer,
            other => panic!("{other}"),
        }
    }

    #[test]
    fn unanswered_self_report_deletes_audio() {
        let s = record_at(5);
        assert_eq!(s.records.len(), 1);
        let id = awaiting_timer(&s);
        let (s, a) = step(&s, SessionEvent::TimerFired(id), t(12));
        assert_eq!(a[0], Action::Vibrate);
        let id = awaiting_timer(&s);
        let (s, a) = step(&s, SessionEvent::TimerFired(id), t(14));
        assert_eq!(s.phase, Phase::Scanning);
        assert_eq!(a, vec![Action::DeleteAudio { recording_start: t(5) }]);
        assert_eq!(s.records[0].selfreport, SelfReportStatus::Expired);
    }

    #[test]
    fn answered_self_report_finishes_hour() {
        let s = record_at(5);
        let (s, a) = step(&s, SessionEvent::SelfReportStarted, t(11));
        assert!(a.is_empty());
        assert_eq!(s.phase, Phase::HourDone);
        let (s, _) = step(&s, SessionEvent::SelfReportCompleted, t(15));
        assert_eq!(s.records[0].selfreport, SelfReportStatus::Completed);
        // backup timer at 44 is now a no-op
        let (id, at) = s.backup_timer.unwrap();
        let (s, a) = step(&s, SessionEvent::TimerFired(id), at);
        assert!(a.is_empty());
        let (s, a) = step(&s, SessionEvent::HourEnd, t(60));
        assert_eq!(a, vec![Action::RetainAudio { recording_start: t(5) }]);
        assert!(s.records[0].retained);
        assert_eq!(s.phase, Phase::Idle);
    }

    #[test]
    fn min_gap_blocks_second_trigger() {
        let s = record_at(5);
        let id = awaiting_timer(&s);
        let (s, _) = step(&s, SessionEvent::TimerFired(id), t(12));
        let id = awaiting_timer(&s);
        let (s, _) = step(&s, SessionEvent::TimerFired(id), t(14));
        // 10:05 + 20 min = 10:25
        let (s2, a) = step(&s, SessionEvent::ProximityMet, t(24));
        assert_eq!(s2.phase, Phase::Scanning);
        assert!(a.is_empty());
        let (s3, _) = step(&s2, SessionEvent::ProximityMet, t(25));
        assert_eq!(s3.phase, Phase::Connected);
    }

    #[test]
    fn no_trigger_after_backup_minute() {
        let s = started_hour(Role::Central);
        let (s, _) = step(&s, SessionEvent::ProximityMet, t(40));
        let (s, a) = step(&s, SessionEvent::SpeechDetected, t(44));
        assert!(a.is_empty());
        assert_eq!(s.phase, Phase::Connected);
    }

    #[test]
    fn backup_fires_at_minute_44() {
        let s = started_hour(Role::Central);
        let (id, at) = s.backup_timer.unwrap();
        assert_eq!(at, t(44));
        let (s, a) = step(&s, SessionEvent::TimerFired(id), at);
        assert_eq!(a, vec![Action::StartBackupRecording, Action::StartPeerRecording]);
        assert!(matches!(s.phase, Phase::Recording { kind: RecordingKind::Backup, .. }));
    }

    #[test]
    fn early_backup_trigger_is_stale() {
        let s = started_hour(Role::Central);
        let (s2, a) = step(&s, SessionEvent::BackupTimeReached, t(30));
        assert!(a.is_empty());
        assert_eq!(s2.backup_timer, s.backup_timer);
    }

    #[test]
    fn backup_rearmed_after_late_failed_handshake() {
        // recording 38-43, second alert 45, expiry 47
        let s = record_at(38);
        let (id, at) = s.backup_timer.unwrap();
        let (s, a) = step(&s, SessionEvent::TimerFired(id), at);
        assert!(a.is_empty(), "awaiting: backup not due");
        assert!(s.backup_timer.is_none());
        let id = awaiting_timer(&s);
        let (s, _) = step(&s, SessionEvent::TimerFired(id), t(45));
        let id = awaiting_timer(&s);
        let (s, a) = step(&s, SessionEvent::TimerFired(id), t(47));
        // gap from 38 -> 58 > 55, no room left
        assert_eq!(a, vec![Action::DeleteAudio { recording_start: t(38) }]);
        assert!(s.backup_timer.is_none());

        let s = record_at(30);
        let (id, _) = s.backup_timer.unwrap();
        let id2 = awaiting_timer(&s);
        let (s, _) = step(&s, SessionEvent::TimerFired(id2), t(37));
        let id2 = awaiting_timer(&s);
        let (s, _) = step(&s, SessionEvent::TimerFired(id2), t(39));
        let (s, a) = step(&s, SessionEvent::TimerFired(id), t(44));
        // gap from 30 holds until 50
        let (id, at) = s.backup_timer.unwrap();
        assert_eq!(a, vec![Action::ScheduleTimer { id, at: t(50) }]);
        let (s, a) = step(&s, SessionEvent::TimerFired(id), at);
        assert_eq!(a[0], Action::StartBackupRecording);
        assert!(matches!(s.phase, Phase::Recording { kind: RecordingKind::Backup, started_at } if started_at == t(50)));
    }

    #[test]
    fn eligibility_boundary() {
        let c = cfg();
        let last = Some(SimTime::at(0, 10, 5, 0));
        assert!(!eligible_to_start(SimTime::at(0, 10, 24, 0), last, &c));
        assert!(eligible_to_start(SimTime::at(0, 10, 25, 0), last, &c));
        assert!(eligible_to_start(SimTime::at(0, 10, 24, 0), None, &c));
    }

    #[test]
    fn backup_due_examples() {
        let c = cfg();
        let s = started_hour(Role::Central);
        assert!(backup_due(&s, t(44), &c));
        assert!(!backup_due(&s, t(43), &c));
        let mut done = s.clone();
        done.records.push(RecordingRecord {
            start: t(5),
            end: t(10),
            kind: RecordingKind::Triggered,
            retained: true,
            selfreport: SelfReportStatus::Completed,
            audio_deleted: false,
        });
        assert!(!backup_due(&done, t(50), &c));
    }

    fn rec(min: u64, status: SelfReportStatus) -> RecordingRecord {
        RecordingRecord {
            start: t(min),
            end: t(min + 5),
            kind: RecordingKind::Triggered,
            retained: false,
            selfreport: status,
            audio_deleted: status == SelfReportStatus::Expired,
        }
    }

    #[test]
    fn retention_keeps_only_the_last() {
        use SelfReportStatus::*;
        let out = retain(&[rec(1, Completed), rec(21, Completed), rec(41, Completed)]);
        assert_eq!(out.iter().map(|r| r.retained).collect::<Vec<_>>(), vec![false, false, true]);
        assert!(retain(&[]).is_empty());
        assert!(!retain(&[rec(1, Expired)])[0].retained);
        assert!(retain(&[rec(1, Started)])[0].retained);
    }

    #[test]
    fn kind_from_timestamp() {
        assert_eq!(classify_kind(SimTime::at(0, 16, 44, 0), 44), RecordingKind::Backup);
        assert_eq!(classify_kind(SimTime::at(0, 16, 43, 59), 44), RecordingKind::Triggered);
        assert_eq!(classify_kind(SimTime::at(0, 16, 5, 0), 44), RecordingKind::Triggered);
    }

    #[test]
    fn illegal_pairs_are_errors() {
        let idle = SessionState::new(Role::Central);
        for e in [
            SessionEvent::RecordingComplete,
            SessionEvent::ProximityMet,
            SessionEvent::SpeechDetected,
            SessionEvent::SelfReportStarted,
            SessionEvent::HourEnd,
        ] {
            assert!(matches!(advance(&idle, e, &cfg(), t(1)), Err(SessionError::InvalidTransition { .. })));
        }
        let s = started_hour(Role::Central);
        let (s, _) = step(&s, SessionEvent::ProximityMet, t(2));
        let (s, _) = step(&s, SessionEvent::SpeechDetected, t(2));
        assert!(advance(&s, SessionEvent::RecordingComplete, &cfg(), t(6)).is_err(), "early completion");
    }

    #[test]
    fn clock_cannot_run_backwards() {
        let s = started_hour(Role::Central);
        assert!(matches!(
            advance(&s, SessionEvent::ProximityMet, &cfg(), SimTime::at(0, 9, 0, 0)),
            Err(SessionError::ClockRegression { .. })
        ));
    }

    #[test]
    fn hour_end_expires_pending_handshake() {
        let s = started_hour(Role::Central);
        let (id, _) = s.backup_timer.unwrap();
        let (s, _) = step(&s, SessionEvent::TimerFired(id), t(55));
        let (s, _) = step(&s, SessionEvent::RecordingComplete, t(60));
        let (s, a) = step(&s, SessionEvent::HourEnd, t(60));
        assert_eq!(a, vec![Action::DeleteAudio { recording_start: t(55) }]);
        assert_eq!(s.records[0].kind, RecordingKind::Backup);
        assert_eq!(s.records[0].selfreport, SelfReportStatus::Expired);
        assert!(!s.records[0].retained);
    }

    #[test]
    fn restart_keeps_answered_records() {
        let s = record_at(5);
        let (s, _) = step(&s, SessionEvent::SelfReportStarted, t(11));
        let (r, a) = s.after_restart(t(20));
        assert!(a.is_empty());
        let (r, a) = step(&r, SessionEvent::HourStart, t(20));
        assert_eq!(r.phase, Phase::HourDone);
        assert!(a.is_empty());
        assert_eq!(r.records.len(), 1);

        let s = started_hour(Role::Central);
        let (s, _) = step(&s, SessionEvent::ProximityMet, t(2));
        let (s, _) = step(&s, SessionEvent::SpeechDetected, t(2));
        let (r, a) = s.after_restart(t(4));
        assert_eq!(a, vec![Action::DeleteAudio { recording_start: t(2) }]);
        assert_eq!(r.gap_anchor, Some(t(2)));
    }

    #[test]
    fn optional_gap_reset_after_failed_handshake() {
        let c = TimingConfig {
            gap_after_failed_handshake: false,
            ..cfg()
        };
        let s = started_hour(Role::Central);
        let (s, _) = advance(&s, SessionEvent::ProximityMet, &c, t(5)).unwrap();
        let (s, _) = advance(&s, SessionEvent::SpeechDetected, &c, t(5)).unwrap();
        let (s, _) = advance(&s, SessionEvent::RecordingComplete, &c, t(10)).unwrap();
        let id = awaiting_timer(&s);
        let (s, _) = advance(&s, SessionEvent::TimerFired(id), &c, t(12)).unwrap();
        let id = awaiting_timer(&s);
        let (s, _) = advance(&s, SessionEvent::TimerFired(id), &c, t(14)).unwrap();
        let (s, _) = advance(&s, SessionEvent::ProximityMet, &c, t(15)).unwrap();
        assert_eq!(s.phase, Phase::Connected);
    }

    #[test]
    fn config_validation() {
        assert!(cfg().validate().is_ok());
        assert!(TimingConfig {
            backup_minute: 56,
            ..cfg()
        }
        .validate()
        .is_err());
        assert!(TimingConfig {
            min_gap: Duration::from_ms(0),
            ..cfg()
        }
        .validate()
        .is_err());
    }
}
