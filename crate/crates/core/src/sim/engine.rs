//! Per-couple discrete-event loop.
//!
//! Virtual time advances one second at a time through each availability
//! hour. Messages, timers and restarts sit in a queue ordered by
//! (time, sequence) and are drained before each tick, so every session
//! machine sees a non-decreasing clock. The central watch scans, connects
//! and runs voice detection; the peripheral follows its messages and keeps
//! its own backup timer.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::faults::FaultSchedule;
use super::scenario::Scenario;
use super::trace::{CoupleTrace, HourTrace, SECONDS_PER_HOUR};
use crate::escalation::{afternoon_check, end_of_day_check, DayStats, EscalationAction};
use crate::obslog::{BeforeStudyLog, BleLog, ConfigLog, ErrorLog, HourlyLog, RecordingAnnotation, WatchLogs};
use crate::proximity::{is_proximate, RssiSample};
use crate::session::{
    advance, Action, Phase, RecordingKind, Role, SelfReportStatus, SessionEvent, SessionState, TimerId,
};
use crate::time::{Duration, SimTime, Span, MS_PER_HOUR};
use crate::transport::{
    ble_connect, relay_selfreport_trigger, send, BleConnectionState, BleOutcome, Delivery, Endpoint, Link, LinkKind,
    Message, MessageKind, MessageTrace, NotShownReason, Partner, RelayOutcome, SelfReportPath, Server,
};
use crate::vad::corpus::{ambient_second, noise_second, speech_second};
use crate::vad::{SegmentDecision, Vad};

/// Share of silent seconds that carry household noise in dsp mode.
const HOUSEHOLD_NOISE_SHARE: f64 = 0.2;
const AUDIO_MB_PER_RECORDING: f64 = 4.8;

pub enum Detector<'a> {
    GroundTruth,
    Dsp(&'a Vad),
}

pub fn partner_of(role: Role) -> Partner {
    match role {
        Role::Central => Partner::Male,
        Role::Peripheral => Partner::Female,
    }
}

fn idx(role: Role) -> usize {
    match role {
        Role::Central => 0,
        Role::Peripheral => 1,
    }
}

fn role_name(role: Role) -> &'static str {
    crate::obslog::role_dir(role)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Queued {
    Timer(Role, TimerId),
    RecordingDone(Role, SimTime),
    PeerStart,
    SelfReportStarted(Role, SimTime),
    SelfReportCompleted(Role, SimTime),
    Restart(Role),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Tallies {
    pub triggered_started: u64,
    pub backup_started: u64,
    pub retained_triggered: u64,
    pub retained_backup: u64,
    pub audio_deleted: u64,
    pub dead_watch_days: u64,
    pub crashes: u64,
    pub failed_restarts: u64,
    pub ble_connections: u64,
    pub ble_connect_failures: u64,
    pub ble_stack_resets: u64,
    pub link_losses: u64,
    pub selfreports_shown: u64,
    pub not_shown: BTreeMap<String, u64>,
    pub escalations: BTreeMap<String, u64>,
}

impl Tallies {
    pub fn add(&mut self, o: &Tallies) {
        self.triggered_started += o.triggered_started;
        self.backup_started += o.backup_started;
        self.retained_triggered += o.retained_triggered;
        self.retained_backup += o.retained_backup;
        self.audio_deleted += o.audio_deleted;
        self.dead_watch_days += o.dead_watch_days;
        self.crashes += o.crashes;
        self.failed_restarts += o.failed_restarts;
        self.ble_connections += o.ble_connections;
        self.ble_connect_failures += o.ble_connect_failures;
        self.ble_stack_resets += o.ble_stack_resets;
        self.link_losses += o.link_losses;
        self.selfreports_shown += o.selfreports_shown;
        for (k, v) in &o.not_shown {
            *self.not_shown.entry(k.clone()).or_default() += v;
        }
        for (k, v) in &o.escalations {
            *self.escalations.entry(k.clone()).or_default() += v;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscalationLine {
    pub couple: u32,
    pub partner: Partner,
    pub day: u32,
    pub check: String,
    pub actions: Vec<EscalationAction>,
}

/// A kept recording with its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeptRecording {
    pub role: Role,
    pub start: SimTime,
    pub annotation: RecordingAnnotation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupleOutput {
    pub couple: u32,
    pub watches: [WatchLogs; 2],
    pub kept: Vec<KeptRecording>,
    pub tallies: Tallies,
    pub escalations: Vec<EscalationLine>,
    pub messages: Vec<MessageTrace>,
}

/// Annotation of a recording on `listener`'s watch from ground truth.
pub fn annotate(
    ht: &HourTrace,
    start_s: usize,
    len_s: usize,
    listener: Partner,
    audible_m: f64,
    id: String,
    kind: RecordingKind,
) -> RecordingAnnotation {
    let end = (start_s + len_s).min(ht.flags.len());
    let heard = |p: Partner| (start_s..end).any(|s| ht.audible(s, listener, p, audible_m));
    let male = heard(Partner::Male);
    let female = heard(Partner::Female);
    RecordingAnnotation {
        recording_id: id,
        has_speech: male || female,
        male_spoke: male,
        female_spoke: female,
        conversation: male && female,
        kind,
    }
}

pub fn recording_id(couple: u32, role: Role, start: SimTime) -> String {
    format!(
        "c{couple:03}-{}-d{}-{:02}{:02}{:02}",
        role_name(role),
        start.day(),
        start.hour_of_day(),
        start.minute_of_hour(),
        start.second_of_minute()
    )
}

struct Watch {
    role: Role,
    session: SessionState,
    running: bool,
    down_until: SimTime,
    in_hour: bool,
    log: HourlyLog,
    logs: WatchLogs,
    storage_mb: f64,
}

impl Watch {
    fn partner(&self) -> Partner {
        partner_of(self.role)
    }
}

struct Couple<'a> {
    s: &'a Scenario,
    couple: u32,
    trace: &'a CoupleTrace,
    faults: &'a FaultSchedule,
    detector: &'a Detector<'a>,
    rng: ChaCha8Rng,
    watches: [Watch; 2],
    queue: BTreeMap<(SimTime, u64), Queued>,
    seq: u64,
    ble: BleConnectionState,
    ble_link: Link,
    paths: [SelfReportPath; 2],
    server_hangups: Vec<Span>,
    kept: Vec<KeptRecording>,
    tallies: Tallies,
    messages: Vec<MessageTrace>,
}

impl<'a> Couple<'a> {
    fn push(&mut self, at: SimTime, ev: Queued) {
        self.seq += 1;
        self.queue.insert((at, self.seq), ev);
    }

    fn feed(&mut self, role: Role, ev: SessionEvent, now: SimTime) -> Vec<Action> {
        let w = &mut self.watches[idx(role)];
        let (next, actions) = advance(&w.session, ev, &self.s.timing, now)
            .unwrap_or_else(|e| panic!("couple {} {role:?}: {e}", self.couple));
        w.session = next;
        self.handle(role, &actions, now);
        actions
    }

    fn handle(&mut self, role: Role, actions: &[Action], now: SimTime) {
        for a in actions {
            match *a {
                Action::StartScan | Action::StartAdvertise => self.watches[idx(role)].log.ble_scan_or_advertise.push(now),
                Action::ConnectPeer | Action::StartVad | Action::SendRecordingDoneIntent => {}
                Action::StartRecording | Action::StartBackupRecording => {
                    self.watches[idx(role)].log.recordings.push(now);
                    if matches!(a, Action::StartBackupRecording) {
                        self.tallies.backup_started += 1;
                    } else {
                        self.tallies.triggered_started += 1;
                    }
                    self.push(now.plus(self.s.timing.record_duration), Queued::RecordingDone(role, now));
                }
                Action::StartPeerRecording => {
                    let msg = Message::about_recording(
                        MessageKind::StartPeerRecording,
                        Endpoint::Watch(Partner::Male),
                        Endpoint::Watch(Partner::Female),
                        now,
                        now,
                    );
                    let d = send(&self.ble_link, &msg, &mut self.rng).expect("ble link joins the two watches");
                    if let Delivery::Delivered { at } = d {
                        self.push(at, Queued::PeerStart);
                    }
                }
                Action::Vibrate => {
                    let w = &mut self.watches[idx(role)];
                    match w.session.phase {
                        Phase::AwaitingSelfReport { alerts_sent: 1, .. } => w.log.selfreport_alert1.push(now),
                        _ => w.log.selfreport_alert2.push(now),
                    }
                }
                Action::DeleteAudio { .. } => {
                    self.watches[idx(role)].log.audio_discarded = true;
                    self.tallies.audio_deleted += 1;
                }
                Action::RetainAudio { recording_start } => {
                    let w = &mut self.watches[idx(role)];
                    w.log.retained_start = Some(recording_start);
                    w.storage_mb = (w.storage_mb - AUDIO_MB_PER_RECORDING).max(0.0);
                }
                Action::ScheduleTimer { id, at } => self.push(at, Queued::Timer(role, id)),
            }
            if matches!(a, Action::SendRecordingDoneIntent) {
                self.relay(role, now);
            }
        }
    }

    fn relay(&mut self, role: Role, now: SimTime) {
        let w = &self.watches[idx(role)];
        let Some(start) = w.session.records.last().map(|r| r.start) else { return };
        let server = Server {
            hung_up: self.server_hangups.iter().any(|h| h.contains(now)),
        };
        let window = Duration::from_ms(self.s.timing.first_alert_wait.as_ms() + self.s.timing.second_alert_wait.as_ms());
        let path = &self.paths[idx(role)];
        let outcome = relay_selfreport_trigger(path, &server, start, now, window, &mut self.rng, &mut self.messages);
        match outcome {
            RelayOutcome::Shown { at } => {
                self.tallies.selfreports_shown += 1;
                let c = &self.s.compliance;
                if self.rng.gen::<f64>() >= c.start {
                    return;
                }
                let started = at.plus(Duration::from_secs(self.rng.gen_range(c.start_delay_s.0..=c.start_delay_s.1)));
                // the phone survey expires with the watch's alert window
                if started.saturating_sub(now) >= window {
                    return;
                }
                let back = |s: &mut Self, kind, t: SimTime| -> Option<SimTime> {
                    let partner = partner_of(role);
                    let msg = Message::about_recording(kind, Endpoint::Phone(partner), Endpoint::Watch(partner), start, t);
                    match send(&s.paths[idx(role)].data_layer, &msg, &mut s.rng).expect("data layer endpoints") {
                        Delivery::Delivered { at } => Some(at),
                        Delivery::Dropped(_) => None,
                    }
                };
                if let Some(at) = back(self, MessageKind::SelfReportStarted, started) {
                    self.push(at, Queued::SelfReportStarted(role, start));
                }
                if self.rng.gen::<f64>() < c.complete {
                    let done = started.plus(Duration::from_secs(self.rng.gen_range(c.fill_duration_s.0..=c.fill_duration_s.1)));
                    if let Some(at) = back(self, MessageKind::SelfReportCompleted, done) {
                        self.push(at, Queued::SelfReportCompleted(role, start));
                    }
                }
            }
            RelayOutcome::NotShown(reason) => {
                let key = match reason {
                    NotShownReason::WatchToPhoneDropped => "watch_to_phone_dropped",
                    NotShownReason::InternetUnavailable => "internet_unavailable",
                    NotShownReason::InternetDropped => "internet_dropped",
                    NotShownReason::ServerHangup => "server_hangup",
                    NotShownReason::TooLate => "too_late",
                };
                *self.tallies.not_shown.entry(key.to_string()).or_default() += 1;
            }
        }
    }

    fn active(&self, role: Role) -> bool {
        let w = &self.watches[idx(role)];
        w.running && w.in_hour
    }

    fn process(&mut self, at: SimTime, ev: Queued) {
        match ev {
            Queued::Timer(role, id) => {
                if self.active(role) {
                    self.feed(role, SessionEvent::TimerFired(id), at);
                }
            }
            Queued::RecordingDone(role, start) => {
                if self.active(role)
                    && matches!(self.watches[idx(role)].session.phase, Phase::Recording { started_at, .. } if started_at == start)
                {
                    self.feed(role, SessionEvent::RecordingComplete, at);
                }
            }
            Queued::PeerStart => {
                let role = Role::Peripheral;
                if self.active(role) && self.watches[1].session.phase == Phase::Connected {
                    self.feed(role, SessionEvent::SpeechDetected, at);
                }
            }
            Queued::SelfReportStarted(role, start) => {
                let w = &self.watches[idx(role)];
                let pending = matches!(w.session.phase, Phase::AwaitingSelfReport { .. })
                    && w.session.records.last().is_some_and(|r| r.start == start);
                if self.active(role) && pending {
                    self.feed(role, SessionEvent::SelfReportStarted, at);
                    self.watches[idx(role)].log.selfreport_started.push(at);
                }
            }
            Queued::SelfReportCompleted(role, start) => {
                let w = &self.watches[idx(role)];
                let ok = match w.session.phase {
                    Phase::AwaitingSelfReport { .. } => w.session.records.last().is_some_and(|r| r.start == start),
                    Phase::HourDone => w
                        .session
                        .records
                        .iter()
                        .any(|r| r.start == start && r.selfreport == SelfReportStatus::Started),
                    _ => false,
                };
                if self.active(role) && ok {
                    self.feed(role, SessionEvent::SelfReportCompleted, at);
                    self.watches[idx(role)].log.selfreport_completed.push(at);
                }
            }
            Queued::Restart(role) => {
                let w = &mut self.watches[idx(role)];
                if w.running || !w.in_hour {
                    return;
                }
                w.running = true;
                w.log.restarts.push(at);
                self.feed(role, SessionEvent::HourStart, at);
            }
        }
    }

    fn drain(&mut self, until: SimTime) {
        while let Some((&(at, seq), _)) = self.queue.iter().next() {
            if at > until {
                break;
            }
            let ev = self.queue.remove(&(at, seq)).expect("present");
            self.process(at, ev);
        }
    }

    fn crash(&mut self, role: Role, at: SimTime, restart_ok: bool) {
        if !self.active(role) {
            return;
        }
        self.tallies.crashes += 1;
        let other = match role {
            Role::Central => Role::Peripheral,
            Role::Peripheral => Role::Central,
        };
        let w = &mut self.watches[idx(role)];
        let (next, actions) = w.session.after_restart(at);
        w.session = next;
        w.log.errors.push(at);
        w.logs.errors.push(ErrorLog {
            timestamp: at,
            kind: "crash".into(),
            message: "unhandled exception".into(),
        });
        w.running = false;
        self.handle(role, &actions, at);
        if self.active(other) && self.watches[idx(other)].session.phase == Phase::Connected {
            self.feed(other, SessionEvent::ConnectFailed, at);
        }
        if restart_ok {
            self.push(at.plus(Duration::from_secs(1)), Queued::Restart(role));
        } else {
            self.tallies.failed_restarts += 1;
            self.watches[idx(role)].down_until = super::faults::Crash { role, at, restart_ok }.back_at(self.s.faults.watchdog);
        }
    }

    fn rssi(&mut self, distance_m: f64, now: SimTime) -> RssiSample {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        let p = self.s.path_loss.predict_rssi(distance_m, z).expect("trace distances are positive");
        RssiSample::from_prediction(now.as_ms(), p)
    }

    /// (non-silent, speech) for the central watch at second `sec`.
    fn detect(&mut self, ht: &HourTrace, sec: usize) -> (bool, bool) {
        let audible_m = self.s.behavior.audible_distance_m;
        let me = Partner::Male;
        let voice = ht.audible(sec, me, Partner::Male, audible_m)
            || ht.audible(sec, me, Partner::Female, audible_m)
            || ht.tv_audible(sec, audible_m);
        match self.detector {
            Detector::GroundTruth => (voice, voice),
            Detector::Dsp(vad) => {
                let audio = if voice {
                    speech_second(&mut self.rng)
                } else if self.rng.gen::<f64>() < HOUSEHOLD_NOISE_SHARE {
                    noise_second(&mut self.rng)
                } else {
                    ambient_second(&mut self.rng)
                };
                match vad.decide_segment(&audio).expect("one second of valid audio") {
                    SegmentDecision::Silence => (false, false),
                    SegmentDecision::NonSpeech => (true, false),
                    SegmentDecision::Speech => (true, true),
                }
            }
        }
    }

    fn tick(&mut self, ht: &HourTrace, sec: usize, now: SimTime) {
        if !self.active(Role::Central) {
            return;
        }
        let peer_up = self.active(Role::Peripheral);
        match self.watches[0].session.phase {
            Phase::Scanning => {
                if !peer_up {
                    return;
                }
                let sample = self.rssi(ht.distance_m[sec] as f64, now);
                if (sec as u64).is_multiple_of(self.s.ble_log_period_s) {
                    self.watches[0].logs.ble.push(BleLog {
                        timestamp: now,
                        rssi_dbm: sample.rssi_dbm,
                    });
                }
                if !is_proximate(&sample, &self.s.proximity) {
                    return;
                }
                self.feed(Role::Central, SessionEvent::ProximityMet, now);
                if self.watches[0].session.phase != Phase::Connected {
                    return;
                }
                self.watches[0].log.closeness_met.push(now);
                let (next, outcome) = ble_connect(self.ble, true, &self.s.transport.ble, &mut self.rng);
                self.ble = next;
                match outcome {
                    BleOutcome::Connected => {
                        self.tallies.ble_connections += 1;
                        self.watches[0].log.connections.push(now);
                        if self.watches[1].session.phase == Phase::Scanning {
                            self.feed(Role::Peripheral, SessionEvent::ProximityMet, now);
                            if self.watches[1].session.phase == Phase::Connected {
                                self.watches[1].log.closeness_met.push(now);
                                self.watches[1].log.connections.push(now);
                            }
                        }
                    }
                    BleOutcome::Failed | BleOutcome::StackResetPerformed => {
                        self.tallies.ble_connect_failures += 1;
                        if outcome == BleOutcome::StackResetPerformed {
                            self.tallies.ble_stack_resets += 1;
                        }
                        self.feed(Role::Central, SessionEvent::ConnectFailed, now);
                    }
                }
            }
            Phase::Connected => {
                let sample = self.rssi(ht.distance_m[sec] as f64, now);
                if !peer_up || sample.rssi_dbm < self.s.proximity.threshold_dbm - self.s.disconnect_margin_db {
                    self.tallies.link_losses += 1;
                    self.feed(Role::Central, SessionEvent::ConnectFailed, now);
                    if peer_up && self.watches[1].session.phase == Phase::Connected {
                        self.feed(Role::Peripheral, SessionEvent::ConnectFailed, now);
                    }
                    return;
                }
                let (sound, speech) = self.detect(ht, sec);
                if sound {
                    self.watches[0].log.no_silence_detections.push(now);
                }
                if speech {
                    self.watches[0].log.vad_detections.push(now);
                    self.feed(Role::Central, SessionEvent::SpeechDetected, now);
                }
            }
            _ => {}
        }
    }

    fn start_hour(&mut self, day: u32, hour: u32, t0: SimTime) {
        let first_hour = self.s.windows_for(self.couple).hours(day).first().copied().unwrap_or(hour);
        let battery = (100.0 - self.s.battery_drain_per_hour * (hour - first_hour + 1) as f64).clamp(0.0, 100.0);
        let internet_down = |p: &SelfReportPath| {
            let span = Span::new(t0, t0.plus(Duration::from_ms(MS_PER_HOUR)));
            p.internet.outages.iter().any(|o| o.overlaps(&span))
        };
        for role in [Role::Central, Role::Peripheral] {
            let on = self.faults.watch_on(role, day);
            let internet = !internet_down(&self.paths[idx(role)]);
            let w = &mut self.watches[idx(role)];
            w.in_hour = false;
            if !on {
                w.running = false;
                continue;
            }
            w.running = w.down_until <= t0;
            if !w.running {
                continue;
            }
            w.in_hour = true;
            w.log = HourlyLog {
                timestamp: t0.plus(Duration::from_ms(MS_PER_HOUR)),
                battery_level: battery,
                internet_available: internet,
                storage_remaining_mb: w.storage_mb,
                ..Default::default()
            };
            self.feed(role, SessionEvent::HourStart, t0);
        }
    }

    fn end_hour(&mut self, ht: &HourTrace, t0: SimTime, te: SimTime) {
        for role in [Role::Central, Role::Peripheral] {
            if !self.active(role) {
                self.watches[idx(role)].in_hour = false;
                continue;
            }
            self.feed(role, SessionEvent::HourEnd, te);
            let w = &mut self.watches[idx(role)];
            w.in_hour = false;
            let mut log = std::mem::take(&mut w.log);
            log.was_backup = w.session.records.last().is_some_and(|r| r.kind == RecordingKind::Backup);
            log.storage_remaining_mb = w.storage_mb;
            if let Some(start) = log.retained_start {
                let kind = w
                    .session
                    .records
                    .iter()
                    .find(|r| r.start == start)
                    .map(|r| r.kind)
                    .expect("retained record exists");
                let start_s = (start.saturating_sub(t0).as_ms() / 1000) as usize;
                let len_s = (self.s.timing.record_duration.as_ms() / 1000) as usize;
                let annotation = annotate(
                    ht,
                    start_s,
                    len_s,
                    w.partner(),
                    self.s.behavior.audible_distance_m,
                    recording_id(self.couple, role, start),
                    kind,
                );
                match kind {
                    RecordingKind::Triggered => self.tallies.retained_triggered += 1,
                    RecordingKind::Backup => self.tallies.retained_backup += 1,
                }
                self.kept.push(KeptRecording { role, start, annotation });
            }
            w.logs.hourly.push(log);
        }
        self.queue.retain(|_, ev| matches!(ev, Queued::Restart(_)));
        // a restart queued past the hour finds the app already restored
        for (_, ev) in std::mem::take(&mut self.queue) {
            if let Queued::Restart(role) = ev {
                self.watches[idx(role)].down_until = te;
            }
        }
    }

    fn run(&mut self) {
        let mut crash_i = 0;
        let crashes = self.faults.crashes.clone();
        for ht in &self.trace.hours {
            let t0 = SimTime::at(ht.day, ht.hour, 0, 0);
            let te = t0.plus(Duration::from_ms(MS_PER_HOUR));
            self.start_hour(ht.day, ht.hour, t0);
            for sec in 0..SECONDS_PER_HOUR {
                let now = t0.plus(Duration::from_secs(sec as u64));
                self.drain(now);
                while crash_i < crashes.len() && crashes[crash_i].at <= now {
                    let c = crashes[crash_i];
                    crash_i += 1;
                    if c.at == now {
                        self.crash(c.role, now, c.restart_ok);
                    }
                }
                self.tick(ht, sec, now);
            }
            self.drain(te);
            self.end_hour(ht, t0, te);
        }
    }
}

fn day_stats(logs: &WatchLogs, s: &Scenario, couple: u32, day: u32, diary: bool) -> DayStats {
    let w = s.windows_for(couple).for_day(day);
    let done = |range: &crate::escalation::HourRange| {
        logs.hourly
            .iter()
            .filter(|h| {
                let (d, hr) = h.covered_slot();
                d == day && range.contains(hr) && !h.selfreport_completed.is_empty()
            })
            .count() as u32
    };
    DayStats {
        expected_morning: w.morning.len(),
        completed_morning: done(&w.morning),
        expected_evening: w.evening.len(),
        completed_evening: done(&w.evening),
        diary_completed: diary,
    }
}

pub fn run_couple(
    s: &Scenario,
    couple: u32,
    trace: &CoupleTrace,
    faults: &FaultSchedule,
    detector: &Detector<'_>,
    mut rng: ChaCha8Rng,
) -> CoupleOutput {
    let t = &s.transport;
    let mut paths = [SelfReportPath::new(Partner::Male), SelfReportPath::new(Partner::Female)];
    for (i, p) in paths.iter_mut().enumerate() {
        p.data_layer.latency_ms = t.data_layer_latency_ms;
        p.data_layer.drop_prob = t.data_layer_drop;
        p.internet.latency_ms = t.internet_latency_ms;
        p.internet.jitter_ms = t.internet_jitter_ms;
        p.internet.drop_prob = t.internet_drop;
        p.internet.outages = faults.outages[i].clone();
        p.internet.store_and_forward = t.store_and_forward;
    }
    let ble_link = Link::new(LinkKind::Ble, Endpoint::Watch(Partner::Male), Endpoint::Watch(Partner::Female));
    let windows = *s.windows_for(couple);
    let mk_watch = |role: Role| {
        let mut logs = WatchLogs {
            couple,
            role: Some(role),
            config: Some(ConfigLog {
                timestamp: SimTime::ZERO,
                couple,
                role,
                partner: partner_of(role),
                days: s.days,
                windows,
            }),
            ..Default::default()
        };
        if !faults.never_powered {
            let first = windows.hours(0).first().copied().unwrap_or(0);
            logs.before.push(BeforeStudyLog {
                timestamp: SimTime::ZERO,
                battery_level: 100.0,
                seconds_until_start: first as u64 * 3600,
                exceptions_last_hour: 0,
            });
        }
        Watch {
            role,
            session: SessionState::new(role),
            running: false,
            down_until: SimTime::ZERO,
            in_hour: false,
            log: HourlyLog::default(),
            logs,
            storage_mb: s.storage_mb,
        }
    };
    let diary: Vec<[bool; 2]> = (0..s.days)
        .map(|_| [rng.gen::<f64>() < s.compliance.diary, rng.gen::<f64>() < s.compliance.diary])
        .collect();
    let mut c = Couple {
        s,
        couple,
        trace,
        faults,
        detector,
        rng,
        watches: [mk_watch(Role::Central), mk_watch(Role::Peripheral)],
        queue: BTreeMap::new(),
        seq: 0,
        ble: BleConnectionState::default(),
        ble_link,
        paths,
        server_hangups: faults.server_hangups.clone(),
        kept: Vec::new(),
        tallies: Tallies::default(),
        messages: Vec::new(),
    };
    c.run();

    for day in 0..s.days {
        for role in [Role::Central, Role::Peripheral] {
            if !faults.watch_on(role, day) {
                c.tallies.dead_watch_days += 1;
            }
        }
    }
    let mut escalations = Vec::new();
    for day in 0..s.days {
        for role in [Role::Central, Role::Peripheral] {
            let stats = day_stats(&c.watches[idx(role)].logs, s, couple, day, diary[day as usize][idx(role)]);
            for (check, d) in [("afternoon", afternoon_check(&stats)), ("end_of_day", end_of_day_check(&stats))] {
                for a in &d.actions {
                    *c.tallies.escalations.entry(format!("{a:?}")).or_default() += 1;
                }
                escalations.push(EscalationLine {
                    couple,
                    partner: partner_of(role),
                    day,
                    check: check.to_string(),
                    actions: d.actions.into_iter().collect(),
                });
            }
        }
    }
    let [w0, w1] = c.watches;
    CoupleOutput {
        couple,
        watches: [w0.logs, w1.logs],
        kept: c.kept,
        tallies: c.tallies,
        escalations,
        messages: c.messages,
    }
}
