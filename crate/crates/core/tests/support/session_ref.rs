//! A one-hour script language for the session machine, a straight-line
//! interpreter of the same rules, and a random legal-event fuzzer.

use std::collections::{BTreeMap, BTreeSet};

use dyadsense::session::{
    advance, Action, Phase, RecordingKind, Role, SelfReportStatus, SessionEvent, SessionState, TimerId,
    TimingConfig,
};
use dyadsense::time::{Duration, SimTime, MS_PER_MINUTE};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reply {
    Ignore,
    /// Survey started one minute after the recording ends.
    Start,
    /// Survey completed three minutes after the recording ends.
    Complete,
}

impl Reply {
    pub const ALL: [Reply; 3] = [Reply::Ignore, Reply::Start, Reply::Complete];

    fn delay(self) -> Option<i64> {
        match self {
            Reply::Ignore => None,
            Reply::Start => Some(1),
            Reply::Complete => Some(3),
        }
    }
}

/// Minute-resolution script for one hour.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Script {
    /// Minutes before the hour of the previous recording start, if any.
    pub prior_start_before: Option<i64>,
    /// Speech-while-close attempts (minute, reply to a resulting recording).
    pub attempts: Vec<(i64, Reply)>,
    pub backup_reply: Reply,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Outcome {
    pub starts: Vec<(i64, RecordingKind)>,
    pub retained: Option<i64>,
    pub deleted: BTreeSet<i64>,
}

impl Outcome {
    pub fn backup(&self) -> bool {
        self.starts.iter().any(|(_, k)| *k == RecordingKind::Backup)
    }
}

fn hour0() -> SimTime {
    SimTime::at(0, 10, 0, 0)
}

fn at_min(m: i64) -> SimTime {
    SimTime::from_ms((hour0().as_ms() as i64 + m * MS_PER_MINUTE as i64) as u64)
}

fn min_of(t: SimTime) -> i64 {
    (t.as_ms() as i64 - hour0().as_ms() as i64) / MS_PER_MINUTE as i64
}

struct Driver<'a> {
    cfg: &'a TimingConfig,
    s: SessionState,
    timers: BTreeMap<(i64, u64), TimerId>,
    out: Outcome,
}

impl Driver<'_> {
    fn step(&mut self, ev: SessionEvent, m: i64) {
        let (next, actions) =
            advance(&self.s, ev, self.cfg, at_min(m)).unwrap_or_else(|e| panic!("minute {m} {ev:?}: {e}"));
        self.s = next;
        for a in actions {
            match a {
                Action::ScheduleTimer { id, at } => {
                    self.timers.insert((min_of(at), u64::from(id.serial)), id);
                }
                Action::StartRecording => self.out.starts.push((m, RecordingKind::Triggered)),
                Action::StartBackupRecording => self.out.starts.push((m, RecordingKind::Backup)),
                Action::DeleteAudio { recording_start } => {
                    self.out.deleted.insert(min_of(recording_start));
                }
                Action::RetainAudio { recording_start } => self.out.retained = Some(min_of(recording_start)),
                _ => {}
            }
        }
    }

    fn fire_timers(&mut self, m: i64) {
        while let Some((&(t, serial), &id)) = self.timers.iter().next() {
            if t > m {
                break;
            }
            self.timers.remove(&(t, serial));
            self.step(SessionEvent::TimerFired(id), t);
        }
    }
}

/// Runs `script` through [`advance`], delivering timers at their due minute.
/// Within a minute the order is: timers, recording end, survey reply,
/// attempt.
pub fn run_machine(script: &Script, cfg: &TimingConfig) -> Outcome {
    let mut s = SessionState::new(Role::Central);
    if let Some(b) = script.prior_start_before {
        s.gap_anchor = Some(at_min(-b));
        s.last_recording_start = s.gap_anchor;
    }
    let mut d = Driver {
        cfg,
        s,
        timers: BTreeMap::new(),
        out: Outcome::default(),
    };
    let attempts: BTreeMap<i64, Reply> = script.attempts.iter().copied().collect();
    let rec_min = (cfg.record_duration.as_ms() / MS_PER_MINUTE) as i64;
    let mut reply_due: Option<(i64, Reply)> = None;
    d.step(SessionEvent::HourStart, 0);
    for m in 0..=60 {
        d.fire_timers(m);
        if let Phase::Recording { kind, started_at } = d.s.phase {
            if min_of(started_at) + rec_min == m {
                d.step(SessionEvent::RecordingComplete, m);
                let reply = match kind {
                    RecordingKind::Triggered => attempts[&min_of(started_at)],
                    RecordingKind::Backup => script.backup_reply,
                };
                reply_due = reply.delay().map(|dl| (m + dl, reply));
            }
        }
        d.fire_timers(m);
        if let Some((due, reply)) = reply_due {
            if due == m {
                reply_due = None;
                if matches!(d.s.phase, Phase::AwaitingSelfReport { .. }) {
                    let ev = match reply {
                        Reply::Start => SessionEvent::SelfReportStarted,
                        _ => SessionEvent::SelfReportCompleted,
                    };
                    d.step(ev, m);
                }
            }
        }
        if m == 60 {
            d.step(SessionEvent::HourEnd, 60);
            break;
        }
        if attempts.contains_key(&m) && d.s.phase == Phase::Scanning {
            d.step(SessionEvent::ProximityMet, m);
            if d.s.phase == Phase::Connected {
                d.step(SessionEvent::SpeechDetected, m);
            }
        }
    }
    d.out
}

/// The rules written out minute by minute, independent of the state
/// machine's phase bookkeeping.
pub fn reference(script: &Script, cfg: &TimingConfig) -> Outcome {
    let mins = |d: Duration| (d.as_ms() / MS_PER_MINUTE) as i64;
    let (rec, alert1, alert2) = (mins(cfg.record_duration), mins(cfg.first_alert_wait), mins(cfg.second_alert_wait));
    let gap = mins(cfg.min_gap);
    let backup_minute = cfg.backup_minute as i64;
    let latest = 60 - rec;

    struct Rec {
        start: i64,
        answered: bool,
        deleted: bool,
    }
    let mut out = Outcome::default();
    let mut recs: Vec<Rec> = Vec::new();
    let mut last_start: Option<i64> = script.prior_start_before.map(|b| -b);
    let mut recording: Option<(i64, Reply)> = None;
    let mut waiting: Option<(i64, Reply)> = None;
    let mut answered = false;

    for m in 0..=60 {
        // unanswered handshake expires after both alert windows
        if let Some((end, _)) = waiting {
            if m == end + alert1 + alert2 {
                recs.last_mut().unwrap().deleted = true;
                waiting = None;
            }
        }
        let gap_ok = last_start.is_none_or(|s| m - s >= gap);
        let free = recording.is_none() && waiting.is_none() && !answered;
        if m >= backup_minute && m <= latest && free && gap_ok {
            recording = Some((m, script.backup_reply));
            last_start = Some(m);
            out.starts.push((m, RecordingKind::Backup));
        }
        if let Some((start, reply)) = recording {
            if m == start + rec {
                recs.push(Rec {
                    start,
                    answered: false,
                    deleted: false,
                });
                recording = None;
                waiting = Some((m, reply));
            }
        }
        if let Some((end, reply)) = waiting {
            if reply.delay().is_some_and(|d| m == end + d) {
                recs.last_mut().unwrap().answered = true;
                answered = true;
                waiting = None;
            }
        }
        if m == 60 {
            if let Some((start, _)) = recording {
                recs.push(Rec {
                    start,
                    answered: false,
                    deleted: true,
                });
            }
            if waiting.is_some() {
                recs.last_mut().unwrap().deleted = true;
            }
            break;
        }
        let free = recording.is_none() && waiting.is_none() && !answered;
        let gap_ok = last_start.is_none_or(|s| m - s >= gap);
        if let Some(&(_, reply)) = script.attempts.iter().find(|(a, _)| *a == m) {
            if m < backup_minute && free && gap_ok {
                recording = Some((m, reply));
                last_start = Some(m);
                out.starts.push((m, RecordingKind::Triggered));
            }
        }
    }
    if let Some(last) = recs.iter().max_by_key(|r| r.start) {
        if last.answered && !last.deleted {
            out.retained = Some(last.start);
        }
    }
    out.deleted = recs
        .iter()
        .filter(|r| Some(r.start) != out.retained)
        .map(|r| r.start)
        .collect();
    out
}

/// Every script with up to `max_attempts` attempts at distinct minutes of
/// the hour, every reply combination, every backup reply and each prior
/// start in `priors`, passed to `f`. Returns the number of scripts.
pub fn for_each_script(max_attempts: usize, priors: &[Option<i64>], mut f: impl FnMut(&Script)) -> u64 {
    fn minute_sets(k: usize, from: i64, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for m in from..60 {
            cur.push(m);
            minute_sets(k, m + 1, cur, out);
            cur.pop();
        }
    }
    let mut n = 0;
    for k in 0..=max_attempts {
        let mut sets = Vec::new();
        minute_sets(k, 0, &mut Vec::new(), &mut sets);
        let combos = 3usize.pow(k as u32);
        for minutes in &sets {
            for c in 0..combos {
                let mut code = c;
                let attempts: Vec<(i64, Reply)> = minutes
                    .iter()
                    .map(|&m| {
                        let r = Reply::ALL[code % 3];
                        code /= 3;
                        (m, r)
                    })
                    .collect();
                for &prior in priors {
                    for backup_reply in Reply::ALL {
                        f(&Script {
                            prior_start_before: prior,
                            attempts: attempts.clone(),
                            backup_reply,
                        });
                        n += 1;
                    }
                }
            }
        }
    }
    n
}

/// Drives three consecutive hours with random legal events and returns
/// every invariant violation.
pub fn fuzz_sequence(seed: u64, cfg: &TimingConfig) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let role = if rng.gen::<bool>() { Role::Central } else { Role::Peripheral };
    let mut s = SessionState::new(role);
    let mut timers: BTreeMap<(SimTime, u64), TimerId> = BTreeMap::new();
    let mut starts: Vec<(SimTime, RecordingKind)> = Vec::new();
    let mut v = Vec::new();
    let hour = Duration::from_minutes(60);

    // (time, action) and (time, event) logs for the alert check
    let mut intents: Vec<SimTime> = Vec::new();
    let mut vibrations: Vec<SimTime> = Vec::new();
    let mut answers: Vec<SimTime> = Vec::new();

    let mut apply = |s: &mut SessionState,
                     ev: SessionEvent,
                     t: SimTime,
                     timers: &mut BTreeMap<(SimTime, u64), TimerId>,
                     starts: &mut Vec<(SimTime, RecordingKind)>,
                     v: &mut Vec<String>| {
        let before = s.phase;
        let (next, actions) = match advance(s, ev, cfg, t) {
            Ok(x) => x,
            Err(e) => {
                v.push(format!("seed {seed}: {e}"));
                return;
            }
        };
        if matches!(ev, SessionEvent::SelfReportStarted | SessionEvent::SelfReportCompleted)
            && matches!(before, Phase::AwaitingSelfReport { .. })
        {
            answers.push(t);
        }
        *s = next;
        for a in actions {
            match a {
                Action::ScheduleTimer { id, at } => {
                    timers.insert((at, u64::from(id.serial)), id);
                }
                Action::StartRecording => starts.push((t, RecordingKind::Triggered)),
                Action::StartBackupRecording => starts.push((t, RecordingKind::Backup)),
                Action::SendRecordingDoneIntent => intents.push(t),
                Action::Vibrate => vibrations.push(t),
                _ => {}
            }
        }
    };

    let mut hour_ends = Vec::new();
    for h in 0..3u64 {
        let h0 = hour0().plus(Duration::from_minutes(60 * h));
        let end = h0.plus(hour);
        hour_ends.push(end);
        apply(&mut s, SessionEvent::HourStart, h0, &mut timers, &mut starts, &mut v);
        let mut t = h0;
        loop {
            let step = Duration::from_ms(rng.gen_range(1_000..=90_000));
            t = t.plus(step).min(end);
            // timers and recording ends up to t, in time order
            loop {
                let timer = timers.iter().next().map(|(&(at, serial), &id)| (at, serial, id)).filter(|x| x.0 <= t);
                let complete = match s.phase {
                    Phase::Recording { started_at, .. } => {
                        Some(started_at.plus(cfg.record_duration)).filter(|&e| e <= t)
                    }
                    _ => None,
                };
                match (timer, complete) {
                    (Some((at, serial, id)), c) if c.is_none_or(|c| at <= c) => {
                        timers.remove(&(at, serial));
                        apply(&mut s, SessionEvent::TimerFired(id), at, &mut timers, &mut starts, &mut v);
                    }
                    (_, Some(c)) => apply(&mut s, SessionEvent::RecordingComplete, c, &mut timers, &mut starts, &mut v),
                    _ => break,
                }
            }
            if t == end {
                break;
            }
            let u: f64 = rng.gen();
            let ev = match s.phase {
                Phase::Scanning if u < 0.3 => Some(SessionEvent::ProximityMet),
                Phase::Connected if u < 0.3 => Some(SessionEvent::SpeechDetected),
                Phase::Connected if u < 0.4 => Some(SessionEvent::ConnectFailed),
                Phase::AwaitingSelfReport { .. } if u < 0.15 => Some(SessionEvent::SelfReportStarted),
                Phase::AwaitingSelfReport { .. } if u < 0.25 => Some(SessionEvent::SelfReportCompleted),
                Phase::HourDone
                    if u < 0.2 && s.records.iter().any(|r| r.selfreport == SelfReportStatus::Started) =>
                {
                    Some(SessionEvent::SelfReportCompleted)
                }
                _ if u > 0.95 => Some(SessionEvent::BackupTimeReached),
                _ => None,
            };
            if let Some(ev) = ev {
                apply(&mut s, ev, t, &mut timers, &mut starts, &mut v);
            }
        }
        apply(&mut s, SessionEvent::HourEnd, end, &mut timers, &mut starts, &mut v);

        let retained: Vec<_> = s.records.iter().filter(|r| r.retained).collect();
        if retained.len() > 1 {
            v.push(format!("seed {seed} hour {h}: {} retained recordings", retained.len()));
        }
        for r in &retained {
            if !matches!(r.selfreport, SelfReportStatus::Started | SelfReportStatus::Completed) {
                v.push(format!("seed {seed} hour {h}: kept recording with self-report {:?}", r.selfreport));
            }
        }
        for r in &s.records {
            if r.selfreport == SelfReportStatus::Expired && !r.audio_deleted {
                v.push(format!("seed {seed} hour {h}: expired self-report kept its audio"));
            }
        }
        let in_hour: Vec<_> = starts.iter().filter(|(st, _)| *st >= h0 && *st < end).collect();
        let triggered = in_hour.iter().any(|(_, k)| *k == RecordingKind::Triggered);
        let backups = in_hour.iter().filter(|(_, k)| *k == RecordingKind::Backup).count();
        if !triggered && backups != 1 {
            v.push(format!("seed {seed} hour {h}: no trigger but {backups} backup recordings"));
        }
        if backups > 0 {
            let first_backup = in_hour.iter().find(|(_, k)| *k == RecordingKind::Backup).unwrap().0;
            let answered_before = s.records.iter().any(|r| r.start < first_backup && r.selfreport.answered());
            if answered_before {
                v.push(format!("seed {seed} hour {h}: backup after an answered self-report"));
            }
        }
    }

    for w in starts.windows(2) {
        let d = w[1].0.saturating_sub(w[0].0);
        if d < cfg.min_gap {
            v.push(format!("seed {seed}: starts {} and {} only {} ms apart", w[0].0, w[1].0, d.as_ms()));
        }
    }
    // second alert: exactly first_alert_wait after the intent, iff not
    // answered first and the hour was still running
    for (i, &t0) in intents.iter().enumerate() {
        let next = intents.get(i + 1).copied().unwrap_or(SimTime::from_ms(u64::MAX));
        let hour_end = hour_ends.iter().copied().find(|&e| e >= t0).unwrap();
        let later: Vec<_> = vibrations.iter().filter(|&&x| x > t0 && x < next && x <= hour_end).collect();
        let due = t0.plus(cfg.first_alert_wait);
        let answered_early = answers.iter().any(|&a| a >= t0 && a < due);
        let expect_second = !answered_early && due <= hour_end;
        match (expect_second, later.as_slice()) {
            (true, [x]) if **x == due => {}
            (false, []) => {}
            _ => v.push(format!("seed {seed}: intent at {t0} followed by second alerts {later:?}")),
        }
    }
    v
}
