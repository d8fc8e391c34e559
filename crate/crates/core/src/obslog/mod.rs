//! Watch log records, annotations and the collection/conversation metrics.
//!
//! Every log line is one JSON object whose `type` field names the record and
//! its schema version, e.g. `{"type":"hourly/v1",...}`. Counted events are
//! stored as `{"count":n,"at":[ms,...]}` and the count must equal the number
//! of timestamps. Times are milliseconds on the study clock (day 0 is the
//! Monday the study starts).
//!
//! | type            | written                                   |
//! |-----------------|-------------------------------------------|
//! | `config/v1`     | once, at setup                            |
//! | `before/v1`     | hourly between setup and study start      |
//! | `hourly/v1`     | at the end of every study hour the app ran |
//! | `ble/v1`        | periodically while scanning or advertising |
//! | `error/v1`      | on every exception                        |

pub mod annotations;
pub mod metrics;

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::escalation::AvailabilityWindows;
use crate::session::Role;
use crate::time::{Duration, SimTime, MS_PER_HOUR};
use crate::transport::Partner;

pub use annotations::{read_annotations, write_annotations, RecordingAnnotation};
pub use metrics::{
    app_running_hours, collection_metrics, conversation_metrics, percent_half_up, CollectionCounts,
    CollectionMetrics, ConversationCounts, ConversationMetrics, StudyMetrics,
};

#[derive(Debug, Error)]
pub enum ObslogError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: schema violation: {msg}")]
    Schema { line: usize, msg: String },
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
    #[error("invalid counts: {0}")]
    Counts(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Csv(String),
}

/// A count with the time of every occurrence.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Timed {
    pub count: u32,
    pub at: Vec<SimTime>,
}

impl Timed {
    pub fn push(&mut self, t: SimTime) {
        self.count += 1;
        self.at.push(t);
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    fn check(&self, name: &str, from: SimTime, to: SimTime) -> Result<(), String> {
        if self.count as usize != self.at.len() {
            return Err(format!("{name}: count {} but {} timestamps", self.count, self.at.len()));
        }
        if let Some(t) = self.at.iter().find(|t| **t < from || **t >= to) {
            return Err(format!("{name}: timestamp {t} outside {from}..{to}"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLog {
    pub timestamp: SimTime,
    pub couple: u32,
    pub role: Role,
    pub partner: Partner,
    pub days: u32,
    pub windows: AvailabilityWindows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeforeStudyLog {
    pub timestamp: SimTime,
    pub battery_level: f64,
    pub seconds_until_start: u64,
    pub exceptions_last_hour: u32,
}

/// Summary of one study hour, written when the hour ends. `timestamp` is
/// the end of the covered hour.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HourlyLog {
    pub timestamp: SimTime,
    pub battery_level: f64,
    pub ble_scan_or_advertise: Timed,
    pub closeness_met: Timed,
    pub no_silence_detections: Timed,
    pub vad_detections: Timed,
    pub connections: Timed,
    pub recordings: Timed,
    pub selfreport_alert1: Timed,
    pub selfreport_alert2: Timed,
    pub selfreport_started: Timed,
    pub selfreport_completed: Timed,
    pub was_backup: bool,
    pub audio_discarded: bool,
    pub errors: Timed,
    pub restarts: Timed,
    pub internet_available: bool,
    pub storage_remaining_mb: f64,
    /// Start of the recording kept for this hour, if any.
    pub retained_start: Option<SimTime>,
}

impl HourlyLog {
    pub fn covered_hour_start(&self) -> SimTime {
        SimTime::from_ms(self.timestamp.as_ms().saturating_sub(MS_PER_HOUR))
    }

    /// (day, hour of day) of the covered hour.
    pub fn covered_slot(&self) -> (u32, u32) {
        let h = self.covered_hour_start();
        (h.day(), h.hour_of_day())
    }

    fn fields(&self) -> [(&'static str, &Timed); 12] {
        [
            ("ble_scan_or_advertise", &self.ble_scan_or_advertise),
            ("closeness_met", &self.closeness_met),
            ("no_silence_detections", &self.no_silence_detections),
            ("vad_detections", &self.vad_detections),
            ("connections", &self.connections),
            ("recordings", &self.recordings),
            ("selfreport_alert1", &self.selfreport_alert1),
            ("selfreport_alert2", &self.selfreport_alert2),
            ("selfreport_started", &self.selfreport_started),
            ("selfreport_completed", &self.selfreport_completed),
            ("errors", &self.errors),
            ("restarts", &self.restarts),
        ]
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.timestamp.as_ms() < MS_PER_HOUR || self.timestamp.offset_in_hour() != 0 {
            return Err(format!("timestamp {} is not an hour boundary", self.timestamp));
        }
        let from = self.covered_hour_start();
        // a self-report answered just before the hour closes may land on
        // the boundary itself
        let to = self.timestamp.plus(Duration::from_ms(1));
        for (name, t) in self.fields() {
            t.check(name, from, to)?;
        }
        check_percent("battery_level", self.battery_level)?;
        if !self.storage_remaining_mb.is_finite() || self.storage_remaining_mb < 0.0 {
            return Err("storage_remaining_mb must be a non-negative number".into());
        }
        if let Some(r) = self.retained_start {
            if !self.recordings.at.contains(&r) {
                return Err(format!("retained recording {r} is not among this hour's recordings"));
            }
        }
        Ok(())
    }
}

fn check_percent(name: &str, v: f64) -> Result<(), String> {
    if (0.0..=100.0).contains(&v) {
        Ok(())
    } else {
        Err(format!("{name} {v} outside [0, 100]"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BleLog {
    pub timestamp: SimTime,
    pub rssi_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorLog {
    pub timestamp: SimTime,
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum LogRecord {
    #[serde(rename = "config/v1")]
    Config(ConfigLog),
    #[serde(rename = "before/v1")]
    BeforeStudy(BeforeStudyLog),
    #[serde(rename = "hourly/v1")]
    Hourly(HourlyLog),
    #[serde(rename = "ble/v1")]
    Ble(BleLog),
    #[serde(rename = "error/v1")]
    Error(ErrorLog),
}

impl LogRecord {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            LogRecord::Config(c) => c.windows.validate().map_err(|e| e.to_string()),
            LogRecord::BeforeStudy(b) => check_percent("battery_level", b.battery_level),
            LogRecord::Hourly(h) => h.validate(),
            LogRecord::Ble(b) => {
                if b.rssi_dbm.is_finite() && b.rssi_dbm < 0.0 {
                    Ok(())
                } else {
                    Err(format!("rssi {} must be negative", b.rssi_dbm))
                }
            }
            LogRecord::Error(_) => Ok(()),
        }
    }
}

/// One line, no trailing newline.
pub fn write_log(entry: &LogRecord) -> String {
    serde_json::to_string(entry).expect("log records serialize")
}

/// Parses and schema-checks one line; `line_no` is used in errors.
pub fn parse_log(line: &str, line_no: usize) -> Result<LogRecord, ObslogError> {
    let rec: LogRecord = serde_json::from_str(line).map_err(|e| ObslogError::Parse {
        line: line_no,
        msg: e.to_string(),
    })?;
    rec.validate().map_err(|msg| ObslogError::Schema { line: line_no, msg })?;
    Ok(rec)
}

pub fn read_log_file(path: &Path) -> Result<Vec<LogRecord>, ObslogError> {
    let io_err = |source| ObslogError::Io {
        path: path.display().to_string(),
        source,
    };
    let f = fs::File::open(path).map_err(io_err)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_log(&line, i + 1).map_err(|e| match e {
            ObslogError::Parse { line, msg } => ObslogError::Parse {
                line,
                msg: format!("{}: {msg}", path.display()),
            },
            ObslogError::Schema { line, msg } => ObslogError::Schema {
                line,
                msg: format!("{}: {msg}", path.display()),
            },
            other => other,
        })?);
    }
    Ok(out)
}

pub fn write_log_file(path: &Path, records: &[LogRecord]) -> Result<(), ObslogError> {
    let io_err = |source| ObslogError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    let mut buf = Vec::new();
    for r in records {
        buf.extend_from_slice(write_log(r).as_bytes());
        buf.push(b'\n');
    }
    fs::File::create(path).and_then(|mut f| f.write_all(&buf)).map_err(io_err)
}

/// Logs of one watch as laid out on disk:
/// `<root>/couple_NNN/<central|peripheral>/<kind>.jsonl`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WatchLogs {
    pub couple: u32,
    pub role: Option<Role>,
    pub config: Option<ConfigLog>,
    pub before: Vec<BeforeStudyLog>,
    pub hourly: Vec<HourlyLog>,
    pub ble: Vec<BleLog>,
    pub errors: Vec<ErrorLog>,
}

pub const LOG_FILES: [&str; 5] = ["config", "before", "hourly", "ble", "errors"];

pub fn role_dir(role: Role) -> &'static str {
    match role {
        Role::Central => "central",
        Role::Peripheral => "peripheral",
    }
}

impl WatchLogs {
    pub fn records(&self) -> [(&'static str, Vec<LogRecord>); 5] {
        [
            ("config", self.config.iter().cloned().map(LogRecord::Config).collect()),
            ("before", self.before.iter().cloned().map(LogRecord::BeforeStudy).collect()),
            ("hourly", self.hourly.iter().cloned().map(LogRecord::Hourly).collect()),
            ("ble", self.ble.iter().cloned().map(LogRecord::Ble).collect()),
            ("errors", self.errors.iter().cloned().map(LogRecord::Error).collect()),
        ]
    }

    pub fn dir(&self, root: &Path) -> std::path::PathBuf {
        root.join(format!("couple_{:03}", self.couple))
            .join(role_dir(self.role.unwrap_or(Role::Central)))
    }

    pub fn write(&self, root: &Path) -> Result<(), ObslogError> {
        let dir = self.dir(root);
        for (name, recs) in self.records() {
            write_log_file(&dir.join(format!("{name}.jsonl")), &recs)?;
        }
        Ok(())
    }

    fn absorb(&mut self, rec: LogRecord) {
        match rec {
            LogRecord::Config(c) => {
                self.role = Some(c.role);
                self.config = Some(c);
            }
            LogRecord::BeforeStudy(b) => self.before.push(b),
            LogRecord::Hourly(h) => self.hourly.push(h),
            LogRecord::Ble(b) => self.ble.push(b),
            LogRecord::Error(e) => self.errors.push(e),
        }
    }
}

/// Reads every watch directory under `root`, sorted by couple then role.
/// Each directory must contain a config log.
pub fn read_log_tree(root: &Path) -> Result<Vec<WatchLogs>, ObslogError> {
    let io_err = |p: &Path, source| ObslogError::Io {
        path: p.display().to_string(),
        source,
    };
    let mut couples: Vec<_> = fs::read_dir(root)
        .map_err(|e| io_err(root, e))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            name.strip_prefix("couple_")
                .and_then(|n| n.parse::<u32>().ok())
                .map(|n| (n, e.path()))
        })
        .collect();
    couples.sort();
    let mut out = Vec::new();
    for (couple, dir) in couples {
        for role in [Role::Central, Role::Peripheral] {
            let wdir = dir.join(role_dir(role));
            if !wdir.is_dir() {
                continue;
            }
            let mut w = WatchLogs {
                couple,
                role: Some(role),
                ..Default::default()
            };
            for name in LOG_FILES {
                let p = wdir.join(format!("{name}.jsonl"));
                if p.exists() {
                    for rec in read_log_file(&p)? {
                        w.absorb(rec);
                    }
                }
            }
            if w.config.is_none() {
                return Err(ObslogError::Schema {
                    line: 0,
                    msg: format!("{}: missing config log", wdir.display()),
                });
            }
            out.push(w);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hour_end() -> SimTime {
        SimTime::at(2, 18, 0, 0)
    }

    fn sample_hourly() -> HourlyLog {
        let mut h = HourlyLog {
            timestamp: hour_end(),
            battery_level: 71.5,
            internet_available: true,
            storage_remaining_mb: 2048.25,
            ..Default::default()
        };
        let t = SimTime::at(2, 17, 5, 12);
        h.ble_scan_or_advertise.push(SimTime::at(2, 17, 0, 0));
        h.closeness_met.push(t);
        h.recordings.push(t);
        h.selfreport_alert1.push(SimTime::at(2, 17, 10, 12));
        h.selfreport_started.push(SimTime::at(2, 17, 11, 0));
        h.retained_start = Some(t);
        h
    }

    #[test]
    fn hourly_round_trip() {
        let rec = LogRecord::Hourly(sample_hourly());
        let line = write_log(&rec);
        assert!(line.starts_with("{\"type\":\"hourly/v1\""));
        assert_eq!(parse_log(&line, 1).unwrap(), rec);
    }

    #[test]
    fn every_type_round_trips() {
        let recs = vec![
            LogRecord::Config(ConfigLog {
                timestamp: SimTime::ZERO,
                couple: 3,
                role: Role::Peripheral,
                partner: Partner::Female,
                days: 7,
                windows: AvailabilityWindows::default(),
            }),
            LogRecord::BeforeStudy(BeforeStudyLog {
                timestamp: SimTime::from_ms(5),
                battery_level: 99.0,
                seconds_until_start: 86_400,
                exceptions_last_hour: 0,
            }),
            LogRecord::Ble(BleLog {
                timestamp: SimTime::from_secs(3),
                rssi_dbm: -71.123456789,
            }),
            LogRecord::Error(ErrorLog {
                timestamp: SimTime::from_secs(9),
                kind: "crash".into(),
                message: "null \"quoted\"".into(),
            }),
        ];
        for r in recs {
            assert_eq!(parse_log(&write_log(&r), 1).unwrap(), r);
        }
    }

    #[test]
    fn count_must_match_timestamps() {
        let mut h = sample_hourly();
        let t = SimTime::at(2, 17, 30, 0);
        h.recordings = Timed {
            count: 3,
            at: vec![SimTime::at(2, 17, 5, 12), t, t],
        };
        assert!(parse_log(&write_log(&LogRecord::Hourly(h.clone())), 1).is_ok());
        h.recordings.at.pop();
        assert!(matches!(
            parse_log(&write_log(&LogRecord::Hourly(h)), 4),
            Err(ObslogError::Schema { line: 4, .. })
        ));
    }

    #[test]
    fn truncated_line_is_a_parse_error() {
        let line = write_log(&LogRecord::Hourly(sample_hourly()));
        let cut = &line[..line.len() / 2];
        assert!(matches!(parse_log(cut, 7), Err(ObslogError::Parse { line: 7, .. })));
    }

    #[test]
    fn timestamps_outside_hour_rejected() {
        let mut h = sample_hourly();
        h.errors.push(SimTime::at(2, 16, 59, 0));
        assert!(h.validate().is_err());
    }

    #[test]
    fn tree_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let w = WatchLogs {
            couple: 4,
            role: Some(Role::Central),
            config: Some(ConfigLog {
                timestamp: SimTime::ZERO,
                couple: 4,
                role: Role::Central,
                partner: Partner::Male,
                days: 7,
                windows: AvailabilityWindows::default(),
            }),
            hourly: vec![sample_hourly()],
            ..Default::default()
        };
        w.write(dir.path()).unwrap();
        let back = read_log_tree(dir.path()).unwrap();
        assert_eq!(back, vec![w]);
    }

    fn arb_timed(from: u64) -> impl Strategy<Value = Timed> {
        prop::collection::vec(0u64..MS_PER_HOUR, 0..5).prop_map(move |v| Timed {
            count: v.len() as u32,
            at: v.into_iter().map(|o| SimTime::from_ms(from + o)).collect(),
        })
    }

    proptest! {
        #[test]
        fn hourly_round_trip_property(
            hour in 1u64..400,
            battery in 0.0f64..=100.0,
            storage in 0.0f64..1e5,
            a in arb_timed(0), b in arb_timed(0), c in arb_timed(0),
            flags in any::<(bool, bool, bool)>(),
        ) {
            let start = (hour - 1) * MS_PER_HOUR;
            let shift = |t: Timed| Timed { count: t.count, at: t.at.into_iter().map(|x| SimTime::from_ms(x.as_ms() + start)).collect() };
            let recordings = shift(a);
            let h = HourlyLog {
                timestamp: SimTime::from_ms(hour * MS_PER_HOUR),
                battery_level: battery,
                storage_remaining_mb: storage,
                retained_start: recordings.at.last().copied(),
                recordings,
                vad_detections: shift(b),
                errors: shift(c),
                was_backup: flags.0,
                audio_discarded: flags.1,
                internet_available: flags.2,
                ..Default::default()
            };
            let rec = LogRecord::Hourly(h);
            prop_assert_eq!(parse_log(&write_log(&rec), 1).unwrap(), rec);
        }
    }
}
