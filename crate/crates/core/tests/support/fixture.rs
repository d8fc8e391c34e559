//! A log tree and annotation file with known counts: 1392 expected hours,
//! 1028 with the app running, 1019 collected and triggered, 618 started,
//! 598 completed; 277 triggered and 737 backup recordings.

use std::path::Path;

use dyadsense::escalation::{AvailabilityWindows, DayWindows, HourRange};
use dyadsense::obslog::{write_annotations, ConfigLog, HourlyLog, RecordingAnnotation, WatchLogs};
use dyadsense::session::{RecordingKind, Role};
use dyadsense::time::{Duration, SimTime};
use dyadsense::transport::Partner;

pub const COLLECTION: [u64; 6] = [1392, 1028, 1019, 1019, 618, 598];
pub const COLLECTION_PCT: [f64; 6] = [73.2, 99.1, 73.2, 99.1, 60.6, 58.7];
/// speech overall/triggered/backup, conversation overall/triggered, either
/// partner spoke (triggered), conversation backup.
pub const CONVERSATION_PCT: [f64; 7] = [78.0, 92.4, 72.6, 53.1, 77.6, 88.1, 43.8];

const DAYS: u32 = 6;
const WATCHES: u32 = 29;

fn windows() -> AvailabilityWindows {
    let day = DayWindows {
        morning: HourRange::new(8, 11),
        evening: HourRange::new(17, 22),
    };
    AvailabilityWindows {
        weekday: day,
        weekend: day,
    }
}

fn row(id: String, kind: RecordingKind, male: bool, female: bool, speech: bool) -> RecordingAnnotation {
    RecordingAnnotation {
        recording_id: id,
        has_speech: speech,
        male_spoke: male,
        female_spoke: female,
        conversation: male && female,
        kind,
    }
}

/// 277 triggered: 215 conversations, 29 with one partner, 12 with other
/// speech only, 21 silent. 737 backup: 323 conversations, 212 with one
/// partner, 202 without speech.
pub fn table_annotations() -> Vec<RecordingAnnotation> {
    let mut out = Vec::new();
    let mut push = |n: usize, kind: RecordingKind, male: bool, female: bool, speech: bool| {
        for _ in 0..n {
            let id = format!("rec-{:04}", out.len());
            out.push(row(id, kind, male, female, speech));
        }
    };
    use RecordingKind::{Backup, Triggered};
    push(215, Triggered, true, true, true);
    push(29, Triggered, false, true, true);
    push(12, Triggered, false, false, true);
    push(21, Triggered, false, false, false);
    push(323, Backup, true, true, true);
    push(212, Backup, true, false, true);
    push(202, Backup, false, false, false);
    out
}

pub fn table_watches() -> Vec<WatchLogs> {
    let w = windows();
    let [_, running, collected, triggered, started, completed] = COLLECTION;
    let mut i = 0u64;
    let mut out = Vec::new();
    for n in 0..WATCHES {
        let role = if n % 2 == 0 { Role::Central } else { Role::Peripheral };
        let partner = if role == Role::Central { Partner::Male } else { Partner::Female };
        let mut logs = WatchLogs {
            couple: n / 2,
            role: Some(role),
            config: Some(ConfigLog {
                timestamp: SimTime::ZERO,
                couple: n / 2,
                role,
                partner,
                days: DAYS,
                windows: w,
            }),
            ..Default::default()
        };
        for (day, hour) in w.study_hours(DAYS) {
            let k = i;
            i += 1;
            if k >= running {
                continue;
            }
            let start = SimTime::at(day, hour, 10, 0);
            let mut h = HourlyLog {
                timestamp: SimTime::at(day, hour, 0, 0).plus(Duration::from_minutes(60)),
                battery_level: 50.0,
                internet_available: true,
                storage_remaining_mb: 1000.0,
                ..Default::default()
            };
            h.ble_scan_or_advertise.push(SimTime::at(day, hour, 0, 0));
            if k < collected {
                h.recordings.push(start);
                h.retained_start = Some(start);
            }
            if k < triggered {
                h.selfreport_alert1.push(start.plus(Duration::from_minutes(5)));
            }
            if k < started {
                h.selfreport_started.push(start.plus(Duration::from_minutes(6)));
            }
            if k < completed {
                h.selfreport_completed.push(start.plus(Duration::from_minutes(8)));
            }
            logs.hourly.push(h);
        }
        out.push(logs);
    }
    out
}

/// Writes `logs/` and `annotations.csv` under `root`.
pub fn write_table_fixture(root: &Path) {
    for w in table_watches() {
        w.write(&root.join("logs")).unwrap();
    }
    write_annotations(&root.join("annotations.csv"), &table_annotations()).unwrap();
}
