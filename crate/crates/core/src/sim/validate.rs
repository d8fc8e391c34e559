//! Whole-run invariants checked against the written logs.

use crate::obslog::HourlyLog;
use crate::session::{classify_kind, RecordingKind};
use crate::time::SimTime;

use super::scenario::Scenario;
use super::SimOutput;

fn label(couple: u32, role: &str, h: &HourlyLog) -> String {
    let (d, hr) = h.covered_slot();
    format!("couple {couple} {role} day {d} hour {hr:02}")
}

/// Every invariant violation found in `out`, empty when the run is sound.
pub fn check_output(s: &Scenario, out: &SimOutput) -> Vec<String> {
    let t = &s.timing;
    let mut v = Vec::new();
    let mut retained_hours = 0usize;
    for c in &out.couples {
        for w in &c.watches {
            let role = w.role.map(crate::obslog::role_dir).unwrap_or("?");
            let mut prev: Option<SimTime> = None;
            for h in &w.hourly {
                let at = label(c.couple, role, h);
                if let Err(e) = h.validate() {
                    v.push(format!("{at}: {e}"));
                }
                for &start in &h.recordings.at {
                    if let Some(p) = prev {
                        if start.saturating_sub(p) < t.min_gap {
                            v.push(format!("{at}: recording at {start} only {} ms after {p}", start.saturating_sub(p).as_ms()));
                        }
                    }
                    prev = Some(start);
                    if start.offset_in_hour() > t.latest_start_offset().as_ms() {
                        v.push(format!("{at}: recording at {start} cannot finish in the hour"));
                    }
                }
                if let Some(r) = h.retained_start {
                    retained_hours += 1;
                    if h.selfreport_started.is_empty() && h.selfreport_completed.is_empty() {
                        v.push(format!("{at}: audio kept without an answered self-report"));
                    }
                    if h.audio_discarded && h.recordings.count == 1 {
                        v.push(format!("{at}: single recording {r} both kept and discarded"));
                    }
                }
                let last_kind = h.recordings.at.last().map(|&r| classify_kind(r, t.backup_minute));
                if h.was_backup != (last_kind == Some(RecordingKind::Backup)) {
                    v.push(format!("{at}: was_backup does not match the last recording"));
                }
                let hour = h.covered_hour_start();
                let backup_at = hour.plus(t.backup_offset());
                let clean = h.errors.is_empty() && h.restarts.is_empty();
                let early = h.recordings.at.iter().any(|&r| r < backup_at);
                let before = SimTime::from_ms(hour.as_ms().saturating_sub(crate::time::MS_PER_HOUR));
                let known = !s.windows_for(c.couple).is_available(before.day(), before.hour_of_day())
                    || hour.as_ms() == 0
                    || w.hourly.iter().any(|x| x.covered_hour_start() == before);
                let gap_ok = known
                    && prev_before(&w.hourly, hour).is_none_or(|p| backup_at.saturating_sub(p) >= t.min_gap);
                if clean && !early && gap_ok && h.recordings.at.first() != Some(&backup_at) {
                    v.push(format!("{at}: no backup recording at minute {}", t.backup_minute));
                }
            }
        }
    }
    let annotations: usize = out.couples.iter().map(|c| c.kept.len()).sum();
    if annotations != retained_hours {
        v.push(format!("{annotations} annotations for {retained_hours} kept recordings"));
    }
    v
}

/// Start of the last recording logged before `hour`.
fn prev_before(logs: &[HourlyLog], hour: SimTime) -> Option<SimTime> {
    logs.iter()
        .flat_map(|h| h.recordings.at.iter().copied())
        .filter(|&r| r < hour)
        .max()
}

