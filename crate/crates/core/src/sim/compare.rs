//! Conversation yield of the interaction-triggered policy against
//! time-based sampling on the same couples.
//!
//! Both baselines record five minutes in every watch-hour the app was
//! running: one at a fixed minute, one at a uniformly drawn minute. Every
//! self-report is answered so that each policy keeps all its recordings.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::engine::{annotate, partner_of};
use super::scenario::Scenario;
use super::{run_with_traces, stream_rng, Mode, SimError, Stream};
use crate::obslog::metrics::{fmt_pct, percent_half_up};
use crate::session::RecordingKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Yield {
    pub recordings: u64,
    pub conversation: u64,
}

impl Yield {
    pub fn rate(&self) -> Option<f64> {
        percent_half_up(self.conversation, self.recordings)
    }

    fn push(&mut self, conversation: bool) {
        self.recordings += 1;
        self.conversation += conversation as u64;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyComparison {
    pub kept: Yield,
    pub triggered: Yield,
    pub backup: Yield,
    pub scheduled: Yield,
    pub random: Yield,
}

impl PolicyComparison {
    pub fn rows(&self) -> [(&'static str, Yield); 5] {
        [
            ("Interaction-triggered (all kept)", self.kept),
            ("Interaction-triggered (triggered)", self.triggered),
            ("Interaction-triggered (backup)", self.backup),
            ("Scheduled minute", self.scheduled),
            ("Random minute", self.random),
        ]
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{:<40} {:>10} {:>14}\n", "Policy", "Recordings", "Conversation %");
        for (name, y) in self.rows() {
            s.push_str(&format!("{name:<40} {:>10} {:>14}\n", y.recordings, fmt_pct(y.rate())));
        }
        s
    }
}

pub fn compare_policies(s: &Scenario, mode: Mode) -> Result<PolicyComparison, SimError> {
    let mut s = s.clone();
    s.compliance.start = 1.0;
    s.compliance.complete = 1.0;
    let (traces, out) = run_with_traces(&s, mode)?;
    let mut cmp = PolicyComparison {
        kept: Yield::default(),
        triggered: Yield::default(),
        backup: Yield::default(),
        scheduled: Yield::default(),
        random: Yield::default(),
    };
    for a in out.annotations() {
        cmp.kept.push(a.conversation);
        match a.kind {
            RecordingKind::Triggered => cmp.triggered.push(a.conversation),
            RecordingKind::Backup => cmp.backup.push(a.conversation),
        }
    }
    let len_s = (s.timing.record_duration.as_ms() / 1000) as usize;
    let audible = s.behavior.audible_distance_m;
    for (trace, c) in traces.iter().zip(&out.couples) {
        let mut rng = stream_rng(s.seed, c.couple, Stream::Policy);
        for w in &c.watches {
            let Some(role) = w.role else { continue };
            for h in &w.hourly {
                let (day, hour) = h.covered_slot();
                let Some(ht) = trace.hour(day, hour) else { continue };
                let at = |minute: u32| {
                    annotate(ht, minute as usize * 60, len_s, partner_of(role), audible, String::new(), RecordingKind::Backup)
                        .conversation
                };
                cmp.scheduled.push(at(s.policy.scheduled_minute));
                let m = rng.gen_range(0..=s.policy.random_minute_max);
                cmp.random.push(at(m));
            }
        }
    }
    Ok(cmp)
}
