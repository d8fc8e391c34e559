//! Scenario files (TOML, `version = 1`).
//!
//! Every field has a default, so an empty file plus `version = 1` is the
//! default 13-couple week. Probabilities are per watch unless stated.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::escalation::AvailabilityWindows;
use crate::proximity::{PathLossModel, ProximityConfig};
use crate::session::TimingConfig;
use crate::transport::BleConfig;

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {msg}")]
    Read { path: String, msg: String },
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Behavior {
    pub together_bout_mean_min: f64,
    pub bouts_per_day: f64,
    pub together_distance_m: (f64, f64),
    pub apart_distance_m: f64,
    pub speech_prob_together: f64,
    pub speech_prob_apart: f64,
    pub talk_spurt_mean_s: f64,
    /// Share of together-bouts in which the couple does not talk (talk
    /// probability falls to the apart level).
    pub quiet_bout_fraction: f64,
    /// Per couple-hour chance of a television playing while together.
    pub tv_prob_per_hour: f64,
    /// Per day chance that both watches spend 1-3 hours off the wrist,
    /// lying next to each other by a television.
    pub unworn_prob_per_day: f64,
    /// Partner speech is audible on the other watch within this distance.
    pub audible_distance_m: f64,
}

impl Default for Behavior {
    fn default() -> Self {
        Behavior {
            together_bout_mean_min: 25.0,
            bouts_per_day: 6.0,
            together_distance_m: (0.5, 3.0),
            apart_distance_m: 50.0,
            speech_prob_together: 0.15,
            speech_prob_apart: 0.02,
            talk_spurt_mean_s: 4.0,
            quiet_bout_fraction: 0.2,
            tv_prob_per_hour: 0.05,
            unworn_prob_per_day: 0.0,
            audible_distance_m: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Compliance {
    pub start: f64,
    pub complete: f64,
    pub start_delay_s: (u64, u64),
    pub fill_duration_s: (u64, u64),
    pub diary: f64,
}

impl Default for Compliance {
    fn default() -> Self {
        Compliance {
            start: 0.61,
            complete: 0.97,
            start_delay_s: (10, 180),
            fill_duration_s: (60, 240),
            diary: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Faults {
    pub charge_failure_prob: f64,
    /// Couples (0-based) whose watches are never switched on.
    pub never_powered: Vec<u32>,
    pub crash_prob_per_hour: f64,
    pub restart_success_prob: f64,
    pub watchdog: bool,
}

impl Default for Faults {
    fn default() -> Self {
        Faults {
            charge_failure_prob: 0.15,
            never_powered: vec![7],
            crash_prob_per_hour: 0.02,
            restart_success_prob: 0.9,
            watchdog: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransportParams {
    pub ble: BleConfig,
    pub data_layer_latency_ms: u64,
    pub data_layer_drop: f64,
    pub internet_latency_ms: u64,
    pub internet_jitter_ms: u64,
    pub internet_drop: f64,
    /// Per partner-hour chance that an internet outage begins.
    pub outage_prob_per_hour: f64,
    pub outage_mean_min: f64,
    /// Per couple-day chance that the server hangs up; it is restarted
    /// `server_restart_after_min` later.
    pub server_hangup_prob_per_day: f64,
    pub server_restart_after_min: u64,
    pub store_and_forward: bool,
}

impl Default for TransportParams {
    fn default() -> Self {
        TransportParams {
            ble: BleConfig::default(),
            data_layer_latency_ms: 200,
            data_layer_drop: 0.0,
            internet_latency_ms: 500,
            internet_jitter_ms: 500,
            internet_drop: 0.005,
            outage_prob_per_hour: 0.02,
            outage_mean_min: 20.0,
            server_hangup_prob_per_day: 0.01,
            server_restart_after_min: 120,
            store_and_forward: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DspParams {
    /// Segments of synthetic audio used to train the detector in dsp mode.
    pub train_segments: usize,
    pub train_stride: usize,
    pub rms_threshold: f64,
}

impl Default for DspParams {
    fn default() -> Self {
        DspParams {
            train_segments: 600,
            train_stride: 4,
            rms_threshold: crate::vad::DEFAULT_RMS_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyParams {
    pub scheduled_minute: u32,
    pub random_minute_max: u32,
}

impl Default for PolicyParams {
    fn default() -> Self {
        PolicyParams {
            scheduled_minute: 30,
            random_minute_max: 55,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    pub seed: u64,
    pub n_couples: u32,
    pub days: u32,
    pub windows: AvailabilityWindows,
    /// Per-couple overrides; empty means every couple uses `windows`.
    pub couple_windows: Vec<AvailabilityWindows>,
    pub behavior: Behavior,
    pub compliance: Compliance,
    pub faults: Faults,
    pub transport: TransportParams,
    pub path_loss: PathLossModel,
    pub proximity: ProximityConfig,
    /// Link loss below `threshold - disconnect_margin_db`.
    pub disconnect_margin_db: f64,
    pub timing: TimingConfig,
    pub dsp: DspParams,
    pub policy: PolicyParams,
    pub battery_drain_per_hour: f64,
    pub storage_mb: f64,
    pub ble_log_period_s: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            version: SCENARIO_VERSION,
            seed: 42,
            n_couples: 13,
            days: 7,
            windows: AvailabilityWindows::default(),
            couple_windows: Vec::new(),
            behavior: Behavior::default(),
            compliance: Compliance::default(),
            faults: Faults::default(),
            transport: TransportParams::default(),
            path_loss: PathLossModel::default(),
            proximity: ProximityConfig::default(),
            disconnect_margin_db: 10.0,
            timing: TimingConfig::default(),
            dsp: DspParams::default(),
            policy: PolicyParams::default(),
            battery_drain_per_hour: 4.0,
            storage_mb: 4000.0,
            ble_log_period_s: 60,
        }
    }
}

fn prob(errs: &mut Vec<String>, name: &str, p: f64) {
    if !(0.0..=1.0).contains(&p) {
        errs.push(format!("{name} = {p} is not a probability in [0, 1]"));
    }
}

fn positive(errs: &mut Vec<String>, name: &str, v: f64) {
    if !(v.is_finite() && v > 0.0) {
        errs.push(format!("{name} = {v} must be positive"));
    }
}

fn range<T: PartialOrd + std::fmt::Debug>(errs: &mut Vec<String>, name: &str, r: (T, T)) {
    if r.0 > r.1 {
        errs.push(format!("{name} = {r:?} has min above max"));
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Read {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn windows_for(&self, couple: u32) -> &AvailabilityWindows {
        self.couple_windows.get(couple as usize).unwrap_or(&self.windows)
    }

    /// Every violated constraint, not just the first.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut e = Vec::new();
        if self.version != SCENARIO_VERSION {
            e.push(format!("version = {} (expected {SCENARIO_VERSION})", self.version));
        }
        if self.days == 0 {
            e.push("days must be at least 1".into());
        }
        if self.n_couples == 0 {
            e.push("n_couples must be at least 1".into());
        }
        if !self.couple_windows.is_empty() && self.couple_windows.len() != self.n_couples as usize {
            e.push(format!(
                "couple_windows has {} entries for {} couples",
                self.couple_windows.len(),
                self.n_couples
            ));
        }
        for w in std::iter::once(&self.windows).chain(&self.couple_windows) {
            if let Err(err) = w.validate() {
                e.push(err.to_string());
            }
        }
        let b = &self.behavior;
        positive(&mut e, "behavior.together_bout_mean_min", b.together_bout_mean_min);
        if !(b.bouts_per_day >= 0.0 && b.bouts_per_day.is_finite()) {
            e.push(format!("behavior.bouts_per_day = {} must be non-negative", b.bouts_per_day));
        }
        range(&mut e, "behavior.together_distance_m", b.together_distance_m);
        positive(&mut e, "behavior.together_distance_m.0", b.together_distance_m.0);
        positive(&mut e, "behavior.apart_distance_m", b.apart_distance_m);
        positive(&mut e, "behavior.talk_spurt_mean_s", b.talk_spurt_mean_s);
        positive(&mut e, "behavior.audible_distance_m", b.audible_distance_m);
        prob(&mut e, "behavior.speech_prob_together", b.speech_prob_together);
        prob(&mut e, "behavior.speech_prob_apart", b.speech_prob_apart);
        prob(&mut e, "behavior.quiet_bout_fraction", b.quiet_bout_fraction);
        prob(&mut e, "behavior.tv_prob_per_hour", b.tv_prob_per_hour);
        prob(&mut e, "behavior.unworn_prob_per_day", b.unworn_prob_per_day);
        let c = &self.compliance;
        prob(&mut e, "compliance.start", c.start);
        prob(&mut e, "compliance.complete", c.complete);
        prob(&mut e, "compliance.diary", c.diary);
        range(&mut e, "compliance.start_delay_s", c.start_delay_s);
        range(&mut e, "compliance.fill_duration_s", c.fill_duration_s);
        let f = &self.faults;
        prob(&mut e, "faults.charge_failure_prob", f.charge_failure_prob);
        prob(&mut e, "faults.crash_prob_per_hour", f.crash_prob_per_hour);
        prob(&mut e, "faults.restart_success_prob", f.restart_success_prob);
        let t = &self.transport;
        prob(&mut e, "transport.ble.failure_prob", t.ble.failure_prob);
        if t.ble.failure_cap == 0 {
            e.push("transport.ble.failure_cap must be at least 1".into());
        }
        prob(&mut e, "transport.data_layer_drop", t.data_layer_drop);
        prob(&mut e, "transport.internet_drop", t.internet_drop);
        prob(&mut e, "transport.outage_prob_per_hour", t.outage_prob_per_hour);
        positive(&mut e, "transport.outage_mean_min", t.outage_mean_min);
        prob(&mut e, "transport.server_hangup_prob_per_day", t.server_hangup_prob_per_day);
        if let Err(err) = self.path_loss.validate() {
            e.push(format!("path_loss: {err}"));
        }
        if let Err(err) = self.proximity.validate() {
            e.push(format!("proximity: {err}"));
        }
        if !(self.disconnect_margin_db >= 0.0) {
            e.push("disconnect_margin_db must be non-negative".into());
        }
        if let Err(err) = self.timing.validate() {
            e.push(err.to_string());
        }
        if self.policy.scheduled_minute > 55 || self.policy.random_minute_max > 55 {
            e.push("policy minutes must leave room for a recording (<= 55)".into());
        }
        if self.dsp.train_segments < 40 {
            e.push("dsp.train_segments must be at least 40".into());
        }
        if !(self.battery_drain_per_hour >= 0.0 && self.battery_drain_per_hour <= 100.0) {
            e.push("battery_drain_per_hour must be within [0, 100]".into());
        }
        positive(&mut e, "storage_mb", self.storage_mb);
        if self.ble_log_period_s == 0 {
            e.push("ble_log_period_s must be at least 1".into());
        }
        if e.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::Invalid(e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_round_trips() {
        let s = Scenario::default();
        s.validate().unwrap();
        assert_eq!(Scenario::from_toml(&s.to_toml()).unwrap(), s);
        assert_eq!(Scenario::from_toml("version = 1").unwrap(), s);
    }

    #[test]
    fn all_violations_reported() {
        let text = "version = 1\n[compliance]\nstart = 1.3\n[faults]\ncrash_prob_per_hour = -0.1\n";
        match Scenario::from_toml(text) {
            Err(ScenarioError::Invalid(v)) => {
                assert_eq!(v.len(), 2, "{v:?}");
                assert!(v[0].contains("compliance.start"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(matches!(Scenario::from_toml("version = 1\nbogus = 3\n"), Err(ScenarioError::Parse(_))));
    }
}
