//! Deterministic study simulator.
//!
//! A scenario seeds one ChaCha8 stream per (couple, purpose), so the result
//! does not depend on how couples are scheduled across threads.

pub mod compare;
pub mod engine;
pub mod faults;
pub mod scenario;
pub mod trace;
pub mod validate;

use std::fs;
use std::io::BufWriter;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::obslog::metrics::StudyMetrics;
use crate::obslog::{write_annotations, ObslogError, RecordingAnnotation, WatchLogs};
use crate::vad::corpus::{labeled_frames, SyntheticCorpus};
use crate::vad::train::{train, TrainConfig};
use crate::vad::{Vad, VadError};

pub use compare::{compare_policies, PolicyComparison};
pub use engine::{CoupleOutput, Detector, EscalationLine, KeptRecording, Tallies};
pub use faults::{apply_faults, FaultSchedule};
pub use scenario::{Scenario, ScenarioError};
pub use trace::{generate_couple_trace, CoupleTrace};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("vad training failed: {0}")]
    Vad(#[from] VadError),
    #[error(transparent)]
    Log(#[from] ObslogError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SimError + '_ {
    move |source| SimError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Speech detection reads the ground-truth trace.
    #[default]
    GroundTruth,
    /// Speech detection runs the trained detector on synthesized audio.
    Dsp,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ground-truth" | "ground_truth" => Ok(Mode::GroundTruth),
            "dsp" => Ok(Mode::Dsp),
            _ => Err(format!("unknown mode {s:?} (expected ground-truth or dsp)")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Stream {
    Trace = 0,
    Faults = 1,
    Runtime = 2,
    Policy = 3,
}

pub(crate) fn stream_rng(seed: u64, couple: u32, purpose: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(couple as u64 * 16 + purpose as u64);
    rng
}

/// Detector trained on the synthetic corpus with the scenario's settings.
pub fn train_vad(s: &Scenario) -> Result<Vad, SimError> {
    let corpus = SyntheticCorpus::generate(s.dsp.train_segments, s.seed);
    let vad = Vad::new(crate::vad::VadModel::constant(0.0));
    let frames = labeled_frames(&corpus.segments, vad.extractor(), s.dsp.train_stride);
    let cfg = TrainConfig {
        seed: s.seed,
        rms_threshold: s.dsp.rms_threshold,
        ..TrainConfig::default()
    };
    let report = train(&frames, &cfg)?;
    Ok(Vad::new(report.model))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub seed: u64,
    pub mode: Mode,
    pub n_couples: u32,
    pub days: u32,
    pub metrics: StudyMetrics,
    pub tallies: Tallies,
    pub violations: Vec<String>,
}

impl SimReport {
    pub fn to_text(&self) -> String {
        let t = &self.tallies;
        let mut s = format!(
            "Simulated study: {} couples, {} days, seed {}, {:?} detection\n\n",
            self.n_couples, self.days, self.seed, self.mode
        );
        s.push_str(&self.metrics.to_text());
        s.push_str("\nRecordings\n");
        for (label, v) in [
            ("Triggered started", t.triggered_started),
            ("Backup started", t.backup_started),
            ("Triggered kept", t.retained_triggered),
            ("Backup kept", t.retained_backup),
            ("Audio deleted", t.audio_deleted),
        ] {
            s.push_str(&format!("  {label:<52} {v:>8}\n"));
        }
        s.push_str("\nFaults and transport\n");
        for (label, v) in [
            ("Watch-days without charge", t.dead_watch_days),
            ("App crashes", t.crashes),
            ("Failed self-restarts", t.failed_restarts),
            ("BLE connections", t.ble_connections),
            ("BLE connect failures", t.ble_connect_failures),
            ("BLE stack resets", t.ble_stack_resets),
            ("Link losses", t.link_losses),
            ("Self-reports shown", t.selfreports_shown),
        ] {
            s.push_str(&format!("  {label:<52} {v:>8}\n"));
        }
        for (k, v) in &t.not_shown {
            s.push_str(&format!("  {:<52} {v:>8}\n", format!("Not shown: {k}")));
        }
        if !t.escalations.is_empty() {
            s.push_str("\nEscalations\n");
            for (k, v) in &t.escalations {
                s.push_str(&format!("  {k:<52} {v:>8}\n"));
            }
        }
        s.push_str(&format!("\nInvariant violations: {}\n", self.violations.len()));
        for v in &self.violations {
            s.push_str(&format!("  {v}\n"));
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub report: SimReport,
    pub couples: Vec<CoupleOutput>,
}

impl SimOutput {
    pub fn watches(&self) -> Vec<WatchLogs> {
        self.couples.iter().flat_map(|c| c.watches.iter().cloned()).collect()
    }

    pub fn annotations(&self) -> Vec<RecordingAnnotation> {
        self.couples
            .iter()
            .flat_map(|c| c.kept.iter().map(|k| k.annotation.clone()))
            .collect()
    }

    pub fn escalations(&self) -> Vec<EscalationLine> {
        self.couples.iter().flat_map(|c| c.escalations.iter().cloned()).collect()
    }

    /// Writes `logs/`, `annotations.csv`, `escalation.jsonl`, `report.txt`
    /// and `report.json` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), SimError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let logs = dir.join("logs");
        for w in self.couples.iter().flat_map(|c| c.watches.iter()) {
            w.write(&logs)?;
        }
        write_annotations(&dir.join("annotations.csv"), &self.annotations())?;
        let esc = dir.join("escalation.jsonl");
        let f = fs::File::create(&esc).map_err(io_err(&esc))?;
        crate::jsonl::write_lines(BufWriter::new(f), &self.escalations()).map_err(io_err(&esc))?;
        let txt = dir.join("report.txt");
        fs::write(&txt, self.report.to_text()).map_err(io_err(&txt))?;
        let json = dir.join("report.json");
        let body = serde_json::to_string_pretty(&self.report).expect("report serializes");
        fs::write(&json, body + "\n").map_err(io_err(&json))?;
        Ok(())
    }
}

pub fn simulate_couple(s: &Scenario, couple: u32, detector: &Detector<'_>) -> (CoupleTrace, CoupleOutput) {
    let trace = generate_couple_trace(s, couple, &mut stream_rng(s.seed, couple, Stream::Trace));
    let faults = apply_faults(s, couple, &mut stream_rng(s.seed, couple, Stream::Faults));
    let out = engine::run_couple(s, couple, &trace, &faults, detector, stream_rng(s.seed, couple, Stream::Runtime));
    (trace, out)
}

pub(crate) fn run_with_traces(s: &Scenario, mode: Mode) -> Result<(Vec<CoupleTrace>, SimOutput), SimError> {
    s.validate()?;
    let vad = match mode {
        Mode::Dsp => Some(train_vad(s)?),
        Mode::GroundTruth => None,
    };
    let detector = match &vad {
        Some(v) => Detector::Dsp(v),
        None => Detector::GroundTruth,
    };
    let (traces, couples): (Vec<_>, Vec<_>) = (0..s.n_couples)
        .into_par_iter()
        .map(|c| simulate_couple(s, c, &detector))
        .collect::<Vec<_>>()
        .into_iter()
        .unzip();
    let mut tallies = Tallies::default();
    for c in &couples {
        tallies.add(&c.tallies);
    }
    let mut out = SimOutput {
        report: SimReport {
            seed: s.seed,
            mode,
            n_couples: s.n_couples,
            days: s.days,
            metrics: StudyMetrics::default(),
            tallies,
            violations: Vec::new(),
        },
        couples,
    };
    out.report.metrics = StudyMetrics::compute(&out.watches(), &out.annotations())?;
    out.report.violations = validate::check_output(s, &out);
    Ok((traces, out))
}

/// Runs every couple of the scenario.
pub fn run(s: &Scenario, mode: Mode) -> Result<SimOutput, SimError> {
    run_with_traces(s, mode).map(|(_, out)| out)
}
