//! Two-stage voice activity detection.
//!
//! A second of 8 kHz audio is first gated on RMS energy. Seconds that pass
//! the gate are split into forty 25 ms frames; each frame is reduced to 12
//! MFCCs and scored by a linear classifier on standardized features. The
//! second is speech when enough of its frames are.

pub mod corpus;
pub mod mfcc;
pub mod train;
pub mod wav;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use mfcc::{extract_mfcc, DspConfig, MfccExtractor};
pub use train::{train, HyperGrid, TrainConfig, TrainReport};

pub const SAMPLE_RATE: u32 = 8_000;
pub const FRAME_LEN: usize = 200;
pub const FEATURE_LEN: usize = 12;
pub const SEGMENT_LEN: usize = SAMPLE_RATE as usize;
pub const FRAMES_PER_SEGMENT: usize = SEGMENT_LEN / FRAME_LEN;

#[derive(Debug, Error)]
pub enum VadError {
    #[error("frame must hold {FRAME_LEN} samples, got {0}")]
    FrameLength(usize),
    #[error("sample {index} is not finite or outside [-1, 1]: {value}")]
    SampleRange { index: usize, value: f64 },
    #[error("segment must hold {SEGMENT_LEN} samples, got {0}")]
    SegmentLength(usize),
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),
    #[error("training error: {0}")]
    Training(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("model file line {line}: {msg}")]
    ModelFormat { line: usize, msg: String },
    #[error("empty batch")]
    EmptyBatch,
    #[error("audio: {0}")]
    Audio(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// 25 ms of 8 kHz audio.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioFrame(Vec<f64>);

impl AudioFrame {
    pub fn new(samples: Vec<f64>) -> Result<Self, VadError> {
        if samples.len() != FRAME_LEN {
            return Err(VadError::FrameLength(samples.len()));
        }
        if let Some((index, &value)) = samples
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || v.abs() > 1.0)
        {
            return Err(VadError::SampleRange { index, value });
        }
        Ok(AudioFrame(samples))
    }

    pub fn silent() -> Self {
        AudioFrame(vec![0.0; FRAME_LEN])
    }

    pub fn samples(&self) -> &[f64] {
        &self.0
    }
}

/// MFCC coefficients 2..=13 of one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; FEATURE_LEN]);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Speech,
    NonSpeech,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Speech => 1.0,
            Label::NonSpeech => -1.0,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Speech => "speech",
            Label::NonSpeech => "nonspeech",
        })
    }
}

impl FromStr for Label {
    type Err = VadError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "speech" | "1" => Ok(Label::Speech),
            "nonspeech" | "non-speech" | "noise" | "0" => Ok(Label::NonSpeech),
            other => Err(VadError::Audio(format!("unknown label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SegmentDecision {
    Silence,
    Speech,
    NonSpeech,
}

impl fmt::Display for SegmentDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SegmentDecision::Silence => "Silence",
            SegmentDecision::Speech => "Speech",
            SegmentDecision::NonSpeech => "NonSpeech",
        })
    }
}

/// Trained linear speech/non-speech classifier plus the segment-level gate
/// parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VadModel {
    pub weights: [f64; FEATURE_LEN],
    pub bias: f64,
    pub feat_mean: [f64; FEATURE_LEN],
    pub feat_std: [f64; FEATURE_LEN],
    pub rms_threshold: f64,
    pub segment_speech_fraction: f64,
}

pub const DEFAULT_RMS_THRESHOLD: f64 = 0.01;
pub const DEFAULT_SEGMENT_SPEECH_FRACTION: f64 = 0.5;

const MODEL_MAGIC: &str = "vadmodel";
const MODEL_VERSION: u32 = 1;

impl VadModel {
    /// Model with zero weights and unit standardization; decisions are the
    /// sign of `bias`.
    pub fn constant(bias: f64) -> Self {
        VadModel {
            weights: [0.0; FEATURE_LEN],
            bias,
            feat_mean: [0.0; FEATURE_LEN],
            feat_std: [1.0; FEATURE_LEN],
            rms_threshold: DEFAULT_RMS_THRESHOLD,
            segment_speech_fraction: DEFAULT_SEGMENT_SPEECH_FRACTION,
        }
    }

    pub fn validate(&self) -> Result<(), VadError> {
        let finite = self
            .weights
            .iter()
            .chain(&self.feat_mean)
            .chain(&self.feat_std)
            .chain([&self.bias, &self.rms_threshold, &self.segment_speech_fraction])
            .all(|v| v.is_finite());
        if !finite {
            return Err(VadError::InvalidModel("non-finite parameter".into()));
        }
        if self.feat_std.iter().any(|&s| s <= 0.0) {
            return Err(VadError::InvalidModel("feat_std must be strictly positive".into()));
        }
        if !(self.rms_threshold > 0.0 && self.rms_threshold < 1.0) {
            return Err(VadError::InvalidModel(format!(
                "rms_threshold must lie in (0, 1), got {}",
                self.rms_threshold
            )));
        }
        if !(self.segment_speech_fraction > 0.0 && self.segment_speech_fraction <= 1.0) {
            return Err(VadError::InvalidModel(format!(
                "segment_speech_fraction must lie in (0, 1], got {}",
                self.segment_speech_fraction
            )));
        }
        Ok(())
    }

    /// Signed distance-like score; positive means speech.
    pub fn score(&self, features: &FeatureVector) -> f64 {
        let mut s = self.bias;
        for i in 0..FEATURE_LEN {
            s += self.weights[i] * (features.0[i] - self.feat_mean[i]) / self.feat_std[i];
        }
        s
    }

    pub fn classify_frame(&self, features: &FeatureVector) -> Label {
        if self.score(features) > 0.0 {
            Label::Speech
        } else {
            Label::NonSpeech
        }
    }

    /// Versioned line-oriented text form. Floats are written in shortest
    /// round-trip notation so `from_text(to_text(m)) == m` bit for bit.
    pub fn to_text(&self) -> String {
        fn row(name: &str, vals: &[f64]) -> String {
            let body: Vec<String> = vals.iter().map(|v| format!("{v:?}")).collect();
            format!("{name} {}\n", body.join(" "))
        }
        let mut out = format!("{MODEL_MAGIC} v{MODEL_VERSION}\n");
        out += &row("weights", &self.weights);
        out += &row("bias", &[self.bias]);
        out += &row("feat_mean", &self.feat_mean);
        out += &row("feat_std", &self.feat_std);
        out += &row("rms_threshold", &[self.rms_threshold]);
        out += &row("segment_speech_fraction", &[self.segment_speech_fraction]);
        out
    }

    pub fn from_text(text: &str) -> Result<Self, VadError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(VadError::ModelFormat {
            line: 1,
            msg: "empty model file".into(),
        })?;
        if header.trim() != format!("{MODEL_MAGIC} v{MODEL_VERSION}") {
            return Err(VadError::ModelFormat {
                line: 1,
                msg: format!("expected header `{MODEL_MAGIC} v{MODEL_VERSION}`, got `{header}`"),
            });
        }
        let mut fields: std::collections::HashMap<&str, (usize, Vec<f64>)> = Default::default();
        for (idx, line) in lines {
            let lineno = idx + 1;
            let mut parts = line.split_whitespace();
            let key = parts.next().unwrap_or_default();
            let vals = parts
                .map(|p| {
                    p.parse::<f64>().map_err(|e| VadError::ModelFormat {
                        line: lineno,
                        msg: format!("bad number {p:?}: {e}"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            if fields.insert(key, (lineno, vals)).is_some() {
                return Err(VadError::ModelFormat {
                    line: lineno,
                    msg: format!("duplicate field {key}"),
                });
            }
        }
        let mut take = |key: &str, len: usize| -> Result<Vec<f64>, VadError> {
            let (line, vals) = fields.remove(key).ok_or(VadError::ModelFormat {
                line: 0,
                msg: format!("missing field {key}"),
            })?;
            if vals.len() != len {
                return Err(VadError::ModelFormat {
                    line,
                    msg: format!("{key} expects {len} values, got {}", vals.len()),
                });
            }
            Ok(vals)
        };
        let arr = |v: Vec<f64>| -> [f64; FEATURE_LEN] { v.try_into().expect("length checked") };
        let model = VadModel {
            weights: arr(take("weights", FEATURE_LEN)?),
            bias: take("bias", 1)?[0],
            feat_mean: arr(take("feat_mean", FEATURE_LEN)?),
            feat_std: arr(take("feat_std", FEATURE_LEN)?),
            rms_threshold: take("rms_threshold", 1)?[0],
            segment_speech_fraction: take("segment_speech_fraction", 1)?[0],
        };
        if let Some((key, (line, _))) = fields.into_iter().next() {
            return Err(VadError::ModelFormat {
                line,
                msg: format!("unknown field {key}"),
            });
        }
        model.validate()?;
        Ok(model)
    }
}

pub fn rms(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    (samples.iter().map(|x| x * x).sum::<f64>() / samples.len() as f64).sqrt()
}

pub fn frame_rms(frame: &AudioFrame) -> f64 {
    rms(frame.samples())
}

/// Per-second RMS values of `audio`, ignoring a trailing partial second.
pub fn per_second_rms(audio: &[f64]) -> Vec<f64> {
    audio.chunks_exact(SEGMENT_LEN).map(rms).collect()
}

/// RMS gate threshold set to the `percentile`-th (nearest rank) per-second
/// RMS of an ambient recording.
pub fn calibrate_rms_threshold(ambient: &[f64], percentile: f64) -> Result<f64, VadError> {
    let mut levels = per_second_rms(ambient);
    if levels.is_empty() {
        return Err(VadError::SegmentLength(ambient.len()));
    }
    if !(0.0..=100.0).contains(&percentile) {
        return Err(VadError::InvalidModel(format!("percentile {percentile} outside [0, 100]")));
    }
    levels.sort_by(|a, b| a.total_cmp(b));
    let rank = ((percentile / 100.0) * levels.len() as f64).ceil().max(1.0) as usize;
    let t = levels[rank - 1];
    if t <= 0.0 {
        return Err(VadError::InvalidModel("ambient recording is digitally silent".into()));
    }
    Ok(t.min(0.999))
}

/// Splits a 1-second segment into its 40 frames. Fails on wrong length or
/// out-of-range samples.
pub fn segment_frames(samples: &[f64]) -> Result<Vec<AudioFrame>, VadError> {
    if samples.len() != SEGMENT_LEN {
        return Err(VadError::SegmentLength(samples.len()));
    }
    samples.chunks_exact(FRAME_LEN).map(|c| AudioFrame::new(c.to_vec())).collect()
}

/// Model plus feature extractor: the runtime detector.
#[derive(Debug, Clone)]
pub struct Vad {
    pub model: VadModel,
    extractor: MfccExtractor,
}

impl Vad {
    pub fn new(model: VadModel) -> Self {
        Vad {
            model,
            extractor: MfccExtractor::default(),
        }
    }

    pub fn with_extractor(model: VadModel, extractor: MfccExtractor) -> Self {
        Vad { model, extractor }
    }

    pub fn extractor(&self) -> &MfccExtractor {
        &self.extractor
    }

    pub fn features(&self, frame: &AudioFrame) -> FeatureVector {
        self.extractor.extract(frame)
    }

    pub fn classify_frame(&self, frame: &AudioFrame) -> Label {
        self.model.classify_frame(&self.extractor.extract(frame))
    }

    pub fn decide_segment(&self, samples: &[f64]) -> Result<SegmentDecision, VadError> {
        let frames = segment_frames(samples)?;
        if rms(samples) < self.model.rms_threshold {
            return Ok(SegmentDecision::Silence);
        }
        let speech = frames
            .iter()
            .filter(|f| self.classify_frame(f) == Label::Speech)
            .count();
        if speech as f64 / FRAMES_PER_SEGMENT as f64 >= self.model.segment_speech_fraction {
            Ok(SegmentDecision::Speech)
        } else {
            Ok(SegmentDecision::NonSpeech)
        }
    }

    /// Runtime chunk processing: seconds are decided in order and the chunk
    /// stops at the first Speech second. Returns that second's index, or
    /// `None` if the chunk holds no speech. Trailing partial seconds are
    /// ignored.
    pub fn first_speech_second(&self, chunk: &[f64]) -> Result<Option<usize>, VadError> {
        for (i, sec) in chunk.chunks_exact(SEGMENT_LEN).enumerate() {
            if self.decide_segment(sec)? == SegmentDecision::Speech {
                return Ok(Some(i));
            }
        }
        Ok(None)
    }

    /// Per-second decisions over an arbitrary-length 8 kHz signal.
    pub fn decide_all(&self, audio: &[f64]) -> Result<Vec<SegmentDecision>, VadError> {
        audio.chunks_exact(SEGMENT_LEN).map(|s| self.decide_segment(s)).collect()
    }
}

pub fn classify_frame(model: &VadModel, features: &FeatureVector) -> Label {
    model.classify_frame(features)
}

pub fn decide_segment(model: &VadModel, samples: &[f64]) -> Result<SegmentDecision, VadError> {
    Vad::new(model.clone()).decide_segment(samples)
}

/// Confusion counts with speech as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub speech_hit: u64,
    pub speech_miss: u64,
    pub noise_hit: u64,
    pub noise_false_alarm: u64,
}

impl Confusion {
    pub fn from_pairs<I: IntoIterator<Item = (Label, Label)>>(pairs: I) -> Self {
        let mut c = Confusion::default();
        for (truth, predicted) in pairs {
            c.record(truth, predicted);
        }
        c
    }

    pub fn record(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Speech, Label::Speech) => self.speech_hit += 1,
            (Label::Speech, Label::NonSpeech) => self.speech_miss += 1,
            (Label::NonSpeech, Label::NonSpeech) => self.noise_hit += 1,
            (Label::NonSpeech, Label::Speech) => self.noise_false_alarm += 1,
        }
    }

    pub fn speech_total(&self) -> u64 {
        self.speech_hit + self.speech_miss
    }

    pub fn noise_total(&self) -> u64 {
        self.noise_hit + self.noise_false_alarm
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub accuracy: f64,
    /// Speech hit rate.
    pub shr: f64,
    /// False alarm rate: one minus the noise hit rate.
    pub far: f64,
}

impl EvalMetrics {
    pub fn from_confusion(c: &Confusion) -> Result<Self, VadError> {
        let p = c.speech_total();
        let n = c.noise_total();
        if p == 0 {
            return Err(VadError::UndefinedMetric("no speech examples".into()));
        }
        if n == 0 {
            return Err(VadError::UndefinedMetric("no non-speech examples".into()));
        }
        let noise_hit_rate = c.noise_hit as f64 / n as f64;
        Ok(EvalMetrics {
            accuracy: (c.speech_hit + c.noise_hit) as f64 / (p + n) as f64,
            shr: c.speech_hit as f64 / p as f64,
            far: 1.0 - noise_hit_rate,
        })
    }
}

/// Frame-level metrics of `model` on labelled feature vectors.
pub fn evaluate(model: &VadModel, labeled: &[(FeatureVector, Label)]) -> Result<EvalMetrics, VadError> {
    let c = Confusion::from_pairs(labeled.iter().map(|(f, l)| (*l, model.classify_frame(f))));
    EvalMetrics::from_confusion(&c)
}

/// Mean wall-clock seconds per frame for feature extraction plus
/// classification.
pub fn measure_frame_latency(vad: &Vad, frames: &[AudioFrame]) -> Result<f64, VadError> {
    if frames.is_empty() {
        return Err(VadError::EmptyBatch);
    }
    let start = std::time::Instant::now();
    for f in frames {
        std::hint::black_box(vad.classify_frame(std::hint::black_box(f)));
    }
    Ok(start.elapsed().as_secs_f64() / frames.len() as f64)
}
