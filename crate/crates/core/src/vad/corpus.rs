//! Synthetic labelled audio for training and testing the detector.
//!
//! Speech-like seconds are harmonic sources (90-260 Hz fundamental with
//! drift) shaped by two moving formant resonances and a syllabic amplitude
//! envelope over a faint noise floor. Non-speech seconds are coloured noise
//! (white, pink, brown or band-limited) with slow level fluctuation.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{segment_frames, FeatureVector, Label, MfccExtractor, SEGMENT_LEN};

const SR: f64 = super::SAMPLE_RATE as f64;

fn resonance(freq: f64, centre: f64, bandwidth: f64) -> f64 {
    let d = (freq - centre) / bandwidth;
    1.0 / (1.0 + d * d)
}

/// One second of speech-like audio.
pub fn speech_second<R: Rng>(rng: &mut R) -> Vec<f64> {
    let level: f64 = rng.gen_range(0.05..0.35);
    let f0_start: f64 = rng.gen_range(90.0..260.0);
    let f0_end: f64 = f0_start * rng.gen_range(0.8..1.25);
    let syllable_hz = rng.gen_range(3.0..6.0);
    let am_depth = rng.gen_range(0.2..0.6);
    let am_phase = rng.gen_range(0.0..2.0 * PI);
    // formant targets change every ~250 ms
    let n_syll = 4;
    let f1: Vec<f64> = (0..=n_syll).map(|_| rng.gen_range(300.0..900.0)).collect();
    let f2: Vec<f64> = (0..=n_syll).map(|_| rng.gen_range(900.0..2500.0)).collect();
    let floor = Normal::new(0.0, level * 0.03).unwrap();

    let max_h = (3900.0 / f0_start.min(f0_end)).ceil() as usize;
    // harmonic k carries phase k*phi + offset[k]; sin(k*phi) and cos(k*phi)
    // come from the Chebyshev recurrence
    let offsets: Vec<(f64, f64)> = (0..max_h)
        .map(|_| {
            let o: f64 = rng.gen_range(0.0..2.0 * PI);
            (o.cos(), o.sin())
        })
        .collect();
    let mut phi = 0.0f64;
    let mut out = Vec::with_capacity(SEGMENT_LEN);
    for n in 0..SEGMENT_LEN {
        let t = n as f64 / SR;
        let f0 = f0_start + (f0_end - f0_start) * t + 3.0 * (2.0 * PI * 5.5 * t).sin();
        phi += 2.0 * PI * f0 / SR;
        let pos = t * n_syll as f64;
        let i = (pos.floor() as usize).min(n_syll - 1);
        let frac = pos - i as f64;
        let c1 = f1[i] + (f1[i + 1] - f1[i]) * frac;
        let c2 = f2[i] + (f2[i + 1] - f2[i]) * frac;
        let (s1, c1phi) = phi.sin_cos();
        let two_cos = 2.0 * c1phi;
        let (mut sin_prev, mut cos_prev) = (0.0, 1.0);
        let (mut sin_k, mut cos_k) = (s1, c1phi);
        let mut s = 0.0;
        for (h, &(co, so)) in offsets.iter().enumerate() {
            let k = (h + 1) as f64;
            let freq = k * f0;
            if freq >= 3900.0 {
                break;
            }
            let amp = (resonance(freq, c1, 120.0) + 0.6 * resonance(freq, c2, 180.0) + 0.02) / k.sqrt();
            s += amp * (sin_k * co + cos_k * so);
            let sin_next = two_cos * sin_k - sin_prev;
            let cos_next = two_cos * cos_k - cos_prev;
            sin_prev = sin_k;
            cos_prev = cos_k;
            sin_k = sin_next;
            cos_k = cos_next;
        }
        let env = 1.0 - am_depth * (0.5 + 0.5 * (2.0 * PI * syllable_hz * t + am_phase).sin());
        out.push(s * env);
    }
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    for v in out.iter_mut() {
        *v = (*v / peak * level + floor.sample(rng)).clamp(-1.0, 1.0);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseColour {
    White,
    Pink,
    Brown,
    Band,
}

/// One second of non-speech noise.
pub fn noise_second<R: Rng>(rng: &mut R) -> Vec<f64> {
    let colour = match rng.gen_range(0..4) {
        0 => NoiseColour::White,
        1 => NoiseColour::Pink,
        2 => NoiseColour::Brown,
        _ => NoiseColour::Band,
    };
    noise_second_of(rng, colour)
}

pub fn noise_second_of<R: Rng>(rng: &mut R, colour: NoiseColour) -> Vec<f64> {
    let level: f64 = rng.gen_range(0.03..0.3);
    let white = Normal::new(0.0, 1.0).unwrap();
    let mut raw = Vec::with_capacity(SEGMENT_LEN);
    match colour {
        NoiseColour::White => raw.extend((0..SEGMENT_LEN).map(|_| white.sample(rng))),
        NoiseColour::Pink => {
            // Paul Kellet's economy pink filter
            let (mut b0, mut b1, mut b2) = (0.0, 0.0, 0.0);
            for _ in 0..SEGMENT_LEN {
                let w = white.sample(rng);
                b0 = 0.99765 * b0 + w * 0.0990460;
                b1 = 0.96300 * b1 + w * 0.2965164;
                b2 = 0.57000 * b2 + w * 1.0526913;
                raw.push(b0 + b1 + b2 + w * 0.1848);
            }
        }
        NoiseColour::Brown => {
            let mut acc = 0.0;
            for _ in 0..SEGMENT_LEN {
                acc = 0.995 * acc + white.sample(rng);
                raw.push(acc);
            }
        }
        NoiseColour::Band => {
            // two-pole resonator driven by white noise
            let centre = rng.gen_range(200.0..3500.0);
            let r: f64 = rng.gen_range(0.55..0.85);
            let a1 = 2.0 * r * (2.0 * PI * centre / SR).cos();
            let a2 = -r * r;
            let (mut y1, mut y2) = (0.0, 0.0);
            for _ in 0..SEGMENT_LEN {
                let y = white.sample(rng) + a1 * y1 + a2 * y2;
                y2 = y1;
                y1 = y;
                raw.push(y);
            }
        }
    }
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    let rms = (raw.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / raw.len() as f64).sqrt().max(1e-12);
    let wobble_hz = rng.gen_range(0.2..1.5);
    let wobble_depth = rng.gen_range(0.0..0.3);
    raw.iter()
        .enumerate()
        .map(|(n, v)| {
            let env = 1.0 - wobble_depth * (0.5 + 0.5 * (2.0 * PI * wobble_hz * n as f64 / SR).sin());
            ((v - mean) / rms * level / 3.0 * env).clamp(-1.0, 1.0)
        })
        .collect()
}

/// Near-silent room tone, well under the default RMS gate.
pub fn ambient_second<R: Rng>(rng: &mut R) -> Vec<f64> {
    let white = Normal::new(0.0, 0.002).unwrap();
    (0..SEGMENT_LEN).map(|_| f64::clamp(white.sample(rng), -1.0, 1.0)).collect()
}

/// A labelled set of 1-second segments.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub segments: Vec<(Vec<f64>, Label)>,
}

impl SyntheticCorpus {
    /// `n_segments` seconds, alternating speech and non-speech, seeded.
    pub fn generate(n_segments: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let segments = (0..n_segments)
            .map(|i| {
                if i % 2 == 0 {
                    (speech_second(&mut rng), Label::Speech)
                } else {
                    (noise_second(&mut rng), Label::NonSpeech)
                }
            })
            .collect();
        SyntheticCorpus { segments }
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Concatenated audio and per-second labels.
    pub fn flatten(&self) -> (Vec<f64>, Vec<Label>) {
        let mut audio = Vec::with_capacity(self.segments.len() * SEGMENT_LEN);
        let mut labels = Vec::with_capacity(self.segments.len());
        for (s, l) in &self.segments {
            audio.extend_from_slice(s);
            labels.push(*l);
        }
        (audio, labels)
    }

    pub fn from_flat(audio: &[f64], labels: &[Label]) -> Self {
        SyntheticCorpus {
            segments: audio
                .chunks_exact(SEGMENT_LEN)
                .zip(labels)
                .map(|(s, l)| (s.to_vec(), *l))
                .collect(),
        }
    }
}

/// Frame features of labelled segments; every `stride`-th frame of each
/// second inherits the segment label.
pub fn labeled_frames(
    segments: &[(Vec<f64>, Label)],
    extractor: &MfccExtractor,
    stride: usize,
) -> Vec<(FeatureVector, Label)> {
    let stride = stride.max(1);
    let mut out = Vec::new();
    for (audio, label) in segments {
        let frames = segment_frames(audio).expect("corpus segments are one second of valid audio");
        for f in frames.iter().step_by(stride) {
            out.push((extractor.extract(f), *label));
        }
    }
    out
}
