//! WAV ingestion: 16-bit PCM mono in, 8 kHz floating point out.

use std::f64::consts::PI;
use std::path::Path;

use super::{VadError, SAMPLE_RATE};

/// Reads a 16-bit PCM mono WAV and returns samples at 8 kHz in [-1, 1].
pub fn read_wav_8k(path: impl AsRef<Path>) -> Result<Vec<f64>, VadError> {
    let (samples, rate) = read_wav(path)?;
    Ok(if rate == SAMPLE_RATE {
        samples
    } else {
        resample(&samples, rate, SAMPLE_RATE)
    })
}

/// Raw samples and sample rate of a 16-bit PCM mono WAV.
pub fn read_wav(path: impl AsRef<Path>) -> Result<(Vec<f64>, u32), VadError> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| VadError::Audio(format!("{}: {e}", path.display())))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(VadError::Audio(format!(
            "{}: expected mono, got {} channels",
            path.display(),
            spec.channels
        )));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(VadError::Audio(format!(
            "{}: expected 16-bit PCM, got {:?} {}-bit",
            path.display(),
            spec.sample_format,
            spec.bits_per_sample
        )));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f64 / 32768.0))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| VadError::Audio(format!("{}: {e}", path.display())))?;
    Ok((samples, spec.sample_rate))
}

/// Writes 16-bit PCM mono. Samples are clipped to [-1, 1].
pub fn write_wav(path: impl AsRef<Path>, samples: &[f64], sample_rate: u32) -> Result<(), VadError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path.as_ref(), spec).map_err(|e| VadError::Audio(e.to_string()))?;
    for &s in samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        w.write_sample(v).map_err(|e| VadError::Audio(e.to_string()))?;
    }
    w.finalize().map_err(|e| VadError::Audio(e.to_string()))
}

const KERNEL_ZEROS: f64 = 16.0;

/// Band-limited resampling with a Blackman-windowed sinc kernel. When
/// downsampling the cutoff sits at 95% of the output Nyquist frequency.
pub fn resample(input: &[f64], from_rate: u32, to_rate: u32) -> Vec<f64> {
    assert!(from_rate > 0 && to_rate > 0);
    if from_rate == to_rate || input.is_empty() {
        return input.to_vec();
    }
    let step = from_rate as f64 / to_rate as f64;
    // cutoff in cycles per input sample, relative to input Nyquist = 1
    let cutoff = (to_rate as f64 / from_rate as f64).min(1.0) * 0.95;
    let half = (KERNEL_ZEROS / cutoff).ceil() as isize;
    let out_len = ((input.len() as f64) / step).floor() as usize;
    let mut out = Vec::with_capacity(out_len);
    for m in 0..out_len {
        let centre = m as f64 * step;
        let base = centre.floor() as isize;
        let mut acc = 0.0;
        let mut norm = 0.0;
        for n in (base - half)..=(base + half + 1) {
            if n < 0 || n as usize >= input.len() {
                continue;
            }
            let x = n as f64 - centre;
            let w = kernel(x, cutoff, half as f64);
            acc += input[n as usize] * w;
            norm += w;
        }
        out.push(if norm.abs() > 1e-12 { acc / norm } else { 0.0 });
    }
    out
}

fn kernel(x: f64, cutoff: f64, half: f64) -> f64 {
    if x.abs() > half {
        return 0.0;
    }
    let sinc = if x == 0.0 {
        1.0
    } else {
        (PI * cutoff * x).sin() / (PI * cutoff * x)
    };
    let r = (x / half + 1.0) / 2.0;
    let blackman = 0.42 - 0.5 * (2.0 * PI * r).cos() + 0.08 * (4.0 * PI * r).cos();
    sinc * blackman
}
