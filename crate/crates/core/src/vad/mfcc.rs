//! MFCC front-end for 25 ms frames at 8 kHz.
//!
//! Pipeline: Hamming window, zero-pad to the FFT length, power spectrum,
//! triangular mel filterbank, log with floor, orthonormal DCT-II. The first
//! cepstral coefficient is discarded and coefficients 2..=13 are returned.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{AudioFrame, FeatureVector, FEATURE_LEN, FRAME_LEN};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DspConfig {
    pub sample_rate: u32,
    pub fft_len: usize,
    pub n_filters: usize,
    pub n_ceps: usize,
    pub low_hz: f64,
    pub high_hz: f64,
    pub log_floor: f64,
}

impl Default for DspConfig {
    fn default() -> Self {
        DspConfig {
            sample_rate: 8_000,
            fft_len: 256,
            n_filters: 26,
            n_ceps: 13,
            low_hz: 0.0,
            high_hz: 4_000.0,
            log_floor: 1e-10,
        }
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Corner frequencies (Hz) of the filterbank: `n_filters + 2` points evenly
/// spaced on the mel scale.
pub fn filter_edges_hz(cfg: &DspConfig) -> Vec<f64> {
    let lo = hz_to_mel(cfg.low_hz);
    let hi = hz_to_mel(cfg.high_hz);
    let step = (hi - lo) / (cfg.n_filters + 1) as f64;
    (0..cfg.n_filters + 2).map(|i| mel_to_hz(lo + step * i as f64)).collect()
}

#[derive(Debug, Clone)]
struct TriangularFilter {
    first_bin: usize,
    weights: Vec<f64>,
}

/// Reusable extractor; construction plans the FFT and tabulates the window,
/// filterbank and DCT basis.
#[derive(Clone)]
pub struct MfccExtractor {
    cfg: DspConfig,
    window: Vec<f64>,
    filters: Vec<TriangularFilter>,
    // rows 1..n_ceps of the orthonormal DCT-II basis, row-major
    dct: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for MfccExtractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MfccExtractor").field("cfg", &self.cfg).finish()
    }
}

impl Default for MfccExtractor {
    fn default() -> Self {
        Self::new(DspConfig::default())
    }
}

impl MfccExtractor {
    pub fn new(cfg: DspConfig) -> Self {
        assert!(cfg.fft_len >= FRAME_LEN, "fft_len must cover a frame");
        assert_eq!(cfg.n_ceps, FEATURE_LEN + 1, "feature vector keeps n_ceps - 1 coefficients");
        assert!(cfg.n_filters >= cfg.n_ceps);

        let window = (0..FRAME_LEN)
            .map(|n| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / (FRAME_LEN - 1) as f64).cos())
            .collect();

        let edges = filter_edges_hz(&cfg);
        let n_bins = cfg.fft_len / 2 + 1;
        let bin_hz = cfg.sample_rate as f64 / cfg.fft_len as f64;
        let filters = (1..=cfg.n_filters)
            .map(|m| {
                let (left, centre, right) = (edges[m - 1], edges[m], edges[m + 1]);
                let mut first_bin = None;
                let mut weights = Vec::new();
                for k in 0..n_bins {
                    let f = k as f64 * bin_hz;
                    let w = if f > left && f < centre {
                        (f - left) / (centre - left)
                    } else if f >= centre && f < right {
                        (right - f) / (right - centre)
                    } else {
                        0.0
                    };
                    if w > 0.0 {
                        first_bin.get_or_insert(k);
                        weights.push(w);
                    } else if first_bin.is_some() {
                        break;
                    }
                }
                TriangularFilter {
                    first_bin: first_bin.unwrap_or(0),
                    weights,
                }
            })
            .collect();

        let n = cfg.n_filters;
        let mut dct = Vec::with_capacity(FEATURE_LEN * n);
        let scale = (2.0 / n as f64).sqrt();
        for k in 1..cfg.n_ceps {
            for j in 0..n {
                let arg = std::f64::consts::PI * k as f64 * (2 * j + 1) as f64 / (2 * n) as f64;
                dct.push(scale * arg.cos());
            }
        }

        let fft = FftPlanner::new().plan_fft_forward(cfg.fft_len);
        MfccExtractor {
            cfg,
            window,
            filters,
            dct,
            fft,
        }
    }

    pub fn config(&self) -> &DspConfig {
        &self.cfg
    }

    /// Total weight of every filter; all must be positive for the
    /// configuration to be usable.
    pub fn filter_weight_sums(&self) -> Vec<f64> {
        self.filters.iter().map(|f| f.weights.iter().sum()).collect()
    }

    /// Log mel energies of one frame (before the DCT).
    pub fn log_mel_energies(&self, frame: &AudioFrame) -> Vec<f64> {
        let mut buf = vec![Complex::new(0.0, 0.0); self.cfg.fft_len];
        for ((slot, &x), &w) in buf.iter_mut().zip(frame.samples()).zip(&self.window) {
            slot.re = x * w;
        }
        self.fft.process(&mut buf);
        self.filters
            .iter()
            .map(|f| {
                let e: f64 = f
                    .weights
                    .iter()
                    .zip(&buf[f.first_bin..])
                    .map(|(w, c)| w * c.norm_sqr())
                    .sum();
                e.max(self.cfg.log_floor).ln()
            })
            .collect()
    }

    pub fn extract(&self, frame: &AudioFrame) -> FeatureVector {
        let log_e = self.log_mel_energies(frame);
        let n = self.cfg.n_filters;
        let mut out = [0.0; FEATURE_LEN];
        for (k, c) in out.iter_mut().enumerate() {
            let row = &self.dct[k * n..(k + 1) * n];
            *c = row.iter().zip(&log_e).map(|(b, e)| b * e).sum();
        }
        FeatureVector(out)
    }
}

/// Convenience wrapper using a fresh extractor for `cfg`.
pub fn extract_mfcc(frame: &AudioFrame, cfg: &DspConfig) -> FeatureVector {
    MfccExtractor::new(*cfg).extract(frame)
}
