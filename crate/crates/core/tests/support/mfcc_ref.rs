//! Textbook MFCC with a direct DFT, written without reference to the
//! library's tables.

use std::f64::consts::PI;

const RATE: f64 = 8000.0;
const NFFT: usize = 256;
const FILTERS: usize = 26;
const KEEP: usize = 12;

fn mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn inv_mel(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Coefficients c1..c12 of a 200-sample frame.
pub fn mfcc(frame: &[f64]) -> [f64; KEEP] {
    let n = frame.len();
    let mut x = [0.0; NFFT];
    for i in 0..n {
        let w = 0.54 - 0.46 * (2.0 * PI * i as f64 / (n as f64 - 1.0)).cos();
        x[i] = frame[i] * w;
    }
    let bins = NFFT / 2 + 1;
    let mut power = vec![0.0; bins];
    for (k, p) in power.iter_mut().enumerate() {
        let (mut re, mut im) = (0.0, 0.0);
        for (t, v) in x.iter().enumerate() {
            let a = -2.0 * PI * (k * t) as f64 / NFFT as f64;
            re += v * a.cos();
            im += v * a.sin();
        }
        *p = re * re + im * im;
    }
    let top = mel(RATE / 2.0);
    let pts: Vec<f64> = (0..FILTERS + 2)
        .map(|i| inv_mel(top * i as f64 / (FILTERS + 1) as f64))
        .collect();
    let mut loge = [0.0; FILTERS];
    for m in 0..FILTERS {
        let (a, b, c) = (pts[m], pts[m + 1], pts[m + 2]);
        let mut e = 0.0;
        for (k, p) in power.iter().enumerate() {
            let f = k as f64 * RATE / NFFT as f64;
            let w = if f > a && f < b {
                (f - a) / (b - a)
            } else if f >= b && f < c {
                (c - f) / (c - b)
            } else {
                0.0
            };
            e += w * p;
        }
        loge[m] = e.max(1e-10).ln();
    }
    let mut out = [0.0; KEEP];
    for (i, o) in out.iter_mut().enumerate() {
        let k = i + 1;
        let mut s = 0.0;
        for (j, l) in loge.iter().enumerate() {
            s += l * (PI * k as f64 * (j as f64 + 0.5) / FILTERS as f64).cos();
        }
        *o = s * (2.0 / FILTERS as f64).sqrt();
    }
    out
}
