//! Synthetic signals and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn white_noise(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| r.random_range(-0.5..0.5)).collect()
}

fn spectrum(x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(x.len()).process(&mut buf);
    buf
}

fn real_inverse(mut buf: Vec<Complex64>) -> Vec<f64> {
    let n = buf.len();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

/// Brick-wall low-pass: zero every bin above `cutoff_hz` (circular).
pub fn lowpass(x: &[f64], sample_rate: f64, cutoff_hz: f64) -> Vec<f64> {
    let n = x.len();
    let mut s = spectrum(x);
    for (k, c) in s.iter_mut().enumerate() {
        let kk = if k <= n / 2 { k } else { n - k };
        if kk as f64 * sample_rate / n as f64 > cutoff_hz {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    real_inverse(s)
}

/// Circular fractional delay by `delay_s` seconds, applied as a linear phase.
/// Intended for band-limited signals well below Nyquist.
pub fn fractional_delay(x: &[f64], sample_rate: f64, delay_s: f64) -> Vec<f64> {
    let n = x.len();
    let mut s = spectrum(x);
    for (k, c) in s.iter_mut().enumerate() {
        let f = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 } * sample_rate / n as f64;
        if k == n / 2 && n.is_multiple_of(2) {
            *c = Complex64::new(0.0, 0.0);
            continue;
        }
        *c *= Complex64::from_polar(1.0, -2.0 * PI * f * delay_s);
    }
    real_inverse(s)
}

/// Integer delay by prepending zeros; output keeps the input length.
pub fn delay_samples(x: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d.min(x.len())];
    out.extend_from_slice(&x[..x.len() - out.len()]);
    out
}

pub fn tone(freq: f64, sample_rate: f64, n: usize, delay_s: f64) -> Vec<f64> {
    (0..n).map(|i| (2.0 * PI * freq * (i as f64 / sample_rate - delay_s)).sin()).collect()
}

/// Lag (in samples) by which `left` trails `right`: argmax over integer
/// lags of `sum left[n] * right[n - lag]`, refined by a parabola through the
/// peak and its neighbours. Direct time-domain evaluation.
pub fn xcorr_delay(left: &[f64], right: &[f64], max_lag: usize) -> f64 {
    let n = left.len();
    let corr = |lag: isize| -> f64 {
        (0..n)
            .filter_map(|i| {
                let j = i as isize - lag;
                (j >= 0 && (j as usize) < n).then(|| left[i] * right[j as usize])
            })
            .sum()
    };
    let lags: Vec<isize> = (-(max_lag as isize)..=max_lag as isize).collect();
    let values: Vec<f64> = lags.iter().map(|&l| corr(l)).collect();
    let mut best = 0;
    for i in 0..values.len() {
        if values[i] > values[best] {
            best = i;
        }
    }
    let mut lag = lags[best] as f64;
    if best > 0 && best + 1 < values.len() {
        let (a, b, c) = (values[best - 1], values[best], values[best + 1]);
        let denom = a - 2.0 * b + c;
        if denom != 0.0 {
            lag += 0.5 * (a - c) / denom;
        }
    }
    lag
}

/// Weighted median of `(value, weight)` pairs.
pub fn weighted_median(mut pairs: Vec<(f64, f64)>) -> f64 {
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let mut acc = 0.0;
    for (v, w) in &pairs {
        acc += w;
        if acc >= total / 2.0 {
            return *v;
        }
    }
    pairs.last().map(|p| p.0).unwrap_or(f64::NAN)
}
