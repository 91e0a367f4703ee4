//! Aligned one-sided STFT of both channels of a stereo buffer.

use std::f64::consts::PI;
use std::str::FromStr;

use ndarray::Array2;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::audio_io::StereoBuffer;

#[derive(Debug, Error, PartialEq)]
pub enum StftError {
    #[error("SignalTooShort: {len} samples, need at least {need}")]
    SignalTooShort { len: usize, need: usize },
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Hann,
    Hamming,
    Rectangular,
}

impl Window {
    /// Periodic window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        let nf = n as f64;
        (0..n)
            .map(|i| {
                let phase = 2.0 * PI * i as f64 / nf;
                match self {
                    Window::Hann => 0.5 - 0.5 * phase.cos(),
                    Window::Hamming => 0.54 - 0.46 * phase.cos(),
                    Window::Rectangular => 1.0,
                }
            })
            .collect()
    }
}

impl FromStr for Window {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "hann" | "hanning" => Ok(Window::Hann),
            "hamming" => Ok(Window::Hamming),
            "rect" | "rectangular" | "boxcar" => Ok(Window::Rectangular),
            other => Err(format!("unknown window '{other}' (hann, hamming, rectangular)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StftConfig {
    pub fft_size: usize,
    pub hop_size: usize,
    pub window: Window,
    /// Zero-pad `fft_size / 2` samples on both ends so frame `m` is centred
    /// on sample `m * hop_size`.
    pub center_pad: bool,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self { fft_size: 4096, hop_size: 1024, window: Window::Hann, center_pad: true }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<(), StftError> {
        if self.fft_size < 2 || !self.fft_size.is_power_of_two() {
            return Err(StftError::InvalidConfig(format!("fft_size {} is not a power of two >= 2", self.fft_size)));
        }
        if self.hop_size == 0 || self.hop_size > self.fft_size {
            return Err(StftError::InvalidConfig(format!(
                "hop_size {} must be in 1..={}",
                self.hop_size, self.fft_size
            )));
        }
        Ok(())
    }
}

/// Shape and axis metadata shared by every TF matrix derived from one STFT.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Geometry {
    pub num_bins: usize,
    pub num_frames: usize,
    pub fft_size: usize,
    pub hop_size: usize,
    pub sample_rate_hz: u32,
    pub center_pad: bool,
}

impl Geometry {
    pub fn shape(&self) -> (usize, usize) {
        (self.num_bins, self.num_frames)
    }

    /// `k_width`, the spacing of bin centre frequencies.
    pub fn bin_width_hz(&self) -> f64 {
        self.sample_rate_hz as f64 / self.fft_size as f64
    }

    pub fn bin_frequency_hz(&self, k: usize) -> f64 {
        k as f64 * self.sample_rate_hz as f64 / self.fft_size as f64
    }

    pub fn nyquist_hz(&self) -> f64 {
        self.sample_rate_hz as f64 / 2.0
    }

    pub fn frame_hop_s(&self) -> f64 {
        self.hop_size as f64 / self.sample_rate_hz as f64
    }

    /// Time of the centre of frame `m`, relative to the first input sample.
    pub fn frame_time_s(&self, m: usize) -> f64 {
        let offset = if self.center_pad { 0 } else { self.fft_size / 2 };
        (m * self.hop_size + offset) as f64 / self.sample_rate_hz as f64
    }

    pub fn frequencies_hz(&self) -> Vec<f64> {
        (0..self.num_bins).map(|k| self.bin_frequency_hz(k)).collect()
    }

    pub fn frame_times_s(&self) -> Vec<f64> {
        (0..self.num_frames).map(|m| self.frame_time_s(m)).collect()
    }
}

/// Paired complex spectrograms, `[bins x frames]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StereoSpectrogram {
    pub left: Array2<Complex64>,
    pub right: Array2<Complex64>,
    pub geometry: Geometry,
}

impl StereoSpectrogram {
    /// Builds a spectrogram from precomputed matrices. Used by tests and by
    /// callers that bring their own transform.
    pub fn from_parts(
        left: Array2<Complex64>,
        right: Array2<Complex64>,
        geometry: Geometry,
    ) -> Result<Self, StftError> {
        if left.dim() != right.dim() || left.dim() != geometry.shape() {
            return Err(StftError::InvalidConfig(format!(
                "matrix shapes {:?}/{:?} disagree with geometry {:?}",
                left.dim(),
                right.dim(),
                geometry.shape()
            )));
        }
        Ok(Self { left, right, geometry })
    }

    /// `w[k,m] = |L| + |R|`, the intensity weight of each TF bin.
    pub fn intensity(&self) -> Array2<f64> {
        let mut w = Array2::zeros(self.geometry.shape());
        ndarray::Zip::from(&mut w).and(&self.left).and(&self.right).for_each(|w, l, r| *w = l.norm() + r.norm());
        w
    }

    pub fn swapped(&self) -> StereoSpectrogram {
        StereoSpectrogram { left: self.right.clone(), right: self.left.clone(), geometry: self.geometry }
    }
}

fn padded_channel(x: &[f64], cfg: &StftConfig) -> Vec<f64> {
    if !cfg.center_pad {
        return x.to_vec();
    }
    let pad = cfg.fft_size / 2;
    let mut out = vec![0.0; x.len() + 2 * pad];
    out[pad..pad + x.len()].copy_from_slice(x);
    out
}

pub fn stft_stereo(buf: &StereoBuffer, cfg: &StftConfig) -> Result<StereoSpectrogram, StftError> {
    cfg.validate()?;
    if buf.is_empty() {
        return Err(StftError::SignalTooShort { len: 0, need: 1 });
    }
    if !cfg.center_pad && buf.len() < cfg.fft_size {
        return Err(StftError::SignalTooShort { len: buf.len(), need: cfg.fft_size });
    }

    let left = padded_channel(buf.left(), cfg);
    let right = padded_channel(buf.right(), cfg);
    let n = cfg.fft_size;
    let frames = (left.len() - n) / cfg.hop_size + 1;
    let bins = n / 2 + 1;
    let window = cfg.window.coefficients(n);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);

    let columns: Vec<(Vec<Complex64>, Vec<Complex64>)> = (0..frames)
        .into_par_iter()
        .map(|m| {
            let start = m * cfg.hop_size;
            let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
            let mut transform = |x: &[f64]| {
                let mut frame: Vec<Complex64> =
                    x[start..start + n].iter().zip(&window).map(|(s, w)| Complex64::new(s * w, 0.0)).collect();
                fft.process_with_scratch(&mut frame, &mut scratch);
                frame.truncate(bins);
                frame
            };
            (transform(&left), transform(&right))
        })
        .collect();

    let mut left_tf = Array2::zeros((bins, frames));
    let mut right_tf = Array2::zeros((bins, frames));
    for (m, (l, r)) in columns.into_iter().enumerate() {
        left_tf.column_mut(m).assign(&ndarray::ArrayView1::from(&l));
        right_tf.column_mut(m).assign(&ndarray::ArrayView1::from(&r));
    }

    Ok(StereoSpectrogram {
        left: left_tf,
        right: right_tf,
        geometry: Geometry {
            num_bins: bins,
            num_frames: frames,
            fft_size: n,
            hop_size: cfg.hop_size,
            sample_rate_hz: buf.sample_rate_hz(),
            center_pad: cfg.center_pad,
        },
    })
}
