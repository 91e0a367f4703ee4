//! Boolean TF masks: band limiting, energy floors and their intersection.

use ndarray::Array2;
use thiserror::Error;

use crate::features::FeatureSpectrogram;
use crate::stft::{Geometry, StereoSpectrogram};

/// Default ITD visualisation band. Above ~1.5 kHz the interaural phase
/// aliases for human head sizes; below 50 Hz the phase is mostly noise.
pub const DEFAULT_ITD_BAND: Band = Band { low_hz: 50.0, high_hz: 1500.0 };

#[derive(Debug, Error, PartialEq)]
pub enum MaskError {
    #[error("InvalidBand: [{low_hz}, {high_hz}] Hz (nyquist {nyquist_hz} Hz)")]
    InvalidBand { low_hz: f64, high_hz: f64, nyquist_hz: f64 },
    #[error("ShapeMismatch: {0:?} vs {1:?}")]
    ShapeMismatch((usize, usize), (usize, usize)),
    #[error("combine needs at least one mask")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Band {
    pub low_hz: f64,
    pub high_hz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfMask {
    pub keep: Array2<bool>,
    pub description: String,
}

impl TfMask {
    pub fn all(shape: (usize, usize), keep: bool) -> Self {
        Self { keep: Array2::from_elem(shape, keep), description: if keep { "all".into() } else { "none".into() } }
    }

    /// The validity matrix of a feature, as a mask.
    pub fn from_validity(feature: &FeatureSpectrogram) -> Self {
        Self { keep: feature.validity.clone(), description: format!("{} validity", feature.kind) }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.keep.dim()
    }

    pub fn count_kept(&self) -> usize {
        self.keep.iter().filter(|&&k| k).count()
    }
}

pub fn band_limit_mask(geometry: &Geometry, band: Band) -> Result<TfMask, MaskError> {
    let nyquist_hz = geometry.nyquist_hz();
    if !(band.low_hz >= 0.0 && band.low_hz < band.high_hz && band.high_hz <= nyquist_hz) {
        return Err(MaskError::InvalidBand { low_hz: band.low_hz, high_hz: band.high_hz, nyquist_hz });
    }
    let keep = Array2::from_shape_fn(geometry.shape(), |(k, _)| {
        let f = geometry.bin_frequency_hz(k);
        band.low_hz <= f && f <= band.high_hz
    });
    Ok(TfMask { keep, description: format!("band {}-{} Hz", band.low_hz, band.high_hz) })
}

/// Keeps bins whose intensity `|L|+|R|` lies within `floor_db` of the
/// loudest bin. An all-silent spectrogram yields an all-false mask, and a
/// floor of `-inf` keeps everything.
pub fn energy_threshold_mask(spec: &StereoSpectrogram, floor_db: f64) -> TfMask {
    let description = format!("energy floor {floor_db} dB");
    let shape = spec.geometry.shape();
    if floor_db == f64::NEG_INFINITY {
        return TfMask { keep: Array2::from_elem(shape, true), description };
    }
    let w = spec.intensity();
    let max = w.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return TfMask { keep: Array2::from_elem(shape, false), description };
    }
    let keep = w.mapv(|v| 20.0 * (v / max).log10() >= floor_db);
    TfMask { keep, description }
}

/// Elementwise AND.
pub fn combine(masks: &[&TfMask]) -> Result<TfMask, MaskError> {
    let (first, rest) = masks.split_first().ok_or(MaskError::Empty)?;
    let mut keep = first.keep.clone();
    let mut parts = vec![first.description.clone()];
    for m in rest {
        if m.shape() != keep.dim() {
            return Err(MaskError::ShapeMismatch(keep.dim(), m.shape()));
        }
        ndarray::Zip::from(&mut keep).and(&m.keep).for_each(|a, &b| *a &= b);
        parts.push(m.description.clone());
    }
    Ok(TfMask { keep, description: parts.join(" & ") })
}
