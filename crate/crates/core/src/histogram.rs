//! Time-azimuth histograms: per frame, every valid TF value is assigned to
//! its nearest bin centre and that bin grows by the bin's weight.

use std::f64::consts::PI;
use std::str::FromStr;

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use thiserror::Error;

use crate::exact_sum::{exact_sum, ExactSum};
use crate::features::{FeatureKind, FeatureSpectrogram};
use crate::masks::TfMask;
use crate::stft::{Geometry, StereoSpectrogram};

pub const DEFAULT_NUM_BINS: usize = 400;
/// Half-width of the default ITD range. The widest interaural delays
/// observed for lateral sources are around 880 us.
pub const DEFAULT_ITD_LIMIT_S: f64 = 1e-3;

#[derive(Debug, Error, PartialEq)]
pub enum HistogramError {
    #[error("ShapeMismatch: {0}")]
    ShapeMismatch(String),
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Increment by `|L| + |R|`.
    Intensity,
    /// Increment by one.
    Count,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    None,
    PerFrameMax,
    PerFrameSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutOfRange {
    Discard,
    ClampToEdge,
}

impl FromStr for Weighting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "intensity" => Ok(Weighting::Intensity),
            "count" => Ok(Weighting::Count),
            _ => Err(format!("unknown weighting '{s}' (intensity, count)")),
        }
    }
}

impl FromStr for Normalization {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Normalization::None),
            "max" | "per_frame_max" | "per-frame-max" => Ok(Normalization::PerFrameMax),
            "sum" | "per_frame_sum" | "per-frame-sum" => Ok(Normalization::PerFrameSum),
            _ => Err(format!("unknown normalization '{s}' (none, max, sum)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HistogramConfig {
    pub num_bins: usize,
    pub lo: f64,
    pub hi: f64,
    pub weighting: Weighting,
    pub normalization: Normalization,
    pub out_of_range: OutOfRange,
}

impl HistogramConfig {
    /// Defaults per cue: 400 bins, intensity weighting, no normalisation,
    /// out-of-range values discarded. bILR spans `[-1, 1]`; ITD spans +-1 ms.
    pub fn default_for(kind: FeatureKind) -> Self {
        let (lo, hi) = match kind {
            FeatureKind::BoundedIlr => (-1.0, 1.0),
            FeatureKind::ItdSeconds => (-DEFAULT_ITD_LIMIT_S, DEFAULT_ITD_LIMIT_S),
            FeatureKind::IpdRadians => (-PI, PI),
            FeatureKind::IldDb => (-40.0, 40.0),
        };
        Self {
            num_bins: DEFAULT_NUM_BINS,
            lo,
            hi,
            weighting: Weighting::Intensity,
            normalization: Normalization::None,
            out_of_range: OutOfRange::Discard,
        }
    }

    pub fn validate(&self) -> Result<(), HistogramError> {
        if self.num_bins < 2 {
            return Err(HistogramError::InvalidConfig(format!("num_bins {} must be at least 2", self.num_bins)));
        }
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(HistogramError::InvalidConfig(format!(
                "range [{}, {}] must be finite with lo < hi",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.num_bins as f64
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        let delta = self.bin_width();
        (0..self.num_bins).map(|b| self.lo + delta * (b as f64 + 0.5)).collect()
    }
}

/// Maps values to bins for one configuration.
#[derive(Debug, Clone)]
pub struct BinAssigner {
    cfg: HistogramConfig,
    centers: Vec<f64>,
}

impl BinAssigner {
    pub fn new(cfg: &HistogramConfig) -> Result<Self, HistogramError> {
        cfg.validate()?;
        Ok(Self { cfg: *cfg, centers: cfg.bin_centers() })
    }

    /// Nearest bin centre; a value exactly halfway between two centres goes
    /// to the lower index. Values outside `[lo, hi]` are dropped or clamped
    /// according to the configuration; NaN is always dropped.
    pub fn assign(&self, v: f64) -> Option<usize> {
        let n = self.cfg.num_bins;
        if v.is_nan() {
            return None;
        }
        if v < self.cfg.lo || v > self.cfg.hi {
            return match self.cfg.out_of_range {
                OutOfRange::Discard => None,
                OutOfRange::ClampToEdge => Some(if v < self.cfg.lo { 0 } else { n - 1 }),
            };
        }
        let p = (v - self.cfg.lo) / self.cfg.bin_width();
        let mut b = (p.ceil() as isize - 1).clamp(0, n as isize - 1) as usize;
        // settle rounding in `p` against the actual centres
        let dist = |i: usize| (v - self.centers[i]).abs();
        while b + 1 < n && dist(b + 1) < dist(b) {
            b += 1;
        }
        while b > 0 && dist(b - 1) <= dist(b) {
            b -= 1;
        }
        Some(b)
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeAzimuthHistogram {
    /// `[num_bins x frames]`, non-negative.
    pub counts: Array2<f64>,
    pub bin_centers: Vec<f64>,
    pub kind: FeatureKind,
    pub frame_hop_s: f64,
    pub config: HistogramConfig,
    /// Geometry of the spectrogram the histogram was built from.
    pub geometry: Geometry,
}

impl TimeAzimuthHistogram {
    pub fn num_frames(&self) -> usize {
        self.counts.ncols()
    }

    pub fn column_sum(&self, m: usize) -> f64 {
        exact_sum(self.counts.column(m).iter().copied())
    }

    pub fn total_mass(&self) -> f64 {
        exact_sum(self.counts.iter().copied())
    }

    /// Mass per bin summed over all frames.
    pub fn marginal(&self) -> Vec<f64> {
        self.counts.axis_iter(Axis(0)).map(|row| exact_sum(row.iter().copied())).collect()
    }

    /// Bin with the largest marginal mass (lowest index on ties).
    pub fn peak_bin(&self) -> usize {
        argmax(&self.marginal())
    }

    /// Copy with every column rescaled according to `norm`.
    pub fn normalized(&self, norm: Normalization) -> TimeAzimuthHistogram {
        let mut out = self.clone();
        normalize_columns(&mut out.counts, norm);
        out.config.normalization = norm;
        out
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn normalize_columns(counts: &mut Array2<f64>, norm: Normalization) {
    if norm == Normalization::None {
        return;
    }
    for mut col in counts.columns_mut() {
        let scale = match norm {
            Normalization::PerFrameMax => col.iter().cloned().fold(0.0, f64::max),
            Normalization::PerFrameSum => exact_sum(col.iter().copied()),
            Normalization::None => unreachable!(),
        };
        if scale > 0.0 {
            col.mapv_inplace(|v| v / scale);
        }
    }
}

/// Accumulates raw matrices: `values` and `weights` are `[K x M]`, and only
/// cells with `keep` true contribute. Columns are processed independently
/// and each cell is a correctly rounded sum, so the result is independent of
/// thread count and of the order of rows.
pub fn accumulate_matrix(
    values: &Array2<f64>,
    weights: &Array2<f64>,
    keep: &Array2<bool>,
    cfg: &HistogramConfig,
) -> Result<Array2<f64>, HistogramError> {
    let assigner = BinAssigner::new(cfg)?;
    if values.dim() != weights.dim() || values.dim() != keep.dim() {
        return Err(HistogramError::ShapeMismatch(format!(
            "values {:?}, weights {:?}, mask {:?}",
            values.dim(),
            weights.dim(),
            keep.dim()
        )));
    }
    let (rows, frames) = values.dim();
    let n = cfg.num_bins;

    let columns: Vec<Vec<f64>> = (0..frames)
        .into_par_iter()
        .map(|m| {
            let mut cells: Vec<ExactSum> = vec![ExactSum::new(); n];
            for k in 0..rows {
                if !keep[[k, m]] {
                    continue;
                }
                if let Some(b) = assigner.assign(values[[k, m]]) {
                    let w = match cfg.weighting {
                        Weighting::Intensity => weights[[k, m]],
                        Weighting::Count => 1.0,
                    };
                    cells[b].add(w);
                }
            }
            cells.iter().map(|c| if c.is_empty() { 0.0 } else { c.value() }).collect()
        })
        .collect();

    let mut counts = Array2::zeros((n, frames));
    for (m, col) in columns.into_iter().enumerate() {
        counts.column_mut(m).assign(&ndarray::ArrayView1::from(&col));
    }
    normalize_columns(&mut counts, cfg.normalization);
    Ok(counts)
}

/// Histogram of a feature over the cells that are both valid and kept by
/// `mask`, weighted by `|L| + |R|` (or by count).
pub fn accumulate(
    feature: &FeatureSpectrogram,
    spec: &StereoSpectrogram,
    mask: &TfMask,
    cfg: &HistogramConfig,
) -> Result<TimeAzimuthHistogram, HistogramError> {
    let shape = feature.values.dim();
    if spec.geometry.shape() != shape || mask.shape() != shape {
        return Err(HistogramError::ShapeMismatch(format!(
            "feature {:?}, spectrogram {:?}, mask {:?}",
            shape,
            spec.geometry.shape(),
            mask.shape()
        )));
    }
    let mut keep = mask.keep.clone();
    ndarray::Zip::from(&mut keep).and(&feature.validity).for_each(|k, &v| *k &= v);
    let weights = spec.intensity();
    let counts = accumulate_matrix(&feature.values, &weights, &keep, cfg)?;
    Ok(TimeAzimuthHistogram {
        counts,
        bin_centers: cfg.bin_centers(),
        kind: feature.kind,
        frame_hop_s: spec.geometry.frame_hop_s(),
        config: *cfg,
        geometry: spec.geometry,
    })
}
