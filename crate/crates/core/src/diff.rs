//! Reference-vs-test cue comparison.
//!
//! Both signals go through the same STFT, feature and mask pipeline. Each
//! frame is reduced to its intensity-weighted mean cue, and the report holds
//! the two trajectories, their difference and summary statistics.

use thiserror::Error;

use crate::audio_io::StereoBuffer;
use crate::exact_sum::exact_sum;
use crate::features::{self, FeatureKind, FeatureSpectrogram, DEFAULT_EPSILON};
use crate::masks::{self, Band, MaskError, TfMask};
use crate::stft::{self, StereoSpectrogram, StftConfig, StftError};

#[derive(Debug, Error, PartialEq)]
pub enum DiffError {
    #[error("SampleRateMismatch: reference {reference} Hz, test {test} Hz")]
    SampleRateMismatch { reference: u32, test: u32 },
    #[error("ShapeMismatch: {0}")]
    ShapeMismatch(String),
    #[error("InvalidHeadModel: itd_max {0} s must be in (0, 0.002]")]
    InvalidHeadModel(f64),
    #[error(transparent)]
    Stft(#[from] StftError),
    #[error(transparent)]
    Mask(#[from] MaskError),
}

/// Maps ITD to azimuth through the sine law `itd = itd_max * sin(theta)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HeadModel {
    pub itd_max_s: f64,
}

impl Default for HeadModel {
    fn default() -> Self {
        Self { itd_max_s: 700e-6 }
    }
}

impl HeadModel {
    pub fn new(itd_max_s: f64) -> Result<Self, DiffError> {
        if !(itd_max_s > 0.0 && itd_max_s <= 2e-3) {
            return Err(DiffError::InvalidHeadModel(itd_max_s));
        }
        Ok(Self { itd_max_s })
    }

    /// ITD a source at `azimuth_deg` produces under this model.
    pub fn itd_for_azimuth(&self, azimuth_deg: f64) -> f64 {
        self.itd_max_s * azimuth_deg.to_radians().sin()
    }
}

/// Azimuth in degrees, positive to the right. Delays beyond `itd_max`
/// saturate at +-90.
pub fn itd_to_degrees(itd_s: f64, head: &HeadModel) -> f64 {
    // computed on |itd| so the map is odd bit-for-bit
    let theta = (itd_s.abs() / head.itd_max_s).min(1.0).asin().to_degrees();
    if itd_s < 0.0 {
        -theta
    } else {
        theta
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffReport {
    pub kind: FeatureKind,
    pub frame_hop_s: f64,
    /// Weighted mean cue per frame; `None` where the frame had no weight.
    pub per_frame_ref: Vec<Option<f64>>,
    pub per_frame_test: Vec<Option<f64>>,
    /// `ref - test`, present only where both sides are.
    pub per_frame_delta: Vec<Option<f64>>,
    pub mean_abs_shift: f64,
    /// ITD reports only.
    pub mean_abs_shift_degrees: Option<f64>,
    pub head_model: Option<HeadModel>,
    /// Frame counts before truncation, when ref and test differed.
    pub truncated_from: Option<(usize, usize)>,
}

impl DiffReport {
    pub fn active_frames(&self) -> usize {
        self.per_frame_delta.iter().flatten().count()
    }
}

/// Intensity-weighted mean of the valid, kept cue values in each frame.
pub fn frame_mean_cue(
    feature: &FeatureSpectrogram,
    spec: &StereoSpectrogram,
    mask: &TfMask,
) -> Result<Vec<Option<f64>>, DiffError> {
    let shape = feature.values.dim();
    if spec.geometry.shape() != shape || mask.shape() != shape {
        return Err(DiffError::ShapeMismatch(format!(
            "feature {:?}, spectrogram {:?}, mask {:?}",
            shape,
            spec.geometry.shape(),
            mask.shape()
        )));
    }
    let weights = spec.intensity();
    let means = (0..shape.1)
        .map(|m| {
            let cells = (0..shape.0)
                .filter(|&k| mask.keep[[k, m]] && feature.validity[[k, m]])
                .map(|k| (weights[[k, m]], feature.values[[k, m]]));
            let (ws, wv): (Vec<f64>, Vec<f64>) = cells.map(|(w, v)| (w, w * v)).unzip();
            let total = exact_sum(ws);
            (total > 0.0).then(|| exact_sum(wv) / total)
        })
        .collect();
    Ok(means)
}

/// Knobs shared by [`itd_diff`] and [`ilr_diff`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffParams {
    pub stft: StftConfig,
    /// Frequency band to average over; `None` keeps the full band.
    pub band: Option<Band>,
    /// Optional energy floor relative to each signal's loudest TF bin.
    pub floor_db: Option<f64>,
}

impl DiffParams {
    pub fn itd_default() -> Self {
        Self { stft: StftConfig::default(), band: Some(masks::DEFAULT_ITD_BAND), floor_db: None }
    }

    pub fn ilr_default() -> Self {
        Self { stft: StftConfig::default(), band: None, floor_db: None }
    }
}

fn cue_track(buf: &StereoBuffer, kind: FeatureKind, params: &DiffParams) -> Result<Vec<Option<f64>>, DiffError> {
    let spec = stft::stft_stereo(buf, &params.stft)?;
    let feature = match kind {
        FeatureKind::ItdSeconds => features::itd(&spec),
        FeatureKind::BoundedIlr => features::ilr_bounded(&spec, DEFAULT_EPSILON),
        FeatureKind::IpdRadians => features::ipd(&spec),
        FeatureKind::IldDb => features::ild_db(&spec, DEFAULT_EPSILON),
    };
    let mut parts = vec![TfMask::all(spec.geometry.shape(), true)];
    if let Some(band) = params.band {
        parts.push(masks::band_limit_mask(&spec.geometry, band)?);
    }
    if let Some(floor) = params.floor_db {
        parts.push(masks::energy_threshold_mask(&spec, floor));
    }
    let mask = masks::combine(&parts.iter().collect::<Vec<_>>())?;
    frame_mean_cue(&feature, &spec, &mask)
}

fn assemble(
    kind: FeatureKind,
    frame_hop_s: f64,
    mut reference: Vec<Option<f64>>,
    mut test: Vec<Option<f64>>,
    head: Option<&HeadModel>,
) -> DiffReport {
    let truncated_from = (reference.len() != test.len()).then_some((reference.len(), test.len()));
    let frames = reference.len().min(test.len());
    reference.truncate(frames);
    test.truncate(frames);

    let delta: Vec<Option<f64>> = reference.iter().zip(&test).map(|(r, t)| Some((*r)? - (*t)?)).collect();
    let active: Vec<f64> = delta.iter().flatten().copied().collect();
    let mean = |xs: Vec<f64>| {
        if xs.is_empty() {
            0.0
        } else {
            let n = xs.len() as f64;
            exact_sum(xs) / n
        }
    };
    let mean_abs_shift = mean(active.iter().map(|d| d.abs()).collect());
    let mean_abs_shift_degrees = head.map(|h| mean(active.iter().map(|d| itd_to_degrees(d.abs(), h)).collect()));

    DiffReport {
        kind,
        frame_hop_s,
        per_frame_ref: reference,
        per_frame_test: test,
        per_frame_delta: delta,
        mean_abs_shift,
        mean_abs_shift_degrees,
        head_model: head.copied(),
        truncated_from,
    }
}

fn check_rates(reference: &StereoBuffer, test: &StereoBuffer) -> Result<(), DiffError> {
    if reference.sample_rate_hz() != test.sample_rate_hz() {
        return Err(DiffError::SampleRateMismatch {
            reference: reference.sample_rate_hz(),
            test: test.sample_rate_hz(),
        });
    }
    Ok(())
}

/// ITD trajectories of `reference` and `test`, their per-frame difference
/// and the mean absolute shift in seconds and degrees. Per-frame deltas are
/// converted to degrees individually before averaging.
pub fn itd_diff(
    reference: &StereoBuffer,
    test: &StereoBuffer,
    params: &DiffParams,
    head: &HeadModel,
) -> Result<DiffReport, DiffError> {
    check_rates(reference, test)?;
    HeadModel::new(head.itd_max_s)?;
    let (r, t) = rayon::join(
        || cue_track(reference, FeatureKind::ItdSeconds, params),
        || cue_track(test, FeatureKind::ItdSeconds, params),
    );
    let hop = params.stft.hop_size as f64 / reference.sample_rate_hz() as f64;
    Ok(assemble(FeatureKind::ItdSeconds, hop, r?, t?, Some(head)))
}

pub fn ilr_diff(reference: &StereoBuffer, test: &StereoBuffer, params: &DiffParams) -> Result<DiffReport, DiffError> {
    check_rates(reference, test)?;
    let (r, t) = rayon::join(
        || cue_track(reference, FeatureKind::BoundedIlr, params),
        || cue_track(test, FeatureKind::BoundedIlr, params),
    );
    let hop = params.stft.hop_size as f64 / reference.sample_rate_hz() as f64;
    Ok(assemble(FeatureKind::BoundedIlr, hop, r?, t?, None))
}
