//! End-to-end feature extraction from a stereo buffer.
//!
//! This is the single code path behind the CLI exports and any language
//! binding, so that every front-end produces bit-identical matrices for the
//! same input and options.

use crate::audio_io::StereoBuffer;
use crate::features::{self, FeatureKind, FeatureSpectrogram, DEFAULT_EPSILON};
use crate::histogram::{self, HistogramConfig, TimeAzimuthHistogram};
use crate::masks::{self, Band, TfMask, DEFAULT_ITD_BAND};
use crate::stft::{self, StereoSpectrogram, StftConfig};
use crate::Error;

/// Which frequency band a product is restricted to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandChoice {
    /// ITD products use the default ITD band, everything else is full band.
    Default,
    FullBand,
    Explicit(Band),
}

impl BandChoice {
    pub fn resolve(self, kind: FeatureKind) -> Option<Band> {
        match self {
            BandChoice::Default => (kind == FeatureKind::ItdSeconds).then_some(DEFAULT_ITD_BAND),
            BandChoice::FullBand => None,
            BandChoice::Explicit(b) => Some(b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineOptions {
    pub stft: StftConfig,
    pub epsilon: f64,
    pub band: BandChoice,
    pub floor_db: Option<f64>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self { stft: StftConfig::default(), epsilon: DEFAULT_EPSILON, band: BandChoice::Default, floor_db: None }
    }
}

pub fn compute_feature(spec: &StereoSpectrogram, kind: FeatureKind, epsilon: f64) -> FeatureSpectrogram {
    match kind {
        FeatureKind::BoundedIlr => features::ilr_bounded(spec, epsilon),
        FeatureKind::ItdSeconds => features::itd(spec),
        FeatureKind::IpdRadians => features::ipd(spec),
        FeatureKind::IldDb => features::ild_db(spec, epsilon),
    }
}

/// Validity AND band limit AND energy floor, as configured for `kind`.
pub fn product_mask(
    spec: &StereoSpectrogram,
    feature: &FeatureSpectrogram,
    opts: &PipelineOptions,
) -> Result<TfMask, Error> {
    let mut parts = vec![TfMask::from_validity(feature)];
    if let Some(band) = opts.band.resolve(feature.kind) {
        parts.push(masks::band_limit_mask(&spec.geometry, band)?);
    }
    if let Some(floor) = opts.floor_db {
        parts.push(masks::energy_threshold_mask(spec, floor));
    }
    Ok(masks::combine(&parts.iter().collect::<Vec<_>>())?)
}

/// Feature values with every cell outside `mask` set to NaN.
pub fn masked_values(feature: &FeatureSpectrogram, mask: &TfMask) -> FeatureSpectrogram {
    let mut out = feature.clone();
    ndarray::Zip::from(&mut out.values).and(&mut out.validity).and(&mask.keep).for_each(|v, valid, &keep| {
        if !keep {
            *v = f64::NAN;
            *valid = false;
        }
    });
    out
}

pub fn histogram_for(
    spec: &StereoSpectrogram,
    kind: FeatureKind,
    cfg: &HistogramConfig,
    opts: &PipelineOptions,
) -> Result<TimeAzimuthHistogram, Error> {
    let feature = compute_feature(spec, kind, opts.epsilon);
    let mask = product_mask(spec, &feature, opts)?;
    Ok(histogram::accumulate(&feature, spec, &mask, cfg)?)
}

/// Every cue representation of one stereo signal.
#[derive(Debug, Clone)]
pub struct FeatureBundle {
    pub spectrogram: StereoSpectrogram,
    pub bilr: FeatureSpectrogram,
    pub itd: FeatureSpectrogram,
    pub ipd: FeatureSpectrogram,
    pub ild: FeatureSpectrogram,
    pub itd_mask: TfMask,
    pub bilr_mask: TfMask,
    pub itd_histogram: TimeAzimuthHistogram,
    pub bilr_histogram: TimeAzimuthHistogram,
}

pub fn compute_features(
    buf: &StereoBuffer,
    opts: &PipelineOptions,
    itd_hist: &HistogramConfig,
    bilr_hist: &HistogramConfig,
) -> Result<FeatureBundle, Error> {
    let spectrogram = stft::stft_stereo(buf, &opts.stft)?;
    let bilr = compute_feature(&spectrogram, FeatureKind::BoundedIlr, opts.epsilon);
    let itd = compute_feature(&spectrogram, FeatureKind::ItdSeconds, opts.epsilon);
    let ipd = compute_feature(&spectrogram, FeatureKind::IpdRadians, opts.epsilon);
    let ild = compute_feature(&spectrogram, FeatureKind::IldDb, opts.epsilon);
    let itd_mask = product_mask(&spectrogram, &itd, opts)?;
    let bilr_mask = product_mask(&spectrogram, &bilr, opts)?;
    let itd_histogram = histogram::accumulate(&itd, &spectrogram, &itd_mask, itd_hist)?;
    let bilr_histogram = histogram::accumulate(&bilr, &spectrogram, &bilr_mask, bilr_hist)?;
    Ok(FeatureBundle { spectrogram, bilr, itd, ipd, ild, itd_mask, bilr_mask, itd_histogram, bilr_histogram })
}
