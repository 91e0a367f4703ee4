//! Binaural cue analysis.
//!
//! Extracts bounded interaural level ratio (bILR) and interaural time
//! difference (ITD) spectrograms from stereo audio, accumulates them into
//! time-azimuth histograms, and compares reference and test signals frame by
//! frame. No head model is needed for any of the feature extraction; one is
//! only used to express ITD shifts in degrees.
//!
//! ```no_run
//! use bincue::{audio_io, features, histogram, masks, stft};
//!
//! let buf = audio_io::read_wav("render.wav")?;
//! let spec = stft::stft_stereo(&buf, &stft::StftConfig::default())?;
//! let itd = features::itd(&spec);
//! let band = masks::band_limit_mask(&spec.geometry, masks::DEFAULT_ITD_BAND)?;
//! let cfg = histogram::HistogramConfig::default_for(features::FeatureKind::ItdSeconds);
//! let hist = histogram::accumulate(&itd, &spec, &band, &cfg)?;
//! println!("peak at {} s", hist.bin_centers[hist.peak_bin()]);
//! # Ok::<(), bincue::Error>(())
//! ```

pub mod audio_io;
pub mod cli;
pub mod diff;
mod exact_sum;
pub mod export;
pub mod features;
pub mod histogram;
pub mod masks;
pub mod pipeline;
pub mod render;
pub mod stft;

use thiserror::Error;

pub use audio_io::StereoBuffer;
pub use diff::{DiffReport, HeadModel};
pub use features::{FeatureKind, FeatureSpectrogram};
pub use histogram::{HistogramConfig, TimeAzimuthHistogram};
pub use masks::TfMask;
pub use stft::{StereoSpectrogram, StftConfig};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Audio(#[from] audio_io::AudioError),
    #[error(transparent)]
    Stft(#[from] stft::StftError),
    #[error(transparent)]
    Mask(#[from] masks::MaskError),
    #[error(transparent)]
    Histogram(#[from] histogram::HistogramError),
    #[error(transparent)]
    Diff(#[from] diff::DiffError),
    #[error(transparent)]
    Export(#[from] export::ExportError),
    #[error(transparent)]
    Render(#[from] render::RenderError),
}

impl Error {
    /// True when the error stems from a bad parameter rather than bad data.
    pub fn is_configuration(&self) -> bool {
        matches!(
            self,
            Error::Stft(stft::StftError::InvalidConfig(_))
                | Error::Mask(masks::MaskError::InvalidBand { .. })
                | Error::Histogram(histogram::HistogramError::InvalidConfig(_))
                | Error::Diff(diff::DiffError::InvalidHeadModel(_))
                | Error::Diff(diff::DiffError::Mask(masks::MaskError::InvalidBand { .. }))
                | Error::Diff(diff::DiffError::Stft(stft::StftError::InvalidConfig(_)))
                | Error::Render(render::RenderError::InvalidConfig(_))
        )
    }
}
