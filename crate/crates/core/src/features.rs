//! Per-TF-bin binaural cues.
//!
//! Sign convention throughout: the phase difference is `arg R - arg L`, so a
//! positive ITD, a positive bounded ILR and a positive ILD all mean the right
//! channel leads or is louder (a source toward the right).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Zip};

use crate::stft::{Geometry, StereoSpectrogram};

pub const DEFAULT_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum FeatureKind {
    #[serde(rename = "bilr")]
    BoundedIlr,
    #[serde(rename = "itd_seconds")]
    ItdSeconds,
    #[serde(rename = "ipd_radians")]
    IpdRadians,
    #[serde(rename = "ild_db")]
    IldDb,
}

impl FeatureKind {
    /// Short name used in file names and on the command line.
    pub fn short_name(self) -> &'static str {
        match self {
            FeatureKind::BoundedIlr => "ilr",
            FeatureKind::ItdSeconds => "itd",
            FeatureKind::IpdRadians => "ipd",
            FeatureKind::IldDb => "ild",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            FeatureKind::BoundedIlr => "bILR",
            FeatureKind::ItdSeconds => "seconds",
            FeatureKind::IpdRadians => "radians",
            FeatureKind::IldDb => "dB",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for FeatureKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bilr" | "ilr" => Ok(FeatureKind::BoundedIlr),
            "itd" => Ok(FeatureKind::ItdSeconds),
            "ipd" => Ok(FeatureKind::IpdRadians),
            "ild" => Ok(FeatureKind::IldDb),
            other => Err(format!("unknown feature '{other}' (itd, bilr, ipd, ild)")),
        }
    }
}

/// A real-valued TF matrix sharing the geometry of its source spectrogram.
/// Invalid cells hold NaN and are `false` in `validity`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpectrogram {
    pub values: Array2<f64>,
    pub validity: Array2<bool>,
    pub kind: FeatureKind,
    pub geometry: Geometry,
}

impl FeatureSpectrogram {
    pub fn value(&self, k: usize, m: usize) -> Option<f64> {
        self.validity[[k, m]].then(|| self.values[[k, m]])
    }
}

/// Bounded ILR of a raw ratio `|R|/|L|`, mapping `(0, inf)` onto `(-1, 1)`.
pub fn bounded_ilr(ratio: f64) -> f64 {
    if ratio < 1.0 {
        ratio - 1.0
    } else {
        1.0 - 1.0 / ratio
    }
}

/// Inverse of [`bounded_ilr`].
pub fn ilr_from_bounded(b: f64) -> f64 {
    if b < 0.0 {
        b + 1.0
    } else {
        1.0 / (1.0 - b)
    }
}

/// Bounded ILR from channel magnitudes, with the silent-bin policy applied.
///
/// Both below `epsilon` reads as centre. A single silent channel is replaced
/// by `epsilon`, which drives the result toward the louder side's boundary.
/// Evaluated as `|R|/|L| - 1` or `1 - |L|/|R|` so that swapping the channels
/// negates the result bit-for-bit.
pub fn bounded_ilr_from_magnitudes(left: f64, right: f64, epsilon: f64) -> f64 {
    let l_silent = left < epsilon;
    let r_silent = right < epsilon;
    let (l, r) = match (l_silent, r_silent) {
        (true, true) => return 0.0,
        (true, false) => (epsilon, right),
        (false, true) => (left, epsilon),
        (false, false) => (left, right),
    };
    if r < l {
        r / l - 1.0
    } else {
        1.0 - l / r
    }
}

/// Wraps a phase into the principal interval `[-pi, pi)`.
///
/// Equivalent to `((x + pi) mod 2pi) - pi`, computed by subtracting the
/// nearest multiple of `2pi` so that values already inside the interval pass
/// through unchanged and `wrap(-x) == -wrap(x)` away from the `+-pi` seam.
pub fn wrap_phase(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut w = x - two_pi * (x / two_pi).round();
    if w >= PI {
        w -= two_pi;
    } else if w < -PI {
        w += two_pi;
    }
    w
}

/// ITD in seconds for a wrapped phase difference at bin `k` (`k >= 1`).
pub fn itd_from_phase(wrapped_ipd: f64, bin_width_hz: f64, k: usize) -> f64 {
    wrapped_ipd / (2.0 * PI * bin_width_hz * k as f64)
}

fn elementwise<F>(spec: &StereoSpectrogram, kind: FeatureKind, f: F) -> FeatureSpectrogram
where
    F: Fn(&rustfft::num_complex::Complex64, &rustfft::num_complex::Complex64) -> f64 + Sync,
{
    let mut values = Array2::zeros(spec.geometry.shape());
    Zip::from(&mut values).and(&spec.left).and(&spec.right).par_for_each(|v, l, r| *v = f(l, r));
    FeatureSpectrogram {
        values,
        validity: Array2::from_elem(spec.geometry.shape(), true),
        kind,
        geometry: spec.geometry,
    }
}

pub fn ilr_bounded(spec: &StereoSpectrogram, epsilon: f64) -> FeatureSpectrogram {
    elementwise(spec, FeatureKind::BoundedIlr, |l, r| bounded_ilr_from_magnitudes(l.norm(), r.norm(), epsilon))
}

pub fn ipd(spec: &StereoSpectrogram) -> FeatureSpectrogram {
    elementwise(spec, FeatureKind::IpdRadians, |l, r| wrap_phase(r.arg() - l.arg()))
}

/// Full-bandwidth ITD. The DC row is invalid (NaN); band limiting is left to
/// the masks module.
pub fn itd(spec: &StereoSpectrogram) -> FeatureSpectrogram {
    let mut out = ipd(spec);
    out.kind = FeatureKind::ItdSeconds;
    let width = spec.geometry.bin_width_hz();
    for (k, mut row) in out.values.rows_mut().into_iter().enumerate() {
        if k == 0 {
            row.fill(f64::NAN);
        } else {
            row.mapv_inplace(|p| itd_from_phase(p, width, k));
        }
    }
    out.validity.row_mut(0).fill(false);
    out
}

pub fn ild_db(spec: &StereoSpectrogram, epsilon: f64) -> FeatureSpectrogram {
    elementwise(spec, FeatureKind::IldDb, |l, r| 20.0 * ((r.norm() + epsilon) / (l.norm() + epsilon)).log10())
}
