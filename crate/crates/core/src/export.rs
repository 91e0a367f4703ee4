//! File formats for features, histograms, masks and diff reports.
//!
//! Binary matrices use a small tagged container followed by a row-major
//! little-endian payload:
//!
//! | offset | size | field                                  |
//! |--------|------|----------------------------------------|
//! | 0      | 8    | magic `BNSPECT1`                       |
//! | 8      | 4    | dtype code, u32 LE (1 f32, 2 f64, 3 u8) |
//! | 12     | 4    | rows, u32 LE                           |
//! | 16     | 4    | cols, u32 LE                           |
//! | 20     | 4    | reserved, zero                         |
//! | 24     | ...  | payload, `rows * cols * size` bytes    |
//!
//! Axis metadata lives in a JSON sidecar next to the `.bin` file, with the
//! same stem and a `.json` extension. Rows are bins (histogram bins or STFT
//! frequencies) and columns are frames. CSV output is transposed: one row per
//! frame, led by its time in seconds.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diff::{DiffReport, HeadModel};
use crate::features::{FeatureKind, FeatureSpectrogram};
use crate::histogram::{HistogramConfig, TimeAzimuthHistogram};
use crate::masks::TfMask;
use crate::stft::Geometry;

pub const MAGIC: &[u8; 8] = b"BNSPECT1";
pub const HEADER_LEN: usize = 24;
pub const SCHEMA_VERSION: &str = "v1";

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("BadMagic: not a matrix container")]
    BadMagic,
    #[error("TruncatedPayload: expected {expected} payload bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("SidecarMissing: {0}")]
    SidecarMissing(PathBuf),
    #[error("UnknownDtype: code {0}")]
    UnknownDtype(u32),
    #[error("BadSidecar: {0}")]
    BadSidecar(String),
    #[error("BadCsv: {0}")]
    BadCsv(String),
    #[error("IoError: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    F64,
    U8,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
            Dtype::U8 => 1,
        }
    }

    fn code(self) -> u32 {
        match self {
            Dtype::F32 => 1,
            Dtype::F64 => 2,
            Dtype::U8 => 3,
        }
    }

    fn from_code(code: u32) -> Result<Self, ExportError> {
        match code {
            1 => Ok(Dtype::F32),
            2 => Ok(Dtype::F64),
            3 => Ok(Dtype::U8),
            other => Err(ExportError::UnknownDtype(other)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Matrix {
    F32(Array2<f32>),
    F64(Array2<f64>),
    U8(Array2<u8>),
}

impl Matrix {
    pub fn dtype(&self) -> Dtype {
        match self {
            Matrix::F32(_) => Dtype::F32,
            Matrix::F64(_) => Dtype::F64,
            Matrix::U8(_) => Dtype::U8,
        }
    }

    pub fn dim(&self) -> (usize, usize) {
        match self {
            Matrix::F32(a) => a.dim(),
            Matrix::F64(a) => a.dim(),
            Matrix::U8(a) => a.dim(),
        }
    }

    /// Values widened to f64.
    pub fn to_f64(&self) -> Array2<f64> {
        match self {
            Matrix::F32(a) => a.mapv(f64::from),
            Matrix::F64(a) => a.clone(),
            Matrix::U8(a) => a.mapv(f64::from),
        }
    }

    /// Bitwise equality, so NaN cells compare equal to themselves.
    pub fn bit_eq(&self, other: &Matrix) -> bool {
        encode_matrix(self) == encode_matrix(other)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    Hist,
    Spec,
    Mask,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowAxis {
    pub name: String,
    pub unit: String,
    pub values: Vec<f64>,
}

/// Contents of the JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixMeta {
    pub schema: String,
    /// Cue the matrix describes; for masks, the cue the mask was built for.
    pub kind: FeatureKind,
    pub form: Form,
    pub unit: String,
    pub dtype: Dtype,
    pub rows: usize,
    pub cols: usize,
    pub row_axis: RowAxis,
    pub frame_hop_s: f64,
    pub frame_times_s: Vec<f64>,
    pub geometry: Geometry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram: Option<HistogramConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

fn base_meta(kind: FeatureKind, form: Form, unit: &str, m: &Matrix, axis: RowAxis, g: &Geometry) -> MatrixMeta {
    let (rows, cols) = m.dim();
    MatrixMeta {
        schema: SCHEMA_VERSION.into(),
        kind,
        form,
        unit: unit.into(),
        dtype: m.dtype(),
        rows,
        cols,
        row_axis: axis,
        frame_hop_s: g.frame_hop_s(),
        frame_times_s: g.frame_times_s(),
        geometry: *g,
        histogram: None,
        description: None,
    }
}

fn frequency_axis(g: &Geometry) -> RowAxis {
    RowAxis { name: "frequency".into(), unit: "Hz".into(), values: g.frequencies_hz() }
}

pub fn histogram_matrix(h: &TimeAzimuthHistogram) -> (Matrix, MatrixMeta) {
    let m = Matrix::F64(h.counts.clone());
    let axis = RowAxis { name: "bin_center".into(), unit: h.kind.unit().into(), values: h.bin_centers.clone() };
    let unit = match h.config.weighting {
        crate::histogram::Weighting::Intensity => "intensity",
        crate::histogram::Weighting::Count => "count",
    };
    let mut meta = base_meta(h.kind, Form::Hist, unit, &m, axis, &h.geometry);
    meta.histogram = Some(h.config);
    (m, meta)
}

/// Feature values as f64; invalid cells are NaN.
pub fn feature_matrix(f: &FeatureSpectrogram) -> (Matrix, MatrixMeta) {
    let m = Matrix::F64(f.values.clone());
    let meta = base_meta(f.kind, Form::Spec, f.kind.unit(), &m, frequency_axis(&f.geometry), &f.geometry);
    (m, meta)
}

/// Mask as u8 (1 keep, 0 drop).
pub fn mask_matrix(mask: &TfMask, kind: FeatureKind, g: &Geometry) -> (Matrix, MatrixMeta) {
    let m = Matrix::U8(mask.keep.mapv(u8::from));
    let mut meta = base_meta(kind, Form::Mask, "keep", &m, frequency_axis(g), g);
    meta.description = Some(mask.description.clone());
    (m, meta)
}

pub fn encode_matrix(m: &Matrix) -> Vec<u8> {
    let (rows, cols) = m.dim();
    let dtype = m.dtype();
    let mut out = Vec::with_capacity(HEADER_LEN + rows * cols * dtype.size());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&dtype.code().to_le_bytes());
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    // `iter` walks logical row-major order regardless of memory layout
    match m {
        Matrix::F32(a) => a.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
        Matrix::F64(a) => a.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
        Matrix::U8(a) => out.extend(a.iter().copied()),
    }
    out
}

pub fn decode_matrix(bytes: &[u8]) -> Result<Matrix, ExportError> {
    if bytes.len() < 8 || &bytes[..8] != MAGIC {
        return Err(ExportError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(ExportError::TruncatedPayload { expected: HEADER_LEN, found: bytes.len() });
    }
    let word = |at: usize| u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]]);
    let dtype = Dtype::from_code(word(8))?;
    let rows = word(12) as usize;
    let cols = word(16) as usize;
    let expected = rows * cols * dtype.size();
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < expected {
        return Err(ExportError::TruncatedPayload { expected, found: payload.len() });
    }
    let payload = &payload[..expected];
    let shape = (rows, cols);
    let bad = |e: ndarray::ShapeError| ExportError::BadSidecar(e.to_string());
    Ok(match dtype {
        Dtype::F32 => Matrix::F32(
            Array2::from_shape_vec(
                shape,
                payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect(),
            )
            .map_err(bad)?,
        ),
        Dtype::F64 => Matrix::F64(
            Array2::from_shape_vec(
                shape,
                payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect(),
            )
            .map_err(bad)?,
        ),
        Dtype::U8 => Matrix::U8(Array2::from_shape_vec(shape, payload.to_vec()).map_err(bad)?),
    })
}

pub fn sidecar_path(bin_path: &Path) -> PathBuf {
    bin_path.with_extension("json")
}

/// Writes `path` (the `.bin` container) and its `.json` sidecar.
pub fn write_binary(path: &Path, m: &Matrix, meta: &MatrixMeta) -> Result<(), ExportError> {
    fs::write(path, encode_matrix(m))?;
    write_json(&sidecar_path(path), meta)
}

pub fn read_matrix(path: &Path) -> Result<(Matrix, MatrixMeta), ExportError> {
    let bytes = fs::read(path)?;
    let m = decode_matrix(&bytes)?;
    let side = sidecar_path(path);
    if !side.exists() {
        return Err(ExportError::SidecarMissing(side));
    }
    let meta: MatrixMeta =
        serde_json::from_slice(&fs::read(&side)?).map_err(|e| ExportError::BadSidecar(e.to_string()))?;
    if (meta.rows, meta.cols) != m.dim() || meta.dtype != m.dtype() {
        return Err(ExportError::BadSidecar(format!(
            "sidecar says {}x{} {:?}, container holds {:?} {:?}",
            meta.rows,
            meta.cols,
            meta.dtype,
            m.dim(),
            m.dtype()
        )));
    }
    Ok((m, meta))
}

fn csv_err(e: csv::Error) -> ExportError {
    ExportError::BadCsv(e.to_string())
}

/// Frames as rows: `time_s, <one column per bin>`, header carries the row
/// axis values. Floats use the shortest representation that round-trips.
pub fn write_csv(path: &Path, m: &Matrix, meta: &MatrixMeta) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = vec!["time_s".to_string()];
    header.extend(meta.row_axis.values.iter().map(|v| v.to_string()));
    w.write_record(&header).map_err(csv_err)?;
    let (rows, cols) = m.dim();
    for c in 0..cols {
        let mut record = Vec::with_capacity(rows + 1);
        record.push(meta.frame_times_s.get(c).copied().unwrap_or(c as f64 * meta.frame_hop_s).to_string());
        for r in 0..rows {
            record.push(match m {
                Matrix::F32(a) => a[[r, c]].to_string(),
                Matrix::F64(a) => a[[r, c]].to_string(),
                Matrix::U8(a) => a[[r, c]].to_string(),
            });
        }
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// A parsed CSV export, back in bins-by-frames orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvMatrix {
    pub row_axis: Vec<f64>,
    pub frame_times_s: Vec<f64>,
    pub values: Array2<f64>,
}

pub fn read_csv(path: &Path) -> Result<CsvMatrix, ExportError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| ExportError::BadCsv(format!("'{s}': {e}")));
    let header = r.headers().map_err(csv_err)?.clone();
    let row_axis = header.iter().skip(1).map(parse).collect::<Result<Vec<_>, _>>()?;
    let mut times = Vec::new();
    let mut data = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        times.push(parse(&rec[0])?);
        for field in rec.iter().skip(1) {
            data.push(parse(field)?);
        }
    }
    let frames_by_bins =
        Array2::from_shape_vec((times.len(), row_axis.len()), data).map_err(|e| ExportError::BadCsv(e.to_string()))?;
    Ok(CsvMatrix {
        row_axis,
        frame_times_s: times,
        values: frames_by_bins.reversed_axes().as_standard_layout().into_owned(),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ExportError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| ExportError::BadSidecar(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportUnits {
    pub cue: String,
    pub shift: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift_degrees: Option<String>,
    pub time: String,
}

/// On-disk form of a [`DiffReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffReportFile {
    pub schema: String,
    pub kind: FeatureKind,
    pub units: ReportUnits,
    pub frame_hop_s: f64,
    pub frames: usize,
    pub active_frames: usize,
    pub per_frame_ref: Vec<Option<f64>>,
    pub per_frame_test: Vec<Option<f64>>,
    pub per_frame_delta: Vec<Option<f64>>,
    pub mean_abs_shift: f64,
    pub mean_abs_shift_degrees: Option<f64>,
    pub itd_max_s: Option<f64>,
    pub truncated_from: Option<(usize, usize)>,
}

impl From<&DiffReport> for DiffReportFile {
    fn from(r: &DiffReport) -> Self {
        DiffReportFile {
            schema: SCHEMA_VERSION.into(),
            kind: r.kind,
            units: ReportUnits {
                cue: r.kind.unit().into(),
                shift: r.kind.unit().into(),
                shift_degrees: r.mean_abs_shift_degrees.map(|_| "degrees".into()),
                time: "seconds".into(),
            },
            frame_hop_s: r.frame_hop_s,
            frames: r.per_frame_delta.len(),
            active_frames: r.active_frames(),
            per_frame_ref: r.per_frame_ref.clone(),
            per_frame_test: r.per_frame_test.clone(),
            per_frame_delta: r.per_frame_delta.clone(),
            mean_abs_shift: r.mean_abs_shift,
            mean_abs_shift_degrees: r.mean_abs_shift_degrees,
            itd_max_s: r.head_model.map(|h| h.itd_max_s),
            truncated_from: r.truncated_from,
        }
    }
}

impl From<DiffReportFile> for DiffReport {
    fn from(f: DiffReportFile) -> Self {
        DiffReport {
            kind: f.kind,
            frame_hop_s: f.frame_hop_s,
            per_frame_ref: f.per_frame_ref,
            per_frame_test: f.per_frame_test,
            per_frame_delta: f.per_frame_delta,
            mean_abs_shift: f.mean_abs_shift,
            mean_abs_shift_degrees: f.mean_abs_shift_degrees,
            head_model: f.itd_max_s.map(|itd_max_s| HeadModel { itd_max_s }),
            truncated_from: f.truncated_from,
        }
    }
}

pub fn write_diff_report(r: &DiffReport, path: &Path) -> Result<(), ExportError> {
    write_json(path, &DiffReportFile::from(r))
}

pub fn read_diff_report(path: &Path) -> Result<DiffReport, ExportError> {
    let file: DiffReportFile =
        serde_json::from_slice(&fs::read(path)?).map_err(|e| ExportError::BadSidecar(e.to_string()))?;
    Ok(file.into())
}
