//! Command-line front-end.
//!
//! Exit codes: 0 success, 1 usage error (bad flags or parameter values),
//! 2 data error (unreadable input, non-stereo audio, existing outputs, ...).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::audio_io::{self, StereoBuffer};
use crate::diff::{self, DiffParams, HeadModel};
use crate::export::{self, Matrix, MatrixMeta};
use crate::features::FeatureKind;
use crate::histogram::{HistogramConfig, Normalization, Weighting};
use crate::masks::Band;
use crate::pipeline::{self, BandChoice, PipelineOptions};
use crate::render::{self, RenderConfig};
use crate::stft::{self, StftConfig, Window};
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "bincue", version, about = "Binaural cue spectrograms, time-azimuth histograms and cue diffs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Time-azimuth histogram of ITD (band limited unless --full-band)
    ItdHist {
        input: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Time-azimuth histogram of bounded ILR
    IlrHist {
        input: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// ITD spectrogram in seconds (cells outside the band are NaN)
    ItdSpec {
        input: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Bounded ILR spectrogram
    IlrSpec {
        input: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Wrapped interaural phase difference spectrogram in radians
    IpdSpec {
        input: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Interaural level difference spectrogram in dB
    IldSpec {
        input: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Per-frame ITD shift between a reference and a test render
    ItdDiff {
        reference: PathBuf,
        test: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Per-frame bounded ILR shift between a reference and a test render
    IlrDiff {
        reference: PathBuf,
        test: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Full-band feature values plus their keep-mask, for ML pipelines
    Export {
        input: PathBuf,
        #[arg(long, value_parser = parse_feature)]
        feature: FeatureKind,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// FFT size (power of two)
    #[arg(long = "fft", default_value_t = 4096)]
    fft: usize,
    /// Hop size in samples
    #[arg(long, default_value_t = 1024)]
    hop: usize,
    /// Analysis window: hann, hamming, rectangular
    #[arg(long, default_value = "hann")]
    window: Window,
    /// Number of histogram bins
    #[arg(long, default_value_t = 400)]
    bins: usize,
    /// Histogram range in feature units (seconds for ITD)
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_hyphen_values = true)]
    range: Option<Vec<f64>>,
    /// Histogram increment: intensity (|L|+|R|) or count
    #[arg(long, default_value = "intensity")]
    weighting: Weighting,
    /// Per-frame histogram normalisation: none, max, sum
    #[arg(long, default_value = "none")]
    norm: Normalization,
    /// Frequency band in Hz
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    band: Option<Vec<f64>>,
    /// Disable the default ITD band limit
    #[arg(long, conflicts_with = "band")]
    full_band: bool,
    /// Drop TF bins below this level in dB relative to the loudest bin (e.g. -60)
    #[arg(long, allow_negative_numbers = true)]
    floor_db: Option<f64>,
    /// Diffs: samples to skip at the start of TEST (negative skips REF)
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    offset: i64,
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Also write a PNG rendering
    #[arg(long)]
    png: bool,
    /// Also write CSV (frames as rows)
    #[arg(long)]
    csv: bool,
    /// Write the binary matrix and JSON sidecar (always on)
    #[arg(long)]
    bin: bool,
    /// Head model ITD at 90 degrees, in microseconds
    #[arg(long, default_value_t = 700.0)]
    itd_max_us: f64,
    /// Overwrite existing outputs
    #[arg(long)]
    force: bool,
}

fn parse_feature(s: &str) -> Result<FeatureKind, String> {
    s.parse()
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_configuration() {
            CliError::Usage(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

macro_rules! impl_from_module_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                Error::from(e).into()
            }
        }
    )*};
}
impl_from_module_error!(
    audio_io::AudioError,
    crate::stft::StftError,
    crate::masks::MaskError,
    crate::histogram::HistogramError,
    crate::diff::DiffError,
    export::ExportError,
    render::RenderError
);

impl CommonArgs {
    fn stft(&self) -> Result<StftConfig, CliError> {
        let cfg = StftConfig { fft_size: self.fft, hop_size: self.hop, window: self.window, center_pad: true };
        cfg.validate()?;
        Ok(cfg)
    }

    fn band_choice(&self) -> Result<BandChoice, CliError> {
        if self.full_band {
            return Ok(BandChoice::FullBand);
        }
        match &self.band {
            None => Ok(BandChoice::Default),
            Some(v) => {
                let band = Band { low_hz: v[0], high_hz: v[1] };
                if !(band.low_hz >= 0.0 && band.low_hz < band.high_hz) {
                    return Err(CliError::Usage(format!(
                        "InvalidBand: --band {} {} needs 0 <= LO < HI",
                        band.low_hz, band.high_hz
                    )));
                }
                Ok(BandChoice::Explicit(band))
            }
        }
    }

    fn pipeline(&self) -> Result<PipelineOptions, CliError> {
        Ok(PipelineOptions {
            stft: self.stft()?,
            band: self.band_choice()?,
            floor_db: self.floor_db,
            ..Default::default()
        })
    }

    fn histogram(&self, kind: FeatureKind) -> Result<HistogramConfig, CliError> {
        let mut cfg = HistogramConfig::default_for(kind);
        cfg.num_bins = self.bins;
        if let Some(r) = &self.range {
            cfg.lo = r[0];
            cfg.hi = r[1];
        }
        cfg.weighting = self.weighting;
        cfg.normalization = self.norm;
        cfg.validate()?;
        Ok(cfg)
    }

    fn head(&self) -> Result<HeadModel, CliError> {
        Ok(HeadModel::new(self.itd_max_us * 1e-6)?)
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into())
}

/// Collects output paths so existing files can be refused before anything
/// is written.
struct Outputs {
    dir: PathBuf,
    stem: String,
    force: bool,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn new(common: &CommonArgs, input: &Path) -> Self {
        Self { dir: common.out.clone(), stem: stem(input), force: common.force, written: Vec::new() }
    }

    fn path(&self, product: &str, ext: &str) -> PathBuf {
        self.dir.join(format!("{}.{}.{}", self.stem, product, ext))
    }

    fn check(&self, paths: &[PathBuf]) -> Result<(), CliError> {
        if self.force {
            return Ok(());
        }
        match paths.iter().find(|p| p.exists()) {
            Some(p) => Err(CliError::Data(format!("OutputExists: {} (use --force to overwrite)", p.display()))),
            None => Ok(()),
        }
    }

    fn prepare(&self) -> Result<(), CliError> {
        fs::create_dir_all(&self.dir).map_err(|e| CliError::Data(format!("IoError: {}: {e}", self.dir.display())))
    }
}

fn write_matrix_outputs(
    outs: &mut Outputs,
    product: &str,
    m: &Matrix,
    meta: &MatrixMeta,
    csv: bool,
) -> Result<(), CliError> {
    let bin = outs.path(product, "bin");
    export::write_binary(&bin, m, meta)?;
    outs.written.push(bin.clone());
    outs.written.push(export::sidecar_path(&bin));
    if csv {
        let p = outs.path(product, "csv");
        export::write_csv(&p, m, meta)?;
        outs.written.push(p);
    }
    Ok(())
}

fn matrix_targets(outs: &Outputs, product: &str, csv: bool, png: bool) -> Vec<PathBuf> {
    let mut v = vec![outs.path(product, "bin"), outs.path(product, "json")];
    if csv {
        v.push(outs.path(product, "csv"));
    }
    if png {
        v.push(outs.path(product, "png"));
    }
    v
}

fn load(path: &Path) -> Result<StereoBuffer, CliError> {
    audio_io::read_wav(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn hist_command(input: &Path, kind: FeatureKind, c: &CommonArgs) -> Result<Vec<PathBuf>, CliError> {
    let opts = c.pipeline()?;
    let cfg = c.histogram(kind)?;
    let mut outs = Outputs::new(c, input);
    let product = format!("{}-hist", kind.short_name());
    outs.check(&matrix_targets(&outs, &product, c.csv, c.png))?;
    let buf = load(input)?;
    let spec = stft::stft_stereo(&buf, &opts.stft)?;
    let hist = pipeline::histogram_for(&spec, kind, &cfg, &opts)?;
    outs.prepare()?;
    let (m, meta) = export::histogram_matrix(&hist);
    write_matrix_outputs(&mut outs, &product, &m, &meta, c.csv)?;
    if c.png {
        let p = outs.path(&product, "png");
        render::render_histogram(&hist, &RenderConfig::default(), &p)?;
        outs.written.push(p);
    }
    Ok(outs.written)
}

fn spec_command(input: &Path, kind: FeatureKind, c: &CommonArgs) -> Result<Vec<PathBuf>, CliError> {
    if c.png {
        return Err(CliError::Usage("--png is only available for histogram and diff products".into()));
    }
    let opts = c.pipeline()?;
    let mut outs = Outputs::new(c, input);
    let product = format!("{}-spec", kind.short_name());
    outs.check(&matrix_targets(&outs, &product, c.csv, false))?;
    let buf = load(input)?;
    let spec = stft::stft_stereo(&buf, &opts.stft)?;
    let feature = pipeline::compute_feature(&spec, kind, opts.epsilon);
    let mask = pipeline::product_mask(&spec, &feature, &opts)?;
    let masked = pipeline::masked_values(&feature, &mask);
    outs.prepare()?;
    let (m, meta) = export::feature_matrix(&masked);
    write_matrix_outputs(&mut outs, &product, &m, &meta, c.csv)?;
    Ok(outs.written)
}

fn export_command(input: &Path, kind: FeatureKind, c: &CommonArgs) -> Result<Vec<PathBuf>, CliError> {
    if c.png {
        return Err(CliError::Usage("--png is only available for histogram and diff products".into()));
    }
    let opts = c.pipeline()?;
    let mut outs = Outputs::new(c, input);
    let spec_product = format!("{}-spec", kind.short_name());
    let mask_product = format!("{}-mask", kind.short_name());
    let mut targets = matrix_targets(&outs, &spec_product, c.csv, false);
    targets.extend(matrix_targets(&outs, &mask_product, c.csv, false));
    outs.check(&targets)?;
    let buf = load(input)?;
    let spec = stft::stft_stereo(&buf, &opts.stft)?;
    let feature = pipeline::compute_feature(&spec, kind, opts.epsilon);
    let mask = pipeline::product_mask(&spec, &feature, &opts)?;
    outs.prepare()?;
    let (m, meta) = export::feature_matrix(&feature);
    write_matrix_outputs(&mut outs, &spec_product, &m, &meta, c.csv)?;
    let (m, meta) = export::mask_matrix(&mask, kind, &spec.geometry);
    write_matrix_outputs(&mut outs, &mask_product, &m, &meta, c.csv)?;
    Ok(outs.written)
}

fn diff_command(
    reference: &Path,
    test: &Path,
    kind: FeatureKind,
    c: &CommonArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<Vec<PathBuf>, CliError> {
    let stft_cfg = c.stft()?;
    let head = c.head()?;
    let band = match c.band_choice()? {
        BandChoice::Default => BandChoice::Default.resolve(kind),
        BandChoice::FullBand => None,
        BandChoice::Explicit(b) => Some(b),
    };
    let params = DiffParams { stft: stft_cfg, band, floor_db: c.floor_db };
    let mut outs = Outputs::new(c, test);
    let product = format!("{}-diff", kind.short_name());
    let mut targets = vec![outs.path(&product, "json")];
    if c.png {
        targets.push(outs.path(&product, "png"));
    }
    outs.check(&targets)?;

    let mut r = load(reference)?;
    let mut t = load(test)?;
    if c.offset > 0 {
        t = t.skip_samples(c.offset as usize);
    } else if c.offset < 0 {
        r = r.skip_samples(c.offset.unsigned_abs() as usize);
    }
    let report = match kind {
        FeatureKind::ItdSeconds => diff::itd_diff(&r, &t, &params, &head)?,
        _ => diff::ilr_diff(&r, &t, &params)?,
    };
    if let Some((a, b)) = report.truncated_from {
        let _ = writeln!(stderr, "warning: frame counts differ (ref {a}, test {b}); truncated to {}", a.min(b));
    }
    outs.prepare()?;
    let json = outs.path(&product, "json");
    export::write_diff_report(&report, &json)?;
    outs.written.push(json);
    if c.png {
        let p = outs.path(&product, "png");
        render::render_diff(&report, &RenderConfig::default(), &p)?;
        outs.written.push(p);
    }
    let unit = kind.unit();
    let _ = match report.mean_abs_shift_degrees {
        Some(deg) => writeln!(
            stdout,
            "mean_abs_shift {} {unit} ({deg} degrees) over {} of {} frames",
            report.mean_abs_shift,
            report.active_frames(),
            report.per_frame_delta.len()
        ),
        None => writeln!(
            stdout,
            "mean_abs_shift {} {unit} over {} of {} frames",
            report.mean_abs_shift,
            report.active_frames(),
            report.per_frame_delta.len()
        ),
    };
    Ok(outs.written)
}

/// Runs the CLI with explicit output streams and returns the exit code.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    EXIT_OK
                }
                _ => {
                    let first = e.to_string().lines().next().unwrap_or_default().to_string();
                    let _ = writeln!(stderr, "{first}\nhint: run `bincue --help` for usage");
                    EXIT_USAGE
                }
            };
        }
    };

    let result = match &cli.command {
        Command::ItdHist { input, common } => hist_command(input, FeatureKind::ItdSeconds, common),
        Command::IlrHist { input, common } => hist_command(input, FeatureKind::BoundedIlr, common),
        Command::ItdSpec { input, common } => spec_command(input, FeatureKind::ItdSeconds, common),
        Command::IlrSpec { input, common } => spec_command(input, FeatureKind::BoundedIlr, common),
        Command::IpdSpec { input, common } => spec_command(input, FeatureKind::IpdRadians, common),
        Command::IldSpec { input, common } => spec_command(input, FeatureKind::IldDb, common),
        Command::Export { input, feature, common } => export_command(input, *feature, common),
        Command::ItdDiff { reference, test, common } => {
            diff_command(reference, test, FeatureKind::ItdSeconds, common, stdout, stderr)
        }
        Command::IlrDiff { reference, test, common } => {
            diff_command(reference, test, FeatureKind::BoundedIlr, common, stdout, stderr)
        }
    };

    match result {
        Ok(paths) => {
            for p in paths {
                let _ = writeln!(stdout, "wrote {}", p.display());
            }
            EXIT_OK
        }
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}\nhint: run `bincue --help` for usage");
            EXIT_USAGE
        }
        Err(CliError::Data(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_DATA
        }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout(), &mut std::io::stderr())
}
