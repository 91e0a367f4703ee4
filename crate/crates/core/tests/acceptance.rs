//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line regardless of output capture.

mod common;

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use bincue::audio_io::{encode_wav, WavFormat};
use bincue::diff::{self, DiffParams, HeadModel};
use bincue::features::{self, FeatureKind, DEFAULT_EPSILON};
use bincue::histogram::{self, BinAssigner, HistogramConfig, Normalization, OutOfRange, Weighting};
use bincue::masks::{self, TfMask, DEFAULT_ITD_BAND};
use bincue::stft::{stft_stereo, Geometry, StereoSpectrogram, StftConfig};
use bincue::StereoBuffer;
use ndarray::Array2;
use rand::Rng;
use rustfft::num_complex::Complex64;

const SR: u32 = 48_000;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, what: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what.into())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    check(elapsed.as_secs_f64() < limit_s, format!("runtime {:.3} s exceeds {limit_s} s", elapsed.as_secs_f64()))
}

/// Direct evaluation of the piecewise map, written independently of the
/// library.
fn bilr_direct(l: f64, r: f64) -> f64 {
    let ilr = r / l;
    if ilr < 1.0 {
        ilr - 1.0
    } else {
        1.0 - 1.0 / ilr
    }
}

fn c1_bounded_ilr() -> Outcome {
    let start = Instant::now();
    let mut rng = common::rng(101);
    let mut worst_fwd: f64 = 0.0;
    let mut worst_inv: f64 = 0.0;
    for i in 0..10_000 {
        // log-uniform magnitudes over 1e-2..1e2, so ILR spans 1e-4..1e4; the
        // inverse loses about eps*ILR relative accuracy near the bounds
        let l = 10f64.powf(rng.random_range(-2.0..2.0));
        let r = 10f64.powf(rng.random_range(-2.0..2.0));
        let got = features::bounded_ilr_from_magnitudes(l, r, DEFAULT_EPSILON);
        check((-1.0..=1.0).contains(&got), format!("bILR {got} out of [-1,1] for ({l},{r})"))?;
        worst_fwd = worst_fwd.max((got - bilr_direct(l, r)).abs());
        let ilr = r / l;
        let back = features::ilr_from_bounded(got);
        worst_inv = worst_inv.max((back - ilr).abs() / ilr);

        // boundedness over the full dynamic range, silence included
        let l = if i % 97 == 0 { 0.0 } else { 10f64.powf(rng.random_range(-15.0..15.0)) };
        let r = if i % 89 == 0 { 0.0 } else { 10f64.powf(rng.random_range(-15.0..15.0)) };
        let b = features::bounded_ilr_from_magnitudes(l, r, DEFAULT_EPSILON);
        check((-1.0..=1.0).contains(&b), format!("bILR {b} out of [-1,1] for ({l},{r})"))?;
    }
    let elapsed = start.elapsed();
    check(worst_fwd <= 1e-12, format!("forward error {worst_fwd:e}"))?;
    check(worst_inv <= 1e-12, format!("inverse relative error {worst_inv:e}"))?;
    within(elapsed, 1.0)?;
    Ok(format!("max |err| {worst_fwd:.1e}, max inverse rel err {worst_inv:.1e}, {:.3} s", elapsed.as_secs_f64()))
}

fn c2_wrap_and_itd() -> Outcome {
    let mut rng = common::rng(202);
    let two_pi = 2.0 * PI;
    let mut worst_multiple: f64 = 0.0;
    for _ in 0..10_000 {
        let x = rng.random_range(-10.0 * PI..=10.0 * PI);
        let w = features::wrap_phase(x);
        check((-PI..PI).contains(&w), format!("wrap({x}) = {w} outside [-pi, pi)"))?;
        let turns = ((x - w) / two_pi).round();
        // x - w must be an integer number of turns up to the rounding of x itself
        let residual = (x - w) - turns * two_pi;
        worst_multiple = worst_multiple.max(residual.abs());
    }
    check(worst_multiple <= 1e-12, format!("wrap residual {worst_multiple:e}"))?;

    // ITD spectrogram against per-cell scalar evaluation
    let (bins, frames) = (257, 40);
    let geometry = Geometry {
        num_bins: bins,
        num_frames: frames,
        fft_size: 512,
        hop_size: 256,
        sample_rate_hz: SR,
        center_pad: true,
    };
    let mut cplx = || Complex64::from_polar(rng.random_range(0.01..2.0), rng.random_range(-PI..PI));
    let left = Array2::from_shape_fn((bins, frames), |_| cplx());
    let right = Array2::from_shape_fn((bins, frames), |_| cplx());
    let spec = StereoSpectrogram::from_parts(left.clone(), right.clone(), geometry).unwrap();
    let itd = features::itd(&spec);
    let k_width = SR as f64 / 512.0;
    let mut worst_itd: f64 = 0.0;
    for k in 1..bins {
        for m in 0..frames {
            let raw = right[[k, m]].arg() - left[[k, m]].arg();
            let wrapped = (raw + PI).rem_euclid(two_pi) - PI;
            let scalar = wrapped / (two_pi * k_width * k as f64);
            let got = itd.values[[k, m]];
            check(itd.validity[[k, m]], format!("cell {k},{m} marked invalid"))?;
            worst_itd = worst_itd.max((got - scalar).abs() / scalar.abs().max(1e-300));
        }
    }
    check(!itd.validity.row(0).iter().any(|&v| v), "DC row marked valid")?;
    check(worst_itd <= 1e-12, format!("ITD relative error {worst_itd:e}"))?;
    Ok(format!("wrap residual {worst_multiple:.1e}, ITD rel err {worst_itd:.1e}"))
}

fn bilr_histogram(buf: &StereoBuffer) -> Result<(histogram::TimeAzimuthHistogram, usize, usize), String> {
    let spec = stft_stereo(buf, &StftConfig::default()).map_err(|e| e.to_string())?;
    let bilr = features::ilr_bounded(&spec, DEFAULT_EPSILON);
    let cfg = HistogramConfig::default_for(FeatureKind::BoundedIlr);
    let assigner = BinAssigner::new(&cfg).map_err(|e| e.to_string())?;
    let at_half = assigner.assign(0.5).ok_or("0.5 out of range")?;
    let at_zero = assigner.assign(0.0).ok_or("0 out of range")?;
    let mask = TfMask::all(spec.geometry.shape(), true);
    let h = histogram::accumulate(&bilr, &spec, &mask, &cfg).map_err(|e| e.to_string())?;
    Ok((h, at_half, at_zero))
}

fn c3_panned_source() -> Outcome {
    let start = Instant::now();
    let n = 5 * SR as usize;
    let l = common::white_noise(n, 303);
    let r: Vec<f64> = l.iter().map(|v| 2.0 * v).collect();
    let panned = StereoBuffer::new(l.clone(), r, SR).unwrap();
    let (h, at_half, _) = bilr_histogram(&panned)?;
    let marginal = h.marginal();
    let near: f64 = marginal[at_half.saturating_sub(1)..=(at_half + 1).min(marginal.len() - 1)].iter().sum();
    let total: f64 = marginal.iter().sum();
    let frac = near / total;
    check(frac >= 0.95, format!("only {:.4} of mass near 0.5", frac))?;

    let centred = StereoBuffer::new(l.clone(), l, SR).unwrap();
    let (h0, _, at_zero) = bilr_histogram(&centred)?;
    let m0 = h0.marginal();
    let total0: f64 = m0.iter().sum();
    check(total0 > 0.0, "no mass for identical channels")?;
    check(
        m0[at_zero] == total0 && m0.iter().enumerate().all(|(b, &v)| b == at_zero || v == 0.0),
        "identical channels spread mass outside the zero bin",
    )?;
    let elapsed = start.elapsed();
    within(elapsed, 5.0)?;
    Ok(format!(
        "{:.2}% of mass within 1 bin of 0.5; centred input 100% in bin {at_zero}; {:.2} s",
        100.0 * frac,
        elapsed.as_secs_f64()
    ))
}

fn c4_delayed_source() -> Outcome {
    let n = 4 * SR as usize;
    let event = common::lowpass(&common::white_noise(n, 404), SR as f64, 999.0);
    // a finite event: the left channel is an exact 15-sample delayed copy
    let mut left = vec![0.0; 15];
    left.extend_from_slice(&event);
    let mut src = event;
    src.extend_from_slice(&[0.0; 15]);
    let expected = 15.0 / SR as f64;
    let oracle = common::xcorr_delay(&left, &src, 60) / SR as f64;

    let buf = StereoBuffer::new(left, src, SR).unwrap();
    let spec = stft_stereo(&buf, &StftConfig::default()).map_err(|e| e.to_string())?;
    let itd = features::itd(&spec);
    let band = masks::band_limit_mask(&spec.geometry, DEFAULT_ITD_BAND).map_err(|e| e.to_string())?;
    let cfg = HistogramConfig::default_for(FeatureKind::ItdSeconds);
    let width = cfg.bin_width();
    let h = histogram::accumulate(&itd, &spec, &band, &cfg).map_err(|e| e.to_string())?;
    let target = BinAssigner::new(&cfg).unwrap().assign(expected).unwrap();
    let peak = h.peak_bin();
    check(
        peak.abs_diff(target) <= 1,
        format!("peak bin {peak} ({:.1} us), expected bin {target}", h.bin_centers[peak] * 1e6),
    )?;

    let means = diff::frame_mean_cue(&itd, &spec, &band).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    let mut active = 0;
    for v in means.iter().flatten() {
        worst = worst.max((v - oracle).abs());
        active += 1;
    }
    check(active > 0, "no active frames")?;
    check(worst <= width, format!("per-frame mean off oracle by {:.2} us", worst * 1e6))?;
    Ok(format!(
        "peak {:.1} us (bin {peak}), xcorr oracle {:.2} us, worst frame mean deviation {:.2} us over {active} frames",
        h.bin_centers[peak] * 1e6,
        oracle * 1e6,
        worst * 1e6
    ))
}

fn c5_aliasing() -> Outcome {
    let n = SR as usize;
    let left = common::tone(2000.0, SR as f64, n, 400e-6);
    let right = common::tone(2000.0, SR as f64, n, 0.0);
    let buf = StereoBuffer::new(left, right, SR).unwrap();
    let spec = stft_stereo(&buf, &StftConfig::default()).map_err(|e| e.to_string())?;
    let k = (2000.0 / spec.geometry.bin_width_hz()).round() as usize;
    let itd = features::itd(&spec);
    let frames = spec.geometry.num_frames;
    // the first and last frames see the zero padding around the tone
    let mut worst: f64 = 0.0;
    for m in 2..frames - 2 {
        worst = worst.max((itd.values[[k, m]] + 100e-6).abs());
    }
    check(worst <= 1e-6, format!("ITD at tone bin off -100 us by {:.3} us", worst * 1e6))?;

    let band = masks::band_limit_mask(&spec.geometry, DEFAULT_ITD_BAND).map_err(|e| e.to_string())?;
    check(band.keep.row(k).iter().all(|&b| !b), "band mask keeps the 2 kHz bin")?;
    let cfg = HistogramConfig::default_for(FeatureKind::ItdSeconds);
    let h = histogram::accumulate(&itd, &spec, &band, &cfg).map_err(|e| e.to_string())?;
    // rewrite the tone bin completely: the band-limited histogram must not move
    let mut altered = spec.clone();
    for m in 0..frames {
        altered.left[[k, m]] = Complex64::new(1e6, 0.0);
        altered.right[[k, m]] = Complex64::new(0.0, 1e6);
    }
    let itd2 = features::itd(&altered);
    let h2 = histogram::accumulate(&itd2, &altered, &band, &cfg).map_err(|e| e.to_string())?;
    check(h.counts == h2.counts, "histogram depends on the 2 kHz bin")?;
    let mut only_tone = TfMask::all(spec.geometry.shape(), false);
    only_tone.keep.row_mut(k).fill(true);
    let both = masks::combine(&[&band, &only_tone]).map_err(|e| e.to_string())?;
    let h3 = histogram::accumulate(&itd, &spec, &both, &cfg).map_err(|e| e.to_string())?;
    check(h3.total_mass() == 0.0, "tone bin contributes mass")?;
    Ok(format!("tone-bin ITD -100 us +/- {:.4} us; bin {k} excluded by the default band", worst * 1e6))
}

fn sine_law_source(azimuth_deg: f64, head: &HeadModel, seed: u64) -> StereoBuffer {
    let n = 2 * SR as usize;
    let src = common::lowpass(&common::white_noise(n, seed), SR as f64, 1400.0);
    let itd = head.itd_for_azimuth(azimuth_deg);
    let left = common::fractional_delay(&src, SR as f64, itd / 2.0);
    let right = common::fractional_delay(&src, SR as f64, -itd / 2.0);
    StereoBuffer::new(left, right, SR).unwrap()
}

fn c6_diff() -> Outcome {
    let head = HeadModel::new(700e-6).map_err(|e| e.to_string())?;
    let params = DiffParams::itd_default();
    let x = sine_law_source(20.0, &head, 606);
    let same = diff::itd_diff(&x, &x, &params, &head).map_err(|e| e.to_string())?;
    check(same.active_frames() > 0, "no active frames")?;
    check(
        same.mean_abs_shift == 0.0
            && same.mean_abs_shift_degrees == Some(0.0)
            && same.per_frame_delta.iter().flatten().all(|d| *d == 0.0),
        "identity diff is not exactly zero",
    )?;
    let y = sine_law_source(25.0, &head, 606);
    let r = diff::itd_diff(&x, &y, &params, &head).map_err(|e| e.to_string())?;
    let deg = r.mean_abs_shift_degrees.ok_or("no degrees reported")?;
    check((deg - 5.0).abs() <= 1.0, format!("mean_abs_shift_degrees {deg:.3}"))?;
    Ok(format!("identity exactly 0; 20 vs 25 deg reads {deg:.3} deg"))
}

fn random_case(seed: u64, dyadic: bool) -> (Array2<f64>, Array2<f64>, Array2<bool>) {
    let mut rng = common::rng(seed);
    let (k, m) = (64, 16);
    // values overshoot the range so that out-of-range cells are exercised
    let values = Array2::from_shape_fn((k, m), |_| rng.random_range(-1.3..1.3));
    let weights = Array2::from_shape_fn((k, m), |_| {
        if dyadic {
            rng.random_range(0u32..1 << 20) as f64 / 1024.0
        } else {
            rng.random_range(0.0..10.0) * 10f64.powi(rng.random_range(-3..4))
        }
    });
    let keep = Array2::from_shape_fn((k, m), |_| rng.random_bool(0.9));
    (values, weights, keep)
}

fn in_range_column_sums(
    values: &Array2<f64>,
    weights: &Array2<f64>,
    keep: &Array2<bool>,
    lo: f64,
    hi: f64,
) -> Vec<f64> {
    (0..values.ncols())
        .map(|m| {
            let mut s = 0.0;
            for k in 0..values.nrows() {
                let v = values[[k, m]];
                if keep[[k, m]] && v >= lo && v <= hi {
                    s += weights[[k, m]];
                }
            }
            s
        })
        .collect()
}

fn c7_mass_and_threads() -> Outcome {
    let cfg = HistogramConfig {
        num_bins: 400,
        lo: -1.0,
        hi: 1.0,
        weighting: Weighting::Intensity,
        normalization: Normalization::None,
        out_of_range: OutOfRange::Discard,
    };
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let many = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
    let mut worst_general: f64 = 0.0;
    for seed in 0..50 {
        let (v, w, keep) = random_case(700 + seed, true);
        let h = histogram::accumulate_matrix(&v, &w, &keep, &cfg).map_err(|e| e.to_string())?;
        let want = in_range_column_sums(&v, &w, &keep, cfg.lo, cfg.hi);
        for (m, s) in want.iter().enumerate() {
            let got: f64 = h.column(m).iter().sum();
            check(got == *s, format!("seed {seed} column {m}: {got} != {s}"))?;
        }

        let (v, w, keep) = random_case(900 + seed, false);
        let a = one.install(|| histogram::accumulate_matrix(&v, &w, &keep, &cfg)).map_err(|e| e.to_string())?;
        let b = many.install(|| histogram::accumulate_matrix(&v, &w, &keep, &cfg)).map_err(|e| e.to_string())?;
        check(
            a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()),
            format!("seed {seed}: 1-thread and 8-thread results differ"),
        )?;
        let want = in_range_column_sums(&v, &w, &keep, cfg.lo, cfg.hi);
        for (m, s) in want.iter().enumerate() {
            let got: f64 = a.column(m).iter().sum();
            worst_general = worst_general.max((got - s).abs() / s.max(1.0));
        }
    }
    check(worst_general <= 1e-12, format!("general-weight column sum error {worst_general:e}"))?;
    Ok(format!(
        "dyadic weights conserve mass exactly; 1 vs 8 threads bit-identical; general weights within {worst_general:.1e}"
    ))
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_bincue")).args(args).output().map_err(|e| e.to_string())?;
    check(out.status.success(), format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)))
}

fn dir_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn c8_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let n = 2 * SR as usize;
    let src = common::lowpass(&common::white_noise(n, 808), SR as f64, 3000.0);
    let left = common::delay_samples(&src, 10);
    let right: Vec<f64> = src.iter().map(|v| 0.7 * v).collect();
    let wav = tmp.path().join("scene.wav");
    std::fs::write(&wav, encode_wav(&[&left, &right], SR, WavFormat::Float32)).map_err(|e| e.to_string())?;
    let wav = wav.to_str().unwrap();

    let mut runs = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        let out = out.to_str().unwrap();
        for sub in ["itd-hist", "ilr-hist"] {
            run_cli(&[sub, wav, "--png", "--csv", "--out", out])?;
        }
        run_cli(&["itd-spec", wav, "--csv", "--out", out])?;
        runs.push(dir_files(Path::new(out)));
    }
    let (a, b) = (&runs[0], &runs[1]);
    for ext in ["bin", "csv", "json", "png"] {
        check(a.iter().any(|(name, _)| name.ends_with(ext)), format!("no .{ext} output"))?;
    }
    check(a.len() == b.len(), "runs produced different file sets")?;
    for ((na, da), (nb, db)) in a.iter().zip(b) {
        check(na == nb, format!("file sets differ: {na} vs {nb}"))?;
        check(da == db, format!("{na} differs between runs"))?;
    }
    Ok(format!("{} output files byte-identical across two runs", a.len()))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 bounded ILR correctness", c1_bounded_ilr),
        ("2 phase wrap and ITD correctness", c2_wrap_and_itd),
        ("3 panned-source histogram", c3_panned_source),
        ("4 delayed-source histogram", c4_delayed_source),
        ("5 aliasing and band mask", c5_aliasing),
        ("6 diff identity and synthetic shift", c6_diff),
        ("7 mass conservation and thread independence", c7_mass_and_threads),
        ("8 end-to-end CLI determinism", c8_determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        match std::panic::catch_unwind(f) {
            Ok(Ok(detail)) => println!("PASS criterion {name}: {detail}"),
            Ok(Err(why)) => {
                failed += 1;
                println!("FAIL criterion {name}: {why}");
            }
            Err(_) => {
                failed += 1;
                println!("FAIL criterion {name}: panicked");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
