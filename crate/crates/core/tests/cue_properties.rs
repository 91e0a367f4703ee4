mod common;

use std::f64::consts::PI;

use bincue::features::{self, bounded_ilr, ilr_from_bounded, wrap_phase, DEFAULT_EPSILON};
use bincue::stft::{stft_stereo, StftConfig, Window};
use bincue::StereoBuffer;
use proptest::prelude::*;

const SR: u32 = 48_000;

fn small_cfg() -> StftConfig {
    StftConfig { fft_size: 1024, hop_size: 512, window: Window::Hann, center_pad: true }
}

fn random_pair(seed: u64, n: usize) -> StereoBuffer {
    let l = common::white_noise(n, seed);
    let r = common::white_noise(n, seed + 1000);
    StereoBuffer::new(l, r, SR).unwrap()
}

#[test]
fn swapping_channels_negates_every_cue() {
    let buf = random_pair(1, 20_000);
    let a = stft_stereo(&buf, &small_cfg()).unwrap();
    let b = stft_stereo(&buf.swapped(), &small_cfg()).unwrap();
    assert_eq!(a.swapped(), b);

    let (ba, bb) = (features::ilr_bounded(&a, DEFAULT_EPSILON), features::ilr_bounded(&b, DEFAULT_EPSILON));
    for (x, y) in ba.values.iter().zip(bb.values.iter()) {
        assert_eq!(*x, -*y);
    }

    let (pa, pb) = (features::ipd(&a), features::ipd(&b));
    let (ta, tb) = (features::itd(&a), features::itd(&b));
    let mut checked = 0;
    for ((k, m), &p) in pa.values.indexed_iter() {
        if p.abs() == PI {
            continue;
        }
        assert_eq!(p, -pb.values[[k, m]]);
        if k > 0 {
            assert_eq!(ta.values[[k, m]], -tb.values[[k, m]]);
            checked += 1;
        }
    }
    assert!(checked > 10_000);

    let (la, lb) = (features::ild_db(&a, DEFAULT_EPSILON), features::ild_db(&b, DEFAULT_EPSILON));
    for (x, y) in la.values.iter().zip(lb.values.iter()) {
        assert!((x + y).abs() < 1e-12 * x.abs().max(1.0));
    }
}

#[test]
fn common_gain_leaves_cues_unchanged() {
    let buf = random_pair(2, 20_000);
    let base = stft_stereo(&buf, &small_cfg()).unwrap();
    for gain in [3.7, 0.01, 250.0] {
        let scaled = StereoBuffer::new(
            buf.left().iter().map(|v| v * gain).collect(),
            buf.right().iter().map(|v| v * gain).collect(),
            SR,
        )
        .unwrap();
        let s = stft_stereo(&scaled, &small_cfg()).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);

        let (b0, b1) = (features::ilr_bounded(&base, DEFAULT_EPSILON), features::ilr_bounded(&s, DEFAULT_EPSILON));
        assert!(b0.values.iter().zip(b1.values.iter()).all(|(a, b)| close(*a, *b)));

        let (l0, l1) = (features::ild_db(&base, DEFAULT_EPSILON), features::ild_db(&s, DEFAULT_EPSILON));
        // the additive epsilon moves a cell by at most (20/ln 10) * 2 eps / min(|L|,|R|)
        for ((k, m), &a) in l0.values.indexed_iter() {
            let quiet = base.left[[k, m]].norm().min(base.right[[k, m]].norm()) * gain.min(1.0);
            let bound = 1e-9 + 20.0 / std::f64::consts::LN_10 * 2.0 * DEFAULT_EPSILON / quiet;
            assert!((a - l1.values[[k, m]]).abs() <= bound, "ild at {k},{m}");
        }

        let (p0, p1) = (features::ipd(&base), features::ipd(&s));
        let (t0, t1) = (features::itd(&base), features::itd(&s));
        for ((k, m), &p) in p0.values.indexed_iter() {
            if p.abs() > PI - 1e-9 {
                continue;
            }
            assert!((p - p1.values[[k, m]]).abs() < 1e-12, "ipd at {k},{m}");
            if k > 0 {
                // the phase tolerance carried through the division by 2 pi f
                let bound = 1e-12 / (2.0 * PI * base.geometry.bin_frequency_hz(k));
                assert!((t0.values[[k, m]] - t1.values[[k, m]]).abs() <= bound, "itd at {k},{m}");
            }
        }
    }
}

#[test]
fn delayed_lowpassed_noise_median_itd() {
    let n = 3 * SR as usize;
    let src = common::lowpass(&common::white_noise(n, 5), SR as f64, 1000.0);
    // left lags by 300 us: the source sits to the right
    let left = common::fractional_delay(&src, SR as f64, 300e-6);
    let oracle_lag = common::xcorr_delay(&left, &src, 48);
    assert!((oracle_lag / SR as f64 - 300e-6).abs() < 10e-6, "oracle lag {oracle_lag}");

    let buf = StereoBuffer::new(left, src, SR).unwrap();
    let spec = stft_stereo(&buf, &StftConfig::default()).unwrap();
    let itd = features::itd(&spec);
    let w = spec.intensity();
    let pairs: Vec<(f64, f64)> = itd
        .values
        .indexed_iter()
        .filter(|((k, _), _)| itd.validity[[*k, 0]])
        .map(|((k, m), &v)| (v, w[[k, m]]))
        .collect();
    let median = common::weighted_median(pairs);
    assert!((250e-6..=350e-6).contains(&median), "median {median}");
}

#[test]
fn tone_above_aliasing_limit_wraps() {
    // 2 kHz, 400 us: 0.8 of a period, reads as -0.2 of a period = -100 us
    let n = SR as usize;
    let left = common::tone(2000.0, SR as f64, n, 400e-6);
    let right = common::tone(2000.0, SR as f64, n, 0.0);
    let buf = StereoBuffer::new(left, right, SR).unwrap();
    let spec = stft_stereo(&buf, &StftConfig::default()).unwrap();
    let k = (2000.0 / spec.geometry.bin_width_hz()).round() as usize;
    let itd = features::itd(&spec);
    for m in 4..spec.geometry.num_frames - 4 {
        let v = itd.values[[k, m]];
        assert!((v + 100e-6).abs() < 1e-6, "frame {m}: {v}");
    }
}

proptest! {
    #[test]
    fn bounded_ilr_inverse(ratio in 1e-6f64..1e6) {
        let b = bounded_ilr(ratio);
        prop_assert!((-1.0..=1.0).contains(&b));
        let back = ilr_from_bounded(b);
        // one rounding in b is amplified by max(ratio, 1/ratio) on the way back
        let cond = ratio.max(1.0 / ratio);
        prop_assert!((back - ratio).abs() / ratio <= 4.0 * f64::EPSILON * cond);
    }

    #[test]
    fn bounded_ilr_strictly_increasing(a in 1e-6f64..1e6, b in 1e-6f64..1e6) {
        prop_assume!(a < b * (1.0 - 1e-9));
        prop_assert!(bounded_ilr(a) < bounded_ilr(b));
    }

    #[test]
    fn wrap_agrees_with_modulo_formula(x in -100.0f64..100.0) {
        let w = wrap_phase(x);
        prop_assert!((-PI..PI).contains(&w));
        let reference = (x + PI).rem_euclid(2.0 * PI) - PI;
        let d = (w - reference).abs();
        prop_assert!(d < 1e-12 || (d - 2.0 * PI).abs() < 1e-12);
        let turns = (x - w) / (2.0 * PI);
        prop_assert!((turns - turns.round()).abs() < 1e-12);
    }
}
