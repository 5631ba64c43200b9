//! Property tests over the signal chain.

use num_complex::Complex64;
use proptest::prelude::*;
use sqcc_core::channel::{apply_channel, draw_realization, ChannelRealization, ChannelSpec};
use sqcc_core::constellation::Modulation;
use sqcc_core::features::{extract_frame_features, filter_outliers, scsd, FilterConfig};
use sqcc_core::frame::{synthesize_frame, FrameSpec};
use sqcc_core::ofdm::{ofdm_demodulate, ofdm_modulate, OfdmParams};
use sqcc_core::seed::rng_from_seed;

fn complex() -> impl Strategy<Value = Complex64> {
    (-10.0f64..10.0, -10.0f64..10.0).prop_map(|(r, i)| Complex64::new(r, i))
}

fn modulation() -> impl Strategy<Value = Modulation> {
    prop::sample::select(Modulation::ALL.to_vec())
}

fn small_params() -> OfdmParams {
    OfdmParams {
        n_subcarriers: 64,
        cp_len: 16,
        symbols_per_frame: 3,
    }
}

proptest! {
    #[test]
    fn ofdm_round_trip_and_parseval(symbols in prop::collection::vec(prop::collection::vec(complex(), 64), 3)) {
        let p = small_params();
        let time = ofdm_modulate(&symbols, &p).unwrap();
        prop_assert_eq!(time.len(), 3 * 80);
        let back = ofdm_demodulate(&time, &p).unwrap();
        for (sym, (x, y)) in time.chunks(80).zip(symbols.iter().zip(&back)) {
            prop_assert_eq!(&sym[..16], &sym[64..]);
            for (a, b) in x.iter().zip(y) {
                prop_assert!((a - b).norm() < 1e-9);
            }
            let et: f64 = sym[16..].iter().map(|v| v.norm_sqr()).sum();
            let ef: f64 = x.iter().map(|v| v.norm_sqr()).sum::<f64>() / 64.0;
            prop_assert!((et - ef).abs() <= 1e-9 * ef.max(1e-300));
        }
    }

    #[test]
    fn channel_is_linear(
        x in prop::collection::vec(complex(), 32),
        y in prop::collection::vec(complex(), 32),
        a in complex(),
        b in complex(),
        seed in any::<u64>(),
    ) {
        let real = draw_realization(&ChannelSpec::h2(), &mut rng_from_seed(seed));
        let mix: Vec<Complex64> = x.iter().zip(&y).map(|(u, v)| a * u + b * v).collect();
        let lhs = apply_channel(&mix, &real);
        let (hx, hy) = (apply_channel(&x, &real), apply_channel(&y, &real));
        for i in 0..32 {
            let rhs = a * hx[i] + b * hy[i];
            prop_assert!((lhs[i] - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
        }
    }

    #[test]
    fn filter_soundness(seq in prop::collection::vec(complex(), 0..200), t_max in 0.1f64..20.0) {
        let cfg = FilterConfig::new(t_max).unwrap();
        let kept = filter_outliers(&seq, &cfg);
        prop_assert!(kept.iter().all(|v| v.norm() <= t_max));
        let removed = seq.iter().filter(|v| v.norm() > t_max).count();
        prop_assert_eq!(kept.len() + removed, seq.len());
        let mut it = seq.iter();
        for k in &kept {
            prop_assert!(it.any(|v| v == k), "order not preserved");
        }
    }

    #[test]
    fn scsd_scale_invariance(y in prop::collection::vec(complex(), 2..64), c in complex()) {
        prop_assume!(c.norm() > 1e-3 && y.iter().all(|v| v.norm() > 1e-3));
        let scaled: Vec<Complex64> = y.iter().map(|v| v * c).collect();
        for (a, b) in scsd(&y).iter().zip(scsd(&scaled)) {
            prop_assert!((a - b).norm() <= 1e-12 * a.norm());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn frame_features_scale_invariant(
        m in modulation(),
        seed in any::<u64>(),
        snr in -10.0f64..10.0,
        mag in 0.01f64..100.0,
        phase in -3.14f64..3.14,
    ) {
        let p = small_params();
        let spec = FrameSpec { modulation: m, snr_db: snr, channel: ChannelSpec::h1(), seed };
        let frame = synthesize_frame(&spec, &p).unwrap();
        let c = Complex64::from_polar(mag, phase);
        let scaled: Vec<Complex64> = frame.samples.iter().map(|v| v * c).collect();
        // A huge threshold keeps the comparison away from the filter boundary.
        let cfg = FilterConfig { t_max: 1e12 };
        let a = extract_frame_features(&frame.samples, &p, Some(&cfg)).unwrap();
        let b = extract_frame_features(&scaled, &p, Some(&cfg)).unwrap();
        prop_assert_eq!(a.sample_count, b.sample_count);
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x - y).abs() <= 1e-10 * x.abs().max(1e-300));
        }
    }
}

#[test]
fn identity_channel_passes_signal() {
    let x: Vec<Complex64> = (0..10).map(|i| Complex64::new(i as f64, 1.0)).collect();
    assert_eq!(apply_channel(&x, &ChannelRealization::identity()), x);
}
