//! Rician tap-delay-line multipath channel and calibrated AWGN.
//!
//! One [`ChannelRealization`] is drawn per frame and held fixed for every
//! symbol in it. Only the first tap carries a line-of-sight component; the
//! remaining taps are zero-mean (Rayleigh).

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::ofdm::OfdmParams;
use crate::{Error, Result};

/// Rician K-factor used by the built-in multipath profiles.
pub const DEFAULT_K_FACTOR: f64 = 9.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    pub name: String,
    pub tap_powers: Vec<f64>,
    /// Integer sample delays, strictly increasing.
    pub tap_delays: Vec<usize>,
    /// LOS-to-scatter power ratio of tap 0; `f64::INFINITY` means LOS only.
    pub k_factor: f64,
}

impl ChannelSpec {
    /// Identity channel: AWGN only.
    pub fn h0() -> Self {
        ChannelSpec {
            name: "H0".to_string(),
            tap_powers: alloc::vec![1.0],
            tap_delays: alloc::vec![0],
            k_factor: f64::INFINITY,
        }
    }

    pub fn h1() -> Self {
        ChannelSpec {
            name: "H1".to_string(),
            tap_powers: alloc::vec![0.75, 0.25],
            tap_delays: alloc::vec![0, 1],
            k_factor: DEFAULT_K_FACTOR,
        }
    }

    pub fn h2() -> Self {
        ChannelSpec {
            name: "H2".to_string(),
            tap_powers: alloc::vec![0.55, 0.45],
            tap_delays: alloc::vec![0, 1],
            k_factor: DEFAULT_K_FACTOR,
        }
    }

    /// Looks up one of the built-in profiles `H0`, `H1`, `H2`.
    pub fn builtin(name: &str) -> Option<Self> {
        match name.to_ascii_uppercase().as_str() {
            "H0" => Some(Self::h0()),
            "H1" => Some(Self::h1()),
            "H2" => Some(Self::h2()),
            _ => None,
        }
    }

    pub fn num_taps(&self) -> usize {
        self.tap_powers.len()
    }

    pub fn max_delay(&self) -> usize {
        self.tap_delays.last().copied().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::ChannelSpec(format!("{}: {msg}", self.name)));
        if self.tap_powers.is_empty() {
            return bad("no taps".into());
        }
        if self.tap_powers.len() != self.tap_delays.len() {
            return bad(format!(
                "{} powers but {} delays",
                self.tap_powers.len(),
                self.tap_delays.len()
            ));
        }
        if self.tap_powers.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
            return bad("tap powers must be finite and nonnegative".into());
        }
        let total: f64 = self.tap_powers.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("tap powers sum to {total}, expected 1"));
        }
        if self.tap_delays.windows(2).any(|w| w[0] >= w[1]) {
            return bad("tap delays must be strictly increasing".into());
        }
        if !(self.k_factor >= 0.0) {
            return bad(format!("k_factor must be nonnegative, got {}", self.k_factor));
        }
        Ok(())
    }

    /// Also checks that the delay spread fits inside the cyclic prefix.
    pub fn validate_for(&self, params: &OfdmParams) -> Result<()> {
        self.validate()?;
        if self.max_delay() >= params.cp_len.max(1) {
            return Err(Error::ChannelSpec(format!(
                "{}: max delay {} must be below cp_len {}",
                self.name,
                self.max_delay(),
                params.cp_len
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub taps: Vec<Complex64>,
    pub delays: Vec<usize>,
}

impl ChannelRealization {
    pub fn identity() -> Self {
        ChannelRealization {
            taps: alloc::vec![Complex64::new(1.0, 0.0)],
            delays: alloc::vec![0],
        }
    }

    /// `H(f) = sum_l h_l e^{-j 2 pi f tau_l / N}`.
    pub fn frequency_response(&self, bin: f64, n: usize) -> Complex64 {
        self.taps
            .iter()
            .zip(&self.delays)
            .map(|(h, &d)| h * Complex64::from_polar(1.0, -2.0 * core::f64::consts::PI * bin * d as f64 / n as f64))
            .sum()
    }
}

/// Unit-variance circular complex Gaussian.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * core::f64::consts::FRAC_1_SQRT_2
}

pub fn draw_realization<R: Rng + ?Sized>(spec: &ChannelSpec, rng: &mut R) -> ChannelRealization {
    let taps = spec
        .tap_powers
        .iter()
        .enumerate()
        .map(|(l, &power)| {
            let amp = libm::sqrt(power);
            if l == 0 {
                let k = spec.k_factor;
                if k.is_infinite() {
                    return Complex64::new(amp, 0.0);
                }
                let los = libm::sqrt(k / (k + 1.0));
                let scatter = libm::sqrt(1.0 / (k + 1.0));
                (Complex64::new(los, 0.0) + complex_gaussian(rng) * scatter) * amp
            } else {
                complex_gaussian(rng) * amp
            }
        })
        .collect();
    ChannelRealization {
        taps,
        delays: spec.tap_delays.clone(),
    }
}

/// `out(n) = sum_l h_l signal(n - tau_l)`, with zero history before the frame.
pub fn apply_channel(signal: &[Complex64], real: &ChannelRealization) -> Vec<Complex64> {
    let mut out = alloc::vec![Complex64::new(0.0, 0.0); signal.len()];
    for (h, &d) in real.taps.iter().zip(&real.delays) {
        if d >= signal.len() {
            continue;
        }
        for (o, s) in out[d..].iter_mut().zip(signal) {
            *o += h * s;
        }
    }
    out
}

/// Noise variance per complex sample for a given SNR and signal power.
pub fn noise_variance(snr_db: f64, signal_power: f64) -> f64 {
    signal_power * libm::pow(10.0, -snr_db / 10.0)
}

/// Adds AWGN in place with per-sample variance `signal_power * 10^(-snr/10)`.
/// An infinite SNR leaves the signal untouched and consumes no randomness.
pub fn add_awgn_in_place<R: Rng + ?Sized>(
    signal: &mut [Complex64],
    snr_db: f64,
    signal_power: f64,
    rng: &mut R,
) {
    if snr_db == f64::INFINITY {
        return;
    }
    let sigma = libm::sqrt(noise_variance(snr_db, signal_power));
    for s in signal.iter_mut() {
        *s += complex_gaussian(rng) * sigma;
    }
}

/// AWGN referenced to unit signal power.
pub fn add_awgn<R: Rng + ?Sized>(signal: &[Complex64], snr_db: f64, rng: &mut R) -> Vec<Complex64> {
    add_awgn_with_power(signal, snr_db, 1.0, rng)
}

pub fn add_awgn_with_power<R: Rng + ?Sized>(
    signal: &[Complex64],
    snr_db: f64,
    signal_power: f64,
    rng: &mut R,
) -> Vec<Complex64> {
    let mut out = signal.to_vec();
    add_awgn_in_place(&mut out, snr_db, signal_power, rng);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use alloc::vec;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn builtin_profiles_validate() {
        for s in [ChannelSpec::h0(), ChannelSpec::h1(), ChannelSpec::h2()] {
            s.validate_for(&OfdmParams::default()).unwrap();
        }
        assert_eq!(ChannelSpec::builtin("h2").unwrap(), ChannelSpec::h2());
        assert!(ChannelSpec::builtin("H9").is_none());
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = ChannelSpec::h1();
        s.tap_powers = vec![0.5, 0.25];
        assert!(s.validate().is_err());
        let mut s = ChannelSpec::h1();
        s.tap_delays = vec![1, 1];
        assert!(s.validate().is_err());
        let mut s = ChannelSpec::h1();
        s.tap_delays = vec![0, 64];
        assert!(s.validate().is_ok());
        assert!(s.validate_for(&OfdmParams::default()).is_err());
        let mut s = ChannelSpec::h1();
        s.tap_delays = vec![0];
        assert!(s.validate().is_err());
    }

    #[test]
    fn h0_is_identity() {
        let mut rng = rng_from_seed(5);
        for _ in 0..10 {
            assert_eq!(draw_realization(&ChannelSpec::h0(), &mut rng).taps, vec![c(1.0)]);
        }
    }

    #[test]
    fn los_only_limit() {
        let mut spec = ChannelSpec::h1();
        spec.k_factor = f64::INFINITY;
        let mut rng = rng_from_seed(1);
        let r = draw_realization(&spec, &mut rng);
        assert!((r.taps[0].norm() - libm::sqrt(0.75)).abs() < 1e-15);
    }

    #[test]
    fn tap_statistics() {
        let spec = ChannelSpec::h1();
        let mut rng = rng_from_seed(11);
        let n = 100_000;
        let (mut p0, mut p1) = (0.0, 0.0);
        let (mut m0, mut m1) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for _ in 0..n {
            let r = draw_realization(&spec, &mut rng);
            p0 += r.taps[0].norm_sqr();
            p1 += r.taps[1].norm_sqr();
            m0 += r.taps[0];
            m1 += r.taps[1];
        }
        let n = n as f64;
        assert!((p0 / n - 0.75).abs() < 0.01);
        assert!((p1 / n - 0.25).abs() < 0.01);
        assert!(((p0 + p1) / n - 1.0).abs() < 0.01);
        let los_mean = libm::sqrt(0.75 * 9.0 / 10.0);
        assert!((m0 / n - c(los_mean)).norm() < 0.01);
        assert!((m1 / n).norm() < 0.01);
    }

    #[test]
    fn convolution_by_hand() {
        let real = ChannelRealization {
            taps: vec![c(0.5), c(0.5)],
            delays: vec![0, 1],
        };
        let out = apply_channel(&[c(1.0), c(0.0), c(0.0)], &real);
        assert_eq!(out, vec![c(0.5), c(0.5), c(0.0)]);
        let x = [c(1.0), Complex64::new(0.0, 2.0)];
        assert_eq!(apply_channel(&x, &ChannelRealization::identity()), x.to_vec());
    }

    #[test]
    fn tone_is_scaled_by_frequency_response() {
        let mut rng = rng_from_seed(2);
        let real = draw_realization(&ChannelSpec::h2(), &mut rng);
        let n = 64;
        let f = 5.0;
        let tone: Vec<Complex64> = (0..n)
            .map(|i| Complex64::from_polar(1.0, 2.0 * core::f64::consts::PI * f * i as f64 / n as f64))
            .collect();
        let out = apply_channel(&tone, &real);
        let h = real.frequency_response(f, n);
        for i in real.delays[1]..n {
            assert!((out[i] - tone[i] * h).norm() < 1e-12);
        }
    }

    #[test]
    fn awgn_calibration() {
        let zeros = vec![c(0.0); 100_000];
        for (snr, expected, tol) in [(0.0, 1.0, 0.02), (10.0, 0.1, 0.002)] {
            let mut rng = rng_from_seed(3);
            let noisy = add_awgn(&zeros, snr, &mut rng);
            let p = noisy.iter().map(|v| v.norm_sqr()).sum::<f64>() / zeros.len() as f64;
            assert!((p - expected).abs() < tol, "snr {snr}: {p}");
        }
        let x = vec![c(1.0), c(-2.0)];
        assert_eq!(add_awgn(&x, f64::INFINITY, &mut rng_from_seed(0)), x);
    }

    #[test]
    fn awgn_is_deterministic() {
        let x = vec![c(1.0); 8];
        let a = add_awgn(&x, 3.0, &mut rng_from_seed(9));
        let b = add_awgn(&x, 3.0, &mut rng_from_seed(9));
        assert_eq!(a, b);
    }
}
