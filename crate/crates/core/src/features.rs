//! Spectral-quotient sequences and their cumulant features.
//!
//! Each received OFDM spectrum `Y` is turned into the quotient sequence
//! `U(m) = Y(m) / Y(m-1)` (circular, so `U(0) = Y(0) / Y(N-1)`). For
//! adjacent subcarriers the channel response nearly cancels, leaving a
//! statistic of the transmitted alphabet. Quotients with small denominators
//! blow up, so elements with `|U(m)| > t_max` are dropped before six
//! second- and fourth-order cumulants are estimated over the surviving
//! elements of the whole frame.
//!
//! The cumulant formulas are shared between the sample estimator and the
//! exact population oracle ([`theoretical_sqcs`]); `C22` is evaluated as
//! `E[conj(G)^2] - C20^2 - 2 E[G]`.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::constellation::{alphabet, Modulation};
use crate::ofdm::{Ofdm, OfdmParams};
use crate::{Error, Result};

/// Pooled quotient elements required for an admissible feature vector.
pub const MIN_SAMPLES: usize = 1024;

pub const FEATURE_NAMES: [&str; 6] = ["c20", "c21", "c22", "c40", "c41", "c42"];

/// Reference cumulant magnitudes per modulation, as tabulated (rounded to
/// two or three digits) in the published results.
pub const REFERENCE_TABLE: [(Modulation, [f64; 6]); 5] = [
    (Modulation::Bpsk, [1.0, 1.0, 0.0, 2.0, 2.0, 2.0]),
    (Modulation::Qpsk, [0.0, 1.0, 0.0, 1.0, 0.0, 1.0]),
    (Modulation::Psk8, [0.0, 1.0, 0.0, 0.0, 0.0, 1.0]),
    (Modulation::Qam8, [0.16, 1.8, 0.13, 1.56, 0.704, 0.25]),
    (Modulation::Qam16, [0.0, 1.89, 0.0, 4.20, 0.0, 1.876]),
];

pub fn reference_values(modulation: Modulation) -> [f64; 6] {
    REFERENCE_TABLE
        .iter()
        .find(|(m, _)| *m == modulation)
        .map(|(_, v)| *v)
        .expect("every modulation has a reference row")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub t_max: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig { t_max: 10.0 }
    }
}

impl FilterConfig {
    pub fn new(t_max: f64) -> Result<Self> {
        if !(t_max > 0.0) {
            return Err(Error::InvalidArgument(alloc::format!("t_max must be positive, got {t_max}")));
        }
        Ok(FilterConfig { t_max })
    }
}

/// Six cumulant magnitudes `[c20, c21, c22, c40, c41, c42]` plus the number
/// of quotient elements they were estimated from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqcVector {
    pub values: [f64; 6],
    pub sample_count: usize,
}

impl SqcVector {
    pub fn c20(&self) -> f64 {
        self.values[0]
    }
    pub fn c21(&self) -> f64 {
        self.values[1]
    }
    pub fn c22(&self) -> f64 {
        self.values[2]
    }
    pub fn c40(&self) -> f64 {
        self.values[3]
    }
    pub fn c41(&self) -> f64 {
        self.values[4]
    }
    pub fn c42(&self) -> f64 {
        self.values[5]
    }

    pub fn is_admissible(&self) -> bool {
        self.sample_count >= MIN_SAMPLES && self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &[f64; 6]) -> f64 {
        self.values
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Marker emitted for a quotient whose denominator is exactly zero; it always
/// fails the outlier test.
pub const ZERO_DENOMINATOR: Complex64 = Complex64::new(f64::INFINITY, 0.0);

/// Spectral circular shift division with a one-step shift.
pub fn scsd(freq: &[Complex64]) -> Vec<Complex64> {
    let n = freq.len();
    (0..n)
        .map(|m| {
            let den = freq[if m == 0 { n - 1 } else { m - 1 }];
            if den == Complex64::new(0.0, 0.0) {
                ZERO_DENOMINATOR
            } else {
                freq[m] / den
            }
        })
        .collect()
}

fn keep(v: &Complex64, filter: Option<&FilterConfig>) -> bool {
    match filter {
        Some(cfg) => v.norm() <= cfg.t_max,
        None => v.re.is_finite() && v.im.is_finite(),
    }
}

/// Keeps elements with `|U(m)| <= t_max`, in order.
pub fn filter_outliers(seq: &[Complex64], cfg: &FilterConfig) -> Vec<Complex64> {
    seq.iter().copied().filter(|v| keep(v, Some(cfg))).collect()
}

/// `(1/N) sum G^(alpha-beta) conj(G)^beta`.
pub fn estimate_moment(seq: &[Complex64], alpha: u32, beta: u32) -> Result<Complex64> {
    if seq.is_empty() {
        return Err(Error::Empty);
    }
    if beta > alpha {
        return Err(Error::InvalidArgument(alloc::format!(
            "conjugate order {beta} exceeds moment order {alpha}"
        )));
    }
    let sum: Complex64 = seq
        .iter()
        .map(|g| g.powu(alpha - beta) * g.conj().powu(beta))
        .sum();
    Ok(sum / seq.len() as f64)
}

/// The mixed moments the six cumulants are built from.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    /// E[G]
    pub m10: Complex64,
    /// E[G^2]
    pub m20: Complex64,
    /// E[|G|^2]
    pub m21: Complex64,
    /// E[conj(G)^2]
    pub m22: Complex64,
    /// E[G^4]
    pub m40: Complex64,
    /// E[G^3 conj(G)]
    pub m41: Complex64,
    /// E[|G|^4]
    pub m42: Complex64,
}

impl Moments {
    /// Weighted population moments; weights must sum to one.
    pub fn weighted<I>(samples: I) -> Self
    where
        I: IntoIterator<Item = (Complex64, f64)>,
    {
        let mut acc = Moments::default();
        for (g, w) in samples {
            let g2 = g * g;
            let p = g.norm_sqr();
            acc.m10 += g * w;
            acc.m20 += g2 * w;
            acc.m21 += p * w;
            acc.m22 += g2.conj() * w;
            acc.m40 += g2 * g2 * w;
            acc.m41 += g2 * p * w;
            acc.m42 += p * p * w;
        }
        acc
    }

    /// Sample-average moments over a non-empty sequence.
    pub fn sample(seq: &[Complex64]) -> Result<Self> {
        if seq.is_empty() {
            return Err(Error::Empty);
        }
        let w = 1.0 / seq.len() as f64;
        Ok(Self::weighted(seq.iter().map(|&g| (g, w))))
    }

    /// Complex cumulants `[C20, C21, C22, C40, C41, C42]`.
    pub fn cumulants(&self) -> [Complex64; 6] {
        let c20 = self.m20;
        let c21 = self.m21;
        let c22 = self.m22 - c20 * c20 - self.m10 * 2.0;
        let c40 = self.m40 - c20 * c20 * 3.0;
        let c41 = self.m41 - c20 * c21 * 3.0;
        let c42 = self.m42 - c20.norm_sqr() - c21 * c21 * 2.0;
        [c20, c21, c22, c40, c41, c42]
    }
}

fn magnitudes(c: &[Complex64; 6]) -> [f64; 6] {
    c.map(|v| v.norm())
}

/// Complex sample cumulants of a quotient sequence.
pub fn sample_cumulants(seq: &[Complex64]) -> Result<[Complex64; 6]> {
    Ok(Moments::sample(seq)?.cumulants())
}

/// Cumulant magnitudes of a filtered sequence. Sequences shorter than
/// [`MIN_SAMPLES`] still produce values but are flagged inadmissible; an
/// empty sequence yields zeros.
pub fn estimate_sqcs(seq: &[Complex64]) -> SqcVector {
    let values = match sample_cumulants(seq) {
        Ok(c) => magnitudes(&c),
        Err(_) => [0.0; 6],
    };
    SqcVector {
        values,
        sample_count: seq.len(),
    }
}

/// Exact noise-free cumulants: every ordered pair `(a, b)` of alphabet points
/// contributes the quotient `a / b` with weight `1 / M^2`.
pub fn theoretical_cumulants(modulation: Modulation) -> [Complex64; 6] {
    let points = alphabet(modulation).points;
    let w = 1.0 / (points.len() * points.len()) as f64;
    Moments::weighted(
        points
            .iter()
            .flat_map(|&a| points.iter().map(move |&b| (a / b, w))),
    )
    .cumulants()
}

pub fn theoretical_sqcs(modulation: Modulation) -> SqcVector {
    let m = modulation.order();
    SqcVector {
        values: magnitudes(&theoretical_cumulants(modulation)),
        sample_count: m * m,
    }
}

/// Per-frame feature pipeline: FFT each symbol, take its quotient sequence,
/// filter it (or only drop non-finite markers when `filter` is `None`), pool
/// the survivors in symbol order and estimate the cumulants once.
#[derive(Debug, Clone)]
pub struct SqcExtractor {
    ofdm: Ofdm,
    filter: Option<FilterConfig>,
}

impl SqcExtractor {
    pub fn new(params: OfdmParams, filter: Option<FilterConfig>) -> Result<Self> {
        Ok(SqcExtractor {
            ofdm: Ofdm::new(params)?,
            filter,
        })
    }

    pub fn params(&self) -> &OfdmParams {
        self.ofdm.params()
    }

    pub fn filter(&self) -> Option<&FilterConfig> {
        self.filter.as_ref()
    }

    /// Pooled filtered quotient elements of a whole frame.
    pub fn pooled_quotients(&self, frame: &[Complex64]) -> Result<Vec<Complex64>> {
        let params = self.ofdm.params();
        if frame.len() != params.frame_len() {
            return Err(Error::Length {
                expected: params.frame_len(),
                actual: frame.len(),
            });
        }
        let mut pooled = Vec::with_capacity(frame.len());
        for symbol in frame.chunks_exact(params.symbol_len()) {
            let spectrum = self.ofdm.demodulate_symbol(symbol)?;
            pooled.extend(scsd(&spectrum).into_iter().filter(|v| keep(v, self.filter.as_ref())));
        }
        Ok(pooled)
    }

    pub fn extract(&self, frame: &[Complex64]) -> Result<SqcVector> {
        Ok(estimate_sqcs(&self.pooled_quotients(frame)?))
    }
}

pub fn extract_frame_features(
    frame: &[Complex64],
    params: &OfdmParams,
    filter: Option<&FilterConfig>,
) -> Result<SqcVector> {
    SqcExtractor::new(*params, filter.copied())?.extract(frame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn scsd_by_hand() {
        let y = [c(1.0, 0.0), c(2.0, 0.0), c(4.0, 0.0), c(8.0, 0.0)];
        assert_eq!(scsd(&y), vec![c(0.125, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(2.0, 0.0)]);
        assert!(scsd(&[c(3.0, -1.0); 5]).iter().all(|v| *v == c(1.0, 0.0)));
    }

    #[test]
    fn scsd_cancels_scalars() {
        let y: Vec<Complex64> = (1..9).map(|i| c(i as f64, 1.0 / i as f64)).collect();
        let k = c(-0.3, 2.0);
        let scaled: Vec<Complex64> = y.iter().map(|v| v * k).collect();
        for (a, b) in scsd(&y).iter().zip(scsd(&scaled)) {
            assert!((a - b).norm() <= 1e-14 * a.norm());
        }
    }

    #[test]
    fn zero_denominator_is_always_filtered() {
        let u = scsd(&[c(0.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(u[1], ZERO_DENOMINATOR);
        assert_eq!(filter_outliers(&u, &FilterConfig { t_max: 1e300 }).len(), 1);
    }

    #[test]
    fn filter_examples() {
        let s = [c(1.0, 0.0), c(2.0, 0.0), c(100.0, 0.0), c(3.0, 0.0)];
        let f = filter_outliers(&s, &FilterConfig::default());
        assert_eq!(f, vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)]);
        let s = [c(0.0, 1.0), c(-2.0, 0.0)];
        assert_eq!(filter_outliers(&s, &FilterConfig::default()), s.to_vec());
        assert!(FilterConfig::new(0.0).is_err());
    }

    #[test]
    fn moment_examples() {
        let ones = vec![c(1.0, 0.0); 7];
        for (a, b) in [(1, 0), (2, 1), (4, 2), (4, 4)] {
            assert!((estimate_moment(&ones, a, b).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
        }
        let m = estimate_moment(&[c(0.0, 1.0), c(0.0, -1.0)], 2, 0).unwrap();
        assert!((m - c(-1.0, 0.0)).norm() < 1e-15);
        assert_eq!(estimate_moment(&[], 2, 0), Err(Error::Empty));
        assert!(estimate_moment(&ones, 1, 2).is_err());
    }

    #[test]
    fn all_ones_c22() {
        let ones = vec![c(1.0, 0.0); MIN_SAMPLES];
        let cum = sample_cumulants(&ones).unwrap();
        assert!((cum[2] - c(-2.0, 0.0)).norm() < 1e-12);
        let v = estimate_sqcs(&ones);
        assert!((v.c22() - 2.0).abs() < 1e-12);
        assert!(v.is_admissible());
        assert!(!estimate_sqcs(&ones[..10]).is_admissible());
        assert!(!estimate_sqcs(&[]).is_admissible());
    }

    #[test]
    fn oracle_reproduces_reference_rows() {
        for (m, row) in REFERENCE_TABLE {
            let v = theoretical_sqcs(m);
            assert!(v.max_abs_diff(&row) <= 0.02, "{m}: {:?}", v.values);
        }
        let q16 = theoretical_sqcs(Modulation::Qam16);
        assert!((q16.c21() - 17.0 / 9.0).abs() < 1e-12);
        assert!((q16.c42() - 1.876).abs() < 1e-3);
        assert!((theoretical_sqcs(Modulation::Qam8).c22() - 0.1344).abs() < 1e-12);
    }

    #[test]
    fn noise_free_16qam_quotients_stay_below_three() {
        let p = alphabet(Modulation::Qam16).points;
        let max = p
            .iter()
            .flat_map(|a| p.iter().map(move |b| (a / b).norm()))
            .fold(0.0, f64::max);
        assert!((max - 3.0).abs() < 1e-12);
    }
}
