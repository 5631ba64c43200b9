//! Unit-power symbol alphabets for the candidate modulations.
//!
//! Point order is fixed and lexicographic so serialized index streams stay
//! portable:
//!
//! * BPSK: `+1, -1`
//! * QPSK: `(1+j), (1-j), (-1+j), (-1-j)`, scaled by `1/sqrt(2)`
//! * 8PSK: `exp(j*2*pi*k/8)` for `k = 0..8`
//! * 8QAM: rectangular, real part in `-3, -1, 1, 3` (outer), imaginary in
//!   `-1, 1` (inner), scaled by `1/sqrt(6)`
//! * 16QAM: real part in `-3, -1, 1, 3` (outer), imaginary in `-3, -1, 1, 3`
//!   (inner), scaled by `1/sqrt(10)`

use alloc::string::ToString;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Modulation {
    Bpsk,
    Qpsk,
    Psk8,
    Qam8,
    Qam16,
}

impl Modulation {
    pub const ALL: [Modulation; 5] = [
        Modulation::Bpsk,
        Modulation::Qpsk,
        Modulation::Psk8,
        Modulation::Qam8,
        Modulation::Qam16,
    ];

    /// Alphabet size M.
    pub fn order(self) -> usize {
        match self {
            Modulation::Bpsk => 2,
            Modulation::Qpsk => 4,
            Modulation::Psk8 | Modulation::Qam8 => 8,
            Modulation::Qam16 => 16,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Modulation::Bpsk => "BPSK",
            Modulation::Qpsk => "QPSK",
            Modulation::Psk8 => "8PSK",
            Modulation::Qam8 => "8QAM",
            Modulation::Qam16 => "16QAM",
        }
    }

    pub fn alphabet(self) -> Alphabet {
        alphabet(self)
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Modulation::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownModulation(s.to_string()))
    }
}

/// Candidate pool of modulations a classifier distinguishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pool {
    /// BPSK, QPSK, 16QAM.
    Theta1,
    /// All five modulations.
    Theta2,
}

impl Pool {
    pub fn members(self) -> &'static [Modulation] {
        match self {
            Pool::Theta1 => &[Modulation::Bpsk, Modulation::Qpsk, Modulation::Qam16],
            Pool::Theta2 => &Modulation::ALL,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Pool::Theta1 => "theta1",
            Pool::Theta2 => "theta2",
        }
    }
}

impl fmt::Display for Pool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pool {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "theta1" => Ok(Pool::Theta1),
            "theta2" => Ok(Pool::Theta2),
            _ => Err(Error::InvalidArgument(alloc::format!("unknown pool {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alphabet {
    pub modulation: Modulation,
    pub points: Vec<Complex64>,
}

impl Alphabet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mean_power(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.len() as f64
    }
}

fn grid(re: &[f64], im: &[f64], scale: f64) -> Vec<Complex64> {
    re.iter()
        .flat_map(|&r| im.iter().map(move |&i| Complex64::new(r * scale, i * scale)))
        .collect()
}

pub fn alphabet(modulation: Modulation) -> Alphabet {
    let points = match modulation {
        Modulation::Bpsk => alloc::vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)],
        Modulation::Qpsk => grid(&[1.0, -1.0], &[1.0, -1.0], libm::sqrt(0.5)),
        Modulation::Psk8 => (0..8)
            .map(|k| Complex64::from_polar(1.0, core::f64::consts::PI * k as f64 / 4.0))
            .collect(),
        Modulation::Qam8 => grid(&[-3.0, -1.0, 1.0, 3.0], &[-1.0, 1.0], 1.0 / libm::sqrt(6.0)),
        Modulation::Qam16 => grid(
            &[-3.0, -1.0, 1.0, 3.0],
            &[-3.0, -1.0, 1.0, 3.0],
            1.0 / libm::sqrt(10.0),
        ),
    };
    Alphabet { modulation, points }
}

pub fn map_symbols(modulation: Modulation, indices: &[usize]) -> Result<Vec<Complex64>> {
    let alphabet = alphabet(modulation);
    indices
        .iter()
        .map(|&index| {
            alphabet.points.get(index).copied().ok_or(Error::SymbolIndex {
                index,
                modulation: modulation.name(),
                order: alphabet.len(),
            })
        })
        .collect()
}

/// Draws `count` equiprobable symbol indices from an existing generator.
pub fn draw_symbol_indices<R: Rng + ?Sized>(
    modulation: Modulation,
    count: usize,
    rng: &mut R,
) -> Vec<usize> {
    let order = modulation.order();
    (0..count).map(|_| rng.random_range(0..order)).collect()
}

/// Seeded variant of [`draw_symbol_indices`]; `count == 0` is rejected.
pub fn random_symbol_indices(modulation: Modulation, count: usize, seed: u64) -> Result<Vec<usize>> {
    if count == 0 {
        return Err(Error::InvalidArgument("symbol count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(draw_symbol_indices(modulation, count, &mut rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn alphabets_are_unit_power_zero_mean() {
        for m in Modulation::ALL {
            let a = alphabet(m);
            assert_eq!(a.len(), m.order());
            assert!(close(a.mean_power(), 1.0, 1e-12), "{m}");
            let mean: Complex64 = a.points.iter().sum::<Complex64>() / a.len() as f64;
            assert!(mean.norm() < 1e-12, "{m}");
            assert!(a.points.iter().all(|p| p.norm() > 0.0));
        }
    }

    #[test]
    fn second_moment_without_conjugate() {
        let expected = [1.0, 0.0, 0.0, 2.0 / 3.0, 0.0];
        for (m, e) in Modulation::ALL.into_iter().zip(expected) {
            let a = alphabet(m);
            let m20: Complex64 = a.points.iter().map(|p| p * p).sum::<Complex64>() / a.len() as f64;
            assert!(close(m20.norm(), e, 1e-12), "{m}: {}", m20.norm());
        }
    }

    #[test]
    fn qam8_power_times_inverse_power() {
        let a = alphabet(Modulation::Qam8);
        let p: f64 = a.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / 8.0;
        let inv: f64 = a.points.iter().map(|p| 1.0 / p.norm_sqr()).sum::<f64>() / 8.0;
        assert!(close(p * inv, 1.8, 1e-12));
    }

    #[test]
    fn bpsk_and_qpsk_canonical_points() {
        let b = map_symbols(Modulation::Bpsk, &[0, 0, 1]).unwrap();
        assert_eq!(
            b,
            [Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)]
        );
        let q = map_symbols(Modulation::Qpsk, &[0, 1, 2, 3]).unwrap();
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let expected = [(s, s), (s, -s), (-s, s), (-s, -s)];
        for (p, (re, im)) in q.iter().zip(expected) {
            assert!(close(p.re, re, 1e-15) && close(p.im, im, 1e-15));
        }
    }

    #[test]
    fn map_rejects_out_of_range() {
        let err = map_symbols(Modulation::Qpsk, &[0, 4]).unwrap_err();
        assert!(matches!(err, Error::SymbolIndex { index: 4, order: 4, .. }));
    }

    #[test]
    fn mapping_is_bijective() {
        for m in Modulation::ALL {
            let idx: Vec<usize> = (0..m.order()).collect();
            let pts = map_symbols(m, &idx).unwrap();
            for i in 0..pts.len() {
                for j in i + 1..pts.len() {
                    assert!((pts[i] - pts[j]).norm() > 1e-6);
                }
            }
        }
    }

    #[test]
    fn random_indices_deterministic_and_uniform() {
        let a = random_symbol_indices(Modulation::Bpsk, 4, 7).unwrap();
        let b = random_symbol_indices(Modulation::Bpsk, 4, 7).unwrap();
        assert_eq!(a, b);
        assert!(random_symbol_indices(Modulation::Psk8, 0, 1).is_err());

        let n = 1_000_000;
        let idx = random_symbol_indices(Modulation::Qpsk, n, 99).unwrap();
        let mut counts = [0usize; 4];
        for i in idx {
            counts[i] += 1;
        }
        for c in counts {
            assert!(close(c as f64 / n as f64, 0.25, 0.005));
        }
    }

    #[test]
    fn qam16_sample_power() {
        let n = 1_000_000;
        let idx = random_symbol_indices(Modulation::Qam16, n, 3).unwrap();
        let pts = map_symbols(Modulation::Qam16, &idx).unwrap();
        let p = pts.iter().map(|p| p.norm_sqr()).sum::<f64>() / n as f64;
        assert!(close(p, 1.0, 0.01));
    }

    #[test]
    fn names_round_trip() {
        for m in Modulation::ALL {
            assert_eq!(m.name().parse::<Modulation>().unwrap(), m);
        }
        assert!("64QAM".parse::<Modulation>().is_err());
    }
}
