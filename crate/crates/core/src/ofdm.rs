//! OFDM symbol synthesis (IFFT + cyclic prefix) and recovery (CP strip + FFT).
//!
//! Every subcarrier carries data; there are no pilots or guard bins.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::fft::Dft;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OfdmParams {
    pub n_subcarriers: usize,
    pub cp_len: usize,
    pub symbols_per_frame: usize,
}

impl Default for OfdmParams {
    fn default() -> Self {
        OfdmParams {
            n_subcarriers: 256,
            cp_len: 64,
            symbols_per_frame: 80,
        }
    }
}

impl OfdmParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_subcarriers < 2 {
            return Err(Error::OfdmParams(format!(
                "n_subcarriers must be >= 2, got {}",
                self.n_subcarriers
            )));
        }
        if self.cp_len >= self.n_subcarriers {
            return Err(Error::OfdmParams(format!(
                "cp_len {} must be below n_subcarriers {}",
                self.cp_len, self.n_subcarriers
            )));
        }
        if self.symbols_per_frame == 0 {
            return Err(Error::OfdmParams("symbols_per_frame must be >= 1".into()));
        }
        Ok(())
    }

    /// Samples per OFDM symbol including the cyclic prefix.
    pub fn symbol_len(&self) -> usize {
        self.n_subcarriers + self.cp_len
    }

    pub fn frame_len(&self) -> usize {
        self.symbol_len() * self.symbols_per_frame
    }

    /// Mean power of one time-domain sample for unit-power subcarrier symbols.
    pub fn sample_power(&self) -> f64 {
        1.0 / self.n_subcarriers as f64
    }
}

/// Reusable transform state for one set of OFDM parameters.
#[derive(Debug, Clone)]
pub struct Ofdm {
    params: OfdmParams,
    dft: Dft,
}

impl Ofdm {
    pub fn new(params: OfdmParams) -> Result<Self> {
        params.validate()?;
        Ok(Ofdm {
            params,
            dft: Dft::new(params.n_subcarriers),
        })
    }

    pub fn params(&self) -> &OfdmParams {
        &self.params
    }

    /// Synthesizes one CP-prefixed time-domain symbol and appends it to `out`.
    pub fn modulate_symbol(&self, freq: &[Complex64], out: &mut Vec<Complex64>) -> Result<()> {
        let n = self.params.n_subcarriers;
        if freq.len() != n {
            return Err(Error::Length {
                expected: n,
                actual: freq.len(),
            });
        }
        let mut time = freq.to_vec();
        self.dft.inverse(&mut time);
        out.extend_from_slice(&time[n - self.params.cp_len..]);
        out.extend_from_slice(&time);
        Ok(())
    }

    /// Concatenates the symbols in order. Any number of symbols is accepted;
    /// a full frame has `symbols_per_frame` of them.
    pub fn modulate<S: AsRef<[Complex64]>>(&self, symbols: &[S]) -> Result<Vec<Complex64>> {
        let mut out = Vec::with_capacity(symbols.len() * self.params.symbol_len());
        for s in symbols {
            self.modulate_symbol(s.as_ref(), &mut out)?;
        }
        Ok(out)
    }

    /// Recovers one spectrum from a CP-prefixed time-domain symbol.
    pub fn demodulate_symbol(&self, time: &[Complex64]) -> Result<Vec<Complex64>> {
        if time.len() != self.params.symbol_len() {
            return Err(Error::Length {
                expected: self.params.symbol_len(),
                actual: time.len(),
            });
        }
        let mut freq = time[self.params.cp_len..].to_vec();
        self.dft.forward(&mut freq);
        Ok(freq)
    }

    pub fn demodulate(&self, time: &[Complex64]) -> Result<Vec<Vec<Complex64>>> {
        let len = self.params.symbol_len();
        if time.len() % len != 0 {
            return Err(Error::Length {
                expected: (time.len() / len + 1) * len,
                actual: time.len(),
            });
        }
        time.chunks_exact(len).map(|s| self.demodulate_symbol(s)).collect()
    }
}

pub fn ofdm_modulate<S: AsRef<[Complex64]>>(
    symbols: &[S],
    params: &OfdmParams,
) -> Result<Vec<Complex64>> {
    Ofdm::new(*params)?.modulate(symbols)
}

pub fn ofdm_demodulate(time: &[Complex64], params: &OfdmParams) -> Result<Vec<Vec<Complex64>>> {
    Ofdm::new(*params)?.demodulate(time)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn small() -> OfdmParams {
        OfdmParams {
            n_subcarriers: 16,
            cp_len: 4,
            symbols_per_frame: 2,
        }
    }

    #[test]
    fn dc_only_gives_flat_time_signal() {
        let p = small();
        let mut x = vec![Complex64::new(0.0, 0.0); 16];
        x[0] = Complex64::new(16.0, 0.0);
        let t = ofdm_modulate(&[x], &p).unwrap();
        assert_eq!(t.len(), 20);
        assert!(t.iter().all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn zeros_stay_zero() {
        let p = small();
        let t = ofdm_modulate(&[vec![Complex64::new(0.0, 0.0); 16]], &p).unwrap();
        assert!(t.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn constant_without_cp_demodulates_to_impulse() {
        let p = OfdmParams {
            n_subcarriers: 8,
            cp_len: 0,
            symbols_per_frame: 1,
        };
        let y = ofdm_demodulate(&vec![Complex64::new(1.0, 0.0); 8], &p).unwrap();
        assert!((y[0][0] - Complex64::new(8.0, 0.0)).norm() < 1e-12);
        assert!(y[0][1..].iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn cyclic_prefix_copies_tail() {
        let p = small();
        let x: Vec<Complex64> = (0..16).map(|i| Complex64::new(i as f64, -(i as f64))).collect();
        let t = ofdm_modulate(&[x], &p).unwrap();
        assert_eq!(&t[..4], &t[16..20]);
    }

    #[test]
    fn rejects_bad_lengths_and_params() {
        let p = small();
        assert!(ofdm_modulate(&[vec![Complex64::new(0.0, 0.0); 15]], &p).is_err());
        assert!(ofdm_demodulate(&vec![Complex64::new(0.0, 0.0); 21], &p).is_err());
        let bad = OfdmParams {
            cp_len: 16,
            ..p
        };
        assert!(bad.validate().is_err());
        assert!(OfdmParams { n_subcarriers: 1, cp_len: 0, symbols_per_frame: 1 }.validate().is_err());
        assert!(OfdmParams { symbols_per_frame: 0, ..p }.validate().is_err());
    }

    #[test]
    fn one_sample_cyclic_delay_keeps_magnitudes() {
        let p = small();
        let x: Vec<Complex64> = (0..16).map(|i| Complex64::from_polar(1.0 + i as f64, i as f64)).collect();
        let t = ofdm_modulate(&[x.clone()], &p).unwrap();
        // Delay by one sample; the CP absorbs the shift so the FFT window sees
        // a cyclic rotation.
        let mut delayed = vec![t[t.len() - 1]];
        delayed.extend_from_slice(&t[..t.len() - 1]);
        let y = ofdm_demodulate(&delayed, &p).unwrap();
        for (a, b) in y[0].iter().zip(&x) {
            assert!((a.norm() - b.norm()).abs() < 1e-9);
        }
    }
}
