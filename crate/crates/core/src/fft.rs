//! Discrete Fourier transforms with the conventions used throughout the
//! crate: the forward transform is unnormalized and the inverse carries the
//! `1/N` factor.
//!
//! Power-of-two lengths use an iterative radix-2 transform; other lengths
//! fall back to a direct O(N^2) sum.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    Forward,
    Inverse,
}

/// Precomputed transform of a fixed length.
#[derive(Debug, Clone)]
pub struct Dft {
    len: usize,
    // e^{-j 2 pi k / N} for k in 0..N
    twiddles: Vec<Complex64>,
}

impl Dft {
    pub fn new(len: usize) -> Self {
        let twiddles = (0..len)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / len as f64))
            .collect();
        Dft { len, twiddles }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `Y(m) = sum_n y(n) e^{-j 2 pi n m / N}`, in place.
    pub fn forward(&self, buf: &mut [Complex64]) {
        self.transform(buf, Direction::Forward);
    }

    /// `x(n) = (1/N) sum_m X(m) e^{j 2 pi m n / N}`, in place.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.transform(buf, Direction::Inverse);
        let scale = 1.0 / self.len as f64;
        buf.iter_mut().for_each(|v| *v *= scale);
    }

    fn twiddle(&self, k: usize, dir: Direction) -> Complex64 {
        let w = self.twiddles[k % self.len];
        match dir {
            Direction::Forward => w,
            Direction::Inverse => w.conj(),
        }
    }

    fn transform(&self, buf: &mut [Complex64], dir: Direction) {
        assert_eq!(buf.len(), self.len, "buffer length must match transform length");
        if self.len <= 1 {
            return;
        }
        if self.len.is_power_of_two() {
            self.radix2(buf, dir);
        } else {
            self.direct(buf, dir);
        }
    }

    fn direct(&self, buf: &mut [Complex64], dir: Direction) {
        let input = buf.to_vec();
        for (m, out) in buf.iter_mut().enumerate() {
            *out = input
                .iter()
                .enumerate()
                .map(|(n, &v)| v * self.twiddle(n * m % self.len, dir))
                .sum();
        }
    }

    fn radix2(&self, buf: &mut [Complex64], dir: Direction) {
        let n = self.len;
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if j > i {
                buf.swap(i, j);
            }
        }
        let mut size = 2;
        while size <= n {
            let half = size / 2;
            let stride = n / size;
            for start in (0..n).step_by(size) {
                for k in 0..half {
                    let w = self.twiddle(k * stride, dir);
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            size *= 2;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn naive(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|m| {
                x.iter()
                    .enumerate()
                    .map(|(k, &v)| v * Complex64::from_polar(1.0, -2.0 * PI * (k * m) as f64 / n as f64))
                    .sum()
            })
            .collect()
    }

    fn ramp(n: usize) -> Vec<Complex64> {
        (0..n).map(|i| Complex64::new(i as f64 * 0.37 - 1.0, (i * i % 7) as f64)).collect()
    }

    #[test]
    fn radix2_matches_naive() {
        for n in [2, 4, 8, 64, 256] {
            let x = ramp(n);
            let mut y = x.clone();
            Dft::new(n).forward(&mut y);
            for (a, b) in y.iter().zip(naive(&x)) {
                assert!((a - b).norm() < 1e-9 * n as f64);
            }
        }
    }

    #[test]
    fn non_power_of_two_round_trip() {
        for n in [3, 5, 12] {
            let x = ramp(n);
            let dft = Dft::new(n);
            let mut y = x.clone();
            dft.forward(&mut y);
            for (a, b) in y.iter().zip(naive(&x)) {
                assert!((a - b).norm() < 1e-9);
            }
            dft.inverse(&mut y);
            for (a, b) in y.iter().zip(&x) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_transforms_to_impulse() {
        let mut y = vec![Complex64::new(1.0, 0.0); 16];
        Dft::new(16).forward(&mut y);
        assert!((y[0] - Complex64::new(16.0, 0.0)).norm() < 1e-12);
        assert!(y[1..].iter().all(|v| v.norm() < 1e-12));
    }
}
