//! Radix-2 complex FFT and square 2D transforms for FFT-based correlation.
//!
//! Forward 2D transforms leave the spectrum transposed; the matching inverse
//! undoes that, so pointwise spectral products never need the extra
//! transposes.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::{Add, Mul, Sub};

use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub(crate) struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub const ZERO: Complex = Complex { re: 0.0, im: 0.0 };

    #[inline]
    pub fn new(re: f64, im: f64) -> Self {
        Complex { re, im }
    }

    #[inline]
    pub fn conj(self) -> Self {
        Complex::new(self.re, -self.im)
    }
}

impl Add for Complex {
    type Output = Complex;
    #[inline]
    fn add(self, o: Complex) -> Complex {
        Complex::new(self.re + o.re, self.im + o.im)
    }
}

impl Sub for Complex {
    type Output = Complex;
    #[inline]
    fn sub(self, o: Complex) -> Complex {
        Complex::new(self.re - o.re, self.im - o.im)
    }
}

impl Mul for Complex {
    type Output = Complex;
    #[inline]
    fn mul(self, o: Complex) -> Complex {
        Complex::new(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
    }
}

/// Precomputed tables for transforms of one power-of-two length.
pub(crate) struct Fft {
    n: usize,
    twiddles: Vec<Complex>,
    bitrev: Vec<u32>,
}

impl Fft {
    pub fn new(n: usize) -> Self {
        assert!(n.is_power_of_two(), "FFT length must be a power of two");
        let twiddles = (0..n / 2)
            .map(|k| {
                let (s, c) = libm::sincos(-2.0 * PI * k as f64 / n as f64);
                Complex::new(c, s)
            })
            .collect();
        let bits = n.trailing_zeros();
        let bitrev = (0..n as u32)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (32 - bits) })
            .collect();
        Fft { n, twiddles, bitrev }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    /// In-place unnormalised transform; `inverse` uses conjugate twiddles.
    pub fn transform(&self, buf: &mut [Complex], inverse: bool) {
        let n = self.n;
        debug_assert_eq!(buf.len(), n);
        for i in 0..n {
            let j = self.bitrev[i] as usize;
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let step = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let mut w = self.twiddles[k * step];
                    if inverse {
                        w = w.conj();
                    }
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
    }
}

fn transpose_square(data: &mut [Complex], n: usize) {
    const BLOCK: usize = 32;
    for bi in (0..n).step_by(BLOCK) {
        for bj in (bi..n).step_by(BLOCK) {
            for i in bi..(bi + BLOCK).min(n) {
                let jstart = if bi == bj { i + 1 } else { bj };
                for j in jstart..(bj + BLOCK).min(n) {
                    data.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}

/// Square `n × n` 2D transforms.
pub(crate) struct Fft2 {
    fft: Fft,
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        Fft2 { fft: Fft::new(n) }
    }

    pub fn size(&self) -> usize {
        self.fft.len()
    }

    /// Spectrum in transposed layout.
    pub fn forward(&self, data: &mut [Complex]) {
        let n = self.fft.len();
        par::for_each_chunk(data, n, |_, row| self.fft.transform(row, false));
        transpose_square(data, n);
        par::for_each_chunk(data, n, |_, row| self.fft.transform(row, false));
    }

    /// Inverse of [`Fft2::forward`], including the `1/n²` normalisation.
    pub fn inverse(&self, data: &mut [Complex]) {
        let n = self.fft.len();
        par::for_each_chunk(data, n, |_, row| self.fft.transform(row, true));
        transpose_square(data, n);
        let scale = 1.0 / (n * n) as f64;
        par::for_each_chunk(data, n, |_, row| {
            self.fft.transform(row, true);
            for v in row.iter_mut() {
                v.re *= scale;
                v.im *= scale;
            }
        });
    }

    /// Zero-padded copy of a `rows × cols` real image (row-major).
    #[cfg(test)]
    pub fn embed_real(&self, img: &[f64], rows: usize, cols: usize) -> Vec<Complex> {
        let n = self.size();
        let mut out = vec![Complex::ZERO; n * n];
        for r in 0..rows {
            for c in 0..cols {
                out[r * n + c].re = img[r * cols + c];
            }
        }
        out
    }

    /// Packs two real images into one complex buffer (`a + i·b`).
    pub fn embed_pair(&self, a: &[f64], b: Option<&[f64]>, rows: usize, cols: usize) -> Vec<Complex> {
        let n = self.size();
        let mut out = vec![Complex::ZERO; n * n];
        for r in 0..rows {
            for c in 0..cols {
                let i = r * cols + c;
                out[r * n + c] = Complex::new(a[i], b.map_or(0.0, |b| b[i]));
            }
        }
        out
    }
}

/// Splits the spectrum `Z` of `a + i·b` into the spectra of `a` and `b`.
/// Works in either layout since `(-k1, -k2)` is symmetric under transposing.
pub(crate) fn split_pair(z: &[Complex], n: usize) -> (Vec<Complex>, Vec<Complex>) {
    let mut fa = vec![Complex::ZERO; n * n];
    let mut fb = vec![Complex::ZERO; n * n];
    for i in 0..n {
        let ni = (n - i) % n;
        for j in 0..n {
            let nj = (n - j) % n;
            let zk = z[i * n + j];
            let zm = z[ni * n + nj].conj();
            fa[i * n + j] = Complex::new(0.5 * (zk.re + zm.re), 0.5 * (zk.im + zm.im));
            // (zk - zm) / 2i
            let d = zk - zm;
            fb[i * n + j] = Complex::new(0.5 * d.im, -0.5 * d.re);
        }
    }
    (fa, fb)
}
