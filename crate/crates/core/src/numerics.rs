//! Radix-2 FFT over 64-bit complex samples.
//!
//! All transform sizes must be powers of two; callers zero-pad with
//! [`next_pow2`]. An [`FftPlan`] caches twiddles and the bit-reversal
//! permutation so the CWT engine can reuse them across scales.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Smallest power of two that is `>= n` (with `next_pow2(0) == 1`).
pub fn next_pow2(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

fn check_len(n: usize) -> Result<()> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::FftLength(n));
    }
    Ok(())
}

/// Precomputed tables for an iterative decimation-in-time FFT of one size.
#[derive(Debug, Clone)]
pub struct FftPlan {
    len: usize,
    // e^{-i 2 pi k / len} for k < len / 2
    twiddles: Vec<Complex64>,
    bitrev: Vec<u32>,
}

impl FftPlan {
    pub fn new(len: usize) -> Result<Self> {
        check_len(len)?;
        let bits = len.trailing_zeros();
        let twiddles = (0..len / 2)
            .map(|k| {
                let theta = -2.0 * PI * k as f64 / len as f64;
                Complex64::new(theta.cos(), theta.sin())
            })
            .collect();
        let bitrev = (0..len as u32)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (32 - bits) })
            .collect();
        Ok(Self {
            len,
            twiddles,
            bitrev,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Unnormalized forward transform, in place.
    pub fn forward(&self, data: &mut [Complex64]) -> Result<()> {
        self.run(data, false)
    }

    /// Inverse transform with `1/N` normalization, in place.
    pub fn inverse(&self, data: &mut [Complex64]) -> Result<()> {
        self.run(data, true)?;
        let scale = 1.0 / self.len as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
        Ok(())
    }

    fn run(&self, data: &mut [Complex64], inverse: bool) -> Result<()> {
        let n = self.len;
        if data.len() != n {
            return Err(Error::Shape(format!(
                "plan for {n} points applied to {} samples",
                data.len()
            )));
        }
        for i in 0..n {
            let j = self.bitrev[i] as usize;
            if j > i {
                data.swap(i, j);
            }
        }
        let mut half = 1;
        while half < n {
            let stride = n / (2 * half);
            for start in (0..n).step_by(2 * half) {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let a = data[start + k];
                    let b = data[start + k + half] * w;
                    data[start + k] = a + b;
                    data[start + k + half] = a - b;
                }
            }
            half *= 2;
        }
        Ok(())
    }
}

/// Forward DFT: `X[m] = sum_n x[n] e^{-i 2 pi m n / N}`.
pub fn fft(x: &[Complex64]) -> Result<Vec<Complex64>> {
    let plan = FftPlan::new(x.len())?;
    let mut out = x.to_vec();
    plan.forward(&mut out)?;
    Ok(out)
}

/// Inverse DFT with `1/N` normalization.
pub fn ifft(x: &[Complex64]) -> Result<Vec<Complex64>> {
    let plan = FftPlan::new(x.len())?;
    let mut out = x.to_vec();
    plan.inverse(&mut out)?;
    Ok(out)
}
