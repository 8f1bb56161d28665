//! Wavelet synchrosqueezing: instantaneous-frequency estimates from the CWT
//! phase, and reassignment of `|W|^2` onto a log-spaced frequency axis.

use std::f64::consts::PI;

use crate::cwt::Scalogram;
use crate::error::{Error, Result};
use crate::matrix::RealMatrix;

/// Reassigned energy over `(frequency bin x time)`, lowest frequency first.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncroTfr {
    pub energy: RealMatrix,
    /// Geometric bin centers, ascending.
    pub bin_freqs_hz: Vec<f64>,
    /// `n_bins + 1` ascending edges.
    pub bin_edges_hz: Vec<f64>,
    pub sample_rate_hz: f64,
    /// Valid energy whose frequency estimate fell outside the bin range.
    pub dropped_energy: f64,
}

/// Instantaneous frequency in Hz for every coefficient; `NaN` marks entries
/// with `|W| < epsilon * max|W|`.
///
/// `Im(d_b W / W)` is the time derivative of the phase; it is taken as the
/// central difference of the phase, `arg(W[b+1] conj(W[b-1])) / 2`, which is
/// exact for a stationary tone (one-sided at the first and last column).
pub fn phase_transform(s: &Scalogram, epsilon: f64) -> RealMatrix {
    let n = s.n_times;
    let max = s.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
    let threshold = epsilon * max;
    let to_hz = s.sample_rate_hz / (2.0 * PI);
    let mut out = RealMatrix::from_fn(s.n_scales, n, |_, _| f64::NAN);
    if max == 0.0 || n < 2 {
        return out;
    }
    for k in 0..s.n_scales {
        let row = s.row(k);
        let dst = out.row_mut(k);
        for b in 0..n {
            if row[b].norm() < threshold {
                continue;
            }
            let (lo, hi, span) = if b == 0 {
                (0, 1, 1.0)
            } else if b == n - 1 {
                (n - 2, n - 1, 1.0)
            } else {
                (b - 1, b + 1, 2.0)
            };
            let dphi = (row[hi] * row[lo].conj()).arg() / span;
            dst[b] = dphi * to_hz;
        }
    }
    out
}

/// Log-spaced edges covering the scalogram's center-frequency span.
pub fn log_bin_edges(s: &Scalogram, n_bins: usize) -> Vec<f64> {
    let lo = s.center_freqs_hz.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = s.center_freqs_hz.iter().copied().fold(0.0, f64::max);
    let ratio = hi / lo;
    (0..=n_bins)
        .map(|i| lo * ratio.powf(i as f64 / n_bins as f64))
        .collect()
}

pub fn synchrosqueeze(s: &Scalogram, n_bins: usize, epsilon: f64) -> Result<SyncroTfr> {
    if n_bins < 8 {
        return Err(Error::invalid(format!("n_bins must be >= 8, got {n_bins}")));
    }
    if s.n_scales < 2 {
        return Err(Error::invalid("synchrosqueezing needs at least two scales"));
    }
    let freqs = phase_transform(s, epsilon);
    let edges = log_bin_edges(s, n_bins);
    let lo = edges[0];
    let hi = edges[n_bins];
    let log_span = (hi / lo).ln();
    let cell = std::f64::consts::LN_2 / s.voices_per_octave as f64;

    let mut energy = RealMatrix::zeros(n_bins, s.n_times);
    let mut dropped = 0.0;
    for b in 0..s.n_times {
        for k in 0..s.n_scales {
            let f = freqs.get(k, b);
            if f.is_nan() {
                continue;
            }
            let e = s.get(k, b).norm_sqr() * cell;
            if !(lo..=hi).contains(&f) {
                dropped += e;
                continue;
            }
            let bin = ((n_bins as f64 * (f / lo).ln() / log_span) as usize).min(n_bins - 1);
            let cur = energy.get(bin, b);
            energy.set(bin, b, cur + e);
        }
    }
    let bin_freqs_hz = edges.windows(2).map(|w| (w[0] * w[1]).sqrt()).collect();
    Ok(SyncroTfr {
        energy,
        bin_freqs_hz,
        bin_edges_hz: edges,
        sample_rate_hz: s.sample_rate_hz,
        dropped_energy: dropped,
    })
}

/// Order-3 Rényi entropy in bits of the normalized matrix.
pub fn concentration_entropy(m: &RealMatrix) -> Result<f64> {
    let total = m.sum();
    if !(total > 0.0) {
        return Err(Error::EmptyContent);
    }
    if m.as_slice().iter().any(|&v| v < 0.0) {
        return Err(Error::invalid("entropy needs a nonnegative matrix"));
    }
    let cubes: f64 = m.as_slice().iter().map(|&v| (v / total).powi(3)).sum();
    Ok(cubes.log2() / (1.0 - 3.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_reference_values() {
        let mut one_hot = RealMatrix::zeros(3, 3);
        one_hot.set(1, 2, 7.0);
        assert!(concentration_entropy(&one_hot).unwrap().abs() < 1e-15);
        let uniform = RealMatrix::from_fn(4, 4, |_, _| 0.25);
        assert!((concentration_entropy(&uniform).unwrap() - 4.0).abs() < 1e-12);
        assert!(concentration_entropy(&RealMatrix::zeros(2, 2)).is_err());
    }
}
