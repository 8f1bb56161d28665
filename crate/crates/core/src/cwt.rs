//! Continuous wavelet transform by frequency-domain products, with a
//! direct time-domain quadrature used as an independent check.
//!
//! Convention shared by both routes: `W(a, b) = sum_n x[n] conj(psi_a(n - b))`
//! where `psi_a` has spectrum `psi_hat(a * omega)` on `0 < omega < pi` and no
//! `a^(-1/2)` prefactor, so a unit-amplitude tone produces a ridge of
//! magnitude 1 at every frequency.

use std::f64::consts::PI;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::RealMatrix;
use crate::numerics::{next_pow2, FftPlan};
use crate::signal::SignalRecord;
use crate::wavelet::{ScaleGrid, WaveletSpec};

/// Complex CWT coefficients, one row per scale (smallest scale first).
#[derive(Debug, Clone, PartialEq)]
pub struct Scalogram {
    coeffs: Vec<Complex64>,
    pub n_scales: usize,
    pub n_times: usize,
    pub scales: Vec<f64>,
    pub center_freqs_hz: Vec<f64>,
    pub voices_per_octave: u32,
    pub times_s: Vec<f64>,
    pub sample_rate_hz: f64,
    pub wavelet: WaveletSpec,
}

impl Scalogram {
    pub fn get(&self, scale: usize, time: usize) -> Complex64 {
        self.coeffs[scale * self.n_times + time]
    }

    pub fn row(&self, scale: usize) -> &[Complex64] {
        &self.coeffs[scale * self.n_times..(scale + 1) * self.n_times]
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Index of the row with the largest `|W|` in column `time`.
    pub fn ridge_row(&self, time: usize) -> usize {
        (0..self.n_scales)
            .max_by(|&a, &b| {
                self.get(a, time)
                    .norm()
                    .total_cmp(&self.get(b, time).norm())
            })
            .unwrap_or(0)
    }
}

/// Zero-padded spectrum of one record, reusable across wavelets.
#[derive(Debug, Clone)]
pub struct SignalSpectrum {
    samples: Vec<f64>,
    base: PaddedSpectrum,
    sample_rate_hz: f64,
}

#[derive(Debug, Clone)]
struct PaddedSpectrum {
    bins: Vec<Complex64>,
    plan: FftPlan,
}

impl PaddedSpectrum {
    fn new(samples: &[f64], len: usize) -> Result<Self> {
        let plan = FftPlan::new(len)?;
        let mut bins = vec![Complex64::new(0.0, 0.0); len];
        for (b, &x) in bins.iter_mut().zip(samples) {
            b.re = x;
        }
        plan.forward(&mut bins)?;
        Ok(Self { bins, plan })
    }

    fn row(&self, spec: &WaveletSpec, a: f64, n: usize) -> Result<Vec<Complex64>> {
        let m = self.bins.len();
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        // negative-frequency bins (k >= m/2) stay zero
        for k in 1..m / 2 {
            let omega = 2.0 * PI * k as f64 / m as f64;
            let h = spec.psi_hat(a * omega);
            if h != 0.0 {
                buf[k] = self.bins[k] * h;
            }
        }
        self.plan.inverse(&mut buf)?;
        buf.truncate(n);
        Ok(buf)
    }
}

impl SignalSpectrum {
    /// Transforms the record zero-padded to `next_pow2(2 N)`. Scales whose
    /// wavelet outlasts that padding get a longer transform of their own.
    pub fn new(samples: &[f64], sample_rate_hz: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("cannot transform an empty record"));
        }
        Ok(Self {
            base: PaddedSpectrum::new(samples, next_pow2(2 * samples.len()))?,
            samples: samples.to_vec(),
            sample_rate_hz,
        })
    }

    pub fn padded_len(&self) -> usize {
        self.base.bins.len()
    }

    /// Transform length used for scale `a`: circular wrap-around must not
    /// reach lags inside `(-N, N)` before the wavelet has decayed.
    pub fn padded_len_for(&self, spec: &WaveletSpec, a: f64) -> usize {
        let tail = (spec.decay_span() * a).ceil() as usize;
        next_pow2(self.samples.len() + tail).max(self.padded_len())
    }

    pub fn transform(&self, spec: &WaveletSpec, grid: &ScaleGrid) -> Result<Scalogram> {
        spec.validate()?;
        let n = self.samples.len();
        if grid.n_samples != n {
            return Err(Error::Shape(format!(
                "scale grid built for {} samples, record has {n}",
                grid.n_samples
            )));
        }
        if grid.sample_rate_hz != self.sample_rate_hz {
            return Err(Error::Shape(format!(
                "scale grid built for {} Hz, record sampled at {} Hz",
                grid.sample_rate_hz, self.sample_rate_hz
            )));
        }
        let lens: Vec<usize> = grid.scales.iter().map(|&a| self.padded_len_for(spec, a)).collect();
        let mut extra: Vec<usize> = lens.iter().copied().filter(|&m| m != self.padded_len()).collect();
        extra.sort_unstable();
        extra.dedup();
        let longer: Vec<PaddedSpectrum> = extra
            .par_iter()
            .map(|&m| PaddedSpectrum::new(&self.samples, m))
            .collect::<Result<_>>()?;
        let rows: Vec<Vec<Complex64>> = grid
            .scales
            .par_iter()
            .zip(&lens)
            .map(|(&a, &m)| {
                let spectrum = match extra.binary_search(&m) {
                    Ok(i) => &longer[i],
                    Err(_) => &self.base,
                };
                spectrum.row(spec, a, n)
            })
            .collect::<Result<_>>()?;
        let coeffs = rows.into_iter().flatten().collect();
        Ok(Scalogram {
            coeffs,
            n_scales: grid.len(),
            n_times: n,
            scales: grid.scales.clone(),
            center_freqs_hz: grid.center_freqs_hz.clone(),
            voices_per_octave: grid.voices_per_octave,
            times_s: (0..n).map(|i| i as f64 / self.sample_rate_hz).collect(),
            sample_rate_hz: self.sample_rate_hz,
            wavelet: *spec,
        })
    }
}

pub fn cwt(record: &SignalRecord, spec: &WaveletSpec, grid: &ScaleGrid) -> Result<Scalogram> {
    SignalSpectrum::new(&record.samples, record.sample_rate_hz)?.transform(spec, grid)
}

/// Records longer than this are refused by [`cwt_direct`].
pub const DIRECT_MAX_LEN: usize = 4096;

/// Frequency-grid intervals on `[0, pi]` used to synthesize the time-domain
/// wavelet. The quadrature is periodic in time with period `2 * this`.
pub const DIRECT_FREQ_INTERVALS: usize = 1 << 16;

/// Time-domain `psi_a(t)` for integer offsets `t` in `[-(half_span), half_span]`,
/// by trapezoidal quadrature of `(1/2pi) int_0^pi psi_hat(a w) e^{i w t} dw`.
pub fn wavelet_time(spec: &WaveletSpec, scale: f64, half_span: usize) -> Vec<Complex64> {
    let l = DIRECT_FREQ_INTERVALS;
    let dw = PI / l as f64;
    let len = 2 * half_span + 1;
    let mut out = vec![Complex64::new(0.0, 0.0); len];
    let start = -(half_span as f64);
    for k in 0..=l {
        let w = k as f64 * dw;
        let weight = if k == 0 || k == l { 0.5 } else { 1.0 };
        let h = spec.psi_hat(scale * w);
        if h == 0.0 {
            continue;
        }
        let c = weight * h * dw / (2.0 * PI);
        let mut z = Complex64::from_polar(1.0, w * start);
        let step = Complex64::from_polar(1.0, w);
        for v in out.iter_mut() {
            *v += z * c;
            z *= step;
        }
    }
    out
}

/// Direct quadrature of the CWT integral at selected scales and positions.
/// Returns a `scales.len() x positions.len()` matrix (row-major).
pub fn cwt_direct(
    record: &SignalRecord,
    spec: &WaveletSpec,
    scales: &[f64],
    positions: &[usize],
) -> Result<Vec<Vec<Complex64>>> {
    spec.validate()?;
    let n = record.samples.len();
    if n > DIRECT_MAX_LEN {
        return Err(Error::invalid(format!(
            "direct quadrature limited to {DIRECT_MAX_LEN} samples, got {n}"
        )));
    }
    if n == 0 {
        return Err(Error::invalid("cannot transform an empty record"));
    }
    if let Some(&p) = positions.iter().find(|&&p| p >= n) {
        return Err(Error::invalid(format!("position {p} outside record of {n}")));
    }
    let half = n - 1;
    let x = &record.samples;
    scales
        .iter()
        .map(|&a| {
            let psi = wavelet_time(spec, a, half);
            let out = positions
                .iter()
                .map(|&b| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (i, &xi) in x.iter().enumerate() {
                        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                        // psi(i - b) sits at index (i - b) + half
                        let t = (i + half) - b;
                        acc += psi[t].conj() * (w * xi);
                    }
                    acc
                })
                .collect();
            Ok(out)
        })
        .collect()
}

/// Entrywise `|W|`, same shape as the scalogram.
pub fn magnitude(s: &Scalogram) -> RealMatrix {
    let data = s.coeffs.iter().map(|c| c.norm()).collect();
    RealMatrix::from_vec(s.n_scales, s.n_times, data).expect("shape matches by construction")
}

const SCALOGRAM_MAGIC: &[u8; 4] = b"WDSC";

/// Binary dump: `WDSC`, u32 rows, u32 cols, f64 sample rate, then row-major
/// `(re, im)` f64 pairs. Little-endian throughout.
pub fn write_scalogram(s: &Scalogram, path: &Path) -> Result<()> {
    let file = fs::File::create(path)
        .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    let mut w = BufWriter::new(file);
    let mut write = |bytes: &[u8]| {
        w.write_all(bytes)
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))
    };
    write(SCALOGRAM_MAGIC)?;
    write(&(s.n_scales as u32).to_le_bytes())?;
    write(&(s.n_times as u32).to_le_bytes())?;
    write(&s.sample_rate_hz.to_le_bytes())?;
    for c in &s.coeffs {
        write(&c.re.to_le_bytes())?;
        write(&c.im.to_le_bytes())?;
    }
    w.flush()
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Raw contents of a scalogram dump.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalogramDump {
    pub n_scales: usize,
    pub n_times: usize,
    pub sample_rate_hz: f64,
    pub coeffs: Vec<Complex64>,
}

pub fn read_scalogram(path: &Path) -> Result<ScalogramDump> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    if bytes.len() < 20 || &bytes[..4] != SCALOGRAM_MAGIC {
        return Err(Error::Format(format!("{}: not a scalogram dump", path.display())));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let f64_at = |i: usize| f64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
    let n_scales = u32_at(4);
    let n_times = u32_at(8);
    let sample_rate_hz = f64_at(12);
    let count = n_scales * n_times;
    if bytes.len() != 20 + 16 * count {
        return Err(Error::Format(format!("{}: truncated scalogram dump", path.display())));
    }
    let coeffs = (0..count)
        .map(|i| Complex64::new(f64_at(20 + 16 * i), f64_at(28 + 16 * i)))
        .collect();
    Ok(ScalogramDump {
        n_scales,
        n_times,
        sample_rate_hz,
        coeffs,
    })
}
