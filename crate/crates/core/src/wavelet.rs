//! Analytic mother wavelets in the frequency domain and the logarithmic
//! scale grid the CWT runs over.
//!
//! Every `psi_hat` peaks at exactly 2.0 and vanishes for `omega <= 0`.
//! Arguments are in radians per sample of the dilated wavelet, so a scale
//! `a` (in samples) centers a wavelet at `peak_omega / a` rad/sample.

use std::f64::consts::{LN_2, PI};
use std::sync::Mutex;

use num_complex::Complex64;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::FftPlan;

/// Analytic Morlet: `2 exp(-(w - w0)^2 / 2)` for `w > 0`.
pub fn amor_freq(omega: f64, omega0: f64) -> f64 {
    if omega <= 0.0 {
        return 0.0;
    }
    let d = omega - omega0;
    2.0 * (-0.5 * d * d).exp()
}

/// Bump: `2 exp(1 - 1/(1 - w^2))` with `w = (omega - mu)/sigma`, zero for `|w| >= 1`.
pub fn bump_freq(omega: f64, mu: f64, sigma: f64) -> f64 {
    if omega <= 0.0 {
        return 0.0;
    }
    let w = (omega - mu) / sigma;
    let q = 1.0 - w * w;
    if q <= 0.0 {
        return 0.0;
    }
    2.0 * (1.0 - 1.0 / q).exp()
}

/// Generalized Morse: `a * omega^beta * exp(-omega^gamma)` with
/// `a = 2 (e gamma / beta)^(beta / gamma)`.
pub fn morse_freq(omega: f64, beta: f64, gamma: f64) -> f64 {
    if omega <= 0.0 {
        return 0.0;
    }
    // log domain; omega^beta overflows long before the exponential wins
    let log_norm = LN_2 + (beta / gamma) * (1.0 + gamma.ln() - beta.ln());
    (log_norm + beta * omega.ln() - omega.powf(gamma)).exp()
}

/// A mother wavelet family with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum WaveletSpec {
    Amor { omega0: f64 },
    Bump { mu: f64, sigma: f64 },
    Morse { beta: f64, gamma: f64 },
}

impl WaveletSpec {
    pub const fn amor() -> Self {
        WaveletSpec::Amor { omega0: 6.0 }
    }

    pub const fn bump() -> Self {
        WaveletSpec::Bump { mu: 5.0, sigma: 0.6 }
    }

    pub const fn morse() -> Self {
        WaveletSpec::Morse {
            beta: 20.0,
            gamma: 3.0,
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            WaveletSpec::Amor { .. } => "amor",
            WaveletSpec::Bump { .. } => "bump",
            WaveletSpec::Morse { .. } => "morse",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            WaveletSpec::Amor { omega0 } => omega0 > 0.0,
            WaveletSpec::Bump { mu, sigma } => sigma > 0.0 && mu > sigma,
            WaveletSpec::Morse { beta, gamma } => beta > 0.0 && gamma > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("wavelet parameters out of range: {self:?}")))
        }
    }

    /// Frequency (rad) at which `psi_hat` attains its maximum of 2.
    pub fn peak_omega(&self) -> f64 {
        match *self {
            WaveletSpec::Amor { omega0 } => omega0,
            WaveletSpec::Bump { mu, .. } => mu,
            WaveletSpec::Morse { beta, gamma } => (beta / gamma).powf(1.0 / gamma),
        }
    }

    pub fn psi_hat(&self, omega: f64) -> f64 {
        match *self {
            WaveletSpec::Amor { omega0 } => amor_freq(omega, omega0),
            WaveletSpec::Bump { mu, sigma } => bump_freq(omega, mu, sigma),
            WaveletSpec::Morse { beta, gamma } => morse_freq(omega, beta, gamma),
        }
    }

    /// Half-width, in units of scale, beyond which the sampled time-domain
    /// wavelet stays below `DECAY_TOL` of its peak. Measured once per
    /// parameter set at a reference scale and cached.
    pub fn decay_span(&self) -> f64 {
        static CACHE: Mutex<Vec<(WaveletSpec, f64)>> = Mutex::new(Vec::new());
        let mut cache = CACHE.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(&(_, span)) = cache.iter().find(|(s, _)| s == self) {
            return span;
        }
        let span = self.measure_decay_span();
        cache.push((*self, span));
        span
    }

    fn measure_decay_span(&self) -> f64 {
        const REF_SCALE: f64 = 16.0;
        const LEN: usize = 1 << 18;
        let mut buf = vec![Complex64::new(0.0, 0.0); LEN];
        for (k, v) in buf.iter_mut().enumerate().take(LEN / 2).skip(1) {
            v.re = self.psi_hat(REF_SCALE * 2.0 * PI * k as f64 / LEN as f64);
        }
        FftPlan::new(LEN)
            .and_then(|p| p.inverse(&mut buf))
            .expect("power-of-two plan");
        let peak = buf.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let last = (1..LEN / 2)
            .rev()
            .find(|&t| buf[t].norm().max(buf[LEN - t].norm()) > DECAY_TOL * peak)
            .unwrap_or(0);
        (last + 1) as f64 / REF_SCALE
    }
}

/// Level, relative to the peak, at which a time-domain wavelet is treated as
/// decayed when sizing FFT padding.
pub const DECAY_TOL: f64 = 1e-9;

/// Logarithmically spaced CWT scales (in samples) for one record geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleGrid {
    pub scales: Vec<f64>,
    pub voices_per_octave: u32,
    /// Per-scale frequency of the wavelet peak, strictly decreasing.
    pub center_freqs_hz: Vec<f64>,
    pub n_samples: usize,
    pub sample_rate_hz: f64,
}

impl ScaleGrid {
    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    /// Natural-log width of one grid cell, identical for every scale.
    pub fn log_cell_width(&self) -> f64 {
        LN_2 / self.voices_per_octave as f64
    }
}

/// Builds the grid: the smallest scale puts the wavelet peak at
/// `nyquist * (1 - 1/voices)`, then scales grow by `2^(1/voices)` while the
/// center frequency stays above `min_freq_hz`.
pub fn make_scale_grid(
    n_samples: usize,
    sample_rate_hz: f64,
    spec: &WaveletSpec,
    voices_per_octave: u32,
    min_freq_hz: f64,
) -> Result<ScaleGrid> {
    spec.validate()?;
    if voices_per_octave < 4 {
        return Err(Error::invalid("voices_per_octave must be >= 4"));
    }
    if n_samples == 0 {
        return Err(Error::invalid("grid needs a nonempty record"));
    }
    let nyquist = sample_rate_hz / 2.0;
    if !(min_freq_hz > 0.0 && min_freq_hz < nyquist) {
        return Err(Error::invalid(format!(
            "min_freq_hz must lie in (0, {nyquist}), got {min_freq_hz}"
        )));
    }
    let top_hz = nyquist * (1.0 - 1.0 / voices_per_octave as f64);
    if (top_hz / min_freq_hz).log2() < 2.0 {
        return Err(Error::invalid(format!(
            "fewer than 2 octaves between {min_freq_hz} Hz and {top_hz} Hz"
        )));
    }
    let peak = spec.peak_omega();
    let smallest = peak * sample_rate_hz / (2.0 * PI * top_hz);
    let voices = voices_per_octave as f64;
    let mut scales = Vec::new();
    let mut center_freqs_hz = Vec::new();
    for j in 0.. {
        let step = 2f64.powf(j as f64 / voices);
        let f = top_hz / step;
        if f <= min_freq_hz {
            break;
        }
        scales.push(smallest * step);
        center_freqs_hz.push(f);
    }
    Ok(ScaleGrid {
        scales,
        voices_per_octave,
        center_freqs_hz,
        n_samples,
        sample_rate_hz,
    })
}
