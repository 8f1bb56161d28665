//! Record-to-image pipeline for the five transform variants.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cwt::{magnitude, Scalogram, SignalSpectrum};
use crate::error::{Error, Result};
use crate::raster::{rasterize, TfrImage, DEFAULT_FLOOR_DB};
use crate::signal::SignalRecord;
use crate::ssq::synchrosqueeze;
use crate::wavelet::{make_scale_grid, WaveletSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TransformCode {
    #[serde(rename = "wt-amor")]
    WtAmor,
    #[serde(rename = "wt-bump")]
    WtBump,
    #[serde(rename = "wt-morse")]
    WtMorse,
    #[serde(rename = "wsst-amor")]
    WsstAmor,
    #[serde(rename = "wsst-bump")]
    WsstBump,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Amor,
    Bump,
    Morse,
}

impl TransformCode {
    pub const ALL: [TransformCode; 5] = [
        TransformCode::WtAmor,
        TransformCode::WtBump,
        TransformCode::WtMorse,
        TransformCode::WsstAmor,
        TransformCode::WsstBump,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TransformCode::WtAmor => "wt-amor",
            TransformCode::WtBump => "wt-bump",
            TransformCode::WtMorse => "wt-morse",
            TransformCode::WsstAmor => "wsst-amor",
            TransformCode::WsstBump => "wsst-bump",
        }
    }

    pub fn parse(code: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == code)
            .ok_or_else(|| {
                let valid: Vec<&str> = Self::ALL.iter().map(|c| c.as_str()).collect();
                Error::invalid(format!(
                    "unknown transform code '{code}' (valid: {})",
                    valid.join(", ")
                ))
            })
    }

    pub fn family(self) -> Family {
        match self {
            TransformCode::WtAmor | TransformCode::WsstAmor => Family::Amor,
            TransformCode::WtBump | TransformCode::WsstBump => Family::Bump,
            TransformCode::WtMorse => Family::Morse,
        }
    }

    pub fn is_synchrosqueezed(self) -> bool {
        matches!(self, TransformCode::WsstAmor | TransformCode::WsstBump)
    }

    pub fn method_name(self) -> &'static str {
        match self {
            TransformCode::WtAmor => "Wavelet Amor",
            TransformCode::WtBump => "Wavelet Bump",
            TransformCode::WtMorse => "Wavelet Morse",
            TransformCode::WsstAmor => "Synchrosqueezed Wavelet Amor",
            TransformCode::WsstBump => "Synchrosqueezed Wavelet Bump",
        }
    }

    /// Published accuracy (%) on the original motor dataset.
    pub fn published_accuracy_pct(self) -> f64 {
        match self {
            TransformCode::WtMorse => 93.73,
            TransformCode::WtAmor => 90.93,
            TransformCode::WtBump => 89.20,
            TransformCode::WsstBump => 76.66,
            TransformCode::WsstAmor => 67.60,
        }
    }
}

impl fmt::Display for TransformCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TransformCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformParams {
    pub voices_per_octave: u32,
    pub min_freq_hz: f64,
    pub floor_db: f64,
    pub wsst_epsilon: f64,
    /// Defaults to the number of scales in the grid.
    pub wsst_bins: Option<usize>,
    pub amor: WaveletSpec,
    pub bump: WaveletSpec,
    pub morse: WaveletSpec,
}

impl Default for TransformParams {
    fn default() -> Self {
        Self {
            voices_per_octave: 10,
            min_freq_hz: 10.0,
            floor_db: DEFAULT_FLOOR_DB,
            wsst_epsilon: 1e-3,
            wsst_bins: None,
            amor: WaveletSpec::amor(),
            bump: WaveletSpec::bump(),
            morse: WaveletSpec::morse(),
        }
    }
}

impl TransformParams {
    pub fn wavelet(&self, family: Family) -> &WaveletSpec {
        match family {
            Family::Amor => &self.amor,
            Family::Bump => &self.bump,
            Family::Morse => &self.morse,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, spec, want) in [
            ("amor", &self.amor, "amor"),
            ("bump", &self.bump, "bump"),
            ("morse", &self.morse, "morse"),
        ] {
            if spec.family_name() != want {
                return Err(Error::invalid(format!(
                    "transform.{name} must be a {want} wavelet, got {}",
                    spec.family_name()
                )));
            }
            spec.validate()?;
        }
        if self.voices_per_octave < 4 {
            return Err(Error::invalid("voices_per_octave must be >= 4"));
        }
        if !(self.min_freq_hz > 0.0) {
            return Err(Error::invalid("min_freq_hz must be > 0"));
        }
        if !(self.floor_db < 0.0) {
            return Err(Error::invalid("floor_db must be negative"));
        }
        if !(self.wsst_epsilon > 0.0 && self.wsst_epsilon < 1.0) {
            return Err(Error::invalid("wsst_epsilon must lie in (0, 1)"));
        }
        if matches!(self.wsst_bins, Some(b) if b < 8) {
            return Err(Error::invalid("wsst_bins must be >= 8"));
        }
        Ok(())
    }

    /// Short text that changes whenever any parameter that affects the
    /// rendered images changes.
    pub fn stamp(&self, code: TransformCode) -> String {
        let spec = serde_json::to_string(self.wavelet(code.family())).unwrap_or_default();
        format!(
            "{code} v={} fmin={} floor={} eps={} bins={:?} {spec}",
            self.voices_per_octave,
            self.min_freq_hz,
            self.floor_db,
            self.wsst_epsilon,
            self.wsst_bins
        )
    }
}

/// CWT of `record` with the wavelet for `family`, on the configured grid.
pub fn scalogram(spectrum: &SignalSpectrum, record: &SignalRecord, family: Family, params: &TransformParams) -> Result<Scalogram> {
    let spec = params.wavelet(family);
    let grid = make_scale_grid(
        record.samples.len(),
        record.sample_rate_hz,
        spec,
        params.voices_per_octave,
        params.min_freq_hz,
    )?;
    spectrum.transform(spec, &grid)
}

/// Image for one transform of a scalogram.
pub fn image_from_scalogram(
    s: &Scalogram,
    record: &SignalRecord,
    code: TransformCode,
    params: &TransformParams,
) -> Result<TfrImage> {
    let matrix = if code.is_synchrosqueezed() {
        let bins = params.wsst_bins.unwrap_or(s.n_scales);
        // lowest frequency first; flip so row 0 is the top of the image
        synchrosqueeze(s, bins, params.wsst_epsilon)?.energy.flipped_rows()
    } else {
        magnitude(s)
    };
    rasterize(&matrix, record.class, &record.id, params.floor_db)
}

/// Renders `record` under each requested transform, computing each
/// wavelet family's CWT once.
pub fn render_images(
    record: &SignalRecord,
    codes: &[TransformCode],
    params: &TransformParams,
) -> Result<Vec<(TransformCode, TfrImage)>> {
    params.validate()?;
    let spectrum = SignalSpectrum::new(&record.samples, record.sample_rate_hz)?;
    let mut cache: Vec<(Family, Scalogram)> = Vec::new();
    let mut out = Vec::with_capacity(codes.len());
    for &code in codes {
        let family = code.family();
        if !cache.iter().any(|(f, _)| *f == family) {
            cache.push((family, scalogram(&spectrum, record, family, params)?));
        }
        let s = &cache.iter().find(|(f, _)| *f == family).expect("cached").1;
        out.push((code, image_from_scalogram(s, record, code, params)?));
    }
    Ok(out)
}

pub fn render_image(record: &SignalRecord, code: TransformCode, params: &TransformParams) -> Result<TfrImage> {
    Ok(render_images(record, &[code], params)?.remove(0).1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::IMAGE_BYTES;
    use crate::signal::{synth_signal, ConditionClass};

    #[test]
    fn codes_round_trip() {
        for c in TransformCode::ALL {
            assert_eq!(TransformCode::parse(c.as_str()).unwrap(), c);
            assert_eq!(serde_json::to_string(&c).unwrap(), format!("\"{c}\""));
        }
        let err = TransformCode::parse("wt-mexh").unwrap_err().to_string();
        assert!(err.contains("wt-morse") && err.contains("wsst-bump"), "{err}");
    }

    #[test]
    fn renders_all_five() {
        let rec = synth_signal(ConditionClass::BrokenRotorBar, 100, 0.2, 5000.0, 1).unwrap();
        let images = render_images(&rec, &TransformCode::ALL, &TransformParams::default()).unwrap();
        assert_eq!(images.len(), 5);
        for (code, img) in &images {
            assert_eq!(img.pixels.len(), IMAGE_BYTES, "{code}");
            assert_eq!(img.source_id, rec.id);
        }
        let single = render_image(&rec, TransformCode::WsstBump, &TransformParams::default()).unwrap();
        assert_eq!(single, images[4].1);
    }

    #[test]
    fn stamp_tracks_parameters() {
        let p = TransformParams::default();
        let mut q = p.clone();
        q.floor_db = -50.0;
        assert_ne!(p.stamp(TransformCode::WtMorse), q.stamp(TransformCode::WtMorse));
        assert_ne!(p.stamp(TransformCode::WtAmor), p.stamp(TransformCode::WsstAmor));
    }

    #[test]
    fn rejects_family_mismatch() {
        let p = TransformParams {
            amor: WaveletSpec::morse(),
            ..TransformParams::default()
        };
        assert!(p.validate().is_err());
    }
}
