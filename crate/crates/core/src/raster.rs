//! Time-frequency matrices to 32x32 RGB images: per-image dB scaling,
//! block-mean downsampling and a fixed five-stop colormap.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::RealMatrix;
use crate::signal::ConditionClass;

pub const IMAGE_SIDE: usize = 32;
pub const IMAGE_BYTES: usize = IMAGE_SIDE * IMAGE_SIDE * 3;
pub const PPM_HEADER: &[u8] = b"P6\n32 32\n255\n";
pub const DEFAULT_FLOOR_DB: f64 = -60.0;

/// A 32x32 RGB image, row 0 is the highest frequency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TfrImage {
    pub pixels: Vec<u8>,
    pub label: ConditionClass,
    pub source_id: String,
}

impl TfrImage {
    pub fn new(pixels: Vec<u8>, label: ConditionClass, source_id: impl Into<String>) -> Result<Self> {
        if pixels.len() != IMAGE_BYTES {
            return Err(Error::Shape(format!(
                "image needs {IMAGE_BYTES} bytes, got {}",
                pixels.len()
            )));
        }
        Ok(Self {
            pixels,
            label,
            source_id: source_id.into(),
        })
    }

    pub fn pixel(&self, row: usize, col: usize) -> [u8; 3] {
        let i = (row * IMAGE_SIDE + col) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }
}

/// `clamp((20 log10(m / max) - floor_db) / -floor_db, 0, 1)`; zeros map to 0.
pub fn normalize_log(m: &RealMatrix, floor_db: f64) -> Result<RealMatrix> {
    if !(floor_db < 0.0) {
        return Err(Error::invalid(format!("floor_db must be negative, got {floor_db}")));
    }
    let max = m.max();
    if !(max > 0.0) {
        return Err(Error::EmptyContent);
    }
    let data = m
        .as_slice()
        .iter()
        .map(|&v| {
            if v <= 0.0 {
                return 0.0;
            }
            let db = 20.0 * (v / max).log10();
            ((db - floor_db) / -floor_db).clamp(0.0, 1.0)
        })
        .collect();
    RealMatrix::from_vec(m.rows(), m.cols(), data)
}

/// Block means over an even integer partition: output row `r` averages input
/// rows `[floor(r R / out), floor((r + 1) R / out))`, same for columns.
pub fn downsample_area(m: &RealMatrix, out_rows: usize, out_cols: usize) -> Result<RealMatrix> {
    let (rows, cols) = (m.rows(), m.cols());
    if rows < out_rows || cols < out_cols {
        return Err(Error::Shape(format!(
            "cannot downsample {rows}x{cols} to {out_rows}x{out_cols}"
        )));
    }
    let mut out = RealMatrix::zeros(out_rows, out_cols);
    for r in 0..out_rows {
        let (r0, r1) = (r * rows / out_rows, (r + 1) * rows / out_rows);
        for c in 0..out_cols {
            let (c0, c1) = (c * cols / out_cols, (c + 1) * cols / out_cols);
            let mut acc = 0.0;
            for rr in r0..r1 {
                acc += m.row(rr)[c0..c1].iter().sum::<f64>();
            }
            out.set(r, c, acc / ((r1 - r0) * (c1 - c0)) as f64);
        }
    }
    Ok(out)
}

const COLORMAP: [(f64, [f64; 3]); 5] = [
    (0.00, [13.0, 8.0, 135.0]),
    (0.25, [126.0, 3.0, 168.0]),
    (0.50, [204.0, 71.0, 120.0]),
    (0.75, [248.0, 149.0, 64.0]),
    (1.00, [240.0, 249.0, 33.0]),
];

/// Piecewise-linear colormap through five control points, rounded half-up.
pub fn apply_colormap(v: f64) -> Result<[u8; 3]> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::invalid(format!("colormap input {v} outside [0, 1]")));
    }
    let seg = COLORMAP
        .windows(2)
        .position(|w| v <= w[1].0)
        .unwrap_or(COLORMAP.len() - 2);
    let (v0, c0) = COLORMAP[seg];
    let (v1, c1) = COLORMAP[seg + 1];
    let t = (v - v0) / (v1 - v0);
    let mut rgb = [0u8; 3];
    for ch in 0..3 {
        let x = c0[ch] + (c1[ch] - c0[ch]) * t;
        rgb[ch] = (x + 0.5).floor().clamp(0.0, 255.0) as u8;
    }
    Ok(rgb)
}

/// `normalize_log -> downsample_area -> apply_colormap`. Row 0 of `m` must
/// already be the highest frequency.
pub fn rasterize(
    m: &RealMatrix,
    label: ConditionClass,
    source_id: &str,
    floor_db: f64,
) -> Result<TfrImage> {
    let levels = raster_levels(m, floor_db)?;
    let mut pixels = Vec::with_capacity(IMAGE_BYTES);
    for &v in levels.as_slice() {
        pixels.extend_from_slice(&apply_colormap(v)?);
    }
    TfrImage::new(pixels, label, source_id)
}

/// The 32x32 intensity levels in `[0, 1]` that [`rasterize`] colors.
pub fn raster_levels(m: &RealMatrix, floor_db: f64) -> Result<RealMatrix> {
    let v = normalize_log(m, floor_db)?;
    downsample_area(&v, IMAGE_SIDE, IMAGE_SIDE)
}

pub fn encode_ppm(img: &TfrImage) -> Vec<u8> {
    let mut out = Vec::with_capacity(PPM_HEADER.len() + IMAGE_BYTES);
    out.extend_from_slice(PPM_HEADER);
    out.extend_from_slice(&img.pixels);
    out
}

pub fn write_ppm(img: &TfrImage, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)
        .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    f.write_all(&encode_ppm(img))
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Reads a 32x32 P6 file written by [`write_ppm`].
pub fn read_ppm(path: &Path, label: ConditionClass, source_id: &str) -> Result<TfrImage> {
    let bytes =
        fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    if bytes.len() != PPM_HEADER.len() + IMAGE_BYTES || !bytes.starts_with(PPM_HEADER) {
        return Err(Error::Format(format!(
            "{}: not a 32x32 binary PPM",
            path.display()
        )));
    }
    TfrImage::new(bytes[PPM_HEADER.len()..].to_vec(), label, source_id)
}
