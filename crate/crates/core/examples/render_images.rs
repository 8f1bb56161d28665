//! Render one record under all five transforms and write the PPM images.
//!
//! ```text
//! cargo run --release --example render_images -- [out_dir]
//! ```

use std::env;
use std::path::PathBuf;

use wavediag::pipeline::{render_images, TransformCode, TransformParams};
use wavediag::raster::write_ppm;
use wavediag::signal::{synth_signal, ConditionClass};

fn main() -> wavediag::Result<()> {
    let out_dir = env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| env::temp_dir().join("wavediag-images"));
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| wavediag::Error::Io { context: "creating output dir".into(), source: e })?;
    let params = TransformParams::default();

    for class in ConditionClass::ALL {
        let mut rec = synth_signal(class, 100, 1.0, 10_000.0, 11)?;
        rec.id = format!("demo_{}", class.name());
        for (code, img) in render_images(&rec, &TransformCode::ALL, &params)? {
            let path = out_dir.join(format!("{}_{code}.ppm", rec.id));
            write_ppm(&img, &path)?;
            // mean brightness of the top and bottom halves
            let half = img.pixels.len() / 2;
            let mean = |px: &[u8]| px.iter().map(|&v| v as f64).sum::<f64>() / px.len() as f64;
            println!(
                "{:<26} {:<10} top {:>6.1} bottom {:>6.1}",
                class.name(),
                code,
                mean(&img.pixels[..half]),
                mean(&img.pixels[half..])
            );
        }
    }
    println!("images in {}", out_dir.display());
    Ok(())
}
