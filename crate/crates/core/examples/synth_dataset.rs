//! Synthesize the surrogate motor-current dataset and inspect one record.
//!
//! ```text
//! cargo run --release --example synth_dataset -- [out_dir] [records_per_cell]
//! ```
//!
//! Writes `manifest.json` plus one text file per record, then prints the
//! fault signature lines of a broken-rotor-bar record at full load next to
//! the DFT magnitude measured at those frequencies.

use std::env;
use std::path::PathBuf;

use num_complex::Complex64;
use wavediag::numerics::fft;
use wavediag::signal::{
    build_dataset, fundamental_amplitude, signature_components, synth_signal, ConditionClass,
    DatasetConfig,
};

fn main() -> wavediag::Result<()> {
    let mut args = env::args().skip(1);
    let out_dir = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| env::temp_dir().join("wavediag-dataset"));
    let per_cell: u32 = args.next().and_then(|s| s.parse().ok()).unwrap_or(4);

    let config = DatasetConfig {
        records_per_cell: per_cell,
        ..DatasetConfig::default()
    };
    let (manifest, outcome) = build_dataset(&config, &out_dir)?;
    println!(
        "{} records in {} ({outcome:?})",
        manifest.records.len(),
        out_dir.display()
    );
    for ((class, load), n) in manifest.cell_counts() {
        if load == 100 {
            println!("  {:<26} load {load:>3}%: {n} records", ConditionClass::from_code(class)?.name());
        }
    }

    let (class, load) = (ConditionClass::BrokenRotorBar, 100);
    let rec = synth_signal(class, load, 1.0, 10_000.0, 42)?;
    // Hann window against leakage from the fundamental; pad to 16384 so
    // bins are 0.61 Hz apart
    let n = rec.samples.len();
    let mut x: Vec<Complex64> = rec
        .samples
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos();
            Complex64::new(v * w, 0.0)
        })
        .collect();
    x.resize(16_384, Complex64::new(0.0, 0.0));
    let spectrum = fft(&x)?;
    let df = rec.sample_rate_hz / spectrum.len() as f64;
    let amp_at = |f: f64| {
        let k = (f.abs() / df).round() as usize;
        // peak of the neighbouring bins; Hann coherent gain is 1/2
        let peak = spectrum[k - 1..=k + 1].iter().map(|c| c.norm()).fold(0.0, f64::max);
        4.0 * peak / n as f64
    };
    let a1 = fundamental_amplitude(class, load);
    println!("\n{} at {load}% load, fundamental {a1:.3} A", class.name());
    println!("  {:>10} {:>10} {:>10}", "freq Hz", "expected", "measured");
    for c in signature_components(class, load) {
        println!(
            "  {:>10.2} {:>10.4} {:>10.4}",
            c.freq_hz.abs(),
            c.rel_amplitude * a1,
            amp_at(c.freq_hz)
        );
    }
    Ok(())
}
