//! Synchrosqueeze a 50 -> 150 Hz chirp and compare concentration with the
//! plain scalogram.

use std::f64::consts::PI;

use wavediag::cwt::{cwt, magnitude};
use wavediag::matrix::RealMatrix;
use wavediag::signal::{ConditionClass, SignalRecord};
use wavediag::ssq::{concentration_entropy, synchrosqueeze};
use wavediag::wavelet::{make_scale_grid, WaveletSpec};

fn main() -> wavediag::Result<()> {
    let fs = 2000.0;
    let n = 4000;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            // instantaneous frequency 50 + 50 t
            (2.0 * PI * (50.0 * t + 25.0 * t * t)).cos()
        })
        .collect();
    let rec = SignalRecord {
        id: "chirp".into(),
        samples,
        sample_rate_hz: fs,
        class: ConditionClass::Normal,
        load_pct: 0,
        seed: 0,
    };

    for spec in [WaveletSpec::amor(), WaveletSpec::bump()] {
        let grid = make_scale_grid(n, fs, &spec, 16, 20.0)?;
        let s = cwt(&rec, &spec, &grid)?;
        let tfr = synchrosqueeze(&s, grid.len(), 1e-3)?;
        let interior = (n / 10, n - n / 10);
        let cwt_energy = {
            let m = magnitude(&s).columns(interior.0, interior.1);
            RealMatrix::from_fn(m.rows(), m.cols(), |r, c| m.get(r, c).powi(2))
        };
        let ssq_energy = tfr.energy.columns(interior.0, interior.1);
        println!(
            "{:<5} entropy |W|^2 {:.2} bits, synchrosqueezed {:.2} bits, dropped {:.1e}",
            spec.family_name(),
            concentration_entropy(&cwt_energy)?,
            concentration_entropy(&ssq_energy)?,
            tfr.dropped_energy
        );
        print!("      peak bin Hz at t = 0.5, 1.0, 1.5 s:");
        for t in [1000, 2000, 3000] {
            let col: Vec<f64> = (0..tfr.energy.rows()).map(|r| tfr.energy.get(r, t)).collect();
            let best = (0..col.len()).fold(0, |b, i| if col[i] > col[b] { i } else { b });
            print!(" {:.1}", tfr.bin_freqs_hz[best]);
        }
        println!();
    }
    Ok(())
}
