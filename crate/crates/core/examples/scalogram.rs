//! CWT of a synthetic record: ridge tracking, a comparison against direct
//! quadrature, and a binary dump of the coefficients.

use std::env;

use wavediag::cwt::{cwt, cwt_direct, read_scalogram, write_scalogram};
use wavediag::signal::{synth_signal, ConditionClass};
use wavediag::wavelet::{make_scale_grid, WaveletSpec};

fn main() -> wavediag::Result<()> {
    let rec = synth_signal(ConditionClass::StatorInterTurnShort, 75, 1.0, 10_000.0, 7)?;
    for spec in [WaveletSpec::amor(), WaveletSpec::bump(), WaveletSpec::morse()] {
        let grid = make_scale_grid(rec.samples.len(), rec.sample_rate_hz, &spec, 10, 10.0)?;
        let s = cwt(&rec, &spec, &grid)?;
        print!("{:<6} ridge Hz over time:", spec.family_name());
        for t in (1000..10_000).step_by(2000) {
            print!(" {:.1}", s.center_freqs_hz[s.ridge_row(t)]);
        }
        println!();
    }

    // The quadrature route is O(N^2) per scale, so check a short excerpt.
    // The routes differ at the record edges (trapezoid end weights) and at
    // the smallest scales (wavelet spectrum cut at Nyquist), so the excerpt
    // is tapered and only mid and low scales are compared.
    let mut short = rec.clone();
    short.samples.truncate(1024);
    for (i, v) in short.samples.iter_mut().enumerate() {
        *v *= (std::f64::consts::PI * i as f64 / 1023.0).sin().powi(2);
    }
    let spec = WaveletSpec::morse();
    let grid = make_scale_grid(1024, short.sample_rate_hz, &spec, 10, 100.0)?;
    let fast = cwt(&short, &spec, &grid)?;
    let picks = [grid.len() / 3, grid.len() / 2, grid.len() - 1];
    let scales: Vec<f64> = picks.iter().map(|&i| grid.scales[i]).collect();
    let direct = cwt_direct(&short, &spec, &scales, &[300, 512, 700])?;
    let mut worst: f64 = 0.0;
    for (r, &i) in picks.iter().enumerate() {
        for (c, &b) in [300, 512, 700].iter().enumerate() {
            worst = worst.max((direct[r][c] - fast.get(i, b)).norm());
        }
    }
    println!("fft vs quadrature, max abs difference: {worst:.2e}");

    let path = env::temp_dir().join("wavediag-scalogram.wdsc");
    write_scalogram(&fast, &path)?;
    let back = read_scalogram(&path)?;
    println!(
        "dumped {} x {} coefficients to {} (round trip exact: {})",
        back.n_scales,
        back.n_times,
        path.display(),
        back.coeffs == fast.coeffs()
    );
    Ok(())
}
