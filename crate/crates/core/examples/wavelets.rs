//! Tabulate the three analytic mother wavelets and the scale grid built
//! for a 1 s, 10 kHz record.

use wavediag::wavelet::{make_scale_grid, WaveletSpec};

fn main() -> wavediag::Result<()> {
    let specs = [WaveletSpec::amor(), WaveletSpec::bump(), WaveletSpec::morse()];
    println!("{:>6} {:>10} {:>10} {:>10}", "omega", "amor", "bump", "morse");
    for i in 0..=40 {
        let w = i as f64 * 0.25;
        print!("{w:>6.2}");
        for s in &specs {
            print!(" {:>10.6}", s.psi_hat(w));
        }
        println!();
    }

    println!();
    for s in &specs {
        let grid = make_scale_grid(10_000, 10_000.0, s, 10, 10.0)?;
        println!(
            "{:<6} peak at {:.5} rad, {} scales from {:.1} Hz down to {:.2} Hz, decays within {:.0} scale units",
            s.family_name(),
            s.peak_omega(),
            grid.len(),
            grid.center_freqs_hz[0],
            grid.center_freqs_hz[grid.len() - 1],
            s.decay_span()
        );
    }
    Ok(())
}
