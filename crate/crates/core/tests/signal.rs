use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use wavediag::numerics::fft;
use wavediag::signal::{
    build_dataset, fundamental_amplitude, record_seed, signature_components, synth_signal,
    BuildOutcome, ConditionClass, DatasetConfig, DatasetManifest, LINE_FREQ_HZ,
};

const PADDED: usize = 1 << 16;

/// Hamming-windowed magnitude spectrum, zero-padded for 0.15 Hz bins at 10 kHz.
fn spectrum(samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    let mut x: Vec<Complex64> = samples
        .iter()
        .enumerate()
        .map(|(i, &v)| Complex64::new(v * (0.54 - 0.46 * (2.0 * PI * i as f64 / n as f64).cos()), 0.0))
        .collect();
    x.resize(PADDED, Complex64::new(0.0, 0.0));
    fft(&x).unwrap()[..PADDED / 2].iter().map(|c| c.norm()).collect()
}

fn bin(f: f64, fs: f64) -> usize {
    (f.abs() * PADDED as f64 / fs).round() as usize
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn normal_record_is_dominated_by_the_line_frequency() {
    let fs = 10_000.0;
    let rec = synth_signal(ConditionClass::Normal, 100, 1.0, fs, 42).unwrap();
    assert_eq!(rec.samples.len(), 10_000);
    let mag = spectrum(&rec.samples);
    let peak = (0..mag.len()).max_by(|&a, &b| mag[a].total_cmp(&mag[b])).unwrap();
    assert!((peak as f64 * fs / PADDED as f64 - 60.0).abs() < 0.2);
    let guard = bin(3.0, fs);
    let allowed = [60.0, 180.0, 300.0].map(|f| bin(f, fs));
    let limit = mag[peak] * 10f64.powf(-25.0 / 20.0);
    for (k, &m) in mag.iter().enumerate() {
        if allowed.iter().all(|&a| k.abs_diff(a) > guard) {
            assert!(m < limit, "{:.2} Hz at {:.1} dB", k as f64 * fs / PADDED as f64, 20.0 * (m / mag[peak]).log10());
        }
    }
}

#[test]
fn broken_bar_sidebands_have_the_stated_ratio() {
    let fs = 10_000.0;
    let rec = synth_signal(ConditionClass::BrokenRotorBar, 100, 1.0, fs, 42).unwrap();
    let mag = spectrum(&rec.samples);
    let fund = mag[bin(60.0, fs) - 2..=bin(60.0, fs) + 2].iter().copied().fold(0.0, f64::max);
    let s = wavediag::signal::slip(100);
    for f in [(1.0 - 2.0 * s) * 60.0, (1.0 + 2.0 * s) * 60.0] {
        let k = bin(f, fs);
        let local = (k - 2..=k + 2).max_by(|&a, &b| mag[a].total_cmp(&mag[b])).unwrap();
        assert!(mag[local] > mag[local - 1] && mag[local] > mag[local + 1]);
        let ratio = mag[local] / fund;
        assert!((ratio - 0.05).abs() < 0.005, "{f} Hz: ratio {ratio}");
    }
}

#[test]
fn fault_signatures_stand_above_the_noise_floor() {
    let fs = 10_000.0;
    for class in ConditionClass::ALL {
        if class == ConditionClass::Normal {
            continue;
        }
        for load in [50, 75, 100] {
            let lines: Vec<f64> = signature_components(class, load)
                .into_iter()
                .filter(|c| c.rel_amplitude >= 0.03)
                .map(|c| c.freq_hz.abs())
                .collect();
            assert!(!lines.is_empty());
            for seed in 0..10 {
                let rec = synth_signal(class, load, 1.0, fs, 1000 + seed).unwrap();
                let mag = spectrum(&rec.samples);
                for &f in &lines {
                    let k = bin(f, fs);
                    let local = (k - 2..=k + 2).max_by(|&a, &b| mag[a].total_cmp(&mag[b])).unwrap();
                    assert!(mag[local] > mag[local - 1] && mag[local] > mag[local + 1], "{class} {load}% {f} Hz");
                    let w = bin(20.0, fs);
                    let floor = median(mag[k - w..k + w].to_vec());
                    let snr = 20.0 * (mag[local] / floor).log10();
                    assert!(snr >= 10.0, "{class} {load}% seed {seed}: {f} Hz only {snr:.1} dB");
                }
            }
        }
    }
}

#[test]
fn dataset_is_deterministic_and_reused() {
    let dir = tempfile::tempdir().unwrap();
    let config = DatasetConfig {
        records_per_cell: 2,
        duration_s: 0.1,
        load_levels: vec![0, 100],
        ..DatasetConfig::default()
    };
    let (m1, o1) = build_dataset(&config, dir.path()).unwrap();
    assert_eq!(o1, BuildOutcome::Written);
    assert_eq!(m1.records.len(), 20);
    let first = std::fs::read(dir.path().join(&m1.records[3].path)).unwrap();
    let (m2, o2) = build_dataset(&config, dir.path()).unwrap();
    assert_eq!(o2, BuildOutcome::Reused);
    assert_eq!(m1, m2);
    assert_eq!(std::fs::read(dir.path().join(&m2.records[3].path)).unwrap(), first);
    assert_eq!(DatasetManifest::load(dir.path()).unwrap(), m1);

    let other = tempfile::tempdir().unwrap();
    build_dataset(&config, other.path()).unwrap();
    for r in &m1.records {
        assert_eq!(
            std::fs::read(dir.path().join(&r.path)).unwrap(),
            std::fs::read(other.path().join(&r.path)).unwrap()
        );
    }
}

#[test]
fn default_dataset_shape() {
    let config = DatasetConfig::default();
    let d = config.descriptors();
    assert_eq!(d.len(), 750);
    let mut ids: Vec<&str> = d.iter().map(|e| e.id.as_str()).collect();
    ids.dedup();
    assert_eq!(ids.len(), 750);
    let mut seeds: Vec<u64> = d.iter().map(|e| e.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    assert_eq!(seeds.len(), 750);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn records_are_finite_and_reproducible(
        class in 0usize..5,
        load in prop::sample::select(vec![0u32, 25, 50, 75, 100]),
        seed in any::<u64>(),
    ) {
        let class = ConditionClass::from_code(class).unwrap();
        let a = synth_signal(class, load, 0.2, 5000.0, seed).unwrap();
        let b = synth_signal(class, load, 0.2, 5000.0, seed).unwrap();
        prop_assert_eq!(&a.samples, &b.samples);
        prop_assert!(a.samples.iter().all(|v| v.is_finite()));
        let amp = fundamental_amplitude(class, load);
        let bound = amp * (1.0 + 0.01 + signature_components(class, load).iter().map(|c| c.rel_amplitude).sum::<f64>()) + amp * 0.02 * 6.0;
        prop_assert!(a.samples.iter().all(|v| v.abs() < bound));
    }

    #[test]
    fn record_seeds_are_distinct(master in any::<u64>(), i in 0u32..1000, j in 0u32..1000) {
        prop_assume!(i != j);
        let c = ConditionClass::OuterBearingFault;
        prop_assert_ne!(record_seed(master, c, 50, i), record_seed(master, c, 50, j));
        prop_assert_ne!(record_seed(master, c, 50, i), record_seed(master, c, 75, i));
    }
}

#[test]
fn line_frequency_is_sixty() {
    assert_eq!(LINE_FREQ_HZ, 60.0);
}
