//! Motor phase-current records: a seeded MCSA surrogate generator, the
//! on-disk dataset layout, and plain-text ingestion of real captures.
//!
//! All randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`), seeded
//! per record. Per-record seeds are `master_seed ^ splitmix64(key)` where
//! `key = class << 32 | load << 16 | index`.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Supply frequency of the surrogate motors.
pub const LINE_FREQ_HZ: f64 = 60.0;
/// Pole pairs of the surrogate motors.
pub const POLE_PAIRS: f64 = 2.0;
/// Load levels present in the dataset, in percent.
pub const LOAD_LEVELS: [u32; 5] = [0, 25, 50, 75, 100];

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConditionClass {
    Normal,
    BearingAxisMisalignment,
    StatorInterTurnShort,
    BrokenRotorBar,
    OuterBearingFault,
}

impl ConditionClass {
    pub const ALL: [ConditionClass; 5] = [
        ConditionClass::Normal,
        ConditionClass::BearingAxisMisalignment,
        ConditionClass::StatorInterTurnShort,
        ConditionClass::BrokenRotorBar,
        ConditionClass::OuterBearingFault,
    ];
    pub const COUNT: usize = 5;

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Result<Self> {
        Self::ALL
            .get(code)
            .copied()
            .ok_or_else(|| Error::invalid(format!("class code {code} not in 0..5")))
    }

    pub fn name(self) -> &'static str {
        match self {
            ConditionClass::Normal => "normal",
            ConditionClass::BearingAxisMisalignment => "bearing-axis-misalignment",
            ConditionClass::StatorInterTurnShort => "stator-inter-turn-short",
            ConditionClass::BrokenRotorBar => "broken-rotor-bar",
            ConditionClass::OuterBearingFault => "outer-bearing-fault",
        }
    }
}

impl fmt::Display for ConditionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn check_load(load_pct: u32) -> Result<()> {
    if LOAD_LEVELS.contains(&load_pct) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "load_pct {load_pct} not one of {LOAD_LEVELS:?}"
        )))
    }
}

/// One labeled single-phase current capture.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalRecord {
    pub id: String,
    /// Amperes.
    pub samples: Vec<f64>,
    pub sample_rate_hz: f64,
    pub class: ConditionClass,
    pub load_pct: u32,
    pub seed: u64,
}

impl SignalRecord {
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }
}

/// Slip as a function of load: 0.5 % unloaded rising to 3.5 % at full load.
pub fn slip(load_pct: u32) -> f64 {
    0.005 + 0.03 * load_pct as f64 / 100.0
}

/// Mechanical rotor frequency `(1 - s) f1 / p`.
pub fn rotor_freq_hz(load_pct: u32) -> f64 {
    (1.0 - slip(load_pct)) * LINE_FREQ_HZ / POLE_PAIRS
}

/// Outer-race ball-pass frequency of the surrogate bearing.
pub fn bpfo_hz(load_pct: u32) -> f64 {
    3.5 * rotor_freq_hz(load_pct)
}

/// A sinusoidal component relative to the fundamental amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component {
    pub freq_hz: f64,
    pub rel_amplitude: f64,
}

/// Spectral lines (besides the fundamental) that the generator places in a
/// record of the given class and load. Frequencies may be negative for
/// lower sidebands that fold through DC; their magnitude is what appears.
pub fn signature_components(class: ConditionClass, load_pct: u32) -> Vec<Component> {
    let f1 = LINE_FREQ_HZ;
    let s = slip(load_pct);
    let fr = rotor_freq_hz(load_pct);
    let fb = bpfo_hz(load_pct);
    let third = if class == ConditionClass::StatorInterTurnShort {
        0.08
    } else {
        0.005
    };
    let mut out = vec![
        Component {
            freq_hz: 3.0 * f1,
            rel_amplitude: third,
        },
        Component {
            freq_hz: 5.0 * f1,
            rel_amplitude: 0.003,
        },
    ];
    let pair = |df: f64, rel: f64| {
        [
            Component {
                freq_hz: f1 - df,
                rel_amplitude: rel,
            },
            Component {
                freq_hz: f1 + df,
                rel_amplitude: rel,
            },
        ]
    };
    match class {
        ConditionClass::Normal | ConditionClass::StatorInterTurnShort => {}
        ConditionClass::BrokenRotorBar => out.extend(pair(2.0 * s * f1, 0.05)),
        ConditionClass::BearingAxisMisalignment => out.extend(pair(fr, 0.04)),
        ConditionClass::OuterBearingFault => out.extend(pair(fb, 0.03)),
    }
    out
}

/// Fundamental amplitude in amperes.
pub fn fundamental_amplitude(class: ConditionClass, load_pct: u32) -> f64 {
    let a = 1.0 + 0.5 * load_pct as f64 / 100.0;
    if class == ConditionClass::StatorInterTurnShort {
        a * 1.02
    } else {
        a
    }
}

/// Generates one surrogate record. Identical arguments give bit-identical
/// samples.
pub fn synth_signal(
    class: ConditionClass,
    load_pct: u32,
    duration_s: f64,
    sample_rate_hz: f64,
    seed: u64,
) -> Result<SignalRecord> {
    check_load(load_pct)?;
    if !(duration_s > 0.0) || !duration_s.is_finite() {
        return Err(Error::invalid(format!("duration_s must be > 0, got {duration_s}")));
    }
    if !(sample_rate_hz >= 1000.0) || !sample_rate_hz.is_finite() {
        return Err(Error::invalid(format!(
            "sample_rate_hz must be >= 1000, got {sample_rate_hz}"
        )));
    }
    let n = (duration_s * sample_rate_hz).round() as usize;
    if n == 0 {
        return Err(Error::invalid("record would have no samples"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amp = fundamental_amplitude(class, load_pct);
    let noise_sigma = 0.02 * amp;
    let phase0 = rng.random::<f64>() * 2.0 * PI;
    let components: Vec<(Component, f64)> = signature_components(class, load_pct)
        .into_iter()
        .map(|c| (c, rng.random::<f64>() * 2.0 * PI))
        .collect();
    // 1 % amplitude modulation of the fundamental at the ball-pass frequency
    let am = (class == ConditionClass::OuterBearingFault)
        .then(|| (bpfo_hz(load_pct), rng.random::<f64>() * 2.0 * PI));

    let w1 = 2.0 * PI * LINE_FREQ_HZ;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / sample_rate_hz;
            let mut envelope = 1.0;
            if let Some((fb, ph)) = am {
                envelope += 0.01 * (2.0 * PI * fb * t + ph).cos();
            }
            let mut v = amp * envelope * (w1 * t + phase0).cos();
            for (c, ph) in &components {
                v += amp * c.rel_amplitude * (2.0 * PI * c.freq_hz * t + ph).cos();
            }
            let noise: f64 = rng.sample(StandardNormal);
            v + noise_sigma * noise
        })
        .collect();

    Ok(SignalRecord {
        id: record_id(class, load_pct, 0),
        samples,
        sample_rate_hz,
        class,
        load_pct,
        seed,
    })
}

/// The splitmix64 finalizer, used to derive independent seeds.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-record seed: `master_seed XOR splitmix64(class, load, index)`.
pub fn record_seed(master_seed: u64, class: ConditionClass, load_pct: u32, index: u32) -> u64 {
    let key = ((class.code() as u64) << 32) | ((load_pct as u64) << 16) | index as u64;
    master_seed ^ splitmix64(key)
}

pub fn record_id(class: ConditionClass, load_pct: u32, index: u32) -> String {
    format!("c{}_l{:03}_{:04}", class.code(), load_pct, index)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub records_per_cell: u32,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub master_seed: u64,
    pub load_levels: Vec<u32>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            records_per_cell: 30,
            duration_s: 1.0,
            sample_rate_hz: 10_000.0,
            master_seed: 20_240_601,
            load_levels: LOAD_LEVELS.to_vec(),
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.records_per_cell < 1 {
            return Err(Error::invalid("records_per_cell must be >= 1"));
        }
        if self.load_levels.is_empty() {
            return Err(Error::invalid("load_levels must not be empty"));
        }
        for (i, &l) in self.load_levels.iter().enumerate() {
            check_load(l)?;
            if self.load_levels[..i].contains(&l) {
                return Err(Error::invalid(format!("load level {l} listed twice")));
            }
        }
        if !(self.duration_s > 0.0) {
            return Err(Error::invalid("duration_s must be > 0"));
        }
        if !(self.sample_rate_hz >= 1000.0) {
            return Err(Error::invalid("sample_rate_hz must be >= 1000"));
        }
        Ok(())
    }

    /// Descriptors for every record, sorted by id (class-major, then load,
    /// then index).
    pub fn descriptors(&self) -> Vec<RecordEntry> {
        let mut loads = self.load_levels.clone();
        loads.sort_unstable();
        let mut out = Vec::new();
        for class in ConditionClass::ALL {
            for &load in &loads {
                for index in 0..self.records_per_cell {
                    let id = record_id(class, load, index);
                    out.push(RecordEntry {
                        path: format!("signals/{id}.txt"),
                        id,
                        class_code: class.code(),
                        load_pct: load,
                        seed: record_seed(self.master_seed, class, load, index),
                    });
                }
            }
        }
        out
    }

    pub fn synth(&self, entry: &RecordEntry) -> Result<SignalRecord> {
        let class = ConditionClass::from_code(entry.class_code)?;
        let mut rec = synth_signal(
            class,
            entry.load_pct,
            self.duration_s,
            self.sample_rate_hz,
            entry.seed,
        )?;
        rec.id = entry.id.clone();
        Ok(rec)
    }
}

/// One line of the manifest. Field order is the on-disk key order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordEntry {
    pub id: String,
    pub class_code: usize,
    pub load_pct: u32,
    pub seed: u64,
    /// Relative to the dataset directory.
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFile {
    schema_version: u32,
    duration_s: f64,
    sample_rate_hz: f64,
    records: Vec<RecordEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub records: Vec<RecordEntry>,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub records_per_cell: u32,
}

impl DatasetManifest {
    pub fn to_json(&self) -> Result<String> {
        let file = ManifestFile {
            schema_version: MANIFEST_SCHEMA_VERSION,
            duration_s: self.duration_s,
            sample_rate_hz: self.sample_rate_hz,
            records: self.records.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ManifestFile = serde_json::from_str(text)?;
        if file.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "manifest schema_version {} unsupported",
                file.schema_version
            )));
        }
        let mut cells = std::collections::BTreeMap::new();
        for r in &file.records {
            ConditionClass::from_code(r.class_code)?;
            check_load(r.load_pct)?;
            *cells.entry((r.class_code, r.load_pct)).or_insert(0u32) += 1;
        }
        let records_per_cell = cells.values().next().copied().unwrap_or(0);
        if cells.values().any(|&c| c != records_per_cell) {
            return Err(Error::Format("manifest is not balanced across cells".into()));
        }
        Ok(Self {
            records: file.records,
            duration_s: file.duration_s,
            sample_rate_hz: file.sample_rate_hz,
            records_per_cell,
        })
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_json(&text)
    }

    /// Records per (class, load) cell, keyed by class code then load.
    pub fn cell_counts(&self) -> std::collections::BTreeMap<(usize, u32), u32> {
        let mut cells = std::collections::BTreeMap::new();
        for r in &self.records {
            *cells.entry((r.class_code, r.load_pct)).or_insert(0) += 1;
        }
        cells
    }

    pub fn labels(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.class_code).collect()
    }
}

/// What [`build_dataset`] did on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuildOutcome {
    Written,
    /// An identical manifest and all signal files were already present.
    Reused,
}

/// Writes every signal file plus `manifest.json` under `out_dir`.
pub fn build_dataset(config: &DatasetConfig, out_dir: &Path) -> Result<(DatasetManifest, BuildOutcome)> {
    config.validate()?;
    let manifest = DatasetManifest {
        records: config.descriptors(),
        duration_s: config.duration_s,
        sample_rate_hz: config.sample_rate_hz,
        records_per_cell: config.records_per_cell,
    };
    let json = manifest.to_json()?;
    let manifest_path = out_dir.join(MANIFEST_FILE);

    let up_to_date = fs::read_to_string(&manifest_path).is_ok_and(|old| old == json)
        && manifest
            .records
            .iter()
            .all(|r| out_dir.join(&r.path).is_file());
    if up_to_date {
        return Ok((manifest, BuildOutcome::Reused));
    }

    let signal_dir = out_dir.join("signals");
    fs::create_dir_all(&signal_dir)
        .map_err(|e| Error::io(format!("creating {}", signal_dir.display()), e))?;

    use rayon::prelude::*;
    manifest.records.par_iter().try_for_each(|entry| {
        let rec = config.synth(entry)?;
        write_signal_file(&rec.samples, &out_dir.join(&entry.path))
    })?;

    fs::write(&manifest_path, json)
        .map_err(|e| Error::io(format!("writing {}", manifest_path.display()), e))?;
    Ok((manifest, BuildOutcome::Written))
}

/// One decimal float per line, LF newlines, shortest round-trip formatting.
pub fn write_signal_file(samples: &[f64], path: &Path) -> Result<()> {
    let file = fs::File::create(path)
        .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    let mut w = BufWriter::new(file);
    for v in samples {
        writeln!(w, "{v}").map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    }
    w.flush()
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn read_samples(path: &Path) -> Result<Vec<f64>> {
    let file = fs::File::open(path)
        .map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let mut samples = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let text = line.trim();
        let parse_err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg,
        };
        let v: f64 = text
            .parse()
            .map_err(|_| parse_err(format!("not a number: {text:?}")))?;
        if !v.is_finite() {
            return Err(parse_err(format!("non-finite value {text:?}")));
        }
        samples.push(v);
    }
    if samples.is_empty() {
        return Err(Error::Format(format!("{}: empty signal file", path.display())));
    }
    Ok(samples)
}

/// Reads a real capture: one current value (amperes) per line.
pub fn load_signal_csv(
    path: &Path,
    sample_rate_hz: f64,
    class: ConditionClass,
    load_pct: u32,
) -> Result<SignalRecord> {
    check_load(load_pct)?;
    if !(sample_rate_hz > 0.0) {
        return Err(Error::invalid("sample_rate_hz must be positive"));
    }
    let samples = read_samples(path)?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(SignalRecord {
        id,
        samples,
        sample_rate_hz,
        class,
        load_pct,
        seed: 0,
    })
}

/// Loads a record listed in a manifest rooted at `dataset_dir`.
pub fn load_manifest_record(
    manifest: &DatasetManifest,
    entry: &RecordEntry,
    dataset_dir: &Path,
) -> Result<SignalRecord> {
    let path: PathBuf = dataset_dir.join(&entry.path);
    let mut rec = load_signal_csv(
        &path,
        manifest.sample_rate_hz,
        ConditionClass::from_code(entry.class_code)?,
        entry.load_pct,
    )?;
    rec.id = entry.id.clone();
    rec.seed = entry.seed;
    Ok(rec)
}
