//! Strict JSON pipeline configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cnn::TrainConfig;
use crate::error::{Error, Result};
use crate::eval::CvConfig;
use crate::pipeline::{TransformCode, TransformParams};
use crate::raster::DEFAULT_FLOOR_DB;
use crate::signal::{DatasetConfig, LOAD_LEVELS};
use crate::wavelet::WaveletSpec;

pub const RESULTS_ENV: &str = "WAVEDIAG_RESULTS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub records_per_cell: u32,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub master_seed: u64,
    pub load_levels: Vec<u32>,
    pub out_dir: PathBuf,
}

impl Default for DatasetSection {
    fn default() -> Self {
        let d = DatasetConfig::default();
        Self {
            records_per_cell: d.records_per_cell,
            duration_s: d.duration_s,
            sample_rate_hz: d.sample_rate_hz,
            master_seed: d.master_seed,
            load_levels: LOAD_LEVELS.to_vec(),
            out_dir: PathBuf::from("data"),
        }
    }
}

impl DatasetSection {
    pub fn dataset_config(&self) -> DatasetConfig {
        DatasetConfig {
            records_per_cell: self.records_per_cell,
            duration_s: self.duration_s,
            sample_rate_hz: self.sample_rate_hz,
            master_seed: self.master_seed,
            load_levels: self.load_levels.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransformSection {
    pub families: Vec<TransformCode>,
    pub voices_per_octave: u32,
    pub min_freq_hz: f64,
    pub floor_db: f64,
    pub wsst_epsilon: f64,
    pub wsst_bins: Option<usize>,
    pub amor: WaveletSpec,
    pub bump: WaveletSpec,
    pub morse: WaveletSpec,
}

impl Default for TransformSection {
    fn default() -> Self {
        let p = TransformParams::default();
        Self {
            families: TransformCode::ALL.to_vec(),
            voices_per_octave: p.voices_per_octave,
            min_freq_hz: p.min_freq_hz,
            floor_db: DEFAULT_FLOOR_DB,
            wsst_epsilon: p.wsst_epsilon,
            wsst_bins: p.wsst_bins,
            amor: p.amor,
            bump: p.bump,
            morse: p.morse,
        }
    }
}

impl TransformSection {
    pub fn params(&self) -> TransformParams {
        TransformParams {
            voices_per_octave: self.voices_per_octave,
            min_freq_hz: self.min_freq_hz,
            floor_db: self.floor_db,
            wsst_epsilon: self.wsst_epsilon,
            wsst_bins: self.wsst_bins,
            amor: self.amor,
            bump: self.bump,
            morse: self.morse,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub k: usize,
    pub fold_seed: u64,
    pub val_fraction: f64,
    pub leak_test_into_train: bool,
    pub results_dir: PathBuf,
}

impl Default for EvalSection {
    fn default() -> Self {
        let cv = CvConfig::default();
        Self {
            k: cv.k,
            fold_seed: cv.fold_seed,
            val_fraction: cv.val_fraction,
            leak_test_into_train: cv.leak_test_into_train,
            results_dir: PathBuf::from("results"),
        }
    }
}

impl EvalSection {
    pub fn cv_config(&self) -> CvConfig {
        CvConfig {
            k: self.k,
            fold_seed: self.fold_seed,
            val_fraction: self.val_fraction,
            leak_test_into_train: self.leak_test_into_train,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset: DatasetSection,
    pub transform: TransformSection,
    pub train: TrainConfig,
    pub eval: EvalSection,
}

fn field_error(field: &str, e: Error) -> Error {
    Error::InvalidArgument(format!("{field}: {e}"))
}

impl PipelineConfig {
    /// Parses and validates. Relative directories are kept as written.
    pub fn from_json_str(text: &str, origin: &str) -> Result<Self> {
        let cfg: PipelineConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.into(),
            line: e.line(),
            msg: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`; relative `out_dir` and `results_dir` resolve against
    /// the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
        let mut cfg = Self::from_json_str(&text, &path.display().to_string())?;
        let base = path.parent().unwrap_or(Path::new("."));
        if cfg.dataset.out_dir.is_relative() {
            cfg.dataset.out_dir = base.join(&cfg.dataset.out_dir);
        }
        if cfg.eval.results_dir.is_relative() {
            cfg.eval.results_dir = base.join(&cfg.eval.results_dir);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset
            .dataset_config()
            .validate()
            .map_err(|e| field_error("dataset", e))?;
        if self.transform.families.is_empty() {
            return Err(Error::invalid("transform.families must not be empty"));
        }
        self.transform
            .params()
            .validate()
            .map_err(|e| field_error("transform", e))?;
        self.train.validate().map_err(|e| field_error("train", e))?;
        if self.eval.k < 2 {
            return Err(Error::invalid("eval.k must be >= 2"));
        }
        if !(self.eval.val_fraction > 0.0 && self.eval.val_fraction < 0.5) {
            return Err(Error::invalid("eval.val_fraction must lie in (0, 0.5)"));
        }
        if self.dataset.records_per_cell as usize * self.dataset.load_levels.len() < self.eval.k {
            return Err(Error::invalid(
                "eval.k exceeds the number of records per class",
            ));
        }
        Ok(())
    }

    /// `results_dir`, unless overridden by the `WAVEDIAG_RESULTS` variable.
    pub fn results_dir(&self) -> PathBuf {
        match std::env::var_os(RESULTS_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => self.eval.results_dir.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}
