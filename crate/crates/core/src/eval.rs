//! Stratified k-fold cross-validation and the reports built from it.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cnn::{predict, CnnModel, EpochStats, ImageSet, TrainConfig, Trainer};
use crate::error::{Error, Result};
use crate::pipeline::TransformCode;
use crate::raster::TfrImage;
use crate::signal::ConditionClass;
use crate::signal::splitmix64;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
const N_CLASSES: usize = ConditionClass::COUNT;

/// Fold index per record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn fold_members(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn complement(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }
}

fn indices_by_class(labels: &[usize]) -> BTreeMap<usize, Vec<usize>> {
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    by_class
}

/// Per class (ascending code): shuffle member indices with ChaCha8 seeded by
/// `seed`, then deal them round-robin starting at fold 0.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::invalid(format!("k must be >= 2, got {k}")));
    }
    let by_class = indices_by_class(labels);
    if let Some((class, members)) = by_class.iter().find(|(_, m)| m.len() < k) {
        return Err(Error::invalid(format!(
            "class {class} has {} members, fewer than k = {k}",
            members.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = vec![0; labels.len()];
    for members in by_class.values() {
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng);
        for (j, idx) in shuffled.into_iter().enumerate() {
            assignments[idx] = j % k;
        }
    }
    Ok(FoldPlan {
        k,
        assignments,
        seed,
    })
}

/// Splits `pool` (indices into `labels`) into train/validation, holding out
/// `round(fraction * n)` members of each class (at least one when the class
/// has two or more members).
pub fn stratified_holdout(
    labels: &[usize],
    pool: &[usize],
    fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &i in pool {
        by_class.entry(labels[i]).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for members in by_class.values() {
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng);
        let n = shuffled.len();
        let n_val = if n < 2 {
            0
        } else {
            ((fraction * n as f64).round() as usize).clamp(1, n - 1)
        };
        val.extend_from_slice(&shuffled[..n_val]);
        train.extend_from_slice(&shuffled[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

pub type Confusion = [[u64; N_CLASSES]; N_CLASSES];

/// Rows are true classes, columns predicted classes.
pub fn confusion_matrix(truth: &[usize], predicted: &[usize]) -> Result<Confusion> {
    if truth.len() != predicted.len() {
        return Err(Error::Shape(format!(
            "{} true labels vs {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let mut m = [[0u64; N_CLASSES]; N_CLASSES];
    for (&t, &p) in truth.iter().zip(predicted) {
        if t >= N_CLASSES || p >= N_CLASSES {
            return Err(Error::invalid(format!("class code out of range: {t} / {p}")));
        }
        m[t][p] += 1;
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxplotStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Quartiles by linear interpolation at position `p (n - 1)` of the sorted
/// values (the inclusive method).
pub fn boxplot_stats(values: &[f64]) -> Result<BoxplotStats> {
    if values.is_empty() {
        return Err(Error::invalid("box-plot statistics need at least one value"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    Ok(BoxplotStats {
        min: v[0],
        q1: q(0.25),
        median: q(0.5),
        q3: q(0.75),
        max: v[v.len() - 1],
    })
}

/// Cross-validation summary for one transform. Field order is the JSON key
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    pub schema_version: u32,
    pub transform_code: String,
    pub per_fold_accuracy: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation over folds.
    pub std: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub confusion: Confusion,
    pub per_class_accuracy: Vec<f64>,
}

impl EvalReport {
    pub fn from_folds(transform_code: &str, per_fold_accuracy: Vec<f64>, confusion: Confusion) -> Result<Self> {
        let stats = boxplot_stats(&per_fold_accuracy)?;
        let n = per_fold_accuracy.len() as f64;
        let mean = per_fold_accuracy.iter().sum::<f64>() / n;
        let var = per_fold_accuracy.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
        let per_class_accuracy = confusion
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let total: u64 = row.iter().sum();
                if total == 0 {
                    0.0
                } else {
                    row[i] as f64 / total as f64
                }
            })
            .collect();
        Ok(Self {
            schema_version: REPORT_SCHEMA_VERSION,
            transform_code: transform_code.to_string(),
            per_fold_accuracy,
            mean,
            std: var.sqrt(),
            min: stats.min,
            q1: stats.q1,
            median: stats.median,
            q3: stats.q3,
            max: stats.max,
            confusion,
            per_class_accuracy,
        })
    }

    /// `trace / total` of the aggregated confusion matrix.
    pub fn pooled_accuracy(&self) -> f64 {
        let total: u64 = self.confusion.iter().flatten().sum();
        let trace: u64 = (0..N_CLASSES).map(|i| self.confusion[i][i]).sum();
        trace as f64 / total as f64
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub const TABLE_HEADER: &str = "code,method,mean,std,min,q1,median,q3,max,published_accuracy_pct";

/// One accuracy-table row for this report.
pub fn table_row(report: &EvalReport) -> String {
    let (method, published) = match TransformCode::parse(&report.transform_code) {
        Ok(code) => (code.method_name().to_string(), format!("{:.2}", code.published_accuracy_pct())),
        Err(_) => (report.transform_code.clone(), String::new()),
    };
    format!(
        "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
        report.transform_code,
        method,
        report.mean,
        report.std,
        report.min,
        report.q1,
        report.median,
        report.q3,
        report.max,
        published
    )
}

/// Accuracy table over several transforms, best mean accuracy first.
pub fn accuracy_table(reports: &[EvalReport]) -> String {
    let mut sorted: Vec<&EvalReport> = reports.iter().collect();
    sorted.sort_by(|a, b| {
        b.mean
            .total_cmp(&a.mean)
            .then_with(|| a.transform_code.cmp(&b.transform_code))
    });
    let mut out = String::from(TABLE_HEADER);
    out.push('\n');
    for r in sorted {
        out.push_str(&table_row(r));
        out.push('\n');
    }
    out
}

/// Text grid of each confusion matrix with row percentages.
pub fn render_confusion(report: &EvalReport) -> String {
    let abbrev = ["NOR", "BAM", "SIS", "BRB", "OBF"];
    let mut out = format!(
        "{} (pooled accuracy {:.2}%)\n true\\pred",
        report.transform_code,
        100.0 * report.pooled_accuracy()
    );
    for a in abbrev {
        out.push_str(&format!(" {a:>13}"));
    }
    out.push('\n');
    for (i, row) in report.confusion.iter().enumerate() {
        let total: u64 = row.iter().sum::<u64>().max(1);
        out.push_str(&format!(" {:>9}", abbrev[i]));
        for &c in row {
            out.push_str(&format!(" {:>5} ({:5.1}%)", c, 100.0 * c as f64 / total as f64));
        }
        out.push('\n');
    }
    out
}

/// Writes `report.json` and a single-row `row.csv` into `dir`.
pub fn emit_report(report: &EvalReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let json_path = dir.join("report.json");
    fs::write(&json_path, report.to_json()?)
        .map_err(|e| Error::io(format!("writing {}", json_path.display()), e))?;
    let csv_path = dir.join("row.csv");
    fs::write(&csv_path, format!("{TABLE_HEADER}\n{}\n", table_row(report)))
        .map_err(|e| Error::io(format!("writing {}", csv_path.display()), e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvConfig {
    pub k: usize,
    pub fold_seed: u64,
    /// Share of each training split held out for early stopping.
    #[serde(default = "default_val_fraction")]
    pub val_fraction: f64,
    /// Test on the fold's own training records (memorization check).
    #[serde(default)]
    pub leak_test_into_train: bool,
}

fn default_val_fraction() -> f64 {
    0.1
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            k: 10,
            fold_seed: 1234,
            val_fraction: default_val_fraction(),
            leak_test_into_train: false,
        }
    }
}

/// Trained model and curves for one fold.
#[derive(Debug, Clone)]
pub struct FoldResult {
    pub fold: usize,
    pub history: Vec<EpochStats>,
    pub model: CnnModel,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub report: EvalReport,
    pub folds: Vec<FoldResult>,
}

/// Runs k-fold CV over `images`. Fold assignment is keyed on records sorted
/// by `source_id`, so the input order does not matter. Folds train in
/// parallel on the current rayon pool; each fold is deterministic on its
/// own, so the outcome does not depend on the thread count.
pub fn run_cv(
    images: &[TfrImage],
    transform_code: &str,
    train: &TrainConfig,
    cv: &CvConfig,
) -> Result<CvOutcome> {
    train.validate()?;
    if images.is_empty() {
        return Err(Error::invalid("no images to cross-validate"));
    }
    let mut sorted: Vec<&TfrImage> = images.iter().collect();
    sorted.sort_by(|a, b| a.source_id.cmp(&b.source_id));
    let set = ImageSet::from_images(sorted.iter().copied());
    let plan = stratified_kfold(&set.labels, cv.k, cv.fold_seed)?;

    let folds: Vec<(FoldResult, Vec<usize>, Vec<usize>)> = (0..cv.k)
        .into_par_iter()
        .map(|fold| {
            let pool = plan.complement(fold);
            let fold_seed = splitmix64(train.seed ^ (fold as u64).wrapping_mul(0x9e37_79b9));
            let (fit_idx, val_idx) =
                stratified_holdout(&set.labels, &pool, cv.val_fraction, fold_seed);
            let test_idx = if cv.leak_test_into_train {
                fit_idx.clone()
            } else {
                plan.fold_members(fold)
            };
            let mut model = CnnModel::new_default(fold_seed)?;
            let fold_cfg = TrainConfig {
                seed: splitmix64(fold_seed),
                ..train.clone()
            };
            let history = Trainer::new(fold_cfg)?.fit(
                &mut model,
                &set.subset(&fit_idx),
                &set.subset(&val_idx),
            )?;
            let test = set.subset(&test_idx);
            let pred = predict(&model, &test)?;
            let correct = pred
                .classes
                .iter()
                .zip(&test.labels)
                .filter(|(p, t)| p == t)
                .count();
            Ok((
                FoldResult {
                    fold,
                    history,
                    model,
                    test_accuracy: correct as f64 / test.len() as f64,
                },
                test.labels,
                pred.classes,
            ))
        })
        .collect::<Result<_>>()?;

    let mut confusion = [[0u64; N_CLASSES]; N_CLASSES];
    let mut per_fold = Vec::with_capacity(cv.k);
    let mut results = Vec::with_capacity(cv.k);
    for (result, truth, pred) in folds {
        let c = confusion_matrix(&truth, &pred)?;
        for i in 0..N_CLASSES {
            for j in 0..N_CLASSES {
                confusion[i][j] += c[i][j];
            }
        }
        per_fold.push(result.test_accuracy);
        results.push(result);
    }
    Ok(CvOutcome {
        report: EvalReport::from_folds(transform_code, per_fold, confusion)?,
        folds: results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn balanced(per_class: usize) -> Vec<usize> {
        (0..N_CLASSES).flat_map(|c| std::iter::repeat_n(c, per_class)).collect()
    }

    fn fold_class_counts(plan: &FoldPlan, labels: &[usize]) -> Vec<[usize; N_CLASSES]> {
        let mut counts = vec![[0; N_CLASSES]; plan.k];
        for (i, &f) in plan.assignments.iter().enumerate() {
            counts[f][labels[i]] += 1;
        }
        counts
    }

    #[test]
    fn kfold_divisible_counts() {
        for (per_class, want) in [(150, 15), (30, 3)] {
            let labels = balanced(per_class);
            let plan = stratified_kfold(&labels, 10, 5).unwrap();
            for c in fold_class_counts(&plan, &labels) {
                assert_eq!(c, [want; N_CLASSES]);
            }
        }
    }

    #[test]
    fn kfold_remainder_goes_to_one_fold() {
        let labels = balanced(31);
        let plan = stratified_kfold(&labels, 10, 9).unwrap();
        let counts = fold_class_counts(&plan, &labels);
        for class in 0..N_CLASSES {
            let col: Vec<usize> = counts.iter().map(|c| c[class]).collect();
            assert!(col.iter().all(|&n| n == 3 || n == 4));
            assert_eq!(col.iter().filter(|&&n| n == 4).count(), 1);
        }
    }

    #[test]
    fn kfold_rejects_small_class() {
        let mut labels = balanced(10);
        labels.retain(|&l| l != 3);
        labels.extend([3; 9]);
        let err = stratified_kfold(&labels, 10, 0).unwrap_err();
        assert!(err.to_string().contains("class 3"), "{err}");
        assert!(stratified_kfold(&balanced(10), 1, 0).is_err());
    }

    #[test]
    fn holdout_is_stratified_and_disjoint() {
        let labels = balanced(27);
        let pool: Vec<usize> = (0..labels.len()).collect();
        let (train, val) = stratified_holdout(&labels, &pool, 0.1, 3);
        assert_eq!(train.len() + val.len(), labels.len());
        assert_eq!(val.len(), 5 * 3);
        assert!(val.iter().all(|v| !train.contains(v)));
    }

    #[test]
    fn confusion_cases() {
        let truth = [0, 1, 2, 3, 4, 4];
        let m = confusion_matrix(&truth, &truth).unwrap();
        for (i, row) in m.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let want = if i == j { truth.iter().filter(|&&t| t == i).count() as u64 } else { 0 };
                assert_eq!(v, want);
            }
        }
        let m = confusion_matrix(&truth, &[0; 6]).unwrap();
        assert!(m.iter().all(|row| row[1..].iter().all(|&v| v == 0)));
        assert!(confusion_matrix(&truth, &[0; 5]).is_err());
    }

    #[test]
    fn boxplot_cases() {
        let s = boxplot_stats(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!((s.q1, s.median, s.q3), (2.0, 3.0, 4.0));
        let s = boxplot_stats(&[0.7]).unwrap();
        assert_eq!([s.min, s.q1, s.median, s.q3, s.max], [0.7; 5]);
        let s = boxplot_stats(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((s.q1, s.median, s.q3), (1.75, 2.5, 3.25));
        assert!(boxplot_stats(&[]).is_err());
    }

    fn report(code: &str, acc: f64) -> EvalReport {
        let mut confusion = [[0u64; 5]; 5];
        for (i, row) in confusion.iter_mut().enumerate() {
            row[i] = 9;
            row[(i + 1) % 5] = 1;
        }
        EvalReport::from_folds(code, vec![acc; 10], confusion).unwrap()
    }

    #[test]
    fn report_json_round_trip_and_key_order() {
        let r = report("wt-morse", 0.9);
        let json = r.to_json().unwrap();
        let keys = [
            "schema_version", "transform_code", "per_fold_accuracy", "mean", "std", "min", "q1",
            "median", "q3", "max", "confusion", "per_class_accuracy",
        ];
        let positions: Vec<usize> = keys.iter().map(|k| json.find(&format!("\"{k}\"")).unwrap()).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(EvalReport::from_json(&json).unwrap(), r);
        assert!((r.pooled_accuracy() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn table_sorted_by_mean() {
        let reports: Vec<EvalReport> = [("wsst-amor", 0.5), ("wt-morse", 0.95), ("wt-amor", 0.9), ("wsst-bump", 0.6), ("wt-bump", 0.8)]
            .iter()
            .map(|&(c, a)| report(c, a))
            .collect();
        let table = accuracy_table(&reports);
        let codes: Vec<&str> = table.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(codes, ["wt-morse", "wt-amor", "wt-bump", "wsst-bump", "wsst-amor"]);
        assert!(table.lines().nth(1).unwrap().ends_with(",93.73"));
    }
}
