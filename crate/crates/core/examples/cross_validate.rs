//! Stratified k-fold cross-validation for several transforms on a reduced
//! dataset, followed by the accuracy table and confusion grids.
//!
//! ```text
//! cargo run --release --example cross_validate -- [records_per_cell]
//! ```

use rayon::prelude::*;
use wavediag::cnn::TrainConfig;
use wavediag::eval::{accuracy_table, render_confusion, run_cv, CvConfig};
use wavediag::pipeline::{render_images, TransformCode, TransformParams};
use wavediag::signal::DatasetConfig;

fn main() -> wavediag::Result<()> {
    let per_cell: u32 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(6);
    let data = DatasetConfig {
        records_per_cell: per_cell,
        duration_s: 0.5,
        ..DatasetConfig::default()
    };
    let codes = [TransformCode::WtMorse, TransformCode::WtAmor, TransformCode::WsstAmor];
    let params = TransformParams::default();
    let rendered: Vec<_> = data
        .descriptors()
        .par_iter()
        .map(|entry| render_images(&data.synth(entry)?, &codes, &params))
        .collect::<wavediag::Result<_>>()?;

    let train = TrainConfig {
        epochs: 30,
        early_stop_patience: 6,
        ..TrainConfig::default()
    };
    let cv = CvConfig {
        k: 5,
        ..CvConfig::default()
    };
    let mut reports = Vec::new();
    for (i, code) in codes.iter().enumerate() {
        let images: Vec<_> = rendered.iter().map(|r| r[i].1.clone()).collect();
        let outcome = run_cv(&images, code.as_str(), &train, &cv)?;
        println!(
            "{code}: mean={:.3} std={:.3} folds {:?}",
            outcome.report.mean,
            outcome.report.std,
            outcome.report.per_fold_accuracy
        );
        reports.push(outcome.report);
    }
    println!("\n{}", accuracy_table(&reports));
    for r in &reports {
        println!("{}", render_confusion(r));
    }
    Ok(())
}
