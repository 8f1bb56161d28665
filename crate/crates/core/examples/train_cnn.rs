//! Train the CNN on WT-Morse images of a small surrogate dataset, holding
//! out one record in five for testing.

use wavediag::cnn::{predict, write_history_csv, CnnModel, ImageSet, TrainConfig, Trainer};
use wavediag::eval::{confusion_matrix, stratified_holdout};
use wavediag::pipeline::{render_image, TransformCode, TransformParams};
use wavediag::signal::DatasetConfig;

fn main() -> wavediag::Result<()> {
    let data = DatasetConfig {
        records_per_cell: 4,
        load_levels: vec![50, 75, 100],
        ..DatasetConfig::default()
    };
    let params = TransformParams::default();
    let mut images = Vec::new();
    for entry in data.descriptors() {
        let rec = data.synth(&entry)?;
        images.push(render_image(&rec, TransformCode::WtMorse, &params)?);
    }
    let set = ImageSet::from_images(images.iter());
    let all: Vec<usize> = (0..set.len()).collect();
    let (train_idx, test_idx) = stratified_holdout(&set.labels, &all, 0.2, 1);
    let (fit_idx, val_idx) = stratified_holdout(&set.labels, &train_idx, 0.15, 2);

    let mut model = CnnModel::new_default(3)?;
    println!("{} parameters", model.param_count());
    let config = TrainConfig {
        epochs: 25,
        batch_size: 16,
        ..TrainConfig::default()
    };
    let history = Trainer::new(config)?.fit(&mut model, &set.subset(&fit_idx), &set.subset(&val_idx))?;
    for h in &history {
        println!(
            "epoch {:>2}  train acc {:.3} loss {:.3}  val acc {:.3} loss {:.3}",
            h.epoch, h.train_acc, h.train_loss, h.val_acc, h.val_loss
        );
    }
    let history_path = std::env::temp_dir().join("wavediag-history.csv");
    write_history_csv(&history, &history_path)?;

    let test = set.subset(&test_idx);
    let pred = predict(&model, &test)?;
    let confusion = confusion_matrix(&test.labels, &pred.classes)?;
    let correct: u64 = (0..5).map(|i| confusion[i][i]).sum();
    println!("test accuracy {}/{}", correct, test.len());
    for row in confusion {
        println!("  {row:?}");
    }
    println!("history in {}", history_path.display());
    Ok(())
}
