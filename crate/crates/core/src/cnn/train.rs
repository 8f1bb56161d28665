use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CnnModel, Gradients, Tensor};
use crate::error::{Error, Result};
use crate::raster::TfrImage;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    /// beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub early_stop_patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 60,
            batch_size: 32,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            seed: 7,
            early_stop_patience: 8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.early_stop_patience == 0 {
            return Err(Error::invalid("epochs, batch_size and early_stop_patience must be positive"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        Ok(())
    }
}

/// Images flattened to `[0, 1]` floats with their class codes.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSet {
    pub dims: (usize, usize, usize),
    pub inputs: Vec<f64>,
    pub labels: Vec<usize>,
}

impl ImageSet {
    pub fn new(dims: (usize, usize, usize), inputs: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        if inputs.len() != labels.len() * dims.0 * dims.1 * dims.2 {
            return Err(Error::Shape(format!(
                "{} input values for {} images of {dims:?}",
                inputs.len(),
                labels.len()
            )));
        }
        Ok(Self { dims, inputs, labels })
    }

    /// Pixel bytes scaled by 1/255.
    pub fn from_images<'a>(images: impl IntoIterator<Item = &'a TfrImage>) -> Self {
        let mut inputs = Vec::new();
        let mut labels = Vec::new();
        for img in images {
            inputs.extend(img.pixels.iter().map(|&p| p as f64 / 255.0));
            labels.push(img.label.code());
        }
        Self {
            dims: (32, 32, 3),
            inputs,
            labels,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn item_len(&self) -> usize {
        self.dims.0 * self.dims.1 * self.dims.2
    }

    pub fn subset(&self, indices: &[usize]) -> ImageSet {
        let n = self.item_len();
        let mut inputs = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            inputs.extend_from_slice(&self.inputs[i * n..(i + 1) * n]);
        }
        ImageSet {
            dims: self.dims,
            inputs,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Batch tensor for the given rows plus their labels.
    pub fn batch(&self, indices: &[usize]) -> (Tensor, Vec<usize>) {
        let sub = self.subset(indices);
        let (h, w, c) = self.dims;
        let t = Tensor {
            shape: vec![indices.len(), h, w, c],
            data: sub.inputs,
        };
        (t, sub.labels)
    }
}

/// Mean softmax cross-entropy over the batch and its gradient w.r.t. the
/// logits (already divided by the batch size).
pub fn loss_softmax_ce(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let b = labels.len();
    if logits.shape.len() != 2 || logits.shape[0] != b {
        return Err(Error::Shape(format!(
            "logits {:?} vs {b} labels",
            logits.shape
        )));
    }
    let k = logits.shape[1];
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::invalid(format!("label {bad} outside 0..{k}")));
    }
    let probs = softmax_rows(logits);
    let mut grad = probs.clone();
    let mut loss = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        let row = logits.item(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
        loss += lse - row[label];
        grad.data[i * k + label] -= 1.0;
    }
    grad.scale(1.0 / b as f64);
    Ok((loss / b as f64, grad))
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &Tensor) -> Tensor {
    let k = logits.shape[1];
    let mut out = logits.clone();
    for row in out.data.chunks_mut(k) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub classes: Vec<usize>,
    pub probabilities: Vec<Vec<f64>>,
}

/// Argmax of the softmax per row; ties go to the lowest class code.
pub fn predict(model: &CnnModel, set: &ImageSet) -> Result<Prediction> {
    let mut classes = Vec::with_capacity(set.len());
    let mut probabilities = Vec::with_capacity(set.len());
    for chunk in (0..set.len()).collect::<Vec<_>>().chunks(64) {
        let (x, _) = set.batch(chunk);
        let (logits, _) = model.forward(&x)?;
        let probs = softmax_rows(&logits);
        let k = probs.shape[1];
        for row in probs.data.chunks(k) {
            classes.push(argmax_lowest(row));
            probabilities.push(row.to_vec());
        }
    }
    Ok(Prediction {
        classes,
        probabilities,
    })
}

pub(crate) fn argmax_lowest(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// One row of training history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_acc: f64,
    pub val_acc: f64,
    pub train_loss: f64,
    pub val_loss: f64,
}

pub fn write_history_csv(history: &[EpochStats], path: &Path) -> Result<()> {
    let mut out = String::from("epoch,train_acc,val_acc,train_loss,val_loss\n");
    for e in history {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            e.epoch, e.train_acc, e.val_acc, e.train_loss, e.val_loss
        ));
    }
    let mut f = fs::File::create(path)
        .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    f.write_all(out.as_bytes())
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Mean loss and accuracy over a whole set, forward pass only.
pub fn evaluate(model: &CnnModel, set: &ImageSet) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0usize;
    let idx: Vec<usize> = (0..set.len()).collect();
    for chunk in idx.chunks(64) {
        let (x, y) = set.batch(chunk);
        let (logits, _) = model.forward(&x)?;
        let (l, _) = loss_softmax_ce(&logits, &y)?;
        loss += l * chunk.len() as f64;
        let k = logits.shape[1];
        correct += logits
            .data
            .chunks(k)
            .zip(&y)
            .filter(|(row, &t)| argmax_lowest(row) == t)
            .count();
    }
    let n = set.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

enum OptimizerState {
    Sgd,
    Adam { m: Vec<Tensor>, v: Vec<Tensor>, t: i32 },
}

impl OptimizerState {
    fn new(kind: OptimizerKind, model: &CnnModel) -> Self {
        match kind {
            OptimizerKind::Sgd => OptimizerState::Sgd,
            OptimizerKind::Adam => {
                let zeros = model.zero_gradients().tensors;
                OptimizerState::Adam {
                    m: zeros.clone(),
                    v: zeros,
                    t: 0,
                }
            }
        }
    }

    fn step(&mut self, model: &mut CnnModel, grads: &Gradients, lr: f64) {
        match self {
            OptimizerState::Sgd => {
                for (p, g) in model.params_mut().into_iter().zip(&grads.tensors) {
                    for (w, &d) in p.data.iter_mut().zip(&g.data) {
                        *w -= lr * d;
                    }
                }
            }
            OptimizerState::Adam { m, v, t } => {
                *t += 1;
                let c1 = 1.0 - ADAM_BETA1.powi(*t);
                let c2 = 1.0 - ADAM_BETA2.powi(*t);
                for (((p, g), m), v) in model
                    .params_mut()
                    .into_iter()
                    .zip(&grads.tensors)
                    .zip(m.iter_mut())
                    .zip(v.iter_mut())
                {
                    for i in 0..p.data.len() {
                        let d = g.data[i];
                        m.data[i] = ADAM_BETA1 * m.data[i] + (1.0 - ADAM_BETA1) * d;
                        v.data[i] = ADAM_BETA2 * v.data[i] + (1.0 - ADAM_BETA2) * d * d;
                        let mh = m.data[i] / c1;
                        let vh = v.data[i] / c2;
                        p.data[i] -= lr * mh / (vh.sqrt() + ADAM_EPS);
                    }
                }
            }
        }
    }
}

/// Mini-batch training with early stopping on validation loss.
///
/// Batches follow a per-epoch shuffle drawn from ChaCha8 seeded with
/// `config.seed`. Training stops after `early_stop_patience` epochs without
/// a lower validation loss, and the best-validation parameters are restored.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: TrainConfig,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn fit(&self, model: &mut CnnModel, train: &ImageSet, val: &ImageSet) -> Result<Vec<EpochStats>> {
        let cfg = &self.config;
        if train.is_empty() || val.is_empty() {
            return Err(Error::invalid("training and validation splits must be nonempty"));
        }
        if cfg.batch_size > train.len() {
            return Err(Error::invalid(format!(
                "batch_size {} exceeds training set of {}",
                cfg.batch_size,
                train.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut opt = OptimizerState::new(cfg.optimizer, model);
        let mut order: Vec<usize> = (0..train.len()).collect();
        let mut history = Vec::new();
        let mut best: Option<(f64, Vec<Tensor>)> = None;
        let mut stale = 0;

        for epoch in 1..=cfg.epochs {
            order.shuffle(&mut rng);
            let mut loss_sum = 0.0;
            let mut correct = 0usize;
            for chunk in order.chunks(cfg.batch_size) {
                let (x, y) = train.batch(chunk);
                let (logits, cache) = model.forward(&x)?;
                let (loss, dlogits) = loss_softmax_ce(&logits, &y)?;
                loss_sum += loss * chunk.len() as f64;
                let k = logits.shape[1];
                correct += logits
                    .data
                    .chunks(k)
                    .zip(&y)
                    .filter(|(row, &t)| argmax_lowest(row) == t)
                    .count();
                let grads = model.backward(&cache, &dlogits)?;
                opt.step(model, &grads, cfg.learning_rate);
            }
            let (val_loss, val_acc) = evaluate(model, val)?;
            if !val_loss.is_finite() {
                return Err(Error::invalid(format!("validation loss diverged at epoch {epoch}")));
            }
            history.push(EpochStats {
                epoch,
                train_acc: correct as f64 / train.len() as f64,
                val_acc,
                train_loss: loss_sum / train.len() as f64,
                val_loss,
            });
            if best.as_ref().is_none_or(|(b, _)| val_loss < *b) {
                best = Some((val_loss, model.params().into_iter().cloned().collect()));
                stale = 0;
            } else {
                stale += 1;
                if stale >= cfg.early_stop_patience {
                    break;
                }
            }
        }
        if let Some((_, params)) = best {
            for (slot, p) in model.params_mut().into_iter().zip(params) {
                *slot = p;
            }
        }
        Ok(history)
    }
}
