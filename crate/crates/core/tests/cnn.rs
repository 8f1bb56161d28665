use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wavediag::cnn::{
    decode_checkpoint, encode_checkpoint, evaluate, loss_softmax_ce, predict, read_checkpoint,
    softmax_rows, write_checkpoint, CnnModel, ImageSet, LayerSpec, Tensor, TrainConfig, Trainer,
};

fn tiny_model(seed: u64) -> CnnModel {
    use LayerSpec::*;
    CnnModel::new(
        (8, 8, 3),
        &[Conv { out_ch: 2 }, MaxPool, Flatten, Dense { outputs: 5 }],
        seed,
    )
    .unwrap()
}

fn random_batch(b: usize, dims: (usize, usize, usize), seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = b * dims.0 * dims.1 * dims.2;
    Tensor::from_vec(&[b, dims.0, dims.1, dims.2], (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn loss_of(model: &CnnModel, x: &Tensor, labels: &[usize]) -> f64 {
    let (logits, _) = model.forward(x).unwrap();
    loss_softmax_ce(&logits, labels).unwrap().0
}

#[test]
fn gradients_match_central_differences() {
    let mut model = tiny_model(11);
    let x = random_batch(2, (8, 8, 3), 5);
    let labels = [1, 4];
    let (logits, cache) = model.forward(&x).unwrap();
    let (_, dlogits) = loss_softmax_ce(&logits, &labels).unwrap();
    let grads = model.backward(&cache, &dlogits).unwrap();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for t in 0..grads.tensors.len() {
        for i in 0..grads.tensors[t].data.len() {
            let orig = model.params()[t].data[i];
            model.params_mut()[t].data[i] = orig + h;
            let up = loss_of(&model, &x, &labels);
            model.params_mut()[t].data[i] = orig - h;
            let down = loss_of(&model, &x, &labels);
            model.params_mut()[t].data[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads.tensors[t].data[i];
            let scale = analytic.abs().max(numeric.abs()).max(1e-7);
            worst = worst.max((analytic - numeric).abs() / scale);
        }
    }
    assert!(worst < 1e-6, "max relative error {worst:e}");
}

#[test]
fn backward_is_linear_in_dlogits() {
    let model = tiny_model(3);
    let x = random_batch(3, (8, 8, 3), 8);
    let (_, cache) = model.forward(&x).unwrap();
    let zero = model.backward(&cache, &Tensor::zeros(&[3, 5])).unwrap();
    assert!(zero.tensors.iter().all(|t| t.data.iter().all(|&v| v == 0.0)));
    let d = random_batch(3, (1, 1, 5), 2);
    let d = Tensor::from_vec(&[3, 5], d.data).unwrap();
    let mut d2 = d.clone();
    d2.scale(2.0);
    let g1 = model.backward(&cache, &d).unwrap();
    let g2 = model.backward(&cache, &d2).unwrap();
    for (a, b) in g1.tensors.iter().zip(&g2.tensors) {
        for (&u, &v) in a.data.iter().zip(&b.data) {
            assert!((2.0 * u - v).abs() <= 1e-12 * (1.0 + v.abs()));
        }
    }
}

#[test]
fn samples_in_a_batch_are_independent() {
    let model = CnnModel::new_default(4).unwrap();
    let x = random_batch(4, (32, 32, 3), 1);
    let (logits, _) = model.forward(&x).unwrap();
    let perm = [2, 0, 3, 1];
    let mut data = Vec::new();
    for &p in &perm {
        data.extend_from_slice(x.item(p));
    }
    let (permuted, _) = model.forward(&Tensor::from_vec(&x.shape, data).unwrap()).unwrap();
    for (i, &p) in perm.iter().enumerate() {
        assert_eq!(permuted.item(i), logits.item(p));
    }

    let one = x.item(0).to_vec();
    let same = Tensor::from_vec(&[3, 32, 32, 3], one.repeat(3)).unwrap();
    let (rows, _) = model.forward(&same).unwrap();
    assert_eq!(rows.item(0), rows.item(1));
    assert_eq!(rows.item(1), rows.item(2));
}

#[test]
fn zero_model_predicts_uniformly() {
    let mut model = CnnModel::new_default(1).unwrap();
    model.zero_params();
    let set = ImageSet::new((32, 32, 3), random_batch(2, (32, 32, 3), 3).data, vec![0, 1]).unwrap();
    let pred = predict(&model, &set).unwrap();
    assert_eq!(pred.classes, vec![0, 0]);
    for row in &pred.probabilities {
        assert!(row.iter().all(|&p| (p - 0.2).abs() < 1e-15));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_rows_normalize_and_ignore_shifts(
        rows in prop::collection::vec(prop::collection::vec(-30.0..30.0f64, 5), 1..6),
        shift in -100.0..100.0f64,
    ) {
        let b = rows.len();
        let logits = Tensor::from_vec(&[b, 5], rows.concat()).unwrap();
        let p = softmax_rows(&logits);
        let mut shifted = logits.clone();
        shifted.data.iter_mut().for_each(|v| *v += shift);
        let q = softmax_rows(&shifted);
        for i in 0..b {
            prop_assert!((p.item(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (a, c) in p.item(i).iter().zip(q.item(i)) {
                prop_assert!((a - c).abs() < 1e-12);
            }
        }
        let labels: Vec<usize> = (0..b).map(|i| i % 5).collect();
        let (_, d) = loss_softmax_ce(&logits, &labels).unwrap();
        for i in 0..b {
            prop_assert!(d.item(i).iter().sum::<f64>().abs() < 1e-12);
        }
    }
}

/// Two classes that differ only in which half of the image is bright.
fn toy_set(n: usize, seed: u64) -> ImageSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(n * 3072);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % 2;
        for r in 0..32 {
            let bright = (r < 16) == (label == 0);
            for _ in 0..96 {
                let base = if bright { 0.6 } else { 0.3 };
                inputs.push(base + rng.random_range(-0.25..0.25));
            }
        }
        labels.push(label);
    }
    ImageSet::new((32, 32, 3), inputs, labels).unwrap()
}

fn toy_config() -> TrainConfig {
    TrainConfig {
        epochs: 50,
        batch_size: 20,
        seed: 21,
        early_stop_patience: 50,
        ..TrainConfig::default()
    }
}

#[test]
fn separable_toy_set_is_learned() {
    let train = toy_set(100, 1);
    let val = toy_set(20, 2);
    let mut model = CnnModel::new_default(5).unwrap();
    let history = Trainer::new(toy_config()).unwrap().fit(&mut model, &train, &val).unwrap();
    assert!(history.len() <= 50);
    assert!(history.iter().any(|e| e.train_acc == 1.0));
    let (_, acc) = evaluate(&model, &train).unwrap();
    assert_eq!(acc, 1.0);
}

#[test]
fn training_is_reproducible() {
    let train = toy_set(40, 3);
    let val = toy_set(10, 4);
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 8,
        ..TrainConfig::default()
    };
    let run = || {
        let mut m = CnnModel::new_default(9).unwrap();
        let h = Trainer::new(cfg.clone()).unwrap().fit(&mut m, &train, &val).unwrap();
        (h, encode_checkpoint(&m))
    };
    let (h1, c1) = run();
    let (h2, c2) = run();
    assert_eq!(h1, h2);
    assert_eq!(c1, c2);
    assert!(Trainer::new(cfg.clone()).unwrap().fit(&mut CnnModel::new_default(9).unwrap(), &train, &toy_set(0, 0)).is_err());
    let big = TrainConfig { batch_size: 41, ..cfg };
    assert!(Trainer::new(big).unwrap().fit(&mut CnnModel::new_default(9).unwrap(), &train, &val).is_err());
}

#[test]
fn checkpoints_round_trip_bit_exactly() {
    let model = CnnModel::new_default(17).unwrap();
    let bytes = encode_checkpoint(&model);
    assert_eq!(&bytes[..4], b"WDNN");
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 8);
    let tensors = decode_checkpoint(&bytes).unwrap();
    assert_eq!(tensors.len(), 8);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.wdnn");
    write_checkpoint(&model, &path).unwrap();
    let back = read_checkpoint(&path, (32, 32, 3)).unwrap();
    assert_eq!(back.params(), model.params());
    assert_eq!(encode_checkpoint(&back), bytes);
    assert!(decode_checkpoint(&bytes[..bytes.len() - 1]).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(decode_checkpoint(&bad).is_err());
}
