use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wavediag::cnn::TrainConfig;
use wavediag::eval::{
    accuracy_table, confusion_matrix, run_cv, stratified_holdout, stratified_kfold, CvConfig,
    EvalReport, TABLE_HEADER,
};
use wavediag::raster::TfrImage;
use wavediag::signal::ConditionClass;

fn labels_strategy() -> impl Strategy<Value = (Vec<usize>, usize)> {
    (2usize..8).prop_flat_map(|k| {
        prop::collection::vec(k..(4 * k + 3), 5).prop_map(move |counts| {
            let mut labels = Vec::new();
            for (c, &n) in counts.iter().enumerate() {
                labels.extend(std::iter::repeat_n(c, n));
            }
            (labels, k)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn folds_are_balanced_per_class((labels, k) in labels_strategy(), seed in any::<u64>()) {
        let plan = stratified_kfold(&labels, k, seed).unwrap();
        prop_assert_eq!(plan.assignments.len(), labels.len());
        prop_assert!(plan.assignments.iter().all(|&f| f < k));
        for class in 0..5 {
            let n = labels.iter().filter(|&&l| l == class).count();
            for fold in 0..k {
                let c = plan.fold_members(fold).into_iter().filter(|&i| labels[i] == class).count();
                prop_assert!(c == n / k || c == n.div_ceil(k));
            }
        }
        let mut seen = vec![0; labels.len()];
        for fold in 0..k {
            for i in plan.fold_members(fold) {
                seen[i] += 1;
            }
            prop_assert_eq!(plan.fold_members(fold).len() + plan.complement(fold).len(), labels.len());
        }
        prop_assert!(seen.iter().all(|&s| s == 1));
        prop_assert_eq!(stratified_kfold(&labels, k, seed).unwrap(), plan);
    }

    #[test]
    fn holdout_partitions_the_pool((labels, _) in labels_strategy(), seed in any::<u64>(), f in 0.05..0.45f64) {
        let pool: Vec<usize> = (0..labels.len()).step_by(2).collect();
        let (fit, val) = stratified_holdout(&labels, &pool, f, seed);
        let mut all: Vec<usize> = fit.iter().chain(&val).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, pool);
        prop_assert!(!val.is_empty());
    }

    #[test]
    fn confusion_trace_matches_accuracy(
        pairs in prop::collection::vec((0usize..5, 0usize..5), 1..200)
    ) {
        let truth: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let pred: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let c = confusion_matrix(&truth, &pred).unwrap();
        let total: u64 = c.iter().flatten().sum();
        prop_assert_eq!(total as usize, pairs.len());
        for class in 0..5 {
            prop_assert_eq!(c[class].iter().sum::<u64>() as usize, truth.iter().filter(|&&t| t == class).count());
        }
        let acc = pairs.iter().filter(|p| p.0 == p.1).count() as f64 / pairs.len() as f64;
        let report = EvalReport::from_folds("wt-morse", vec![acc], c).unwrap();
        prop_assert!((report.pooled_accuracy() - acc).abs() < 1e-12);
        prop_assert!(report.min <= report.q1 && report.q1 <= report.median);
        prop_assert!(report.median <= report.q3 && report.q3 <= report.max);
    }
}

#[test]
fn reference_fold_counts() {
    for (per_class, expect) in [(150usize, vec![15usize]), (30, vec![3]), (31, vec![3, 4])] {
        let labels: Vec<usize> = (0..5).flat_map(|c| std::iter::repeat_n(c, per_class)).collect();
        let plan = stratified_kfold(&labels, 10, 77).unwrap();
        for class in 0..5 {
            let counts: Vec<usize> = (0..10)
                .map(|f| plan.fold_members(f).iter().filter(|&&i| labels[i] == class).count())
                .collect();
            assert!(counts.iter().all(|c| expect.contains(c)));
            if per_class == 31 {
                assert_eq!(counts.iter().filter(|&&c| c == 4).count(), 1);
            }
        }
    }
    let mut labels: Vec<usize> = (0..5).flat_map(|c| std::iter::repeat_n(c, 10)).collect();
    labels.truncate(45);
    let err = stratified_kfold(&labels, 10, 0).unwrap_err().to_string();
    assert!(err.contains("class 4"), "{err}");
}

/// Small images whose class is written into a bright row band.
fn toy_images(per_class: usize, seed: u64) -> Vec<TfrImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for class in ConditionClass::ALL {
        for i in 0..per_class {
            let band = class.code() * 6;
            let mut pixels = Vec::with_capacity(3072);
            for r in 0..32 {
                for _ in 0..96 {
                    let base: i32 = if (band..band + 6).contains(&r) { 180 } else { 60 };
                    pixels.push((base + rng.random_range(-40..40)) as u8);
                }
            }
            out.push(TfrImage::new(pixels, class, format!("{class}-{i:02}")).unwrap());
        }
    }
    out
}

fn small_train() -> TrainConfig {
    TrainConfig {
        epochs: 4,
        batch_size: 8,
        seed: 3,
        ..TrainConfig::default()
    }
}

fn small_cv() -> CvConfig {
    CvConfig {
        k: 3,
        fold_seed: 5,
        val_fraction: 0.2,
        leak_test_into_train: false,
    }
}

#[test]
fn cross_validation_is_deterministic_across_pools_and_orderings() {
    let images = toy_images(6, 1);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| run_cv(&images, "wt-amor", &small_train(), &small_cv())).unwrap();
    let mut reversed = images.clone();
    reversed.reverse();
    let b = four.install(|| run_cv(&reversed, "wt-amor", &small_train(), &small_cv())).unwrap();
    assert_eq!(a.report.to_json().unwrap(), b.report.to_json().unwrap());
    for (x, y) in a.folds.iter().zip(&b.folds) {
        assert_eq!(x.history, y.history);
        assert_eq!(x.model.params(), y.model.params());
    }
    let r = &a.report;
    assert_eq!(r.per_fold_accuracy.len(), 3);
    assert_eq!(r.confusion.iter().flatten().sum::<u64>(), 30);
    for row in r.confusion {
        assert_eq!(row.iter().sum::<u64>(), 6);
    }
    assert_eq!(EvalReport::from_json(&r.to_json().unwrap()).unwrap(), *r);
}

#[test]
fn leaky_split_scores_at_least_the_final_training_accuracy() {
    let images = toy_images(6, 2);
    let cv = CvConfig {
        leak_test_into_train: true,
        ..small_cv()
    };
    let train = TrainConfig {
        epochs: 15,
        early_stop_patience: 15,
        ..small_train()
    };
    let out = run_cv(&images, "wt-amor", &train, &cv).unwrap();
    for fold in &out.folds {
        let last = fold.history.last().unwrap();
        assert!(
            fold.test_accuracy >= last.train_acc,
            "fold {}: {} < {}",
            fold.fold,
            fold.test_accuracy,
            last.train_acc
        );
    }
}

#[test]
fn table_is_sorted_by_mean() {
    let mut c = [[0u64; 5]; 5];
    for (i, row) in c.iter_mut().enumerate() {
        row[i] = 3;
    }
    let lo = EvalReport::from_folds("wsst-bump", vec![0.5, 0.7], c).unwrap();
    let hi = EvalReport::from_folds("wt-morse", vec![0.9, 1.0], c).unwrap();
    let table = accuracy_table(&[lo, hi]);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], TABLE_HEADER);
    assert!(lines[1].starts_with("wt-morse,Wavelet Morse,"));
    assert!(lines[1].ends_with(",93.73"));
    assert!(lines[2].starts_with("wsst-bump,"));
}
