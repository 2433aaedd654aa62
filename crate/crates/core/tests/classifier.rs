use avatarqa_core::bundle::{train_mode_classifier, BuildConfig, Corpora, Splits};
use avatarqa_core::textmodel::{
    dataset_accuracy, objective, train_classifier, Dataset, Example, LinearClassifier, SparseVector, TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn toy(rng: &mut ChaCha8Rng, classes: usize, dim: usize, n: usize) -> (LinearClassifier, Dataset) {
    let labels: Vec<String> = (0..classes).map(|c| format!("c{c}")).collect();
    let examples = (0..n)
        .map(|i| {
            let dense: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            Example { features: SparseVector::from_dense(&dense), label: i % classes }
        })
        .collect();
    let data = Dataset::new(labels.clone(), dim, examples).unwrap();
    let mut model = LinearClassifier::zeros(labels, dim);
    for row in &mut model.weights {
        for w in row.iter_mut() {
            *w = rng.random_range(-1.0..1.0);
        }
    }
    for b in &mut model.bias {
        *b = rng.random_range(-1.0..1.0);
    }
    (model, data)
}

/// Max-abs gap between the analytic gradient and central differences.
fn gradient_gap(model: &LinearClassifier, data: &Dataset, l2: f64) -> f64 {
    let h = 1e-5;
    let (_, grad) = objective(model, data, l2);
    let mut gap: f64 = 0.0;
    for c in 0..model.weights.len() {
        for i in 0..model.dim() {
            let mut plus = model.clone();
            plus.weights[c][i] += h;
            let mut minus = model.clone();
            minus.weights[c][i] -= h;
            let numeric = (objective(&plus, data, l2).0 - objective(&minus, data, l2).0) / (2.0 * h);
            gap = gap.max((numeric - grad.weights[c][i]).abs());
        }
        let mut plus = model.clone();
        plus.bias[c] += h;
        let mut minus = model.clone();
        minus.bias[c] -= h;
        let numeric = (objective(&plus, data, l2).0 - objective(&minus, data, l2).0) / (2.0 * h);
        gap = gap.max((numeric - grad.bias[c]).abs());
    }
    gap
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..20 {
        let (model, data) = toy(&mut rng, 3, 5, 12);
        let l2 = if trial % 2 == 0 { 0.0 } else { 0.1 };
        let gap = gradient_gap(&model, &data, l2);
        assert!(gap < 1e-4, "trial {trial}: gap {gap}");
    }
}

#[test]
fn training_never_raises_the_loss_and_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (_, data) = toy(&mut rng, 3, 5, 30);
    let config = TrainConfig { seed: 9, ..TrainConfig::default() };
    let a = train_classifier(&data, &config).unwrap();
    let b = train_classifier(&data, &config).unwrap();
    assert!(a.final_loss <= a.initial_loss);
    assert_eq!(a, b);
}

#[test]
fn separable_blobs_are_learned() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let centres = [[3.0, 0.0, 0.0], [0.0, 3.0, 0.0], [0.0, 0.0, 3.0]];
    let examples = (0..90)
        .map(|i| {
            let c = i % 3;
            let x: Vec<f64> = centres[c].iter().map(|m| m + rng.random_range(-0.5..0.5)).collect();
            Example { features: SparseVector::from_dense(&x), label: c }
        })
        .collect();
    let data = Dataset::new(vec!["a".into(), "b".into(), "c".into()], 3, examples).unwrap();
    let model = train_classifier(&data, &TrainConfig::default()).unwrap().classifier;
    assert_eq!(dataset_accuracy(&model, &data).unwrap(), 1.0);
}

#[test]
fn fixture_mode_classifier_separates_medical_from_the_rest() {
    let corpora = Corpora::builtin();
    let config = BuildConfig::default();
    let splits = Splits::new(&corpora, config.seed).unwrap();
    let (_, report) = train_mode_classifier(&splits, &config).unwrap();
    assert!(report.test_size >= 8);
    assert!(report.test_accuracy >= 0.95, "{report:?}");
}
