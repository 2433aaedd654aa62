//! Text features and linear classification heads.
//!
//! The mode router and both topic classifiers share this code: a text
//! encoder produces a sparse vector, a linear layer produces logits, and
//! training is full-batch gradient descent on mean cross-entropy with an L2
//! penalty on the weights.

use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenize::tokenize;

/// Sparse vector with strictly increasing indices below `dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub dim: usize,
    pub entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn zero(dim: usize) -> Self {
        Self { dim, entries: Vec::new() }
    }

    /// Builds from unordered pairs, summing duplicates and dropping zeros.
    pub fn from_pairs(dim: usize, pairs: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, v) in pairs {
            assert!(i < dim, "index {i} out of range for dimension {dim}");
            *acc.entry(i).or_default() += v;
        }
        Self { dim, entries: acc.into_iter().filter(|(_, v)| *v != 0.0).collect() }
    }

    pub fn from_dense(values: &[f64]) -> Self {
        Self::from_pairs(values.len(), values.iter().copied().enumerate())
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| v * dense[i]).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { dim: self.dim, entries: self.entries.iter().map(|&(i, v)| (i, v * factor)).collect() }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        out
    }
}

/// Maps text to a fixed-dimension feature vector.
pub trait Encoder {
    fn dim(&self) -> usize;
    fn encode(&self, text: &str) -> SparseVector;
}

/// Tf-idf encoder over a pruned vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Featurizer {
    pub vocabulary: BTreeMap<String, usize>,
    pub idf: Vec<f64>,
    pub min_df: usize,
}

/// Keeps tokens seen in at least `min_df` documents; `idf(t) =
/// ln((1 + N) / (1 + df(t))) + 1`. Indices follow lexicographic token order.
pub fn fit_featurizer<S: AsRef<str>>(texts: &[S], min_df: usize) -> Result<Featurizer> {
    if texts.is_empty() {
        return Err(Error::EmptyInput("featurizer needs at least one text"));
    }
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for text in texts {
        let unique: HashSet<String> = tokenize(text.as_ref()).into_iter().collect();
        for token in unique {
            *df.entry(token).or_default() += 1;
        }
    }
    let n = texts.len() as f64;
    let mut vocabulary = BTreeMap::new();
    let mut idf = Vec::new();
    for (token, count) in df.into_iter().filter(|(_, c)| *c >= min_df) {
        vocabulary.insert(token, idf.len());
        idf.push(((1.0 + n) / (1.0 + count as f64)).ln() + 1.0);
    }
    Ok(Featurizer { vocabulary, idf, min_df })
}

impl Featurizer {
    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.vocabulary.get(token).copied()
    }
}

impl Encoder for Featurizer {
    fn dim(&self) -> usize {
        self.idf.len()
    }

    /// Term count times idf, L2-normalised. Out-of-vocabulary tokens are
    /// ignored, so an all-OOV text maps to the zero vector.
    fn encode(&self, text: &str) -> SparseVector {
        let pairs = tokenize(text).into_iter().filter_map(|t| self.index_of(&t)).map(|i| (i, self.idf[i]));
        let raw = SparseVector::from_pairs(self.dim(), pairs);
        let norm = raw.norm();
        if norm == 0.0 {
            raw
        } else {
            raw.scaled(1.0 / norm)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Logits {
    pub values: Vec<f64>,
    pub labels: Vec<String>,
}

impl Logits {
    /// Index of the largest value; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.values)
    }

    pub fn top_label(&self) -> &str {
        &self.labels[self.argmax()]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * factor).collect(), labels: self.labels.clone() }
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 0.5, epochs: 300, l2: 1e-4, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be positive".into()));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return Err(Error::InvalidConfig(format!("l2 must be non-negative, got {}", self.l2)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: SparseVector,
    pub label: usize,
}

/// Encoded examples with label indices into `labels`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    labels: Vec<String>,
    dim: usize,
    examples: Vec<Example>,
}

impl Dataset {
    pub fn new(labels: Vec<String>, dim: usize, examples: Vec<Example>) -> Result<Self> {
        for ex in &examples {
            if ex.features.dim != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: ex.features.dim });
            }
            if ex.label >= labels.len() {
                return Err(Error::UnknownLabel(format!("#{}", ex.label)));
            }
        }
        Ok(Self { labels, dim, examples })
    }

    /// Encodes `items` with `encoder`. Labels are taken in sorted order
    /// unless an explicit order is given.
    pub fn encode(encoder: &impl Encoder, items: &[LabeledText], labels: Option<Vec<String>>) -> Result<Self> {
        let labels = labels.unwrap_or_else(|| {
            let mut l: Vec<String> = items.iter().map(|i| i.label.clone()).collect();
            l.sort();
            l.dedup();
            l
        });
        let examples = items
            .iter()
            .map(|item| {
                let label = labels
                    .iter()
                    .position(|l| *l == item.label)
                    .ok_or_else(|| Error::UnknownLabel(item.label.clone()))?;
                Ok(Example { features: encoder.encode(&item.text), label })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(labels, encoder.dim(), examples)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledText {
    pub text: String,
    pub label: String,
}

impl LabeledText {
    pub fn new(text: impl Into<String>, label: impl Into<String>) -> Self {
        Self { text: text.into(), label: label.into() }
    }
}

/// `weights[c]` is the row for `labels[c]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub labels: Vec<String>,
}

impl LinearClassifier {
    pub fn zeros(labels: Vec<String>, dim: usize) -> Self {
        Self { weights: vec![vec![0.0; dim]; labels.len()], bias: vec![0.0; labels.len()], labels }
    }

    pub fn dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn logits(&self, x: &SparseVector) -> Logits {
        let values = self.weights.iter().zip(&self.bias).map(|(row, b)| x.dot(row) + b).collect();
        Logits { values, labels: self.labels.clone() }
    }

    pub fn predict(&self, x: &SparseVector) -> usize {
        argmax(&self.logits(x).values)
    }
}

/// Gradient of the training objective, shaped like the classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

fn log_softmax(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = values.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
    values.iter().map(|v| v - log_sum).collect()
}

/// Mean cross-entropy plus `(l2 / 2) * ||W||^2`, and its gradient.
pub fn objective(model: &LinearClassifier, data: &Dataset, l2: f64) -> (f64, Gradient) {
    let classes = model.labels.len();
    let mut grad = Gradient { weights: vec![vec![0.0; model.dim()]; classes], bias: vec![0.0; classes] };
    let n = data.len().max(1) as f64;
    let mut loss = 0.0;
    for ex in data.examples() {
        let logp = log_softmax(&model.logits(&ex.features).values);
        loss -= logp[ex.label];
        for (c, lp) in logp.iter().enumerate() {
            let delta = (lp.exp() - f64::from(u8::from(c == ex.label))) / n;
            grad.bias[c] += delta;
            for &(i, v) in &ex.features.entries {
                grad.weights[c][i] += delta * v;
            }
        }
    }
    loss /= n;
    let mut penalty = 0.0;
    for (g_row, w_row) in grad.weights.iter_mut().zip(&model.weights) {
        for (g, w) in g_row.iter_mut().zip(w_row) {
            penalty += w * w;
            *g += l2 * w;
        }
    }
    (loss + 0.5 * l2 * penalty, grad)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub classifier: LinearClassifier,
    pub initial_loss: f64,
    pub final_loss: f64,
}

/// Full-batch gradient descent for `config.epochs` steps from a small
/// seeded random initialisation.
pub fn train_classifier(data: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let distinct: HashSet<usize> = data.examples().iter().map(|e| e.label).collect();
    if distinct.len() < 2 || data.labels().len() < 2 {
        return Err(Error::SingleClass);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = LinearClassifier::zeros(data.labels().to_vec(), data.dim());
    for row in &mut model.weights {
        for w in row.iter_mut() {
            *w = rng.random_range(-0.01..0.01);
        }
    }
    let (initial_loss, mut grad) = objective(&model, data, config.l2);
    for epoch in 0..config.epochs {
        if epoch > 0 {
            grad = objective(&model, data, config.l2).1;
        }
        for (w_row, g_row) in model.weights.iter_mut().zip(&grad.weights) {
            for (w, g) in w_row.iter_mut().zip(g_row) {
                *w -= config.learning_rate * g;
            }
        }
        for (b, g) in model.bias.iter_mut().zip(&grad.bias) {
            *b -= config.learning_rate * g;
        }
    }
    let (final_loss, _) = objective(&model, data, config.l2);
    Ok(TrainOutcome { classifier: model, initial_loss, final_loss })
}

/// `z = W * encode(text) + b`, labels in classifier order.
pub fn predict_logits(classifier: &LinearClassifier, encoder: &impl Encoder, text: &str) -> Logits {
    classifier.logits(&encoder.encode(text))
}

/// Fraction of items whose argmax label equals the gold label.
pub fn evaluate_accuracy(classifier: &LinearClassifier, encoder: &impl Encoder, items: &[LabeledText]) -> Result<f64> {
    if items.is_empty() {
        return Err(Error::EmptyInput("accuracy needs at least one example"));
    }
    let correct =
        items.iter().filter(|item| predict_logits(classifier, encoder, &item.text).top_label() == item.label).count();
    Ok(correct as f64 / items.len() as f64)
}

/// Accuracy over an already encoded dataset.
pub fn dataset_accuracy(classifier: &LinearClassifier, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyInput("accuracy needs at least one example"));
    }
    let correct = data
        .examples()
        .iter()
        .filter(|ex| classifier.labels[classifier.predict(&ex.features)] == data.labels()[ex.label])
        .count();
    Ok(correct as f64 / data.len() as f64)
}

/// Featurizer, linear head and the config it was trained with: the
/// persisted model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextClassifier {
    pub featurizer: Featurizer,
    #[serde(flatten)]
    pub head: LinearClassifier,
    pub config: TrainConfig,
}

impl TextClassifier {
    pub fn logits(&self, text: &str) -> Logits {
        predict_logits(&self.head, &self.featurizer, text)
    }

    pub fn labels(&self) -> &[String] {
        &self.head.labels
    }

    pub fn accuracy(&self, items: &[LabeledText]) -> Result<f64> {
        evaluate_accuracy(&self.head, &self.featurizer, items)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub train_accuracy: f64,
}

/// Fits the featurizer on the training texts, then the linear head. Labels
/// default to the sorted distinct labels of `items`.
pub fn fit_text_classifier(
    items: &[LabeledText],
    labels: Option<Vec<String>>,
    min_df: usize,
    config: &TrainConfig,
) -> Result<(TextClassifier, FitReport)> {
    let texts: Vec<&str> = items.iter().map(|i| i.text.as_str()).collect();
    let featurizer = fit_featurizer(&texts, min_df)?;
    let data = Dataset::encode(&featurizer, items, labels)?;
    let outcome = train_classifier(&data, config)?;
    let train_accuracy = dataset_accuracy(&outcome.classifier, &data)?;
    let report = FitReport { initial_loss: outcome.initial_loss, final_loss: outcome.final_loss, train_accuracy };
    Ok((TextClassifier { featurizer, head: outcome.classifier, config: *config }, report))
}
