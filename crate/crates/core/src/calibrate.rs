//! Temperature scaling and the confidence gate.
//!
//! Probabilities are `softmax(z / T)`. `T` is fit on validation logits by
//! minimising mean negative log-likelihood, which only changes how confident
//! the topic classifier is, never which topic it picks. The gate then either
//! answers directly or asks the user to confirm up to four ranked topics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textmodel::Logits;

/// Probability floor inside [`nll`].
pub const PROB_FLOOR: f64 = 1e-12;
pub const DEFAULT_THRESHOLD: f64 = 0.9;
pub const MAX_CONFIRMATIONS: usize = 4;

const GRID_MIN: f64 = 0.05;
const GRID_MAX: f64 = 20.0;
const GRID_POINTS: usize = 200;
const GOLDEN_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Temperature(f64);

impl Temperature {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 {
            Ok(Self(value))
        } else {
            Err(Error::InvalidTemperature(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for Temperature {
    fn default() -> Self {
        Self(1.0)
    }
}

impl TryFrom<f64> for Temperature {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<Temperature> for f64 {
    fn from(t: Temperature) -> f64 {
        t.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedPrediction {
    pub probs: Vec<f64>,
    pub labels: Vec<String>,
    /// Label indices by descending probability, ties to the lower index.
    pub ranked: Vec<usize>,
    pub top_confidence: f64,
}

impl CalibratedPrediction {
    /// Builds the ranking for an explicit probability vector.
    pub fn from_probs(probs: Vec<f64>, labels: Vec<String>) -> Self {
        let mut ranked: Vec<usize> = (0..probs.len()).collect();
        ranked.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
        let top_confidence = ranked.first().map_or(0.0, |&i| probs[i]);
        Self { probs, labels, ranked, top_confidence }
    }

    pub fn top_label(&self) -> &str {
        &self.labels[self.ranked[0]]
    }

    pub fn prob_of(&self, label: &str) -> Option<f64> {
        self.labels.iter().position(|l| l == label).map(|i| self.probs[i])
    }
}

/// `probs_i = exp(z_i / T) / sum_j exp(z_j / T)` with the maximum
/// subtracted before exponentiating.
pub fn softmax_with_temperature(logits: &Logits, temperature: Temperature) -> CalibratedPrediction {
    let t = temperature.value();
    let max = logits.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.values.iter().map(|z| ((z - max) / t).exp()).collect();
    let total: f64 = exps.iter().sum();
    let probs = exps.into_iter().map(|e| e / total).collect();
    CalibratedPrediction::from_probs(probs, logits.labels.clone())
}

/// Mean of `-ln p(gold)` with probabilities floored at [`PROB_FLOOR`].
pub fn nll<S: AsRef<str>>(predictions: &[CalibratedPrediction], gold: &[S]) -> Result<f64> {
    if predictions.len() != gold.len() {
        return Err(Error::InvalidConfig(format!("{} predictions but {} gold labels", predictions.len(), gold.len())));
    }
    if predictions.is_empty() {
        return Err(Error::EmptyInput("nll needs at least one prediction"));
    }
    let mut total = 0.0;
    for (pred, label) in predictions.iter().zip(gold) {
        let p = pred.prob_of(label.as_ref()).ok_or_else(|| Error::UnknownLabel(label.as_ref().to_string()))?;
        total -= p.max(PROB_FLOOR).ln();
    }
    Ok(total / predictions.len() as f64)
}

/// NLL of the validation set at temperature `t`.
pub fn nll_at<S: AsRef<str>>(logits: &[Logits], gold: &[S], t: Temperature) -> Result<f64> {
    let preds: Vec<CalibratedPrediction> = logits.iter().map(|z| softmax_with_temperature(z, t)).collect();
    nll(&preds, gold)
}

/// Log-spaced grid over `[0.05, 20]` (200 points), then golden-section search
/// around the best grid point until the bracket is narrower than `1e-4`.
/// Never returns a temperature worse than `T = 1`.
pub fn fit_temperature<S: AsRef<str>>(logits: &[Logits], gold: &[S]) -> Result<Temperature> {
    if logits.is_empty() {
        return Err(Error::EmptyInput("temperature fit needs a validation set"));
    }
    let eval = |t: f64| nll_at(logits, gold, Temperature(t));

    let step = (GRID_MAX / GRID_MIN).ln() / (GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..GRID_POINTS).map(|i| (GRID_MIN.ln() + step * i as f64).exp()).collect();
    let mut best_i = 0;
    let mut best = f64::INFINITY;
    for (i, &t) in grid.iter().enumerate() {
        let v = eval(t)?;
        if v < best {
            best = v;
            best_i = i;
        }
    }
    let mut best_t = grid[best_i];

    let (mut lo, mut hi) = (grid[best_i.saturating_sub(1)], grid[(best_i + 1).min(GRID_POINTS - 1)]);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (eval(x1)?, eval(x2)?);
    while hi - lo >= GOLDEN_TOL {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = eval(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = eval(x2)?;
        }
    }
    for (t, v) in [(x1, f1), (x2, f2), (1.0, eval(1.0)?)] {
        if v < best {
            best = v;
            best_t = t;
        }
    }
    Temperature::new(best_t)
}

/// What the dialog does with a topic prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GateDecision {
    Direct { topic: String },
    Confirm { candidates: Vec<String> },
}

/// Answer directly when the top probability is strictly above `threshold`,
/// otherwise confirm the top `min(4, #labels)` topics in rank order.
pub fn gate(prediction: &CalibratedPrediction, threshold: f64) -> Result<GateDecision> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidThreshold(threshold));
    }
    if prediction.top_confidence > threshold {
        Ok(GateDecision::Direct { topic: prediction.top_label().to_string() })
    } else {
        let candidates =
            prediction.ranked.iter().take(MAX_CONFIRMATIONS).map(|&i| prediction.labels[i].clone()).collect();
        Ok(GateDecision::Confirm { candidates })
    }
}

/// Calibration summary written by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    #[serde(rename = "T")]
    pub temperature: f64,
    pub nll_before: f64,
    pub nll_after: f64,
    pub accuracy: f64,
}

/// Fits `T` on `(logits, gold)` and reports NLL at `T = 1` and at the fit.
pub fn calibrate<S: AsRef<str>>(logits: &[Logits], gold: &[S]) -> Result<CalibrationReport> {
    let t = fit_temperature(logits, gold)?;
    let nll_before = nll_at(logits, gold, Temperature::default())?;
    let nll_after = nll_at(logits, gold, t)?;
    let correct = logits.iter().zip(gold).filter(|(z, g)| z.top_label() == g.as_ref()).count();
    Ok(CalibrationReport {
        temperature: t.value(),
        nll_before,
        nll_after,
        accuracy: correct as f64 / logits.len() as f64,
    })
}
