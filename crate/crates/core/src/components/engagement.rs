//! Logistic engagement model and its gradient-descent trainer.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::signals::SharedSignals;
use super::Scorer;
use crate::context::QueryContext;
use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::records::Record;

pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngagementModel {
    pub features: Vec<String>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl Default for EngagementModel {
    fn default() -> Self {
        Self::zeros(default_features())
    }
}

pub fn default_features() -> Vec<String> {
    [
        "bm25_squashed",
        "proximity",
        "title_hit_ratio",
        "hist_ctr",
        "good_click_rate",
        "doc_good_click_ratio",
        "quality",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

impl Record for EngagementModel {
    const KIND: &'static str = "engagement model";
    const FIELDS: &'static [&'static str] = &["features", "weights", "bias"];

    fn record_id(&self) -> String {
        "model".into()
    }

    fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        if self.features.len() != self.weights.len() {
            return Err((
                "weights",
                format!(
                    "{} weights for {} features",
                    self.weights.len(),
                    self.features.len()
                ),
            ));
        }
        if !self.bias.is_finite() || self.weights.iter().any(|w| !w.is_finite()) {
            return Err(("weights", "must be finite".into()));
        }
        Ok(())
    }
}

impl EngagementModel {
    pub fn zeros(features: Vec<String>) -> Self {
        let n = features.len();
        Self {
            features,
            weights: vec![0.0; n],
            bias: 0.0,
        }
    }

    pub fn check(&self) -> Result<()> {
        self.validate()
            .map_err(|(field, m)| Error::Config(format!("engagement model {field}: {m}")))
    }

    /// Feature names the shared signals cannot provide; they evaluate to 0.
    pub fn unknown_features(&self) -> Vec<&str> {
        self.features
            .iter()
            .filter(|f| !SharedSignals::is_known_feature(f))
            .map(|s| s.as_str())
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        logistic(self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
    }

    /// Feature vector for one candidate; missing features are 0.
    pub fn featurize(&self, doc: &Document, s: &SharedSignals) -> Vec<f64> {
        self.features
            .iter()
            .map(|f| s.feature(f, doc).unwrap_or(0.0))
            .collect()
    }
}

impl Scorer for EngagementModel {
    fn kind(&self) -> &'static str {
        "engagement"
    }

    fn score(&self, _ctx: &QueryContext<'_>, doc: &Document, s: &SharedSignals) -> f64 {
        self.predict(&self.featurize(doc, s))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainParams {
    pub iterations: usize,
    pub learning_rate: f64,
    pub l2: f64,
    /// 0 means full batch.
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            iterations: 500,
            learning_rate: 0.5,
            l2: 1e-4,
            batch_size: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub x: Vec<f64>,
    pub label: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub examples: usize,
    pub positives: usize,
    pub iterations: usize,
    pub final_loss: f64,
    pub auc: f64,
}

/// Mean log-loss plus `l2/2 * |w|^2`, and its gradient as `(d_weights, d_bias)`.
pub fn loss_and_gradient(
    model: &EngagementModel,
    batch: &[&Example],
    l2: f64,
) -> (f64, Vec<f64>, f64) {
    let n = batch.len().max(1) as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; model.weights.len()];
    let mut gb = 0.0;
    for ex in batch {
        let z = model.bias + model.weights.iter().zip(&ex.x).map(|(w, v)| w * v).sum::<f64>();
        let y = if ex.label { 1.0 } else { 0.0 };
        // log(1 + e^z) - y z, computed stably
        loss += z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z;
        let err = logistic(z) - y;
        for (g, v) in gw.iter_mut().zip(&ex.x) {
            *g += err * v;
        }
        gb += err;
    }
    loss /= n;
    gb /= n;
    for (g, w) in gw.iter_mut().zip(&model.weights) {
        *g = *g / n + l2 * w;
    }
    loss += 0.5 * l2 * model.weights.iter().map(|w| w * w).sum::<f64>();
    (loss, gw, gb)
}

/// Area under the ROC curve; tied scores count one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let (mut rank_sum, mut pos) = (0.0, 0usize);
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            if labels[k] {
                rank_sum += avg_rank;
                pos += 1;
            }
        }
        i = j + 1;
    }
    let neg = scores.len() - pos;
    if pos == 0 || neg == 0 {
        return 0.5;
    }
    (rank_sum - (pos * (pos + 1)) as f64 / 2.0) / (pos as f64 * neg as f64)
}

/// Gradient descent on log-loss from `initial`. Zero iterations returns `initial` unchanged.
pub fn train(
    initial: EngagementModel,
    examples: &[Example],
    params: &TrainParams,
) -> Result<(EngagementModel, TrainReport)> {
    initial.check()?;
    if examples.is_empty() {
        return Err(Error::Training("no training examples".into()));
    }
    if let Some(bad) = examples.iter().find(|e| e.x.len() != initial.features.len()) {
        return Err(Error::Training(format!(
            "example has {} features, model expects {}",
            bad.x.len(),
            initial.features.len()
        )));
    }
    let positives = examples.iter().filter(|e| e.label).count();
    if positives == 0 || positives == examples.len() {
        let which = if positives == 0 { "negative" } else { "positive" };
        return Err(Error::Training(format!(
            "all {} examples are {which}; the log needs both good-clicked and unclicked impressions",
            examples.len()
        )));
    }
    let mut model = initial;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<&Example> = examples.iter().collect();
    let batch = if params.batch_size == 0 {
        order.len()
    } else {
        params.batch_size.min(order.len())
    };
    for _ in 0..params.iterations {
        if batch < order.len() {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(batch) {
            let (_, gw, gb) = loss_and_gradient(&model, chunk, params.l2);
            for (w, g) in model.weights.iter_mut().zip(gw) {
                *w -= params.learning_rate * g;
            }
            model.bias -= params.learning_rate * gb;
        }
    }
    let all: Vec<&Example> = examples.iter().collect();
    let (final_loss, _, _) = loss_and_gradient(&model, &all, params.l2);
    let scores: Vec<f64> = examples.iter().map(|e| model.predict(&e.x)).collect();
    let labels: Vec<bool> = examples.iter().map(|e| e.label).collect();
    let report = TrainReport {
        examples: examples.len(),
        positives,
        iterations: params.iterations,
        final_loss,
        auc: auc(&scores, &labels),
    };
    Ok((model, report))
}
