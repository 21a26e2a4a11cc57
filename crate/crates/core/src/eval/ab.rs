//! Paired comparison of two ranker configurations.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bvt::{run_bvts, BvtCase};
use super::metrics::{Judgments, MetricResult};
use super::replay::{graded_eval, sgcr_replay, GradedMetric};
use crate::combiner::RankerConfig;
use crate::corpus::QueryRecord;
use crate::engine::Engine;
use crate::error::{Error, Result};

pub const DEFAULT_RESAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    /// mean(b - a)
    pub delta: f64,
    pub p_value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub resamples: usize,
}

/// Two-sided paired bootstrap on per-query differences `b - a`.
///
/// The p-value is the fraction of resampled mean differences at least as far
/// from the observed mean as the observed mean is from zero.
pub fn paired_bootstrap(a: &[f64], b: &[f64], resamples: usize, seed: u64) -> Result<BootstrapResult> {
    if a.len() != b.len() {
        return Err(Error::Evaluation(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::Evaluation("no paired queries to compare".into()));
    }
    let n = a.len();
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let delta = diffs.iter().sum::<f64>() / n as f64;
    let resamples = resamples.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means = Vec::with_capacity(resamples);
    let mut extreme = 0usize;
    for _ in 0..resamples {
        let mut s = 0.0;
        for _ in 0..n {
            s += diffs[rng.random_range(0..n)];
        }
        let m = s / n as f64;
        if (m - delta).abs() >= delta.abs() {
            extreme += 1;
        }
        means.push(m);
    }
    means.sort_by(f64::total_cmp);
    let q = |p: f64| means[((p * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    Ok(BootstrapResult {
        delta,
        p_value: extreme as f64 / resamples as f64,
        ci_low: q(0.025),
        ci_high: q(0.975),
        resamples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "metric", content = "k", rename_all = "snake_case")]
pub enum Metric {
    Sgcr(usize),
    Ndcg(usize),
    Err(usize),
}

impl std::str::FromStr for Metric {
    type Err = String;

    /// `sgcr@10`, `ndcg@5`, `err@10`
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (name, k) = s.split_once('@').unwrap_or((s, "10"));
        let k: usize = k.parse().map_err(|_| format!("bad cutoff in `{s}`"))?;
        match name {
            "sgcr" => Ok(Metric::Sgcr(k)),
            "ndcg" => Ok(Metric::Ndcg(k)),
            "err" => Ok(Metric::Err(k)),
            _ => Err(format!("unknown metric `{name}` (expected sgcr, ndcg, err)")),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Metric::Sgcr(k) => write!(f, "sgcr@{k}"),
            Metric::Ndcg(k) => write!(f, "ndcg@{k}"),
            Metric::Err(k) => write!(f, "err@{k}"),
        }
    }
}

pub fn evaluate(
    metric: Metric,
    engine: &Engine,
    config: &RankerConfig,
    log: &[QueryRecord],
    judgments: &Judgments,
) -> Result<MetricResult> {
    match metric {
        Metric::Sgcr(k) => sgcr_replay(log, engine, config, k),
        Metric::Ndcg(k) => graded_eval(judgments, engine, config, GradedMetric::Ndcg, k),
        Metric::Err(k) => graded_eval(judgments, engine, config, GradedMetric::Err, k),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub metric: String,
    pub a: f64,
    pub b: f64,
    pub queries: usize,
    pub bootstrap: BootstrapResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbReport {
    pub config_a: String,
    pub config_b: String,
    pub metrics: Vec<MetricDelta>,
    /// intent tag -> (pass rate A, pass rate B, delta)
    pub bvt: BTreeMap<String, (f64, f64, f64)>,
}

/// Pairs per-query values of two results by query id, in A's order.
pub fn pair_values(a: &MetricResult, b: &MetricResult) -> (Vec<f64>, Vec<f64>) {
    let bmap: BTreeMap<&str, f64> = b.per_query.iter().map(|(q, v)| (q.as_str(), *v)).collect();
    a.per_query
        .iter()
        .filter_map(|(q, va)| bmap.get(q.as_str()).map(|vb| (*va, *vb)))
        .unzip()
}

#[allow(clippy::too_many_arguments)]
pub fn ab_compare(
    engine: &Engine,
    config_a: &RankerConfig,
    config_b: &RankerConfig,
    log: &[QueryRecord],
    judgments: &Judgments,
    suite: &[BvtCase],
    metrics: &[Metric],
    resamples: usize,
    seed: u64,
) -> Result<AbReport> {
    let mut out = Vec::new();
    for m in metrics {
        let ra = evaluate(*m, engine, config_a, log, judgments)?;
        let rb = evaluate(*m, engine, config_b, log, judgments)?;
        let (va, vb) = pair_values(&ra, &rb);
        let bootstrap = paired_bootstrap(&va, &vb, resamples, seed)?;
        out.push(MetricDelta {
            metric: m.to_string(),
            a: ra.value,
            b: rb.value,
            queries: va.len(),
            bootstrap,
        });
    }
    let mut bvt = BTreeMap::new();
    if !suite.is_empty() {
        let (ba, bb) = (run_bvts(suite, engine, config_a), run_bvts(suite, engine, config_b));
        let tags: std::collections::BTreeSet<&String> = ba.by_intent.keys().chain(bb.by_intent.keys()).collect();
        for t in tags {
            let pa = ba.intent_pass_rate(t).unwrap_or(0.0);
            let pb = bb.intent_pass_rate(t).unwrap_or(0.0);
            bvt.insert(t.clone(), (pa, pb, pb - pa));
        }
    }
    Ok(AbReport {
        config_a: config_a.fingerprint(),
        config_b: config_b.fingerprint(),
        metrics: out,
        bvt,
    })
}
