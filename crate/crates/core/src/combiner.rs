//! Final score assembly: generic components always contribute, intent-specific
//! components contribute in proportion to the probability of their intent.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::hash::Hasher;

use serde::{Deserialize, Serialize};

use crate::components::Registry;
use crate::error::{Error, Result};
use crate::intent::{IntentDistribution, FALLBACK_INTENT};

pub const DEFAULT_TRIGGER_THRESHOLD: f64 = 0.05;
pub const DEFAULT_K_FINAL: usize = 10;

fn default_threshold() -> f64 {
    DEFAULT_TRIGGER_THRESHOLD
}

fn default_k() -> usize {
    DEFAULT_K_FINAL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankerConfig {
    /// Component id -> w_c.
    #[serde(default)]
    pub generic_weights: BTreeMap<String, f64>,
    /// Intent id -> w_t.
    #[serde(default)]
    pub intent_weights: BTreeMap<String, f64>,
    #[serde(default = "default_threshold")]
    pub trigger_threshold: f64,
    #[serde(default = "default_k")]
    pub k_final: usize,
}

impl Default for RankerConfig {
    fn default() -> Self {
        Self {
            generic_weights: BTreeMap::new(),
            intent_weights: BTreeMap::new(),
            trigger_threshold: DEFAULT_TRIGGER_THRESHOLD,
            k_final: DEFAULT_K_FINAL,
        }
    }
}

impl RankerConfig {
    /// Weights as configured on the registry's components.
    pub fn from_registry(registry: &Registry) -> Self {
        let (generic_weights, intent_weights) = registry.weights();
        Self {
            generic_weights,
            intent_weights,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (k, w) in self.generic_weights.iter().chain(&self.intent_weights) {
            if !(w.is_finite() && *w >= 0.0) {
                return Err(Error::Config(format!("weight `{k}` must be finite and >= 0, got {w}")));
            }
        }
        if !(0.0..=1.0).contains(&self.trigger_threshold) {
            return Err(Error::Config(format!(
                "trigger_threshold must be in [0, 1], got {}",
                self.trigger_threshold
            )));
        }
        Ok(())
    }

    /// Checks the weights only reference registered components.
    pub fn check_against(&self, registry: &Registry) -> Result<()> {
        self.validate()?;
        for id in self.generic_weights.keys() {
            if !registry.generic().iter().any(|c| &c.id == id) {
                return Err(Error::Config(format!(
                    "generic weight references unregistered component `{id}`"
                )));
            }
        }
        for t in self.intent_weights.keys() {
            if registry.for_intent(t).is_none() {
                return Err(Error::Config(format!(
                    "intent weight references intent `{t}` which has no component"
                )));
            }
        }
        Ok(())
    }

    /// Stable hash of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut h = fnv::FnvHasher::default();
        h.write(json.as_bytes());
        format!("{:016x}", h.finish())
    }

    /// Reads a tunable value: `generic.<id>`, `intent.<id>` or `trigger_threshold`.
    pub fn get(&self, path: &str) -> Option<f64> {
        if path == "trigger_threshold" {
            return Some(self.trigger_threshold);
        }
        if let Some(id) = path.strip_prefix("generic.") {
            return self.generic_weights.get(id).copied();
        }
        if let Some(id) = path.strip_prefix("intent.") {
            return self.intent_weights.get(id).copied();
        }
        None
    }

    pub fn set(&mut self, path: &str, value: f64) -> Result<()> {
        let slot = if path == "trigger_threshold" {
            &mut self.trigger_threshold
        } else if let Some(id) = path.strip_prefix("generic.") {
            self.generic_weights.get_mut(id).ok_or_else(|| bad_path(path))?
        } else if let Some(id) = path.strip_prefix("intent.") {
            self.intent_weights.get_mut(id).ok_or_else(|| bad_path(path))?
        } else {
            return Err(bad_path(path));
        };
        *slot = value;
        Ok(())
    }

    /// Every weight multiplied by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Self {
        let mut c = self.clone();
        c.generic_weights.values_mut().for_each(|w| *w *= lambda);
        c.intent_weights.values_mut().for_each(|w| *w *= lambda);
        c
    }
}

fn bad_path(path: &str) -> Error {
    Error::Config(format!(
        "unknown weight path `{path}`; expected generic.<component>, intent.<intent> or trigger_threshold"
    ))
}

/// σ values of one candidate, independent of weights.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ComponentScores {
    /// (component id, σ_c) in registry order.
    pub generic: Vec<(String, f64)>,
    /// intent id -> (component id, σ_t).
    pub intent: BTreeMap<String, (String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenericTerm {
    pub component_id: String,
    pub sigma: f64,
    pub weight: f64,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentTerm {
    pub intent: String,
    pub probability: f64,
    pub component_id: String,
    pub sigma: f64,
    pub weight: f64,
    pub contribution: f64,
    /// P(t|q) was below the trigger threshold; the term contributes 0.
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTrace {
    pub doc_id: String,
    pub final_score: f64,
    pub quality: f64,
    pub generic: Vec<GenericTerm>,
    pub intent: Vec<IntentTerm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filtered: Option<String>,
}

impl ScoreTrace {
    pub fn filtered(doc_id: &str, quality: f64, reason: &str) -> Self {
        Self {
            doc_id: doc_id.into(),
            final_score: 0.0,
            quality,
            generic: Vec::new(),
            intent: Vec::new(),
            filtered: Some(reason.into()),
        }
    }

    /// Sum of all contributions in trace order.
    pub fn contribution_sum(&self) -> f64 {
        self.generic.iter().map(|t| t.contribution).sum::<f64>()
            + self.intent.iter().map(|t| t.contribution).sum::<f64>()
    }
}

/// Whether intent `t` with probability `p` passes the trigger threshold.
pub fn is_triggered(p: f64, threshold: f64) -> bool {
    p > 0.0 && p >= threshold
}

/// Intents that pass the threshold, excluding the fallback.
pub fn triggered_intents(intents: &IntentDistribution, threshold: f64) -> Vec<String> {
    intents
        .iter()
        .filter(|(t, p)| *t != FALLBACK_INTENT && is_triggered(*p, threshold))
        .map(|(t, _)| t.to_string())
        .collect()
}

/// `F = Σ_c w_c σ_c + Σ_t P(t|q) w_t σ_t` over triggered intents, with a full trace.
pub fn score_triggered(
    doc_id: &str,
    quality: f64,
    scores: &ComponentScores,
    intents: &IntentDistribution,
    config: &RankerConfig,
) -> ScoreTrace {
    let mut generic = Vec::with_capacity(scores.generic.len());
    for (id, sigma) in &scores.generic {
        let weight = config.generic_weights.get(id).copied().unwrap_or(0.0);
        generic.push(GenericTerm {
            component_id: id.clone(),
            sigma: *sigma,
            weight,
            contribution: weight * sigma,
        });
    }
    let mut intent = Vec::with_capacity(scores.intent.len());
    for (t, (id, sigma)) in &scores.intent {
        let p = intents.get(t);
        let weight = config.intent_weights.get(t).copied().unwrap_or(0.0);
        let fire = is_triggered(p, config.trigger_threshold);
        intent.push(IntentTerm {
            intent: t.clone(),
            probability: p,
            component_id: id.clone(),
            sigma: *sigma,
            weight,
            contribution: if fire { p * weight * sigma } else { 0.0 },
            skipped: !fire,
        });
    }
    let mut trace = ScoreTrace {
        doc_id: doc_id.into(),
        final_score: 0.0,
        quality,
        generic,
        intent,
        filtered: None,
    };
    trace.final_score = trace.contribution_sum();
    trace
}

/// `Σ_t P(t|q) (Σ_c w_c σ_c + w_t σ_t)` evaluated literally, without thresholding.
pub fn score_outer_sum(scores: &ComponentScores, intents: &IntentDistribution, config: &RankerConfig) -> f64 {
    let generic: f64 = scores
        .generic
        .iter()
        .map(|(id, s)| config.generic_weights.get(id).copied().unwrap_or(0.0) * s)
        .sum();
    intents
        .iter()
        .map(|(t, p)| {
            let specific = scores
                .intent
                .get(t)
                .map(|(_, s)| config.intent_weights.get(t).copied().unwrap_or(0.0) * s)
                .unwrap_or(0.0);
            p * (generic + specific)
        })
        .sum()
}

/// One candidate ready for combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub doc_id: String,
    pub quality: f64,
    pub policy_reject: bool,
    pub scores: ComponentScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedDoc {
    pub doc_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub query_id: String,
    pub fingerprint: String,
    pub intents: IntentDistribution,
    pub triggered: Vec<String>,
    /// Top `k_final` documents.
    pub results: Vec<RankedDoc>,
    /// Every scored candidate in rank order, then filtered ones by doc id.
    pub traces: Vec<ScoreTrace>,
}

impl RankedList {
    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.results.iter().map(|r| r.doc_id.as_str())
    }

    /// 1-based rank among all scored candidates, before truncation.
    pub fn full_rank(&self, doc_id: &str) -> Option<usize> {
        self.traces
            .iter()
            .filter(|t| t.filtered.is_none())
            .position(|t| t.doc_id == doc_id)
            .map(|p| p + 1)
    }

    pub fn trace(&self, doc_id: &str) -> Option<&ScoreTrace> {
        self.traces.iter().find(|t| t.doc_id == doc_id)
    }

    pub fn scored(&self) -> impl Iterator<Item = &ScoreTrace> {
        self.traces.iter().filter(|t| t.filtered.is_none())
    }
}

/// Score desc, then quality desc, then doc id asc.
pub fn trace_order(a: &ScoreTrace, b: &ScoreTrace) -> Ordering {
    b.final_score
        .total_cmp(&a.final_score)
        .then(b.quality.total_cmp(&a.quality))
        .then_with(|| a.doc_id.cmp(&b.doc_id))
}

/// Filters policy rejections, scores the rest with [`score_triggered`], sorts and truncates.
pub fn rank(
    query_id: &str,
    candidates: &[ScoredCandidate],
    intents: &IntentDistribution,
    config: &RankerConfig,
    registry: &Registry,
) -> Result<RankedList> {
    config.check_against(registry)?;
    Ok(rank_unchecked(query_id, candidates, intents, config))
}

/// [`rank`] without the configuration check, for callers that validated once up front.
pub fn rank_unchecked(
    query_id: &str,
    candidates: &[ScoredCandidate],
    intents: &IntentDistribution,
    config: &RankerConfig,
) -> RankedList {
    let mut scored = Vec::with_capacity(candidates.len());
    let mut filtered = Vec::new();
    for c in candidates {
        if c.policy_reject {
            filtered.push(ScoreTrace::filtered(&c.doc_id, c.quality, "policy"));
        } else {
            scored.push(score_triggered(&c.doc_id, c.quality, &c.scores, intents, config));
        }
    }
    scored.sort_by(trace_order);
    filtered.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    let results = scored
        .iter()
        .take(config.k_final)
        .map(|t| RankedDoc {
            doc_id: t.doc_id.clone(),
            score: t.final_score,
        })
        .collect();
    scored.extend(filtered);
    RankedList {
        query_id: query_id.into(),
        fingerprint: config.fingerprint(),
        intents: intents.clone(),
        triggered: triggered_intents(intents, config.trigger_threshold),
        results,
        traces: scored,
    }
}

fn nearest_ids<'a>(target: &str, ids: impl Iterator<Item = &'a str>) -> String {
    let mut scored: Vec<(f64, &str)> = ids
        .map(|id| (strsim::normalized_levenshtein(target, id), id))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
    scored
        .iter()
        .take(3)
        .map(|(_, id)| *id)
        .collect::<Vec<_>>()
        .join(", ")
}

/// Error for an id that is not in `ids`, naming the closest ones.
pub fn not_found<'a>(what: &'static str, id: &str, ids: impl Iterator<Item = &'a str>) -> Error {
    let near = nearest_ids(id, ids);
    Error::NotFound {
        what,
        id: id.into(),
        hint: if near.is_empty() {
            String::new()
        } else {
            format!("nearest: {near}")
        },
    }
}

/// Plain-text table of every term behind one document's score.
pub fn explain(ranked: &RankedList, doc_id: &str) -> Result<String> {
    let trace = ranked
        .trace(doc_id)
        .ok_or_else(|| not_found("document", doc_id, ranked.traces.iter().map(|t| t.doc_id.as_str())))?;
    let mut out = String::new();
    let _ = writeln!(out, "query: {}", ranked.query_id);
    let _ = writeln!(out, "config: {}", ranked.fingerprint);
    let _ = writeln!(out, "intents: {}", ranked.intents);
    if let Some(reason) = &trace.filtered {
        let _ = writeln!(out, "doc: {doc_id}");
        let _ = writeln!(out, "filtered: {reason}");
        return Ok(out);
    }
    let rank = ranked.full_rank(doc_id).expect("scored trace has a rank");
    let _ = writeln!(
        out,
        "doc: {doc_id}  rank: {rank}/{}  quality: {:.6}",
        ranked.scored().count(),
        trace.quality
    );
    let _ = writeln!(
        out,
        "{:<20} {:<24} {:>10} {:>10} {:>10} {:>16}",
        "component", "scope", "sigma", "weight", "P(t|q)", "contribution"
    );
    for t in &trace.generic {
        let _ = writeln!(
            out,
            "{:<20} {:<24} {:>10.6} {:>10.6} {:>10} {:>16.12}",
            t.component_id, "generic", t.sigma, t.weight, "-", t.contribution
        );
    }
    for t in &trace.intent {
        let scope = format!("intent:{}", t.intent);
        if t.skipped {
            let _ = writeln!(
                out,
                "{:<20} {:<24} {:>10.6} {:>10.6} {:>10.6} {:>16}",
                t.component_id, scope, t.sigma, t.weight, t.probability, "skipped"
            );
        } else {
            let _ = writeln!(
                out,
                "{:<20} {:<24} {:>10.6} {:>10.6} {:>10.6} {:>16.12}",
                t.component_id, scope, t.sigma, t.weight, t.probability, t.contribution
            );
        }
    }
    let _ = writeln!(out, "{:<20} {:>81.12}", "total", trace.contribution_sum());
    let _ = writeln!(out, "{:<20} {:>81.12}", "final score", trace.final_score);
    Ok(out)
}

/// One JSON line per trace, tagged with the query id.
pub fn trace_lines(ranked: &RankedList) -> String {
    #[derive(Serialize)]
    struct Line<'a> {
        query_id: &'a str,
        config: &'a str,
        #[serde(flatten)]
        trace: &'a ScoreTrace,
    }
    let mut out = String::new();
    for t in &ranked.traces {
        let line = Line {
            query_id: &ranked.query_id,
            config: &ranked.fingerprint,
            trace: t,
        };
        out.push_str(&serde_json::to_string(&line).expect("trace serializes"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TriggerStats {
    pub queries: usize,
    pub counts: BTreeMap<String, usize>,
    pub rates: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TriggerReport {
    pub stats: TriggerStats,
    /// Rate minus baseline rate, for intents seen in either.
    pub deltas: BTreeMap<String, f64>,
    pub alerts: Vec<String>,
}

/// Per-intent trigger counts over a batch of ranked lists, compared to a baseline.
pub fn trigger_stats(lists: &[RankedList], baseline: Option<&TriggerStats>, band: f64) -> TriggerReport {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for l in lists {
        for t in &l.triggered {
            *counts.entry(t.clone()).or_default() += 1;
        }
    }
    let n = lists.len();
    let rates: BTreeMap<String, f64> = counts
        .iter()
        .map(|(t, c)| (t.clone(), *c as f64 / n as f64))
        .collect();
    let stats = TriggerStats {
        queries: n,
        counts,
        rates,
    };
    let mut deltas = BTreeMap::new();
    let mut alerts = Vec::new();
    if let Some(base) = baseline {
        let intents: std::collections::BTreeSet<&String> =
            stats.rates.keys().chain(base.rates.keys()).collect();
        for t in intents {
            let now = stats.rates.get(t).copied().unwrap_or(0.0);
            let before = base.rates.get(t).copied().unwrap_or(0.0);
            let d = now - before;
            deltas.insert(t.clone(), d);
            if d.abs() > band {
                alerts.push(format!(
                    "intent `{t}` trigger rate {now:.4} vs baseline {before:.4} (delta {d:+.4}, band {band})"
                ));
            }
        }
    }
    TriggerReport { stats, deltas, alerts }
}
