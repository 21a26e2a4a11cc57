//! Query intent detection.
//!
//! Four detector families contribute raw evidence per intent: structured
//! typeahead clicks, whole-query patterns, classifiers and entity linking (which
//! scales pattern evidence). Evidence is reduced with a per-intent max and then
//! normalized into a distribution over the intent space, with the fallback
//! `generic` intent absorbing any mass the detectors leave unclaimed.

pub mod classify;
pub mod grammar;
pub mod linking;
pub mod pattern;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::context::QueryContext;
use crate::error::{Error, Result};

pub use classify::{ClassifierSpec, IntentClassifier};
pub use grammar::{GrammarSpec, TimeWindow};
pub use linking::{EntityRecord, KnowledgeBase, LinkedEntity, DEFAULT_LINK_THRESHOLD};
pub use pattern::{
    match_pattern, parse_pattern, Capture, Dictionaries, Dictionary, PatternMatch, PatternRecord,
    PatternSet, PatternToken, QueryPattern, SlotCapture,
};

pub const FALLBACK_INTENT: &str = "generic";
pub const FRIEND: &str = "friend";
pub const SPECIAL_GRAMMAR: &str = "special_grammar";
pub const VIDEO_PUBLISHER: &str = "video_publisher";

/// Raw evidence assigned to the intent of a clicked structured suggestion.
pub const ENTRY_POINT_EVIDENCE: f64 = 0.95;

/// The set of intents a query can be attributed to, plus the fallback.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentSpace {
    intents: Vec<String>,
}

impl IntentSpace {
    pub fn new<S: Into<String>>(intents: impl IntoIterator<Item = S>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for i in intents {
            let i = i.into();
            if i == FALLBACK_INTENT {
                return Err(Error::Config(format!(
                    "`{FALLBACK_INTENT}` is the implicit fallback intent and cannot be declared"
                )));
            }
            if i.is_empty() || !seen.insert(i.clone()) {
                return Err(Error::Config(format!("invalid or duplicate intent id `{i}`")));
            }
            out.push(i);
        }
        out.sort();
        Ok(Self { intents: out })
    }

    /// Non-fallback intents in ascending order.
    pub fn intents(&self) -> &[String] {
        &self.intents
    }

    pub fn contains(&self, intent: &str) -> bool {
        intent == FALLBACK_INTENT || self.intents.binary_search_by(|i| i.as_str().cmp(intent)).is_ok()
    }

    /// True for detectable (non-fallback) intents.
    pub fn is_detectable(&self, intent: &str) -> bool {
        intent != FALLBACK_INTENT && self.contains(intent)
    }
}

/// Normalized P(t|q) over the intent space. Always contains the fallback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentDistribution {
    probs: BTreeMap<String, f64>,
}

impl Default for IntentDistribution {
    fn default() -> Self {
        Self::fallback_only()
    }
}

impl IntentDistribution {
    pub fn fallback_only() -> Self {
        Self {
            probs: BTreeMap::from([(FALLBACK_INTENT.to_string(), 1.0)]),
        }
    }

    /// Normalizes raw per-intent evidence.
    ///
    /// Evidence is clamped to [0, 1]. If the total is at most 1 each intent keeps
    /// its evidence as probability and the fallback receives the remainder;
    /// otherwise evidence is divided by the total and the fallback receives 0.
    pub fn from_evidence(space: &IntentSpace, evidence: &BTreeMap<String, f64>) -> Self {
        let mut probs = BTreeMap::new();
        for intent in space.intents() {
            let e = evidence.get(intent).copied().unwrap_or(0.0);
            let e = if e.is_nan() { 0.0 } else { e.clamp(0.0, 1.0) };
            probs.insert(intent.clone(), e);
        }
        let total: f64 = probs.values().sum();
        if total <= 1.0 {
            probs.insert(FALLBACK_INTENT.to_string(), 1.0 - total);
        } else {
            for v in probs.values_mut() {
                *v /= total;
            }
            probs.insert(FALLBACK_INTENT.to_string(), 0.0);
        }
        Self { probs }
    }

    /// Builds a distribution from explicit probabilities, checking they sum to 1.
    pub fn from_probs(probs: BTreeMap<String, f64>) -> Result<Self> {
        let mut probs = probs;
        probs.entry(FALLBACK_INTENT.to_string()).or_insert(0.0);
        if probs.values().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config("intent probabilities must be in [0, 1]".into()));
        }
        let total: f64 = probs.values().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("intent probabilities sum to {total}")));
        }
        Ok(Self { probs })
    }

    pub fn get(&self, intent: &str) -> f64 {
        self.probs.get(intent).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.probs.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn sum(&self) -> f64 {
        self.probs.values().sum()
    }

    /// Most probable intent; ties resolve to the smallest id.
    pub fn argmax(&self) -> &str {
        let mut best = (FALLBACK_INTENT, f64::NEG_INFINITY);
        for (k, v) in &self.probs {
            if *v > best.1 {
                best = (k, *v);
            }
        }
        best.0
    }
}

impl fmt::Display for IntentDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, v) in &self.probs {
            if *v == 0.0 {
                continue;
            }
            if !first {
                f.write_str(" ")?;
            }
            write!(f, "{k}={v:.4}")?;
            first = false;
        }
        Ok(())
    }
}

/// Intent-specific arguments extracted from the query.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IntentCaptures {
    /// Target friend's user id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub friend: Option<String>,
    /// Page doc id of the requested video publisher.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub publisher: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grammar: Option<GrammarSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum EvidenceSource {
    EntryPoint,
    Pattern(String),
    Classifier(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub intent: String,
    pub source: EvidenceSource,
    pub value: f64,
}

/// Everything detection found out about a query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentDetection {
    pub distribution: IntentDistribution,
    /// Per-intent raw evidence after the max reduction.
    pub evidence: BTreeMap<String, f64>,
    pub sources: Vec<Evidence>,
    pub pattern_matches: Vec<PatternMatch>,
    pub linked_entities: Vec<LinkedEntity>,
    pub captures: IntentCaptures,
    pub clamped_outputs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorSettings {
    pub link_threshold: f64,
    pub entry_point_evidence: f64,
}

impl Default for DetectorSettings {
    fn default() -> Self {
        Self {
            link_threshold: DEFAULT_LINK_THRESHOLD,
            entry_point_evidence: ENTRY_POINT_EVIDENCE,
        }
    }
}

/// Immutable detection configuration.
#[derive(Debug)]
pub struct IntentDetector {
    space: IntentSpace,
    patterns: PatternSet,
    dictionaries: Dictionaries,
    kb: KnowledgeBase,
    classifiers: Vec<Box<dyn IntentClassifier>>,
    settings: DetectorSettings,
}

#[derive(Debug)]
struct CaptureCandidate<T> {
    value: f64,
    rank: (u8, String),
    capture: T,
}

fn offer<T>(slot: &mut Option<CaptureCandidate<T>>, cand: CaptureCandidate<T>) {
    let better = match slot {
        None => true,
        Some(cur) => cand.value > cur.value || (cand.value == cur.value && cand.rank < cur.rank),
    };
    if better {
        *slot = Some(cand);
    }
}

impl IntentDetector {
    pub fn new(
        space: IntentSpace,
        patterns: Vec<QueryPattern>,
        dictionaries: Dictionaries,
        kb: KnowledgeBase,
        classifiers: Vec<Box<dyn IntentClassifier>>,
        settings: DetectorSettings,
    ) -> Result<Self> {
        for p in &patterns {
            if !space.is_detectable(&p.target_intent) {
                return Err(Error::Config(format!(
                    "pattern `{}` targets intent `{}` which is not a detectable intent",
                    p.pattern_id, p.target_intent
                )));
            }
        }
        for c in &classifiers {
            if !space.is_detectable(c.intent()) {
                return Err(Error::Config(format!(
                    "classifier `{}` targets intent `{}` which is not a detectable intent",
                    c.name(),
                    c.intent()
                )));
            }
        }
        if !(0.0..=1.0).contains(&settings.entry_point_evidence) {
            return Err(Error::Config("entry_point_evidence outside [0, 1]".into()));
        }
        let patterns = PatternSet::new(patterns, &dictionaries)?;
        let mut classifiers = classifiers;
        classifiers.sort_by(|a, b| (a.intent(), a.name()).cmp(&(b.intent(), b.name())));
        Ok(Self {
            space,
            patterns,
            dictionaries,
            kb,
            classifiers,
            settings,
        })
    }

    pub fn space(&self) -> &IntentSpace {
        &self.space
    }

    pub fn knowledge_base(&self) -> &KnowledgeBase {
        &self.kb
    }

    pub fn dictionaries(&self) -> &Dictionaries {
        &self.dictionaries
    }

    pub fn patterns(&self) -> &PatternSet {
        &self.patterns
    }

    pub fn settings(&self) -> &DetectorSettings {
        &self.settings
    }

    fn link_ctx<'a>(&self, ctx: &'a QueryContext<'_>) -> linking::LinkContext<'a> {
        linking::LinkContext {
            searcher: &ctx.user.user_id,
            graph: ctx.graph,
        }
    }

    fn entity_ref(&self, entity_id: &str) -> String {
        self.kb
            .get(entity_id)
            .and_then(|e| e.record.ref_id.clone())
            .unwrap_or_else(|| entity_id.to_string())
    }

    /// Link entities in the query.
    pub fn link(&self, ctx: &QueryContext<'_>) -> Vec<LinkedEntity> {
        linking::link_entities(
            &ctx.tokens,
            &self.kb,
            Some(self.link_ctx(ctx)),
            self.settings.link_threshold,
        )
    }

    /// Classifier confidences per intent.
    pub fn classify(&self, ctx: &QueryContext<'_>) -> classify::Classification {
        classify::classify(ctx, &self.classifiers)
    }

    /// Full-cover pattern matches in pattern id order.
    pub fn match_patterns(&self, tokens: &[String]) -> Vec<PatternMatch> {
        self.patterns
            .iter()
            .filter_map(|p| match_pattern(p, tokens, &self.kb, &self.dictionaries))
            .collect()
    }

    pub fn detect(&self, ctx: &QueryContext<'_>) -> IntentDetection {
        let mut evidence: BTreeMap<String, f64> = BTreeMap::new();
        let mut sources = Vec::new();
        let mut friend: Option<CaptureCandidate<String>> = None;
        let mut publisher: Option<CaptureCandidate<String>> = None;
        let mut grammar: Option<CaptureCandidate<GrammarSpec>> = None;

        let mut add = |intent: &str, source: EvidenceSource, value: f64| {
            let slot = evidence.entry(intent.to_string()).or_insert(0.0);
            *slot = slot.max(value);
            sources.push(Evidence {
                intent: intent.to_string(),
                source,
                value,
            });
        };

        if let Some(s) = &ctx.suggestion {
            if self.space.is_detectable(&s.intent_id) {
                let v = self.settings.entry_point_evidence;
                add(&s.intent_id, EvidenceSource::EntryPoint, v);
                let target = self.entity_ref(&s.entity_id);
                let cand = CaptureCandidate {
                    value: v,
                    rank: (0, s.entity_id.clone()),
                    capture: target,
                };
                match s.intent_id.as_str() {
                    FRIEND => offer(&mut friend, cand),
                    VIDEO_PUBLISHER => offer(&mut publisher, cand),
                    _ => {}
                }
            } else {
                log::warn!("suggestion intent `{}` is not in the intent space", s.intent_id);
            }
        }

        let link_ctx = self.link_ctx(ctx);
        let matches = self.match_patterns(&ctx.tokens);
        for m in &matches {
            let mut factor: f64 = 1.0;
            let mut first_entity: Option<&str> = None;
            for cap in m.captures.values() {
                if let pattern::Capture::Entity { entity_id } = &cap.capture {
                    if let Some(e) = self.kb.get(entity_id) {
                        let s = linking::link_score(
                            &e.record,
                            1.0,
                            &ctx.tokens,
                            cap.start,
                            cap.end,
                            Some(link_ctx),
                        );
                        factor = factor.min(s);
                    }
                }
            }
            let mut slots: Vec<&pattern::SlotCapture> = m.captures.values().collect();
            slots.sort_by_key(|c| c.start);
            for cap in slots {
                if let pattern::Capture::Entity { entity_id } = &cap.capture {
                    first_entity.get_or_insert(entity_id);
                }
            }
            let value = m.confidence * factor.min(1.0);
            add(&m.target_intent, EvidenceSource::Pattern(m.pattern_id.clone()), value);
            let rank = (1, m.pattern_id.clone());
            match m.target_intent.as_str() {
                FRIEND => {
                    if let Some(e) = first_entity {
                        offer(
                            &mut friend,
                            CaptureCandidate {
                                value,
                                rank,
                                capture: self.entity_ref(e),
                            },
                        );
                    }
                }
                VIDEO_PUBLISHER => {
                    if let Some(e) = first_entity {
                        offer(
                            &mut publisher,
                            CaptureCandidate {
                                value,
                                rank,
                                capture: self.entity_ref(e),
                            },
                        );
                    }
                }
                SPECIAL_GRAMMAR => offer(
                    &mut grammar,
                    CaptureCandidate {
                        value,
                        rank,
                        capture: grammar::grammar_from_match(m),
                    },
                ),
                _ => {}
            }
        }

        let classification = self.classify(ctx);
        for (name, intent, v) in &classification.fired {
            sources.push(Evidence {
                intent: intent.clone(),
                source: EvidenceSource::Classifier(name.clone()),
                value: *v,
            });
        }
        for (intent, v) in &classification.confidences {
            let slot = evidence.entry(intent.clone()).or_insert(0.0);
            *slot = slot.max(*v);
        }
        for (intent, (v, cap)) in &classification.captures {
            let cand = CaptureCandidate {
                value: *v,
                rank: (2, cap.clone()),
                capture: cap.clone(),
            };
            match intent.as_str() {
                FRIEND => offer(&mut friend, cand),
                VIDEO_PUBLISHER => offer(&mut publisher, cand),
                _ => {}
            }
        }

        evidence.retain(|_, v| *v > 0.0);
        let distribution = IntentDistribution::from_evidence(&self.space, &evidence);
        IntentDetection {
            distribution,
            evidence,
            sources,
            pattern_matches: matches,
            linked_entities: self.link(ctx),
            captures: IntentCaptures {
                friend: friend.map(|c| c.capture),
                publisher: publisher.map(|c| c.capture),
                grammar: grammar.map(|c| c.capture),
            },
            clamped_outputs: classification.clamped,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> IntentSpace {
        IntentSpace::new(["a", "b", "c"]).unwrap()
    }

    fn ev(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn nothing_fires_gives_fallback_only() {
        let d = IntentDistribution::from_evidence(&space(), &BTreeMap::new());
        assert_eq!(d.get(FALLBACK_INTENT), 1.0);
        assert_eq!(d.get("a"), 0.0);
    }

    #[test]
    fn single_evidence_keeps_value() {
        let d = IntentDistribution::from_evidence(&space(), &ev(&[("a", 0.6)]));
        assert_eq!(d.get("a"), 0.6);
        assert!((d.get(FALLBACK_INTENT) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn excess_evidence_is_normalized() {
        let d = IntentDistribution::from_evidence(&space(), &ev(&[("a", 0.9), ("b", 0.6)]));
        // 3-line oracle
        let total = 0.9 + 0.6;
        let (pa, pb) = (0.9 / total, 0.6 / total);
        assert!((d.get("a") - pa).abs() < 1e-12 && (pa - 0.6).abs() < 1e-12);
        assert!((d.get("b") - pb).abs() < 1e-12 && (pb - 0.4).abs() < 1e-12);
        assert_eq!(d.get(FALLBACK_INTENT), 0.0);
    }

    #[test]
    fn fallback_cannot_be_declared() {
        assert!(IntentSpace::new(["generic"]).is_err());
        assert!(IntentSpace::new(["a", "a"]).is_err());
    }

    #[test]
    fn from_probs_checks_total() {
        assert!(IntentDistribution::from_probs(ev(&[("a", 0.5)])).is_err());
        let d = IntentDistribution::from_probs(ev(&[("a", 0.5), ("generic", 0.5)])).unwrap();
        assert_eq!(d.argmax(), "a");
    }
}
