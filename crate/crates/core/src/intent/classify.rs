//! Reference query-intent classifiers: keyword rules, character n-gram similarity
//! and a social friend-name matcher.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::context::QueryContext;
use crate::error::{Error, Result};
use crate::records::Record;
use crate::tokenize::tokenize;

/// Classifier output; `capture` names the entity the classifier keyed on, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierOutput {
    pub confidence: f64,
    pub capture: Option<String>,
}

impl ClassifierOutput {
    pub fn none() -> Self {
        Self {
            confidence: 0.0,
            capture: None,
        }
    }
}

pub trait IntentClassifier: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &str;
    fn intent(&self) -> &str;
    /// Pure function of the query and its context; expected in [0, 1].
    fn classify(&self, ctx: &QueryContext<'_>) -> ClassifierOutput;
}

/// Keyword table classifier. Matched keywords combine as `1 - prod(1 - w)`.
#[derive(Debug, Clone)]
pub struct KeywordClassifier {
    name: String,
    intent: String,
    keywords: Vec<(Vec<String>, f64)>,
}

impl KeywordClassifier {
    pub fn new(
        name: impl Into<String>,
        intent: impl Into<String>,
        keywords: impl IntoIterator<Item = (String, f64)>,
    ) -> Self {
        let mut keywords: Vec<(Vec<String>, f64)> = keywords
            .into_iter()
            .map(|(k, w)| (tokenize(&k), w))
            .filter(|(k, _)| !k.is_empty())
            .collect();
        keywords.sort_by(|a, b| a.0.cmp(&b.0));
        Self {
            name: name.into(),
            intent: intent.into(),
            keywords,
        }
    }
}

impl IntentClassifier for KeywordClassifier {
    fn name(&self) -> &str {
        &self.name
    }

    fn intent(&self) -> &str {
        &self.intent
    }

    fn classify(&self, ctx: &QueryContext<'_>) -> ClassifierOutput {
        let toks = &ctx.tokens;
        let mut miss = 1.0;
        let mut hit = false;
        for (kw, w) in &self.keywords {
            if toks.windows(kw.len()).any(|win| win == kw.as_slice()) {
                miss *= 1.0 - w;
                hit = true;
            }
        }
        ClassifierOutput {
            confidence: if hit { 1.0 - miss } else { 0.0 },
            capture: None,
        }
    }
}

fn char_ngrams(text: &str, n: usize) -> BTreeSet<String> {
    let padded: Vec<char> = format!(" {text} ").chars().collect();
    if padded.len() < n {
        return BTreeSet::new();
    }
    padded.windows(n).map(|w| w.iter().collect()).collect()
}

/// Character n-gram similarity to seed phrases, calibrated by a scale factor.
#[derive(Debug, Clone)]
pub struct NgramClassifier {
    name: String,
    intent: String,
    n: usize,
    seeds: Vec<BTreeSet<String>>,
    scale: f64,
    min_similarity: f64,
}

impl NgramClassifier {
    pub fn new(
        name: impl Into<String>,
        intent: impl Into<String>,
        seeds: &[String],
        n: usize,
        scale: f64,
        min_similarity: f64,
    ) -> Self {
        let n = n.max(1);
        Self {
            name: name.into(),
            intent: intent.into(),
            n,
            seeds: seeds
                .iter()
                .map(|s| char_ngrams(&tokenize(s).join(" "), n))
                .collect(),
            scale,
            min_similarity,
        }
    }
}

impl IntentClassifier for NgramClassifier {
    fn name(&self) -> &str {
        &self.name
    }

    fn intent(&self) -> &str {
        &self.intent
    }

    fn classify(&self, ctx: &QueryContext<'_>) -> ClassifierOutput {
        if ctx.tokens.is_empty() {
            return ClassifierOutput::none();
        }
        let q = char_ngrams(&ctx.tokens.join(" "), self.n);
        let best = self
            .seeds
            .iter()
            .map(|s| {
                let inter = q.intersection(s).count() as f64;
                let union = q.union(s).count() as f64;
                if union > 0.0 {
                    inter / union
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max);
        let confidence = if best >= self.min_similarity {
            best * self.scale
        } else {
            0.0
        };
        ClassifierOutput {
            confidence,
            capture: None,
        }
    }
}

/// Matches the query against the names of the searcher's friends.
///
/// Exact full-name matches score `exact`, queries whose tokens are all part of
/// a friend's name score `partial`. The capture is the friend's user id.
#[derive(Debug, Clone)]
pub struct FriendNameClassifier {
    name: String,
    intent: String,
    names: BTreeMap<String, Vec<String>>,
    exact: f64,
    partial: f64,
}

impl FriendNameClassifier {
    pub fn new(
        name: impl Into<String>,
        intent: impl Into<String>,
        names: BTreeMap<String, Vec<String>>,
        exact: f64,
        partial: f64,
    ) -> Self {
        Self {
            name: name.into(),
            intent: intent.into(),
            names,
            exact,
            partial,
        }
    }
}

impl IntentClassifier for FriendNameClassifier {
    fn name(&self) -> &str {
        &self.name
    }

    fn intent(&self) -> &str {
        &self.intent
    }

    fn classify(&self, ctx: &QueryContext<'_>) -> ClassifierOutput {
        if ctx.tokens.is_empty() {
            return ClassifierOutput::none();
        }
        let mut best = ClassifierOutput::none();
        for friend in ctx.graph.friends(ctx.searcher()) {
            let Some(name) = self.names.get(friend) else {
                continue;
            };
            let score = if *name == ctx.tokens {
                self.exact
            } else if ctx.tokens.iter().all(|t| name.contains(t)) {
                self.partial
            } else {
                0.0
            };
            // friends iterate in ascending id order, so ties keep the smallest id
            if score > best.confidence {
                best = ClassifierOutput {
                    confidence: score,
                    capture: Some(friend.to_string()),
                };
            }
        }
        best
    }
}

/// Classifier file record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierSpec {
    Keyword {
        name: String,
        intent: String,
        keywords: BTreeMap<String, f64>,
    },
    Ngram {
        name: String,
        intent: String,
        seeds: Vec<String>,
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default = "one")]
        scale: f64,
        #[serde(default)]
        min_similarity: f64,
    },
    FriendName {
        name: String,
        intent: String,
        #[serde(default = "default_exact")]
        exact: f64,
        #[serde(default = "default_partial")]
        partial: f64,
    },
}

fn default_n() -> usize {
    3
}
fn one() -> f64 {
    1.0
}
fn default_exact() -> f64 {
    0.9
}
fn default_partial() -> f64 {
    0.5
}

impl ClassifierSpec {
    pub fn intent(&self) -> &str {
        match self {
            ClassifierSpec::Keyword { intent, .. }
            | ClassifierSpec::Ngram { intent, .. }
            | ClassifierSpec::FriendName { intent, .. } => intent,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            ClassifierSpec::Keyword { name, .. }
            | ClassifierSpec::Ngram { name, .. }
            | ClassifierSpec::FriendName { name, .. } => name,
        }
    }

    /// Instantiates the classifier. `user_names` maps user ids to display names.
    pub fn build(
        &self,
        user_names: &BTreeMap<String, String>,
    ) -> Result<Box<dyn IntentClassifier>> {
        Ok(match self {
            ClassifierSpec::Keyword {
                name,
                intent,
                keywords,
            } => {
                if let Some((k, w)) = keywords.iter().find(|(_, w)| !(0.0..=1.0).contains(*w)) {
                    return Err(Error::Config(format!(
                        "classifier `{name}`: keyword `{k}` weight {w} outside [0, 1]"
                    )));
                }
                Box::new(KeywordClassifier::new(
                    name.clone(),
                    intent.clone(),
                    keywords.iter().map(|(k, w)| (k.clone(), *w)),
                ))
            }
            ClassifierSpec::Ngram {
                name,
                intent,
                seeds,
                n,
                scale,
                min_similarity,
            } => Box::new(NgramClassifier::new(
                name.clone(),
                intent.clone(),
                seeds,
                *n,
                *scale,
                *min_similarity,
            )),
            ClassifierSpec::FriendName {
                name,
                intent,
                exact,
                partial,
            } => Box::new(FriendNameClassifier::new(
                name.clone(),
                intent.clone(),
                user_names
                    .iter()
                    .map(|(id, n)| (id.clone(), tokenize(n)))
                    .collect(),
                *exact,
                *partial,
            )),
        })
    }
}

impl Record for ClassifierSpec {
    const KIND: &'static str = "classifier";
    const FIELDS: &'static [&'static str] = &[
        "kind",
        "name",
        "intent",
        "keywords",
        "seeds",
        "n",
        "scale",
        "min_similarity",
        "exact",
        "partial",
    ];

    fn record_id(&self) -> String {
        self.name().to_string()
    }
}

/// Per-intent classifier confidences (max over classifiers of an intent), clamped to [0, 1].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Classification {
    pub confidences: BTreeMap<String, f64>,
    /// Best capture per intent with its confidence.
    pub captures: BTreeMap<String, (f64, String)>,
    /// Non-zero outputs as `(classifier, intent, confidence)` in classifier order.
    pub fired: Vec<(String, String, f64)>,
    /// Number of outputs that fell outside [0, 1] and were clamped.
    pub clamped: usize,
}

pub fn classify(ctx: &QueryContext<'_>, classifiers: &[Box<dyn IntentClassifier>]) -> Classification {
    let mut out = Classification::default();
    for c in classifiers {
        let raw = c.classify(ctx);
        let mut v = raw.confidence;
        if !(0.0..=1.0).contains(&v) {
            log::warn!(
                "classifier `{}` returned {v} for `{}`; clamping",
                c.name(),
                ctx.query
            );
            out.clamped += 1;
            v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        let slot = out.confidences.entry(c.intent().to_string()).or_insert(0.0);
        *slot = slot.max(v);
        if v > 0.0 {
            out.fired.push((c.name().to_string(), c.intent().to_string(), v));
        }
        if let Some(cap) = raw.capture {
            if v > 0.0 {
                let entry = out.captures.entry(c.intent().to_string());
                match entry {
                    std::collections::btree_map::Entry::Vacant(e) => {
                        e.insert((v, cap));
                    }
                    std::collections::btree_map::Entry::Occupied(mut e) => {
                        let (bv, bc) = e.get();
                        if v > *bv || (v == *bv && cap < *bc) {
                            e.insert((v, cap));
                        }
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Edge, EdgeLabel, SocialGraph, UserContext};
    use crate::tokenize::Tokenizer;

    fn ctx<'a>(q: &str, user: &'a UserContext, g: &'a SocialGraph) -> QueryContext<'a> {
        QueryContext::new(q, &Tokenizer::default(), user, g)
    }

    fn sports() -> KeywordClassifier {
        KeywordClassifier::new(
            "sports_kw",
            "sports",
            [("nba".to_string(), 0.6), ("finals".to_string(), 0.4)],
        )
    }

    #[test]
    fn empty_query_gives_zero() {
        let u = UserContext::new("me");
        let g = SocialGraph::new();
        let c = ctx("", &u, &g);
        assert_eq!(sports().classify(&c).confidence, 0.0);
        let ng = NgramClassifier::new("n", "news", &["breaking news".into()], 3, 1.0, 0.0);
        assert_eq!(ng.classify(&c).confidence, 0.0);
    }

    #[test]
    fn keyword_rule_fires() {
        let u = UserContext::new("me");
        let g = SocialGraph::new();
        let c = ctx("nba finals tonight", &u, &g);
        let v = sports().classify(&c).confidence;
        assert!((v - (1.0 - 0.4 * 0.6)).abs() < 1e-12);
    }

    #[test]
    fn friend_full_name_scores_high() {
        let u = UserContext::new("me");
        let mut g = SocialGraph::new();
        g.add_edge(Edge::new("me", "alice", EdgeLabel::Friend));
        let names = BTreeMap::from([
            ("alice".to_string(), tokenize("Alice Smith")),
            ("zed".to_string(), tokenize("Alice Smith")),
        ]);
        let fc = FriendNameClassifier::new("f", "friend", names, 0.9, 0.5);
        let out = fc.classify(&ctx("alice smith", &u, &g));
        assert!(out.confidence >= 0.8);
        assert_eq!(out.capture.as_deref(), Some("alice"));
        assert_eq!(fc.classify(&ctx("alice", &u, &g)).confidence, 0.5);
        assert_eq!(fc.classify(&ctx("bob", &u, &g)).confidence, 0.0);
    }

    #[derive(Debug)]
    struct Broken;
    impl IntentClassifier for Broken {
        fn name(&self) -> &str {
            "broken"
        }
        fn intent(&self) -> &str {
            "news"
        }
        fn classify(&self, _: &QueryContext<'_>) -> ClassifierOutput {
            ClassifierOutput {
                confidence: 1.7,
                capture: None,
            }
        }
    }

    #[test]
    fn out_of_range_outputs_are_clamped() {
        let u = UserContext::new("me");
        let g = SocialGraph::new();
        let cls: Vec<Box<dyn IntentClassifier>> = vec![Box::new(Broken)];
        let out = classify(&ctx("x", &u, &g), &cls);
        assert_eq!(out.confidences["news"], 1.0);
        assert_eq!(out.clamped, 1);
    }
}
