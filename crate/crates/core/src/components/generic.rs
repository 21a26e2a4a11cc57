//! Generic scorers, meaningful for every query.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::signals::SharedSignals;
use super::Scorer;
use crate::context::QueryContext;
use crate::corpus::{Document, Relation};
use crate::error::{Error, Result};
use crate::index::{bm25_term, Bm25Params};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TextMix {
    pub bm25: f64,
    pub proximity: f64,
    pub title: f64,
}

impl Default for TextMix {
    fn default() -> Self {
        Self {
            bm25: 0.5,
            proximity: 0.25,
            title: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TextRelevance {
    pub k1: f64,
    pub b: f64,
    pub mix: TextMix,
}

impl Default for TextRelevance {
    fn default() -> Self {
        let p = Bm25Params::default();
        Self {
            k1: p.k1,
            b: p.b,
            mix: TextMix::default(),
        }
    }
}

impl TextRelevance {
    pub fn params(&self) -> Bm25Params {
        Bm25Params { k1: self.k1, b: self.b }
    }

    pub fn validate(&self) -> Result<()> {
        self.params().validate()?;
        let m = self.mix;
        if [m.bm25, m.proximity, m.title].iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::Config("text_relevance mix weights must be nonnegative".into()));
        }
        if ((m.bm25 + m.proximity + m.title) - 1.0).abs() > 1e-9 {
            return Err(Error::Config("text_relevance mix weights must sum to 1".into()));
        }
        Ok(())
    }

    /// BM25 recomputed with this scorer's parameters from the shared term statistics.
    pub fn bm25(&self, s: &SharedSignals) -> f64 {
        let n = s.num_docs as f64;
        s.terms
            .iter()
            .map(|t| {
                let df = t.df as f64;
                let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                bm25_term(idf, t.tf, s.doc_len, s.avgdl, self.params())
            })
            .sum()
    }
}

impl Scorer for TextRelevance {
    fn kind(&self) -> &'static str {
        "text_relevance"
    }

    fn score(&self, _ctx: &QueryContext<'_>, _doc: &Document, s: &SharedSignals) -> f64 {
        let bm = self.bm25(s);
        let squashed = if bm > 0.0 { bm / (bm + 1.0) } else { 0.0 };
        self.mix.bm25 * squashed + self.mix.proximity * s.proximity() + self.mix.title * s.title_hit_ratio
    }
}

pub fn default_relation_weights() -> BTreeMap<Relation, f64> {
    use Relation::*;
    BTreeMap::from([
        (SelfAuthored, 1.0),
        (Friend, 0.8),
        (SelfEngaged, 0.7),
        (FriendEngaged, 0.5),
        (Followee, 0.5),
        (FriendOfFriend, 0.4),
        (Follower, 0.3),
        (PendingFriend, 0.3),
        (PendingJoining, 0.3),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SocialRelevance {
    /// Relations missing from the map weigh 0.
    pub weights: BTreeMap<Relation, f64>,
}

impl Default for SocialRelevance {
    fn default() -> Self {
        Self {
            weights: default_relation_weights(),
        }
    }
}

impl Scorer for SocialRelevance {
    fn kind(&self) -> &'static str {
        "social"
    }

    fn score(&self, _ctx: &QueryContext<'_>, _doc: &Document, s: &SharedSignals) -> f64 {
        s.relations
            .relations
            .iter()
            .filter_map(|r| self.weights.get(r))
            .fold(0.0, |a, b| a.max(*b))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LocationRelevance {
    pub tau_km: f64,
}

impl Default for LocationRelevance {
    fn default() -> Self {
        Self { tau_km: 50.0 }
    }
}

impl Scorer for LocationRelevance {
    fn kind(&self) -> &'static str {
        "location"
    }

    fn score(&self, _ctx: &QueryContext<'_>, _doc: &Document, s: &SharedSignals) -> f64 {
        match s.distance_km {
            Some(d) => (-d / self.tau_km).exp(),
            None => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LanguageMatch {
    /// Score for documents without a language map.
    pub neutral: f64,
}

impl Default for LanguageMatch {
    fn default() -> Self {
        Self { neutral: 0.5 }
    }
}

impl Scorer for LanguageMatch {
    fn kind(&self) -> &'static str {
        "language"
    }

    fn score(&self, _ctx: &QueryContext<'_>, _doc: &Document, s: &SharedSignals) -> f64 {
        s.language_overlap.unwrap_or(self.neutral)
    }
}

/// Mean of the available quality sub-scores, and the policy flag.
pub fn document_quality(doc: &Document) -> (f64, bool) {
    let v = doc.quality.available();
    (v.iter().sum::<f64>() / v.len() as f64, doc.quality.policy_reject)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocumentQuality {}

impl Scorer for DocumentQuality {
    fn kind(&self) -> &'static str {
        "quality"
    }

    fn score(&self, _ctx: &QueryContext<'_>, doc: &Document, _s: &SharedSignals) -> f64 {
        document_quality(doc).0
    }
}

/// Reads a named shared feature as-is, for scores produced outside the ranker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Passthrough {
    pub feature: String,
}

impl Scorer for Passthrough {
    fn kind(&self) -> &'static str {
        "passthrough"
    }

    fn score(&self, _ctx: &QueryContext<'_>, doc: &Document, s: &SharedSignals) -> f64 {
        s.feature(&self.feature, doc).unwrap_or(0.0)
    }
}
