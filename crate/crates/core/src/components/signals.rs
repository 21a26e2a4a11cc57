use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::context::QueryContext;
use crate::corpus::{social_relations, Document, EngagementCounters, GeoPoint, RelationSet};
use crate::index::{query_terms, GlobalStats};
use crate::intent::IntentDistribution;
use crate::tokenize::Tokenizer;

const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Great-circle distance in kilometres.
pub fn haversine_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let (la1, la2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = la2 - la1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + la1.cos() * la2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermStat {
    pub term: String,
    pub df: u64,
    pub tf: u32,
    pub in_title: bool,
}

/// Per-(query, document) features computed once per candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedSignals {
    /// First-pass BM25 from the index.
    pub first_pass: f64,
    pub terms: Vec<TermStat>,
    pub num_docs: u64,
    pub avgdl: f64,
    pub doc_len: u32,
    /// Shortest token window (within one field) covering every distinct query term.
    pub min_window: Option<usize>,
    pub title_hit_ratio: f64,
    pub relations: RelationSet,
    pub distance_km: Option<f64>,
    pub language_overlap: Option<f64>,
    pub query_engagement: EngagementCounters,
    /// Most probable intent of the query.
    pub top_intent: String,
}

/// Shortest span of `tokens` containing every term in `terms`.
pub fn min_covering_window(tokens: &[String], terms: &[String]) -> Option<usize> {
    if terms.is_empty() {
        return None;
    }
    let idx: BTreeMap<&str, usize> = terms.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let mut counts = vec![0usize; terms.len()];
    let mut covered = 0;
    let mut best: Option<usize> = None;
    let mut lo = 0;
    for hi in 0..tokens.len() {
        if let Some(&i) = idx.get(tokens[hi].as_str()) {
            counts[i] += 1;
            if counts[i] == 1 {
                covered += 1;
            }
        }
        while covered == terms.len() {
            let w = hi - lo + 1;
            best = Some(best.map_or(w, |b| b.min(w)));
            if let Some(&i) = idx.get(tokens[lo].as_str()) {
                counts[i] -= 1;
                if counts[i] == 0 {
                    covered -= 1;
                }
            }
            lo += 1;
        }
    }
    best
}

/// Best probability mass over the user's languages; `None` when the document has no language map.
pub fn language_overlap(user_languages: &[String], doc: &Document) -> Option<f64> {
    if doc.languages.is_empty() {
        return None;
    }
    Some(
        user_languages
            .iter()
            .filter_map(|l| doc.languages.get(l).copied())
            .fold(0.0, f64::max),
    )
}

impl SharedSignals {
    pub fn compute(
        ctx: &QueryContext<'_>,
        doc: &Document,
        tokenizer: &Tokenizer,
        stats: &GlobalStats,
        first_pass: f64,
        query_engagement: EngagementCounters,
        intents: &IntentDistribution,
    ) -> Self {
        let qterms = query_terms(&ctx.tokens);
        let title = tokenizer.tokenize(&doc.title);
        let body = tokenizer.tokenize(&doc.body);
        let mut terms = Vec::with_capacity(qterms.len());
        let mut title_hits = 0usize;
        for t in &qterms {
            let tf = title.iter().chain(body.iter()).filter(|x| *x == t).count() as u32;
            let in_title = title.contains(t);
            if in_title {
                title_hits += 1;
            }
            terms.push(TermStat {
                term: t.clone(),
                df: stats.df(t),
                tf,
                in_title,
            });
        }
        let min_window = [
            min_covering_window(&title, &qterms),
            min_covering_window(&body, &qterms),
        ]
        .into_iter()
        .flatten()
        .min();
        let title_hit_ratio = if qterms.is_empty() {
            0.0
        } else {
            title_hits as f64 / qterms.len() as f64
        };
        let distance_km = match (ctx.user.location, doc.location) {
            (Some(a), Some(b)) => Some(haversine_km(a, b)),
            _ => None,
        };
        Self {
            first_pass,
            terms,
            num_docs: stats.num_docs,
            avgdl: stats.avgdl,
            doc_len: (title.len() + body.len()) as u32,
            min_window,
            title_hit_ratio,
            relations: social_relations(ctx.graph, ctx.searcher(), doc),
            distance_km,
            language_overlap: language_overlap(&ctx.user.languages, doc),
            query_engagement,
            top_intent: intents.argmax().to_string(),
        }
    }

    /// Number of distinct query terms.
    pub fn query_len(&self) -> usize {
        self.terms.len()
    }

    /// `1 / (1 + window - query_len)`, 0 when no field covers every term.
    pub fn proximity(&self) -> f64 {
        match self.min_window {
            Some(w) if w >= self.query_len() => 1.0 / (1.0 + (w - self.query_len()) as f64),
            _ => 0.0,
        }
    }

    /// Historical click-through rate of this document for this query.
    pub fn hist_ctr(&self) -> f64 {
        let e = self.query_engagement;
        if e.impressions == 0 {
            0.0
        } else {
            e.clicks as f64 / e.impressions as f64
        }
    }

    pub fn good_click_rate(&self) -> f64 {
        let e = self.query_engagement;
        if e.impressions == 0 {
            0.0
        } else {
            e.good_clicks as f64 / e.impressions as f64
        }
    }

    /// Named numeric feature, used by the engagement model and passthrough scorers.
    ///
    /// `intent:<id>` is 1 when `<id>` is the query's most probable intent.
    pub fn feature(&self, name: &str, doc: &Document) -> Option<f64> {
        if let Some(intent) = name.strip_prefix("intent:") {
            return Some(if self.top_intent == intent { 1.0 } else { 0.0 });
        }
        if let Some(rel) = name.strip_prefix("relation:") {
            let r = rel.parse().ok()?;
            return Some(if self.relations.contains(r) { 1.0 } else { 0.0 });
        }
        Some(match name {
            "first_pass" => self.first_pass,
            "bm25_squashed" => self.first_pass / (self.first_pass + 1.0),
            "proximity" => self.proximity(),
            "title_hit_ratio" => self.title_hit_ratio,
            "distance_km" => self.distance_km?,
            "language_overlap" => self.language_overlap?,
            "hist_ctr" => self.hist_ctr(),
            "good_click_rate" => self.good_click_rate(),
            "log_good_clicks" => (self.query_engagement.good_clicks as f64).ln_1p(),
            "log_impressions" => (self.query_engagement.impressions as f64).ln_1p(),
            "doc_ctr" => {
                let e = doc.engagement;
                if e.impressions == 0 {
                    0.0
                } else {
                    e.clicks as f64 / e.impressions as f64
                }
            }
            "doc_good_click_ratio" => {
                let e = doc.engagement;
                e.good_clicks as f64 / (e.clicks as f64 + 1.0)
            }
            "quality" => crate::components::generic::document_quality(doc).0,
            _ => return None,
        })
    }

    /// Whether `name` is a feature [`SharedSignals::feature`] knows about.
    pub fn is_known_feature(name: &str) -> bool {
        name.starts_with("intent:")
            || name
                .strip_prefix("relation:")
                .is_some_and(|r| r.parse::<crate::corpus::Relation>().is_ok())
            || FEATURE_NAMES.contains(&name)
    }
}

pub const FEATURE_NAMES: &[&str] = &[
    "first_pass",
    "bm25_squashed",
    "proximity",
    "title_hit_ratio",
    "distance_km",
    "language_overlap",
    "hist_ctr",
    "good_click_rate",
    "log_good_clicks",
    "log_impressions",
    "doc_ctr",
    "doc_good_click_ratio",
    "quality",
];
