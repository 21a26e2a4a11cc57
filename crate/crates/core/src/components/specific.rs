//! Intent-specific scorers. Each reads the capture its intent produced and
//! scores 0 when the capture is absent.

use serde::{Deserialize, Serialize};

use super::signals::SharedSignals;
use super::Scorer;
use crate::context::QueryContext;
use crate::corpus::{DocType, Document, EdgeLabel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FriendIntent {
    pub profile: f64,
    pub authored: f64,
    pub engaged: f64,
}

impl Default for FriendIntent {
    fn default() -> Self {
        Self {
            profile: 1.0,
            authored: 0.8,
            engaged: 0.6,
        }
    }
}

impl FriendIntent {
    pub fn score_for(&self, friend: &str, doc: &Document, ctx: &QueryContext<'_>) -> f64 {
        let author = doc.author_id.as_deref();
        if doc.doc_type == DocType::User && author == Some(friend) {
            self.profile
        } else if author == Some(friend) {
            self.authored
        } else if ctx.graph.has_edge(friend, EdgeLabel::Engaged, &doc.doc_id) {
            self.engaged
        } else {
            0.0
        }
    }
}

impl Scorer for FriendIntent {
    fn kind(&self) -> &'static str {
        "friend"
    }

    fn score(&self, ctx: &QueryContext<'_>, doc: &Document, _s: &SharedSignals) -> f64 {
        match ctx.captures.friend.as_deref() {
            Some(f) => self.score_for(f, doc, ctx),
            None => 0.0,
        }
    }
}

/// 1 when the document satisfies the parsed grammar query, else 0.
///
/// With `self_seen` the searcher must have engaged the document, inside the
/// time window when one was given. Without it the window applies to the
/// document's creation time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrammarIntent {}

impl Scorer for GrammarIntent {
    fn kind(&self) -> &'static str {
        "special_grammar"
    }

    fn score(&self, ctx: &QueryContext<'_>, doc: &Document, _s: &SharedSignals) -> f64 {
        let Some(g) = &ctx.captures.grammar else {
            return 0.0;
        };
        if g.doc_type.is_some_and(|t| t != doc.doc_type) {
            return 0.0;
        }
        let ok = if g.self_seen {
            match ctx.user.engaged_doc_ids.get(&doc.doc_id) {
                Some(ts) => g.window.is_none_or(|w| w.contains(*ts, ctx.now_ts)),
                None => false,
            }
        } else {
            g.window.is_none_or(|w| w.contains(doc.created_ts, ctx.now_ts))
        };
        if ok {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PublisherMode {
    #[default]
    Binary,
    GoodClickWeighted,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VideoPublisher {
    pub mode: PublisherMode,
}

impl VideoPublisher {
    pub fn score_for(&self, publisher: &str, doc: &Document) -> f64 {
        if doc.publisher_id.as_deref() != Some(publisher) {
            return 0.0;
        }
        match self.mode {
            PublisherMode::Binary => 1.0,
            PublisherMode::GoodClickWeighted => {
                let e = doc.engagement;
                e.good_clicks as f64 / (e.clicks as f64 + 1.0)
            }
        }
    }
}

impl Scorer for VideoPublisher {
    fn kind(&self) -> &'static str {
        "video_publisher"
    }

    fn score(&self, ctx: &QueryContext<'_>, doc: &Document, _s: &SharedSignals) -> f64 {
        match ctx.captures.publisher.as_deref() {
            Some(p) => self.score_for(p, doc),
            None => 0.0,
        }
    }
}
