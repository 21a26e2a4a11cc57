//! Knowledge base and lexical-context entity linker.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{EdgeLabel, SocialGraph};
use crate::error::{Error, Result};
use crate::records::Record;
use crate::tokenize::tokenize;

/// Default minimum link score.
pub const DEFAULT_LINK_THRESHOLD: f64 = 0.3;

/// Popularity used for entities connected to the searcher.
pub const CONNECTED_POPULARITY_FLOOR: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub entity_id: String,
    pub entity_type: String,
    pub aliases: Vec<String>,
    #[serde(default)]
    pub description_terms: BTreeSet<String>,
    pub popularity: f64,
    /// Corpus node the entity refers to (a user id, or a page/group doc id).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ref_id: Option<String>,
}

impl EntityRecord {
    pub fn new(
        entity_id: impl Into<String>,
        entity_type: impl Into<String>,
        aliases: &[&str],
        popularity: f64,
    ) -> Self {
        Self {
            entity_id: entity_id.into(),
            entity_type: entity_type.into(),
            aliases: aliases.iter().map(|a| a.to_string()).collect(),
            description_terms: BTreeSet::new(),
            popularity,
            ref_id: None,
        }
    }

    pub fn with_ref(mut self, ref_id: impl Into<String>) -> Self {
        self.ref_id = Some(ref_id.into());
        self
    }

    pub fn with_description(mut self, terms: &[&str]) -> Self {
        self.description_terms = terms.iter().map(|t| t.to_lowercase()).collect();
        self
    }
}

impl Record for EntityRecord {
    const KIND: &'static str = "entity";
    const FIELDS: &'static [&'static str] = &[
        "entity_id",
        "entity_type",
        "aliases",
        "description_terms",
        "popularity",
        "ref_id",
    ];

    fn record_id(&self) -> String {
        self.entity_id.clone()
    }

    fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        if self.entity_id.is_empty() {
            return Err(("entity_id", "must be nonempty".into()));
        }
        if self.aliases.iter().all(|a| tokenize(a).is_empty()) {
            return Err(("aliases", "needs at least one nonempty alias".into()));
        }
        if !(0.0..=1.0).contains(&self.popularity) {
            return Err(("popularity", format!("{} outside [0, 1]", self.popularity)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Entity {
    pub record: EntityRecord,
    pub aliases: Vec<Vec<String>>,
}

/// Entities indexed by alias tokens.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeBase {
    entities: Vec<Entity>,
    by_id: HashMap<String, usize>,
    /// token -> entities having an alias that contains it
    by_token: HashMap<String, BTreeSet<usize>>,
}

impl KnowledgeBase {
    pub fn new(records: Vec<EntityRecord>) -> Result<Self> {
        let mut kb = KnowledgeBase::default();
        let mut records = records;
        records.sort_by(|a, b| a.entity_id.cmp(&b.entity_id));
        for rec in records {
            if let Err((field, message)) = rec.validate() {
                return Err(Error::Invariant {
                    file: "<kb>".into(),
                    line: 0,
                    record: EntityRecord::KIND,
                    id: rec.entity_id,
                    field,
                    message,
                });
            }
            if kb.by_id.contains_key(&rec.entity_id) {
                return Err(Error::Config(format!("duplicate entity id `{}`", rec.entity_id)));
            }
            let idx = kb.entities.len();
            let aliases: Vec<Vec<String>> = rec
                .aliases
                .iter()
                .map(|a| tokenize(a))
                .filter(|a| !a.is_empty())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            for alias in &aliases {
                for t in alias {
                    kb.by_token.entry(t.clone()).or_default().insert(idx);
                }
            }
            kb.by_id.insert(rec.entity_id.clone(), idx);
            kb.entities.push(Entity {
                record: rec,
                aliases,
            });
        }
        Ok(kb)
    }

    pub fn get(&self, entity_id: &str) -> Option<&Entity> {
        self.by_id.get(entity_id).map(|&i| &self.entities[i])
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    /// Full-alias matches of `entity_type` starting at `cursor`: one entity per
    /// match length, longest first, best popularity then smallest id per length.
    pub fn alias_matches_at(
        &self,
        entity_type: &str,
        tokens: &[String],
        cursor: usize,
    ) -> Vec<(usize, &str)> {
        let Some(cands) = self.by_token.get(&tokens[cursor]) else {
            return Vec::new();
        };
        let mut best: BTreeMap<usize, &Entity> = BTreeMap::new();
        for &i in cands {
            let e = &self.entities[i];
            if e.record.entity_type != entity_type {
                continue;
            }
            for alias in &e.aliases {
                if tokens[cursor..].starts_with(alias) {
                    let slot = best.entry(alias.len()).or_insert(e);
                    if prefer(e, slot) {
                        *slot = e;
                    }
                }
            }
        }
        best.into_iter()
            .rev()
            .map(|(len, e)| (len, e.record.entity_id.as_str()))
            .collect()
    }
}

fn prefer(a: &Entity, b: &Entity) -> bool {
    a.record
        .popularity
        .total_cmp(&b.record.popularity)
        .then_with(|| b.record.entity_id.cmp(&a.record.entity_id))
        .is_gt()
}

/// An entity mention found in the query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkedEntity {
    pub start: usize,
    pub end: usize,
    pub entity_id: String,
    pub score: f64,
}

/// Searcher view used to personalize linking.
#[derive(Debug, Clone, Copy)]
pub struct LinkContext<'a> {
    pub searcher: &'a str,
    pub graph: &'a SocialGraph,
}

impl LinkContext<'_> {
    fn connected(&self, entity: &EntityRecord) -> bool {
        entity.ref_id.as_deref().is_some_and(|r| {
            self.graph.are_friends(self.searcher, r)
                || self.graph.has_edge(self.searcher, EdgeLabel::Member, r)
        })
    }
}

fn jaccard(a: &BTreeSet<&str>, b: &BTreeSet<String>) -> f64 {
    let inter = a.iter().filter(|t| b.contains(**t)).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// `exactness * (0.5 + 0.5 * context_overlap) * (0.5 + 0.5 * popularity)`.
///
/// `context_overlap` is the Jaccard similarity between the query tokens outside
/// the span and the entity's description terms. Entities connected to the
/// searcher have their popularity floored at [`CONNECTED_POPULARITY_FLOOR`].
pub fn link_score(
    entity: &EntityRecord,
    exactness: f64,
    tokens: &[String],
    start: usize,
    end: usize,
    ctx: Option<LinkContext<'_>>,
) -> f64 {
    let outside: BTreeSet<&str> = tokens[..start]
        .iter()
        .chain(&tokens[end..])
        .map(String::as_str)
        .collect();
    let overlap = jaccard(&outside, &entity.description_terms);
    let mut popularity = entity.popularity;
    if ctx.is_some_and(|c| c.connected(entity)) {
        popularity = popularity.max(CONNECTED_POPULARITY_FLOOR);
    }
    exactness * (0.5 + 0.5 * overlap) * (0.5 + 0.5 * popularity)
}

/// Every (span, entity) pair whose span is a contiguous piece of one of the
/// entity's aliases, scored with [`link_score`]. Exactness is span length over
/// alias length, maximized over aliases.
pub fn link_candidates(
    tokens: &[String],
    kb: &KnowledgeBase,
    ctx: Option<LinkContext<'_>>,
) -> Vec<LinkedEntity> {
    let mut touched = BTreeSet::new();
    for t in tokens {
        if let Some(s) = kb.by_token.get(t) {
            touched.extend(s.iter().copied());
        }
    }
    let mut out = Vec::new();
    for idx in touched {
        let e = &kb.entities[idx];
        for start in 0..tokens.len() {
            for end in start + 1..=tokens.len() {
                let span = &tokens[start..end];
                let exactness = e
                    .aliases
                    .iter()
                    .filter(|a| a.windows(span.len()).any(|w| w == span))
                    .map(|a| span.len() as f64 / a.len() as f64)
                    .fold(0.0, f64::max);
                if exactness > 0.0 {
                    out.push(LinkedEntity {
                        start,
                        end,
                        entity_id: e.record.entity_id.clone(),
                        score: link_score(&e.record, exactness, tokens, start, end, ctx),
                    });
                }
            }
        }
    }
    out
}

/// Links entities: candidates at or above `threshold`, then greedy selection of
/// non-overlapping spans by descending score. Output is ordered by span start.
pub fn link_entities(
    tokens: &[String],
    kb: &KnowledgeBase,
    ctx: Option<LinkContext<'_>>,
    threshold: f64,
) -> Vec<LinkedEntity> {
    let mut cands: Vec<LinkedEntity> = link_candidates(tokens, kb, ctx)
        .into_iter()
        .filter(|c| c.score >= threshold)
        .collect();
    cands.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.start.cmp(&b.start))
            .then(b.end.cmp(&a.end))
            .then_with(|| a.entity_id.cmp(&b.entity_id))
    });
    let mut taken = vec![false; tokens.len()];
    let mut chosen = Vec::new();
    for c in cands {
        if taken[c.start..c.end].iter().any(|t| *t) {
            continue;
        }
        taken[c.start..c.end].iter_mut().for_each(|t| *t = true);
        chosen.push(c);
    }
    chosen.sort_by_key(|c| c.start);
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Edge;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn adele_hello_links_both() {
        let kb = KnowledgeBase::new(vec![
            EntityRecord::new("page_adele", "page", &["Adele"], 0.9).with_description(&["singer", "hello"]),
            EntityRecord::new("song_hello", "song", &["Hello"], 0.8).with_description(&["adele", "song"]),
        ])
        .unwrap();
        let links = link_entities(&toks("adele hello"), &kb, None, DEFAULT_LINK_THRESHOLD);
        let ids: Vec<&str> = links.iter().map(|l| l.entity_id.as_str()).collect();
        assert_eq!(ids, ["page_adele", "song_hello"]);
        assert_eq!((links[0].start, links[0].end), (0, 1));
        // adele: overlap {hello} vs {singer, hello} = 1/2
        let expected = 1.0 * (0.5 + 0.25) * (0.5 + 0.45);
        assert!((links[0].score - expected).abs() < 1e-12);
    }

    #[test]
    fn no_alias_overlap_links_nothing() {
        let kb = KnowledgeBase::new(vec![EntityRecord::new("a", "page", &["adele"], 0.9)]).unwrap();
        assert!(link_entities(&toks("weather today"), &kb, None, 0.0).is_empty());
    }

    #[test]
    fn partial_alias_has_lower_exactness() {
        let kb =
            KnowledgeBase::new(vec![EntityRecord::new("a", "movie", &["life of pi"], 1.0)]).unwrap();
        let c = link_candidates(&toks("pi"), &kb, None);
        assert_eq!(c.len(), 1);
        assert!((c[0].score - (1.0 / 3.0) * 0.5 * 1.0).abs() < 1e-12);
    }

    #[test]
    fn connected_entities_get_popularity_floor() {
        let kb = KnowledgeBase::new(vec![
            EntityRecord::new("p_alice", "person", &["alice"], 0.1).with_ref("alice"),
        ])
        .unwrap();
        let mut g = SocialGraph::new();
        g.add_edge(Edge::new("me", "alice", EdgeLabel::Friend));
        let ctx = LinkContext { searcher: "me", graph: &g };
        let with = link_entities(&toks("alice"), &kb, Some(ctx), 0.0)[0].score;
        let without = link_entities(&toks("alice"), &kb, None, 0.0)[0].score;
        assert!((with - 0.5 * 0.9).abs() < 1e-12);
        assert!((without - 0.5 * 0.55).abs() < 1e-12);
    }

    #[test]
    fn threshold_drops_weak_links() {
        let kb = KnowledgeBase::new(vec![EntityRecord::new("a", "page", &["x"], 0.0)]).unwrap();
        assert_eq!(link_entities(&toks("x"), &kb, None, 0.3).len(), 0);
        assert_eq!(link_entities(&toks("x"), &kb, None, 0.25).len(), 1);
    }

    #[test]
    fn kb_rejects_bad_records() {
        assert!(KnowledgeBase::new(vec![EntityRecord::new("a", "t", &[], 0.5)]).is_err());
        assert!(KnowledgeBase::new(vec![EntityRecord::new("a", "t", &["x"], 1.5)]).is_err());
        assert!(KnowledgeBase::new(vec![
            EntityRecord::new("a", "t", &["x"], 0.5),
            EntityRecord::new("a", "t", &["y"], 0.5)
        ])
        .is_err());
    }
}
