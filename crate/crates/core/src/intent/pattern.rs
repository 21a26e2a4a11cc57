//! Query pattern grammar and whole-query matcher.
//!
//! A pattern is a whitespace-separated sequence of literals and slots, e.g.
//! `<movie:entity> <trailers:dictionary>`. Entity slots match knowledge-base
//! aliases of the slot's entity type, dictionary slots match dictionary phrases.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intent::linking::KnowledgeBase;
use crate::records::Record;
use crate::tokenize::tokenize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternToken {
    Literal(String),
    EntitySlot { name: String, entity_type: String },
    DictSlot { name: String, dictionary_id: String },
}

impl PatternToken {
    pub fn slot_name(&self) -> Option<&str> {
        match self {
            PatternToken::Literal(_) => None,
            PatternToken::EntitySlot { name, .. } | PatternToken::DictSlot { name, .. } => Some(name),
        }
    }
}

/// Parses a pattern source string. Surrounding braces are optional.
pub fn parse_pattern(text: &str) -> Result<Vec<PatternToken>> {
    let chars: Vec<char> = text.chars().collect();
    let mut lo = 0;
    let mut hi = chars.len();
    while lo < hi && chars[lo].is_whitespace() {
        lo += 1;
    }
    while hi > lo && chars[hi - 1].is_whitespace() {
        hi -= 1;
    }
    if hi > lo + 1 && chars[lo] == '{' && chars[hi - 1] == '}' {
        lo += 1;
        hi -= 1;
    }

    let mut raw: Vec<(usize, String)> = Vec::new();
    let mut i = lo;
    while i < hi {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < hi && !chars[i].is_whitespace() {
            i += 1;
        }
        raw.push((start + 1, chars[start..i].iter().collect()));
    }

    let mut tokens = Vec::new();
    let mut seen_slots = BTreeSet::new();
    for (column, tok) in raw {
        if let Some(inner) = tok.strip_prefix('<') {
            let Some(inner) = inner.strip_suffix('>') else {
                return Err(Error::Pattern {
                    column,
                    message: format!("unterminated slot `{tok}`"),
                });
            };
            let Some((name, kind)) = inner.split_once(':') else {
                return Err(Error::Pattern {
                    column,
                    message: format!("slot `{tok}` is missing `:`"),
                });
            };
            let name = name.trim();
            if name.is_empty() {
                return Err(Error::Pattern {
                    column,
                    message: "empty slot name".into(),
                });
            }
            let slot = match kind.trim() {
                "entity" => PatternToken::EntitySlot {
                    name: name.to_string(),
                    entity_type: name.to_string(),
                },
                "dictionary" => PatternToken::DictSlot {
                    name: name.to_string(),
                    dictionary_id: name.to_string(),
                },
                other => {
                    return Err(Error::Pattern {
                        column,
                        message: format!(
                            "unknown slot kind `{other}` (expected `entity` or `dictionary`)"
                        ),
                    })
                }
            };
            if !seen_slots.insert(name.to_string()) {
                return Err(Error::Pattern {
                    column,
                    message: format!("duplicate slot name `{name}`"),
                });
            }
            tokens.push(slot);
        } else {
            tokens.extend(tokenize(&tok).into_iter().map(PatternToken::Literal));
        }
    }
    if tokens.is_empty() {
        return Err(Error::Pattern {
            column: 1,
            message: "pattern has no tokens".into(),
        });
    }
    Ok(tokens)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryPattern {
    pub pattern_id: String,
    pub tokens: Vec<PatternToken>,
    pub target_intent: String,
    pub base_confidence: f64,
}

impl QueryPattern {
    pub fn parse(
        pattern_id: impl Into<String>,
        source: &str,
        target_intent: impl Into<String>,
        base_confidence: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&base_confidence) {
            return Err(Error::Config(format!(
                "base_confidence {base_confidence} outside [0, 1]"
            )));
        }
        Ok(Self {
            pattern_id: pattern_id.into(),
            tokens: parse_pattern(source)?,
            target_intent: target_intent.into(),
            base_confidence,
        })
    }

    pub fn dictionary_ids(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().filter_map(|t| match t {
            PatternToken::DictSlot { dictionary_id, .. } => Some(dictionary_id.as_str()),
            _ => None,
        })
    }
}

/// Pattern file record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternRecord {
    pub pattern_id: String,
    pub source: String,
    pub target_intent: String,
    pub base_confidence: f64,
}

impl Record for PatternRecord {
    const KIND: &'static str = "pattern";
    const FIELDS: &'static [&'static str] =
        &["pattern_id", "source", "target_intent", "base_confidence"];

    fn record_id(&self) -> String {
        self.pattern_id.clone()
    }

    fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        parse_pattern(&self.source).map_err(|e| ("source", e.to_string()))?;
        if !(0.0..=1.0).contains(&self.base_confidence) {
            return Err(("base_confidence", "outside [0, 1]".into()));
        }
        Ok(())
    }
}

impl TryFrom<&PatternRecord> for QueryPattern {
    type Error = Error;

    fn try_from(r: &PatternRecord) -> Result<Self> {
        QueryPattern::parse(&r.pattern_id, &r.source, &r.target_intent, r.base_confidence)
    }
}

/// A named set of (possibly multi-word) phrases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DictionaryRecord", into = "DictionaryRecord")]
pub struct Dictionary {
    pub dictionary_id: String,
    pub phrases: BTreeSet<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DictionaryRecord {
    pub dictionary_id: String,
    pub phrases: Vec<String>,
}

impl TryFrom<DictionaryRecord> for Dictionary {
    type Error = String;

    fn try_from(r: DictionaryRecord) -> std::result::Result<Self, String> {
        Dictionary::new(r.dictionary_id, r.phrases.iter().map(String::as_str))
    }
}

impl From<Dictionary> for DictionaryRecord {
    fn from(d: Dictionary) -> Self {
        Self {
            dictionary_id: d.dictionary_id,
            phrases: d.phrases.iter().map(|p| p.join(" ")).collect(),
        }
    }
}

impl Dictionary {
    pub fn new<'a>(
        dictionary_id: impl Into<String>,
        phrases: impl IntoIterator<Item = &'a str>,
    ) -> std::result::Result<Self, String> {
        let dictionary_id = dictionary_id.into();
        let phrases: BTreeSet<Vec<String>> = phrases
            .into_iter()
            .map(tokenize)
            .filter(|p| !p.is_empty())
            .collect();
        if phrases.is_empty() {
            return Err(format!("dictionary `{dictionary_id}` has no phrases"));
        }
        Ok(Self {
            dictionary_id,
            phrases,
        })
    }
}

impl Record for Dictionary {
    const KIND: &'static str = "dictionary";
    const FIELDS: &'static [&'static str] = &["dictionary_id", "phrases"];

    fn record_id(&self) -> String {
        self.dictionary_id.clone()
    }
}

/// Dictionaries keyed by id.
#[derive(Debug, Clone, Default)]
pub struct Dictionaries {
    by_id: BTreeMap<String, Dictionary>,
}

impl Dictionaries {
    pub fn new(dicts: impl IntoIterator<Item = Dictionary>) -> Result<Self> {
        let mut by_id = BTreeMap::new();
        for d in dicts {
            if by_id.contains_key(&d.dictionary_id) {
                return Err(Error::Config(format!(
                    "duplicate dictionary `{}`",
                    d.dictionary_id
                )));
            }
            by_id.insert(d.dictionary_id.clone(), d);
        }
        Ok(Self { by_id })
    }

    pub fn get(&self, id: &str) -> Option<&Dictionary> {
        self.by_id.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Dictionary> {
        self.by_id.values()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capture {
    Entity { entity_id: String },
    Phrase { phrase: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotCapture {
    pub capture: Capture,
    /// Token span `[start, end)` in the query.
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternMatch {
    pub pattern_id: String,
    pub target_intent: String,
    pub captures: BTreeMap<String, SlotCapture>,
    pub confidence: f64,
}

impl PatternMatch {
    pub fn entity(&self, slot: &str) -> Option<&str> {
        match self.captures.get(slot).map(|c| &c.capture) {
            Some(Capture::Entity { entity_id }) => Some(entity_id),
            _ => None,
        }
    }

    pub fn phrase(&self, slot: &str) -> Option<&str> {
        match self.captures.get(slot).map(|c| &c.capture) {
            Some(Capture::Phrase { phrase }) => Some(phrase),
            _ => None,
        }
    }
}

/// Matches `pattern` against the whole query.
///
/// Slots prefer the longest match at each position and backtrack to shorter
/// ones when the rest of the pattern cannot consume the remaining tokens. Among
/// entities with equally long aliases at a position, higher popularity wins,
/// then the smaller entity id. The confidence is the pattern's base confidence.
pub fn match_pattern(
    pattern: &QueryPattern,
    tokens: &[String],
    kb: &KnowledgeBase,
    dicts: &Dictionaries,
) -> Option<PatternMatch> {
    let mut captures = Vec::new();
    if !descend(&pattern.tokens, 0, tokens, 0, kb, dicts, &mut captures) {
        return None;
    }
    let mut map = BTreeMap::new();
    for (slot_idx, cap) in captures {
        let name = pattern.tokens[slot_idx]
            .slot_name()
            .expect("captures only come from slots")
            .to_string();
        map.insert(name, cap);
    }
    Some(PatternMatch {
        pattern_id: pattern.pattern_id.clone(),
        target_intent: pattern.target_intent.clone(),
        captures: map,
        confidence: pattern.base_confidence,
    })
}

fn descend(
    pattern: &[PatternToken],
    pos: usize,
    tokens: &[String],
    cursor: usize,
    kb: &KnowledgeBase,
    dicts: &Dictionaries,
    out: &mut Vec<(usize, SlotCapture)>,
) -> bool {
    if pos == pattern.len() {
        return cursor == tokens.len();
    }
    if cursor >= tokens.len() {
        return false;
    }
    match &pattern[pos] {
        PatternToken::Literal(word) => {
            tokens[cursor] == *word && descend(pattern, pos + 1, tokens, cursor + 1, kb, dicts, out)
        }
        PatternToken::EntitySlot { entity_type, .. } => {
            let options = kb.alias_matches_at(entity_type, tokens, cursor);
            for (len, entity_id) in options {
                out.push((
                    pos,
                    SlotCapture {
                        capture: Capture::Entity {
                            entity_id: entity_id.to_string(),
                        },
                        start: cursor,
                        end: cursor + len,
                    },
                ));
                if descend(pattern, pos + 1, tokens, cursor + len, kb, dicts, out) {
                    return true;
                }
                out.pop();
            }
            false
        }
        PatternToken::DictSlot { dictionary_id, .. } => {
            let Some(dict) = dicts.get(dictionary_id) else {
                return false;
            };
            let mut lens: Vec<usize> = dict
                .phrases
                .iter()
                .filter(|p| tokens[cursor..].starts_with(p))
                .map(Vec::len)
                .collect();
            lens.sort_unstable_by(|a, b| b.cmp(a));
            lens.dedup();
            for len in lens {
                out.push((
                    pos,
                    SlotCapture {
                        capture: Capture::Phrase {
                            phrase: tokens[cursor..cursor + len].join(" "),
                        },
                        start: cursor,
                        end: cursor + len,
                    },
                ));
                if descend(pattern, pos + 1, tokens, cursor + len, kb, dicts, out) {
                    return true;
                }
                out.pop();
            }
            false
        }
    }
}

/// Compiled set of patterns with their dictionaries validated.
#[derive(Debug, Clone, Default)]
pub struct PatternSet {
    patterns: Vec<QueryPattern>,
}

impl PatternSet {
    /// Fails when a pattern references a dictionary that does not exist.
    pub fn new(mut patterns: Vec<QueryPattern>, dicts: &Dictionaries) -> Result<Self> {
        let mut ids = HashMap::new();
        for p in &patterns {
            if ids.insert(p.pattern_id.clone(), ()).is_some() {
                return Err(Error::Config(format!("duplicate pattern id `{}`", p.pattern_id)));
            }
            if let Some(missing) = p.dictionary_ids().find(|d| !dicts.contains(d)) {
                return Err(Error::Config(format!(
                    "pattern `{}` references unknown dictionary `{missing}`",
                    p.pattern_id
                )));
            }
        }
        patterns.sort_by(|a, b| a.pattern_id.cmp(&b.pattern_id));
        Ok(Self { patterns })
    }

    pub fn iter(&self) -> impl Iterator<Item = &QueryPattern> {
        self.patterns.iter()
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intent::linking::EntityRecord;

    fn kb() -> KnowledgeBase {
        KnowledgeBase::new(vec![
            EntityRecord::new("m_avengers", "movie", &["avengers", "the avengers"], 0.9),
            EntityRecord::new("m_pi", "movie", &["life of pi"], 0.5),
            EntityRecord::new("m_pi2", "movie", &["life of pi"], 0.7),
        ])
        .unwrap()
    }

    fn dicts() -> Dictionaries {
        Dictionaries::new([Dictionary::new("trailers", ["trailers", "trailer", "official trailer"]).unwrap()])
            .unwrap()
    }

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn parses_entity_slot_and_literal() {
        assert_eq!(
            parse_pattern("<movie:entity> trailers").unwrap(),
            vec![
                PatternToken::EntitySlot {
                    name: "movie".into(),
                    entity_type: "movie".into()
                },
                PatternToken::Literal("trailers".into())
            ]
        );
        assert_eq!(parse_pattern("{<movie:entity> trailers}").unwrap().len(), 2);
    }

    #[test]
    fn parses_plain_literal() {
        assert_eq!(parse_pattern("hello").unwrap(), vec![PatternToken::Literal("hello".into())]);
    }

    #[test]
    fn parses_two_slots() {
        let t = parse_pattern("<movie:entity> <trailers:dictionary>").unwrap();
        assert!(matches!(t[0], PatternToken::EntitySlot { .. }));
        assert_eq!(
            t[1],
            PatternToken::DictSlot {
                name: "trailers".into(),
                dictionary_id: "trailers".into()
            }
        );
    }

    #[test]
    fn malformed_slots_report_column() {
        let cases = [
            ("hello <movie>", 7),
            ("<:entity>", 1),
            ("a  <x:regex>", 4),
            ("<x:entity", 1),
            ("<x:entity> <x:dictionary>", 12),
        ];
        for (src, col) in cases {
            match parse_pattern(src) {
                Err(Error::Pattern { column, .. }) => assert_eq!(column, col, "{src}"),
                other => panic!("{src}: {other:?}"),
            }
        }
        assert!(parse_pattern("  ").is_err());
    }

    #[test]
    fn matches_avengers_trailers() {
        let p = QueryPattern::parse("p", "<movie:entity> trailers", "video_publisher", 0.8).unwrap();
        let m = match_pattern(&p, &toks("avengers trailers"), &kb(), &dicts()).unwrap();
        assert_eq!(m.entity("movie"), Some("m_avengers"));
        assert_eq!(m.confidence, 0.8);
        assert!(match_pattern(&p, &toks("avengers"), &kb(), &dicts()).is_none());
    }

    #[test]
    fn dictionary_slot_and_popularity_tiebreak() {
        let p = QueryPattern::parse("p", "<movie:entity> <trailers:dictionary>", "t", 1.0).unwrap();
        let m = match_pattern(&p, &toks("life of pi official trailer"), &kb(), &dicts()).unwrap();
        assert_eq!(m.entity("movie"), Some("m_pi2"));
        assert_eq!(m.phrase("trailers"), Some("official trailer"));
        let c = &m.captures["movie"];
        assert_eq!((c.start, c.end), (0, 3));
    }

    #[test]
    fn backtracks_from_longest_alias() {
        let kb = KnowledgeBase::new(vec![
            EntityRecord::new("a", "x", &["new york", "new"], 0.5),
        ])
        .unwrap();
        let p = QueryPattern::parse("p", "<x:entity> york times", "t", 1.0).unwrap();
        let m = match_pattern(&p, &toks("new york times"), &kb, &Dictionaries::default());
        assert!(m.is_some());
        let m = m.unwrap();
        assert_eq!(m.captures["x"].end, 1);
    }

    #[test]
    fn unknown_dictionary_is_config_error() {
        let p = QueryPattern::parse("p", "<foo:dictionary>", "t", 1.0).unwrap();
        assert!(matches!(PatternSet::new(vec![p], &dicts()), Err(Error::Config(_))));
    }
}
