//! Product-expectation verification tests: declarative checks that a query
//! returns, or avoids, particular documents.
//!
//! Expectations are written in a small line language:
//!
//! ```text
//! top1: relation=friend type=user
//! doc@rank: d42 <= 3
//! topk: d3 5
//! excludes: d7
//! before: d1 d2
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combiner::{RankedList, RankerConfig};
use crate::corpus::{social_relations, DocType, Document, Relation, StructuredSuggestion};
use crate::engine::{Engine, SearchRequest};
use crate::error::Error;
use crate::records::Record;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DocPredicate {
    Type(DocType),
    Relation(Relation),
    Id(String),
    Author(String),
    Publisher(String),
    /// The document's most probable language.
    Lang(String),
}

impl DocPredicate {
    fn holds(&self, doc: &Document, searcher: &str, engine: &Engine) -> bool {
        match self {
            DocPredicate::Type(t) => doc.doc_type == *t,
            DocPredicate::Relation(r) => social_relations(engine.corpus().graph(), searcher, doc).contains(*r),
            DocPredicate::Id(id) => &doc.doc_id == id,
            DocPredicate::Author(a) => doc.author_id.as_deref() == Some(a.as_str()),
            DocPredicate::Publisher(p) => doc.publisher_id.as_deref() == Some(p.as_str()),
            DocPredicate::Lang(l) => doc
                .languages
                .iter()
                .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(a.0)))
                .is_some_and(|(code, _)| code == l),
        }
    }
}

impl fmt::Display for DocPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DocPredicate::Type(t) => write!(f, "type={}", t.as_str()),
            DocPredicate::Relation(r) => write!(f, "relation={}", r.as_str()),
            DocPredicate::Id(v) => write!(f, "id={v}"),
            DocPredicate::Author(v) => write!(f, "author={v}"),
            DocPredicate::Publisher(v) => write!(f, "publisher={v}"),
            DocPredicate::Lang(v) => write!(f, "lang={v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Expectation {
    Top1(Vec<DocPredicate>),
    DocAtRank { doc_id: String, max_rank: usize },
    InTopK { doc_id: String, k: usize },
    Excludes(String),
    Before { first: String, second: String },
}

impl fmt::Display for Expectation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expectation::Top1(preds) => {
                f.write_str("top1:")?;
                for p in preds {
                    write!(f, " {p}")?;
                }
                Ok(())
            }
            Expectation::DocAtRank { doc_id, max_rank } => write!(f, "doc@rank: {doc_id} <= {max_rank}"),
            Expectation::InTopK { doc_id, k } => write!(f, "topk: {doc_id} {k}"),
            Expectation::Excludes(d) => write!(f, "excludes: {d}"),
            Expectation::Before { first, second } => write!(f, "before: {first} {second}"),
        }
    }
}

fn positive(s: &str, what: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(format!("{what} must be an integer >= 1, got `{s}`")),
    }
}

impl FromStr for Expectation {
    type Err = String;

    fn from_str(line: &str) -> Result<Self, String> {
        let (head, rest) = line
            .split_once(':')
            .ok_or_else(|| format!("expectation `{line}` is missing `:`"))?;
        let args: Vec<&str> = rest.split_whitespace().collect();
        let arity = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(format!("`{}` takes {n} argument(s), got {}", head.trim(), args.len()))
            }
        };
        match head.trim() {
            "top1" => {
                if args.is_empty() {
                    return Err("`top1` needs at least one key=value predicate".into());
                }
                let mut preds = Vec::new();
                for a in args {
                    let (k, v) = a
                        .split_once('=')
                        .ok_or_else(|| format!("predicate `{a}` is not key=value"))?;
                    preds.push(match k {
                        "type" => DocPredicate::Type(v.parse()?),
                        "relation" => DocPredicate::Relation(v.parse()?),
                        "id" => DocPredicate::Id(v.into()),
                        "author" => DocPredicate::Author(v.into()),
                        "publisher" => DocPredicate::Publisher(v.into()),
                        "lang" => DocPredicate::Lang(v.into()),
                        other => {
                            return Err(format!(
                                "unknown predicate key `{other}` (expected type, relation, id, author, publisher, lang)"
                            ))
                        }
                    });
                }
                Ok(Expectation::Top1(preds))
            }
            "doc@rank" => {
                if args.len() != 3 || args[1] != "<=" {
                    return Err(format!("expected `doc@rank: <doc> <= <rank>`, got `{line}`"));
                }
                Ok(Expectation::DocAtRank {
                    doc_id: args[0].into(),
                    max_rank: positive(args[2], "rank")?,
                })
            }
            "topk" => {
                arity(2)?;
                Ok(Expectation::InTopK {
                    doc_id: args[0].into(),
                    k: positive(args[1], "k")?,
                })
            }
            "excludes" => {
                arity(1)?;
                Ok(Expectation::Excludes(args[0].into()))
            }
            "before" => {
                arity(2)?;
                Ok(Expectation::Before {
                    first: args[0].into(),
                    second: args[1].into(),
                })
            }
            other => Err(format!(
                "unknown expectation `{other}` (expected top1, doc@rank, topk, excludes, before)"
            )),
        }
    }
}

impl TryFrom<String> for Expectation {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<Expectation> for String {
    fn from(e: Expectation) -> String {
        e.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BvtCase {
    pub case_id: String,
    pub query_text: String,
    pub user_id: String,
    #[serde(default)]
    pub intent_tag: String,
    #[serde(default)]
    pub language_tag: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suggestion: Option<StructuredSuggestion>,
    pub expect: Vec<Expectation>,
}

impl Record for BvtCase {
    const KIND: &'static str = "bvt case";
    const FIELDS: &'static [&'static str] = &[
        "case_id",
        "query_text",
        "user_id",
        "intent_tag",
        "language_tag",
        "suggestion",
        "expect",
    ];

    fn record_id(&self) -> String {
        self.case_id.clone()
    }

    fn validate(&self) -> Result<(), (&'static str, String)> {
        if self.case_id.is_empty() {
            return Err(("case_id", "must be nonempty".into()));
        }
        if self.expect.is_empty() {
            return Err(("expect", "needs at least one expectation".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseStatus {
    Pass,
    Fail,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub case_id: String,
    pub intent_tag: String,
    pub language_tag: String,
    pub status: CaseStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    /// Top of the ranked list the case was judged against.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub excerpt: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub passed: usize,
    pub failed: usize,
    pub errors: usize,
}

impl Tally {
    pub fn total(&self) -> usize {
        self.passed + self.failed + self.errors
    }

    pub fn pass_rate(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            self.passed as f64 / self.total() as f64
        }
    }

    fn add(&mut self, s: CaseStatus) {
        match s {
            CaseStatus::Pass => self.passed += 1,
            CaseStatus::Fail => self.failed += 1,
            CaseStatus::Error => self.errors += 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BvtReport {
    /// Sorted by case id.
    pub cases: Vec<CaseResult>,
    pub overall: Tally,
    pub by_intent: BTreeMap<String, Tally>,
    pub by_language: BTreeMap<String, Tally>,
}

impl BvtReport {
    pub fn from_cases(mut cases: Vec<CaseResult>) -> Self {
        cases.sort_by(|a, b| a.case_id.cmp(&b.case_id));
        let mut r = BvtReport::default();
        for c in &cases {
            r.overall.add(c.status);
            r.by_intent.entry(c.intent_tag.clone()).or_default().add(c.status);
            r.by_language.entry(c.language_tag.clone()).or_default().add(c.status);
        }
        r.cases = cases;
        r
    }

    pub fn pass_rate(&self) -> f64 {
        self.overall.pass_rate()
    }

    pub fn intent_pass_rate(&self, tag: &str) -> Option<f64> {
        self.by_intent.get(tag).map(Tally::pass_rate)
    }

    pub fn all_passed(&self) -> bool {
        self.overall.passed == self.overall.total()
    }

    /// Human-readable summary.
    pub fn summary(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        let t = &self.overall;
        let _ = writeln!(
            s,
            "bvt: {}/{} passed ({:.4}), {} failed, {} errors",
            t.passed,
            t.total(),
            t.pass_rate(),
            t.failed,
            t.errors
        );
        for (label, map) in [("intent", &self.by_intent), ("language", &self.by_language)] {
            for (k, t) in map {
                let k = if k.is_empty() { "-" } else { k };
                let _ = writeln!(s, "  {label} {k}: {}/{} ({:.4})", t.passed, t.total(), t.pass_rate());
            }
        }
        for c in self.cases.iter().filter(|c| c.status != CaseStatus::Pass) {
            let what = c.failed.as_deref().or(c.message.as_deref()).unwrap_or("");
            let _ = writeln!(s, "  {:?} {}: {what}", c.status, c.case_id);
        }
        s
    }
}

fn check(e: &Expectation, list: &RankedList, searcher: &str, engine: &Engine) -> bool {
    let rank = |d: &str| list.full_rank(d);
    match e {
        Expectation::Top1(preds) => list
            .results
            .first()
            .and_then(|r| engine.corpus().document(&r.doc_id))
            .is_some_and(|doc| preds.iter().all(|p| p.holds(doc, searcher, engine))),
        Expectation::DocAtRank { doc_id, max_rank } => rank(doc_id).is_some_and(|r| r <= *max_rank),
        Expectation::InTopK { doc_id, k } => rank(doc_id).is_some_and(|r| r <= *k),
        Expectation::Excludes(d) => !list.results.iter().any(|r| &r.doc_id == d),
        Expectation::Before { first, second } => match (rank(first), rank(second)) {
            (Some(a), Some(b)) => a < b,
            (Some(_), None) => true,
            _ => false,
        },
    }
}

pub fn run_case(case: &BvtCase, engine: &Engine, config: &RankerConfig) -> CaseResult {
    let mut out = CaseResult {
        case_id: case.case_id.clone(),
        intent_tag: case.intent_tag.clone(),
        language_tag: case.language_tag.clone(),
        status: CaseStatus::Pass,
        failed: None,
        message: None,
        excerpt: Vec::new(),
    };
    let req = SearchRequest::new(&case.query_text, &case.user_id).with_suggestion(case.suggestion.clone());
    let list = match engine.search_with(&req, config) {
        Ok(l) => l,
        Err(e) => {
            out.status = CaseStatus::Error;
            out.message = Some(match e {
                Error::UnknownUser(u) => format!("unknown user `{u}`"),
                other => other.to_string(),
            });
            return out;
        }
    };
    if let Some(e) = case.expect.iter().find(|e| !check(e, &list, &case.user_id, engine)) {
        out.status = CaseStatus::Fail;
        out.failed = Some(e.to_string());
        out.excerpt = list
            .results
            .iter()
            .take(5)
            .map(|r| (r.doc_id.clone(), r.score))
            .collect();
    }
    out
}

/// Runs every case; the report does not depend on suite order.
pub fn run_bvts(suite: &[BvtCase], engine: &Engine, config: &RankerConfig) -> BvtReport {
    let cases = suite.par_iter().map(|c| run_case(c, engine, config)).collect();
    BvtReport::from_cases(cases)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expectation_round_trip() {
        for line in [
            "top1: relation=friend type=user",
            "doc@rank: d42 <= 3",
            "topk: d3 5",
            "excludes: d7",
            "before: d1 d2",
            "top1: publisher=p1 lang=en",
        ] {
            let e: Expectation = line.parse().unwrap();
            assert_eq!(e.to_string(), line);
        }
    }

    #[test]
    fn malformed_expectations() {
        for line in [
            "top1:",
            "top1: color=red",
            "doc@rank: d1 3",
            "doc@rank: d1 <= 0",
            "topk: d1",
            "after: a b",
            "no colon",
            "top1: type=spaceship",
        ] {
            assert!(line.parse::<Expectation>().is_err(), "{line}");
        }
    }

    #[test]
    fn case_needs_expectations() {
        let text = r#"{"case_id":"c","query_text":"q","user_id":"u","expect":[]}"#;
        let mut w = Vec::new();
        assert!(crate::records::parse_records::<BvtCase>(text, "suite", &mut w).is_err());
    }

    #[test]
    fn tallies() {
        let mk = |id: &str, tag: &str, s| CaseResult {
            case_id: id.into(),
            intent_tag: tag.into(),
            language_tag: "en".into(),
            status: s,
            failed: None,
            message: None,
            excerpt: vec![],
        };
        let r = BvtReport::from_cases(vec![
            mk("b", "friend", CaseStatus::Pass),
            mk("a", "friend", CaseStatus::Fail),
            mk("c", "video", CaseStatus::Error),
        ]);
        assert_eq!(r.cases[0].case_id, "a");
        assert_eq!(r.overall.total(), 3);
        assert!((r.pass_rate() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.intent_pass_rate("friend"), Some(0.5));
        assert_eq!(r.intent_pass_rate("video"), Some(0.0));
    }
}
