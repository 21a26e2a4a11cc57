//! Sharded inverted index and the fan-out/merge retrieval topology.
//!
//! Index shards score their postings with BM25 using corpus-wide statistics, rank
//! aggregators merge groups of shard results and the top aggregator produces the
//! final candidate list. Because every shard sees the same global statistics, a
//! document's first-pass score does not depend on how the corpus is sharded.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::hash::Hasher;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use fnv::FnvHasher;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::tokenize::Tokenizer;

pub const SNAPSHOT_FORMAT: &str = "intentrank-index";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0 && self.k1.is_finite()) {
            return Err(Error::Config(format!("bm25 k1 must be > 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::Config(format!("bm25 b must be in [0, 1], got {}", self.b)));
        }
        Ok(())
    }
}

/// Corpus-wide statistics shared by every shard.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GlobalStats {
    pub num_docs: u64,
    pub df: HashMap<String, u64>,
    pub total_len: u64,
    pub avgdl: f64,
}

impl GlobalStats {
    pub fn df(&self, term: &str) -> u64 {
        self.df.get(term).copied().unwrap_or(0)
    }

    /// `ln(1 + (N - df + 0.5) / (df + 0.5))`
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.num_docs as f64;
        let df = self.df(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }
}

/// One term's BM25 contribution.
pub fn bm25_term(idf: f64, tf: u32, doc_len: u32, avgdl: f64, params: Bm25Params) -> f64 {
    if tf == 0 {
        return 0.0;
    }
    let tf = tf as f64;
    let len_ratio = if avgdl > 0.0 { doc_len as f64 / avgdl } else { 1.0 };
    let norm = params.k1 * (1.0 - params.b + params.b * len_ratio);
    idf * tf * (params.k1 + 1.0) / (tf + norm)
}

/// BM25 of a document given its term frequencies.
///
/// `query_terms` should be distinct; they are summed in the given order.
pub fn first_pass_score(
    query_terms: &[String],
    term_freqs: &HashMap<String, u32>,
    doc_len: u32,
    stats: &GlobalStats,
    params: Bm25Params,
) -> f64 {
    query_terms
        .iter()
        .map(|t| {
            let tf = term_freqs.get(t).copied().unwrap_or(0);
            bm25_term(stats.idf(t), tf, doc_len, stats.avgdl, params)
        })
        .sum()
}

/// Distinct query terms in ascending order; the canonical summation order.
pub fn query_terms(tokens: &[String]) -> Vec<String> {
    tokens
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldFlags {
    pub title: bool,
    pub body: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub doc_id: String,
    pub tf: u32,
    pub fields: FieldFlags,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Shard {
    /// Postings per term, sorted by doc id.
    pub postings: BTreeMap<String, Vec<Posting>>,
    pub doc_lengths: BTreeMap<String, u32>,
}

impl Shard {
    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.doc_lengths.keys().map(String::as_str)
    }

    /// Top `k` documents of this shard for the given distinct terms.
    pub fn search(
        &self,
        terms: &[String],
        k: usize,
        stats: &GlobalStats,
        params: Bm25Params,
    ) -> Vec<Candidate> {
        let mut acc: HashMap<&str, f64> = HashMap::new();
        for term in terms {
            let Some(list) = self.postings.get(term) else {
                continue;
            };
            let idf = stats.idf(term);
            for p in list {
                let len = self.doc_lengths[&p.doc_id];
                *acc.entry(&p.doc_id).or_insert(0.0) +=
                    bm25_term(idf, p.tf, len, stats.avgdl, params);
            }
        }
        let mut out: Vec<Candidate> = acc
            .into_iter()
            .map(|(d, s)| Candidate {
                doc_id: d.to_string(),
                first_pass_score: s,
            })
            .collect();
        out.sort_by(Candidate::ranking_order);
        out.truncate(k);
        out
    }
}

/// A retrieved document with its first-pass BM25 score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub doc_id: String,
    pub first_pass_score: f64,
}

impl Candidate {
    /// Score descending, then doc id ascending.
    pub fn ranking_order(a: &Candidate, b: &Candidate) -> Ordering {
        b.first_pass_score
            .total_cmp(&a.first_pass_score)
            .then_with(|| a.doc_id.cmp(&b.doc_id))
    }
}

/// Merges lists that are each sorted by [`Candidate::ranking_order`], keeping the top `k`.
pub fn merge_top_k(lists: Vec<Vec<Candidate>>, k: usize) -> Vec<Candidate> {
    let mut all: Vec<Candidate> = lists.into_iter().flatten().collect();
    all.sort_by(Candidate::ranking_order);
    all.truncate(k);
    all
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrieveOptions {
    /// Results each index shard returns to its rank aggregator.
    pub per_shard_k: usize,
    /// Size of the final candidate list.
    pub k: usize,
    /// Number of shards merged by each rank aggregator.
    pub shards_per_aggregator: usize,
    /// Allow `per_shard_k < k`; otherwise `per_shard_k` is raised to `k`.
    pub allow_shallow_shards: bool,
}

impl Default for RetrieveOptions {
    fn default() -> Self {
        Self {
            per_shard_k: 200,
            k: 200,
            shards_per_aggregator: 2,
            allow_shallow_shards: false,
        }
    }
}

impl RetrieveOptions {
    pub fn with_k(k: usize) -> Self {
        Self {
            per_shard_k: k,
            k,
            ..Self::default()
        }
    }

    fn effective_per_shard_k(&self) -> usize {
        if self.allow_shallow_shards {
            self.per_shard_k
        } else {
            self.per_shard_k.max(self.k)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShardedIndex {
    num_shards: usize,
    shards: Vec<Shard>,
    stats: GlobalStats,
    tokenizer: Tokenizer,
    params: Bm25Params,
}

/// Stable shard assignment: FNV-1a of the doc id modulo the shard count.
pub fn shard_of(doc_id: &str, num_shards: usize) -> usize {
    let mut h = FnvHasher::default();
    h.write(doc_id.as_bytes());
    (h.finish() % num_shards as u64) as usize
}

impl ShardedIndex {
    pub fn build(
        corpus: &Corpus,
        num_shards: usize,
        tokenizer: Tokenizer,
        params: Bm25Params,
    ) -> Result<Self> {
        if num_shards < 1 {
            return Err(Error::Config("num_shards must be at least 1".into()));
        }
        params.validate()?;
        let mut shards = vec![Shard::default(); num_shards];
        let mut stats = GlobalStats::default();
        for doc in corpus.documents() {
            let title = tokenizer.tokenize(&doc.title);
            let body = tokenizer.tokenize(&doc.body);
            let mut per_term: BTreeMap<String, (u32, FieldFlags)> = BTreeMap::new();
            for t in &title {
                let e = per_term.entry(t.clone()).or_default();
                e.0 += 1;
                e.1.title = true;
            }
            for t in &body {
                let e = per_term.entry(t.clone()).or_default();
                e.0 += 1;
                e.1.body = true;
            }
            let len = (title.len() + body.len()) as u32;
            let shard = &mut shards[shard_of(&doc.doc_id, num_shards)];
            shard.doc_lengths.insert(doc.doc_id.clone(), len);
            for (term, (tf, fields)) in per_term {
                *stats.df.entry(term.clone()).or_insert(0) += 1;
                shard.postings.entry(term).or_default().push(Posting {
                    doc_id: doc.doc_id.clone(),
                    tf,
                    fields,
                });
            }
            stats.num_docs += 1;
            stats.total_len += len as u64;
        }
        for shard in &mut shards {
            for list in shard.postings.values_mut() {
                list.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
            }
        }
        stats.avgdl = if stats.num_docs > 0 {
            stats.total_len as f64 / stats.num_docs as f64
        } else {
            0.0
        };
        Ok(Self {
            num_shards,
            shards,
            stats,
            tokenizer,
            params,
        })
    }

    pub fn num_shards(&self) -> usize {
        self.num_shards
    }

    pub fn shards(&self) -> &[Shard] {
        &self.shards
    }

    pub fn stats(&self) -> &GlobalStats {
        &self.stats
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    /// Fan out to every shard, merge per rank aggregator, then merge at the top aggregator.
    pub fn retrieve(&self, tokens: &[String], opts: &RetrieveOptions) -> Vec<Candidate> {
        if tokens.is_empty() || opts.k == 0 {
            return Vec::new();
        }
        let terms = query_terms(tokens);
        let per_shard = opts.effective_per_shard_k();
        let shard_results: Vec<Vec<Candidate>> = self
            .shards
            .par_iter()
            .map(|s| s.search(&terms, per_shard, &self.stats, self.params))
            .collect();
        let group = opts.shards_per_aggregator.max(1);
        let mut shard_results = shard_results.into_iter();
        let mut aggregated = Vec::new();
        loop {
            let chunk: Vec<Vec<Candidate>> = shard_results.by_ref().take(group).collect();
            if chunk.is_empty() {
                break;
            }
            aggregated.push(merge_top_k(chunk, per_shard));
        }
        merge_top_k(aggregated, opts.k)
    }

    /// Convenience wrapper that tokenizes `query` with the index tokenizer.
    pub fn retrieve_text(&self, query: &str, opts: &RetrieveOptions) -> Vec<Candidate> {
        self.retrieve(&self.tokenizer.tokenize(query), opts)
    }

    pub fn doc_len(&self, doc_id: &str) -> Option<u32> {
        self.shards[shard_of(doc_id, self.num_shards)]
            .doc_lengths
            .get(doc_id)
            .copied()
    }

    /// Writes a versioned line-delimited snapshot: a header line, then one line per shard.
    pub fn save_snapshot(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let header = SnapshotHeader {
            format: SNAPSHOT_FORMAT.to_string(),
            version: SNAPSHOT_VERSION,
            num_shards: self.num_shards,
            num_docs: self.stats.num_docs,
            total_len: self.stats.total_len,
            tokenizer: self.tokenizer.clone(),
            bm25: self.params,
        };
        let mut write = |v: String| writeln!(w, "{v}").map_err(|e| Error::io(path, e));
        write(serde_json::to_string(&header).expect("header serializes"))?;
        for shard in &self.shards {
            write(serde_json::to_string(shard).expect("shard serializes"))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load_snapshot(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let label = path.display().to_string();
        let mut lines = BufReader::new(file).lines();
        let parse_err = |line: usize, message: String| Error::Parse {
            file: label.clone(),
            line,
            message,
        };
        let first = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty snapshot".into()))?
            .map_err(|e| Error::io(path, e))?;
        let raw: serde_json::Value =
            serde_json::from_str(&first).map_err(|e| parse_err(1, e.to_string()))?;
        if raw.get("format").and_then(|f| f.as_str()) != Some(SNAPSHOT_FORMAT) {
            return Err(parse_err(1, "not an index snapshot".into()));
        }
        let found = raw.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != SNAPSHOT_VERSION {
            return Err(Error::SnapshotVersion {
                found,
                expected: SNAPSHOT_VERSION,
            });
        }
        let header: SnapshotHeader =
            serde_json::from_value(raw).map_err(|e| parse_err(1, e.to_string()))?;
        let mut shards = Vec::with_capacity(header.num_shards);
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let shard: Shard =
                serde_json::from_str(&line).map_err(|e| parse_err(i + 2, e.to_string()))?;
            shards.push(shard);
        }
        if shards.len() != header.num_shards {
            return Err(parse_err(
                shards.len() + 1,
                format!("expected {} shards, found {}", header.num_shards, shards.len()),
            ));
        }
        let mut stats = GlobalStats {
            num_docs: header.num_docs,
            total_len: header.total_len,
            ..GlobalStats::default()
        };
        let mut docs = 0u64;
        for shard in &shards {
            docs += shard.doc_lengths.len() as u64;
            for (term, list) in &shard.postings {
                *stats.df.entry(term.clone()).or_insert(0) += list.len() as u64;
            }
        }
        if docs != stats.num_docs {
            return Err(parse_err(1, "shard document counts disagree with header".into()));
        }
        stats.avgdl = if docs > 0 {
            stats.total_len as f64 / docs as f64
        } else {
            0.0
        };
        Ok(Self {
            num_shards: header.num_shards,
            shards,
            stats,
            tokenizer: header.tokenizer,
            params: header.bm25,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotHeader {
    format: String,
    version: u32,
    num_shards: usize,
    num_docs: u64,
    total_len: u64,
    tokenizer: Tokenizer,
    bm25: Bm25Params,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DocType, Document};

    fn corpus(docs: &[(&str, &str)]) -> Corpus {
        Corpus::new(
            docs.iter()
                .map(|(id, text)| Document::new(*id, DocType::Post, *text))
                .collect(),
            vec![],
            vec![],
        )
        .unwrap()
    }

    fn toks(q: &str) -> Vec<String> {
        crate::tokenize::tokenize(q)
    }

    #[test]
    fn single_doc_single_shard() {
        let c = corpus(&[("d1", "red fox jumps")]);
        let idx = ShardedIndex::build(&c, 1, Tokenizer::default(), Bm25Params::default()).unwrap();
        let terms: Vec<&String> = idx.shards()[0].postings.keys().collect();
        assert_eq!(terms, ["fox", "jumps", "red"]);
    }

    #[test]
    fn zero_shards_is_config_error() {
        let c = corpus(&[]);
        let err = ShardedIndex::build(&c, 0, Tokenizer::default(), Bm25Params::default());
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn idf_hand_value() {
        let stats = GlobalStats {
            num_docs: 2,
            df: [("t".to_string(), 1)].into_iter().collect(),
            total_len: 2,
            avgdl: 1.0,
        };
        // 1 + (2 - 1 + 0.5) / (1 + 0.5) = 2
        assert!((stats.idf("t") - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn no_overlap_scores_zero_and_retrieves_nothing() {
        let c = corpus(&[("d1", "alpha beta")]);
        let idx = ShardedIndex::build(&c, 2, Tokenizer::default(), Bm25Params::default()).unwrap();
        assert!(idx.retrieve(&toks("gamma"), &RetrieveOptions::with_k(5)).is_empty());
        assert!(idx.retrieve(&[], &RetrieveOptions::with_k(5)).is_empty());
        let tf = HashMap::from([("alpha".to_string(), 1)]);
        assert_eq!(first_pass_score(&toks("gamma"), &tf, 2, idx.stats(), idx.params()), 0.0);
    }

    #[test]
    fn higher_tf_ranks_first_at_equal_length() {
        let c = corpus(&[("a", "fox fox dog"), ("b", "fox cat dog")]);
        let idx = ShardedIndex::build(&c, 1, Tokenizer::default(), Bm25Params::default()).unwrap();
        let got = idx.retrieve(&toks("fox"), &RetrieveOptions::with_k(2));
        assert_eq!(got[0].doc_id, "a");
        assert!(got[0].first_pass_score > got[1].first_pass_score);
    }

    #[test]
    fn doubling_tf_increases_score_with_b_zero() {
        let p = Bm25Params { k1: 1.2, b: 0.0 };
        for tf in 1..50u32 {
            assert!(bm25_term(0.7, 2 * tf, 10, 10.0, p) > bm25_term(0.7, tf, 10, 10.0, p));
        }
    }

    #[test]
    fn ties_break_by_doc_id() {
        let c = corpus(&[("b", "same words"), ("a", "same words")]);
        let idx = ShardedIndex::build(&c, 3, Tokenizer::default(), Bm25Params::default()).unwrap();
        let got = idx.retrieve(&toks("same"), &RetrieveOptions::with_k(2));
        assert_eq!(got.iter().map(|c| c.doc_id.as_str()).collect::<Vec<_>>(), ["a", "b"]);
    }

    #[test]
    fn per_shard_k_raised_to_k_by_default() {
        let opts = RetrieveOptions {
            per_shard_k: 1,
            k: 5,
            ..RetrieveOptions::default()
        };
        assert_eq!(opts.effective_per_shard_k(), 5);
        let shallow = RetrieveOptions {
            allow_shallow_shards: true,
            ..opts
        };
        assert_eq!(shallow.effective_per_shard_k(), 1);
    }

    #[test]
    fn invalid_bm25_params_rejected() {
        assert!(Bm25Params { k1: 0.0, b: 0.5 }.validate().is_err());
        assert!(Bm25Params { k1: 1.0, b: 1.5 }.validate().is_err());
    }

    #[test]
    fn snapshot_round_trip_and_version_check() {
        let c = corpus(&[("a", "x y z"), ("b", "y z"), ("c", "z")]);
        let idx = ShardedIndex::build(&c, 2, Tokenizer::default(), Bm25Params::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.jsonl");
        idx.save_snapshot(&path).unwrap();
        let loaded = ShardedIndex::load_snapshot(&path).unwrap();
        assert_eq!(loaded, idx);

        let text = std::fs::read_to_string(&path).unwrap();
        let bumped = text.replacen("\"version\":1", "\"version\":99", 1);
        std::fs::write(&path, bumped).unwrap();
        assert!(matches!(
            ShardedIndex::load_snapshot(&path),
            Err(Error::SnapshotVersion { found: 99, .. })
        ));
    }
}
