//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use intentrank_core::corpus::Corpus;
use intentrank_core::intent::{Capture, EntityRecord, PatternToken};
use intentrank_core::tokenize::Tokenizer;

/// DCG straight from the definition, 1-based ranks.
pub fn dcg_oracle(grades: &[u8], k: usize) -> f64 {
    let mut s = 0.0;
    for (i, g) in grades.iter().enumerate() {
        let r = i + 1;
        if r > k {
            break;
        }
        s += (2f64.powi(*g as i32) - 1.0) / (r as f64 + 1.0).log2();
    }
    s
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// NDCG@k with the ideal DCG found by trying every ordering of the judged documents.
pub fn ndcg_oracle(ranking: &[String], judged: &BTreeMap<String, u8>, k: usize) -> Option<f64> {
    let grades: Vec<u8> = judged.values().copied().collect();
    let mut idcg: f64 = 0.0;
    for p in permutations(grades.len()) {
        let g: Vec<u8> = p.iter().map(|&i| grades[i]).collect();
        idcg = idcg.max(dcg_oracle(&g, k));
    }
    if idcg == 0.0 {
        return None;
    }
    let got: Vec<u8> = ranking.iter().map(|d| judged.get(d).copied().unwrap_or(0)).collect();
    Some(dcg_oracle(&got, k) / idcg)
}

/// ERR@k as the explicit cascade sum.
pub fn err_oracle(ranking: &[String], judged: &BTreeMap<String, u8>, k: usize) -> Option<f64> {
    if judged.values().all(|g| *g == 0) {
        return None;
    }
    let r = |d: &String| (2f64.powi(judged.get(d).copied().unwrap_or(0) as i32) - 1.0) / 16.0;
    let mut total = 0.0;
    for i in 0..ranking.len().min(k) {
        let mut p = r(&ranking[i]) / (i + 1) as f64;
        for d in &ranking[..i] {
            p *= 1.0 - r(d);
        }
        total += p;
    }
    Some(total)
}

/// BM25 of every document for a query, recomputed from the raw corpus text.
pub fn bm25_oracle(corpus: &Corpus, tok: &Tokenizer, query: &str, k1: f64, b: f64) -> HashMap<String, f64> {
    let docs: Vec<(String, Vec<String>)> = corpus
        .documents()
        .iter()
        .map(|d| {
            let mut t = tok.tokenize(&d.title);
            t.extend(tok.tokenize(&d.body));
            (d.doc_id.clone(), t)
        })
        .collect();
    let n = docs.len() as f64;
    let avgdl = docs.iter().map(|(_, t)| t.len()).sum::<usize>() as f64 / n;
    let mut q = tok.tokenize(query);
    q.sort();
    q.dedup();
    let mut out = HashMap::new();
    for (id, toks) in &docs {
        let mut s = 0.0;
        let mut any = false;
        for term in &q {
            let df = docs.iter().filter(|(_, t)| t.contains(term)).count() as f64;
            let tf = toks.iter().filter(|t| *t == term).count() as f64;
            if tf == 0.0 {
                continue;
            }
            any = true;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            s += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * toks.len() as f64 / avgdl));
        }
        if any {
            out.insert(id.clone(), s);
        }
    }
    out
}

/// One way of splitting a query over a pattern: per slot, (slot index, span length, capture).
pub type Segmentation = Vec<(usize, usize, Capture)>;

/// Every complete segmentation of `query` by `pattern`, each entity slot filled by
/// the preferred entity for that alias length.
pub fn all_segmentations(
    pattern: &[PatternToken],
    query: &[String],
    entities: &[EntityRecord],
    dicts: &BTreeMap<String, Vec<Vec<String>>>,
) -> Vec<Segmentation> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    walk(pattern, 0, query, 0, entities, dicts, &mut cur, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn walk(
    pattern: &[PatternToken],
    pos: usize,
    q: &[String],
    at: usize,
    entities: &[EntityRecord],
    dicts: &BTreeMap<String, Vec<Vec<String>>>,
    cur: &mut Segmentation,
    out: &mut Vec<Segmentation>,
) {
    if pos == pattern.len() {
        if at == q.len() {
            out.push(cur.clone());
        }
        return;
    }
    match &pattern[pos] {
        PatternToken::Literal(w) => {
            if at < q.len() && &q[at] == w {
                walk(pattern, pos + 1, q, at + 1, entities, dicts, cur, out);
            }
        }
        PatternToken::EntitySlot { entity_type, .. } => {
            for len in 1..=q.len().saturating_sub(at) {
                let span = &q[at..at + len];
                let best = entities
                    .iter()
                    .filter(|e| &e.entity_type == entity_type)
                    .filter(|e| e.aliases.iter().any(|a| a.split(' ').eq(span.iter().map(String::as_str))))
                    .max_by(|a, b| {
                        a.popularity
                            .total_cmp(&b.popularity)
                            .then_with(|| b.entity_id.cmp(&a.entity_id))
                    });
                if let Some(e) = best {
                    cur.push((
                        pos,
                        len,
                        Capture::Entity {
                            entity_id: e.entity_id.clone(),
                        },
                    ));
                    walk(pattern, pos + 1, q, at + len, entities, dicts, cur, out);
                    cur.pop();
                }
            }
        }
        PatternToken::DictSlot { dictionary_id, .. } => {
            for len in 1..=q.len().saturating_sub(at) {
                let span = &q[at..at + len];
                if dicts[dictionary_id].iter().any(|p| p.as_slice() == span) {
                    cur.push((
                        pos,
                        len,
                        Capture::Phrase {
                            phrase: span.join(" "),
                        },
                    ));
                    walk(pattern, pos + 1, q, at + len, entities, dicts, cur, out);
                    cur.pop();
                }
            }
        }
    }
}

/// The segmentation whose slot lengths, read left to right, are lexicographically largest.
pub fn preferred_segmentation(all: Vec<Segmentation>) -> Option<Segmentation> {
    all.into_iter().max_by(|a, b| {
        let la: Vec<usize> = a.iter().map(|s| s.1).collect();
        let lb: Vec<usize> = b.iter().map(|s| s.1).collect();
        la.cmp(&lb)
    })
}
