//! Graded-relevance metrics over ranked lists.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::RelevanceJudgment;
use crate::tokenize::normalize_query;

/// Largest grade on the five-level scale.
pub const MAX_GRADE: u8 = 4;

/// `2^g - 1`
pub fn gain(grade: u8) -> f64 {
    (1u64 << grade) as f64 - 1.0
}

/// `1 / log2(rank + 1)` for a 1-based rank.
pub fn discount(rank: usize) -> f64 {
    1.0 / ((rank + 1) as f64).log2()
}

pub fn dcg(grades: &[u8], k: usize) -> f64 {
    grades
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, g)| gain(*g) * discount(i + 1))
        .sum()
}

/// Grades of `ranking` under `judged`; unjudged documents grade 0.
pub fn grades_of<S: AsRef<str>>(ranking: &[S], judged: &BTreeMap<String, u8>) -> Vec<u8> {
    ranking
        .iter()
        .map(|d| judged.get(d.as_ref()).copied().unwrap_or(0))
        .collect()
}

/// NDCG@k against the ideal ordering of all judged documents. `None` when no
/// judged document has a positive grade.
pub fn ndcg_at_k<S: AsRef<str>>(ranking: &[S], judged: &BTreeMap<String, u8>, k: usize) -> Option<f64> {
    let mut ideal: Vec<u8> = judged.values().copied().collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg = dcg(&ideal, k);
    if idcg <= 0.0 {
        return None;
    }
    Some(dcg(&grades_of(ranking, judged), k) / idcg)
}

/// Stop probability of the cascade model: `(2^g - 1) / 2^MAX_GRADE`.
pub fn stop_probability(grade: u8) -> f64 {
    gain(grade) / (1u64 << MAX_GRADE) as f64
}

/// Expected reciprocal rank at k. `None` when no judged document has a positive grade.
pub fn err_at_k<S: AsRef<str>>(ranking: &[S], judged: &BTreeMap<String, u8>, k: usize) -> Option<f64> {
    if !judged.values().any(|g| *g > 0) {
        return None;
    }
    let mut reach = 1.0;
    let mut err = 0.0;
    for (i, g) in grades_of(ranking, judged).into_iter().take(k).enumerate() {
        let r = stop_probability(g);
        err += reach * r / (i + 1) as f64;
        reach *= 1.0 - r;
    }
    Some(err)
}

/// Judgments grouped by (normalized query, user).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Judgments {
    by_query: BTreeMap<(String, String), BTreeMap<String, u8>>,
    /// First-seen query text per key, for issuing the search.
    texts: BTreeMap<(String, String), String>,
}

impl Judgments {
    pub fn new(judgments: &[RelevanceJudgment]) -> Self {
        let mut out = Judgments::default();
        for j in judgments {
            let key = (normalize_query(&j.query_text), j.user_id.clone());
            out.texts.entry(key.clone()).or_insert_with(|| j.query_text.clone());
            out.by_query
                .entry(key)
                .or_default()
                .insert(j.doc_id.clone(), j.grade.value());
        }
        out
    }

    pub fn get(&self, query: &str, user: &str) -> Option<&BTreeMap<String, u8>> {
        self.by_query.get(&(normalize_query(query), user.to_string()))
    }

    /// `(query text, user, judged docs)` in key order.
    pub fn queries(&self) -> impl Iterator<Item = (&str, &str, &BTreeMap<String, u8>)> {
        self.by_query
            .iter()
            .map(|(k, v)| (self.texts[k].as_str(), k.1.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.by_query.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_query.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub metric: String,
    pub k: usize,
    /// Mean over queries where the metric is defined; 0 when there are none.
    pub value: f64,
    pub query_count: usize,
    /// Queries where the metric is undefined.
    pub excluded: usize,
    pub per_query: Vec<(String, f64)>,
}

impl MetricResult {
    pub fn from_values(metric: &str, k: usize, values: Vec<(String, Option<f64>)>) -> Self {
        let excluded = values.iter().filter(|(_, v)| v.is_none()).count();
        let per_query: Vec<(String, f64)> = values
            .into_iter()
            .filter_map(|(q, v)| v.map(|v| (q, v)))
            .collect();
        let value = if per_query.is_empty() {
            0.0
        } else {
            per_query.iter().map(|(_, v)| v).sum::<f64>() / per_query.len() as f64
        };
        Self {
            metric: metric.into(),
            k,
            value,
            query_count: per_query.len(),
            excluded,
            per_query,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn judged(pairs: &[(&str, u8)]) -> BTreeMap<String, u8> {
        pairs.iter().map(|(d, g)| (d.to_string(), *g)).collect()
    }

    #[test]
    fn ideal_is_one() {
        let j = judged(&[("a", 3), ("b", 1), ("c", 0)]);
        assert!((ndcg_at_k(&["a", "b", "c"], &j, 10).unwrap() - 1.0).abs() < 1e-15);
        assert!(ndcg_at_k(&["c", "b", "a"], &j, 10).unwrap() < 1.0);
    }

    #[test]
    fn no_positive_is_undefined() {
        let j = judged(&[("a", 0)]);
        assert_eq!(ndcg_at_k(&["a"], &j, 5), None);
        assert_eq!(err_at_k(&["a"], &j, 5), None);
    }

    #[test]
    fn all_zero_retrieved_is_zero() {
        let j = judged(&[("a", 2), ("z", 0)]);
        assert_eq!(ndcg_at_k(&["z", "y"], &j, 5), Some(0.0));
        assert_eq!(err_at_k(&["z", "y"], &j, 5), Some(0.0));
    }

    #[test]
    fn single_perfect_err() {
        let j = judged(&[("a", 4)]);
        assert_eq!(err_at_k(&["a"], &j, 5), Some(0.9375));
    }

    #[test]
    fn hand_ndcg() {
        // ranking grades [0, 2]; ideal [2, 0]
        let j = judged(&[("a", 0), ("b", 2)]);
        let got = ndcg_at_k(&["a", "b"], &j, 2).unwrap();
        let want = (3.0 / 3f64.log2()) / 3.0;
        assert!((got - want).abs() < 1e-15);
    }

    #[test]
    fn mean_skips_undefined() {
        let r = MetricResult::from_values(
            "ndcg",
            10,
            vec![("a".into(), Some(1.0)), ("b".into(), None), ("c".into(), Some(0.5))],
        );
        assert_eq!(r.value, 0.75);
        assert_eq!(r.excluded, 1);
        assert_eq!(r.query_count, 2);
    }
}
