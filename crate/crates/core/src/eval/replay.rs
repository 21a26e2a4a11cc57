//! Offline replay of a query log through the ranker.

use rayon::prelude::*;

use super::metrics::{err_at_k, ndcg_at_k, Judgments, MetricResult};
use crate::combiner::RankerConfig;
use crate::corpus::QueryRecord;
use crate::engine::{Engine, SearchRequest};
use crate::error::{Error, Result};

/// Whether the replayed top-k for `rec` contains any of its good-clicked documents.
///
/// Records whose user is unknown count as bad impressions.
pub fn good_impression(rec: &QueryRecord, engine: &Engine, config: &RankerConfig, k: usize) -> Result<bool> {
    let req = SearchRequest::from_record(rec);
    match engine.search_with(&req, config) {
        Ok(list) => Ok(list
            .results
            .iter()
            .take(k)
            .any(|r| rec.good_clicked.contains(&r.doc_id))),
        Err(Error::UnknownUser(u)) => {
            log::warn!("replay: unknown user `{u}` for query `{}`", rec.query_text);
            Ok(false)
        }
        Err(e) => Err(e),
    }
}

/// Fraction of logged impressions whose good-clicked documents reach the new top-k.
pub fn sgcr_replay(log: &[QueryRecord], engine: &Engine, config: &RankerConfig, k: usize) -> Result<MetricResult> {
    if log.is_empty() {
        return Err(Error::Evaluation("query log is empty".into()));
    }
    let values = log
        .par_iter()
        .enumerate()
        .map(|(i, rec)| {
            let good = good_impression(rec, engine, config, k)?;
            Ok((format!("{i}:{}@{}", rec.query_text, rec.user_id), Some(if good { 1.0 } else { 0.0 })))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricResult::from_values("sgcr", k, values))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradedMetric {
    Ndcg,
    Err,
}

impl GradedMetric {
    pub fn name(self) -> &'static str {
        match self {
            GradedMetric::Ndcg => "ndcg",
            GradedMetric::Err => "err",
        }
    }
}

/// Mean graded metric over every judged (query, user).
pub fn graded_eval(
    judgments: &Judgments,
    engine: &Engine,
    config: &RankerConfig,
    metric: GradedMetric,
    k: usize,
) -> Result<MetricResult> {
    if judgments.is_empty() {
        return Err(Error::Evaluation("judgment set is empty".into()));
    }
    let queries: Vec<_> = judgments.queries().collect();
    let values = queries
        .par_iter()
        .map(|(q, u, judged)| {
            let list = engine.search_with(&SearchRequest::new(*q, *u), config)?;
            let ranking: Vec<&str> = list.doc_ids().collect();
            let v = match metric {
                GradedMetric::Ndcg => ndcg_at_k(&ranking, judged, k),
                GradedMetric::Err => err_at_k(&ranking, judged, k),
            };
            Ok((format!("{q}@{u}"), v))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricResult::from_values(metric.name(), k, values))
}
