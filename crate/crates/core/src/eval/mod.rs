//! Offline evaluation: verification tests, graded metrics, log replay and A/B comparison.

pub mod ab;
pub mod bvt;
pub mod metrics;
pub mod replay;

pub use ab::{ab_compare, paired_bootstrap, AbReport, BootstrapResult, Metric};
pub use bvt::{run_bvts, BvtCase, BvtReport, CaseStatus, Expectation};
pub use metrics::{err_at_k, ndcg_at_k, Judgments, MetricResult};
pub use replay::{graded_eval, sgcr_replay, GradedMetric};
