//! Fixtures shared by the benchmarks.

use intentrank_core::engine::{Engine, SearchRequest};
use intentrank_core::synth::{self, RandomCorpusSpec};

/// A synthetic engine over `docs` documents plus a batch of requests against it.
pub fn fixture(seed: u64, docs: usize, shards: usize, queries: usize) -> (Engine, Vec<SearchRequest>) {
    let spec = RandomCorpusSpec { docs, ..Default::default() };
    let corpus = synth::random_corpus(seed, &spec);
    let requests = synth::random_requests(seed ^ 0x5eed, &corpus, queries, spec.vocab);
    let engine = Engine::with_defaults(corpus, shards).expect("synthetic corpus builds");
    (engine, requests)
}
