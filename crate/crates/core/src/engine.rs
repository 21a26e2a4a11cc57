//! The assembled ranker: corpus, sharded index, intent detector, components and
//! a default ranker configuration, plus a cache of weight-independent work.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combiner::{rank_unchecked, ComponentScores, RankedList, RankerConfig, ScoredCandidate};
use crate::components::engagement::{self, EngagementModel, Example, TrainParams, TrainReport};
use crate::components::generic::document_quality;
use crate::components::{ComponentSpec, Registry, SharedSignals};
use crate::context::QueryContext;
use crate::corpus::{load_query_log, Corpus, Document, QueryRecord, StructuredSuggestion, UserContext};
use crate::defaults;
use crate::error::{Error, Result};
use crate::index::{Bm25Params, Candidate, RetrieveOptions, ShardedIndex};
use crate::intent::{
    ClassifierSpec, DetectorSettings, Dictionaries, Dictionary, EntityRecord, GrammarSpec, IntentDetection,
    IntentDetector, IntentSpace, KnowledgeBase, PatternRecord, QueryPattern,
};
use crate::records::read_all;
use crate::tokenize::Tokenizer;

const CACHE_LIMIT: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SearchRequest {
    pub query: String,
    pub user_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suggestion: Option<StructuredSuggestion>,
}

impl SearchRequest {
    pub fn new(query: impl Into<String>, user_id: impl Into<String>) -> Self {
        Self {
            query: query.into(),
            user_id: user_id.into(),
            suggestion: None,
        }
    }

    pub fn with_suggestion(mut self, s: Option<StructuredSuggestion>) -> Self {
        self.suggestion = s;
        self
    }

    pub fn from_record(r: &QueryRecord) -> Self {
        Self {
            query: r.query_text.clone(),
            user_id: r.user_id.clone(),
            suggestion: r.suggestion_click.clone(),
        }
    }

    pub fn query_id(&self) -> String {
        format!("{}@{}", self.query, self.user_id)
    }
}

/// Everything about a query that does not depend on weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedQuery {
    pub request: SearchRequest,
    pub detection: IntentDetection,
    pub retrieved: Vec<Candidate>,
    pub candidates: Vec<ScoredCandidate>,
}

/// Where a document ended up for a query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    NotRetrieved,
    Filtered { reason: String },
    Ranked { rank: usize, shown: bool },
}

#[derive(Debug)]
pub struct Engine {
    corpus: Corpus,
    index: ShardedIndex,
    detector: IntentDetector,
    registry: Registry,
    config: RankerConfig,
    retrieve: RetrieveOptions,
    now_ts: i64,
    cache: Mutex<HashMap<SearchRequest, Arc<PreparedQuery>>>,
}

/// Detector built from the built-in intent configuration plus entities derived from `corpus`.
pub fn default_detector(corpus: &Corpus) -> Result<IntentDetector> {
    let names = defaults::user_names(corpus);
    let classifiers = defaults::classifiers()
        .iter()
        .map(|c| c.build(&names))
        .collect::<Result<Vec<_>>>()?;
    IntentDetector::new(
        defaults::intent_space(),
        defaults::patterns(),
        defaults::dictionaries(),
        KnowledgeBase::new(defaults::corpus_entities(corpus))?,
        classifiers,
        DetectorSettings::default(),
    )
}

impl Engine {
    pub fn new(
        corpus: Corpus,
        index: ShardedIndex,
        detector: IntentDetector,
        registry: Registry,
        config: RankerConfig,
    ) -> Result<Self> {
        config.check_against(&registry)?;
        let now_ts = corpus.latest_ts();
        Ok(Self {
            corpus,
            index,
            detector,
            registry,
            config,
            retrieve: RetrieveOptions::default(),
            now_ts,
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// Built-in intents and components over `corpus`.
    pub fn with_defaults(corpus: Corpus, num_shards: usize) -> Result<Self> {
        Self::with_components(corpus, num_shards, &defaults::components())
    }

    pub fn with_components(corpus: Corpus, num_shards: usize, components: &[ComponentSpec]) -> Result<Self> {
        let index = ShardedIndex::build(&corpus, num_shards, Tokenizer::default(), Bm25Params::default())?;
        let detector = default_detector(&corpus)?;
        let registry = Registry::build(components, detector.space(), None)?;
        let config = RankerConfig::from_registry(&registry);
        Self::new(corpus, index, detector, registry, config)
    }

    pub fn with_retrieve_options(mut self, opts: RetrieveOptions) -> Self {
        self.retrieve = opts;
        self.clear_cache();
        self
    }

    pub fn with_now(mut self, now_ts: i64) -> Self {
        self.now_ts = now_ts;
        self.clear_cache();
        self
    }

    pub fn with_config(mut self, config: RankerConfig) -> Result<Self> {
        config.check_against(&self.registry)?;
        self.config = config;
        Ok(self)
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn index(&self) -> &ShardedIndex {
        &self.index
    }

    pub fn detector(&self) -> &IntentDetector {
        &self.detector
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn config(&self) -> &RankerConfig {
        &self.config
    }

    pub fn retrieve_options(&self) -> &RetrieveOptions {
        &self.retrieve
    }

    pub fn now_ts(&self) -> i64 {
        self.now_ts
    }

    pub fn clear_cache(&self) {
        self.cache.lock().expect("cache lock").clear();
    }

    fn user(&self, user_id: &str) -> Result<&UserContext> {
        self.corpus
            .user(user_id)
            .ok_or_else(|| Error::UnknownUser(user_id.to_string()))
    }

    fn context<'a>(&'a self, req: &SearchRequest, user: &'a UserContext) -> QueryContext<'a> {
        QueryContext::new(req.query.clone(), self.index.tokenizer(), user, self.corpus.graph())
            .with_suggestion(req.suggestion.clone())
            .with_now(self.now_ts)
    }

    /// Intent detection only.
    pub fn detect(&self, req: &SearchRequest) -> Result<IntentDetection> {
        let user = self.user(&req.user_id)?;
        Ok(self.detector.detect(&self.context(req, user)))
    }

    fn signals(&self, ctx: &QueryContext<'_>, doc: &Document, first_pass: f64, det: &IntentDetection) -> SharedSignals {
        let qe = self.corpus.query_engagement(&ctx.normalized_query(), &doc.doc_id);
        SharedSignals::compute(
            ctx,
            doc,
            self.index.tokenizer(),
            self.index.stats(),
            first_pass,
            qe,
            &det.distribution,
        )
    }

    fn component_scores(&self, ctx: &QueryContext<'_>, doc: &Document, s: &SharedSignals) -> ComponentScores {
        ComponentScores {
            generic: self
                .registry
                .generic()
                .iter()
                .map(|c| (c.id.clone(), c.score(ctx, doc, s)))
                .collect(),
            intent: self
                .registry
                .intent_components()
                .iter()
                .map(|(t, c)| (t.clone(), (c.id.clone(), c.score(ctx, doc, s))))
                .collect(),
        }
    }

    /// Personal-history queries rarely share terms with the documents they ask for,
    /// so the searcher's own matching history joins the candidate set with a zero
    /// first-pass score.
    fn add_personal_candidates(&self, user: &UserContext, g: &GrammarSpec, out: &mut Vec<Candidate>) {
        let seen: HashSet<String> = out.iter().map(|c| c.doc_id.clone()).collect();
        let type_ok = |d: &Document| g.doc_type.is_none_or(|t| d.doc_type == t);
        let in_window = |ts: i64| g.window.is_none_or(|w| w.contains(ts, self.now_ts));
        let mut extra: Vec<&str> = if g.self_seen {
            user.engaged_doc_ids
                .iter()
                .filter(|(_, ts)| in_window(**ts))
                .filter_map(|(d, _)| self.corpus.document(d))
                .filter(|d| type_ok(d))
                .map(|d| d.doc_id.as_str())
                .collect()
        } else {
            self.corpus
                .documents()
                .iter()
                .filter(|d| d.author_id.as_deref() == Some(user.user_id.as_str()))
                .filter(|d| type_ok(d) && in_window(d.created_ts))
                .map(|d| d.doc_id.as_str())
                .collect()
        };
        extra.sort_unstable();
        out.extend(extra.into_iter().filter(|d| !seen.contains(*d)).map(|d| Candidate {
            doc_id: d.to_string(),
            first_pass_score: 0.0,
        }));
    }

    /// Detection, retrieval and per-candidate component scores, cached per request.
    pub fn prepare(&self, req: &SearchRequest) -> Result<Arc<PreparedQuery>> {
        if let Some(p) = self.cache.lock().expect("cache lock").get(req) {
            return Ok(p.clone());
        }
        let user = self.user(&req.user_id)?;
        let mut ctx = self.context(req, user);
        let detection = self.detector.detect(&ctx);
        ctx.captures = detection.captures.clone();
        let mut retrieved = self.index.retrieve(&ctx.tokens, &self.retrieve);
        if let Some(g) = &detection.captures.grammar {
            self.add_personal_candidates(user, g, &mut retrieved);
        }
        let candidates: Vec<ScoredCandidate> = retrieved
            .par_iter()
            .filter_map(|c| self.corpus.document(&c.doc_id).map(|d| (c, d)))
            .map(|(c, doc)| {
                let (quality, policy_reject) = document_quality(doc);
                let scores = if policy_reject {
                    ComponentScores::default()
                } else {
                    let s = self.signals(&ctx, doc, c.first_pass_score, &detection);
                    self.component_scores(&ctx, doc, &s)
                };
                ScoredCandidate {
                    doc_id: doc.doc_id.clone(),
                    quality,
                    policy_reject,
                    scores,
                }
            })
            .collect();
        let prepared = Arc::new(PreparedQuery {
            request: req.clone(),
            detection,
            retrieved,
            candidates,
        });
        let mut cache = self.cache.lock().expect("cache lock");
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(req.clone(), prepared.clone());
        Ok(prepared)
    }

    /// Combines a prepared query under `config`.
    pub fn rank_prepared(&self, prepared: &PreparedQuery, config: &RankerConfig) -> Result<RankedList> {
        config.check_against(&self.registry)?;
        Ok(rank_unchecked(
            &prepared.request.query_id(),
            &prepared.candidates,
            &prepared.detection.distribution,
            config,
        ))
    }

    pub fn search_with(&self, req: &SearchRequest, config: &RankerConfig) -> Result<RankedList> {
        let p = self.prepare(req)?;
        self.rank_prepared(&p, config)
    }

    pub fn search(&self, req: &SearchRequest) -> Result<RankedList> {
        self.search_with(req, &self.config)
    }

    /// Where `doc_id` landed for `req`, with the ranked list it was judged against.
    pub fn locate(&self, req: &SearchRequest, doc_id: &str, config: &RankerConfig) -> Result<(Verdict, RankedList)> {
        if self.corpus.document(doc_id).is_none() {
            return Err(crate::combiner::not_found(
                "document",
                doc_id,
                self.corpus.documents().iter().map(|d| d.doc_id.as_str()),
            ));
        }
        let list = self.search_with(req, config)?;
        let verdict = match list.trace(doc_id) {
            None => Verdict::NotRetrieved,
            Some(t) => match &t.filtered {
                Some(reason) => Verdict::Filtered { reason: reason.clone() },
                None => {
                    let rank = list.full_rank(doc_id).expect("scored");
                    Verdict::Ranked {
                        rank,
                        shown: rank <= config.k_final,
                    }
                }
            },
        };
        Ok((verdict, list))
    }

    /// One labelled example per shown document: positive iff it was good-clicked.
    pub fn training_examples(&self, log: &[QueryRecord], features: &[String]) -> Result<Vec<Example>> {
        let model = EngagementModel::zeros(features.to_vec());
        let mut out = Vec::new();
        for rec in log {
            let req = SearchRequest::from_record(rec);
            let user = self.user(&req.user_id)?;
            let mut ctx = self.context(&req, user);
            let detection = self.detector.detect(&ctx);
            ctx.captures = detection.captures.clone();
            let qterms = crate::index::query_terms(&ctx.tokens);
            for doc_id in &rec.shown_doc_ids {
                let Some(doc) = self.corpus.document(doc_id) else {
                    continue;
                };
                let first_pass = self.first_pass(&qterms, doc);
                let s = self.signals(&ctx, doc, first_pass, &detection);
                out.push(Example {
                    x: model.featurize(doc, &s),
                    label: rec.good_clicked.contains(doc_id),
                });
            }
        }
        Ok(out)
    }

    fn first_pass(&self, qterms: &[String], doc: &Document) -> f64 {
        let tok = self.index.tokenizer();
        let mut tf: HashMap<String, u32> = HashMap::new();
        let mut len = 0u32;
        for t in tok.tokenize(&doc.title).into_iter().chain(tok.tokenize(&doc.body)) {
            len += 1;
            *tf.entry(t).or_default() += 1;
        }
        crate::index::first_pass_score(qterms, &tf, len, self.index.stats(), self.index.params())
    }

    /// Trains a model over `features` on the shown documents of `log`.
    pub fn train_engagement(
        &self,
        log: &[QueryRecord],
        features: &[String],
        params: &TrainParams,
    ) -> Result<(EngagementModel, TrainReport)> {
        if log.is_empty() {
            return Err(Error::Training("query log is empty".into()));
        }
        let examples = self.training_examples(log, features)?;
        engagement::train(EngagementModel::zeros(features.to_vec()), &examples, params)
    }

    pub fn from_config_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: EngineConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.build(base)
    }
}

fn default_shards() -> usize {
    4
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntentFiles {
    /// Detectable intents; the built-in set when absent.
    #[serde(default)]
    pub intents: Option<Vec<String>>,
    #[serde(default)]
    pub patterns: Option<PathBuf>,
    #[serde(default)]
    pub dictionaries: Option<PathBuf>,
    #[serde(default)]
    pub entities: Option<PathBuf>,
    #[serde(default)]
    pub classifiers: Option<PathBuf>,
    /// Also derive user and publisher entities from the corpus.
    #[serde(default = "yes")]
    pub derive_entities: bool,
    #[serde(default)]
    pub link_threshold: Option<f64>,
    #[serde(default)]
    pub entry_point_evidence: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankerOverrides {
    #[serde(default)]
    pub trigger_threshold: Option<f64>,
    #[serde(default)]
    pub k_final: Option<usize>,
    #[serde(default)]
    pub generic_weights: BTreeMap<String, f64>,
    #[serde(default)]
    pub intent_weights: BTreeMap<String, f64>,
}

impl RankerOverrides {
    pub fn apply(&self, mut base: RankerConfig) -> RankerConfig {
        if let Some(t) = self.trigger_threshold {
            base.trigger_threshold = t;
        }
        if let Some(k) = self.k_final {
            base.k_final = k;
        }
        base.generic_weights
            .extend(self.generic_weights.iter().map(|(k, v)| (k.clone(), *v)));
        base.intent_weights
            .extend(self.intent_weights.iter().map(|(k, v)| (k.clone(), *v)));
        base
    }
}

/// Engine configuration file (TOML). Paths are relative to the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    pub corpus: PathBuf,
    /// Index snapshot; built in memory when absent or missing on disk.
    #[serde(default)]
    pub index: Option<PathBuf>,
    #[serde(default = "default_shards")]
    pub num_shards: usize,
    /// Query log whose engagement counters feed the scorers.
    #[serde(default)]
    pub query_log: Option<PathBuf>,
    #[serde(default)]
    pub now_ts: Option<i64>,
    #[serde(default)]
    pub bm25: Bm25Params,
    #[serde(default)]
    pub tokenizer: Tokenizer,
    #[serde(default)]
    pub retrieval: RetrieveOptions,
    #[serde(default)]
    pub intents: IntentFiles,
    /// Component file; the built-in set when absent.
    #[serde(default)]
    pub components: Option<PathBuf>,
    #[serde(default)]
    pub ranker: RankerOverrides,
}

impl EngineConfig {
    pub fn new(corpus: impl Into<PathBuf>) -> Self {
        Self {
            corpus: corpus.into(),
            index: None,
            num_shards: default_shards(),
            query_log: None,
            now_ts: None,
            bm25: Bm25Params::default(),
            tokenizer: Tokenizer::default(),
            retrieval: RetrieveOptions::default(),
            intents: IntentFiles {
                derive_entities: true,
                ..IntentFiles::default()
            },
            components: None,
            ranker: RankerOverrides::default(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("engine config serializes")
    }

    pub fn build(&self, base: &Path) -> Result<Engine> {
        let at = |p: &Path| base.join(p);
        let (mut corpus, _) = Corpus::load(&at(&self.corpus))?;
        if let Some(log) = &self.query_log {
            corpus.attach_query_log(&load_query_log(&at(log))?);
        }
        self.bm25.validate()?;
        let index = match &self.index {
            Some(p) if at(p).exists() => {
                let idx = ShardedIndex::load_snapshot(&at(p))?;
                if idx.stats().num_docs != corpus.len() as u64 {
                    return Err(Error::Config(format!(
                        "index snapshot {} holds {} documents but the corpus has {}; rebuild it",
                        at(p).display(),
                        idx.stats().num_docs,
                        corpus.len()
                    )));
                }
                idx
            }
            _ => ShardedIndex::build(&corpus, self.num_shards, self.tokenizer.clone(), self.bm25)?,
        };
        let detector = self.detector(&corpus, base)?;
        let specs = match &self.components {
            Some(p) => read_all::<ComponentSpec>(&at(p))?,
            None => defaults::components(),
        };
        let registry = Registry::build(&specs, detector.space(), Some(base))?;
        let config = self.ranker.apply(RankerConfig::from_registry(&registry));
        let mut engine = Engine::new(corpus, index, detector, registry, config)?
            .with_retrieve_options(self.retrieval);
        if let Some(now) = self.now_ts {
            engine = engine.with_now(now);
        }
        Ok(engine)
    }

    fn detector(&self, corpus: &Corpus, base: &Path) -> Result<IntentDetector> {
        let f = &self.intents;
        let at = |p: &PathBuf| base.join(p);
        let space = match &f.intents {
            Some(v) => IntentSpace::new(v.iter().cloned())?,
            None => defaults::intent_space(),
        };
        let dictionaries = match &f.dictionaries {
            Some(p) => Dictionaries::new(read_all::<Dictionary>(&at(p))?)?,
            None => defaults::dictionaries(),
        };
        let patterns = match &f.patterns {
            Some(p) => read_all::<PatternRecord>(&at(p))?
                .iter()
                .map(QueryPattern::try_from)
                .collect::<Result<Vec<_>>>()?,
            None => defaults::patterns(),
        };
        let mut entities: Vec<EntityRecord> = match &f.entities {
            Some(p) => read_all(&at(p))?,
            None => Vec::new(),
        };
        if f.derive_entities {
            let explicit: std::collections::BTreeSet<String> =
                entities.iter().map(|e| e.entity_id.clone()).collect();
            entities.extend(
                defaults::corpus_entities(corpus)
                    .into_iter()
                    .filter(|e| !explicit.contains(&e.entity_id)),
            );
        }
        let names = defaults::user_names(corpus);
        let specs = match &f.classifiers {
            Some(p) => read_all::<ClassifierSpec>(&at(p))?,
            None => defaults::classifiers(),
        };
        let classifiers = specs.iter().map(|c| c.build(&names)).collect::<Result<Vec<_>>>()?;
        let mut settings = DetectorSettings::default();
        if let Some(t) = f.link_threshold {
            settings.link_threshold = t;
        }
        if let Some(e) = f.entry_point_evidence {
            settings.entry_point_evidence = e;
        }
        IntentDetector::new(space, patterns, dictionaries, KnowledgeBase::new(entities)?, classifiers, settings)
    }
}
