//! `intentrank` command-line front end.

mod serve;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand};

use intentrank_core::combiner::{explain, trace_lines, RankedList, RankerConfig};
use intentrank_core::components::engagement::TrainParams;
use intentrank_core::corpus::{load_judgments, load_query_log, Corpus, QueryRecord};
use intentrank_core::engine::{Engine, EngineConfig, SearchRequest, Verdict};
use intentrank_core::eval::ab::{ab_compare, Metric, DEFAULT_RESAMPLES};
use intentrank_core::eval::bvt::{run_bvts, BvtCase};
use intentrank_core::eval::metrics::Judgments;
use intentrank_core::index::ShardedIndex;
use intentrank_core::records::{read_all, to_lines};
use intentrank_core::synth;
use intentrank_core::tuner::{tune, EngineObjective, TuneSpec};

#[derive(Parser, Debug)]
#[command(name = "intentrank", version, about = "Intent-aware personalized search ranking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Engine configuration file (TOML).
    #[arg(long, default_value = "engine.toml")]
    config: PathBuf,
    /// Seed for every randomized step.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the primary output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct RankerArgs {
    /// Ranker configuration (JSON) replacing the engine's default weights.
    #[arg(long)]
    ranker: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a corpus and print its load report.
    Ingest {
        /// Corpus directory or documents file.
        corpus: PathBuf,
        /// Query log to validate alongside the corpus.
        #[arg(long)]
        query_log: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Build the sharded index and save a snapshot.
    Index {
        /// Number of shards; defaults to the engine configuration.
        #[arg(long)]
        shards: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Rank documents for a query.
    Search {
        query: String,
        #[arg(long)]
        user: String,
        /// Number of results to print.
        #[arg(long)]
        k: Option<usize>,
        /// Also write per-document score traces (JSON lines) here.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        ranker: RankerArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Show how a document's score was assembled.
    Explain {
        query: String,
        #[arg(long)]
        user: String,
        #[arg(long)]
        doc: String,
        #[command(flatten)]
        ranker: RankerArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Show the detected intent distribution, matches and captures.
    Intents {
        query: String,
        #[arg(long)]
        user: String,
        #[command(flatten)]
        common: Common,
    },
    /// Run a verification suite.
    Bvt {
        /// Suite file (JSON lines).
        #[arg(long)]
        suite: PathBuf,
        #[command(flatten)]
        ranker: RankerArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Tune ranker weights against offline metrics.
    Tune {
        /// Tuning specification (JSON).
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        judgments: Option<PathBuf>,
        #[arg(long)]
        suite: Option<PathBuf>,
        /// Write the search trajectory (JSON lines) here.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[command(flatten)]
        ranker: RankerArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Compare two ranker configurations.
    Abtest {
        /// Control arm; the engine default when omitted.
        #[arg(long)]
        a: Option<PathBuf>,
        /// Treatment arm; the engine default when omitted.
        #[arg(long)]
        b: Option<PathBuf>,
        /// Comma-separated metrics such as `ndcg@10,sgcr@10,err@5`.
        #[arg(long, default_value = "ndcg@10,sgcr@10")]
        metrics: String,
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        judgments: Option<PathBuf>,
        #[arg(long)]
        suite: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
        resamples: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Train the engagement model from a query log.
    Train {
        #[arg(long)]
        log: PathBuf,
        /// Comma-separated feature names; the default feature set when omitted.
        #[arg(long)]
        features: Option<String>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        l2: Option<f64>,
        /// Minibatch size; 0 trains on the full batch.
        #[arg(long)]
        batch_size: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Serve `GET /search` and `GET /explain` over HTTP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        #[arg(long, default_value_t = 4)]
        threads: usize,
        #[command(flatten)]
        ranker: RankerArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Write the demo corpus and assets, then search it.
    Demo {
        /// Directory for the generated assets.
        #[arg(long, default_value = "intentrank-demo")]
        dir: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

/// Errors caused by how the command was invoked.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

/// Verification failures; reported like bad data.
#[derive(Debug)]
struct Failures(String);

impl std::fmt::Display for Failures {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Failures {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return 1;
    }
    if err.downcast_ref::<Failures>().is_some() || err.downcast_ref::<std::io::Error>().is_some() {
        return 2;
    }
    match err.downcast_ref::<intentrank_core::Error>() {
        Some(e) if e.is_data_error() => 2,
        Some(_) => 3,
        None => 3,
    }
}

fn emit(common: &Common, text: &str) -> anyhow::Result<()> {
    match &common.out {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).map_err(|e| anyhow!(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn load_engine(common: &Common) -> anyhow::Result<Engine> {
    Ok(Engine::from_config_file(&common.config)?)
}

fn ranker_config(engine: &Engine, args: &RankerArgs) -> anyhow::Result<RankerConfig> {
    match &args.ranker {
        None => Ok(engine.config().clone()),
        Some(p) => read_ranker(engine, p),
    }
}

fn read_ranker(engine: &Engine, path: &Path) -> anyhow::Result<RankerConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| intentrank_core::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let cfg: RankerConfig = serde_json::from_str(&text).map_err(|e| intentrank_core::Error::Parse {
        file: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })?;
    cfg.check_against(engine.registry())?;
    Ok(cfg)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| intentrank_core::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(serde_json::from_str(&text).map_err(|e| intentrank_core::Error::Parse {
        file: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })?)
}

fn doc_label(engine: &Engine, doc_id: &str) -> (String, String) {
    engine
        .corpus()
        .document(doc_id)
        .map(|d| (d.doc_type.as_str().to_string(), d.title.clone()))
        .unwrap_or_default()
}

fn render_results(engine: &Engine, req: &SearchRequest, list: &RankedList, k: usize) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# query: {}  user: {}  config: {}", req.query, req.user_id, list.fingerprint);
    let _ = writeln!(s, "# intents: {}", list.intents);
    if !list.triggered.is_empty() {
        let _ = writeln!(s, "# triggered: {}", list.triggered.join(" "));
    }
    for (i, r) in list.results.iter().take(k).enumerate() {
        let (ty, title) = doc_label(engine, &r.doc_id);
        let _ = writeln!(s, "{}\t{}\t{:.12}\t{}\t{}", i + 1, r.doc_id, r.score, ty, title);
    }
    s
}

fn cmd_search(
    query: String,
    user: String,
    k: Option<usize>,
    trace: Option<PathBuf>,
    ranker: RankerArgs,
    common: Common,
) -> anyhow::Result<()> {
    let engine = load_engine(&common)?;
    let mut cfg = ranker_config(&engine, &ranker)?;
    if let Some(k) = k {
        cfg.k_final = k;
    }
    let req = SearchRequest::new(query, user);
    let list = engine.search_with(&req, &cfg)?;
    if let Some(p) = trace {
        write_file(&p, &trace_lines(&list))?;
    }
    emit(&common, &render_results(&engine, &req, &list, cfg.k_final))
}

fn cmd_explain(query: String, user: String, doc: String, ranker: RankerArgs, common: Common) -> anyhow::Result<()> {
    let engine = load_engine(&common)?;
    let cfg = ranker_config(&engine, &ranker)?;
    if engine.corpus().document(&doc).is_none() {
        return Err(intentrank_core::combiner::not_found(
            "document",
            &doc,
            engine.corpus().documents().iter().map(|d| d.doc_id.as_str()),
        )
        .into());
    }
    let req = SearchRequest::new(query, user);
    let (verdict, list) = engine.locate(&req, &doc, &cfg)?;
    let text = match verdict {
        Verdict::NotRetrieved => format!(
            "query: {}\nconfig: {}\nintents: {}\ndoc: {doc}\nverdict: not retrieved (no first-pass match among the top {} candidates)\n",
            list.query_id,
            list.fingerprint,
            list.intents,
            engine.retrieve_options().k
        ),
        Verdict::Filtered { .. } => explain(&list, &doc)?,
        Verdict::Ranked { rank, shown } => {
            let mut t = explain(&list, &doc)?;
            let where_ = if shown { "shown" } else { "ranked below the result cutoff" };
            let _ = writeln!(t, "verdict: {where_} at rank {rank} of {}", list.scored().count());
            t
        }
    };
    emit(&common, &text)
}

fn cmd_intents(query: String, user: String, common: Common) -> anyhow::Result<()> {
    let engine = load_engine(&common)?;
    let det = engine.detect(&SearchRequest::new(&query, &user))?;
    let tokens = engine.index().tokenizer().tokenize(&query);
    let span = |a: usize, b: usize| tokens[a..b].join(" ");
    let mut s = String::new();
    let _ = writeln!(s, "query: {query}");
    let _ = writeln!(s, "distribution: {}", det.distribution);
    let _ = writeln!(s, "top intent: {}", det.distribution.argmax());
    for e in &det.sources {
        let src = match &e.source {
            intentrank_core::intent::EvidenceSource::EntryPoint => "entry_point".to_string(),
            intentrank_core::intent::EvidenceSource::Pattern(p) => format!("pattern:{p}"),
            intentrank_core::intent::EvidenceSource::Classifier(c) => format!("classifier:{c}"),
        };
        let _ = writeln!(s, "evidence: {} {src} {:.4}", e.intent, e.value);
    }
    for m in &det.pattern_matches {
        let caps: Vec<String> = m
            .captures
            .iter()
            .map(|(name, c)| {
                let v = match &c.capture {
                    intentrank_core::intent::Capture::Entity { entity_id } => entity_id.clone(),
                    intentrank_core::intent::Capture::Phrase { phrase } => format!("\"{phrase}\""),
                };
                format!("{name}={v}")
            })
            .collect();
        let _ = writeln!(s, "pattern: {} -> {} {}", m.pattern_id, m.target_intent, caps.join(" "));
    }
    for l in &det.linked_entities {
        let _ = writeln!(s, "entity: {} \"{}\" score {:.4}", l.entity_id, span(l.start, l.end), l.score);
    }
    if let Some(f) = &det.captures.friend {
        let _ = writeln!(s, "capture: friend={f}");
    }
    if let Some(p) = &det.captures.publisher {
        let _ = writeln!(s, "capture: publisher={p}");
    }
    if let Some(g) = &det.captures.grammar {
        let _ = writeln!(s, "capture: grammar={}", serde_json::to_string(g)?);
    }
    if det.clamped_outputs > 0 {
        let _ = writeln!(s, "warning: {} detector outputs were clamped to [0, 1]", det.clamped_outputs);
    }
    emit(&common, &s)
}

fn cmd_bvt(suite: PathBuf, ranker: RankerArgs, common: Common) -> anyhow::Result<()> {
    let engine = load_engine(&common)?;
    let cfg = ranker_config(&engine, &ranker)?;
    let cases: Vec<BvtCase> = read_all(&suite)?;
    let report = run_bvts(&cases, &engine, &cfg);
    match &common.out {
        Some(p) => {
            write_file(p, &to_lines(&report.cases))?;
            print!("{}", report.summary());
        }
        None => print!("{}", report.summary()),
    }
    if report.all_passed() {
        Ok(())
    } else {
        Err(Failures(format!(
            "{} of {} verification cases did not pass",
            report.overall.total() - report.overall.passed,
            report.overall.total()
        ))
        .into())
    }
}

fn load_opt<T>(path: &Option<PathBuf>, f: impl Fn(&Path) -> intentrank_core::Result<Vec<T>>) -> anyhow::Result<Vec<T>> {
    match path {
        Some(p) => Ok(f(p)?),
        None => Ok(Vec::new()),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_tune(
    spec: PathBuf,
    log: Option<PathBuf>,
    judgments: Option<PathBuf>,
    suite: Option<PathBuf>,
    trajectory: Option<PathBuf>,
    ranker: RankerArgs,
    common: Common,
) -> anyhow::Result<()> {
    let engine = load_engine(&common)?;
    let initial = ranker_config(&engine, &ranker)?;
    let mut spec: TuneSpec = read_json(&spec)?;
    if let Some(seed) = common.seed {
        spec.seed = seed;
    }
    let log: Vec<QueryRecord> = load_opt(&log, load_query_log)?;
    let judgments = Judgments::new(&load_opt(&judgments, load_judgments)?);
    let suite: Vec<BvtCase> = load_opt(&suite, |p| read_all(p))?;
    let objective = EngineObjective::new(&engine, &log, &judgments, &suite, &spec);
    let result = tune(&initial, &spec, &objective)?;
    if let Some(p) = trajectory {
        write_file(&p, &to_lines(&result.trajectory))?;
    }
    eprintln!(
        "objective {:.6} -> {:.6} after {} evaluations ({} sweeps, {} guardrail rejections{})",
        result.initial_objective,
        result.best_objective,
        result.evaluations,
        result.sweeps,
        result.guardrail_rejections,
        if result.incomplete { ", budget ran out during the first sweep" } else { "" }
    );
    emit(&common, &(serde_json::to_string_pretty(&result.best_config)? + "\n"))
}

#[allow(clippy::too_many_arguments)]
fn cmd_abtest(
    a: Option<PathBuf>,
    b: Option<PathBuf>,
    metrics: String,
    log: Option<PathBuf>,
    judgments: Option<PathBuf>,
    suite: Option<PathBuf>,
    resamples: usize,
    common: Common,
) -> anyhow::Result<()> {
    let metrics: Vec<Metric> = metrics
        .split(',')
        .filter(|m| !m.trim().is_empty())
        .map(|m| m.trim().parse::<Metric>().map_err(Usage))
        .collect::<Result<_, _>>()?;
    if metrics.is_empty() {
        return Err(Usage("--metrics lists no metric".into()).into());
    }
    let engine = load_engine(&common)?;
    let arm = |p: &Option<PathBuf>| match p {
        Some(p) => read_ranker(&engine, p),
        None => Ok(engine.config().clone()),
    };
    let (ca, cb) = (arm(&a)?, arm(&b)?);
    let log: Vec<QueryRecord> = load_opt(&log, load_query_log)?;
    let judgments = Judgments::new(&load_opt(&judgments, load_judgments)?);
    let suite: Vec<BvtCase> = load_opt(&suite, |p| read_all(p))?;
    let report = ab_compare(
        &engine,
        &ca,
        &cb,
        &log,
        &judgments,
        &suite,
        &metrics,
        resamples,
        common.seed.unwrap_or(0),
    )?;
    let mut s = String::new();
    let _ = writeln!(s, "# a: {}  b: {}", report.config_a, report.config_b);
    for m in &report.metrics {
        let bs = &m.bootstrap;
        let _ = writeln!(
            s,
            "{}\ta={:.6}\tb={:.6}\tdelta={:+.6}\tci=[{:+.6}, {:+.6}]\tp={:.4}\tqueries={}",
            m.metric, m.a, m.b, bs.delta, bs.ci_low, bs.ci_high, bs.p_value, m.queries
        );
    }
    for (tag, (pa, pb, d)) in &report.bvt {
        let _ = writeln!(s, "bvt:{tag}\ta={pa:.4}\tb={pb:.4}\tdelta={d:+.4}");
    }
    emit(&common, &s)
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    log: PathBuf,
    features: Option<String>,
    iterations: Option<usize>,
    learning_rate: Option<f64>,
    l2: Option<f64>,
    batch_size: Option<usize>,
    common: Common,
) -> anyhow::Result<()> {
    let engine = load_engine(&common)?;
    let log = load_query_log(&log)?;
    let features: Vec<String> = match features {
        Some(f) => f.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
        None => intentrank_core::components::engagement::default_features(),
    };
    let mut params = TrainParams::default();
    if let Some(v) = iterations {
        params.iterations = v;
    }
    if let Some(v) = learning_rate {
        params.learning_rate = v;
    }
    if let Some(v) = l2 {
        params.l2 = v;
    }
    if let Some(v) = batch_size {
        params.batch_size = v;
    }
    if let Some(s) = common.seed {
        params.seed = s;
    }
    let (model, report) = engine.train_engagement(&log, &features, &params)?;
    eprintln!(
        "{} examples ({} positive), loss {:.6}, auc {:.4}",
        report.examples, report.positives, report.final_loss, report.auc
    );
    emit(&common, &(serde_json::to_string_pretty(&model)? + "\n"))
}

fn cmd_ingest(corpus: PathBuf, query_log: Option<PathBuf>, common: Common) -> anyhow::Result<()> {
    let (_, report) = Corpus::load(&corpus)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    let mut s = serde_json::to_string_pretty(&report)? + "\n";
    if let Some(p) = query_log {
        let log = load_query_log(&p)?;
        let _ = writeln!(s, "query log: {} records", log.len());
    }
    emit(&common, &s)
}

fn cmd_index(shards: Option<usize>, common: Common) -> anyhow::Result<()> {
    let base = common.config.parent().unwrap_or(Path::new("."));
    let text = std::fs::read_to_string(&common.config).map_err(|e| intentrank_core::Error::Io {
        path: common.config.clone(),
        source: e,
    })?;
    let cfg: EngineConfig = toml::from_str(&text).map_err(|e| intentrank_core::Error::Config(format!(
        "{}: {e}",
        common.config.display()
    )))?;
    let (corpus, _) = Corpus::load(&base.join(&cfg.corpus))?;
    let n = shards.unwrap_or(cfg.num_shards);
    let index = ShardedIndex::build(&corpus, n, cfg.tokenizer.clone(), cfg.bm25)?;
    let target = match (&common.out, &cfg.index) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => base.join(p),
        (None, None) => {
            return Err(Usage("no snapshot path: pass --out or set `index` in the engine configuration".into()).into())
        }
    };
    index.save_snapshot(&target)?;
    println!(
        "indexed {} documents into {} shards ({} terms) -> {}",
        index.stats().num_docs,
        n,
        index.stats().df.len(),
        target.display()
    );
    Ok(())
}

fn cmd_demo(dir: PathBuf, common: Common) -> anyhow::Result<()> {
    synth::write_demo(&dir)?;
    let engine = Engine::from_config_file(&dir.join("engine.toml"))?;
    let mut s = String::new();
    let _ = writeln!(s, "# demo assets written to {}", dir.display());
    for (q, u) in [("taylor swift", "alice"), ("avengers trailers", "alice"), ("videos i watched yesterday", "alice")] {
        let req = SearchRequest::new(q, u);
        let list = engine.search(&req)?;
        s.push_str(&render_results(&engine, &req, &list, 5));
    }
    let report = run_bvts(&synth::demo_suite(), &engine, engine.config());
    s.push_str(&report.summary());
    emit(&common, &s)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Ingest { corpus, query_log, common } => cmd_ingest(corpus, query_log, common),
        Command::Index { shards, common } => cmd_index(shards, common),
        Command::Search { query, user, k, trace, ranker, common } => cmd_search(query, user, k, trace, ranker, common),
        Command::Explain { query, user, doc, ranker, common } => cmd_explain(query, user, doc, ranker, common),
        Command::Intents { query, user, common } => cmd_intents(query, user, common),
        Command::Bvt { suite, ranker, common } => cmd_bvt(suite, ranker, common),
        Command::Tune { spec, log, judgments, suite, trajectory, ranker, common } => {
            cmd_tune(spec, log, judgments, suite, trajectory, ranker, common)
        }
        Command::Abtest { a, b, metrics, log, judgments, suite, resamples, common } => {
            cmd_abtest(a, b, metrics, log, judgments, suite, resamples, common)
        }
        Command::Train { log, features, iterations, learning_rate, l2, batch_size, common } => {
            cmd_train(log, features, iterations, learning_rate, l2, batch_size, common)
        }
        Command::Serve { addr, threads, ranker, common } => {
            let engine = load_engine(&common)?;
            let cfg = ranker_config(&engine, &ranker)?;
            serve::serve(engine, cfg, &addr, threads)
        }
        Command::Demo { dir, common } => cmd_demo(dir, common),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
