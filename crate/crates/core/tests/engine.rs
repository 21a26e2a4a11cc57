use std::path::PathBuf;

use intentrank_core::combiner::explain;
use intentrank_core::components::{ComponentSpec, Registry, Scope};
use intentrank_core::corpus::DocType;
use intentrank_core::defaults;
use intentrank_core::engine::{Engine, EngineConfig, SearchRequest, Verdict};
use intentrank_core::eval::bvt::run_bvts;
use intentrank_core::intent::{GrammarSpec, TimeWindow, SPECIAL_GRAMMAR};
use intentrank_core::synth;
use intentrank_core::Error;

fn demo() -> Engine {
    Engine::with_defaults(synth::demo_corpus(), 2).unwrap()
}

#[test]
fn default_registry_has_six_generic_and_three_intent_components() {
    let r = Registry::build(&defaults::components(), &defaults::intent_space(), None).unwrap();
    assert_eq!(r.generic().len(), 6);
    assert_eq!(r.intent_components().len(), 3);
    let kinds: Vec<&str> = r.generic().iter().map(|c| c.kind.as_str()).collect();
    assert_eq!(kinds, ["text_relevance", "social", "location", "language", "quality", "engagement"]);
}

#[test]
fn intent_kind_cannot_be_generic() {
    let mut specs = defaults::components();
    specs.push(ComponentSpec::new("f2", "friend", Scope::Generic, 1.0));
    assert!(Registry::build(&specs, &defaults::intent_space(), None).is_err());
}

#[test]
fn unknown_kind_lists_valid_kinds() {
    let specs = vec![ComponentSpec::new("x", "magic", Scope::Generic, 1.0)];
    let err = Registry::build(&specs, &defaults::intent_space(), None).unwrap_err().to_string();
    assert!(err.contains("magic") && err.contains("text_relevance"), "{err}");
}

fn grammar_of(engine: &Engine, q: &str) -> Option<GrammarSpec> {
    engine.detect(&SearchRequest::new(q, "alice")).unwrap().captures.grammar
}

#[test]
fn grammar_examples() {
    let e = demo();
    let g = grammar_of(&e, "videos i watched yesterday").unwrap();
    assert_eq!(g.doc_type, Some(DocType::Video));
    assert!(g.self_seen);
    assert_eq!(g.window, Some(TimeWindow::Yesterday));
    let g = grammar_of(&e, "posts I have seen").unwrap();
    assert_eq!(g.doc_type, Some(DocType::Post));
    assert!(g.self_seen);
    assert_eq!(g.window, None);
    let g = grammar_of(&e, "my photos").unwrap();
    assert_eq!(g.doc_type, Some(DocType::Photo));
    assert!(!g.self_seen);
    assert!(grammar_of(&e, "taylor swift").is_none());
    let det = e.detect(&SearchRequest::new("videos i watched yesterday", "alice")).unwrap();
    assert_eq!(det.distribution.argmax(), SPECIAL_GRAMMAR);
}

#[test]
fn watched_yesterday_ranks_the_watched_video_first() {
    let e = demo();
    let list = e.search(&SearchRequest::new("videos i watched yesterday", "alice")).unwrap();
    assert_eq!(list.results[0].doc_id, "v_ts_live");
    assert!(list.triggered.iter().any(|t| t == SPECIAL_GRAMMAR));
}

#[test]
fn demo_suite_passes() {
    let e = demo();
    let report = run_bvts(&synth::demo_suite(), &e, e.config());
    assert!(report.all_passed(), "{}", report.summary());
}

#[test]
fn text_relevance_matches_hand_formula() {
    let e = demo();
    let req = SearchRequest::new("avengers trailer", "alice");
    let p = e.prepare(&req).unwrap();
    let n = e.corpus().len() as f64;
    let avgdl = e.index().stats().avgdl;
    for c in &p.candidates {
        if c.policy_reject {
            continue;
        }
        let doc = e.corpus().document(&c.doc_id).unwrap();
        let title: Vec<String> = e.index().tokenizer().tokenize(&doc.title);
        let body: Vec<String> = e.index().tokenizer().tokenize(&doc.body);
        let len = (title.len() + body.len()) as f64;
        let mut bm = 0.0;
        let mut title_hits = 0.0;
        for term in ["avengers", "trailer"] {
            let tf = title.iter().chain(&body).filter(|t| *t == term).count() as f64;
            let df = e.corpus()
                .documents()
                .iter()
                .filter(|d| {
                    let tok = e.index().tokenizer();
                    tok.tokenize(&d.title).iter().chain(tok.tokenize(&d.body).iter()).any(|t| t == term)
                })
                .count() as f64;
            if tf > 0.0 {
                let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                bm += idf * tf * 2.2 / (tf + 1.2 * (0.25 + 0.75 * len / avgdl));
            }
            if title.iter().any(|t| t == term) {
                title_hits += 1.0;
            }
        }
        let window = |f: &[String]| -> Option<usize> {
            let mut best = None;
            for i in 0..f.len() {
                for j in i..f.len() {
                    let span = &f[i..=j];
                    if ["avengers", "trailer"].iter().all(|t| span.iter().any(|x| x == t)) {
                        best = Some(best.map_or(j - i + 1, |b: usize| b.min(j - i + 1)));
                    }
                }
            }
            best
        };
        let w = [window(&title), window(&body)].into_iter().flatten().min();
        let prox = w.map_or(0.0, |w| 1.0 / (1.0 + w as f64 - 2.0));
        let want = 0.5 * (bm / (bm + 1.0)) + 0.25 * prox + 0.25 * title_hits / 2.0;
        let got = c.scores.generic.iter().find(|(id, _)| id == "text").unwrap().1;
        assert!((got - want).abs() < 1e-12, "{}: {got} vs {want}", c.doc_id);
    }
}

fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

#[test]
fn explain_matches_golden() {
    let e = demo();
    let list = e.search(&SearchRequest::new("avengers trailers", "alice")).unwrap();
    let text = explain(&list, "v_av_trailer1").unwrap();
    let path = golden_path("explain_avengers_trailers.txt");
    if std::env::var_os("INTENTRANK_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &text).unwrap();
    }
    let want = std::fs::read_to_string(&path).expect("golden file; run with INTENTRANK_BLESS=1 to create");
    assert_eq!(text, want);
}

#[test]
fn explain_of_filtered_doc_names_the_reason() {
    let e = demo();
    let list = e.search(&SearchRequest::new("taylor swift", "alice")).unwrap();
    let text = explain(&list, "post_spam_ts").unwrap();
    assert!(text.contains("filtered: policy"), "{text}");
    assert!(list.results.iter().all(|r| r.doc_id != "post_spam_ts"));
}

#[test]
fn explain_of_unknown_doc_suggests_neighbours() {
    let e = demo();
    let list = e.search(&SearchRequest::new("taylor swift", "alice")).unwrap();
    let err = explain(&list, "pg_taylorswiftt").unwrap_err().to_string();
    assert!(err.contains("pg_taylorswift"), "{err}");
}

#[test]
fn locate_reports_not_retrieved() {
    let e = demo();
    let cfg = e.config().clone();
    let (v, _) = e.locate(&SearchRequest::new("taylor swift", "alice"), "v_cooking", &cfg).unwrap();
    assert_eq!(v, Verdict::NotRetrieved);
    let (v, _) = e.locate(&SearchRequest::new("taylor swift", "alice"), "post_spam_ts", &cfg).unwrap();
    assert!(matches!(v, Verdict::Filtered { .. }));
}

#[test]
fn unknown_user_is_an_error() {
    let e = demo();
    let err = e.search(&SearchRequest::new("taylor swift", "nobody")).unwrap_err();
    assert!(matches!(err, Error::UnknownUser(_)));
}

#[test]
fn demo_assets_load_through_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    synth::write_demo(dir.path()).unwrap();
    let e = Engine::from_config_file(&dir.path().join("engine.toml")).unwrap();
    let direct = demo();
    let req = SearchRequest::new("avengers trailers", "alice");
    let a: Vec<String> = e.search(&req).unwrap().doc_ids().map(String::from).collect();
    let b: Vec<String> = direct.search(&req).unwrap().doc_ids().map(String::from).collect();
    assert_eq!(a, b);
    let cfg: EngineConfig = toml::from_str(&std::fs::read_to_string(dir.path().join("engine.toml")).unwrap()).unwrap();
    assert_eq!(cfg.to_toml(), std::fs::read_to_string(dir.path().join("engine.toml")).unwrap());
}

#[test]
fn trained_engagement_model_plugs_into_the_registry() {
    let (corpus, log) = synth::engagement_scenario(5, 60, 100);
    let engine = Engine::with_defaults(corpus.clone(), 2).unwrap();
    let features = vec!["doc_good_click_ratio".to_string(), "quality".to_string()];
    let (model, report) = engine
        .train_engagement(&log, &features, &Default::default())
        .unwrap();
    assert!(report.auc > 0.9);
    let mut specs = defaults::components();
    let spec = specs.iter_mut().find(|s| s.component_id == "engagement").unwrap();
    spec.params = serde_json::json!({ "model": model });
    let e2 = Engine::with_components(corpus, 2, &specs).unwrap();
    assert!(e2.search(&SearchRequest::new("w1", "trainer")).is_ok());
}
