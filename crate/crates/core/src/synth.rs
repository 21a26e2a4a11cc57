//! Deterministic synthetic corpora and evaluation assets, for tests,
//! benchmarks and the demo command.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::combiner::RankerConfig;
use crate::corpus::{
    Corpus, DocType, Document, Edge, EdgeLabel, EngagementCounters, GeoPoint, Grade, QualitySignals,
    QueryRecord, RelevanceJudgment, UserContext,
};
use crate::engine::{EngineConfig, SearchRequest};
use crate::error::{Error, Result};
use crate::eval::bvt::BvtCase;
use crate::records::write_records;
use crate::tuner::TuneSpec;

/// Reference "now" of generated corpora (2025-10-09T08:53:20Z).
pub const BASE_TS: i64 = 1_760_000_000;
pub const DAY: i64 = 86_400;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Pronounceable pseudo-words that never collide with each other.
pub struct WordGen {
    seen: BTreeSet<String>,
}

impl Default for WordGen {
    fn default() -> Self {
        Self::new()
    }
}

impl WordGen {
    pub fn new() -> Self {
        Self { seen: BTreeSet::new() }
    }

    pub fn word(&mut self, rng: &mut impl Rng) -> String {
        const C: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "qu", "th"];
        const V: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];
        loop {
            let syl = rng.random_range(2..=3);
            let mut w = String::new();
            for _ in 0..syl {
                w.push_str(C.choose(rng).expect("nonempty"));
                w.push_str(V.choose(rng).expect("nonempty"));
            }
            w.push_str(["x", "n", "r", "s"].choose(rng).expect("nonempty"));
            if self.seen.insert(w.clone()) {
                return w;
            }
        }
    }
}

fn quality(v: f64) -> QualitySignals {
    QualitySignals {
        kids_friendly: v,
        authentic: v,
        authoritative: v,
        readability: v,
        video_resolution: None,
        policy_reject: false,
    }
}

fn profile(doc_id: &str, user: &str, name: &str) -> Document {
    let mut d = Document::new(doc_id, DocType::User, name);
    d.author_id = Some(user.into());
    d.languages = BTreeMap::from([("en".into(), 1.0)]);
    d
}

fn en() -> BTreeMap<String, f64> {
    BTreeMap::from([("en".into(), 1.0)])
}

#[derive(Debug, Clone)]
pub struct RandomCorpusSpec {
    pub docs: usize,
    pub users: usize,
    pub vocab: usize,
    pub max_title: usize,
    pub max_body: usize,
    pub policy_reject_rate: f64,
    /// Expected friends per user.
    pub friend_degree: f64,
}

impl Default for RandomCorpusSpec {
    fn default() -> Self {
        Self {
            docs: 200,
            users: 20,
            vocab: 60,
            max_title: 6,
            max_body: 20,
            policy_reject_rate: 0.05,
            friend_degree: 3.0,
        }
    }
}

pub fn vocab_word(i: usize) -> String {
    format!("w{i}")
}

/// Random corpus over the vocabulary `w0..w{vocab}` with users, profiles and a friend graph.
pub fn random_corpus(seed: u64, spec: &RandomCorpusSpec) -> Corpus {
    let mut r = rng(seed);
    let users: Vec<String> = (0..spec.users).map(|i| format!("u{i}")).collect();
    let mut docs = Vec::with_capacity(spec.docs);
    let words = |r: &mut ChaCha8Rng, n: usize| -> String {
        (0..n)
            .map(|_| {
                // skewed so a few terms are common
                let x: f64 = r.random();
                vocab_word(((x * x) * spec.vocab as f64) as usize)
            })
            .collect::<Vec<_>>()
            .join(" ")
    };
    for i in 0..spec.docs {
        let t = DocType::ALL[r.random_range(1..DocType::ALL.len())];
        let title_len = r.random_range(1..=spec.max_title.max(1));
        let mut d = Document::new(format!("d{i}"), t, words(&mut r, title_len));
        let body_len = r.random_range(0..=spec.max_body);
        d.body = words(&mut r, body_len);
        if !users.is_empty() && r.random_bool(0.7) {
            d.author_id = Some(users.choose(&mut r).expect("nonempty").clone());
        }
        if r.random_bool(0.8) {
            let p: f64 = r.random_range(0.5..=1.0);
            d.languages = BTreeMap::from([("en".into(), p)]);
            if p < 1.0 {
                d.languages.insert("es".into(), ((1.0 - p) * 1e6).floor() / 1e6);
            }
        }
        if r.random_bool(0.3) {
            d.location = Some(GeoPoint::new(r.random_range(-60.0..60.0), r.random_range(-170.0..170.0)));
        }
        d.created_ts = BASE_TS - r.random_range(0..60 * DAY);
        d.quality = quality(r.random_range(0.2..=1.0));
        d.quality.policy_reject = r.random_bool(spec.policy_reject_rate);
        let imp = r.random_range(0..200u64);
        let clicks = r.random_range(0..=imp);
        let good = r.random_range(0..=clicks);
        d.engagement = EngagementCounters {
            impressions: imp,
            clicks,
            good_clicks: good,
        };
        docs.push(d);
    }
    for (i, u) in users.iter().enumerate() {
        let mut d = profile(&format!("p{i}"), u, &words(&mut r, 2));
        d.created_ts = BASE_TS - DAY;
        docs.push(d);
    }
    let mut edges = Vec::new();
    let mut user_ctx = Vec::new();
    let p_friend = if spec.users > 1 {
        (spec.friend_degree / (spec.users - 1) as f64).min(1.0)
    } else {
        0.0
    };
    for (i, a) in users.iter().enumerate() {
        for b in users.iter().skip(i + 1) {
            if r.random_bool(p_friend) {
                edges.push(Edge::new(a.clone(), b.clone(), EdgeLabel::Friend));
            } else if r.random_bool(0.05) {
                edges.push(Edge::new(a.clone(), b.clone(), EdgeLabel::Follow));
            } else if r.random_bool(0.02) {
                edges.push(Edge::new(b.clone(), a.clone(), EdgeLabel::PendingFriend));
            }
        }
        let mut ctx = UserContext::new(a.clone());
        ctx.languages = if r.random_bool(0.8) { vec!["en".into()] } else { vec!["es".into(), "en".into()] };
        if r.random_bool(0.5) {
            ctx.location = Some(GeoPoint::new(r.random_range(-60.0..60.0), r.random_range(-170.0..170.0)));
        }
        for _ in 0..r.random_range(0..4) {
            if spec.docs == 0 {
                break;
            }
            let d = format!("d{}", r.random_range(0..spec.docs));
            ctx.engaged_doc_ids.insert(d.clone(), BASE_TS - r.random_range(0..10 * DAY));
            edges.push(Edge::new(a.clone(), d, EdgeLabel::Engaged));
        }
        user_ctx.push(ctx);
    }
    Corpus::new(docs, user_ctx, edges).expect("generated corpus is valid")
}

/// Random queries over the corpus vocabulary, issued by random users.
pub fn random_requests(seed: u64, corpus: &Corpus, n: usize, vocab: usize) -> Vec<SearchRequest> {
    let mut r = rng(seed);
    let users: Vec<&str> = corpus.users().map(|u| u.user_id.as_str()).collect();
    (0..n)
        .map(|_| {
            let len = r.random_range(1..=3);
            let q = (0..len)
                .map(|_| vocab_word(r.random_range(0..vocab.max(1))))
                .collect::<Vec<_>>()
                .join(" ");
            let u = users.choose(&mut r).copied().unwrap_or("u0");
            SearchRequest::new(q, u)
        })
        .collect()
}

/// Generated corpus plus the assets needed to evaluate a ranker on it.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub corpus: Corpus,
    pub suite: Vec<BvtCase>,
    pub judgments: Vec<RelevanceJudgment>,
    pub log: Vec<QueryRecord>,
    /// Queries the scenario targets.
    pub affected: Vec<SearchRequest>,
    /// Control queries the scenario should leave alone.
    pub control: Vec<SearchRequest>,
}

fn judgment(q: &str, u: &str, d: &str, g: Grade) -> RelevanceJudgment {
    RelevanceJudgment {
        query_text: q.into(),
        user_id: u.into(),
        doc_id: d.into(),
        grade: g,
    }
}

fn case(id: String, q: &str, u: &str, intent: &str, lang: &str, expect: &[&str]) -> BvtCase {
    BvtCase {
        case_id: id,
        query_text: q.into(),
        user_id: u.into(),
        intent_tag: intent.into(),
        language_tag: lang.into(),
        suggestion: None,
        expect: expect.iter().map(|e| e.parse().expect("static expectation")).collect(),
    }
}

/// Publishers whose names are also the exact title of low-quality videos from
/// unrelated uploaders. Each publisher contributes one affected query
/// `"<name> videos"`; control queries carry no publisher signal.
pub fn publisher_scenario(seed: u64, publishers: usize) -> Scenario {
    let mut r = rng(seed);
    let mut wg = WordGen::new();
    let searcher = "searcher";
    let mut docs = Vec::new();
    let mut s = Scenario {
        corpus: Corpus::default(),
        suite: Vec::new(),
        judgments: Vec::new(),
        log: Vec::new(),
        affected: Vec::new(),
        control: Vec::new(),
    };
    docs.push(profile("p_searcher", searcher, "Sam Searcher"));
    let uploader = "uploader";
    docs.push(profile("p_uploader", uploader, "Random Uploader"));
    for i in 0..publishers {
        let name = format!("{} {}", wg.word(&mut r), wg.word(&mut r));
        let page_id = format!("pub{i}");
        let mut page = Document::new(&page_id, DocType::Page, &name);
        page.languages = en();
        page.quality = quality(0.9);
        page.engagement = EngagementCounters {
            impressions: 1000,
            clicks: 100,
            good_clicks: 90,
        };
        page.created_ts = BASE_TS - 300 * DAY;
        docs.push(page);
        let topic = wg.word(&mut r);
        let mut real = Vec::new();
        for j in 0..2 {
            let id = format!("pub{i}_v{j}");
            let mut v = Document::new(&id, DocType::Video, format!("{name} {topic} highlights part {j}"));
            v.body = format!("new {topic} episode");
            v.publisher_id = Some(page_id.clone());
            v.languages = en();
            v.quality = quality(0.9);
            v.created_ts = BASE_TS - r.random_range(1..30) * DAY;
            docs.push(v);
            real.push(id);
        }
        let distractor = format!("fake{i}");
        let mut d = Document::new(&distractor, DocType::Video, format!("{name} videos"));
        d.author_id = Some(uploader.into());
        d.languages = en();
        d.quality = quality(0.3);
        d.created_ts = BASE_TS - r.random_range(1..30) * DAY;
        docs.push(d);

        let q = format!("{name} videos");
        s.affected.push(SearchRequest::new(&q, searcher));
        s.suite.push(case(
            format!("publisher_{i:03}"),
            &q,
            searcher,
            "video_publisher",
            "en",
            &[&format!("before: {} {distractor}", real[0])],
        ));
        for id in &real {
            s.judgments.push(judgment(&q, searcher, id, Grade::Great));
        }
        s.judgments.push(judgment(&q, searcher, &page_id, Grade::Good));
        s.judgments.push(judgment(&q, searcher, &distractor, Grade::Bad));
        s.log.push(QueryRecord {
            query_text: q.clone(),
            user_id: searcher.into(),
            ts: BASE_TS - DAY,
            shown_doc_ids: vec![distractor.clone(), real[0].clone()],
            clicked: BTreeSet::from([distractor.clone(), real[0].clone()]),
            good_clicked: BTreeSet::from([real[0].clone()]),
            suggestion_click: None,
        });

        // control: a topic query with no publisher or video vocabulary
        let cq = format!("{topic} episode");
        s.control.push(SearchRequest::new(&cq, searcher));
    }
    s.corpus = Corpus::new(docs, vec![UserContext {
        user_id: searcher.into(),
        languages: vec!["en".into()],
        location: None,
        engaged_doc_ids: BTreeMap::new(),
    }, UserContext::new(uploader)], Vec::new())
    .expect("scenario corpus is valid");
    s
}

/// Queries whose best text match is written in a language the searcher does
/// not read, next to a slightly weaker match in the searcher's language.
pub fn language_scenario(seed: u64, queries: usize) -> Scenario {
    let mut r = rng(seed);
    let mut wg = WordGen::new();
    let searcher = "reader";
    let mut docs = vec![profile("p_reader", searcher, "Robin Reader")];
    let mut s = Scenario {
        corpus: Corpus::default(),
        suite: Vec::new(),
        judgments: Vec::new(),
        log: Vec::new(),
        affected: Vec::new(),
        control: Vec::new(),
    };
    for i in 0..queries {
        let (a, b) = (wg.word(&mut r), wg.word(&mut r));
        let q = format!("{a} {b}");
        let good = format!("en{i}");
        let mut g = Document::new(&good, DocType::Post, format!("{a} guide to {b}"));
        g.body = format!("everything about {a} and {b}");
        g.languages = en();
        g.quality = quality(0.8);
        g.created_ts = BASE_TS - 5 * DAY;
        docs.push(g);
        let bad = format!("xx{i}");
        let mut d = Document::new(&bad, DocType::Post, &q);
        d.body = format!("{a} {b}");
        d.languages = BTreeMap::from([("pt".into(), 0.9), ("es".into(), 0.1)]);
        d.quality = quality(0.8);
        d.created_ts = BASE_TS - 5 * DAY;
        docs.push(d);
        s.affected.push(SearchRequest::new(&q, searcher));
        s.judgments.push(judgment(&q, searcher, &good, Grade::Perfect));
        s.judgments.push(judgment(&q, searcher, &bad, Grade::Bad));
        s.suite.push(case(format!("lang_{i:03}"), &q, searcher, "generic", "en", &[&format!("top1: id={good}")]));
    }
    s.corpus = Corpus::new(
        docs,
        vec![UserContext {
            user_id: searcher.into(),
            languages: vec!["en".into()],
            location: None,
            engaged_doc_ids: BTreeMap::new(),
        }],
        Vec::new(),
    )
    .expect("scenario corpus is valid");
    s
}

/// Corpus where half the documents historically satisfy users and half do not,
/// with a log whose good clicks follow that split exactly.
pub fn engagement_scenario(seed: u64, docs: usize, records: usize) -> (Corpus, Vec<QueryRecord>) {
    let mut r = rng(seed);
    let vocab = 30;
    let mut all = Vec::new();
    let mut good_docs = BTreeSet::new();
    for i in 0..docs {
        let words: Vec<String> = (0..4).map(|_| vocab_word(r.random_range(0..vocab))).collect();
        let mut d = Document::new(format!("e{i}"), DocType::Post, words.join(" "));
        let good = i % 2 == 0;
        let clicks = r.random_range(20..100u64);
        let ratio = if good { r.random_range(0.6..0.95) } else { r.random_range(0.0..0.3) };
        d.engagement = EngagementCounters {
            impressions: clicks * 3,
            clicks,
            good_clicks: (clicks as f64 * ratio) as u64,
        };
        d.quality = quality(r.random_range(0.3..1.0));
        d.languages = en();
        if good {
            good_docs.insert(d.doc_id.clone());
        }
        all.push(d);
    }
    let ids: Vec<String> = all.iter().map(|d| d.doc_id.clone()).collect();
    let mut log = Vec::new();
    for _ in 0..records {
        let shown: Vec<String> = ids.choose_multiple(&mut r, 8.min(ids.len())).cloned().collect();
        let good: BTreeSet<String> = shown.iter().filter(|d| good_docs.contains(*d)).cloned().collect();
        log.push(QueryRecord {
            query_text: vocab_word(r.random_range(0..vocab)),
            user_id: "trainer".into(),
            ts: BASE_TS,
            shown_doc_ids: shown,
            clicked: good.clone(),
            good_clicked: good,
            suggestion_click: None,
        });
    }
    let corpus = Corpus::new(all, vec![UserContext::new("trainer")], Vec::new()).expect("valid");
    (corpus, log)
}

/// Per-query metric values for two arms, B better than A by `effect` on average.
pub fn planted_effect(seed: u64, queries: usize, effect: f64, noise: f64) -> (Vec<f64>, Vec<f64>) {
    let mut r = rng(seed);
    let mut a = Vec::with_capacity(queries);
    let mut b = Vec::with_capacity(queries);
    for _ in 0..queries {
        let base: f64 = r.random_range(0.1..0.7);
        let jitter: f64 = r.random_range(-noise..=noise);
        a.push(base);
        b.push((base + effect + jitter).clamp(0.0, 1.0));
    }
    (a, b)
}

/// The small hand-built social corpus behind the demo command.
pub fn demo_corpus() -> Corpus {
    let now = BASE_TS;
    let sf = GeoPoint::new(37.7749, -122.4194);
    let santa_clara = GeoPoint::new(37.3541, -121.9552);
    let madrid = GeoPoint::new(40.4168, -3.7038);
    let mut docs = vec![
        profile("p_alice", "alice", "Alice Walker"),
        profile("p_bob", "bob", "Bob Chen"),
        profile("p_carol", "carol", "Carol Diaz"),
        profile("p_taylor", "taylor", "Taylor Smith"),
        profile("p_diego", "diego", "Diego Ramirez"),
        profile("p_erin", "erin", "Erin Swift"),
    ];
    let mut add = |id: &str, t: DocType, title: &str, f: &dyn Fn(&mut Document)| {
        let mut d = Document::new(id, t, title);
        d.languages = en();
        d.created_ts = now - 20 * DAY;
        d.quality = quality(0.9);
        f(&mut d);
        docs.push(d);
    };
    add("pg_taylorswift", DocType::Page, "Taylor Swift", &|d| {
        d.body = "official page singer songwriter".into();
        d.engagement = EngagementCounters { impressions: 5000, clicks: 900, good_clicks: 800 };
    });
    add("pg_avengers", DocType::Page, "Avengers", &|d| {
        d.body = "official marvel studios page".into();
        d.engagement = EngagementCounters { impressions: 4000, clicks: 700, good_clicks: 600 };
    });
    add("pg_fanzone", DocType::Page, "Fan Zone", &|d| d.body = "reaction videos".into());
    add("pg_cooking", DocType::Page, "Weekend Cooking", &|d| d.body = "recipes for the weekend".into());
    add("v_ts_live", DocType::Video, "Taylor Swift live in concert", &|d| {
        d.publisher_id = Some("pg_taylorswift".into());
        d.quality.video_resolution = Some(1.0);
        d.created_ts = now - 3 * DAY;
        d.engagement = EngagementCounters { impressions: 900, clicks: 300, good_clicks: 250 };
    });
    add("v_ts_interview", DocType::Video, "Taylor Swift interview", &|d| {
        d.publisher_id = Some("pg_taylorswift".into());
        d.quality.video_resolution = Some(0.8);
    });
    add("v_av_trailer1", DocType::Video, "Avengers Endgame official trailer", &|d| {
        d.publisher_id = Some("pg_avengers".into());
        d.quality.video_resolution = Some(1.0);
        d.engagement = EngagementCounters { impressions: 2000, clicks: 800, good_clicks: 700 };
    });
    add("v_av_trailer2", DocType::Video, "Avengers Infinity War trailer", &|d| {
        d.publisher_id = Some("pg_avengers".into());
        d.quality.video_resolution = Some(0.9);
    });
    add("v_fan_trailers", DocType::Video, "avengers trailers", &|d| {
        d.body = "avengers trailers reaction compilation".into();
        d.publisher_id = Some("pg_fanzone".into());
        d.quality = quality(0.3);
        d.quality.video_resolution = Some(0.3);
    });
    add("v_cooking", DocType::Video, "Weekend pasta", &|d| {
        d.publisher_id = Some("pg_cooking".into());
        d.created_ts = now - DAY / 2;
    });
    add("post_bob_ts", DocType::Post, "got tickets for taylor swift", &|d| {
        d.author_id = Some("bob".into());
        d.body = "see you at the show".into();
        d.created_ts = now - 2 * DAY;
    });
    add("post_carol_recipe", DocType::Post, "my favourite weekend recipe", &|d| {
        d.author_id = Some("carol".into());
    });
    add("post_spam_ts", DocType::Post, "taylor swift free tickets click here", &|d| {
        d.quality = quality(0.1);
        d.quality.policy_reject = true;
    });
    add("post_diego_ts", DocType::Post, "Taylor Swift concierto increible", &|d| {
        d.author_id = Some("diego".into());
        d.languages = BTreeMap::from([("es".into(), 1.0)]);
        d.location = Some(madrid);
    });
    add("grp_swifties", DocType::Group, "Taylor Swift Fans", &|d| d.body = "fan club".into());
    add("evt_ts_concert", DocType::Event, "Taylor Swift concert Santa Clara", &|d| {
        d.location = Some(santa_clara);
    });
    add("ph_taylor_beach", DocType::Photo, "beach day", &|d| {
        d.author_id = Some("taylor".into());
        d.created_ts = now;
    });
    let users = vec![
        UserContext {
            user_id: "alice".into(),
            languages: vec!["en".into()],
            location: Some(sf),
            engaged_doc_ids: BTreeMap::from([
                ("v_ts_live".into(), now - DAY + 3600),
                ("post_bob_ts".into(), now - 2 * DAY + 600),
            ]),
        },
        UserContext::new("bob"),
        UserContext::new("carol"),
        UserContext::new("taylor"),
        UserContext {
            user_id: "diego".into(),
            languages: vec!["es".into(), "en".into()],
            location: Some(madrid),
            engaged_doc_ids: BTreeMap::new(),
        },
        UserContext::new("erin"),
    ];
    let e = |a: &str, b: &str, l| Edge::new(a, b, l);
    let edges = vec![
        e("alice", "bob", EdgeLabel::Friend),
        e("alice", "taylor", EdgeLabel::Friend),
        e("bob", "carol", EdgeLabel::Friend),
        e("alice", "pg_taylorswift", EdgeLabel::Follow),
        e("erin", "alice", EdgeLabel::PendingFriend),
        e("alice", "grp_swifties", EdgeLabel::Member),
        e("alice", "v_ts_live", EdgeLabel::Engaged),
        e("alice", "post_bob_ts", EdgeLabel::Engaged),
        e("bob", "v_av_trailer1", EdgeLabel::Engaged),
        e("taylor", "post_carol_recipe", EdgeLabel::Engaged),
    ];
    Corpus::new(docs, users, edges).expect("demo corpus is valid")
}

pub fn demo_suite() -> Vec<BvtCase> {
    let c = |id: &str, q: &str, u: &str, intent: &str, lang: &str, e: &[&str]| case(id.into(), q, u, intent, lang, e);
    vec![
        c("friend_profile", "taylor smith", "alice", "friend", "en", &["top1: relation=friend type=user"]),
        c("friend_bob", "bob chen", "alice", "friend", "en", &["top1: type=user author=bob"]),
        c("spam_excluded", "taylor swift", "alice", "generic", "en", &["excludes: post_spam_ts"]),
        c("ts_page_high", "taylor swift", "alice", "generic", "en", &["topk: pg_taylorswift 5"]),
        c("avengers_publisher", "avengers trailers", "alice", "video_publisher", "en", &["top1: publisher=pg_avengers type=video"]),
        c("avengers_before_fan", "avengers trailers", "alice", "video_publisher", "en", &["before: v_av_trailer1 v_fan_trailers"]),
        c("watched_yesterday", "videos i watched yesterday", "alice", "special_grammar", "en", &["top1: id=v_ts_live"]),
        c("posts_seen", "posts i have seen", "alice", "special_grammar", "en", &["top1: id=post_bob_ts"]),
        c("spanish_concert", "taylor swift concierto", "diego", "generic", "es", &["top1: id=post_diego_ts lang=es"]),
        c("cooking_page", "weekend cooking", "carol", "generic", "en", &["doc@rank: pg_cooking <= 2"]),
    ]
}

pub fn demo_log() -> Vec<QueryRecord> {
    let rec = |q: &str, u: &str, shown: &[&str], clicked: &[&str], good: &[&str]| QueryRecord {
        query_text: q.into(),
        user_id: u.into(),
        ts: BASE_TS - DAY,
        shown_doc_ids: shown.iter().map(|s| s.to_string()).collect(),
        clicked: clicked.iter().map(|s| s.to_string()).collect(),
        good_clicked: good.iter().map(|s| s.to_string()).collect(),
        suggestion_click: None,
    };
    vec![
        rec("taylor swift", "alice", &["pg_taylorswift", "v_ts_live", "post_bob_ts"], &["v_ts_live"], &["v_ts_live"]),
        rec("taylor swift", "bob", &["pg_taylorswift", "grp_swifties", "v_ts_interview"], &["pg_taylorswift"], &["pg_taylorswift"]),
        rec("avengers trailers", "alice", &["v_fan_trailers", "v_av_trailer1"], &["v_fan_trailers", "v_av_trailer1"], &["v_av_trailer1"]),
        rec("avengers trailers", "bob", &["v_fan_trailers", "v_av_trailer2"], &["v_fan_trailers"], &[]),
        rec("taylor smith", "alice", &["p_taylor", "pg_taylorswift"], &["p_taylor"], &["p_taylor"]),
        rec("weekend cooking", "carol", &["pg_cooking", "v_cooking", "post_carol_recipe"], &["pg_cooking", "v_cooking"], &["pg_cooking"]),
        rec("bob chen", "alice", &["p_bob"], &["p_bob"], &["p_bob"]),
        rec("taylor swift concierto", "diego", &["post_diego_ts", "evt_ts_concert"], &["post_diego_ts"], &["post_diego_ts"]),
    ]
}

pub fn demo_judgments() -> Vec<RelevanceJudgment> {
    let j = |q: &str, u: &str, d: &str, g| judgment(q, u, d, g);
    vec![
        j("taylor swift", "alice", "pg_taylorswift", Grade::Perfect),
        j("taylor swift", "alice", "v_ts_live", Grade::Great),
        j("taylor swift", "alice", "post_bob_ts", Grade::Good),
        j("taylor swift", "alice", "grp_swifties", Grade::Good),
        j("taylor swift", "alice", "post_spam_ts", Grade::Bad),
        j("avengers trailers", "alice", "v_av_trailer1", Grade::Perfect),
        j("avengers trailers", "alice", "v_av_trailer2", Grade::Great),
        j("avengers trailers", "alice", "v_fan_trailers", Grade::Okay),
        j("taylor smith", "alice", "p_taylor", Grade::Perfect),
        j("taylor smith", "alice", "ph_taylor_beach", Grade::Good),
        j("weekend cooking", "carol", "pg_cooking", Grade::Perfect),
        j("weekend cooking", "carol", "v_cooking", Grade::Good),
    ]
}

pub fn demo_tune_spec() -> TuneSpec {
    let mut spec = TuneSpec::new(&["generic.text", "generic.social", "intent.video_publisher"]);
    spec.budget = 60;
    spec.restarts = 2;
    spec.seed = 7;
    spec
}

/// Writes the demo corpus, engine configuration and evaluation assets into `dir`.
pub fn write_demo(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    demo_corpus().save(&dir.join("corpus"))?;
    write_records(&dir.join("queries.jsonl"), &demo_log())?;
    write_records(&dir.join("judgments.jsonl"), &demo_judgments())?;
    write_records(&dir.join("bvt.jsonl"), &demo_suite())?;
    let spec = serde_json::to_string_pretty(&demo_tune_spec()).expect("spec serializes");
    let p = dir.join("tune.json");
    std::fs::write(&p, spec + "\n").map_err(|e| Error::io(&p, e))?;
    let mut cfg = EngineConfig::new("corpus");
    cfg.query_log = Some("queries.jsonl".into());
    let p = dir.join("engine.toml");
    std::fs::write(&p, cfg.to_toml()).map_err(|e| Error::io(&p, e))?;
    Ok(())
}

/// Ranker configuration with every weight of `intent` set to zero.
pub fn without_intent(config: &RankerConfig, intent: &str) -> RankerConfig {
    let mut c = config.clone();
    if let Some(w) = c.intent_weights.get_mut(intent) {
        *w = 0.0;
    }
    c
}

/// Ranker configuration with generic component `id` weighted zero.
pub fn without_component(config: &RankerConfig, id: &str) -> RankerConfig {
    let mut c = config.clone();
    if let Some(w) = c.generic_weights.get_mut(id) {
        *w = 0.0;
    }
    c
}
