//! Built-in intent configuration and component set, used when an engine
//! configuration does not name its own files.

use std::collections::BTreeMap;

use serde_json::json;

use crate::components::{ComponentSpec, Scope};
use crate::corpus::{Corpus, DocType};
use crate::intent::{
    ClassifierSpec, Dictionaries, Dictionary, EntityRecord, IntentSpace, QueryPattern, FRIEND,
    SPECIAL_GRAMMAR, VIDEO_PUBLISHER,
};

pub const USER_ENTITY_TYPE: &str = "user";
pub const PUBLISHER_ENTITY_TYPE: &str = "publisher";

/// Popularity given to entities derived from the corpus.
pub const DERIVED_POPULARITY: f64 = 0.2;

pub fn intent_space() -> IntentSpace {
    IntentSpace::new([FRIEND, SPECIAL_GRAMMAR, VIDEO_PUBLISHER]).expect("static intent space")
}

pub fn dictionaries() -> Dictionaries {
    let d = |id: &str, phrases: &[&str]| Dictionary::new(id, phrases.iter().copied()).expect("static dictionary");
    Dictionaries::new([
        d(
            "doc_type",
            &[
                "posts", "post", "videos", "video", "photos", "photo", "pictures", "groups",
                "pages", "events", "people",
            ],
        ),
        d("seen", &["seen", "watched", "viewed", "liked", "visited", "read"]),
        d("when", &["today", "yesterday", "last week", "last month"]),
        d("video_words", &["videos", "video", "trailer", "trailers", "clips", "episodes"]),
        d("photo_words", &["photos", "pictures", "pics"]),
    ])
    .expect("static dictionaries")
}

pub fn patterns() -> Vec<QueryPattern> {
    let p = |id: &str, src: &str, intent: &str, conf: f64| {
        QueryPattern::parse(id, src, intent, conf).expect("static pattern")
    };
    vec![
        p("friend_name", "<user:entity>", FRIEND, 0.7),
        p("friend_photos", "<user:entity> <photo_words:dictionary>", FRIEND, 0.85),
        p("friend_photos_of", "<photo_words:dictionary> of <user:entity>", FRIEND, 0.85),
        p("grammar_have_seen", "<doc_type:dictionary> i have <seen:dictionary>", SPECIAL_GRAMMAR, 0.95),
        p("grammar_seen", "<doc_type:dictionary> i <seen:dictionary>", SPECIAL_GRAMMAR, 0.95),
        p(
            "grammar_seen_when",
            "<doc_type:dictionary> i <seen:dictionary> <when:dictionary>",
            SPECIAL_GRAMMAR,
            0.95,
        ),
        p(
            "grammar_have_seen_when",
            "<doc_type:dictionary> i have <seen:dictionary> <when:dictionary>",
            SPECIAL_GRAMMAR,
            0.95,
        ),
        p("grammar_my", "my <doc_type:dictionary>", SPECIAL_GRAMMAR, 0.8),
        p("publisher_videos", "<publisher:entity> <video_words:dictionary>", VIDEO_PUBLISHER, 0.9),
        p("publisher_name", "<publisher:entity>", VIDEO_PUBLISHER, 0.6),
    ]
}

pub fn classifiers() -> Vec<ClassifierSpec> {
    vec![
        ClassifierSpec::FriendName {
            name: "friend_names".into(),
            intent: FRIEND.into(),
            exact: 0.9,
            partial: 0.5,
        },
        ClassifierSpec::Keyword {
            name: "video_keywords".into(),
            intent: VIDEO_PUBLISHER.into(),
            keywords: BTreeMap::from([
                ("trailer".to_string(), 0.3),
                ("trailers".to_string(), 0.3),
                ("official video".to_string(), 0.4),
            ]),
        },
    ]
}

/// Entities implied by the corpus: one per user profile and one per page that
/// publishes at least one video.
pub fn corpus_entities(corpus: &Corpus) -> Vec<EntityRecord> {
    let publishers: std::collections::BTreeSet<&str> = corpus
        .documents()
        .iter()
        .filter_map(|d| d.publisher_id.as_deref())
        .collect();
    let mut out = Vec::new();
    for d in corpus.documents() {
        match d.doc_type {
            DocType::User => {
                if let Some(owner) = &d.author_id {
                    out.push(
                        EntityRecord::new(format!("user:{owner}"), USER_ENTITY_TYPE, &[&d.title], DERIVED_POPULARITY)
                            .with_ref(owner.clone()),
                    );
                }
            }
            DocType::Page if publishers.contains(d.doc_id.as_str()) => {
                let pop = (d.engagement.good_clicks as f64 / (d.engagement.clicks as f64 + 1.0))
                    .max(DERIVED_POPULARITY);
                out.push(
                    EntityRecord::new(format!("page:{}", d.doc_id), PUBLISHER_ENTITY_TYPE, &[&d.title], pop)
                        .with_ref(d.doc_id.clone()),
                );
            }
            _ => {}
        }
    }
    out
}

/// User id -> display name from profile documents.
pub fn user_names(corpus: &Corpus) -> BTreeMap<String, String> {
    corpus
        .documents()
        .iter()
        .filter(|d| d.doc_type == DocType::User)
        .filter_map(|d| d.author_id.clone().map(|a| (a, d.title.clone())))
        .collect()
}

/// Six generic components and one component per built-in intent.
pub fn components() -> Vec<ComponentSpec> {
    vec![
        ComponentSpec::new("text", "text_relevance", Scope::Generic, 1.0),
        ComponentSpec::new("social", "social", Scope::Generic, 0.5),
        ComponentSpec::new("location", "location", Scope::Generic, 0.2),
        ComponentSpec::new("language", "language", Scope::Generic, 0.5),
        ComponentSpec::new("quality", "quality", Scope::Generic, 0.3),
        ComponentSpec::new("engagement", "engagement", Scope::Generic, 0.3),
        ComponentSpec::new("friend", "friend", Scope::Intent(FRIEND.into()), 1.5),
        ComponentSpec::new("grammar", "special_grammar", Scope::Intent(SPECIAL_GRAMMAR.into()), 2.0),
        ComponentSpec::new("publisher", "video_publisher", Scope::Intent(VIDEO_PUBLISHER.into()), 1.5)
            .with_params(json!({"mode": "binary"})),
    ]
}
