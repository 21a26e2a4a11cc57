//! Documents, users, the social graph, query logs and relevance judgments.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::records::{self, Located, Record};
use crate::tokenize::normalize_query;

/// File names used inside a corpus directory.
pub mod files {
    pub const DOCUMENTS: &str = "documents.jsonl";
    pub const USERS: &str = "users.jsonl";
    pub const EDGES: &str = "edges.jsonl";
    pub const QUERY_LOG: &str = "queries.jsonl";
    pub const JUDGMENTS: &str = "judgments.jsonl";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocType {
    User,
    Page,
    Group,
    Post,
    Video,
    Photo,
    Event,
}

impl DocType {
    pub const ALL: [DocType; 7] = [
        DocType::User,
        DocType::Page,
        DocType::Group,
        DocType::Post,
        DocType::Video,
        DocType::Photo,
        DocType::Event,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DocType::User => "user",
            DocType::Page => "page",
            DocType::Group => "group",
            DocType::Post => "post",
            DocType::Video => "video",
            DocType::Photo => "photo",
            DocType::Event => "event",
        }
    }
}

impl fmt::Display for DocType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DocType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        DocType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown doc_type `{s}`"))
    }
}

/// A latitude/longitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    fn check(&self) -> std::result::Result<(), String> {
        if !(-90.0..=90.0).contains(&self.lat) {
            return Err(format!("latitude {} outside [-90, 90]", self.lat));
        }
        if !(-180.0..=180.0).contains(&self.lon) {
            return Err(format!("longitude {} outside [-180, 180]", self.lon));
        }
        Ok(())
    }
}

/// Query-independent document quality scores, each in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualitySignals {
    pub kids_friendly: f64,
    pub authentic: f64,
    pub authoritative: f64,
    pub readability: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_resolution: Option<f64>,
    #[serde(default)]
    pub policy_reject: bool,
}

impl Default for QualitySignals {
    fn default() -> Self {
        Self {
            kids_friendly: 1.0,
            authentic: 1.0,
            authoritative: 1.0,
            readability: 1.0,
            video_resolution: None,
            policy_reject: false,
        }
    }
}

impl QualitySignals {
    /// Sub-scores that are present, in a fixed order.
    pub fn available(&self) -> Vec<f64> {
        let mut v = vec![
            self.kids_friendly,
            self.authentic,
            self.authoritative,
            self.readability,
        ];
        if let Some(r) = self.video_resolution {
            v.push(r);
        }
        v
    }
}

/// Historical engagement counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngagementCounters {
    #[serde(default)]
    pub impressions: u64,
    #[serde(default)]
    pub clicks: u64,
    #[serde(default)]
    pub good_clicks: u64,
}

impl EngagementCounters {
    fn check(&self) -> std::result::Result<(), String> {
        if self.good_clicks > self.clicks {
            return Err(format!(
                "good_clicks {} exceeds clicks {}",
                self.good_clicks, self.clicks
            ));
        }
        if self.clicks > self.impressions {
            return Err(format!(
                "clicks {} exceeds impressions {}",
                self.clicks, self.impressions
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub doc_type: DocType,
    /// For `user` documents this is the profile owner.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author_id: Option<String>,
    /// Page document id of the publisher, for videos.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub publisher_id: Option<String>,
    pub title: String,
    #[serde(default)]
    pub body: String,
    #[serde(default)]
    pub languages: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<GeoPoint>,
    #[serde(default)]
    pub created_ts: i64,
    #[serde(default)]
    pub entity_ids: BTreeSet<String>,
    #[serde(default)]
    pub quality: QualitySignals,
    #[serde(default)]
    pub engagement: EngagementCounters,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, doc_type: DocType, title: impl Into<String>) -> Self {
        Self {
            doc_id: doc_id.into(),
            doc_type,
            author_id: None,
            publisher_id: None,
            title: title.into(),
            body: String::new(),
            languages: BTreeMap::new(),
            location: None,
            created_ts: 0,
            entity_ids: BTreeSet::new(),
            quality: QualitySignals::default(),
            engagement: EngagementCounters::default(),
        }
    }

    /// Graph node the document stands for: the owner of a profile, the document itself otherwise.
    pub fn subject_id(&self) -> &str {
        match (self.doc_type, &self.author_id) {
            (DocType::User, Some(owner)) => owner,
            _ => &self.doc_id,
        }
    }
}

impl Record for Document {
    const KIND: &'static str = "document";
    const FIELDS: &'static [&'static str] = &[
        "doc_id",
        "doc_type",
        "author_id",
        "publisher_id",
        "title",
        "body",
        "languages",
        "location",
        "created_ts",
        "entity_ids",
        "quality",
        "engagement",
    ];

    fn record_id(&self) -> String {
        self.doc_id.clone()
    }

    fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        if self.doc_id.trim().is_empty() {
            return Err(("doc_id", "must be nonempty".into()));
        }
        let mut total = 0.0;
        for (code, p) in &self.languages {
            if !(0.0..=1.0).contains(p) {
                return Err(("languages", format!("probability for `{code}` is {p}")));
            }
            total += p;
        }
        if total > 1.0 + 1e-9 {
            return Err(("languages", format!("probabilities sum to {total} > 1")));
        }
        if let Some(loc) = &self.location {
            loc.check().map_err(|m| ("location", m))?;
        }
        let q = &self.quality;
        for (name, v) in [
            ("kids_friendly", q.kids_friendly),
            ("authentic", q.authentic),
            ("authoritative", q.authoritative),
            ("readability", q.readability),
            ("video_resolution", q.video_resolution.unwrap_or(0.0)),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(("quality", format!("{name} = {v} outside [0, 1]")));
            }
        }
        self.engagement.check().map_err(|m| ("engagement", m))
    }
}

/// Searcher profile: languages, location and previously engaged documents.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct UserContext {
    pub user_id: String,
    /// Ordered by preference.
    #[serde(default)]
    pub languages: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<GeoPoint>,
    /// Engaged document id -> engagement timestamp (unix seconds).
    #[serde(default)]
    pub engaged_doc_ids: BTreeMap<String, i64>,
}

impl UserContext {
    pub fn new(user_id: impl Into<String>) -> Self {
        Self {
            user_id: user_id.into(),
            ..Self::default()
        }
    }
}

impl Record for UserContext {
    const KIND: &'static str = "user";
    const FIELDS: &'static [&'static str] =
        &["user_id", "languages", "location", "engaged_doc_ids"];

    fn record_id(&self) -> String {
        self.user_id.clone()
    }

    fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        if self.user_id.trim().is_empty() {
            return Err(("user_id", "must be nonempty".into()));
        }
        if let Some(loc) = &self.location {
            loc.check().map_err(|m| ("location", m))?;
        }
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs() as i64)
            .unwrap_or(i64::MAX);
        if let Some((doc, ts)) = self.engaged_doc_ids.iter().find(|(_, ts)| **ts > now) {
            return Err((
                "engaged_doc_ids",
                format!("engagement with `{doc}` at {ts} is in the future"),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeLabel {
    Friend,
    Follow,
    PendingFriend,
    PendingJoin,
    Member,
    Engaged,
}

impl EdgeLabel {
    fn forbids_self_loop(self) -> bool {
        matches!(
            self,
            EdgeLabel::Friend | EdgeLabel::PendingFriend | EdgeLabel::PendingJoin
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub src: String,
    pub dst: String,
    pub label: EdgeLabel,
}

impl Edge {
    pub fn new(src: impl Into<String>, dst: impl Into<String>, label: EdgeLabel) -> Self {
        Self {
            src: src.into(),
            dst: dst.into(),
            label,
        }
    }
}

impl Record for Edge {
    const KIND: &'static str = "edge";
    const FIELDS: &'static [&'static str] = &["src", "dst", "label"];

    fn record_id(&self) -> String {
        format!("{}->{}", self.src, self.dst)
    }

    fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        if self.src.is_empty() {
            return Err(("src", "must be nonempty".into()));
        }
        if self.dst.is_empty() {
            return Err(("dst", "must be nonempty".into()));
        }
        if self.label.forbids_self_loop() && self.src == self.dst {
            return Err(("dst", format!("{:?} edge cannot be a self-loop", self.label)));
        }
        Ok(())
    }
}

/// Labeled directed graph over user ids and document ids.
///
/// Friend edges are stored in both directions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SocialGraph {
    out: BTreeMap<String, BTreeMap<EdgeLabel, BTreeSet<String>>>,
    nodes: BTreeSet<String>,
}

impl SocialGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_edges<'a>(edges: impl IntoIterator<Item = &'a Edge>) -> Self {
        let mut g = Self::new();
        for e in edges {
            g.add_edge(e.clone());
        }
        g
    }

    /// Registers a node that may have no edges (e.g. a user without friends).
    pub fn add_node(&mut self, id: impl Into<String>) {
        self.nodes.insert(id.into());
    }

    pub fn add_edge(&mut self, edge: Edge) {
        self.nodes.insert(edge.src.clone());
        self.nodes.insert(edge.dst.clone());
        if edge.label == EdgeLabel::Friend {
            self.out
                .entry(edge.dst.clone())
                .or_default()
                .entry(EdgeLabel::Friend)
                .or_default()
                .insert(edge.src.clone());
        }
        self.out
            .entry(edge.src)
            .or_default()
            .entry(edge.label)
            .or_default()
            .insert(edge.dst);
    }

    pub fn contains_node(&self, id: &str) -> bool {
        self.nodes.contains(id)
    }

    pub fn has_edge(&self, src: &str, label: EdgeLabel, dst: &str) -> bool {
        self.out
            .get(src)
            .and_then(|m| m.get(&label))
            .is_some_and(|s| s.contains(dst))
    }

    /// Destinations of `src` under `label`, in ascending order.
    pub fn neighbors<'a>(&'a self, src: &str, label: EdgeLabel) -> impl Iterator<Item = &'a str> + 'a {
        self.out
            .get(src)
            .and_then(|m| m.get(&label))
            .into_iter()
            .flat_map(|s| s.iter().map(String::as_str))
    }

    pub fn friends<'a>(&'a self, user: &str) -> impl Iterator<Item = &'a str> + 'a {
        self.neighbors(user, EdgeLabel::Friend)
    }

    pub fn are_friends(&self, a: &str, b: &str) -> bool {
        self.has_edge(a, EdgeLabel::Friend, b)
    }

    /// Canonical edge list; each friend pair appears once with `src < dst`.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for (src, by_label) in &self.out {
            for (label, dsts) in by_label {
                for dst in dsts {
                    if *label == EdgeLabel::Friend && src > dst {
                        continue;
                    }
                    out.push(Edge::new(src.clone(), dst.clone(), *label));
                }
            }
        }
        out
    }

    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(String::as_str)
    }
}

/// Relationship between a searcher and a candidate document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    #[serde(rename = "self")]
    SelfAuthored,
    Friend,
    FriendOfFriend,
    SelfEngaged,
    FriendEngaged,
    Followee,
    Follower,
    PendingFriend,
    PendingJoining,
}

impl Relation {
    pub const ALL: [Relation; 9] = [
        Relation::SelfAuthored,
        Relation::Friend,
        Relation::FriendOfFriend,
        Relation::SelfEngaged,
        Relation::FriendEngaged,
        Relation::Followee,
        Relation::Follower,
        Relation::PendingFriend,
        Relation::PendingJoining,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Relation::SelfAuthored => "self",
            Relation::Friend => "friend",
            Relation::FriendOfFriend => "friend_of_friend",
            Relation::SelfEngaged => "self_engaged",
            Relation::FriendEngaged => "friend_engaged",
            Relation::Followee => "followee",
            Relation::Follower => "follower",
            Relation::PendingFriend => "pending_friend",
            Relation::PendingJoining => "pending_joining",
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Relation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Relation::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown relation `{s}`"))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationSet {
    pub relations: BTreeSet<Relation>,
    /// Set when the searcher is not a node of the graph; `relations` is then empty.
    pub unknown_searcher: bool,
}

impl RelationSet {
    pub fn contains(&self, r: Relation) -> bool {
        self.relations.contains(&r)
    }
}

/// Relations between `searcher` and `doc` derived from the social graph.
pub fn social_relations(graph: &SocialGraph, searcher: &str, doc: &Document) -> RelationSet {
    if !graph.contains_node(searcher) {
        return RelationSet {
            relations: BTreeSet::new(),
            unknown_searcher: true,
        };
    }
    let mut rel = BTreeSet::new();
    if let Some(author) = doc.author_id.as_deref() {
        if author == searcher {
            rel.insert(Relation::SelfAuthored);
        } else if graph.are_friends(searcher, author) {
            rel.insert(Relation::Friend);
        } else if graph
            .friends(searcher)
            .any(|f| graph.are_friends(f, author))
        {
            rel.insert(Relation::FriendOfFriend);
        }
    }
    if graph.has_edge(searcher, EdgeLabel::Engaged, &doc.doc_id) {
        rel.insert(Relation::SelfEngaged);
    }
    if graph
        .friends(searcher)
        .any(|f| graph.has_edge(f, EdgeLabel::Engaged, &doc.doc_id))
    {
        rel.insert(Relation::FriendEngaged);
    }
    let subject = doc.subject_id();
    if subject != searcher {
        if graph.has_edge(searcher, EdgeLabel::Follow, subject) {
            rel.insert(Relation::Followee);
        }
        if graph.has_edge(subject, EdgeLabel::Follow, searcher) {
            rel.insert(Relation::Follower);
        }
        if graph.has_edge(subject, EdgeLabel::PendingFriend, searcher) {
            rel.insert(Relation::PendingFriend);
        }
        if graph.has_edge(searcher, EdgeLabel::PendingJoin, subject) {
            rel.insert(Relation::PendingJoining);
        }
    }
    RelationSet {
        relations: rel,
        unknown_searcher: false,
    }
}

/// Structured typeahead suggestion the searcher clicked before issuing the query.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StructuredSuggestion {
    pub entity_id: String,
    pub intent_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub query_text: String,
    pub user_id: String,
    #[serde(default)]
    pub ts: i64,
    #[serde(default)]
    pub shown_doc_ids: Vec<String>,
    #[serde(default)]
    pub clicked: BTreeSet<String>,
    #[serde(default)]
    pub good_clicked: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suggestion_click: Option<StructuredSuggestion>,
}

impl Record for QueryRecord {
    const KIND: &'static str = "query record";
    const FIELDS: &'static [&'static str] = &[
        "query_text",
        "user_id",
        "ts",
        "shown_doc_ids",
        "clicked",
        "good_clicked",
        "suggestion_click",
    ];

    fn record_id(&self) -> String {
        format!("{}@{}", self.query_text, self.user_id)
    }

    fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        if self.user_id.is_empty() {
            return Err(("user_id", "must be nonempty".into()));
        }
        if let Some(d) = self.good_clicked.iter().find(|d| !self.clicked.contains(*d)) {
            return Err(("good_clicked", format!("`{d}` is not in clicked")));
        }
        if let Some(d) = self
            .clicked
            .iter()
            .find(|d| !self.shown_doc_ids.iter().any(|s| s == *d))
        {
            return Err(("clicked", format!("`{d}` is not in shown_doc_ids")));
        }
        Ok(())
    }
}

/// Five-level graded relevance label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Grade {
    Bad = 0,
    Okay = 1,
    Good = 2,
    Great = 3,
    Perfect = 4,
}

impl Grade {
    pub const MAX: u8 = 4;

    pub fn value(self) -> u8 {
        self as u8
    }
}

impl TryFrom<u8> for Grade {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, Self::Error> {
        Ok(match v {
            0 => Grade::Bad,
            1 => Grade::Okay,
            2 => Grade::Good,
            3 => Grade::Great,
            4 => Grade::Perfect,
            _ => return Err(format!("grade {v} outside 0..=4")),
        })
    }
}

impl From<Grade> for u8 {
    fn from(g: Grade) -> u8 {
        g as u8
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceJudgment {
    pub query_text: String,
    pub user_id: String,
    pub doc_id: String,
    pub grade: Grade,
}

impl Record for RelevanceJudgment {
    const KIND: &'static str = "judgment";
    const FIELDS: &'static [&'static str] = &["query_text", "user_id", "doc_id", "grade"];

    fn record_id(&self) -> String {
        format!("{}@{}:{}", self.query_text, self.user_id, self.doc_id)
    }
}

/// Counts produced by a corpus load.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub documents: usize,
    pub users: usize,
    pub edges: usize,
    pub per_type: BTreeMap<DocType, usize>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// Immutable document collection with users, social graph and engagement history.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    docs: Vec<Document>,
    by_id: HashMap<String, usize>,
    users: BTreeMap<String, UserContext>,
    graph: SocialGraph,
    query_engagement: BTreeMap<(String, String), EngagementCounters>,
}

impl Corpus {
    /// Builds a corpus from in-memory records, validating every invariant.
    pub fn new(
        documents: Vec<Document>,
        users: Vec<UserContext>,
        edges: Vec<Edge>,
    ) -> Result<Self> {
        let docs = documents
            .into_iter()
            .enumerate()
            .map(|(i, record)| Located { line: i + 1, record })
            .collect();
        let users = users
            .into_iter()
            .enumerate()
            .map(|(i, record)| Located { line: i + 1, record })
            .collect();
        let edges = edges
            .into_iter()
            .enumerate()
            .map(|(i, record)| Located { line: i + 1, record })
            .collect();
        Self::assemble(docs, users, edges, "<memory>")
    }

    fn assemble(
        docs: Vec<Located<Document>>,
        users: Vec<Located<UserContext>>,
        edges: Vec<Located<Edge>>,
        label: &str,
    ) -> Result<Self> {
        let mut corpus = Corpus::default();
        for Located { line, record } in docs {
            if let Err((field, message)) = record.validate() {
                return Err(Error::Invariant {
                    file: format!("{label}/{}", files::DOCUMENTS),
                    line,
                    record: Document::KIND,
                    id: record.doc_id,
                    field,
                    message,
                });
            }
            if corpus.by_id.contains_key(&record.doc_id) {
                return Err(Error::Duplicate {
                    file: format!("{label}/{}", files::DOCUMENTS),
                    line,
                    record: Document::KIND,
                    id: record.doc_id,
                });
            }
            corpus.by_id.insert(record.doc_id.clone(), corpus.docs.len());
            corpus.docs.push(record);
        }
        for Located { line, record } in users {
            if let Err((field, message)) = record.validate() {
                return Err(Error::Invariant {
                    file: format!("{label}/{}", files::USERS),
                    line,
                    record: UserContext::KIND,
                    id: record.user_id,
                    field,
                    message,
                });
            }
            if corpus.users.contains_key(&record.user_id) {
                return Err(Error::Duplicate {
                    file: format!("{label}/{}", files::USERS),
                    line,
                    record: UserContext::KIND,
                    id: record.user_id,
                });
            }
            corpus.graph.add_node(record.user_id.clone());
            corpus.users.insert(record.user_id.clone(), record);
        }
        for Located { line, record } in edges {
            if let Err((field, message)) = record.validate() {
                return Err(Error::Invariant {
                    file: format!("{label}/{}", files::EDGES),
                    line,
                    record: Edge::KIND,
                    id: record.record_id(),
                    field,
                    message,
                });
            }
            corpus.graph.add_edge(record);
        }
        Ok(corpus)
    }

    /// Loads a corpus.
    ///
    /// `path` is either a directory holding `documents.jsonl` and optionally
    /// `users.jsonl` / `edges.jsonl`, or a single documents file.
    pub fn load(path: &Path) -> Result<(Self, LoadReport)> {
        let mut warnings = Vec::new();
        let (docs, users, edges) = if path.is_dir() {
            let docs = records::read_records::<Document>(&path.join(files::DOCUMENTS), &mut warnings)?;
            let users_path = path.join(files::USERS);
            let users = if users_path.exists() {
                records::read_records::<UserContext>(&users_path, &mut warnings)?
            } else {
                Vec::new()
            };
            let edges_path = path.join(files::EDGES);
            let edges = if edges_path.exists() {
                records::read_records::<Edge>(&edges_path, &mut warnings)?
            } else {
                Vec::new()
            };
            (docs, users, edges)
        } else {
            let docs = records::read_records::<Document>(path, &mut warnings)?;
            (docs, Vec::new(), Vec::new())
        };
        let label = path.display().to_string();
        let edge_count = edges.len();
        let corpus = Self::assemble(docs, users, edges, &label)?;
        let mut report = corpus.report();
        report.edges = edge_count;
        report.warnings = warnings;
        Ok((corpus, report))
    }

    /// Writes the corpus as a directory of record files.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        records::write_records(&dir.join(files::DOCUMENTS), &self.docs)?;
        records::write_records(&dir.join(files::USERS), self.users.values())?;
        records::write_records(&dir.join(files::EDGES), &self.graph.edges())
    }

    pub fn report(&self) -> LoadReport {
        let mut per_type = BTreeMap::new();
        for d in &self.docs {
            *per_type.entry(d.doc_type).or_insert(0) += 1;
        }
        LoadReport {
            documents: self.docs.len(),
            users: self.users.len(),
            edges: self.graph.edges().len(),
            per_type,
            warnings: Vec::new(),
        }
    }

    /// Adds per-(query, doc) engagement counters from a query log.
    pub fn attach_query_log(&mut self, log: &[QueryRecord]) {
        for rec in log {
            let q = normalize_query(&rec.query_text);
            for doc in &rec.shown_doc_ids {
                let c = self
                    .query_engagement
                    .entry((q.clone(), doc.clone()))
                    .or_default();
                c.impressions += 1;
                if rec.clicked.contains(doc) {
                    c.clicks += 1;
                }
                if rec.good_clicked.contains(doc) {
                    c.good_clicks += 1;
                }
            }
        }
    }

    /// Engagement of `doc_id` under the normalized query `query`.
    pub fn query_engagement(&self, query: &str, doc_id: &str) -> EngagementCounters {
        self.query_engagement
            .get(&(query.to_string(), doc_id.to_string()))
            .copied()
            .unwrap_or_default()
    }

    pub fn documents(&self) -> &[Document] {
        &self.docs
    }

    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.by_id.get(doc_id).map(|&i| &self.docs[i])
    }

    pub fn user(&self, user_id: &str) -> Option<&UserContext> {
        self.users.get(user_id)
    }

    pub fn users(&self) -> impl Iterator<Item = &UserContext> {
        self.users.values()
    }

    pub fn graph(&self) -> &SocialGraph {
        &self.graph
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Largest timestamp seen anywhere in the corpus; used as a deterministic "now".
    pub fn latest_ts(&self) -> i64 {
        let docs = self.docs.iter().map(|d| d.created_ts);
        let engaged = self
            .users
            .values()
            .flat_map(|u| u.engaged_doc_ids.values().copied());
        docs.chain(engaged).max().unwrap_or(0)
    }

    /// Display name of a user, taken from their profile document.
    pub fn user_name(&self, user_id: &str) -> Option<&str> {
        self.docs
            .iter()
            .find(|d| d.doc_type == DocType::User && d.author_id.as_deref() == Some(user_id))
            .map(|d| d.title.as_str())
    }
}

pub fn load_query_log(path: &Path) -> Result<Vec<QueryRecord>> {
    records::read_all(path)
}

pub fn load_judgments(path: &Path) -> Result<Vec<RelevanceJudgment>> {
    records::read_all(path)
}
