use crate::corpus::{SocialGraph, StructuredSuggestion, UserContext};
use crate::intent::IntentCaptures;
use crate::tokenize::Tokenizer;

/// A personalized query: text plus everything known about the searcher.
#[derive(Debug, Clone)]
pub struct QueryContext<'a> {
    pub query: String,
    pub tokens: Vec<String>,
    pub user: &'a UserContext,
    pub graph: &'a SocialGraph,
    pub suggestion: Option<StructuredSuggestion>,
    /// Reference time for time-windowed features (unix seconds).
    pub now_ts: i64,
    /// Filled in from intent detection before scoring.
    pub captures: IntentCaptures,
}

impl<'a> QueryContext<'a> {
    pub fn new(
        query: impl Into<String>,
        tokenizer: &Tokenizer,
        user: &'a UserContext,
        graph: &'a SocialGraph,
    ) -> Self {
        let query = query.into();
        let tokens = tokenizer.tokenize(&query);
        Self {
            query,
            tokens,
            user,
            graph,
            suggestion: None,
            now_ts: 0,
            captures: IntentCaptures::default(),
        }
    }

    pub fn with_suggestion(mut self, suggestion: Option<StructuredSuggestion>) -> Self {
        self.suggestion = suggestion;
        self
    }

    pub fn with_now(mut self, now_ts: i64) -> Self {
        self.now_ts = now_ts;
        self
    }

    pub fn searcher(&self) -> &str {
        &self.user.user_id
    }

    /// Query tokens joined by single spaces.
    pub fn normalized_query(&self) -> String {
        self.tokens.join(" ")
    }
}
