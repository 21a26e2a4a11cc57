//! Personal-history query grammar such as "posts I have seen" or "videos I watched yesterday".

use serde::{Deserialize, Serialize};

use crate::corpus::DocType;
use crate::intent::pattern::PatternMatch;

pub const DOC_TYPE_SLOT: &str = "doc_type";
pub const SEEN_SLOT: &str = "seen";
pub const WHEN_SLOT: &str = "when";

const DAY: i64 = 86_400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeWindow {
    Today,
    Yesterday,
    LastWeek,
    LastMonth,
}

impl TimeWindow {
    pub fn from_phrase(phrase: &str) -> Option<Self> {
        Some(match phrase {
            "today" => TimeWindow::Today,
            "yesterday" => TimeWindow::Yesterday,
            "last week" | "this week" | "recently" => TimeWindow::LastWeek,
            "last month" | "this month" => TimeWindow::LastMonth,
            _ => return None,
        })
    }

    /// Half-open `[start, end)` bounds in unix seconds, relative to `now`.
    /// Calendar days are UTC.
    pub fn bounds(self, now: i64) -> (i64, i64) {
        let day_start = now.div_euclid(DAY) * DAY;
        match self {
            TimeWindow::Today => (day_start, now + 1),
            TimeWindow::Yesterday => (day_start - DAY, day_start),
            TimeWindow::LastWeek => (now - 7 * DAY, now + 1),
            TimeWindow::LastMonth => (now - 30 * DAY, now + 1),
        }
    }

    pub fn contains(self, ts: i64, now: i64) -> bool {
        let (lo, hi) = self.bounds(now);
        lo <= ts && ts < hi
    }
}

/// Structured reading of a special-grammar query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrammarSpec {
    pub doc_type: Option<DocType>,
    pub self_seen: bool,
    pub window: Option<TimeWindow>,
}

pub fn doc_type_from_phrase(phrase: &str) -> Option<DocType> {
    Some(match phrase {
        "post" | "posts" => DocType::Post,
        "video" | "videos" => DocType::Video,
        "photo" | "photos" | "picture" | "pictures" => DocType::Photo,
        "group" | "groups" => DocType::Group,
        "page" | "pages" => DocType::Page,
        "event" | "events" => DocType::Event,
        "people" | "person" | "profiles" => DocType::User,
        _ => return None,
    })
}

/// Interprets the `doc_type`, `seen` and `when` captures of a pattern match.
pub fn grammar_from_match(m: &PatternMatch) -> GrammarSpec {
    GrammarSpec {
        doc_type: m.phrase(DOC_TYPE_SLOT).and_then(doc_type_from_phrase),
        self_seen: m.captures.contains_key(SEEN_SLOT),
        window: m.phrase(WHEN_SLOT).and_then(TimeWindow::from_phrase),
    }
}
