//! Ranking components behind one scorer interface, and the registry that
//! assembles them from configuration.

pub mod engagement;
pub mod generic;
pub mod signals;
pub mod specific;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::context::QueryContext;
use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::intent::IntentSpace;
use crate::records::{read_all, Record};

pub use engagement::{EngagementModel, Example, TrainParams, TrainReport};
pub use signals::SharedSignals;

/// A ranking factor. Implementations are pure and should return values in [0, 1];
/// the registry clamps anything else.
pub trait Scorer: Send + Sync + fmt::Debug {
    fn kind(&self) -> &'static str;
    fn score(&self, ctx: &QueryContext<'_>, doc: &Document, signals: &SharedSignals) -> f64;
}

/// Maps NaN to 0 and clamps to [0, 1].
pub fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Generic,
    Intent(String),
}

impl Scope {
    pub fn intent(&self) -> Option<&str> {
        match self {
            Scope::Generic => None,
            Scope::Intent(t) => Some(t),
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::Generic => f.write_str("generic"),
            Scope::Intent(t) => write!(f, "intent:{t}"),
        }
    }
}

pub const GENERIC_KINDS: &[&str] = &[
    "text_relevance",
    "social",
    "location",
    "language",
    "quality",
    "engagement",
    "passthrough",
];
pub const INTENT_KINDS: &[&str] = &["friend", "special_grammar", "video_publisher"];

pub fn valid_kinds() -> Vec<&'static str> {
    GENERIC_KINDS.iter().chain(INTENT_KINDS).copied().collect()
}

fn default_weight() -> f64 {
    1.0
}

fn empty_params() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

/// One entry of the component configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub component_id: String,
    pub kind: String,
    pub scope: Scope,
    #[serde(default = "empty_params")]
    pub params: serde_json::Value,
    #[serde(default = "default_weight")]
    pub weight: f64,
}

impl ComponentSpec {
    pub fn new(id: &str, kind: &str, scope: Scope, weight: f64) -> Self {
        Self {
            component_id: id.into(),
            kind: kind.into(),
            scope,
            params: empty_params(),
            weight,
        }
    }

    pub fn with_params(mut self, params: serde_json::Value) -> Self {
        self.params = params;
        self
    }
}

impl Record for ComponentSpec {
    const KIND: &'static str = "component";
    const FIELDS: &'static [&'static str] = &["component_id", "kind", "scope", "params", "weight"];

    fn record_id(&self) -> String {
        self.component_id.clone()
    }

    fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        if self.component_id.is_empty() {
            return Err(("component_id", "must be nonempty".into()));
        }
        if !(self.weight >= 0.0 && self.weight.is_finite()) {
            return Err(("weight", format!("must be finite and >= 0, got {}", self.weight)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EngagementParams {
    #[serde(default)]
    model: Option<EngagementModel>,
    /// Model record file, relative to the configuration file.
    #[serde(default)]
    model_file: Option<String>,
}

fn params<T: serde::de::DeserializeOwned>(spec: &ComponentSpec) -> Result<T> {
    let v = if spec.params.is_null() {
        empty_params()
    } else {
        spec.params.clone()
    };
    serde_json::from_value(v).map_err(|e| {
        Error::Config(format!(
            "component `{}` ({}): bad params: {e}",
            spec.component_id, spec.kind
        ))
    })
}

/// Instantiates the scorer for `spec`. `base_dir` resolves relative model files.
pub fn build_scorer(spec: &ComponentSpec, base_dir: Option<&Path>) -> Result<Box<dyn Scorer>> {
    Ok(match spec.kind.as_str() {
        "text_relevance" => {
            let s: generic::TextRelevance = params(spec)?;
            s.validate()?;
            Box::new(s)
        }
        "social" => Box::new(params::<generic::SocialRelevance>(spec)?),
        "location" => {
            let s: generic::LocationRelevance = params(spec)?;
            if !(s.tau_km > 0.0) {
                return Err(Error::Config("location tau_km must be > 0".into()));
            }
            Box::new(s)
        }
        "language" => Box::new(params::<generic::LanguageMatch>(spec)?),
        "quality" => Box::new(params::<generic::DocumentQuality>(spec)?),
        "passthrough" => Box::new(params::<generic::Passthrough>(spec)?),
        "engagement" => {
            let p: EngagementParams = params(spec)?;
            let model = match (p.model, p.model_file) {
                (Some(_), Some(_)) => {
                    return Err(Error::Config(format!(
                        "component `{}`: give either model or model_file, not both",
                        spec.component_id
                    )))
                }
                (Some(m), None) => m,
                (None, Some(f)) => {
                    let path = match base_dir {
                        Some(d) => d.join(&f),
                        None => f.into(),
                    };
                    read_all::<EngagementModel>(&path)?
                        .into_iter()
                        .next()
                        .ok_or_else(|| Error::Config(format!("{} holds no model", path.display())))?
                }
                (None, None) => EngagementModel::default(),
            };
            model.check()?;
            for f in model.unknown_features() {
                log::warn!("engagement feature `{f}` is unknown and will read as 0");
            }
            Box::new(model)
        }
        "friend" => Box::new(params::<specific::FriendIntent>(spec)?),
        "special_grammar" => Box::new(params::<specific::GrammarIntent>(spec)?),
        "video_publisher" => Box::new(params::<specific::VideoPublisher>(spec)?),
        other => {
            return Err(Error::Config(format!(
                "component `{}` has unknown kind `{other}`; valid kinds: {}",
                spec.component_id,
                valid_kinds().join(", ")
            )))
        }
    })
}

#[derive(Debug)]
pub struct Component {
    pub id: String,
    pub kind: String,
    pub scope: Scope,
    pub weight: f64,
    scorer: Box<dyn Scorer>,
}

impl Component {
    pub fn score(&self, ctx: &QueryContext<'_>, doc: &Document, signals: &SharedSignals) -> f64 {
        sanitize(self.scorer.score(ctx, doc, signals))
    }

    pub fn from_scorer(id: &str, scope: Scope, weight: f64, scorer: Box<dyn Scorer>) -> Self {
        Self {
            id: id.into(),
            kind: scorer.kind().into(),
            scope,
            weight,
            scorer,
        }
    }
}

/// Resolved components: generic ones in configuration order, at most one per intent.
#[derive(Debug, Default)]
pub struct Registry {
    generic: Vec<Component>,
    intent: BTreeMap<String, Component>,
}

impl Registry {
    pub fn build(specs: &[ComponentSpec], space: &IntentSpace, base_dir: Option<&Path>) -> Result<Self> {
        let mut components = Vec::with_capacity(specs.len());
        for spec in specs {
            spec.validate().map_err(|(field, m)| {
                Error::Config(format!("component `{}` {field}: {m}", spec.component_id))
            })?;
            let scorer = build_scorer(spec, base_dir)?;
            components.push(Component {
                id: spec.component_id.clone(),
                kind: spec.kind.clone(),
                scope: spec.scope.clone(),
                weight: spec.weight,
                scorer,
            });
        }
        Self::from_components(components, space)
    }

    pub fn from_components(components: Vec<Component>, space: &IntentSpace) -> Result<Self> {
        let mut ids = BTreeSet::new();
        let mut reg = Registry::default();
        for c in components {
            if !ids.insert(c.id.clone()) {
                return Err(Error::Config(format!("duplicate component id `{}`", c.id)));
            }
            match &c.scope {
                Scope::Generic => {
                    if INTENT_KINDS.contains(&c.kind.as_str()) {
                        return Err(Error::Config(format!(
                            "component `{}` of kind `{}` must be intent-scoped",
                            c.id, c.kind
                        )));
                    }
                    reg.generic.push(c);
                }
                Scope::Intent(t) => {
                    if !space.contains(t) {
                        return Err(Error::Config(format!(
                            "component `{}` is scoped to unknown intent `{t}`",
                            c.id
                        )));
                    }
                    if let Some(prev) = reg.intent.get(t) {
                        return Err(Error::Config(format!(
                            "intent `{t}` already has component `{}`; `{}` would be a second",
                            prev.id, c.id
                        )));
                    }
                    reg.intent.insert(t.clone(), c);
                }
            }
        }
        Ok(reg)
    }

    pub fn generic(&self) -> &[Component] {
        &self.generic
    }

    /// Intent-specific components keyed by intent id.
    pub fn intent_components(&self) -> &BTreeMap<String, Component> {
        &self.intent
    }

    pub fn for_intent(&self, intent: &str) -> Option<&Component> {
        self.intent.get(intent)
    }

    pub fn get(&self, id: &str) -> Option<&Component> {
        self.generic
            .iter()
            .chain(self.intent.values())
            .find(|c| c.id == id)
    }

    pub fn len(&self) -> usize {
        self.generic.len() + self.intent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Configured weights: generic by component id, intent-specific by intent id.
    pub fn weights(&self) -> (BTreeMap<String, f64>, BTreeMap<String, f64>) {
        let g = self.generic.iter().map(|c| (c.id.clone(), c.weight)).collect();
        let t = self.intent.iter().map(|(t, c)| (t.clone(), c.weight)).collect();
        (g, t)
    }
}
