//! Trust engines.
//!
//! Both engines consume the same evaluation input (the policy's trust and
//! risk agents plus their actual values) and produce a [`Decision`]. The
//! additive engine keeps one total score across all entities; the
//! subjective-logic engine keeps one score per entity and permits only if
//! every entity clears the threshold.

mod additive;
mod subjective;

pub use additive::{additive_decide, additive_risk_level, additive_trust_score, AdditiveEngine};
pub use subjective::{sl_decide, sl_entity_score, sl_risk_level, SubjectiveLogicEngine};

use crate::attribute::{AttributeDefinition, AttributeError, Catalog, Category, Value, ValueSource};
use crate::opinion::{Opinion, OpinionError};
use crate::policy::Policy;
use crate::request::DecisionRequest;
use serde::{Deserialize, Serialize};
use rustc_hash::FxHashMap;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Additive,
    SubjectiveLogic,
}

impl Algorithm {
    pub const ALL: [Algorithm; 2] = [Algorithm::Additive, Algorithm::SubjectiveLogic];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Additive => "additive",
            Algorithm::SubjectiveLogic => "subjective_logic",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Threshold the trust score(s) must exceed.
///
/// Written as a number (static) or the string `"dynamic"` (risk level).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ThresholdRepr", into = "ThresholdRepr")]
pub enum ThresholdMode {
    Static(f64),
    Dynamic,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ThresholdRepr {
    Static(f64),
    Word(String),
}

impl TryFrom<ThresholdRepr> for ThresholdMode {
    type Error = String;

    fn try_from(r: ThresholdRepr) -> Result<Self, String> {
        match r {
            ThresholdRepr::Static(v) => Ok(ThresholdMode::Static(v)),
            ThresholdRepr::Word(w) if w == "dynamic" => Ok(ThresholdMode::Dynamic),
            ThresholdRepr::Word(w) => Err(format!("expected a number or \"dynamic\", got `{w}`")),
        }
    }
}

impl From<ThresholdMode> for ThresholdRepr {
    fn from(t: ThresholdMode) -> Self {
        match t {
            ThresholdMode::Static(v) => ThresholdRepr::Static(v),
            ThresholdMode::Dynamic => ThresholdRepr::Word("dynamic".into()),
        }
    }
}

impl ThresholdMode {
    pub fn is_dynamic(&self) -> bool {
        matches!(self, ThresholdMode::Dynamic)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Permit,
    Deny,
}

impl Outcome {
    pub fn is_permit(self) -> bool {
        self == Outcome::Permit
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Permit => "permit",
            Outcome::Deny => "deny",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditiveScores {
    pub ts_total: f64,
    /// Absent under a static threshold, where no risk attributes are evaluated.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rl_total: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlOpinions {
    pub user: Opinion,
    pub device: Opinion,
    pub channel: Opinion,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub risk: Option<Opinion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlScores {
    pub p_user: f64,
    pub p_device: f64,
    pub p_channel: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p_risk: Option<f64>,
    pub opinions: SlOpinions,
    /// Entities for which the policy configured no agents.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub unevaluated: Vec<Category>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scores {
    Additive(AdditiveScores),
    SubjectiveLogic(SlScores),
}

/// The threshold a decision was compared against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdUsed {
    pub mode: ThresholdKind,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdKind {
    Static,
    Dynamic,
}

/// Running aggregate after one agent: a partial sum or a partially fused opinion.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum RunningAggregate {
    Sum(f64),
    Opinion(Opinion),
}

/// One agent's contribution in the audit trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceStep {
    pub attribute_id: Arc<str>,
    pub category: Category,
    /// Actual value; `None` when redacted or missing.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<Value>,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub redacted: bool,
    pub present: bool,
    pub matched: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub opinion: Option<Opinion>,
    pub running: RunningAggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decision {
    pub outcome: Outcome,
    pub algorithm: Algorithm,
    pub scores: Scores,
    pub threshold: ThresholdUsed,
    pub trace: Vec<TraceStep>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("no engine is enabled for algorithm `{0}`")]
    UnknownAlgorithm(Algorithm),
    #[error("attribute set mismatch: {0}")]
    AttributeSetMismatch(String),
    #[error("attribute `{0}` carries a payload of the wrong codomain")]
    MixedCodomain(String),
    #[error(transparent)]
    Attribute(#[from] AttributeError),
    #[error(transparent)]
    Opinion(#[from] OpinionError),
}

/// One agent: a definition and the actual value it evaluates, if any.
#[derive(Debug, Clone, Copy)]
pub struct Agent<'a> {
    pub definition: &'a AttributeDefinition,
    pub value: Option<&'a Value>,
}

impl<'a> Agent<'a> {
    pub(crate) fn trace_value(&self) -> (Option<Value>, bool) {
        match self.value {
            Some(_) if self.definition.secret => (None, true),
            Some(v) => (Some(v.clone()), false),
            None => (None, false),
        }
    }
}

/// Everything an engine needs for one decision.
#[derive(Debug, Clone)]
pub struct EngineInput<'a> {
    pub trust: Vec<Agent<'a>>,
    pub risk: Vec<Agent<'a>>,
    pub threshold: ThresholdMode,
}

pub trait TrustAlgorithm: Send + Sync {
    fn algorithm(&self) -> Algorithm;

    fn decide(&self, input: &EngineInput<'_>) -> Result<Decision, EngineError>;
}

/// Attribute values keyed by attribute id, already resolved for the
/// request's subjects.
pub type AttributeValues = FxHashMap<Arc<str>, Value>;

/// Reads a request-carried value for attributes not served by the PIP.
pub fn request_value(source: ValueSource, req: &DecisionRequest) -> Option<Value> {
    let s = match source {
        ValueSource::Pip => return None,
        ValueSource::ChannelAuth => &req.channel.auth,
        ValueSource::ChannelConf => &req.channel.conf,
        ValueSource::ChannelInteg => &req.channel.integ,
        ValueSource::Action => &req.action,
    };
    Some(Value::Text(s.as_str().into()))
}

/// Pairs definitions with their values: request-carried ones from `carried`
/// (aligned with `defs`), the rest from the information point.
fn agents<'a>(defs: &[&'a AttributeDefinition], carried: &'a [Option<Value>], values: &'a AttributeValues) -> Vec<Agent<'a>> {
    defs.iter()
        .zip(carried)
        .map(|(&definition, own)| {
            let value = match definition.source {
                ValueSource::Pip => values.get(definition.id.as_ref()),
                _ => own.as_ref(),
            };
            Agent { definition, value }
        })
        .collect()
}

/// The set of enabled engines the decision point dispatches on.
#[derive(Clone)]
pub struct Engines {
    engines: FxHashMap<Algorithm, Arc<dyn TrustAlgorithm>>,
}

impl Default for Engines {
    fn default() -> Self {
        Self::all()
    }
}

impl fmt::Debug for Engines {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut keys: Vec<_> = self.engines.keys().collect();
        keys.sort();
        f.debug_struct("Engines").field("enabled", &keys).finish()
    }
}

impl Engines {
    pub fn all() -> Self {
        Self::only(&Algorithm::ALL)
    }

    pub fn only(algorithms: &[Algorithm]) -> Self {
        let engines = algorithms
            .iter()
            .map(|&a| {
                let engine: Arc<dyn TrustAlgorithm> = match a {
                    Algorithm::Additive => Arc::new(AdditiveEngine),
                    Algorithm::SubjectiveLogic => Arc::new(SubjectiveLogicEngine),
                };
                (a, engine)
            })
            .collect();
        Self { engines }
    }

    pub fn is_enabled(&self, algorithm: Algorithm) -> bool {
        self.engines.contains_key(&algorithm)
    }

    /// Evaluates one request under its resolved policy.
    ///
    /// `values` holds the information-point values; request-carried attributes
    /// (channel protections, action) are read from `req`. Missing values are
    /// handled per engine: no contribution (additive) or a vacuous opinion
    /// (subjective logic).
    pub fn evaluate_request(
        &self,
        req: &DecisionRequest,
        policy: &Policy,
        catalog: &Catalog,
        values: &AttributeValues,
    ) -> Result<Decision, EngineError> {
        let engine = self.engines.get(&policy.algorithm).ok_or(EngineError::UnknownAlgorithm(policy.algorithm))?;
        let definitions = |list: &[String], want_trust: bool| -> Result<Vec<&AttributeDefinition>, EngineError> {
            list.iter()
                .map(|id| {
                    let definition = catalog
                        .get(policy.algorithm, id)
                        .ok_or_else(|| EngineError::AttributeSetMismatch(format!("`{id}` is not in the active catalog")))?;
                    if definition.category.is_trust() != want_trust {
                        return Err(EngineError::AttributeSetMismatch(format!(
                            "`{id}` is a {} attribute listed as {}",
                            definition.category,
                            if want_trust { "trust" } else { "risk" }
                        )));
                    }
                    Ok(definition)
                })
                .collect()
        };
        let trust_defs = definitions(&policy.trust_attribute_ids, true)?;
        let risk_defs =
            if policy.threshold.is_dynamic() { definitions(&policy.risk_attribute_ids, false)? } else { Vec::new() };
        // Request-carried values, aligned with the definitions they belong to.
        let carried = |defs: &[&AttributeDefinition]| -> Vec<Option<Value>> {
            defs.iter().map(|d| request_value(d.source, req)).collect()
        };
        let (trust_carried, risk_carried) = (carried(&trust_defs), carried(&risk_defs));
        let trust = agents(&trust_defs, &trust_carried, values);
        let risk = agents(&risk_defs, &risk_carried, values);
        engine.decide(&EngineInput { trust, risk, threshold: policy.threshold })
    }
}
