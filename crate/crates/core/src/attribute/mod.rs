//! Trust and risk attributes.
//!
//! Every attribute declares a set of target values and a weighting function
//! mapping each target (degree of fulfillment) to a weight. Three weight
//! codomains exist because the engines consume structurally different weights:
//!
//! | kind                 | weight            | consumer                    |
//! |----------------------|-------------------|-----------------------------|
//! | `AdditiveReal`       | real number       | additive engine             |
//! | `TrustUncertainty`   | `(b, d, u)` template, `u` is the weight | subjective-logic trust agents |
//! | `RiskEvidencePair`   | `(b, d)`, `u = 1 - b - d` | subjective-logic risk agents |

mod catalog;
mod value;

pub(crate) use catalog::line_col;
pub use catalog::{default_catalog, Catalog, CatalogError, DEFAULT_CATALOG_TOML};
pub use value::{Target, Value, ValueDomain};

use crate::opinion::{Opinion, OpinionError, TOLERANCE};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// Default base rate for binary opinions when no prior knowledge exists.
pub const DEFAULT_BASE_RATE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    User,
    Device,
    Channel,
    Risk,
}

impl Category {
    pub fn is_trust(self) -> bool {
        !matches!(self, Category::Risk)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::User => "user",
            Category::Device => "device",
            Category::Channel => "channel",
            Category::Risk => "risk",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodomainKind {
    AdditiveReal,
    TrustUncertainty,
    RiskEvidencePair,
}

/// Where an attribute's actual value comes from.
///
/// Most values are served by the policy information point. Channel properties
/// and the requested action are carried by the decision request itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum ValueSource {
    #[default]
    #[serde(rename = "pip")]
    Pip,
    #[serde(rename = "request.channel.auth")]
    ChannelAuth,
    #[serde(rename = "request.channel.conf")]
    ChannelConf,
    #[serde(rename = "request.channel.integ")]
    ChannelInteg,
    #[serde(rename = "request.action")]
    Action,
}

/// `(b, d, u)` an agent emits for one degree of fulfillment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustTemplate {
    pub b: f64,
    pub d: f64,
    pub u: f64,
}

/// `(b, d)` evidence weight of a risk agent; the remainder is uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskWeight {
    pub b: f64,
    pub d: f64,
}

/// One degree of fulfillment: a target pattern and the weight `f_W` assigns it.
#[derive(Debug, Clone, PartialEq)]
pub struct Degree<W> {
    pub target: Target,
    pub weight: W,
}

impl<W> Degree<W> {
    pub fn new(target: Target, weight: W) -> Self {
        Self { target, weight }
    }
}

/// The weighting function `f_W`, restricted to the target set it is defined on.
///
/// Degrees are checked in order and the first matching one applies, so
/// overlapping intervals resolve deterministically.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightMapping {
    Additive(Vec<Degree<f64>>),
    TrustUncertainty { degrees: Vec<Degree<TrustTemplate>>, unmet: TrustTemplate },
    RiskEvidence(Vec<Degree<RiskWeight>>),
}

impl WeightMapping {
    pub fn kind(&self) -> CodomainKind {
        match self {
            WeightMapping::Additive(_) => CodomainKind::AdditiveReal,
            WeightMapping::TrustUncertainty { .. } => CodomainKind::TrustUncertainty,
            WeightMapping::RiskEvidence(_) => CodomainKind::RiskEvidencePair,
        }
    }

    fn targets(&self) -> Vec<&Target> {
        match self {
            WeightMapping::Additive(d) => d.iter().map(|d| &d.target).collect(),
            WeightMapping::TrustUncertainty { degrees, .. } => degrees.iter().map(|d| &d.target).collect(),
            WeightMapping::RiskEvidence(d) => d.iter().map(|d| &d.target).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AttributeError {
    /// The value does not conform to the declared domain. The value itself is
    /// never echoed, since it may be a credential.
    #[error("attribute `{attribute}`: {found} value does not conform to {expected}")]
    DomainMismatch { attribute: String, expected: String, found: &'static str },
    #[error("attribute `{attribute}` carries {found:?} weights, {expected:?} required")]
    WrongCodomainKind { attribute: String, expected: CodomainKind, found: CodomainKind },
    #[error("attribute `{attribute}`: value lies outside every configured degree of fulfillment")]
    UnmappedValue { attribute: String },
    #[error("attribute `{attribute}` is invalid: {reason}")]
    InvalidDefinition { attribute: String, reason: String },
}

/// One trust or risk attribute together with its weighting function.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeDefinition {
    pub id: Arc<str>,
    pub display_name: String,
    pub category: Category,
    pub domain: ValueDomain,
    pub source: ValueSource,
    /// Secret values (credentials) never appear in traces, only membership.
    pub secret: bool,
    /// Degrees are listed from most to least fulfilled.
    pub monotone: bool,
    pub base_rate: f64,
    pub weights: WeightMapping,
}

impl AttributeDefinition {
    /// Builds and validates a definition with default source, base rate and flags.
    pub fn new(
        id: impl Into<Arc<str>>,
        display_name: impl Into<String>,
        category: Category,
        domain: ValueDomain,
        weights: WeightMapping,
    ) -> Result<Self, AttributeError> {
        let def = Self {
            id: id.into(),
            display_name: display_name.into(),
            category,
            domain,
            source: ValueSource::Pip,
            secret: false,
            monotone: false,
            base_rate: DEFAULT_BASE_RATE,
            weights,
        };
        def.validate()?;
        Ok(def)
    }

    pub fn with_secret(mut self, secret: bool) -> Self {
        self.secret = secret;
        self
    }

    pub fn with_source(mut self, source: ValueSource) -> Self {
        self.source = source;
        self
    }

    pub fn codomain_kind(&self) -> CodomainKind {
        self.weights.kind()
    }

    fn invalid(&self, reason: impl Into<String>) -> AttributeError {
        AttributeError::InvalidDefinition { attribute: self.id.to_string(), reason: reason.into() }
    }

    /// Checks the codomain discipline and that `f_W` is total over its targets.
    pub fn validate(&self) -> Result<(), AttributeError> {
        if self.id.is_empty() {
            return Err(self.invalid("empty id"));
        }
        if !(0.0..=1.0).contains(&self.base_rate) {
            return Err(self.invalid(format!("base rate {} outside [0, 1]", self.base_rate)));
        }
        match (&self.weights, self.category) {
            (WeightMapping::TrustUncertainty { .. }, Category::Risk) => {
                return Err(self.invalid("risk attributes take (b, d) evidence weights"));
            }
            (WeightMapping::RiskEvidence(_), c) if c.is_trust() => {
                return Err(self.invalid("trust attributes take (b, d, u) opinion templates"));
            }
            _ => {}
        }
        let targets = self.weights.targets();
        if targets.is_empty() {
            return Err(self.invalid("no target values"));
        }
        if let Some(t) = targets.iter().find(|t| !self.domain.admits(t)) {
            return Err(self.invalid(format!("target {t:?} is not expressible over domain {}", self.domain)));
        }
        let check_template = |t: &TrustTemplate| -> Result<(), AttributeError> {
            Opinion::new(t.b, t.d, t.u, self.base_rate).map(|_| ()).map_err(|e| self.invalid(e.to_string()))
        };
        match &self.weights {
            WeightMapping::Additive(degrees) => {
                if let Some(d) = degrees.iter().find(|d| !d.weight.is_finite()) {
                    return Err(self.invalid(format!("non-finite weight {}", d.weight)));
                }
                if self.monotone && degrees.windows(2).any(|w| w[1].weight > w[0].weight) {
                    return Err(self.invalid("monotone degrees must have non-increasing weights"));
                }
            }
            WeightMapping::TrustUncertainty { degrees, unmet } => {
                for d in degrees {
                    check_template(&d.weight)?;
                }
                check_template(unmet)?;
                if self.monotone && degrees.windows(2).any(|w| w[1].weight.d < w[0].weight.d) {
                    return Err(self.invalid("monotone degrees must have non-decreasing disbelief"));
                }
            }
            WeightMapping::RiskEvidence(degrees) => {
                for d in degrees {
                    let RiskWeight { b, d } = d.weight;
                    let unit = |x: f64| (0.0..=1.0).contains(&x);
                    if !unit(b) || !unit(d) || b + d > 1.0 + TOLERANCE {
                        return Err(self.invalid(format!("risk weight (b={b}, d={d}) needs b, d in [0, 1] and b + d <= 1")));
                    }
                }
            }
        }
        Ok(())
    }

    fn conform(&self, value: &Value) -> Result<(), AttributeError> {
        if self.domain.conforms(value) {
            Ok(())
        } else {
            Err(AttributeError::DomainMismatch {
                attribute: self.id.to_string(),
                expected: self.domain.to_string(),
                found: value.shape(),
            })
        }
    }

    fn expect_kind(&self, expected: CodomainKind) -> Result<(), AttributeError> {
        let found = self.codomain_kind();
        if found == expected {
            Ok(())
        } else {
            Err(AttributeError::WrongCodomainKind { attribute: self.id.to_string(), expected, found })
        }
    }

    /// `w_av ∈ W_tv`.
    pub fn check_membership(&self, value: &Value) -> Result<bool, AttributeError> {
        self.conform(value)?;
        Ok(self.weights.targets().iter().any(|t| t.matches(value)))
    }

    pub fn evaluate_additive(&self, value: &Value) -> Result<AttributeEvaluation, AttributeError> {
        self.expect_kind(CodomainKind::AdditiveReal)?;
        self.conform(value)?;
        let WeightMapping::Additive(degrees) = &self.weights else { unreachable!() };
        let weight = degrees.iter().find(|d| d.target.matches(value)).map(|d| d.weight);
        Ok(AttributeEvaluation {
            attribute_id: self.id.clone(),
            category: self.category,
            present: true,
            matched: weight.is_some(),
            additive_weight: weight,
            opinion: None,
        })
    }

    pub fn evaluate_trust_opinion(&self, value: &Value) -> Result<AttributeEvaluation, AttributeError> {
        self.expect_kind(CodomainKind::TrustUncertainty)?;
        self.conform(value)?;
        let WeightMapping::TrustUncertainty { degrees, unmet } = &self.weights else { unreachable!() };
        let hit = degrees.iter().find(|d| d.target.matches(value));
        let template = hit.map_or(unmet, |d| &d.weight);
        Ok(AttributeEvaluation {
            attribute_id: self.id.clone(),
            category: self.category,
            present: true,
            matched: hit.is_some(),
            additive_weight: None,
            opinion: Some(self.template_opinion(template)?),
        })
    }

    pub fn evaluate_risk_opinion(&self, value: &Value) -> Result<AttributeEvaluation, AttributeError> {
        self.expect_kind(CodomainKind::RiskEvidencePair)?;
        self.conform(value)?;
        let WeightMapping::RiskEvidence(degrees) = &self.weights else { unreachable!() };
        let weight = degrees
            .iter()
            .find(|d| d.target.matches(value))
            .map(|d| d.weight)
            .ok_or_else(|| AttributeError::UnmappedValue { attribute: self.id.to_string() })?;
        let uncertainty = (1.0 - weight.b - weight.d).max(0.0);
        let opinion = Opinion::new(weight.b, weight.d, uncertainty, self.base_rate).map_err(|e| self.opinion_err(e))?;
        Ok(AttributeEvaluation {
            attribute_id: self.id.clone(),
            category: self.category,
            present: true,
            matched: true,
            additive_weight: None,
            opinion: Some(opinion),
        })
    }

    /// Evaluates with whichever operation the codomain kind calls for.
    pub fn evaluate(&self, value: &Value) -> Result<AttributeEvaluation, AttributeError> {
        match self.codomain_kind() {
            CodomainKind::AdditiveReal => self.evaluate_additive(value),
            CodomainKind::TrustUncertainty => self.evaluate_trust_opinion(value),
            CodomainKind::RiskEvidencePair => self.evaluate_risk_opinion(value),
        }
    }

    /// Evaluation when no value is available: no contribution for additive
    /// weights, a vacuous opinion for subjective-logic agents.
    pub fn evaluate_missing(&self) -> AttributeEvaluation {
        let opinion = match self.codomain_kind() {
            CodomainKind::AdditiveReal => None,
            _ => Some(Opinion::vacuous(self.base_rate).expect("base rate validated")),
        };
        AttributeEvaluation {
            attribute_id: self.id.clone(),
            category: self.category,
            present: false,
            matched: false,
            additive_weight: None,
            opinion,
        }
    }

    fn template_opinion(&self, t: &TrustTemplate) -> Result<Opinion, AttributeError> {
        Opinion::new(t.b, t.d, t.u, self.base_rate).map_err(|e| self.opinion_err(e))
    }

    fn opinion_err(&self, e: OpinionError) -> AttributeError {
        self.invalid(e.to_string())
    }
}

/// One agent's evaluation of one attribute.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributeEvaluation {
    pub attribute_id: Arc<str>,
    pub category: Category,
    /// Whether a value was available at all.
    pub present: bool,
    /// `w_av ∈ W_tv`.
    pub matched: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub additive_weight: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub opinion: Option<Opinion>,
}

impl AttributeEvaluation {
    /// Additive contribution; zero when unmet or missing.
    pub fn contribution(&self) -> f64 {
        self.additive_weight.unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn password_def() -> AttributeDefinition {
        AttributeDefinition::new(
            "user.password",
            "Password",
            Category::User,
            ValueDomain::Text,
            WeightMapping::Additive(vec![Degree::new(Target::Exact("1234".into()), 5.0)]),
        )
        .unwrap()
        .with_secret(true)
    }

    fn patch_additive() -> AttributeDefinition {
        AttributeDefinition::new(
            "risk.system_patch_level",
            "System Patch Level",
            Category::Risk,
            ValueDomain::Text,
            WeightMapping::Additive(vec![Degree::new(Target::Exact("outdated".into()), 10.0)]),
        )
        .unwrap()
    }

    fn patch_sl() -> AttributeDefinition {
        AttributeDefinition::new(
            "risk.system_patch_level",
            "System Patch Level",
            Category::Risk,
            ValueDomain::Text,
            WeightMapping::RiskEvidence(vec![
                Degree::new(Target::Exact("outdated".into()), RiskWeight { b: 0.6, d: 0.2 }),
                Degree::new(Target::Exact("up-to-date".into()), RiskWeight { b: 0.0, d: 0.8 }),
            ]),
        )
        .unwrap()
    }

    fn pwauth() -> AttributeDefinition {
        let attempts = |min: f64, max: f64| Target::Tuple(vec![Target::Exact("1234".into()), Target::Range { min, max }]);
        AttributeDefinition::new(
            "user.authentication_factors",
            "PWAuth",
            Category::User,
            ValueDomain::Composite {
                components: vec![ValueDomain::Text, ValueDomain::Integer { min: 0, max: 1000 }],
            },
            WeightMapping::TrustUncertainty {
                degrees: vec![
                    Degree::new(attempts(0.0, 0.0), TrustTemplate { b: 0.7, d: 0.0, u: 0.3 }),
                    Degree::new(attempts(1.0, 2.0), TrustTemplate { b: 0.5, d: 0.25, u: 0.25 }),
                    Degree::new(attempts(3.0, 5.0), TrustTemplate { b: 0.2, d: 0.6, u: 0.2 }),
                ],
                unmet: TrustTemplate { b: 0.0, d: 0.9, u: 0.1 },
            },
        )
        .unwrap()
    }

    #[test]
    fn membership_examples() {
        let pw = password_def();
        assert!(pw.check_membership(&"1234".into()).unwrap());
        assert!(!pw.check_membership(&"0000".into()).unwrap());
        assert!(!patch_additive().check_membership(&"up-to-date".into()).unwrap());
        assert!(matches!(pw.check_membership(&Value::Integer(1234)), Err(AttributeError::DomainMismatch { .. })));
    }

    #[test]
    fn additive_examples() {
        let pw = password_def();
        assert_eq!(pw.evaluate_additive(&"1234".into()).unwrap().additive_weight, Some(5.0));
        let miss = pw.evaluate_additive(&"0000".into()).unwrap();
        assert!(!miss.matched && miss.additive_weight.is_none() && miss.contribution() == 0.0);
        assert_eq!(patch_additive().evaluate_additive(&"outdated".into()).unwrap().additive_weight, Some(10.0));
        assert!(matches!(patch_sl().evaluate_additive(&"outdated".into()), Err(AttributeError::WrongCodomainKind { .. })));
    }

    #[test]
    fn trust_opinion_examples() {
        let def = pwauth();
        let five = def.evaluate_trust_opinion(&Value::from(vec![Value::from("1234"), Value::from(5)])).unwrap();
        assert_eq!(five.opinion.unwrap(), Opinion::new(0.2, 0.6, 0.2, 0.5).unwrap());
        let zero = def.evaluate_trust_opinion(&Value::from(vec![Value::from("1234"), Value::from(0)])).unwrap();
        let (z, f) = (zero.opinion.unwrap(), five.opinion.unwrap());
        assert!(z.disbelief() < f.disbelief() && z.belief() > f.belief());
        assert!(matches!(def.evaluate_trust_opinion(&"1234".into()), Err(AttributeError::DomainMismatch { .. })));
        let wrong = def.evaluate_trust_opinion(&Value::from(vec![Value::from("nope"), Value::from(0)])).unwrap();
        assert!(!wrong.matched);
        assert_eq!(wrong.opinion.unwrap().disbelief(), 0.9);
    }

    #[test]
    fn domain_mismatch_does_not_leak_value() {
        let err = password_def().check_membership(&Value::Tuple(vec!["hunter2".into()].into())).unwrap_err();
        assert!(!err.to_string().contains("hunter2"));
    }

    #[test]
    fn risk_opinion_examples() {
        let def = patch_sl();
        let up = def.evaluate_risk_opinion(&"up-to-date".into()).unwrap().opinion.unwrap();
        assert!(up.approx_eq(&Opinion::new(0.0, 0.8, 0.2, 0.5).unwrap(), 1e-12));
        let out = def.evaluate_risk_opinion(&"outdated".into()).unwrap().opinion.unwrap();
        assert!(out.belief() > up.belief());
        assert!(matches!(def.evaluate_risk_opinion(&"unknown-level".into()), Err(AttributeError::UnmappedValue { .. })));
    }

    #[test]
    fn interval_bounds_are_inclusive() {
        let def = AttributeDefinition::new(
            "user.access_time",
            "Access Time",
            Category::User,
            ValueDomain::Real { min: 0.0, max: 12.0 },
            WeightMapping::Additive(vec![Degree::new(Target::Range { min: 0.0, max: 1.0 }, 4.0)]),
        )
        .unwrap();
        assert!(def.check_membership(&Value::Real(1.0)).unwrap());
        assert!(def.check_membership(&Value::Integer(0)).unwrap());
        assert!(!def.check_membership(&Value::Real(1.0000001)).unwrap());
        assert!(def.check_membership(&Value::Real(13.0)).is_err());
    }

    #[test]
    fn validation_rejects_bad_definitions() {
        let bad_risk = AttributeDefinition::new(
            "risk.x",
            "x",
            Category::Risk,
            ValueDomain::Text,
            WeightMapping::RiskEvidence(vec![Degree::new(Target::Exact("a".into()), RiskWeight { b: 0.7, d: 0.7 })]),
        );
        assert!(matches!(bad_risk, Err(AttributeError::InvalidDefinition { .. })));
        let trust_in_risk = AttributeDefinition::new(
            "risk.y",
            "y",
            Category::Risk,
            ValueDomain::Text,
            WeightMapping::TrustUncertainty {
                degrees: vec![Degree::new(Target::Exact("a".into()), TrustTemplate { b: 0.5, d: 0.0, u: 0.5 })],
                unmet: TrustTemplate { b: 0.0, d: 0.5, u: 0.5 },
            },
        );
        assert!(trust_in_risk.is_err());
        let bad_target = AttributeDefinition::new(
            "user.z",
            "z",
            Category::User,
            ValueDomain::Enumerated { values: vec!["a".into()] },
            WeightMapping::Additive(vec![Degree::new(Target::Exact("b".into()), 1.0)]),
        );
        assert!(bad_target.is_err());
    }

    #[test]
    fn missing_value_is_neutral() {
        let additive = password_def().evaluate_missing();
        assert!(!additive.present && additive.contribution() == 0.0 && additive.opinion.is_none());
        let sl = pwauth().evaluate_missing();
        assert!(sl.opinion.unwrap().is_vacuous());
    }
}
