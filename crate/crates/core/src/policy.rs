//! Policy administration: score-based policies and their resolution.
//!
//! A policy selects requests by user, action, resource and an optional UTC
//! time window, and names the algorithm, attribute set and threshold used to
//! decide them. Resolution picks the highest priority match, then the most
//! specific selector (count of non-wildcard fields), then the smallest id.

use crate::attribute::{line_col, Catalog, Category};
use crate::engine::{Algorithm, ThresholdMode};
use crate::request::DecisionRequest;
use chrono::Timelike;
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;
use toml::Spanned;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("policy `{policy}` references unknown attribute `{attribute}`")]
    UnknownAttributeId { policy: String, attribute: String },
    #[error("policy `{policy}` lists {category} attribute `{attribute}` as a {listed} attribute")]
    CategoryMismatch { policy: String, attribute: String, category: Category, listed: &'static str },
    #[error("policy `{0}` already exists")]
    DuplicateId(String),
    #[error("policy `{0}` not found")]
    NotFound(String),
    #[error("no policy matches the request")]
    NoMatchingPolicy,
    #[error("policy `{policy}` is invalid: {reason}")]
    Invalid { policy: String, reason: String },
    #[error("policy file line {line}, column {column}: {message}")]
    FileInvalid { line: usize, column: usize, message: String },
    #[error("cannot read policy file {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// One selector dimension: an exact value or the wildcard `"*"`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum Pattern {
    #[default]
    Any,
    Exact(String),
}

impl From<String> for Pattern {
    fn from(s: String) -> Self {
        if s == "*" {
            Pattern::Any
        } else {
            Pattern::Exact(s)
        }
    }
}

impl From<Pattern> for String {
    fn from(p: Pattern) -> Self {
        match p {
            Pattern::Any => "*".into(),
            Pattern::Exact(s) => s,
        }
    }
}

impl From<&str> for Pattern {
    fn from(s: &str) -> Self {
        Pattern::from(s.to_owned())
    }
}

impl Pattern {
    pub fn matches(&self, value: &str) -> bool {
        match self {
            Pattern::Any => true,
            Pattern::Exact(s) => s == value,
        }
    }

    pub fn is_wildcard(&self) -> bool {
        matches!(self, Pattern::Any)
    }
}

/// A window of UTC hours: `start` inclusive, `end` exclusive. A window with
/// `start > end` wraps past midnight (e.g. 22 to 6).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeWindow {
    pub start_hour: u32,
    pub end_hour: u32,
}

impl TimeWindow {
    pub fn contains(&self, hour: u32) -> bool {
        if self.start_hour < self.end_hour {
            (self.start_hour..self.end_hour).contains(&hour)
        } else {
            hour >= self.start_hour || hour < self.end_hour
        }
    }

    fn validate(&self) -> Result<(), String> {
        if self.start_hour > 23 || self.end_hour > 24 {
            return Err(format!("time window {}..{} outside 0..24", self.start_hour, self.end_hour));
        }
        if self.start_hour == self.end_hour {
            return Err("time window is empty".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Selector {
    #[serde(default)]
    pub user: Pattern,
    #[serde(default)]
    pub action: Pattern,
    #[serde(default)]
    pub resource: Pattern,
    /// Absent means any time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_window: Option<TimeWindow>,
}

impl Selector {
    pub fn new(user: impl Into<Pattern>, action: impl Into<Pattern>, resource: impl Into<Pattern>) -> Self {
        Self { user: user.into(), action: action.into(), resource: resource.into(), time_window: None }
    }

    pub fn with_time_window(mut self, start_hour: u32, end_hour: u32) -> Self {
        self.time_window = Some(TimeWindow { start_hour, end_hour });
        self
    }

    pub fn specificity(&self) -> u8 {
        [self.user.is_wildcard(), self.action.is_wildcard(), self.resource.is_wildcard(), self.time_window.is_none()]
            .iter()
            .filter(|w| !**w)
            .count() as u8
    }

    /// The non-wildcard fields that matched, or `None` if any field fails.
    pub fn match_fields(&self, req: &DecisionRequest) -> Option<Vec<&'static str>> {
        let mut fields = Vec::with_capacity(4);
        for (name, pattern, value) in [
            ("user", &self.user, req.user.as_str()),
            ("action", &self.action, req.action.as_str()),
            ("resource", &self.resource, req.resource.as_str()),
        ] {
            if !pattern.matches(value) {
                return None;
            }
            if !pattern.is_wildcard() {
                fields.push(name);
            }
        }
        if let Some(w) = &self.time_window {
            if !w.contains(req.context.timestamp.hour()) {
                return None;
            }
            fields.push("time_window");
        }
        Some(fields)
    }
}

/// Which algorithm, attributes and threshold decide the requests a selector matches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Policy {
    pub id: String,
    #[serde(default)]
    pub priority: i64,
    #[serde(default)]
    pub selector: Selector,
    pub algorithm: Algorithm,
    pub trust_attribute_ids: Vec<String>,
    /// Only evaluated under a dynamic threshold.
    #[serde(default)]
    pub risk_attribute_ids: Vec<String>,
    pub threshold: ThresholdMode,
}

impl Policy {
    /// Checks the policy against the active catalog.
    pub fn validate(&self, catalog: &Catalog) -> Result<(), PolicyError> {
        let invalid = |reason: String| PolicyError::Invalid { policy: self.id.clone(), reason };
        if self.id.trim().is_empty() {
            return Err(invalid("empty id".into()));
        }
        if self.trust_attribute_ids.is_empty() {
            return Err(invalid("no trust attributes".into()));
        }
        if let Some(w) = &self.selector.time_window {
            w.validate().map_err(invalid)?;
        }
        match self.threshold {
            ThresholdMode::Static(v) if !v.is_finite() => {
                return Err(invalid(format!("static threshold {v} is not finite")));
            }
            ThresholdMode::Static(v) if self.algorithm == Algorithm::SubjectiveLogic && !(0.0..=1.0).contains(&v) => {
                return Err(invalid(format!("probability threshold {v} outside [0, 1]")));
            }
            ThresholdMode::Dynamic if self.risk_attribute_ids.is_empty() => {
                return Err(invalid("a dynamic threshold needs risk attributes".into()));
            }
            _ => {}
        }
        let mut seen = HashSet::new();
        for (list, want_trust, listed) in
            [(&self.trust_attribute_ids, true, "trust"), (&self.risk_attribute_ids, false, "risk")]
        {
            for id in list {
                let def = catalog.get(self.algorithm, id).ok_or_else(|| PolicyError::UnknownAttributeId {
                    policy: self.id.clone(),
                    attribute: id.clone(),
                })?;
                if def.category.is_trust() != want_trust {
                    return Err(PolicyError::CategoryMismatch {
                        policy: self.id.clone(),
                        attribute: id.clone(),
                        category: def.category,
                        listed,
                    });
                }
                if !seen.insert(id.as_str()) {
                    return Err(invalid(format!("attribute `{id}` listed twice")));
                }
            }
        }
        Ok(())
    }
}

/// Outcome of resolving a request against the store.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyMatch {
    pub policy: Arc<Policy>,
    pub matched_fields: Vec<&'static str>,
    pub specificity: u8,
}

/// An immutable view of all stored policies.
#[derive(Debug, Clone, Default)]
pub struct PolicySnapshot {
    policies: BTreeMap<String, Arc<Policy>>,
}

impl PolicySnapshot {
    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Arc<Policy>> {
        self.policies.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<Policy>> {
        self.policies.values()
    }

    pub fn resolve(&self, req: &DecisionRequest) -> Result<PolicyMatch, PolicyError> {
        let mut best: Option<PolicyMatch> = None;
        // Ids iterate in ascending order, so keeping the first of equal rank
        // implements the lexicographic tiebreak.
        for policy in self.policies.values() {
            let Some(matched_fields) = policy.selector.match_fields(req) else { continue };
            let specificity = policy.selector.specificity();
            let better = best.as_ref().is_none_or(|b| {
                (policy.priority, specificity) > (b.policy.priority, b.specificity)
            });
            if better {
                best = Some(PolicyMatch { policy: policy.clone(), matched_fields, specificity });
            }
        }
        best.ok_or(PolicyError::NoMatchingPolicy)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicyFile {
    #[serde(default)]
    policy: Vec<Spanned<Policy>>,
}

/// Parses a policy file, validating every entry against `catalog`.
pub fn parse_policy_file(src: &str, catalog: &Catalog) -> Result<Vec<Policy>, PolicyError> {
    let invalid_at = |offset: usize, message: String| {
        let (line, column) = line_col(src, offset);
        PolicyError::FileInvalid { line, column, message }
    };
    let file: PolicyFile = toml::from_str(src).map_err(|e| invalid_at(e.span().map_or(0, |s| s.start), e.message().to_owned()))?;
    let mut ids = HashSet::new();
    let mut out = Vec::with_capacity(file.policy.len());
    for entry in file.policy {
        let start = entry.span().start;
        let policy = entry.into_inner();
        policy.validate(catalog).map_err(|e| invalid_at(start, e.to_string()))?;
        if !ids.insert(policy.id.clone()) {
            return Err(invalid_at(start, format!("duplicate policy id `{}`", policy.id)));
        }
        out.push(policy);
    }
    Ok(out)
}

/// Serializes policies in the policy file format.
pub fn to_policy_file(policies: &[Policy]) -> String {
    #[derive(Serialize)]
    struct Out<'a> {
        policy: &'a [Policy],
    }
    toml::to_string(&Out { policy: policies }).expect("policies serialize to TOML")
}

/// The policy store. Readers take a snapshot and never observe a partial
/// update; writers are serialized and publish a new snapshot atomically.
pub struct PolicyStore {
    catalog: Arc<Catalog>,
    current: RwLock<Arc<PolicySnapshot>>,
    writer: Mutex<()>,
}

impl fmt::Debug for PolicyStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PolicyStore").field("policies", &self.snapshot().len()).finish()
    }
}

impl PolicyStore {
    pub fn new(catalog: Arc<Catalog>) -> Self {
        Self { catalog, current: RwLock::new(Arc::default()), writer: Mutex::new(()) }
    }

    pub fn with_policies(catalog: Arc<Catalog>, policies: impl IntoIterator<Item = Policy>) -> Result<Self, PolicyError> {
        let store = Self::new(catalog);
        for p in policies {
            store.put(p)?;
        }
        Ok(store)
    }

    pub fn from_toml_str(catalog: Arc<Catalog>, src: &str) -> Result<Self, PolicyError> {
        let policies = parse_policy_file(src, &catalog)?;
        Self::with_policies(catalog, policies)
    }

    pub fn load(catalog: Arc<Catalog>, path: impl AsRef<Path>) -> Result<Self, PolicyError> {
        let path = path.as_ref();
        let src =
            std::fs::read_to_string(path).map_err(|source| PolicyError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(catalog, &src)
    }

    pub fn catalog(&self) -> &Arc<Catalog> {
        &self.catalog
    }

    pub fn snapshot(&self) -> Arc<PolicySnapshot> {
        self.current.read().clone()
    }

    fn update<T>(&self, f: impl FnOnce(&mut PolicySnapshot) -> Result<T, PolicyError>) -> Result<T, PolicyError> {
        let _guard = self.writer.lock();
        let mut next = (*self.snapshot()).clone();
        let out = f(&mut next)?;
        *self.current.write() = Arc::new(next);
        Ok(out)
    }

    /// Stores a new policy; its id must not exist yet.
    pub fn put(&self, policy: Policy) -> Result<String, PolicyError> {
        policy.validate(&self.catalog)?;
        self.update(|snap| {
            if snap.policies.contains_key(&policy.id) {
                return Err(PolicyError::DuplicateId(policy.id.clone()));
            }
            let id = policy.id.clone();
            snap.policies.insert(id.clone(), Arc::new(policy));
            Ok(id)
        })
    }

    pub fn delete(&self, id: &str) -> Result<(), PolicyError> {
        self.update(|snap| snap.policies.remove(id).map(|_| ()).ok_or_else(|| PolicyError::NotFound(id.to_owned())))
    }

    pub fn get(&self, id: &str) -> Option<Arc<Policy>> {
        self.snapshot().get(id).cloned()
    }

    pub fn list(&self) -> Vec<Arc<Policy>> {
        self.snapshot().iter().cloned().collect()
    }

    pub fn resolve(&self, req: &DecisionRequest) -> Result<PolicyMatch, PolicyError> {
        self.snapshot().resolve(req)
    }
}
