//! The decision point: resolve the policy, fetch attributes, run the engine.
//!
//! Every failure on the decision route produces a deny carrying an
//! [`ErrorCode`]; nothing on an error path can permit. Transport concerns
//! (TLS, HTTP) live outside this crate; [`Pdp::decide_json`] is the entry
//! point a wire adapter calls with the raw request body.

use crate::attribute::Catalog;
use crate::engine::{Algorithm, Decision, Engines, Outcome, Scores, ThresholdUsed};
use crate::metrics::Metrics;
use crate::pip::{AttributeQuery, CacheMode, PipError, PipStore};
use crate::policy::{PolicyError, PolicyStore};
use crate::request::DecisionRequest;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use rustc_hash::FxHashMap;
use std::collections::VecDeque;
use std::fmt;
use std::sync::atomic::Ordering;
use std::sync::Arc;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    NoPolicy,
    AttrTimeout,
    PipUnavailable,
    EngineError,
    MalformedRequest,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::NoPolicy => "NO_POLICY",
            ErrorCode::AttrTimeout => "ATTR_TIMEOUT",
            ErrorCode::PipUnavailable => "PIP_UNAVAILABLE",
            ErrorCode::EngineError => "ENGINE_ERROR",
            ErrorCode::MalformedRequest => "MALFORMED_REQUEST",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-stage wall-clock time in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Timings {
    pub policy_resolve_us: f64,
    pub attribute_fetch_us: f64,
    pub engine_compute_us: f64,
    pub total_us: f64,
}

/// What the decision point returns to an enforcement point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionResponse {
    pub request_id: String,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<Algorithm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Scores>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<ThresholdUsed>,
    /// Key of the audit record holding the full trace.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_ref: Option<String>,
    pub timings: Timings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_code: Option<ErrorCode>,
}

impl DecisionResponse {
    fn deny(request_id: String, code: ErrorCode) -> Self {
        Self {
            request_id,
            outcome: Outcome::Deny,
            algorithm: None,
            scores: None,
            threshold: None,
            trace_ref: None,
            timings: Timings::default(),
            error_code: Some(code),
        }
    }
}

/// One audited decision: the response plus the evaluation trace.
#[derive(Debug, Clone, Serialize)]
pub struct AuditRecord {
    pub request_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy_id: Option<String>,
    pub response: DecisionResponse,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decision: Option<Decision>,
    /// Human-readable failure reason; never contains attribute values.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// A bounded log of recent decisions keyed by request id. The oldest record
/// is dropped when full; a repeated request id replaces its record.
#[derive(Debug)]
pub struct AuditLog {
    capacity: usize,
    inner: Mutex<(VecDeque<String>, FxHashMap<String, Arc<AuditRecord>>)>,
}

impl AuditLog {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, inner: Mutex::new((VecDeque::new(), FxHashMap::default())) }
    }

    pub fn record(&self, record: AuditRecord) {
        self.insert(Arc::new(record));
    }

    fn insert(&self, record: Arc<AuditRecord>) {
        if self.capacity == 0 {
            return;
        }
        let id = record.request_id.clone();
        // Evicted records are dropped after the lock is released.
        let mut evicted = Vec::new();
        let mut guard = self.inner.lock();
        let (order, map) = &mut *guard;
        if map.insert(id.clone(), record).is_none() {
            order.push_back(id);
            while order.len() > self.capacity {
                if let Some(old) = order.pop_front() {
                    evicted.extend(map.remove(&old));
                }
            }
        }
    }

    pub fn get(&self, request_id: &str) -> Option<Arc<AuditRecord>> {
        self.inner.lock().1.get(request_id).cloned()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
pub struct PdpConfig {
    /// Deadline for the attribute fetch stage.
    pub attribute_timeout: Duration,
    /// Number of decisions kept in the audit log.
    pub audit_capacity: usize,
}

impl Default for PdpConfig {
    fn default() -> Self {
        Self { attribute_timeout: Duration::from_secs(2), audit_capacity: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub policies: usize,
    pub catalog_attributes: usize,
    pub cache_mode: CacheMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_hash: Option<String>,
}

/// The in-process decision point.
pub struct Pdp {
    catalog: Arc<Catalog>,
    policies: Arc<PolicyStore>,
    pip: Arc<PipStore>,
    engines: Engines,
    metrics: Metrics,
    audit: AuditLog,
    config: PdpConfig,
    seed_hash: Option<String>,
}

impl fmt::Debug for Pdp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Pdp")
            .field("policies", &self.policies)
            .field("pip", &self.pip)
            .field("engines", &self.engines)
            .finish_non_exhaustive()
    }
}

fn micros(d: Duration) -> f64 {
    d.as_secs_f64() * 1e6
}

impl Pdp {
    pub fn new(policies: Arc<PolicyStore>, pip: Arc<PipStore>, config: PdpConfig) -> Self {
        Self {
            catalog: policies.catalog().clone(),
            policies,
            pip,
            engines: Engines::all(),
            metrics: Metrics::new(),
            audit: AuditLog::new(config.audit_capacity),
            config,
            seed_hash: None,
        }
    }

    pub fn with_engines(mut self, engines: Engines) -> Self {
        self.engines = engines;
        self
    }

    /// Digest of the seed data the backing store was loaded from.
    pub fn with_seed_hash(mut self, hash: impl Into<String>) -> Self {
        self.seed_hash = Some(hash.into());
        self
    }

    pub fn catalog(&self) -> &Arc<Catalog> {
        &self.catalog
    }

    pub fn policies(&self) -> &Arc<PolicyStore> {
        &self.policies
    }

    pub fn pip(&self) -> &Arc<PipStore> {
        &self.pip
    }

    pub fn audit(&self) -> &AuditLog {
        &self.audit
    }

    pub fn health(&self) -> Health {
        Health {
            status: "ok".into(),
            policies: self.policies.snapshot().len(),
            catalog_attributes: self.catalog.len(),
            cache_mode: self.pip.mode(),
            seed_hash: self.seed_hash.clone(),
        }
    }

    /// Counters as flat `key value` text.
    pub fn metrics_text(&self) -> String {
        let pip = self.pip.counters();
        self.metrics.render(&[
            ("pip_round_trips", pip.round_trips),
            ("pip_cache_hits", pip.hits),
            ("pip_cache_misses", pip.misses),
        ])
    }

    /// Decides a raw JSON request body. Malformed bodies are denied.
    pub async fn decide_json(&self, body: &[u8]) -> DecisionResponse {
        match DecisionRequest::from_json(body) {
            Ok(req) => self.decide(&req).await,
            Err(e) => {
                let request_id = serde_json::from_slice::<serde_json::Value>(body)
                    .ok()
                    .and_then(|v| v.get("request_id")?.as_str().map(str::to_owned))
                    .unwrap_or_default();
                let response = DecisionResponse::deny(request_id, ErrorCode::MalformedRequest);
                self.count(&response);
                if !response.request_id.is_empty() {
                    self.audit.record(AuditRecord {
                        request_id: response.request_id.clone(),
                        policy_id: None,
                        response: response.clone(),
                        decision: None,
                        detail: Some(e.to_string()),
                    });
                }
                response
            }
        }
    }

    pub async fn decide(&self, req: &DecisionRequest) -> DecisionResponse {
        self.decide_recorded(req).await.0
    }

    /// Decides and also returns the full evaluation (absent on error paths).
    pub async fn decide_traced(&self, req: &DecisionRequest) -> (DecisionResponse, Option<Decision>) {
        let (response, record) = self.decide_recorded(req).await;
        (response, record.decision.clone())
    }

    async fn decide_recorded(&self, req: &DecisionRequest) -> (DecisionResponse, Arc<AuditRecord>) {
        let start = Instant::now();
        let mut timings = Timings::default();
        let mut policy_id = None;
        let result = self.run(req, &mut timings, &mut policy_id).await;
        timings.total_us = micros(start.elapsed());

        let (mut response, decision, detail) = match result {
            Ok(decision) => {
                let response = DecisionResponse {
                    request_id: req.request_id.clone(),
                    outcome: decision.outcome,
                    algorithm: Some(decision.algorithm),
                    scores: Some(decision.scores.clone()),
                    threshold: Some(decision.threshold),
                    trace_ref: Some(req.request_id.clone()),
                    timings,
                    error_code: None,
                };
                (response, Some(decision), None)
            }
            Err((code, detail)) => {
                let mut response = DecisionResponse::deny(req.request_id.clone(), code);
                response.timings = timings;
                response.trace_ref = Some(req.request_id.clone());
                (response, None, Some(detail))
            }
        };
        if response.error_code.is_some() {
            response.outcome = Outcome::Deny;
        }

        let stages = &self.metrics.stages;
        stages.policy_resolve.observe(timings.policy_resolve_us);
        stages.attribute_fetch.observe(timings.attribute_fetch_us);
        stages.engine_compute.observe(timings.engine_compute_us);
        stages.total.observe(timings.total_us);
        self.count(&response);
        let record = Arc::new(AuditRecord {
            request_id: req.request_id.clone(),
            policy_id,
            response: response.clone(),
            decision,
            detail,
        });
        self.audit.insert(record.clone());
        (response, record)
    }

    fn count(&self, response: &DecisionResponse) {
        self.metrics.decisions.fetch_add(1, Ordering::Relaxed);
        let counter = if response.outcome.is_permit() { &self.metrics.permits } else { &self.metrics.denies };
        counter.fetch_add(1, Ordering::Relaxed);
        if response.error_code.is_some() {
            self.metrics.errors.fetch_add(1, Ordering::Relaxed);
        }
    }

    async fn run(
        &self,
        req: &DecisionRequest,
        timings: &mut Timings,
        policy_id: &mut Option<String>,
    ) -> Result<Decision, (ErrorCode, String)> {
        req.validate().map_err(|e| (ErrorCode::MalformedRequest, e.to_string()))?;

        let t = Instant::now();
        let resolved = self.policies.resolve(req);
        timings.policy_resolve_us = micros(t.elapsed());
        let policy = match resolved {
            Ok(m) => m.policy,
            Err(e @ PolicyError::NoMatchingPolicy) => return Err((ErrorCode::NoPolicy, e.to_string())),
            Err(e) => return Err((ErrorCode::EngineError, e.to_string())),
        };
        *policy_id = Some(policy.id.clone());

        let t = Instant::now();
        let query = AttributeQuery::for_request(req, &policy, &self.catalog);
        let fetched = tokio::time::timeout(self.config.attribute_timeout, self.pip.get_attributes(&query)).await;
        timings.attribute_fetch_us = micros(t.elapsed());
        let batch = match fetched {
            Err(_) => {
                return Err((
                    ErrorCode::AttrTimeout,
                    format!("attribute fetch exceeded {} ms", self.config.attribute_timeout.as_millis()),
                ))
            }
            Ok(Err(e @ (PipError::BackingStoreUnavailable(_) | PipError::BatchShape { .. }))) => {
                return Err((ErrorCode::PipUnavailable, e.to_string()))
            }
            Ok(Ok(batch)) => batch,
        };

        let t = Instant::now();
        let decision = self.engines.evaluate_request(req, &policy, &self.catalog, &batch.values);
        timings.engine_compute_us = micros(t.elapsed());
        decision.map_err(|e| (ErrorCode::EngineError, e.to_string()))
    }
}
