//! Policy information point: attribute values for decision requests.
//!
//! Values live in a pluggable [`BackingStore`], keyed by subject and
//! attribute id. The [`PipStore`] in front of it answers one query per
//! decision with at most one backing-store batch:
//!
//! * **cold** mode reads every value from the backing store and caches
//!   nothing, so each request pays the full round trip;
//! * **warm** mode serves cached values and loads only the misses (in one
//!   batch), caching them — absent values included — until invalidated.
//!
//! The cache is unbounded; invalidation is explicit (per key or a full flush).

use crate::attribute::{Catalog, Category, ValueSource, Value};
use crate::engine::{Algorithm, AttributeValues};
use crate::policy::Policy;
use crate::request::DecisionRequest;
use async_trait::async_trait;
use dashmap::DashMap;
use rustc_hash::FxBuildHasher;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::atomic::{AtomicU64, AtomicU8, Ordering};
use std::sync::Arc;
use std::time::Duration;
use thiserror::Error;

/// One stored value's address: which subject, which attribute.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AttributeKey {
    pub subject: Arc<str>,
    pub attribute: Arc<str>,
}

impl AttributeKey {
    pub fn new(subject: impl Into<Arc<str>>, attribute: impl Into<Arc<str>>) -> Self {
        Self { subject: subject.into(), attribute: attribute.into() }
    }
}

impl fmt::Display for AttributeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.subject, self.attribute)
    }
}

/// The subject identifier an attribute of `category` is stored under.
///
/// User attributes are keyed by user id, device attributes by device id and
/// risk attributes by the requested resource. Channel attributes normally
/// come from the request; if a catalog sources one from the PIP it is keyed
/// by device id.
pub fn subject_for(category: Category, req: &DecisionRequest) -> &str {
    match category {
        Category::User => &req.user,
        Category::Device | Category::Channel => &req.device,
        Category::Risk => &req.resource,
    }
}

/// The values one decision request needs from the information point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeQuery {
    pub request_id: String,
    pub keys: Vec<AttributeKey>,
}

impl AttributeQuery {
    /// The PIP-sourced attributes of `policy` for `req`. Risk attributes are
    /// included only under a dynamic threshold.
    pub fn for_request(req: &DecisionRequest, policy: &Policy, catalog: &Catalog) -> Self {
        let risk: &[String] = if policy.threshold.is_dynamic() { &policy.risk_attribute_ids } else { &[] };
        // One shared allocation per subject; keys clone the handles.
        let mut subjects: [Option<Arc<str>>; 4] = Default::default();
        let mut subject = |category: Category| -> Arc<str> {
            subjects[category as usize].get_or_insert_with(|| subject_for(category, req).into()).clone()
        };
        let keys = policy
            .trust_attribute_ids
            .iter()
            .chain(risk)
            .filter_map(|id| catalog.get(Algorithm::Additive, id))
            .filter(|def| def.source == ValueSource::Pip)
            .map(|def| AttributeKey { subject: subject(def.category), attribute: def.id.clone() })
            .collect();
        Self { request_id: req.request_id.clone(), keys }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error("backing store unavailable: {0}")]
    Unavailable(String),
}

/// Where attribute values are kept. Implementations answer a whole batch in
/// one round trip, returning one slot per requested key.
#[async_trait]
pub trait BackingStore: Send + Sync {
    async fn fetch_batch(&self, keys: &[AttributeKey]) -> Result<Vec<Option<Value>>, StoreError>;
}

/// In-memory backing store, optionally with a fixed per-batch latency to
/// model a remote database.
#[derive(Debug, Default)]
pub struct MemoryStore {
    values: DashMap<AttributeKey, Value, FxBuildHasher>,
    latency: Option<Duration>,
    batches: AtomicU64,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_seed(seed: &SeedData) -> Self {
        let store = Self::new();
        for (subject, attrs) in &seed.values {
            for (attribute, value) in attrs {
                store.set(AttributeKey::new(subject.as_str(), attribute.as_str()), value.clone());
            }
        }
        store
    }

    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = Some(latency);
        self
    }

    pub fn set(&self, key: AttributeKey, value: Value) {
        self.values.insert(key, value);
    }

    pub fn remove(&self, key: &AttributeKey) -> Option<Value> {
        self.values.remove(key).map(|(_, v)| v)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Batches served so far.
    pub fn batches(&self) -> u64 {
        self.batches.load(Ordering::Relaxed)
    }

    pub fn get_batch(&self, keys: &[AttributeKey]) -> Vec<Option<Value>> {
        self.batches.fetch_add(1, Ordering::Relaxed);
        keys.iter().map(|k| self.values.get(k).map(|v| v.clone())).collect()
    }
}

#[async_trait]
impl BackingStore for MemoryStore {
    async fn fetch_batch(&self, keys: &[AttributeKey]) -> Result<Vec<Option<Value>>, StoreError> {
        if let Some(latency) = self.latency {
            tokio::time::sleep(latency).await;
        }
        Ok(self.get_batch(keys))
    }
}

#[async_trait]
impl<T: BackingStore + ?Sized> BackingStore for Arc<T> {
    async fn fetch_batch(&self, keys: &[AttributeKey]) -> Result<Vec<Option<Value>>, StoreError> {
        (**self).fetch_batch(keys).await
    }
}

#[derive(Debug, Error)]
pub enum SeedError {
    #[error("seed file line {line}, column {column}: {message}")]
    FileInvalid { line: usize, column: usize, message: String },
    #[error("cannot read seed file {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Reproducible scenario data: attribute values per subject plus a list of
/// request fixtures the harness draws from round-robin.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedData {
    /// subject id → attribute id → value.
    #[serde(default)]
    pub values: BTreeMap<String, BTreeMap<String, Value>>,
    #[serde(default, rename = "request")]
    pub requests: Vec<DecisionRequest>,
    /// Hex SHA-256 over the source text.
    #[serde(skip)]
    digest: String,
}

impl SeedData {
    pub fn from_toml_str(src: &str) -> Result<Self, SeedError> {
        let mut seed: SeedData = toml::from_str(src).map_err(|e| {
            let (line, column) = crate::attribute::line_col(src, e.span().map_or(0, |s| s.start));
            SeedError::FileInvalid { line, column, message: e.message().to_owned() }
        })?;
        seed.digest = sha256_hex(src.as_bytes());
        Ok(seed)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SeedError> {
        let path = path.as_ref();
        let src =
            std::fs::read_to_string(path).map_err(|source| SeedError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&src)
    }

    /// Serializes to the seed file format; re-parsing yields the same digest.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("seed data serializes to TOML")
    }

    /// Digest of the seed source, used to check a running service was seeded
    /// with the data a scenario expects.
    pub fn digest(&self) -> String {
        if self.digest.is_empty() {
            sha256_hex(self.to_toml_string().as_bytes())
        } else {
            self.digest.clone()
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheMode {
    Cold,
    #[default]
    Warm,
}

impl CacheMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CacheMode::Cold => "cold",
            CacheMode::Warm => "warm",
        }
    }
}

impl fmt::Display for CacheMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CacheMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "cold" => Ok(CacheMode::Cold),
            "warm" => Ok(CacheMode::Warm),
            other => Err(format!("unknown cache mode `{other}` (expected cold or warm)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PipError {
    #[error(transparent)]
    BackingStoreUnavailable(#[from] StoreError),
    #[error("backing store answered {got} slots for {expected} keys")]
    BatchShape { expected: usize, got: usize },
}

/// Result of one query.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AttributeBatch {
    /// Attribute id → value, for every key that has one.
    pub values: AttributeValues,
    /// Queried attribute ids with no stored value.
    pub absent: Vec<Arc<str>>,
    /// Backing-store batches this query caused (0 or 1).
    pub round_trips: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PipCounters {
    pub round_trips: u64,
    pub hits: u64,
    pub misses: u64,
}

/// The information point in front of a backing store.
pub struct PipStore {
    backing: Arc<dyn BackingStore>,
    cache: DashMap<AttributeKey, Option<Value>, FxBuildHasher>,
    mode: AtomicU8,
    round_trips: AtomicU64,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl fmt::Debug for PipStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PipStore")
            .field("mode", &self.mode())
            .field("cached", &self.cache.len())
            .field("counters", &self.counters())
            .finish()
    }
}

impl PipStore {
    pub fn new(backing: Arc<dyn BackingStore>, mode: CacheMode) -> Self {
        let store = Self {
            backing,
            cache: DashMap::default(),
            mode: AtomicU8::new(0),
            round_trips: AtomicU64::new(0),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        };
        store.set_mode(mode);
        store
    }

    pub fn mode(&self) -> CacheMode {
        match self.mode.load(Ordering::Acquire) {
            0 => CacheMode::Cold,
            _ => CacheMode::Warm,
        }
    }

    /// Switching modes leaves cached entries in place; flush to empty them.
    pub fn set_mode(&self, mode: CacheMode) {
        self.mode.store(matches!(mode, CacheMode::Warm) as u8, Ordering::Release);
    }

    pub fn counters(&self) -> PipCounters {
        PipCounters {
            round_trips: self.round_trips.load(Ordering::Relaxed),
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
        }
    }

    pub fn cached_entries(&self) -> usize {
        self.cache.len()
    }

    /// Drops cached entries for every listed subject × attribute pair.
    /// Unknown keys are ignored.
    pub fn invalidate(&self, subjects: &[&str], attributes: &[&str]) {
        for s in subjects {
            for a in attributes {
                self.cache.remove(&AttributeKey::new(*s, *a));
            }
        }
    }

    pub fn flush(&self) {
        self.cache.clear();
    }

    pub async fn get_attributes(&self, query: &AttributeQuery) -> Result<AttributeBatch, PipError> {
        let mut slots: Vec<Option<Option<Value>>> = vec![None; query.keys.len()];
        let warm = self.mode() == CacheMode::Warm;
        let mut missing = Vec::new();
        for (i, key) in query.keys.iter().enumerate() {
            match warm.then(|| self.cache.get(key)).flatten() {
                Some(entry) => slots[i] = Some(entry.value().clone()),
                None => missing.push(i),
            }
        }
        self.hits.fetch_add((query.keys.len() - missing.len()) as u64, Ordering::Relaxed);
        self.misses.fetch_add(missing.len() as u64, Ordering::Relaxed);

        let mut round_trips = 0;
        if !missing.is_empty() {
            let keys: Vec<AttributeKey> = missing.iter().map(|&i| query.keys[i].clone()).collect();
            self.round_trips.fetch_add(1, Ordering::Relaxed);
            round_trips = 1;
            let loaded = self.backing.fetch_batch(&keys).await?;
            if loaded.len() != keys.len() {
                return Err(PipError::BatchShape { expected: keys.len(), got: loaded.len() });
            }
            for ((i, key), value) in missing.into_iter().zip(keys).zip(loaded) {
                if warm {
                    self.cache.insert(key, value.clone());
                }
                slots[i] = Some(value);
            }
        }

        let mut batch = AttributeBatch { round_trips, ..Default::default() };
        batch.values.reserve(query.keys.len());
        for (key, slot) in query.keys.iter().zip(slots) {
            match slot.flatten() {
                Some(v) => {
                    batch.values.insert(key.attribute.clone(), v);
                }
                None => batch.absent.push(key.attribute.clone()),
            }
        }
        Ok(batch)
    }
}
