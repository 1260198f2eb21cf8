//! Network-attached attribute store: a service exposing a [`MemoryStore`]
//! over mutual TLS, and the [`RemoteStore`] client the decision point uses
//! as its backing store.

use crate::http::{self, Connection, Endpoint, Handler, HttpRequest, Peer, ServerHandle, ServerTransport};
use anyhow::Result;
use async_trait::async_trait;
use hyper::{Method, StatusCode};
use serde::{Deserialize, Serialize};
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use zts_core::attribute::Value;
use zts_core::pip::{AttributeKey, BackingStore, MemoryStore, StoreError};
use zts_core::SeedData;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchRequest {
    pub keys: Vec<AttributeKey>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchResponse {
    /// One slot per requested key, `null` when absent.
    pub values: Vec<Option<Value>>,
}

/// One write; a `null` value deletes the entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttributeWrite {
    pub subject: String,
    pub attribute: String,
    #[serde(default)]
    pub value: Option<Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WriteRequest {
    pub entries: Vec<AttributeWrite>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreHealth {
    pub status: String,
    pub entries: usize,
    pub batches_served: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_hash: Option<String>,
}

/// State behind the attribute store service.
pub struct StoreService {
    store: Arc<MemoryStore>,
    seed_hash: Option<String>,
}

impl StoreService {
    pub fn new(store: Arc<MemoryStore>, seed_hash: Option<String>) -> Self {
        Self { store, seed_hash }
    }

    pub fn from_seed(seed: &SeedData) -> Self {
        Self::new(Arc::new(MemoryStore::from_seed(seed)), Some(seed.digest()))
    }

    pub fn store(&self) -> &Arc<MemoryStore> {
        &self.store
    }

    pub fn health(&self) -> StoreHealth {
        StoreHealth {
            status: "ok".into(),
            entries: self.store.len(),
            batches_served: self.store.batches(),
            seed_hash: self.seed_hash.clone(),
        }
    }

    pub fn handler(self: Arc<Self>) -> Handler {
        Arc::new(move |req, peer| {
            let this = self.clone();
            Box::pin(async move { this.route(req, peer).await })
        })
    }

    async fn route(&self, req: HttpRequest, peer: Peer) -> http::HttpResponse {
        match (&req.method, req.path.as_str()) {
            (&Method::POST, "/v1/attributes/batch") => match serde_json::from_slice::<BatchRequest>(&req.body) {
                Ok(batch) => match self.store.fetch_batch(&batch.keys).await {
                    Ok(values) => http::json(StatusCode::OK, &BatchResponse { values }),
                    Err(e) => http::error(StatusCode::SERVICE_UNAVAILABLE, e),
                },
                Err(e) => http::error(StatusCode::BAD_REQUEST, e),
            },
            (&Method::PUT, "/v1/attributes") => {
                if !peer.admin {
                    return http::error(StatusCode::FORBIDDEN, "admin role required");
                }
                match serde_json::from_slice::<WriteRequest>(&req.body) {
                    Ok(write) => {
                        let n = write.entries.len();
                        for e in write.entries {
                            let key = AttributeKey::new(e.subject, e.attribute);
                            match e.value {
                                Some(v) => self.store.set(key, v),
                                None => {
                                    self.store.remove(&key);
                                }
                            }
                        }
                        http::json(StatusCode::OK, &serde_json::json!({ "written": n }))
                    }
                    Err(e) => http::error(StatusCode::BAD_REQUEST, e),
                }
            }
            (&Method::GET, "/v1/health") => http::json(StatusCode::OK, &self.health()),
            _ => http::error(StatusCode::NOT_FOUND, format!("no route for {} {}", req.method, req.path)),
        }
    }

    pub async fn serve(self: Arc<Self>, addr: SocketAddr, transport: ServerTransport) -> Result<ServerHandle> {
        http::serve(addr, transport, self.handler()).await
    }
}

/// Backing store reached over the network. Keeps a pool of idle
/// keep-alive connections; each batch uses one connection exclusively.
pub struct RemoteStore {
    endpoint: Endpoint,
    idle: Mutex<Vec<Connection>>,
}

impl std::fmt::Debug for RemoteStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteStore").field("endpoint", &self.endpoint).finish_non_exhaustive()
    }
}

impl RemoteStore {
    pub fn new(endpoint: Endpoint) -> Self {
        Self { endpoint, idle: Mutex::new(Vec::new()) }
    }

    async fn checkout(&self) -> Result<Connection> {
        loop {
            let conn = self.idle.lock().expect("pool lock").pop();
            match conn {
                Some(c) if !c.is_closed() => return Ok(c),
                Some(_) => continue,
                None => return Connection::open(&self.endpoint).await,
            }
        }
    }

    fn checkin(&self, conn: Connection) {
        self.idle.lock().expect("pool lock").push(conn);
    }

    async fn call(&self, method: Method, path: &str, body: Option<bytes::Bytes>) -> Result<(StatusCode, bytes::Bytes)> {
        let mut conn = self.checkout().await?;
        let result = conn.request(method, path, body).await;
        if result.is_ok() {
            self.checkin(conn);
        }
        result
    }

    pub async fn health(&self) -> Result<StoreHealth> {
        let (status, body) = self.call(Method::GET, "/v1/health", None).await?;
        http::decode(status, &body)
    }

    /// Writes values (admin identity required).
    pub async fn write(&self, entries: Vec<AttributeWrite>) -> Result<()> {
        let body = serde_json::to_vec(&WriteRequest { entries })?;
        let (status, body) = self.call(Method::PUT, "/v1/attributes", Some(body.into())).await?;
        http::decode::<serde_json::Value>(status, &body).map(|_| ())
    }
}

#[async_trait]
impl BackingStore for RemoteStore {
    async fn fetch_batch(&self, keys: &[AttributeKey]) -> Result<Vec<Option<Value>>, StoreError> {
        let unavailable = |e: anyhow::Error| StoreError::Unavailable(format!("{e:#}"));
        let body = serde_json::to_vec(&BatchRequest { keys: keys.to_vec() }).map_err(|e| unavailable(e.into()))?;
        let (status, body) = self.call(Method::POST, "/v1/attributes/batch", Some(body.into())).await.map_err(unavailable)?;
        // The body may carry attribute values; error messages report the status only.
        if !status.is_success() {
            return Err(StoreError::Unavailable(format!("attribute store answered HTTP {status}")));
        }
        let resp: BatchResponse = serde_json::from_slice(&body)
            .map_err(|_| StoreError::Unavailable("attribute store sent an undecodable batch".into()))?;
        Ok(resp.values)
    }
}
