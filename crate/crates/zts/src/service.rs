//! The decision point's HTTP routes.
//!
//! | method | path | role |
//! |---|---|---|
//! | POST | `/v1/decision` | any authenticated peer |
//! | GET | `/v1/health`, `/v1/metrics` | any authenticated peer |
//! | GET | `/v1/policies`, `/v1/policies/{id}` | any authenticated peer |
//! | PUT | `/v1/policies` | admin |
//! | DELETE | `/v1/policies/{id}` | admin |
//! | POST | `/v1/admin/pip` | admin |
//! | GET | `/v1/audit/{request_id}` | admin |

use crate::http::{self, Handler, HttpRequest, HttpResponse, Peer, ServerHandle, ServerTransport};
use anyhow::Result;
use hyper::{Method, StatusCode};
use serde::{Deserialize, Serialize};
use std::net::SocketAddr;
use std::sync::Arc;
use zts_core::pdp::ErrorCode;
use zts_core::policy::PolicyError;
use zts_core::{CacheMode, Pdp, Policy};

/// Body of `POST /v1/admin/pip`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipAdmin {
    #[serde(default)]
    pub mode: Option<CacheMode>,
    #[serde(default)]
    pub flush: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipState {
    pub mode: CacheMode,
    pub cached_entries: usize,
}

/// Wraps a [`Pdp`] as an HTTP handler.
#[derive(Debug, Clone)]
pub struct PdpService {
    pdp: Arc<Pdp>,
}

impl PdpService {
    pub fn new(pdp: Arc<Pdp>) -> Self {
        Self { pdp }
    }

    pub fn pdp(&self) -> &Arc<Pdp> {
        &self.pdp
    }

    pub fn handler(&self) -> Handler {
        let this = self.clone();
        Arc::new(move |req, peer| {
            let this = this.clone();
            Box::pin(async move { this.route(req, peer).await })
        })
    }

    pub async fn serve(&self, addr: SocketAddr, transport: ServerTransport) -> Result<ServerHandle> {
        http::serve(addr, transport, self.handler()).await
    }

    async fn route(&self, req: HttpRequest, peer: Peer) -> HttpResponse {
        let path = req.path.as_str();
        let segments: Vec<&str> = path.trim_start_matches('/').split('/').collect();
        match (&req.method, segments.as_slice()) {
            (&Method::POST, ["v1", "decision"]) => {
                let resp = self.pdp.decide_json(&req.body).await;
                let status = if resp.error_code == Some(ErrorCode::MalformedRequest) {
                    StatusCode::BAD_REQUEST
                } else {
                    StatusCode::OK
                };
                http::json(status, &resp)
            }
            (&Method::GET, ["v1", "health"]) => http::json(StatusCode::OK, &self.pdp.health()),
            (&Method::GET, ["v1", "metrics"]) => http::text(StatusCode::OK, self.pdp.metrics_text()),
            (&Method::GET, ["v1", "policies"]) => {
                let list: Vec<Policy> = self.pdp.policies().list().iter().map(|p| (**p).clone()).collect();
                http::json(StatusCode::OK, &list)
            }
            (&Method::GET, ["v1", "policies", id]) => match self.pdp.policies().get(id) {
                Some(p) => http::json(StatusCode::OK, &*p),
                None => http::error(StatusCode::NOT_FOUND, PolicyError::NotFound((*id).into())),
            },
            (&Method::PUT, ["v1", "policies"]) => admin(&peer, || {
                let policy: Policy = match serde_json::from_slice(&req.body) {
                    Ok(p) => p,
                    Err(e) => return http::error(StatusCode::BAD_REQUEST, e),
                };
                match self.pdp.policies().put(policy) {
                    Ok(id) => http::json(StatusCode::CREATED, &serde_json::json!({ "id": id })),
                    Err(e @ PolicyError::DuplicateId(_)) => http::error(StatusCode::CONFLICT, e),
                    Err(e) => http::error(StatusCode::UNPROCESSABLE_ENTITY, e),
                }
            }),
            (&Method::DELETE, ["v1", "policies", id]) => admin(&peer, || match self.pdp.policies().delete(id) {
                Ok(()) => http::json(StatusCode::OK, &serde_json::json!({ "deleted": id })),
                Err(e) => http::error(StatusCode::NOT_FOUND, e),
            }),
            (&Method::POST, ["v1", "admin", "pip"]) => admin(&peer, || {
                let cmd: PipAdmin = match serde_json::from_slice(&req.body) {
                    Ok(c) => c,
                    Err(e) => return http::error(StatusCode::BAD_REQUEST, e),
                };
                let pip = self.pdp.pip();
                if let Some(mode) = cmd.mode {
                    pip.set_mode(mode);
                }
                if cmd.flush {
                    pip.flush();
                }
                http::json(StatusCode::OK, &PipState { mode: pip.mode(), cached_entries: pip.cached_entries() })
            }),
            (&Method::GET, ["v1", "audit", id]) => admin(&peer, || match self.pdp.audit().get(id) {
                Some(record) => http::json(StatusCode::OK, &*record),
                None => http::error(StatusCode::NOT_FOUND, format!("no audit record for `{id}`")),
            }),
            _ => http::error(StatusCode::NOT_FOUND, format!("no route for {} {}", req.method, path)),
        }
    }
}

fn admin(peer: &Peer, f: impl FnOnce() -> HttpResponse) -> HttpResponse {
    if peer.admin {
        f()
    } else {
        http::error(StatusCode::FORBIDDEN, "admin role required")
    }
}
