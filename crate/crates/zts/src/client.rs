//! Typed client for the decision point service, as used by an enforcement point.

use crate::http::{self, Connection, Endpoint};
use crate::service::{PipAdmin, PipState};
use anyhow::{anyhow, Result};
use bytes::Bytes;
use hyper::{Method, StatusCode};
use std::collections::BTreeMap;
use zts_core::metrics::parse_metrics;
use zts_core::pdp::Health;
use zts_core::{DecisionRequest, DecisionResponse, Policy};

/// One connection to a decision point; requests are issued one at a time.
pub struct PdpClient {
    conn: Connection,
}

impl PdpClient {
    pub async fn connect(endpoint: &Endpoint) -> Result<Self> {
        Ok(Self { conn: Connection::open(endpoint).await? })
    }

    pub async fn decide(&mut self, req: &DecisionRequest) -> Result<DecisionResponse> {
        self.decide_raw(Bytes::from(serde_json::to_vec(req)?)).await
    }

    /// Sends an arbitrary body; malformed bodies come back as a deny.
    pub async fn decide_raw(&mut self, body: Bytes) -> Result<DecisionResponse> {
        let (status, body) = self.conn.request(Method::POST, "/v1/decision", Some(body)).await?;
        if status != StatusCode::OK && status != StatusCode::BAD_REQUEST {
            return Err(anyhow!("HTTP {status}: {}", String::from_utf8_lossy(&body)));
        }
        Ok(serde_json::from_slice(&body)?)
    }

    pub async fn health(&mut self) -> Result<Health> {
        let (status, body) = self.conn.get("/v1/health").await?;
        http::decode(status, &body)
    }

    pub async fn metrics(&mut self) -> Result<BTreeMap<String, f64>> {
        let (status, body) = self.conn.get("/v1/metrics").await?;
        if !status.is_success() {
            return Err(anyhow!("HTTP {status}"));
        }
        Ok(parse_metrics(&String::from_utf8_lossy(&body)))
    }

    pub async fn list_policies(&mut self) -> Result<Vec<Policy>> {
        let (status, body) = self.conn.get("/v1/policies").await?;
        http::decode(status, &body)
    }

    pub async fn put_policy(&mut self, policy: &Policy) -> Result<()> {
        let body = Bytes::from(serde_json::to_vec(policy)?);
        let (status, body) = self.conn.request(Method::PUT, "/v1/policies", Some(body)).await?;
        http::decode::<serde_json::Value>(status, &body).map(|_| ())
    }

    /// Deletes a policy; `Ok(false)` if it did not exist.
    pub async fn delete_policy(&mut self, id: &str) -> Result<bool> {
        let (status, body) = self.conn.request(Method::DELETE, &format!("/v1/policies/{id}"), None).await?;
        if status == StatusCode::NOT_FOUND {
            return Ok(false);
        }
        http::decode::<serde_json::Value>(status, &body).map(|_| true)
    }

    /// Installs `policy`, replacing any policy with the same id.
    pub async fn replace_policy(&mut self, policy: &Policy) -> Result<()> {
        self.delete_policy(&policy.id).await?;
        self.put_policy(policy).await
    }

    pub async fn pip_admin(&mut self, cmd: &PipAdmin) -> Result<PipState> {
        let (status, body) = self.conn.post_json("/v1/admin/pip", cmd).await?;
        http::decode(status, &body)
    }

    /// The audit record (response plus trace) for a request id.
    pub async fn audit(&mut self, request_id: &str) -> Result<serde_json::Value> {
        let (status, body) = self.conn.get(&format!("/v1/audit/{request_id}")).await?;
        http::decode(status, &body)
    }
}
