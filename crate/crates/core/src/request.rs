use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Negotiated protections of the communication channel the request arrived on.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelDescriptor {
    pub auth: String,
    pub conf: String,
    pub integ: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestContext {
    pub timestamp: DateTime<Utc>,
    pub location: String,
}

/// One resource access request as forwarded by an enforcement point.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionRequest {
    pub request_id: String,
    pub user: String,
    pub device: String,
    pub channel: ChannelDescriptor,
    pub resource: String,
    pub action: String,
    pub context: RequestContext,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed decision request: {0}")]
pub struct MalformedRequest(pub String);

impl DecisionRequest {
    /// Parses and validates the JSON wire form. Unknown fields are rejected.
    pub fn from_json(bytes: &[u8]) -> Result<Self, MalformedRequest> {
        let req: Self = serde_json::from_slice(bytes).map_err(|e| MalformedRequest(e.to_string()))?;
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<(), MalformedRequest> {
        let fields = [
            ("request_id", &self.request_id),
            ("user", &self.user),
            ("device", &self.device),
            ("resource", &self.resource),
            ("action", &self.action),
        ];
        match fields.iter().find(|(_, v)| v.trim().is_empty()) {
            Some((name, _)) => Err(MalformedRequest(format!("`{name}` must be non-empty"))),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALICE: &str = r#"{"request_id":"r1","user":"alice","device":"laptop-7",
        "channel":{"auth":"mtls","conf":"aes-256-gcm","integ":"aead"},
        "resource":"gitlab","action":"access",
        "context":{"timestamp":"2023-05-02T09:30:00Z","location":"ulm"}}"#;

    #[test]
    fn parses_wire_form() {
        let req = DecisionRequest::from_json(ALICE.as_bytes()).unwrap();
        assert_eq!(req.user, "alice");
        assert_eq!(req.channel.auth, "mtls");
    }

    #[test]
    fn rejects_unknown_fields_and_bad_timestamps() {
        let extra = ALICE.replace("\"action\"", "\"role\":\"x\",\"action\"");
        assert!(DecisionRequest::from_json(extra.as_bytes()).is_err());
        let bad_ts = ALICE.replace("2023-05-02T09:30:00Z", "yesterday");
        assert!(DecisionRequest::from_json(bad_ts.as_bytes()).is_err());
        let empty = ALICE.replace("\"alice\"", "\"\"");
        assert!(DecisionRequest::from_json(empty.as_bytes()).is_err());
    }
}
