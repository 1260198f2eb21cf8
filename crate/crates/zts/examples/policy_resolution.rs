//! Policy resolution: the matching policy with the highest priority wins,
//! then the most specific selector, then the smallest id. Time windows may
//! wrap midnight. Requests matching no policy are denied with NO_POLICY.
//!
//! Run with `cargo run --example policy_resolution`.

use std::sync::Arc;
use zts::zts_core::{default_catalog, DecisionRequest, PolicyStore};

const POLICIES: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/data/examples-policies.toml"));

fn request(user: &str, resource: &str, timestamp: &str) -> DecisionRequest {
    serde_json::from_value(serde_json::json!({
        "request_id": format!("{user}-{resource}-{timestamp}"),
        "user": user,
        "device": "laptop-7",
        "channel": { "auth": "mtls", "conf": "aes-256-gcm", "integ": "aead" },
        "resource": resource,
        "action": "access",
        "context": { "timestamp": timestamp, "location": "ulm" }
    }))
    .unwrap()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let store = PolicyStore::from_toml_str(Arc::new(default_catalog()?), POLICIES)?;
    let cases = [
        ("alice", "gitlab", "2023-05-02T09:30:00Z"),
        ("alice", "gitlab", "2023-05-02T22:15:00Z"),
        ("alice", "gitlab", "2023-05-03T05:59:00Z"),
        ("bob", "gitlab", "2023-05-02T22:15:00Z"),
        ("alice", "wiki", "2023-05-02T22:15:00Z"),
        ("alice", "payroll", "2023-05-02T09:30:00Z"),
    ];
    for (user, resource, ts) in cases {
        match store.resolve(&request(user, resource, ts)) {
            Ok(m) => println!(
                "{user:<6} {resource:<8} {ts}  -> {} (specificity {}, matched {:?})",
                m.policy.id, m.specificity, m.matched_fields
            ),
            Err(e) => println!("{user:<6} {resource:<8} {ts}  -> {e}"),
        }
    }
    Ok(())
}
