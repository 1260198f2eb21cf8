//! Defining a deployment-specific catalog. Every attribute carries an
//! additive weight table and an opinion table over the same value domain;
//! policies may only reference attributes of the active catalog.
//!
//! Run with `cargo run --example custom_catalog`.

use std::sync::Arc;
use zts::zts_core::pip::AttributeKey;
use zts::zts_core::{
    Algorithm, CacheMode, Catalog, DecisionRequest, MemoryStore, Pdp, PdpConfig, PipStore, PolicyStore, Value,
};

const CATALOG: &str = r#"
[[attribute]]
id = "user.hardware_token"
name = "Hardware Token"
category = "user"
domain = { kind = "enumerated", values = ["present", "absent"] }
additive = [{ target = "present", weight = 6 }]
opinion = [{ target = "present", b = 0.8, d = 0.0, u = 0.2 }]
unmet = { b = 0.0, d = 0.7, u = 0.3 }

[[attribute]]
id = "device.disk_encrypted"
name = "Disk Encryption"
category = "device"
domain = { kind = "enumerated", values = ["yes", "no"] }
additive = [{ target = "yes", weight = 3 }]
opinion = [{ target = "yes", b = 0.6, d = 0.0, u = 0.4 }]
unmet = { b = 0.0, d = 0.5, u = 0.5 }

[[attribute]]
id = "risk.data_classification"
name = "Data Classification"
category = "risk"
domain = { kind = "enumerated", values = ["public", "internal", "secret"] }
additive = [{ target = "secret", weight = 7 }, { target = "internal", weight = 2 }]
opinion = [
  { target = "secret", b = 0.7, d = 0.1 },
  { target = "internal", b = 0.3, d = 0.4 },
  { target = "public", b = 0.0, d = 0.9 },
]
"#;

const POLICIES: &str = r#"
[[policy]]
id = "vault"
selector = { user = "*", action = "*", resource = "vault" }
algorithm = "additive"
trust_attribute_ids = ["user.hardware_token", "device.disk_encrypted"]
risk_attribute_ids = ["risk.data_classification"]
threshold = "dynamic"
"#;

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let catalog = Arc::new(Catalog::from_toml_str(CATALOG)?);
    for def in catalog.definitions(Algorithm::Additive) {
        println!("{:<26} {:<8} {}", def.id, def.category, def.display_name);
    }

    // A policy naming an attribute outside the catalog is rejected.
    let unknown = POLICIES.replace("device.disk_encrypted", "device.fingerprint");
    if let Err(e) = PolicyStore::from_toml_str(catalog.clone(), &unknown) {
        println!("\nrejected: {e}");
    }

    let store = MemoryStore::new();
    store.set(AttributeKey::new("bob", "user.hardware_token"), "present".into());
    store.set(AttributeKey::new("phone-2", "device.disk_encrypted"), "yes".into());
    store.set(AttributeKey::new("vault", "risk.data_classification"), Value::from("secret"));
    let policies = PolicyStore::from_toml_str(catalog, POLICIES)?;
    let pdp = Pdp::new(
        Arc::new(policies),
        Arc::new(PipStore::new(Arc::new(store), CacheMode::Warm)),
        PdpConfig::default(),
    );
    let request: DecisionRequest = serde_json::from_value(serde_json::json!({
        "request_id": "vault-1",
        "user": "bob",
        "device": "phone-2",
        "channel": { "auth": "mtls", "conf": "aes-256-gcm", "integ": "aead" },
        "resource": "vault",
        "action": "read",
        "context": { "timestamp": "2024-01-15T10:00:00Z", "location": "office" }
    }))?;
    let response = pdp.decide(&request).await;
    println!("\n{}", serde_json::to_string_pretty(&response)?);
    Ok(())
}
