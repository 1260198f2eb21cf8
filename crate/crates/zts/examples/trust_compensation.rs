//! Why entity-wise comparison matters. A wrong password paired with a fully
//! trusted device and an encrypted channel: the additive engine sums all
//! trust into one score that outweighs the elevated network risk, while the
//! subjective-logic engine compares each entity to the risk separately and
//! denies because the user is not trusted.
//!
//! Run with `cargo run --example trust_compensation`.

use std::sync::Arc;
use zts::zts_core::pip::AttributeKey;
use zts::zts_core::{
    default_catalog, Algorithm, CacheMode, DecisionRequest, MemoryStore, Pdp, PdpConfig, PipStore, Policy,
    PolicyStore, Scores, Selector, ThresholdMode, Value,
};

const TRUST: [&str; 7] = [
    "user.authentication_factors",
    "device.managed_device",
    "device.authentication_factors",
    "device.fingerprint",
    "channel.authentication",
    "channel.confidentiality",
    "channel.integrity",
];

fn request() -> DecisionRequest {
    serde_json::from_str(include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/data/requests/gitlab.json"))).unwrap()
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let store = MemoryStore::new();
    for (subject, attribute, value) in [
        ("alice", "user.authentication_factors", Value::from(vec![Value::from("guess"), Value::from(0)])),
        ("laptop-7", "device.managed_device", "managed".into()),
        ("laptop-7", "device.authentication_factors", "valid-certificate".into()),
        ("laptop-7", "device.fingerprint", "match".into()),
        ("gitlab", "risk.network_threat_level", "elevated".into()),
    ] {
        store.set(AttributeKey::new(subject, attribute), value);
    }
    let store = Arc::new(store);
    let catalog = Arc::new(default_catalog()?);

    for algorithm in Algorithm::ALL {
        let policy = Policy {
            id: format!("compensation-{algorithm}"),
            priority: 0,
            selector: Selector::new("*", "*", "*"),
            algorithm,
            trust_attribute_ids: TRUST.iter().map(|s| s.to_string()).collect(),
            risk_attribute_ids: vec!["risk.network_threat_level".into()],
            threshold: ThresholdMode::Dynamic,
        };
        let policies = PolicyStore::with_policies(catalog.clone(), [policy])?;
        let pip = PipStore::new(store.clone(), CacheMode::Warm);
        let pdp = Pdp::new(Arc::new(policies), Arc::new(pip), PdpConfig::default());
        let response = pdp.decide(&request()).await;
        match &response.scores {
            Some(Scores::Additive(a)) => {
                println!("additive:         ts = {} vs rl = {:?} -> {}", a.ts_total, a.rl_total, response.outcome)
            }
            Some(Scores::SubjectiveLogic(s)) => println!(
                "subjective logic: p_user = {:.3}, p_device = {:.3}, p_channel = {:.3} vs p_risk = {:.3} -> {}",
                s.p_user,
                s.p_device,
                s.p_channel,
                s.p_risk.unwrap_or(f64::NAN),
                response.outcome
            ),
            None => println!("{algorithm}: {:?}", response.error_code),
        }
    }
    Ok(())
}
