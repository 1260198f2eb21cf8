//! A dynamic threshold tracks the current risk: with the correct password the
//! same request is permitted while the network threat level is normal and
//! denied once it turns to under-attack. A static threshold ignores risk.
//!
//! Run with `cargo run --example dynamic_threshold`.

use std::sync::Arc;
use zts::zts_core::pip::AttributeKey;
use zts::zts_core::{
    default_catalog, Algorithm, CacheMode, DecisionRequest, MemoryStore, Pdp, PdpConfig, PipStore, Policy,
    PolicyStore, Selector, ThresholdMode, Value,
};

fn request() -> DecisionRequest {
    serde_json::from_str(include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/data/requests/gitlab.json"))).unwrap()
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let catalog = Arc::new(default_catalog()?);
    let store = Arc::new(MemoryStore::new());
    store.set(
        AttributeKey::new("alice", "user.authentication_factors"),
        Value::from(vec![Value::from("1234"), Value::from(0)]),
    );
    let thresholds = [
        (Algorithm::Additive, ThresholdMode::Dynamic),
        (Algorithm::Additive, ThresholdMode::Static(4.0)),
        (Algorithm::SubjectiveLogic, ThresholdMode::Dynamic),
        (Algorithm::SubjectiveLogic, ThresholdMode::Static(0.6)),
    ];
    for (algorithm, threshold) in thresholds {
        let policy = Policy {
            id: "threat-aware".into(),
            priority: 0,
            selector: Selector::new("*", "*", "gitlab"),
            algorithm,
            trust_attribute_ids: vec!["user.authentication_factors".into()],
            risk_attribute_ids: vec!["risk.network_threat_level".into()],
            threshold,
        };
        let policies = Arc::new(PolicyStore::with_policies(catalog.clone(), [policy])?);
        // Cold mode so every decision sees the latest threat level.
        let pdp = Pdp::new(policies, Arc::new(PipStore::new(store.clone(), CacheMode::Cold)), PdpConfig::default());
        let mut row = format!("{algorithm:<17} {:<14}", format!("{threshold:?}"));
        for level in ["normal", "elevated", "under-attack"] {
            store.set(AttributeKey::new("gitlab", "risk.network_threat_level"), level.into());
            let r = pdp.decide(&request()).await;
            let used = r.threshold.map(|t| t.value).unwrap_or(f64::NAN);
            row.push_str(&format!("  {level}: {} (threshold {used:.2})", r.outcome));
        }
        println!("{row}");
    }
    Ok(())
}
