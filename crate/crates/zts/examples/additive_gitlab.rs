//! The additive engine on the worked example: alice enters the correct
//! password after five failed attempts (+5) while gitlab runs an outdated
//! patch level (risk 10). The dynamic threshold requires 5 > 10, so the
//! request is denied.
//!
//! Run with `cargo run --example additive_gitlab`.

use std::sync::Arc;
use zts::zts_core::{default_catalog, CacheMode, MemoryStore, Pdp, PdpConfig, PipStore, PolicyStore, SeedData};

const SEED: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/data/examples-seed.toml"));
const POLICIES: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/data/examples-policies.toml"));

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = SeedData::from_toml_str(SEED)?;
    let policies = PolicyStore::from_toml_str(Arc::new(default_catalog()?), POLICIES)?;
    let pip = PipStore::new(Arc::new(MemoryStore::from_seed(&seed)), CacheMode::Warm);
    let pdp = Pdp::new(Arc::new(policies), Arc::new(pip), PdpConfig::default());

    let request = seed.requests.iter().find(|r| r.resource == "gitlab").expect("gitlab fixture");
    let (response, decision) = pdp.decide_traced(request).await;
    println!("{}", serde_json::to_string_pretty(&response)?);

    // The trace never exposes the entered password, only whether it matched.
    for step in decision.map(|d| d.trace).unwrap_or_default() {
        println!(
            "{:<32} matched={:<5} weight={:?} running={:?} value={}",
            step.attribute_id,
            step.matched,
            step.weight,
            step.running,
            if step.redacted { "<redacted>".to_owned() } else { format!("{:?}", step.value) }
        );
    }
    Ok(())
}
