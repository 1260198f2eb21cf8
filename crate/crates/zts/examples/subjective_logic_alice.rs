//! The subjective-logic engine on the same attribute values: the password
//! after five failed attempts maps to the opinion (0.2, 0.6, 0.2) with
//! P = 0.3, the outdated patch level to (0.0, 0.8, 0.2) with P = 0.1.
//! Device and channel have no agents in this policy, so they stay vacuous
//! (P = 0.5) and are reported as unevaluated.
//!
//! Run with `cargo run --example subjective_logic_alice`.

use std::sync::Arc;
use zts::zts_core::{default_catalog, CacheMode, MemoryStore, Pdp, PdpConfig, PipStore, PolicyStore, Scores, SeedData};

const SEED: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/data/examples-seed.toml"));
const POLICIES: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/data/examples-policies.toml"));

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = SeedData::from_toml_str(SEED)?;
    let policies = PolicyStore::from_toml_str(Arc::new(default_catalog()?), POLICIES)?;
    let pip = PipStore::new(Arc::new(MemoryStore::from_seed(&seed)), CacheMode::Warm);
    let pdp = Pdp::new(Arc::new(policies), Arc::new(pip), PdpConfig::default());

    let request = seed.requests.iter().find(|r| r.resource == "wiki").expect("wiki fixture");
    let response = pdp.decide(request).await;
    if let Some(Scores::SubjectiveLogic(s)) = &response.scores {
        println!("user    {}  P = {:.3}", s.opinions.user, s.p_user);
        println!("device  {}  P = {:.3}", s.opinions.device, s.p_device);
        println!("channel {}  P = {:.3}", s.opinions.channel, s.p_channel);
        if let (Some(risk), Some(p)) = (s.opinions.risk, s.p_risk) {
            println!("risk    {risk}  P = {p:.3}");
        }
        println!("unevaluated: {:?}", s.unevaluated);
    }
    println!("outcome: {}", response.outcome);
    Ok(())
}
