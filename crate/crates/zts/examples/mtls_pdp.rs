//! The decision point as a network service: a generated development PKI,
//! the attribute store as a separate mutually authenticated service, and an
//! enforcement point client. Clients without a certificate signed by the
//! deployment CA are refused during the handshake.
//!
//! Run with `cargo run --example mtls_pdp`.

use std::sync::Arc;
use zts::client::PdpClient;
use zts::node::{LocalStack, StackOptions};
use zts::zts_core::{default_catalog, PolicyStore, SeedData};

const SEED: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/data/examples-seed.toml"));
const POLICIES: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/data/examples-policies.toml"));

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let seed = SeedData::from_toml_str(SEED)?;
    let policies = PolicyStore::from_toml_str(Arc::new(default_catalog()?), POLICIES)?;
    let stack = LocalStack::start(StackOptions::new(seed.clone(), policies)).await?;
    println!("decision point on https://{}", stack.pdp_addr);

    let mut pep = PdpClient::connect(&stack.endpoint(Some("pep"))?).await?;
    println!("health: {:?}", pep.health().await?);
    for request in &seed.requests {
        let r = pep.decide(request).await?;
        println!("{} -> {} via {:?} in {:.0} us", r.request_id, r.outcome, r.algorithm, r.timings.total_us);
    }

    // Administrative routes need the admin identity.
    let mut admin = PdpClient::connect(&stack.endpoint(Some("admin"))?).await?;
    let audit = admin.audit(&seed.requests[0].request_id).await?;
    println!("audit of {}: policy {}", seed.requests[0].request_id, audit["policy_id"]);
    match pep.audit(&seed.requests[0].request_id).await {
        Ok(_) => println!("unexpected: pep read the audit log"),
        Err(e) => println!("pep reading the audit log: {e:#}"),
    }

    let anonymous = async { PdpClient::connect(&stack.endpoint(None)?).await?.health().await };
    match anonymous.await {
        Ok(_) => println!("unexpected: anonymous client accepted"),
        Err(e) => println!("anonymous client: {e:#}"),
    }
    Ok(())
}
