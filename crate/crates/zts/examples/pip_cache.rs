//! The information point in front of a slow attribute store. Cold mode asks
//! the store on every decision; warm mode caches values (including "no
//! value") until flushed or invalidated.
//!
//! Run with `cargo run --example pip_cache`.

use std::sync::Arc;
use std::time::{Duration, Instant};
use zts::zts_core::pip::AttributeKey;
use zts::zts_core::{default_catalog, CacheMode, MemoryStore, Pdp, PdpConfig, PipStore, PolicyStore, SeedData};

const SEED: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/data/examples-seed.toml"));
const POLICIES: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/data/examples-policies.toml"));

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = SeedData::from_toml_str(SEED)?;
    let store = Arc::new(MemoryStore::from_seed(&seed).with_latency(Duration::from_millis(5)));
    let policies = Arc::new(PolicyStore::from_toml_str(Arc::new(default_catalog()?), POLICIES)?);
    let pip = Arc::new(PipStore::new(store.clone(), CacheMode::Cold));
    let pdp = Pdp::new(policies, pip.clone(), PdpConfig::default());
    let request = &seed.requests[0];

    for mode in [CacheMode::Cold, CacheMode::Warm] {
        pip.set_mode(mode);
        pip.flush();
        let before = pip.counters();
        let start = Instant::now();
        for _ in 0..20 {
            pdp.decide(request).await;
        }
        let after = pip.counters();
        println!(
            "{mode}: 20 decisions in {:>6.1?}, {} store round trips, {} cache hits, {} cached entries",
            start.elapsed(),
            after.round_trips - before.round_trips,
            after.hits - before.hits,
            pip.cached_entries()
        );
    }

    // After a change in the store, warm mode keeps serving the cached value
    // until the entry is invalidated.
    store.set(AttributeKey::new("gitlab", "risk.system_patch_level"), "up-to-date".into());
    println!("stale while cached: {:?}", pdp.decide(request).await.outcome);
    pip.invalidate(&["gitlab"], &["risk.system_patch_level"]);
    println!("after invalidation: {:?}", pdp.decide(request).await.outcome);
    Ok(())
}
