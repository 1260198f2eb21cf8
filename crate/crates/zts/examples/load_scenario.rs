//! The load harness against a local stack: warm and cold cache, static and
//! dynamic thresholds, a few parallel enforcement points. Prints per-scenario
//! latency quartiles and the pairwise comparisons.
//!
//! Run with `cargo run --release --example load_scenario`.

use zts::harness::{compare_reports, run_scenarios, Scenario, Target, ThresholdChoice};
use zts::node::{LocalStack, StackOptions};
use zts::zts_core::{default_catalog, Algorithm, CacheMode, PolicyStore, SeedData};

const SEED: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/data/bench-seed.toml"));

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let seed = SeedData::from_toml_str(SEED)?;
    let stack = LocalStack::start(StackOptions::new(seed.clone(), PolicyStore::new(default_catalog()?.into()))).await?;
    let target = Target { pep: stack.endpoint(Some("pep"))?, admin: stack.endpoint(Some("admin"))? };

    let mut scenarios = Vec::new();
    for cache_mode in [CacheMode::Cold, CacheMode::Warm] {
        for threshold_mode in [ThresholdChoice::Static, ThresholdChoice::Dynamic] {
            scenarios.push(Scenario {
                name: format!("demo-{threshold_mode}-{cache_mode}"),
                cache_mode,
                threshold_mode,
                algorithm: Algorithm::SubjectiveLogic,
                parallel_instances: 4,
                requests_per_instance: 200,
                repetitions: 2,
                static_threshold: None,
                trust_attribute_ids: None,
                risk_attribute_ids: None,
            });
        }
    }
    let reports = run_scenarios(&scenarios, &target, &seed, |r| {
        println!(
            "{:<24} p25 {:>7.1} us  median {:>7.1} us  p75 {:>7.1} us  permits {} denies {}",
            r.scenario.name, r.p25_us, r.median_us, r.p75_us, r.permits, r.denies
        )
    })
    .await?;
    println!();
    println!("{}", compare_reports(&reports[0], &reports[1])?);
    println!("{}", compare_reports(&reports[2], &reports[3])?);
    println!("{}", compare_reports(&reports[0], &reports[2])?);
    Ok(())
}
