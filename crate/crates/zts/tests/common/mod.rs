#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;
use zts::harness::Target;
use zts::node::{LocalStack, StackOptions};
use zts_core::{default_catalog, PolicyStore, SeedData};

pub fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(rel)
}

pub fn examples_seed() -> SeedData {
    SeedData::load(data("examples-seed.toml")).unwrap()
}

pub fn bench_seed() -> SeedData {
    SeedData::load(data("bench-seed.toml")).unwrap()
}

pub fn example_policies() -> PolicyStore {
    PolicyStore::load(Arc::new(default_catalog().unwrap()), data("examples-policies.toml")).unwrap()
}

pub fn empty_policies() -> PolicyStore {
    PolicyStore::new(Arc::new(default_catalog().unwrap()))
}

pub async fn examples_stack() -> LocalStack {
    LocalStack::start(StackOptions::new(examples_seed(), example_policies())).await.unwrap()
}

pub async fn bench_stack() -> LocalStack {
    LocalStack::start(StackOptions::new(bench_seed(), empty_policies())).await.unwrap()
}

pub fn target(stack: &LocalStack) -> Target {
    Target { pep: stack.endpoint(Some("pep")).unwrap(), admin: stack.endpoint(Some("admin")).unwrap() }
}
