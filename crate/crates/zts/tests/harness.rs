//! Load harness against a local mTLS stack.

mod common;

use common::*;
use std::sync::Arc;
use zts::harness::{run_scenario, run_scenarios, write_reports, HarnessError, LatencyReport, Scenario, ScenarioFile, ThresholdChoice};
use zts::node::{LocalStack, StackOptions};
use zts_core::{Algorithm, CacheMode, MemoryStore, Pdp, PdpConfig, PipStore, SeedData};

fn scenario(name: &str, cache: CacheMode, threshold: ThresholdChoice, algorithm: Algorithm, instances: usize, requests: usize, reps: usize) -> Scenario {
    Scenario {
        name: name.into(),
        cache_mode: cache,
        threshold_mode: threshold,
        algorithm,
        parallel_instances: instances,
        requests_per_instance: requests,
        repetitions: reps,
        static_threshold: None,
        trust_attribute_ids: None,
        risk_attribute_ids: None,
    }
}

#[tokio::test]
async fn every_bench_fixture_decides_without_error() {
    let seed = bench_seed();
    assert_eq!(seed.requests.len(), 16);
    let pip = Arc::new(PipStore::new(Arc::new(MemoryStore::from_seed(&seed)), CacheMode::Warm));
    let policies = Arc::new(empty_policies());
    let pdp = Pdp::new(policies.clone(), pip, PdpConfig::default());
    let mut permits = 0;
    for algorithm in Algorithm::ALL {
        for threshold in [ThresholdChoice::Static, ThresholdChoice::Dynamic] {
            let policy = scenario("x", CacheMode::Warm, threshold, algorithm, 1, 1, 1).bench_policy().unwrap();
            let _ = policies.delete(&policy.id);
            policies.put(policy).unwrap();
            for req in &seed.requests {
                let (resp, decision) = pdp.decide_traced(req).await;
                assert_eq!(resp.error_code, None, "{algorithm} {threshold} {}", req.request_id);
                assert_eq!(decision.unwrap().trace.len(), if threshold == ThresholdChoice::Dynamic { 38 } else { 29 });
                permits += resp.outcome.is_permit() as usize;
            }
        }
    }
    assert!(permits > 0 && permits < 64, "the fixture mix yields both outcomes ({permits}/64 permits)");
}

#[tokio::test]
async fn warm_scenario_counts_samples() {
    let stack = bench_stack().await;
    let s = scenario("warm-1x10", CacheMode::Warm, ThresholdChoice::Static, Algorithm::Additive, 1, 10, 1);
    let r = run_scenario(&s, &target(&stack), &bench_seed()).await.unwrap();
    assert_eq!((r.samples, r.errors), (10, 0));
    assert!(r.p25_us <= r.p50_us && r.p50_us <= r.p75_us && r.median_us == r.p50_us);
    assert_eq!(r.histogram.iter().map(|b| b.count).sum::<u64>(), 10);
    assert_eq!(r.metrics_delta["decisions_total"], 10.0);
    assert_eq!(r.metrics_delta["pip_round_trips"], 0.0, "pre-warmed cache serves every request");
    assert_eq!(r.permits + r.denies, 10);
}

#[tokio::test]
async fn cold_scenarios_cost_one_batch_per_request() {
    let stack = bench_stack().await;
    let seed = bench_seed();
    let s = scenario("cold-2x25", CacheMode::Cold, ThresholdChoice::Dynamic, Algorithm::SubjectiveLogic, 2, 25, 2);
    for _ in 0..2 {
        let r = run_scenario(&s, &target(&stack), &seed).await.unwrap();
        assert_eq!(r.samples, 100);
        assert_eq!(r.repetition_medians_us.len(), 2);
        assert_eq!(r.metrics_delta["decisions_total"], 100.0);
        assert_eq!(r.metrics_delta["pip_round_trips"], 100.0);
        assert_eq!(r.metrics_delta["pip_cache_hits"], 0.0);
    }
}

#[tokio::test]
async fn outcome_mix_is_stable_across_parallelism() {
    let stack = bench_stack().await;
    let seed = bench_seed();
    let one = scenario("p1", CacheMode::Warm, ThresholdChoice::Dynamic, Algorithm::SubjectiveLogic, 1, 64, 1);
    let many = Scenario { name: "p64".into(), parallel_instances: 64, requests_per_instance: 1, ..one.clone() };
    let a = run_scenario(&one, &target(&stack), &seed).await.unwrap();
    let b = run_scenario(&many, &target(&stack), &seed).await.unwrap();
    // 64 requests cycle through the 16 fixtures four times either way.
    assert_eq!((a.permits, a.denies), (b.permits, b.denies));
    assert_eq!(a.errors + b.errors, 0);
}

#[tokio::test]
async fn seed_mismatch_and_unreachable_targets_are_errors() {
    let stack = bench_stack().await;
    let s = scenario("x", CacheMode::Warm, ThresholdChoice::Static, Algorithm::Additive, 1, 1, 1);
    let other = SeedData::from_toml_str("[values.nobody]\n\"user.trust_history\" = 0.1\n").unwrap();
    let err = run_scenario(&s, &target(&stack), &other).await.unwrap_err();
    assert!(matches!(err, HarnessError::SeedMismatch { .. }), "{err}");

    let mut t = target(&stack);
    stack.shutdown();
    tokio::time::sleep(std::time::Duration::from_millis(50)).await;
    t.admin.addr.set_port(1);
    let err = run_scenario(&s, &t, &bench_seed()).await.unwrap_err();
    assert!(matches!(err, HarnessError::TargetUnreachable(_)), "{err}");
}

#[tokio::test]
async fn scenario_files_run_and_write_reports() {
    let file = ScenarioFile::load(data("smoke.toml")).unwrap();
    let seed = file.load_seed().unwrap();
    let stack = LocalStack::start(StackOptions::new(seed.clone(), empty_policies())).await.unwrap();
    let scenarios = file.all();
    let reports = run_scenarios(&scenarios, &target(&stack), &seed, |_| {}).await.unwrap();
    assert_eq!(reports.iter().map(|r| r.samples).collect::<Vec<_>>(), [10, 40, 5]);
    let dir = tempfile::tempdir().unwrap();
    let paths = write_reports(dir.path(), &reports).unwrap();
    assert_eq!(paths.len(), 4);
    let back = LatencyReport::load(&paths[1]).unwrap();
    assert_eq!(back, reports[1]);
    let csv = std::fs::read_to_string(dir.path().join("plot.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);

    let grid = ScenarioFile::load(data("full-grid.toml")).unwrap();
    assert_eq!(grid.all().len(), 2 * 2 * 2 * 8);
    assert_eq!(grid.load_seed().unwrap().digest(), seed.digest());
}
