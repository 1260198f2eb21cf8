//! Enforcement-point load generator: drives a decision point with parallel
//! closed-loop clients and summarizes client-side latency.
//!
//! Each scenario repetition installs a benchmark policy for the scenario's
//! algorithm and threshold mode, sets the target's cache mode (flushing for
//! cold runs, pre-warming once for warm runs), then starts
//! `parallel_instances` clients that each send `requests_per_instance`
//! requests one at a time. Latency spans request send to response receipt.

use crate::client::PdpClient;
use crate::http::Endpoint;
use crate::service::PipAdmin;
use bytes::Bytes;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;
use zts_core::engine::ThresholdMode;
use zts_core::metrics::LATENCY_BUCKETS_US;
use zts_core::policy::Selector;
use zts_core::{default_catalog, Algorithm, CacheMode, DecisionRequest, Policy, SeedData};

/// Id of the policy the harness installs on the target.
pub const BENCH_POLICY_ID: &str = "zts-bench";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("target unreachable: {0}")]
    TargetUnreachable(String),
    #[error("seed mismatch: scenario expects {expected}, target reports {}", actual.as_deref().unwrap_or("no seed"))]
    SeedMismatch { expected: String, actual: Option<String> },
    #[error("incomparable scenarios: {0}")]
    IncomparableScenarios(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("target rejected an administrative request: {0}")]
    Admin(String),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdChoice {
    Static,
    Dynamic,
}

impl fmt::Display for ThresholdChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ThresholdChoice::Static => "static",
            ThresholdChoice::Dynamic => "dynamic",
        })
    }
}

/// Default static thresholds when a scenario does not set one.
pub const DEFAULT_STATIC_ADDITIVE: f64 = 10.0;
pub const DEFAULT_STATIC_SL: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub cache_mode: CacheMode,
    pub threshold_mode: ThresholdChoice,
    pub algorithm: Algorithm,
    pub parallel_instances: usize,
    pub requests_per_instance: usize,
    pub repetitions: usize,
    /// Threshold for `threshold_mode = "static"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub static_threshold: Option<f64>,
    /// Trust attributes of the benchmark policy; the full catalog when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trust_attribute_ids: Option<Vec<String>>,
    /// Risk attributes of the benchmark policy; the full catalog when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk_attribute_ids: Option<Vec<String>>,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::InvalidScenario(format!("`{}`: {m}", self.name)));
        if self.name.trim().is_empty() {
            return Err(HarnessError::InvalidScenario("empty scenario name".into()));
        }
        if self.parallel_instances == 0 {
            return bad("parallel_instances must be at least 1");
        }
        if self.requests_per_instance == 0 || self.repetitions == 0 {
            return bad("requests_per_instance and repetitions must be at least 1");
        }
        if self.static_threshold.is_some() && self.threshold_mode == ThresholdChoice::Dynamic {
            return bad("static_threshold is only meaningful with threshold_mode = \"static\"");
        }
        Ok(())
    }

    pub fn threshold(&self) -> ThresholdMode {
        match self.threshold_mode {
            ThresholdChoice::Dynamic => ThresholdMode::Dynamic,
            ThresholdChoice::Static => ThresholdMode::Static(self.static_threshold.unwrap_or(match self.algorithm {
                Algorithm::Additive => DEFAULT_STATIC_ADDITIVE,
                Algorithm::SubjectiveLogic => DEFAULT_STATIC_SL,
            })),
        }
    }

    /// The policy installed on the target: matches every request and
    /// outranks all other policies.
    pub fn bench_policy(&self) -> Result<Policy, HarnessError> {
        let catalog = default_catalog().map_err(|e| HarnessError::InvalidScenario(e.to_string()))?;
        Ok(Policy {
            id: BENCH_POLICY_ID.into(),
            priority: i64::MAX,
            selector: Selector::new("*", "*", "*"),
            algorithm: self.algorithm,
            trust_attribute_ids: self.trust_attribute_ids.clone().unwrap_or_else(|| catalog.trust_ids()),
            risk_attribute_ids: self.risk_attribute_ids.clone().unwrap_or_else(|| catalog.risk_ids()),
            threshold: self.threshold(),
        })
    }

    pub fn total_requests(&self) -> usize {
        self.parallel_instances * self.requests_per_instance * self.repetitions
    }

    /// True when `self` and `other` differ at most in threshold mode.
    fn pairs_with(&self, other: &Scenario) -> bool {
        self.cache_mode == other.cache_mode
            && self.algorithm == other.algorithm
            && self.parallel_instances == other.parallel_instances
            && self.requests_per_instance == other.requests_per_instance
            && self.repetitions == other.repetitions
    }
}

/// Cartesian product of scenario axes; names are
/// `{prefix}-{algorithm}-{threshold}-{cache}-{instances}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default = "default_prefix")]
    pub name_prefix: String,
    pub algorithms: Vec<Algorithm>,
    pub threshold_modes: Vec<ThresholdChoice>,
    pub cache_modes: Vec<CacheMode>,
    pub parallel_instances: Vec<usize>,
    pub requests_per_instance: usize,
    pub repetitions: usize,
}

fn default_prefix() -> String {
    "grid".into()
}

impl Grid {
    pub fn expand(&self) -> Vec<Scenario> {
        let mut out = Vec::new();
        for &algorithm in &self.algorithms {
            for &cache_mode in &self.cache_modes {
                for &instances in &self.parallel_instances {
                    for &threshold_mode in &self.threshold_modes {
                        out.push(Scenario {
                            name: format!("{}-{}-{}-{}-{}", self.name_prefix, algorithm, threshold_mode, cache_mode, instances),
                            cache_mode,
                            threshold_mode,
                            algorithm,
                            parallel_instances: instances,
                            requests_per_instance: self.requests_per_instance,
                            repetitions: self.repetitions,
                            static_threshold: None,
                            trust_attribute_ids: None,
                            risk_attribute_ids: None,
                        });
                    }
                }
            }
        }
        out
    }
}

/// A scenario file: the seed the target must be loaded with, explicit
/// scenarios and/or a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    /// Seed file path, relative to the scenario file.
    pub seed: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
    #[serde(default, rename = "scenario")]
    pub scenarios: Vec<Scenario>,
}

impl ScenarioFile {
    /// Parses a scenario file; the seed path is resolved against `base`.
    pub fn from_toml_str(src: &str, base: &Path) -> Result<Self, HarnessError> {
        let mut file: Self = toml::from_str(src).map_err(|e| HarnessError::InvalidScenario(e.to_string()))?;
        if file.seed.is_relative() {
            file.seed = base.join(&file.seed);
        }
        for s in file.all() {
            s.validate()?;
        }
        if file.all().is_empty() {
            return Err(HarnessError::InvalidScenario("file defines no scenarios".into()));
        }
        Ok(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let src = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("reading {}: {e}", path.display())))?;
        Self::from_toml_str(&src, path.parent().unwrap_or(Path::new(".")))
    }

    /// Explicit scenarios followed by the expanded grid.
    pub fn all(&self) -> Vec<Scenario> {
        let mut out = self.scenarios.clone();
        if let Some(g) = &self.grid {
            out.extend(g.expand());
        }
        out
    }

    pub fn load_seed(&self) -> Result<SeedData, HarnessError> {
        SeedData::load(&self.seed).map_err(|e| HarnessError::Io(e.to_string()))
    }
}

/// How the harness reaches the target: enforcement-point requests use
/// `pep`, setup (policy, cache mode, metrics) uses `admin`.
#[derive(Debug, Clone)]
pub struct Target {
    pub pep: Endpoint,
    pub admin: Endpoint,
}

/// One bin of the raw latency histogram; `le_us` absent for the overflow bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub le_us: Option<f64>,
    pub count: u64,
}

/// Summary of one scenario run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub samples: usize,
    /// Requests that produced no decision (transport failures).
    pub errors: usize,
    pub median_us: f64,
    pub p25_us: f64,
    pub p50_us: f64,
    pub p75_us: f64,
    pub min_us: f64,
    pub max_us: f64,
    pub mean_us: f64,
    pub repetition_medians_us: Vec<f64>,
    pub permits: u64,
    pub denies: u64,
    pub scenario: Scenario,
    /// Denies carrying an error code, by code.
    #[serde(default)]
    pub error_codes: BTreeMap<String, u64>,
    /// Target counters after minus before the timed passes, summed over repetitions.
    #[serde(default)]
    pub metrics_delta: BTreeMap<String, f64>,
    #[serde(default)]
    pub histogram: Vec<HistogramBin>,
}

impl LatencyReport {
    pub fn to_text(&self) -> String {
        let mut out = String::from("# zts latency report; all latencies in microseconds, client-side send to receive\n");
        out.push_str(&toml::to_string(self).expect("report serializes"));
        out
    }

    pub fn from_text(src: &str) -> Result<Self, HarnessError> {
        toml::from_str(src).map_err(|e| HarnessError::Io(format!("invalid report: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let src = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("reading {}: {e}", path.display())))?;
        Self::from_text(&src)
    }

    pub const CSV_HEADER: &'static str =
        "scenario,algorithm,threshold_mode,cache_mode,instances,requests_per_instance,repetitions,samples,errors,p25_us,median_us,p75_us";

    pub fn csv_row(&self) -> String {
        let s = &self.scenario;
        format!(
            "{},{},{},{},{},{},{},{},{},{:.3},{:.3},{:.3}",
            s.name,
            s.algorithm,
            s.threshold_mode,
            s.cache_mode,
            s.parallel_instances,
            s.requests_per_instance,
            s.repetitions,
            self.samples,
            self.errors,
            self.p25_us,
            self.median_us,
            self.p75_us
        )
    }
}

/// Quantile by linear interpolation between closest ranks; `sorted` must be ascending.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

#[derive(Default)]
struct PassResult {
    latencies: Vec<f64>,
    errors: usize,
    permits: u64,
    denies: u64,
    error_codes: BTreeMap<String, u64>,
}

impl PassResult {
    fn merge(&mut self, other: PassResult) {
        self.latencies.extend(other.latencies);
        self.errors += other.errors;
        self.permits += other.permits;
        self.denies += other.denies;
        for (k, v) in other.error_codes {
            *self.error_codes.entry(k).or_default() += v;
        }
    }
}

fn unreachable(e: anyhow::Error) -> HarnessError {
    HarnessError::TargetUnreachable(format!("{e:#}"))
}

/// Accumulates the repetitions of one scenario.
struct ScenarioRun {
    scenario: Scenario,
    policy: Policy,
    result: PassResult,
    repetition_medians: Vec<f64>,
    metrics_delta: BTreeMap<String, f64>,
    done: usize,
}

impl ScenarioRun {
    fn new(scenario: Scenario) -> Result<Self, HarnessError> {
        scenario.validate()?;
        let policy = scenario.bench_policy()?;
        Ok(Self {
            scenario,
            policy,
            result: PassResult::default(),
            repetition_medians: Vec::new(),
            metrics_delta: BTreeMap::new(),
            done: 0,
        })
    }

    async fn prepare(&self, admin: &mut PdpClient, seed: &SeedData) -> Result<(), HarnessError> {
        admin.replace_policy(&self.policy).await.map_err(|e| HarnessError::Admin(format!("{e:#}")))?;
        let cold = self.scenario.cache_mode == CacheMode::Cold;
        let cmd = PipAdmin { mode: Some(self.scenario.cache_mode), flush: cold };
        admin.pip_admin(&cmd).await.map_err(|e| HarnessError::Admin(format!("{e:#}")))?;
        if !cold && self.done == 0 {
            // Untimed pass over every fixture so all keys are cached.
            for (i, fixture) in seed.requests.iter().enumerate() {
                let mut req = fixture.clone();
                req.request_id = format!("{}-warmup-{i}", self.scenario.name);
                admin.decide(&req).await.map_err(unreachable)?;
            }
        }
        Ok(())
    }

    async fn repetition(&mut self, target: &Target, admin: &mut PdpClient, seed: &SeedData) -> Result<(), HarnessError> {
        self.prepare(admin, seed).await?;
        let s = &self.scenario;
        let mut clients = Vec::with_capacity(s.parallel_instances);
        for _ in 0..s.parallel_instances {
            clients.push(PdpClient::connect(&target.pep).await.map_err(unreachable)?);
        }
        let before = admin.metrics().await.map_err(unreachable)?;

        let rep = self.done;
        let mut tasks = Vec::with_capacity(clients.len());
        for (instance, mut client) in clients.into_iter().enumerate() {
            let bodies: Vec<Bytes> = (0..s.requests_per_instance)
                .map(|k| {
                    let mut req: DecisionRequest = seed.requests[(instance + k) % seed.requests.len()].clone();
                    req.request_id = format!("{}-{rep}-{instance}-{k}", s.name);
                    Bytes::from(serde_json::to_vec(&req).expect("request serializes"))
                })
                .collect();
            tasks.push(tokio::spawn(async move {
                let mut r = PassResult { latencies: Vec::with_capacity(bodies.len()), ..Default::default() };
                for body in bodies {
                    let start = Instant::now();
                    let resp = client.decide_raw(body).await;
                    let elapsed = start.elapsed().as_secs_f64() * 1e6;
                    match resp {
                        Ok(resp) => {
                            r.latencies.push(elapsed);
                            if resp.outcome.is_permit() {
                                r.permits += 1;
                            } else {
                                r.denies += 1;
                            }
                            if let Some(code) = resp.error_code {
                                *r.error_codes.entry(code.to_string()).or_default() += 1;
                            }
                        }
                        Err(_) => r.errors += 1,
                    }
                }
                r
            }));
        }
        let mut pass = PassResult::default();
        for t in tasks {
            pass.merge(t.await.map_err(|e| HarnessError::Io(format!("client task failed: {e}")))?);
        }

        let after = admin.metrics().await.map_err(unreachable)?;
        for (k, v) in &after {
            *self.metrics_delta.entry(k.clone()).or_default() += v - before.get(k).copied().unwrap_or(0.0);
        }
        self.repetition_medians.push(quantile(&sorted(pass.latencies.clone()), 0.5));
        self.result.merge(pass);
        self.done += 1;
        Ok(())
    }

    fn finish(self) -> LatencyReport {
        let all = sorted(self.result.latencies);
        let mut histogram: Vec<HistogramBin> =
            LATENCY_BUCKETS_US.iter().map(|&le| HistogramBin { le_us: Some(le), count: 0 }).collect();
        histogram.push(HistogramBin { le_us: None, count: 0 });
        for &v in &all {
            let i = LATENCY_BUCKETS_US.iter().position(|&le| v <= le).unwrap_or(LATENCY_BUCKETS_US.len());
            histogram[i].count += 1;
        }
        let mean = if all.is_empty() { f64::NAN } else { all.iter().sum::<f64>() / all.len() as f64 };
        LatencyReport {
            samples: all.len(),
            errors: self.result.errors,
            median_us: quantile(&all, 0.5),
            p25_us: quantile(&all, 0.25),
            p50_us: quantile(&all, 0.5),
            p75_us: quantile(&all, 0.75),
            min_us: all.first().copied().unwrap_or(f64::NAN),
            max_us: all.last().copied().unwrap_or(f64::NAN),
            mean_us: mean,
            repetition_medians_us: self.repetition_medians,
            permits: self.result.permits,
            denies: self.result.denies,
            scenario: self.scenario,
            error_codes: self.result.error_codes,
            metrics_delta: self.metrics_delta,
            histogram,
        }
    }
}

/// Checks the target is reachable and seeded with `seed`.
pub async fn check_target(target: &Target, seed: &SeedData) -> Result<PdpClient, HarnessError> {
    let mut admin = PdpClient::connect(&target.admin).await.map_err(unreachable)?;
    let health = admin.health().await.map_err(unreachable)?;
    let expected = seed.digest();
    if health.seed_hash.as_deref() != Some(expected.as_str()) {
        return Err(HarnessError::SeedMismatch { expected, actual: health.seed_hash });
    }
    if seed.requests.is_empty() {
        return Err(HarnessError::InvalidScenario("seed file has no [[request]] fixtures".into()));
    }
    Ok(admin)
}

/// Runs one scenario against `target`.
pub async fn run_scenario(scenario: &Scenario, target: &Target, seed: &SeedData) -> Result<LatencyReport, HarnessError> {
    let mut admin = check_target(target, seed).await?;
    let mut run = ScenarioRun::new(scenario.clone())?;
    for _ in 0..scenario.repetitions {
        run.repetition(target, &mut admin, seed).await?;
    }
    Ok(run.finish())
}

/// Runs several scenarios. Scenarios that differ only in threshold mode are
/// run with their repetitions interleaved so slow drift of the host affects
/// both alike. Reports are returned in input order.
pub async fn run_scenarios(
    scenarios: &[Scenario],
    target: &Target,
    seed: &SeedData,
    mut progress: impl FnMut(&LatencyReport),
) -> Result<Vec<LatencyReport>, HarnessError> {
    let mut admin = check_target(target, seed).await?;
    let mut slots: Vec<Option<LatencyReport>> = vec![None; scenarios.len()];
    let mut used = vec![false; scenarios.len()];
    for i in 0..scenarios.len() {
        if used[i] {
            continue;
        }
        let group: Vec<usize> = (i..scenarios.len())
            .filter(|&j| !used[j] && scenarios[j].pairs_with(&scenarios[i]))
            .collect();
        let mut runs = Vec::new();
        for &j in &group {
            used[j] = true;
            runs.push(ScenarioRun::new(scenarios[j].clone())?);
        }
        for _ in 0..scenarios[i].repetitions {
            for run in &mut runs {
                run.repetition(target, &mut admin, seed).await?;
            }
        }
        for (j, run) in group.into_iter().zip(runs) {
            let report = run.finish();
            progress(&report);
            slots[j] = Some(report);
        }
    }
    Ok(slots.into_iter().map(|r| r.expect("every scenario ran")).collect())
}

/// Writes one `<name>.report.toml` per report plus `plot.csv` into `dir`.
pub fn write_reports(dir: impl AsRef<Path>, reports: &[LatencyReport]) -> Result<Vec<PathBuf>, HarnessError> {
    let dir = dir.as_ref();
    let io = |e: std::io::Error| HarnessError::Io(format!("writing reports to {}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut paths = Vec::new();
    let mut csv = format!("{}\n", LatencyReport::CSV_HEADER);
    for r in reports {
        let path = dir.join(format!("{}.report.toml", r.scenario.name));
        std::fs::write(&path, r.to_text()).map_err(io)?;
        paths.push(path);
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    let plot = dir.join("plot.csv");
    std::fs::write(&plot, csv).map_err(io)?;
    paths.push(plot);
    Ok(paths)
}

/// Relative median difference between two reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    /// `dynamic overhead`, `cache speedup` or `median difference`.
    pub label: String,
    pub baseline: String,
    pub candidate: String,
    pub baseline_median_us: f64,
    pub candidate_median_us: f64,
    /// `(candidate - baseline) / baseline`, in percent.
    pub percent: f64,
    /// Length of the intersection of the two interquartile ranges.
    pub quartile_overlap_us: f64,
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {:+.2}% (median {:.1} us [{}] -> {:.1} us [{}]); interquartile ranges {}",
            self.label,
            self.percent,
            self.baseline_median_us,
            self.baseline,
            self.candidate_median_us,
            self.candidate,
            if self.quartile_overlap_us > 0.0 {
                format!("overlap by {:.1} us", self.quartile_overlap_us)
            } else {
                "are disjoint".to_owned()
            }
        )
    }
}

/// Compares two reports of equal instance and request counts. A static and
/// a dynamic report yield `dynamic overhead` (dynamic relative to static); a
/// cold and a warm report yield `cache speedup` (warm relative to cold);
/// anything else `median difference` of `b` relative to `a`.
pub fn compare_reports(a: &LatencyReport, b: &LatencyReport) -> Result<Comparison, HarnessError> {
    let (sa, sb) = (&a.scenario, &b.scenario);
    if sa.parallel_instances != sb.parallel_instances || sa.requests_per_instance != sb.requests_per_instance {
        return Err(HarnessError::IncomparableScenarios(format!(
            "`{}` runs {} x {} but `{}` runs {} x {}",
            sa.name, sa.parallel_instances, sa.requests_per_instance, sb.name, sb.parallel_instances, sb.requests_per_instance
        )));
    }
    if a.samples == 0 || b.samples == 0 {
        return Err(HarnessError::IncomparableScenarios("a report has no samples".into()));
    }
    let (label, base, cand) = if sa.threshold_mode != sb.threshold_mode && sa.cache_mode == sb.cache_mode {
        let (s, d) = if sa.threshold_mode == ThresholdChoice::Static { (a, b) } else { (b, a) };
        ("dynamic overhead", s, d)
    } else if sa.cache_mode != sb.cache_mode && sa.threshold_mode == sb.threshold_mode {
        let (c, w) = if sa.cache_mode == CacheMode::Cold { (a, b) } else { (b, a) };
        ("cache speedup", c, w)
    } else {
        ("median difference", a, b)
    };
    let overlap = (base.p75_us.min(cand.p75_us) - base.p25_us.max(cand.p25_us)).max(0.0);
    Ok(Comparison {
        label: label.into(),
        baseline: base.scenario.name.clone(),
        candidate: cand.scenario.name.clone(),
        baseline_median_us: base.median_us,
        candidate_median_us: cand.median_us,
        percent: (cand.median_us - base.median_us) / base.median_us * 100.0,
        quartile_overlap_us: overlap,
    })
}
