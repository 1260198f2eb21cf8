//! Service counters and latency histograms, rendered as flat `key value` text.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, Ordering};

/// Upper bucket bounds in microseconds; the last bucket is unbounded.
pub const LATENCY_BUCKETS_US: [f64; 15] = [
    10.0, 25.0, 50.0, 100.0, 250.0, 500.0, 1_000.0, 2_500.0, 5_000.0, 10_000.0, 25_000.0, 50_000.0, 100_000.0,
    500_000.0, 2_000_000.0,
];

/// A fixed-bucket histogram of microsecond durations.
#[derive(Debug, Default)]
pub struct Histogram {
    buckets: [AtomicU64; LATENCY_BUCKETS_US.len() + 1],
    count: AtomicU64,
    /// Sum in nanoseconds, to keep integer atomics.
    sum_ns: AtomicU64,
}

impl Histogram {
    pub fn observe(&self, micros: f64) {
        let slot = LATENCY_BUCKETS_US.iter().position(|b| micros <= *b).unwrap_or(LATENCY_BUCKETS_US.len());
        self.buckets[slot].fetch_add(1, Ordering::Relaxed);
        self.count.fetch_add(1, Ordering::Relaxed);
        self.sum_ns.fetch_add((micros.max(0.0) * 1_000.0) as u64, Ordering::Relaxed);
    }

    pub fn count(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }

    pub fn sum_micros(&self) -> f64 {
        self.sum_ns.load(Ordering::Relaxed) as f64 / 1_000.0
    }

    fn render(&self, name: &str, out: &mut String) {
        let mut cumulative = 0;
        for (i, b) in self.buckets.iter().enumerate() {
            cumulative += b.load(Ordering::Relaxed);
            match LATENCY_BUCKETS_US.get(i) {
                Some(le) => writeln!(out, "{name}_bucket_le_{le} {cumulative}"),
                None => writeln!(out, "{name}_bucket_le_inf {cumulative}"),
            }
            .expect("write to string");
        }
        writeln!(out, "{name}_count {}", self.count()).expect("write to string");
        writeln!(out, "{name}_sum {}", self.sum_micros()).expect("write to string");
    }
}

/// Decision stage latencies.
#[derive(Debug, Default)]
pub struct StageHistograms {
    pub policy_resolve: Histogram,
    pub attribute_fetch: Histogram,
    pub engine_compute: Histogram,
    pub total: Histogram,
}

/// Counters exported by the decision point.
#[derive(Debug, Default)]
pub struct Metrics {
    pub decisions: AtomicU64,
    pub permits: AtomicU64,
    pub denies: AtomicU64,
    pub errors: AtomicU64,
    pub stages: StageHistograms,
}

impl Metrics {
    pub fn new() -> Self {
        Self::default()
    }

    /// Renders all counters; `extra` (e.g. cache counters) is appended as given.
    pub fn render(&self, extra: &[(&str, u64)]) -> String {
        let mut out = String::new();
        for (k, v) in [
            ("decisions_total", &self.decisions),
            ("decisions_permit", &self.permits),
            ("decisions_deny", &self.denies),
            ("decisions_error", &self.errors),
        ] {
            writeln!(out, "{k} {}", v.load(Ordering::Relaxed)).expect("write to string");
        }
        for (k, v) in extra {
            writeln!(out, "{k} {v}").expect("write to string");
        }
        self.stages.policy_resolve.render("stage_policy_resolve_us", &mut out);
        self.stages.attribute_fetch.render("stage_attribute_fetch_us", &mut out);
        self.stages.engine_compute.render("stage_engine_compute_us", &mut out);
        self.stages.total.render("stage_total_us", &mut out);
        out
    }
}

/// Parses `key value` lines; lines that do not parse are skipped.
pub fn parse_metrics(text: &str) -> BTreeMap<String, f64> {
    text.lines()
        .filter_map(|l| {
            let (k, v) = l.trim().split_once(' ')?;
            Some((k.to_owned(), v.trim().parse().ok()?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_buckets_are_cumulative() {
        let h = Histogram::default();
        h.observe(5.0);
        h.observe(30.0);
        h.observe(3e6);
        let mut out = String::new();
        h.render("x", &mut out);
        let m = parse_metrics(&out);
        assert_eq!(m["x_bucket_le_10"], 1.0);
        assert_eq!(m["x_bucket_le_50"], 2.0);
        assert_eq!(m["x_bucket_le_inf"], 3.0);
        assert_eq!(m["x_count"], 3.0);
        assert!((m["x_sum"] - 3_000_035.0).abs() < 1e-6);
    }

    #[test]
    fn fresh_metrics_are_zero() {
        let m = parse_metrics(&Metrics::new().render(&[("pip_round_trips", 0)]));
        assert_eq!(m["decisions_total"], 0.0);
        assert_eq!(m["pip_round_trips"], 0.0);
    }
}
