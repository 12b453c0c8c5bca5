use serde::{Deserialize, Serialize};

use super::demand::NS_PER_S;
use super::sim::RequestRecord;

/// Windowed throughput and queueing latency of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Requests that started and completed inside the window.
    pub count: usize,
    /// Completions per second of window.
    pub throughput: f64,
    /// Seconds from submit to start.
    pub mean_latency: f64,
    pub p50: f64,
    pub p95: f64,
    /// Mean start-to-complete time in seconds.
    pub mean_execution: f64,
    /// Sorted latencies in seconds.
    pub latencies: Vec<f64>,
    /// No request fell inside the window.
    pub empty: bool,
}

/// Nearest-rank percentile of sorted data; 0 for empty input.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

/// Right-continuous empirical CDF: fraction of samples `<= x`.
pub fn cdf_at(sorted: &[f64], x: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    sorted.partition_point(|&v| v <= x) as f64 / sorted.len() as f64
}

pub fn compute_metrics(records: &[RequestRecord], window_ns: (u64, u64)) -> Metrics {
    let (lo, hi) = window_ns;
    let inside = |t: u64| lo <= t && t <= hi;
    let mut latencies = Vec::new();
    let mut exec = 0.0;
    for r in records {
        if let (Some(s), Some(c)) = (r.start_ns, r.complete_ns) {
            if inside(s) && inside(c) {
                latencies.push((s - r.submit_ns) as f64 / NS_PER_S);
                exec += (c - s) as f64 / NS_PER_S;
            }
        }
    }
    latencies.sort_by(f64::total_cmp);
    let n = latencies.len();
    let span = (hi - lo) as f64 / NS_PER_S;
    let mean = |sum: f64| if n == 0 { 0.0 } else { sum / n as f64 };
    Metrics {
        count: n,
        throughput: if span > 0.0 { n as f64 / span } else { 0.0 },
        mean_latency: mean(latencies.iter().sum()),
        p50: percentile(&latencies, 0.5),
        p95: percentile(&latencies, 0.95),
        mean_execution: mean(exec),
        latencies,
        empty: n == 0,
    }
}

/// Mean start-to-complete time over every completed request, in seconds.
pub fn mean_execution_time(records: &[RequestRecord]) -> Option<f64> {
    let d: Vec<f64> = records
        .iter()
        .filter_map(|r| Some((r.complete_ns? - r.start_ns?) as f64 / NS_PER_S))
        .collect();
    (!d.is_empty()).then(|| d.iter().sum::<f64>() / d.len() as f64)
}
