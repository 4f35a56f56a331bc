//! Synthetic workload generation and virtual-time replay.
//!
//! The simulator is a single-threaded discrete-event loop over a
//! [`VirtualClock`]: requests are issued back to back (closed loop), and
//! slow-backend completions are scheduled as events at
//! `enqueue time + drawn latency`, so "asynchronous" upgrades land on the
//! same timeline without any wall-clock sleeping. A run over 100k requests
//! takes seconds and replays bit-identically for a fixed seed.

use std::cmp::Ordering as CmpOrdering;
use std::collections::BinaryHeap;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clickstream::NormalizedQuery;
use crate::clock::{ms_to_us, VirtualClock};
use crate::gateway::{Gateway, SlowStep, StatsSnapshot};
use crate::translators::Translator;

/// Popularity model for synthetic queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Popularity {
    /// Zipfian rank-frequency with the given exponent.
    Zipf { exponent: f64 },
    /// Every query equally likely; sampled without replacement in rounds,
    /// so `total == distinct` yields zero repetition.
    Uniform,
    /// Replay raw queries from a file, one per line, in order.
    Trace { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub total_requests: u64,
    pub distinct_queries: u64,
    pub popularity: Popularity,
    pub seed: u64,
    /// When set (zipf only), the exponent is solved by bisection until the
    /// achieved repetition rate lands within one percentage point.
    #[serde(default)]
    pub target_repetition_rate: Option<f64>,
}

/// A generated request stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub queries: Vec<String>,
    /// `1 - distinct_used / total`.
    pub achieved_repetition: f64,
    /// The zipf exponent actually used, when applicable.
    pub exponent: Option<f64>,
}

#[derive(Debug, Error)]
pub enum LoadSimError {
    #[error("invalid workload spec: {0}")]
    InvalidSpec(String),
    #[error(
        "target repetition rate {target} unreachable: achievable range is [{low:.4}, {high:.4}]"
    )]
    InfeasibleTarget { target: f64, low: f64, high: f64 },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

const REPETITION_TOLERANCE: f64 = 0.01;

/// Generate the request stream described by `spec`. Deterministic for a
/// fixed seed.
pub fn generate(spec: &WorkloadSpec) -> Result<Workload, LoadSimError> {
    if let Popularity::Trace { path } = &spec.popularity {
        let content = std::fs::read_to_string(path)?;
        let queries: Vec<String> = content
            .lines()
            .filter(|line| !line.trim().is_empty())
            .map(str::to_string)
            .collect();
        if queries.is_empty() {
            return Err(LoadSimError::InvalidSpec("trace file is empty".into()));
        }
        let repetition = repetition_rate_of(&queries);
        return Ok(Workload {
            queries,
            achieved_repetition: repetition,
            exponent: None,
        });
    }

    if spec.total_requests == 0 || spec.distinct_queries == 0 {
        return Err(LoadSimError::InvalidSpec(
            "total_requests and distinct_queries must be positive".into(),
        ));
    }
    if spec.distinct_queries > spec.total_requests {
        return Err(LoadSimError::InvalidSpec(
            "distinct_queries must not exceed total_requests".into(),
        ));
    }
    if let Some(t) = spec.target_repetition_rate {
        if !(0.0..=1.0).contains(&t) {
            return Err(LoadSimError::InvalidSpec(
                "target_repetition_rate must be in [0,1]".into(),
            ));
        }
    }

    match (&spec.popularity, spec.target_repetition_rate) {
        (Popularity::Uniform, None) => {
            let indices = sample_uniform_rounds(spec);
            Ok(materialize(spec, &indices, None))
        }
        (Popularity::Uniform, Some(_)) => Err(LoadSimError::InvalidSpec(
            "target_repetition_rate requires zipf popularity".into(),
        )),
        (Popularity::Zipf { exponent }, None) => {
            if *exponent <= 0.0 {
                return Err(LoadSimError::InvalidSpec(
                    "zipf exponent must be > 0".into(),
                ));
            }
            let indices = sample_zipf(spec, *exponent);
            Ok(materialize(spec, &indices, Some(*exponent)))
        }
        (Popularity::Zipf { .. }, Some(target)) => {
            let exponent = solve_zipf_exponent(spec, target)?;
            let indices = sample_zipf(spec, exponent);
            Ok(materialize(spec, &indices, Some(exponent)))
        }
        (Popularity::Trace { .. }, _) => unreachable!("handled above"),
    }
}

fn query_name(index: usize) -> String {
    format!("q{index:06}")
}

fn materialize(spec: &WorkloadSpec, indices: &[usize], exponent: Option<f64>) -> Workload {
    let queries: Vec<String> = indices.iter().map(|&i| query_name(i)).collect();
    Workload {
        achieved_repetition: repetition_rate(indices, spec.distinct_queries as usize),
        queries,
        exponent,
    }
}

fn repetition_rate(indices: &[usize], distinct: usize) -> f64 {
    let mut seen = vec![false; distinct];
    let mut used = 0u64;
    for &i in indices {
        if !seen[i] {
            seen[i] = true;
            used += 1;
        }
    }
    1.0 - used as f64 / indices.len() as f64
}

fn repetition_rate_of(queries: &[String]) -> f64 {
    let used: std::collections::HashSet<&str> = queries.iter().map(String::as_str).collect();
    1.0 - used.len() as f64 / queries.len() as f64
}

fn sample_uniform_rounds(spec: &WorkloadSpec) -> Vec<usize> {
    let n = spec.distinct_queries as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut deck: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity(spec.total_requests as usize);
    while out.len() < spec.total_requests as usize {
        deck.shuffle(&mut rng);
        let want = spec.total_requests as usize - out.len();
        out.extend(deck.iter().take(want.min(n)).copied());
    }
    out
}

fn sample_zipf(spec: &WorkloadSpec, exponent: f64) -> Vec<usize> {
    let n = spec.distinct_queries as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dist = rand_distr::Zipf::new(n, exponent).expect("validated zipf parameters");
    (0..spec.total_requests)
        .map(|_| {
            let rank = dist.sample(&mut rng) as usize;
            rank.saturating_sub(1)
                .min(spec.distinct_queries as usize - 1)
        })
        .collect()
}

/// Bisection on the zipf exponent until the achieved repetition rate is
/// within a percentage point of `target`. Every evaluation reuses the same
/// seed, so the solved workload is exactly the one measured.
fn solve_zipf_exponent(spec: &WorkloadSpec, target: f64) -> Result<f64, LoadSimError> {
    let achieved = |s: f64| -> f64 {
        let indices = sample_zipf(spec, s);
        repetition_rate(&indices, spec.distinct_queries as usize)
    };
    let (mut lo, mut hi) = (0.05_f64, 8.0_f64);
    let (a_lo, a_hi) = (achieved(lo), achieved(hi));
    if target < a_lo - REPETITION_TOLERANCE || target > a_hi + REPETITION_TOLERANCE {
        return Err(LoadSimError::InfeasibleTarget {
            target,
            low: a_lo,
            high: a_hi,
        });
    }
    let mut best = (lo, a_lo);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let a = achieved(mid);
        if (a - target).abs() < (best.1 - target).abs() {
            best = (mid, a);
        }
        if (a - target).abs() <= REPETITION_TOLERANCE / 2.0 {
            break;
        }
        if a < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (best.1 - target).abs() > REPETITION_TOLERANCE {
        return Err(LoadSimError::InfeasibleTarget {
            target,
            low: a_lo,
            high: a_hi,
        });
    }
    Ok(best.0)
}

/// Open-loop Poisson arrivals for stress runs; returns inter-arrival gaps
/// in milliseconds for `total` requests at `rate_per_sec`.
pub fn poisson_gaps_ms(total: u64, rate_per_sec: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean_gap_ms = 1000.0 / rate_per_sec;
    (0..total)
        .map(|_| {
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            -u.ln() * mean_gap_ms
        })
        .collect()
}

// --- replay -----------------------------------------------------------------

/// Measurement protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveMode {
    /// Measure from the first request with an empty cache.
    Cold,
    /// Replay once, drain the slow queue, then measure a second pass.
    Warmed,
}

/// Which serving path the run exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathMode {
    /// The full cache + fast + async-slow architecture.
    Dual,
    /// Every request synchronously through the fast backend alone.
    FastOnly,
    /// Every request synchronously through the slow backend alone.
    SlowOnly,
}

/// How requests enter the system.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arrival {
    /// Back-to-back: each request is issued when the previous response
    /// lands.
    #[default]
    Closed,
    /// Poisson arrivals at the given rate, independent of response times.
    OpenPoisson { rate_per_sec: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub drive: DriveMode,
    pub path: PathMode,
    /// Maximum concurrent slow translations. `None` models a slow tier
    /// that always starts work at enqueue time (continuous draining).
    #[serde(default)]
    pub slow_concurrency: Option<usize>,
    #[serde(default)]
    pub arrival: Arrival,
    /// Seed for open-loop arrival gaps.
    #[serde(default)]
    pub arrival_seed: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            drive: DriveMode::Cold,
            path: PathMode::Dual,
            slow_concurrency: None,
            arrival: Arrival::Closed,
            arrival_seed: 0,
        }
    }
}

/// Latency and proportion figures for one measured pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub path: PathMode,
    pub drive: DriveMode,
    pub total_requests: u64,
    pub achieved_repetition: f64,
    pub average_latency_ms: f64,
    pub p50_latency_ms: f64,
    pub p95_latency_ms: f64,
    pub p99_latency_ms: f64,
    /// Fraction of responses served synchronously by the fast backend.
    pub proportion_fast: f64,
    /// Fraction of responses served from the cache (slow-backend text).
    pub proportion_cache: f64,
    /// Fraction served synchronously by the slow backend (baseline runs).
    pub proportion_slow: f64,
    pub stats: StatsSnapshot,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

enum Event {
    Request(usize),
    SlowCommit {
        query: NormalizedQuery,
        text: String,
    },
}

struct Scheduled {
    at_us: u64,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.at_us == other.at_us && self.seq == other.seq
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<CmpOrdering> {
        Some(self.cmp(other))
    }
}
impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> CmpOrdering {
        // Reversed so BinaryHeap pops the earliest event first.
        (other.at_us, other.seq).cmp(&(self.at_us, self.seq))
    }
}

/// Replay `workload` against `gateway` on `clock` and report latency and
/// proportion aggregates for the measured pass.
pub fn run(
    workload: &Workload,
    gateway: &Gateway,
    clock: &VirtualClock,
    options: &RunOptions,
) -> RunReport {
    let latencies = match options.path {
        PathMode::Dual => match options.drive {
            DriveMode::Cold => {
                simulate_dual_pass(&workload.queries, gateway, clock, options, false)
            }
            DriveMode::Warmed => {
                simulate_dual_pass(&workload.queries, gateway, clock, options, true);
                gateway.reset_stats();
                simulate_dual_pass(&workload.queries, gateway, clock, options, false)
            }
        },
        PathMode::FastOnly => simulate_single_backend(workload, &*gateway.fast_backend(), clock),
        PathMode::SlowOnly => simulate_single_backend(workload, &*gateway.slow_backend(), clock),
    };

    let stats = gateway.stats();
    let n = latencies.len() as f64;
    let (proportion_fast, proportion_cache, proportion_slow) = match options.path {
        PathMode::Dual => {
            let served = stats.requests.max(1) as f64;
            (
                stats.fast_served as f64 / served,
                stats.cache_hits as f64 / served,
                0.0,
            )
        }
        PathMode::FastOnly => (1.0, 0.0, 0.0),
        PathMode::SlowOnly => (0.0, 0.0, 1.0),
    };

    let mut sorted = latencies.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    RunReport {
        path: options.path,
        drive: options.drive,
        total_requests: latencies.len() as u64,
        achieved_repetition: workload.achieved_repetition,
        average_latency_ms: latencies.iter().sum::<f64>() / n.max(1.0),
        p50_latency_ms: percentile(&sorted, 0.50),
        p95_latency_ms: percentile(&sorted, 0.95),
        p99_latency_ms: percentile(&sorted, 0.99),
        proportion_fast,
        proportion_cache,
        proportion_slow,
        stats,
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn simulate_dual_pass(
    queries: &[String],
    gateway: &Gateway,
    clock: &VirtualClock,
    options: &RunOptions,
    run_to_quiescence: bool,
) -> Vec<f64> {
    let mut heap: BinaryHeap<Scheduled> = BinaryHeap::new();
    let mut seq: u64 = 0;
    let mut free_workers = options.slow_concurrency.unwrap_or(usize::MAX);
    let mut latencies = Vec::with_capacity(queries.len());
    let mut served = 0usize;

    // Open-loop runs fix every arrival time up front.
    let arrivals: Option<Vec<u64>> = match options.arrival {
        Arrival::Closed => None,
        Arrival::OpenPoisson { rate_per_sec } => {
            let gaps = poisson_gaps_ms(queries.len() as u64, rate_per_sec, options.arrival_seed);
            let start = clock.now_us();
            let mut at = start as f64 / 1000.0;
            Some(
                gaps.iter()
                    .map(|gap| {
                        at += gap;
                        ms_to_us(at)
                    })
                    .collect(),
            )
        }
    };

    let push = |heap: &mut BinaryHeap<Scheduled>, seq: &mut u64, at_us: u64, event: Event| {
        heap.push(Scheduled {
            at_us,
            seq: *seq,
            event,
        });
        *seq += 1;
    };

    if !queries.is_empty() {
        let first_at = arrivals.as_ref().map_or(clock.now_us(), |a| a[0]);
        push(&mut heap, &mut seq, first_at, Event::Request(0));
    }

    while let Some(scheduled) = heap.pop() {
        clock.advance_to_us(scheduled.at_us);
        let now = scheduled.at_us;
        match scheduled.event {
            Event::Request(index) => {
                let latency_ms = match gateway.handle(&queries[index]) {
                    Ok(result) => result.latency_ms,
                    Err(_) => 0.0,
                };
                latencies.push(latency_ms);
                served += 1;
                drain_into_schedule(gateway, &mut heap, &mut seq, now, &mut free_workers);
                if index + 1 < queries.len() {
                    let next_at = match &arrivals {
                        None => now + ms_to_us(latency_ms),
                        Some(times) => times[index + 1].max(now),
                    };
                    push(&mut heap, &mut seq, next_at, Event::Request(index + 1));
                } else if !run_to_quiescence {
                    break;
                }
            }
            Event::SlowCommit { query, text } => {
                gateway.commit_slow_job(query, text);
                if options.slow_concurrency.is_some() {
                    free_workers += 1;
                }
                drain_into_schedule(gateway, &mut heap, &mut seq, now, &mut free_workers);
            }
        }
    }
    debug_assert_eq!(served, queries.len());
    latencies
}

fn drain_into_schedule(
    gateway: &Gateway,
    heap: &mut BinaryHeap<Scheduled>,
    seq: &mut u64,
    now_us: u64,
    free_workers: &mut usize,
) {
    while *free_workers > 0 {
        match gateway.begin_slow_job() {
            SlowStep::Empty => break,
            SlowStep::Dropped { .. } => continue,
            SlowStep::Started(job) => {
                if *free_workers != usize::MAX {
                    *free_workers -= 1;
                }
                heap.push(Scheduled {
                    at_us: now_us + ms_to_us(job.latency_ms),
                    seq: *seq,
                    event: Event::SlowCommit {
                        query: job.query,
                        text: job.text,
                    },
                });
                *seq += 1;
            }
        }
    }
}

fn simulate_single_backend(
    workload: &Workload,
    backend: &dyn Translator,
    clock: &VirtualClock,
) -> Vec<f64> {
    let mut latencies = Vec::with_capacity(workload.queries.len());
    for raw in &workload.queries {
        let query = crate::clickstream::normalize(raw).expect("workload queries are non-empty");
        let latency_ms = match backend.translate(&query) {
            Ok(out) => out.latency_ms,
            Err(_) => 0.0,
        };
        clock.advance_ms(latency_ms);
        latencies.push(latency_ms);
    }
    latencies
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::Clock;
    use crate::gateway::GatewayConfig;
    use crate::translators::{LatencyModel, SimTranslator, TranslatorSpec};
    use std::sync::Arc;

    fn zipf_spec(total: u64, distinct: u64, target: Option<f64>) -> WorkloadSpec {
        WorkloadSpec {
            total_requests: total,
            distinct_queries: distinct,
            popularity: Popularity::Zipf { exponent: 1.1 },
            seed: 42,
            target_repetition_rate: target,
        }
    }

    fn gateway_10_150(config: GatewayConfig) -> (Gateway, Arc<VirtualClock>) {
        let fast = SimTranslator::new(
            TranslatorSpec::echo("fast", LatencyModel::Fixed { ms: 10.0 }),
            1,
        );
        let slow = SimTranslator::new(
            TranslatorSpec::echo("slow", LatencyModel::Fixed { ms: 150.0 }),
            2,
        );
        let clock = Arc::new(VirtualClock::new());
        let gw = Gateway::new(
            Arc::new(fast),
            Arc::new(slow),
            clock.clone() as Arc<dyn Clock>,
            config,
        )
        .unwrap();
        (gw, clock)
    }

    #[test]
    fn uniform_all_distinct_zero_repetition() {
        let spec = WorkloadSpec {
            total_requests: 100,
            distinct_queries: 100,
            popularity: Popularity::Uniform,
            seed: 7,
            target_repetition_rate: None,
        };
        let w = generate(&spec).unwrap();
        assert_eq!(w.achieved_repetition, 0.0);
        assert_eq!(w.queries.len(), 100);
    }

    #[test]
    fn single_query_degenerate_repetition() {
        let spec = WorkloadSpec {
            total_requests: 100,
            distinct_queries: 1,
            popularity: Popularity::Zipf { exponent: 1.0 },
            seed: 7,
            target_repetition_rate: None,
        };
        let w = generate(&spec).unwrap();
        assert!((w.achieved_repetition - 0.99).abs() < 1e-12);
    }

    #[test]
    fn generate_is_deterministic() {
        let spec = zipf_spec(2000, 500, None);
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
    }

    #[test]
    fn bisection_hits_target() {
        let spec = zipf_spec(20_000, 5_000, Some(0.90));
        let w = generate(&spec).unwrap();
        assert!(
            (w.achieved_repetition - 0.90).abs() <= 0.01,
            "achieved {}",
            w.achieved_repetition
        );
    }

    #[test]
    fn infeasible_target_detected() {
        // With 5 distinct queries over 100 requests, repetition can never
        // drop to 0.5: at least 0.95 once every query has been used.
        let spec = WorkloadSpec {
            total_requests: 100,
            distinct_queries: 5,
            popularity: Popularity::Zipf { exponent: 1.0 },
            seed: 7,
            target_repetition_rate: Some(0.5),
        };
        assert!(matches!(
            generate(&spec),
            Err(LoadSimError::InfeasibleTarget { .. })
        ));
    }

    #[test]
    fn trace_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.txt");
        std::fs::write(&path, "alpha\nbeta\nalpha\n").unwrap();
        let spec = WorkloadSpec {
            total_requests: 3,
            distinct_queries: 2,
            popularity: Popularity::Trace { path },
            seed: 0,
            target_repetition_rate: None,
        };
        let w = generate(&spec).unwrap();
        assert_eq!(w.queries, vec!["alpha", "beta", "alpha"]);
        assert!((w.achieved_repetition - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn all_distinct_cold_run_is_pure_fast() {
        let spec = WorkloadSpec {
            total_requests: 200,
            distinct_queries: 200,
            popularity: Popularity::Uniform,
            seed: 3,
            target_repetition_rate: None,
        };
        let w = generate(&spec).unwrap();
        let (gw, clock) = gateway_10_150(GatewayConfig::default());
        let report = run(&w, &gw, &clock, &RunOptions::default());
        assert_eq!(report.average_latency_ms, 10.0);
        assert_eq!(report.proportion_fast, 1.0);
        assert_eq!(report.proportion_cache, 0.0);
    }

    #[test]
    fn pure_backend_baselines() {
        let w = generate(&zipf_spec(500, 100, None)).unwrap();
        let (gw, clock) = gateway_10_150(GatewayConfig::default());
        let fast = run(
            &w,
            &gw,
            &clock,
            &RunOptions {
                path: PathMode::FastOnly,
                ..RunOptions::default()
            },
        );
        assert_eq!(fast.average_latency_ms, 10.0);
        assert_eq!(fast.proportion_fast, 1.0);
        let slow = run(
            &w,
            &gw,
            &clock,
            &RunOptions {
                path: PathMode::SlowOnly,
                ..RunOptions::default()
            },
        );
        assert_eq!(slow.average_latency_ms, 150.0);
        assert_eq!(slow.proportion_slow, 1.0);
    }

    #[test]
    fn warmed_run_is_all_cache() {
        let w = generate(&zipf_spec(300, 50, None)).unwrap();
        let (gw, clock) = gateway_10_150(GatewayConfig::default());
        let report = run(
            &w,
            &gw,
            &clock,
            &RunOptions {
                drive: DriveMode::Warmed,
                ..RunOptions::default()
            },
        );
        assert_eq!(report.proportion_cache, 1.0);
        assert_eq!(report.average_latency_ms, 0.0);
    }

    #[test]
    fn run_is_deterministic() {
        let w = generate(&zipf_spec(2_000, 400, None)).unwrap();
        let reports: Vec<RunReport> = (0..2)
            .map(|_| {
                let (gw, clock) = gateway_10_150(GatewayConfig::default());
                run(&w, &gw, &clock, &RunOptions::default())
            })
            .collect();
        assert_eq!(reports[0], reports[1]);
    }

    #[test]
    fn dual_latency_bounds() {
        let w = generate(&zipf_spec(5_000, 500, None)).unwrap();
        let (gw, clock) = gateway_10_150(GatewayConfig {
            cache_hit_latency_ms: 0.2,
            ..GatewayConfig::default()
        });
        let report = run(&w, &gw, &clock, &RunOptions::default());
        assert!(report.average_latency_ms <= 10.0 + 0.2);
        assert!(report.average_latency_ms >= 0.2);
        let conservation = report.proportion_fast + report.proportion_cache;
        assert!((conservation - 1.0).abs() < 1e-9);
    }

    #[test]
    fn proportion_cache_monotone_in_repetition() {
        let mut last = -1.0;
        for target in [0.60, 0.75, 0.90] {
            let w = generate(&zipf_spec(20_000, 12_000, Some(target))).unwrap();
            let (gw, clock) = gateway_10_150(GatewayConfig::default());
            let report = run(&w, &gw, &clock, &RunOptions::default());
            assert!(
                report.proportion_cache >= last,
                "cache proportion fell from {last} at repetition target {target}"
            );
            last = report.proportion_cache;
        }
    }

    #[test]
    fn bounded_workers_create_backlog() {
        // One worker cannot keep up with 150ms jobs; cache hit rate drops
        // but the run still completes and conserves responses.
        let w = generate(&zipf_spec(2_000, 300, None)).unwrap();
        let (gw, clock) = gateway_10_150(GatewayConfig::default());
        let report = run(
            &w,
            &gw,
            &clock,
            &RunOptions {
                slow_concurrency: Some(1),
                ..RunOptions::default()
            },
        );
        assert_eq!(
            report.stats.cache_hits + report.stats.fast_served,
            report.stats.requests
        );
        let (gw2, clock2) = gateway_10_150(GatewayConfig::default());
        let unbounded = run(&w, &gw2, &clock2, &RunOptions::default());
        assert!(report.proportion_cache <= unbounded.proportion_cache);
    }

    #[test]
    fn poisson_gaps_have_requested_mean() {
        let gaps = poisson_gaps_ms(50_000, 100.0, 9);
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        assert!((mean - 10.0).abs() < 0.5, "mean gap {mean}");
    }

    #[test]
    fn open_loop_arrivals_conserve_and_replay() {
        let w = generate(&zipf_spec(3_000, 600, None)).unwrap();
        let options = RunOptions {
            arrival: Arrival::OpenPoisson {
                rate_per_sec: 200.0,
            },
            arrival_seed: 4,
            ..RunOptions::default()
        };
        let reports: Vec<RunReport> = (0..2)
            .map(|_| {
                let (gw, clock) = gateway_10_150(GatewayConfig::default());
                run(&w, &gw, &clock, &options)
            })
            .collect();
        assert_eq!(reports[0], reports[1]);
        assert_eq!(reports[0].total_requests, 3_000);
        assert_eq!(
            reports[0].stats.cache_hits + reports[0].stats.fast_served,
            reports[0].stats.requests
        );
        // Open-loop arrivals pace requests by wall time, not completions,
        // so slow upgrades land during natural gaps and hits still happen.
        assert!(reports[0].proportion_cache > 0.0);
    }
}
