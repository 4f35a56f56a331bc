//! Cache-bridged dual-backend translation gateway.
//!
//! Request flow: a query first checks the translation cache, which only
//! ever stores slow-backend results. On a hit the cached text is returned
//! immediately. On a miss the fast backend answers synchronously — its
//! result is never written to the cache — and the query is queued for the
//! slow backend unless it is already queued or in flight. When the slow
//! translation completes it is written to the cache, so the next request
//! for the same query gets the slow-quality text at cache speed.
//!
//! The serve path never waits on the slow backend: backend calls happen
//! outside the state lock and slow work is driven by separate worker steps.

pub mod http;

use std::collections::{HashSet, VecDeque};
use std::num::NonZeroUsize;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use lru::LruCache;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clickstream::{normalize, NormalizedQuery};
use crate::clock::Clock;
use crate::translators::{Provenance, TranslationResult, Translator};

/// Gateway tuning knobs. Unbounded caches and queues are unacceptable in
/// a real service, so every capacity is explicit here.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    pub cache_capacity: usize,
    pub queue_capacity: usize,
    /// Extra attempts after the first failed slow call.
    pub slow_retry_limit: u32,
    /// Worker threads drained by the live service (`serve`). The simulator
    /// schedules slow completions itself.
    pub worker_count: usize,
    /// Latency accounted to a cache hit.
    pub cache_hit_latency_ms: f64,
    /// Record per-query eviction counts (test instrumentation).
    pub track_evictions: bool,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            cache_capacity: 100_000,
            queue_capacity: 100_000,
            slow_retry_limit: 1,
            worker_count: 2,
            cache_hit_latency_ms: 0.0,
            track_evictions: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("query is empty after normalization")]
    InvalidQuery,
    #[error("fast backend unavailable")]
    FastBackendUnavailable,
    #[error("invalid gateway config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt snapshot at line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
}

/// A cached slow-backend translation.
#[derive(Debug, Clone)]
struct CacheEntry {
    translation: String,
    #[allow(dead_code)]
    inserted_at_ms: f64,
}

/// Latency histogram with fixed millisecond bucket edges.
pub const LATENCY_BUCKET_EDGES_MS: [f64; 13] = [
    0.0,
    0.5,
    1.0,
    2.0,
    5.0,
    10.0,
    20.0,
    50.0,
    100.0,
    200.0,
    500.0,
    1000.0,
    f64::INFINITY,
];

pub struct LatencyHistogram {
    counts: Vec<AtomicU64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBucket {
    pub low_ms: f64,
    /// Upper edge; the last bucket is unbounded and serializes as `null`
    /// (JSON has no infinity).
    #[serde(with = "unbounded_edge")]
    pub high_ms: f64,
    pub count: u64,
}

mod unbounded_edge {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &f64, serializer: S) -> Result<S::Ok, S::Error> {
        if value.is_finite() {
            serializer.serialize_some(value)
        } else {
            serializer.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(deserializer)?.unwrap_or(f64::INFINITY))
    }
}

impl LatencyHistogram {
    fn new() -> Self {
        Self {
            counts: (1..LATENCY_BUCKET_EDGES_MS.len())
                .map(|_| AtomicU64::new(0))
                .collect(),
        }
    }

    pub fn record(&self, latency_ms: f64) {
        let edges = &LATENCY_BUCKET_EDGES_MS;
        let mut slot = edges.len() - 2;
        for i in 0..edges.len() - 1 {
            if latency_ms >= edges[i] && latency_ms < edges[i + 1] {
                slot = i;
                break;
            }
        }
        self.counts[slot].fetch_add(1, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> Vec<HistogramBucket> {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, c)| HistogramBucket {
                low_ms: LATENCY_BUCKET_EDGES_MS[i],
                high_ms: LATENCY_BUCKET_EDGES_MS[i + 1],
                count: c.load(Ordering::Relaxed),
            })
            .collect()
    }

    fn reset(&self) {
        for c in &self.counts {
            c.store(0, Ordering::Relaxed);
        }
    }
}

/// Serving counters.
///
/// Exact conservation: `requests == cache_hits + fast_served + fast_errors`.
/// When no fast-backend faults are injected the last term is zero.
#[derive(Default)]
pub struct GatewayStats {
    requests: AtomicU64,
    cache_hits: AtomicU64,
    fast_served: AtomicU64,
    fast_errors: AtomicU64,
    slow_completions: AtomicU64,
    queue_drops: AtomicU64,
    retry_drops: AtomicU64,
    evictions: AtomicU64,
}

/// Point-in-time copy of [`GatewayStats`] plus the latency histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsSnapshot {
    pub requests: u64,
    pub cache_hits: u64,
    pub fast_served: u64,
    pub fast_errors: u64,
    pub slow_completions: u64,
    pub queue_drops: u64,
    pub retry_drops: u64,
    pub evictions: u64,
    pub latency_histogram: Vec<HistogramBucket>,
}

struct Inner {
    cache: LruCache<NormalizedQuery, CacheEntry>,
    queue: VecDeque<NormalizedQuery>,
    inflight: HashSet<NormalizedQuery>,
    eviction_counts: std::collections::HashMap<NormalizedQuery, u64>,
}

/// Outcome of one slow-path step.
#[derive(Debug, Clone, PartialEq)]
pub enum SlowStep {
    /// Queue was empty.
    Empty,
    /// A query was dequeued but every attempt failed; it was dropped and
    /// may be re-enqueued by a later cache miss.
    Dropped { query: NormalizedQuery },
    /// The slow backend produced a translation; commit it when its latency
    /// has elapsed.
    Started(SlowJob),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlowJob {
    pub query: NormalizedQuery,
    pub text: String,
    pub latency_ms: f64,
}

pub struct Gateway {
    fast: Arc<dyn Translator>,
    slow: Arc<dyn Translator>,
    clock: Arc<dyn Clock>,
    config: GatewayConfig,
    inner: Mutex<Inner>,
    stats: GatewayStats,
    latency: LatencyHistogram,
}

impl Gateway {
    pub fn new(
        fast: Arc<dyn Translator>,
        slow: Arc<dyn Translator>,
        clock: Arc<dyn Clock>,
        config: GatewayConfig,
    ) -> Result<Self, GatewayError> {
        let cache_capacity = NonZeroUsize::new(config.cache_capacity)
            .ok_or_else(|| GatewayError::InvalidConfig("cache_capacity must be > 0".into()))?;
        if config.queue_capacity == 0 {
            return Err(GatewayError::InvalidConfig(
                "queue_capacity must be > 0".into(),
            ));
        }
        if config.worker_count == 0 {
            return Err(GatewayError::InvalidConfig(
                "worker_count must be > 0".into(),
            ));
        }
        if config.cache_hit_latency_ms < 0.0 {
            return Err(GatewayError::InvalidConfig(
                "cache_hit_latency_ms must be >= 0".into(),
            ));
        }
        Ok(Self {
            fast,
            slow,
            clock,
            config,
            inner: Mutex::new(Inner {
                cache: LruCache::new(cache_capacity),
                queue: VecDeque::new(),
                inflight: HashSet::new(),
                eviction_counts: std::collections::HashMap::new(),
            }),
            stats: GatewayStats::default(),
            latency: LatencyHistogram::new(),
        })
    }

    /// Serve one translation request.
    ///
    /// Cache hit: cached slow-backend text, no backend invoked. Miss: the
    /// query is queued for slow translation (deduplicated against queued
    /// and in-flight work) and the fast backend answers synchronously.
    /// The fast result is never written to the cache.
    pub fn handle(&self, raw_query: &str) -> Result<TranslationResult, GatewayError> {
        let query = normalize(raw_query).map_err(|_| GatewayError::InvalidQuery)?;
        self.stats.requests.fetch_add(1, Ordering::Relaxed);

        {
            let mut inner = self.inner.lock();
            if let Some(entry) = inner.cache.get(&query) {
                let text = entry.translation.clone();
                drop(inner);
                self.stats.cache_hits.fetch_add(1, Ordering::Relaxed);
                let latency_ms = self.config.cache_hit_latency_ms;
                self.latency.record(latency_ms);
                self.clock.sleep_ms(latency_ms);
                return Ok(TranslationResult {
                    text,
                    source: Provenance::Cache,
                    latency_ms,
                });
            }

            // Miss: queue for slow translation unless already pending.
            if !inner.inflight.contains(&query) {
                if inner.queue.len() >= self.config.queue_capacity {
                    self.stats.queue_drops.fetch_add(1, Ordering::Relaxed);
                } else {
                    inner.queue.push_back(query.clone());
                    inner.inflight.insert(query.clone());
                }
            }
        }

        match self.fast.translate(&query) {
            Ok(out) => {
                self.stats.fast_served.fetch_add(1, Ordering::Relaxed);
                self.latency.record(out.latency_ms);
                self.clock.sleep_ms(out.latency_ms);
                Ok(TranslationResult {
                    text: out.text,
                    source: Provenance::Fast,
                    latency_ms: out.latency_ms,
                })
            }
            Err(_) => {
                self.stats.fast_errors.fetch_add(1, Ordering::Relaxed);
                Err(GatewayError::FastBackendUnavailable)
            }
        }
    }

    /// Dequeue one query and call the slow backend, retrying up to the
    /// configured limit. The returned job is still in flight: call
    /// [`Gateway::commit_slow_job`] once its latency has elapsed.
    pub fn begin_slow_job(&self) -> SlowStep {
        let query = {
            let mut inner = self.inner.lock();
            match inner.queue.pop_front() {
                Some(q) => q,
                None => return SlowStep::Empty,
            }
        };
        for _ in 0..=self.config.slow_retry_limit {
            if let Ok(out) = self.slow.translate(&query) {
                return SlowStep::Started(SlowJob {
                    query,
                    text: out.text,
                    latency_ms: out.latency_ms,
                });
            }
        }
        self.inner.lock().inflight.remove(&query);
        self.stats.retry_drops.fetch_add(1, Ordering::Relaxed);
        SlowStep::Dropped { query }
    }

    /// Write a finished slow translation into the cache (last-write-wins
    /// per key, LRU eviction on overflow) and clear the in-flight mark.
    pub fn commit_slow_job(&self, query: NormalizedQuery, text: String) {
        let mut inner = self.inner.lock();
        let entry = CacheEntry {
            translation: text,
            inserted_at_ms: self.clock.now_ms(),
        };
        if let Some((evicted_key, _)) = inner.cache.push(query.clone(), entry) {
            if evicted_key != query {
                self.stats.evictions.fetch_add(1, Ordering::Relaxed);
                if self.config.track_evictions {
                    *inner.eviction_counts.entry(evicted_key).or_insert(0) += 1;
                }
            }
        }
        inner.inflight.remove(&query);
        drop(inner);
        self.stats.slow_completions.fetch_add(1, Ordering::Relaxed);
    }

    /// Run one full slow-worker step: dequeue, translate (with retries),
    /// wait out the drawn latency on this gateway's clock, commit.
    pub fn slow_worker_step(&self) -> SlowStep {
        let step = self.begin_slow_job();
        if let SlowStep::Started(job) = &step {
            self.clock.sleep_ms(job.latency_ms);
            self.commit_slow_job(job.query.clone(), job.text.clone());
        }
        step
    }

    /// Drain the queue to completion. Worker-step semantics, no scheduling.
    pub fn drain_slow_queue(&self) {
        loop {
            if matches!(self.slow_worker_step(), SlowStep::Empty) {
                return;
            }
        }
    }

    pub fn stats(&self) -> StatsSnapshot {
        StatsSnapshot {
            requests: self.stats.requests.load(Ordering::Relaxed),
            cache_hits: self.stats.cache_hits.load(Ordering::Relaxed),
            fast_served: self.stats.fast_served.load(Ordering::Relaxed),
            fast_errors: self.stats.fast_errors.load(Ordering::Relaxed),
            slow_completions: self.stats.slow_completions.load(Ordering::Relaxed),
            queue_drops: self.stats.queue_drops.load(Ordering::Relaxed),
            retry_drops: self.stats.retry_drops.load(Ordering::Relaxed),
            evictions: self.stats.evictions.load(Ordering::Relaxed),
            latency_histogram: self.latency.snapshot(),
        }
    }

    /// Zero all counters (used between warm-up and measurement passes).
    pub fn reset_stats(&self) {
        for counter in [
            &self.stats.requests,
            &self.stats.cache_hits,
            &self.stats.fast_served,
            &self.stats.fast_errors,
            &self.stats.slow_completions,
            &self.stats.queue_drops,
            &self.stats.retry_drops,
            &self.stats.evictions,
        ] {
            counter.store(0, Ordering::Relaxed);
        }
        self.latency.reset();
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn fast_backend(&self) -> Arc<dyn Translator> {
        Arc::clone(&self.fast)
    }

    pub fn slow_backend(&self) -> Arc<dyn Translator> {
        Arc::clone(&self.slow)
    }

    pub fn cache_len(&self) -> usize {
        self.inner.lock().cache.len()
    }

    pub fn queue_len(&self) -> usize {
        self.inner.lock().queue.len()
    }

    /// Cached (query, translation) pairs from least- to most-recently used.
    pub fn cache_contents(&self) -> Vec<(NormalizedQuery, String)> {
        let inner = self.inner.lock();
        let mut entries: Vec<(NormalizedQuery, String)> = inner
            .cache
            .iter()
            .map(|(q, e)| (q.clone(), e.translation.clone()))
            .collect();
        entries.reverse();
        entries
    }

    /// How often `query` has been evicted (requires `track_evictions`).
    pub fn eviction_count(&self, query: &NormalizedQuery) -> u64 {
        self.inner
            .lock()
            .eviction_counts
            .get(query)
            .copied()
            .unwrap_or(0)
    }

    /// Write the cache as `query \t translation` lines, least-recently
    /// used first so restoring preserves recency order.
    pub fn snapshot_to<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        for (query, translation) in self.cache_contents() {
            writeln!(w, "{query}\t{translation}")?;
        }
        Ok(())
    }

    pub fn snapshot_to_path(&self, path: &Path) -> Result<(), SnapshotError> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.snapshot_to(&mut file)?;
        use std::io::Write;
        file.flush()?;
        Ok(())
    }

    /// Load a snapshot into the cache. Entry timestamps are reset to now.
    /// Returns the number of entries loaded.
    pub fn restore_from_path(&self, path: &Path) -> Result<usize, SnapshotError> {
        let bytes = std::fs::read(path)?;
        let text = String::from_utf8(bytes).map_err(|_| SnapshotError::Corrupt {
            line: 0,
            reason: "not valid UTF-8".into(),
        })?;
        let mut entries = Vec::new();
        for (idx, line) in text.split('\n').enumerate() {
            if line.is_empty() {
                continue;
            }
            let corrupt = |reason: &str| SnapshotError::Corrupt {
                line: idx + 1,
                reason: reason.to_string(),
            };
            let (q, t) = line
                .split_once('\t')
                .ok_or_else(|| corrupt("missing tab"))?;
            if t.is_empty() || t.contains('\t') {
                return Err(corrupt("bad translation field"));
            }
            let query = normalize(q).map_err(|_| corrupt("empty query"))?;
            if query.as_str() != q {
                return Err(corrupt("query is not in canonical form"));
            }
            entries.push((query, t.to_string()));
        }
        let now = self.clock.now_ms();
        let mut inner = self.inner.lock();
        let count = entries.len();
        for (query, translation) in entries {
            inner.cache.push(
                query,
                CacheEntry {
                    translation,
                    inserted_at_ms: now,
                },
            );
        }
        Ok(count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::VirtualClock;
    use crate::translators::{LatencyModel, SimTranslator, TranslatorSpec};
    use std::collections::HashMap;

    fn q(text: &str) -> NormalizedQuery {
        normalize(text).unwrap()
    }

    fn table(entries: &[(&str, &str)]) -> HashMap<NormalizedQuery, String> {
        entries.iter().map(|(k, v)| (q(k), v.to_string())).collect()
    }

    fn demo_gateway(config: GatewayConfig) -> (Gateway, Arc<VirtualClock>) {
        let fast = SimTranslator::new(
            TranslatorSpec::new(
                "fast",
                LatencyModel::Fixed { ms: 10.0 },
                table(&[("dítě rýma", "fever")]),
                crate::translators::Fallback::Echo,
            )
            .unwrap(),
            1,
        );
        let slow = SimTranslator::new(
            TranslatorSpec::new(
                "slow",
                LatencyModel::Fixed { ms: 150.0 },
                table(&[("dítě rýma", "runny nose")]),
                crate::translators::Fallback::Echo,
            )
            .unwrap(),
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
    fn miss_then_upgrade_to_cache() {
        let (gw, _clock) = demo_gateway(GatewayConfig::default());
        let first = gw.handle("Dítě  Rýma").unwrap();
        assert_eq!(first.text, "fever");
        assert_eq!(first.source, Provenance::Fast);
        assert_eq!(first.latency_ms, 10.0);

        assert!(matches!(gw.slow_worker_step(), SlowStep::Started(_)));

        let second = gw.handle("dítě rýma").unwrap();
        assert_eq!(second.text, "runny nose");
        assert_eq!(second.source, Provenance::Cache);
        assert_eq!(second.latency_ms, 0.0);
    }

    #[test]
    fn duplicate_requests_deduplicate_slow_work() {
        let (gw, _clock) = demo_gateway(GatewayConfig::default());
        gw.handle("kočka").unwrap();
        gw.handle("kočka").unwrap();
        gw.handle("kočka").unwrap();
        assert_eq!(gw.queue_len(), 1);
        gw.drain_slow_queue();
        let slow_calls = {
            // The slow backend saw exactly one invocation.
            let stats = gw.stats();
            assert_eq!(stats.slow_completions, 1);
            stats.slow_completions
        };
        assert_eq!(slow_calls, 1);
        // After completion the mark is cleared but the cache now holds it,
        // so another request stays cache-served and enqueues nothing.
        gw.handle("kočka").unwrap();
        assert_eq!(gw.queue_len(), 0);
    }

    #[test]
    fn fast_result_never_cached() {
        let (gw, _clock) = demo_gateway(GatewayConfig::default());
        gw.handle("dítě rýma").unwrap();
        assert_eq!(gw.cache_len(), 0);
        gw.drain_slow_queue();
        let contents = gw.cache_contents();
        assert_eq!(contents.len(), 1);
        assert_eq!(contents[0].1, "runny nose");
    }

    #[test]
    fn retry_exhaustion_drops_and_counts() {
        let fast = SimTranslator::new(
            TranslatorSpec::echo("fast", LatencyModel::Fixed { ms: 10.0 }),
            1,
        );
        let slow = SimTranslator::new(
            TranslatorSpec::echo("slow", LatencyModel::Fixed { ms: 150.0 }),
            2,
        )
        .fail_next(2);
        let clock = Arc::new(VirtualClock::new());
        let gw = Gateway::new(
            Arc::new(fast),
            Arc::new(slow),
            clock as Arc<dyn Clock>,
            GatewayConfig {
                slow_retry_limit: 1,
                ..GatewayConfig::default()
            },
        )
        .unwrap();
        gw.handle("hello").unwrap();
        assert!(matches!(gw.slow_worker_step(), SlowStep::Dropped { .. }));
        let stats = gw.stats();
        assert_eq!(stats.retry_drops, 1);
        assert_eq!(stats.slow_completions, 0);
        assert_eq!(gw.cache_len(), 0);
        // Next miss re-enqueues the dropped query.
        gw.handle("hello").unwrap();
        assert_eq!(gw.queue_len(), 1);
    }

    #[test]
    fn lru_eviction_at_capacity() {
        let (gw, _clock) = demo_gateway(GatewayConfig {
            cache_capacity: 2,
            track_evictions: true,
            ..GatewayConfig::default()
        });
        for query in ["a", "b", "c"] {
            gw.handle(query).unwrap();
            gw.drain_slow_queue();
        }
        assert_eq!(gw.cache_len(), 2);
        // "a" was least recently used.
        assert_eq!(gw.eviction_count(&q("a")), 1);
        assert_eq!(gw.handle("b").unwrap().source, Provenance::Cache);
        assert_eq!(gw.handle("c").unwrap().source, Provenance::Cache);
        assert_eq!(gw.handle("a").unwrap().source, Provenance::Fast);
    }

    #[test]
    fn queue_overflow_rejects_newest_and_recovers() {
        let (gw, _clock) = demo_gateway(GatewayConfig {
            queue_capacity: 2,
            ..GatewayConfig::default()
        });
        gw.handle("a").unwrap();
        gw.handle("b").unwrap();
        gw.handle("c").unwrap(); // dropped: queue full
        assert_eq!(gw.stats().queue_drops, 1);
        assert_eq!(gw.queue_len(), 2);
        gw.drain_slow_queue();
        // The dropped query re-enqueues on its next miss.
        gw.handle("c").unwrap();
        assert_eq!(gw.queue_len(), 1);
    }

    #[test]
    fn fast_failure_propagates_as_error() {
        let fast = SimTranslator::new(
            TranslatorSpec::echo("fast", LatencyModel::Fixed { ms: 10.0 }),
            1,
        )
        .fail_next(1);
        let slow = SimTranslator::new(
            TranslatorSpec::echo("slow", LatencyModel::Fixed { ms: 150.0 }),
            2,
        );
        let clock = Arc::new(VirtualClock::new());
        let gw = Gateway::new(
            Arc::new(fast),
            Arc::new(slow),
            clock as Arc<dyn Clock>,
            GatewayConfig::default(),
        )
        .unwrap();
        assert!(matches!(
            gw.handle("hello"),
            Err(GatewayError::FastBackendUnavailable)
        ));
        let stats = gw.stats();
        assert_eq!(stats.requests, 1);
        assert_eq!(stats.fast_errors, 1);
        assert_eq!(
            stats.cache_hits + stats.fast_served + stats.fast_errors,
            stats.requests
        );
        // The query still reached the slow queue; the cache heals.
        gw.drain_slow_queue();
        assert_eq!(gw.handle("hello").unwrap().source, Provenance::Cache);
    }

    #[test]
    fn invalid_query_rejected() {
        let (gw, _clock) = demo_gateway(GatewayConfig::default());
        assert!(matches!(gw.handle("   "), Err(GatewayError::InvalidQuery)));
    }

    #[test]
    fn snapshot_round_trip() {
        let (gw, _clock) = demo_gateway(GatewayConfig::default());
        for query in ["a b", "dítě rýma", "c"] {
            gw.handle(query).unwrap();
            gw.drain_slow_queue();
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.snapshot");
        gw.snapshot_to_path(&path).unwrap();

        let (restored, _clock) = demo_gateway(GatewayConfig::default());
        assert_eq!(restored.restore_from_path(&path).unwrap(), 3);
        assert_eq!(restored.cache_contents(), gw.cache_contents());
    }

    #[test]
    fn snapshot_empty_round_trip() {
        let (gw, _clock) = demo_gateway(GatewayConfig::default());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.snapshot");
        gw.snapshot_to_path(&path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap().len(), 0);
        let (restored, _clock) = demo_gateway(GatewayConfig::default());
        assert_eq!(restored.restore_from_path(&path).unwrap(), 0);
        assert_eq!(restored.cache_len(), 0);
    }

    #[test]
    fn truncated_snapshot_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.snapshot");
        std::fs::write(&path, "a\tb\ntruncated-no-ta").unwrap();
        let (gw, _clock) = demo_gateway(GatewayConfig::default());
        assert!(matches!(
            gw.restore_from_path(&path),
            Err(SnapshotError::Corrupt { line: 2, .. })
        ));
    }

    #[test]
    fn handle_latency_independent_of_slow_model() {
        // With an absurdly slow backend, first-pass handle latencies are
        // identical to the 150ms-slow configuration.
        let build = |slow_ms: f64| {
            let fast = SimTranslator::new(
                TranslatorSpec::echo("fast", LatencyModel::Fixed { ms: 10.0 }),
                1,
            );
            let slow = SimTranslator::new(
                TranslatorSpec::echo("slow", LatencyModel::Fixed { ms: slow_ms }),
                2,
            );
            let clock = Arc::new(VirtualClock::new());
            Gateway::new(
                Arc::new(fast),
                Arc::new(slow),
                clock as Arc<dyn Clock>,
                GatewayConfig::default(),
            )
            .unwrap()
        };
        let normal = build(150.0);
        let glacial = build(1_000_000.0);
        let queries: Vec<String> = (0..50).map(|i| format!("q{i}")).collect();
        let lat_a: Vec<f64> = queries
            .iter()
            .map(|s| normal.handle(s).unwrap().latency_ms)
            .collect();
        let lat_b: Vec<f64> = queries
            .iter()
            .map(|s| glacial.handle(s).unwrap().latency_ms)
            .collect();
        assert_eq!(lat_a, lat_b);
    }
}
