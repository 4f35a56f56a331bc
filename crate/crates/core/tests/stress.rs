//! Threaded wall-clock stress harness: many handle() callers racing real
//! slow-worker threads, with a tight cache forcing evictions and injected
//! slow failures. The gateway's counters and invariants must survive.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use parking_lot::Mutex;

use qtgate_core::clickstream::{normalize, NormalizedQuery};
use qtgate_core::clock::{Clock, WallClock};
use qtgate_core::gateway::{Gateway, GatewayConfig, SlowStep};
use qtgate_core::translators::{
    BackendUnavailable, LatencyModel, SimTranslator, Translated, Translator, TranslatorSpec,
};

struct CountingSlow {
    inner: SimTranslator,
    attempts: Mutex<HashMap<String, u64>>,
}

impl Translator for CountingSlow {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn translate(&self, query: &NormalizedQuery) -> Result<Translated, BackendUnavailable> {
        *self
            .attempts
            .lock()
            .entry(query.as_str().to_string())
            .or_insert(0) += 1;
        self.inner.translate(query)
    }
}

#[test]
fn concurrent_handles_and_workers_hold_invariants() {
    const HANDLE_THREADS: usize = 8;
    const WORKER_THREADS: usize = 3;
    const REQUESTS_PER_THREAD: usize = 3_000;
    const POOL: usize = 40;
    const RETRY_LIMIT: u32 = 1;

    let fast = SimTranslator::new(
        TranslatorSpec::echo("fast", LatencyModel::Fixed { ms: 0.0 }),
        1,
    );
    let slow = Arc::new(CountingSlow {
        inner: SimTranslator::new(
            TranslatorSpec::echo("slow", LatencyModel::Fixed { ms: 0.0 }),
            2,
        )
        .fail_randomly(0.3),
        attempts: Mutex::new(HashMap::new()),
    });
    let gateway = Arc::new(
        Gateway::new(
            Arc::new(fast),
            Arc::clone(&slow) as Arc<dyn Translator>,
            Arc::new(WallClock::new()) as Arc<dyn Clock>,
            GatewayConfig {
                cache_capacity: 8,
                queue_capacity: 16,
                slow_retry_limit: RETRY_LIMIT,
                worker_count: WORKER_THREADS,
                track_evictions: true,
                ..GatewayConfig::default()
            },
        )
        .unwrap(),
    );

    let stop = Arc::new(AtomicBool::new(false));
    let drops: Arc<Mutex<HashMap<String, u64>>> = Arc::new(Mutex::new(HashMap::new()));
    let completions: Arc<Mutex<HashMap<String, u64>>> = Arc::new(Mutex::new(HashMap::new()));

    let mut workers = Vec::new();
    for _ in 0..WORKER_THREADS {
        let gateway = Arc::clone(&gateway);
        let stop = Arc::clone(&stop);
        let drops = Arc::clone(&drops);
        let completions = Arc::clone(&completions);
        workers.push(std::thread::spawn(move || loop {
            match gateway.begin_slow_job() {
                SlowStep::Started(job) => {
                    *completions
                        .lock()
                        .entry(job.query.as_str().to_string())
                        .or_insert(0) += 1;
                    gateway.commit_slow_job(job.query, job.text);
                }
                SlowStep::Dropped { query } => {
                    *drops.lock().entry(query.as_str().to_string()).or_insert(0) += 1;
                }
                SlowStep::Empty => {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    std::thread::yield_now();
                }
            }
        }));
    }

    let mut callers = Vec::new();
    for thread_id in 0..HANDLE_THREADS {
        let gateway = Arc::clone(&gateway);
        callers.push(std::thread::spawn(move || {
            // Cheap deterministic per-thread sequence over the query pool.
            let mut state = thread_id as u64 + 1;
            for _ in 0..REQUESTS_PER_THREAD {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                let query = format!("query {}", (state >> 33) as usize % POOL);
                let result = gateway.handle(&query).expect("fast path has no faults");
                assert_eq!(result.latency_ms, 0.0);
            }
        }));
    }
    for caller in callers {
        caller.join().unwrap();
    }
    stop.store(true, Ordering::SeqCst);
    for worker in workers {
        worker.join().unwrap();
    }

    let stats = gateway.stats();
    assert_eq!(
        stats.requests,
        (HANDLE_THREADS * REQUESTS_PER_THREAD) as u64
    );
    assert_eq!(stats.fast_errors, 0);
    assert_eq!(
        stats.requests,
        stats.cache_hits + stats.fast_served,
        "conservation must hold under concurrency"
    );
    assert!(gateway.queue_len() <= 16);

    // Cache provenance: the slow backend is an echo, so every cached
    // translation equals its query.
    for (query, text) in gateway.cache_contents() {
        assert_eq!(query.as_str(), text);
    }

    // Dedup: per query, completions never exceed first-sight plus
    // evictions, and attempts stay within the per-episode retry budget.
    let drops = drops.lock();
    let completions = completions.lock();
    let attempts = slow.attempts.lock();
    for (query, n_attempts) in attempts.iter() {
        let q = normalize(query).unwrap();
        let episodes = 1 + gateway.eviction_count(&q) + drops.get(query).copied().unwrap_or(0);
        assert!(
            *n_attempts <= episodes * (1 + RETRY_LIMIT) as u64,
            "{query:?}: {n_attempts} attempts > {episodes} episodes x {}",
            1 + RETRY_LIMIT
        );
        if let Some(completed) = completions.get(query) {
            assert!(
                *completed <= 1 + gateway.eviction_count(&q),
                "{query:?}: completed {completed} times"
            );
        }
    }
    let total_completions: u64 = completions.values().sum();
    assert_eq!(total_completions, stats.slow_completions);
}
