//! Wall-clock and virtual time sources.
//!
//! Everything that accounts for latency takes a [`Clock`] so tests and the
//! load simulator run on deterministic virtual time while the live service
//! runs on real time.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

/// A monotonic time source measured in milliseconds.
pub trait Clock: Send + Sync {
    /// Current time in milliseconds since the clock's origin.
    fn now_ms(&self) -> f64;

    /// Block for `ms` milliseconds of this clock's time.
    ///
    /// On a [`VirtualClock`] this is a no-op: the simulation engine owns
    /// time and advances it explicitly between events.
    fn sleep_ms(&self, ms: f64);
}

/// Real time, anchored at construction.
pub struct WallClock {
    start: Instant,
}

impl WallClock {
    pub fn new() -> Self {
        Self {
            start: Instant::now(),
        }
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn now_ms(&self) -> f64 {
        self.start.elapsed().as_secs_f64() * 1000.0
    }

    fn sleep_ms(&self, ms: f64) {
        if ms > 0.0 {
            std::thread::sleep(Duration::from_secs_f64(ms / 1000.0));
        }
    }
}

/// Deterministic simulated time, advanced explicitly by the event loop.
///
/// Time is stored as integer microseconds so event ordering is exact.
pub struct VirtualClock {
    now_us: AtomicU64,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self {
            now_us: AtomicU64::new(0),
        }
    }

    pub fn now_us(&self) -> u64 {
        self.now_us.load(Ordering::Acquire)
    }

    /// Move time forward to `t_us`. Moving backwards is a bug in the caller.
    pub fn advance_to_us(&self, t_us: u64) {
        let prev = self.now_us.swap(t_us, Ordering::AcqRel);
        debug_assert!(prev <= t_us, "virtual clock moved backwards");
    }

    pub fn advance_ms(&self, ms: f64) {
        self.now_us.fetch_add(ms_to_us(ms), Ordering::AcqRel);
    }
}

impl Default for VirtualClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for VirtualClock {
    fn now_ms(&self) -> f64 {
        self.now_us() as f64 / 1000.0
    }

    fn sleep_ms(&self, _ms: f64) {}
}

/// Convert a millisecond latency to integer microseconds (round-to-nearest).
pub fn ms_to_us(ms: f64) -> u64 {
    (ms * 1000.0).round().max(0.0) as u64
}
