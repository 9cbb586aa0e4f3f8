//! Global operation counters.
//!
//! Two monotonic counters back the cost accounting in the benchmark command
//! and a handful of tests: one for protocol-level modular exponentiations
//! (the blinding/agreement function itself, not the primality tester's
//! internal arithmetic) and one for totient computations that had to fall
//! back to trial-division factoring.
//!
//! The counters are process-global atomics. Measure deltas around a region,
//! and keep concurrent callers of the counted operations out of that region
//! while measuring.

use core::sync::atomic::{AtomicU64, Ordering};

static MODEXP_CALLS: AtomicU64 = AtomicU64::new(0);
static FACTORING_CALLS: AtomicU64 = AtomicU64::new(0);

pub(crate) fn count_modexp() {
    MODEXP_CALLS.fetch_add(1, Ordering::Relaxed);
}

pub(crate) fn count_factoring() {
    FACTORING_CALLS.fetch_add(1, Ordering::Relaxed);
}

/// Total protocol modular exponentiations since process start.
pub fn modexp_calls() -> u64 {
    MODEXP_CALLS.load(Ordering::Relaxed)
}

/// Total totient evaluations that resorted to trial-division factoring.
pub fn factoring_calls() -> u64 {
    FACTORING_CALLS.load(Ordering::Relaxed)
}
