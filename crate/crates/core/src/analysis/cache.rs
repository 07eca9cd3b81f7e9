use std::any::Any;
use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use crate::error::Result;

/// Default memory budget for cached layer operands: 4 GiB.
pub const DEFAULT_MEMORY_BUDGET: usize = 4 << 30;

/// Which derived form of a layer an entry holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub(crate) enum Prep {
    Standardized,
    Regressors,
    /// Truncated SVD basis; carries the threshold's bit pattern.
    Truncated(u64),
    Cka,
    Attention,
    AttnTruncated(u64),
    AttnCka,
}

pub(crate) type Key = (usize, Prep);

struct Entry {
    value: Arc<dyn Any + Send + Sync>,
    bytes: usize,
    last_used: u64,
}

#[derive(Default)]
struct State {
    entries: HashMap<Key, Entry>,
    used: usize,
    tick: u64,
}

/// Counters exposed for tests and diagnostics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub evictions: u64,
}

/// Least-recently-used cache of per-layer operands, bounded by an
/// approximate byte budget. Loads happen outside the lock, so two workers
/// may occasionally load the same entry; the second insert wins.
pub(crate) struct OperandCache {
    budget: usize,
    state: Mutex<State>,
    hits: AtomicU64,
    misses: AtomicU64,
    evictions: AtomicU64,
}

impl OperandCache {
    pub fn new(budget: usize) -> Self {
        OperandCache {
            budget,
            state: Mutex::new(State::default()),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
            evictions: AtomicU64::new(0),
        }
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            evictions: self.evictions.load(Ordering::Relaxed),
        }
    }

    pub fn resident_bytes(&self) -> usize {
        self.state.lock().unwrap().used
    }

    pub fn get_or_load<T, F>(&self, key: Key, load: F) -> Result<Arc<T>>
    where
        T: Any + Send + Sync,
        F: FnOnce() -> Result<(T, usize)>,
    {
        {
            let mut state = self.state.lock().unwrap();
            state.tick += 1;
            let tick = state.tick;
            if let Some(entry) = state.entries.get_mut(&key) {
                entry.last_used = tick;
                if let Ok(value) = entry.value.clone().downcast::<T>() {
                    self.hits.fetch_add(1, Ordering::Relaxed);
                    return Ok(value);
                }
            }
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let (value, bytes) = load()?;
        let value = Arc::new(value);
        if bytes <= self.budget {
            let mut state = self.state.lock().unwrap();
            if let Some(old) = state.entries.remove(&key) {
                state.used -= old.bytes;
            }
            while state.used + bytes > self.budget {
                let victim = state
                    .entries
                    .iter()
                    .min_by_key(|(_, e)| e.last_used)
                    .map(|(k, _)| *k);
                let Some(victim) = victim else { break };
                let old = state.entries.remove(&victim).expect("victim present");
                state.used -= old.bytes;
                self.evictions.fetch_add(1, Ordering::Relaxed);
            }
            state.tick += 1;
            let tick = state.tick;
            state.used += bytes;
            state.entries.insert(
                key,
                Entry {
                    value: value.clone(),
                    bytes,
                    last_used: tick,
                },
            );
        }
        Ok(value)
    }
}
