//! Per-application replay state held by a fixture.
//!
//! Each entry keeps the highest accepted sequence number, a bitmap of
//! recently accepted numbers below it (for windows wider than one), and
//! when the application was last heard from. Entries idle longer than the
//! staleness window are dropped.

use std::collections::BTreeMap;

use crate::name::Name;

pub const DEFAULT_STALENESS_MS: u64 = 60_000;
pub const MAX_WINDOW: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplayEntry {
    pub last_seq: u64,
    pub last_seen: u64,
    /// Bit k set: `last_seq - k` was accepted.
    pub seen: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayTable {
    entries: BTreeMap<Name, ReplayEntry>,
    staleness_ms: u64,
    window: u32,
}

impl ReplayTable {
    /// `window = 1` demands strictly increasing sequence numbers; larger
    /// windows also accept unseen numbers up to `window - 1` below the highest.
    pub fn new(staleness_ms: u64, window: u32) -> Self {
        assert!((1..=MAX_WINDOW).contains(&window), "replay window must be 1..=64");
        Self {
            entries: BTreeMap::new(),
            staleness_ms,
            window,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, app: &Name) -> Option<&ReplayEntry> {
        self.entries.get(app)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Name, &ReplayEntry)> {
        self.entries.iter()
    }

    pub fn staleness_ms(&self) -> u64 {
        self.staleness_ms
    }

    /// Would `seq` be fresh for `app`? Does not modify the table.
    pub fn check(&self, app: &Name, seq: u64) -> bool {
        let Some(e) = self.entries.get(app) else {
            return true;
        };
        if seq > e.last_seq {
            return true;
        }
        let back = e.last_seq - seq;
        back < u64::from(self.window) && e.seen & (1u64 << back) == 0
    }

    /// Records an accepted `seq`. Callers check first.
    pub fn commit(&mut self, app: &Name, seq: u64, now: u64) {
        match self.entries.get_mut(app) {
            None => {
                self.entries.insert(
                    app.clone(),
                    ReplayEntry {
                        last_seq: seq,
                        last_seen: now,
                        seen: 1,
                    },
                );
            }
            Some(e) => {
                if seq > e.last_seq {
                    let shift = seq - e.last_seq;
                    e.seen = if shift >= 64 { 0 } else { e.seen << shift };
                    e.seen |= 1;
                    e.last_seq = seq;
                } else {
                    e.seen |= 1u64 << (e.last_seq - seq);
                }
                e.last_seen = now;
            }
        }
    }

    /// Removes entries idle for longer than the staleness window.
    pub fn evict_stale(&mut self, now: u64) -> usize {
        let before = self.entries.len();
        let ttl = self.staleness_ms;
        self.entries.retain(|_, e| now.saturating_sub(e.last_seen) <= ttl);
        before - self.entries.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(s: &str) -> Name {
        Name::parse(s).unwrap()
    }

    #[test]
    fn strict_window() {
        let mut t = ReplayTable::new(DEFAULT_STALENESS_MS, 1);
        assert!(t.check(&n("/a"), 5));
        t.commit(&n("/a"), 5, 0);
        assert!(!t.check(&n("/a"), 5));
        assert!(!t.check(&n("/a"), 4));
        assert!(t.check(&n("/a"), 6));
        assert!(t.check(&n("/b"), 1));
    }

    #[test]
    fn wide_window_accepts_reordered_once() {
        let mut t = ReplayTable::new(DEFAULT_STALENESS_MS, 4);
        t.commit(&n("/a"), 10, 0);
        assert!(t.check(&n("/a"), 8));
        t.commit(&n("/a"), 8, 0);
        assert!(!t.check(&n("/a"), 8));
        assert!(t.check(&n("/a"), 9));
        assert!(!t.check(&n("/a"), 6));
        t.commit(&n("/a"), 100, 0);
        assert!(!t.check(&n("/a"), 10));
    }

    #[test]
    fn eviction() {
        let mut t = ReplayTable::new(1000, 1);
        assert_eq!(t.evict_stale(0), 0);
        t.commit(&n("/old"), 1, 0);
        t.commit(&n("/new"), 1, 900);
        assert_eq!(t.evict_stale(1500), 1);
        assert!(t.get(&n("/new")).is_some());
        assert!(t.get(&n("/old")).is_none());
    }
}
