//! Pending interest table.

use std::collections::{BTreeMap, BTreeSet};

use crate::name::Name;

use super::FaceId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PitEntry {
    pub name: Name,
    pub inbound_faces: BTreeSet<FaceId>,
    pub created_at: u64,
    pub expires_at: u64,
    /// Opaque state an [`super::AckGuard`] extracted from the interest name.
    pub guard_tag: Option<Vec<u8>>,
}

impl PitEntry {
    pub fn is_live(&self, now: u64) -> bool {
        now < self.expires_at
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PitOutcome {
    /// No live entry existed; one was created and the interest must be forwarded.
    Created,
    /// A live entry existed and the face was added; do not forward.
    Collapsed,
    /// The face was already recorded; the requester is retransmitting, so the
    /// interest is forwarded again.
    Retransmission,
}

#[derive(Debug, Clone, Default)]
pub struct Pit {
    entries: BTreeMap<Name, PitEntry>,
}

impl Pit {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &Name) -> Option<&PitEntry> {
        self.entries.get(name)
    }

    pub fn entries(&self) -> impl Iterator<Item = &PitEntry> {
        self.entries.values()
    }

    /// Records an interest. `guard_tag` is only evaluated for new entries.
    pub fn insert(
        &mut self,
        name: &Name,
        face: FaceId,
        now: u64,
        lifetime_ms: u32,
        guard_tag: impl FnOnce() -> Option<Vec<u8>>,
    ) -> PitOutcome {
        let expires_at = now + u64::from(lifetime_ms.max(1));
        if let Some(entry) = self.entries.get_mut(name) {
            if entry.is_live(now) {
                entry.expires_at = entry.expires_at.max(expires_at);
                return if entry.inbound_faces.insert(face) {
                    PitOutcome::Collapsed
                } else {
                    PitOutcome::Retransmission
                };
            }
        }
        self.entries.insert(
            name.clone(),
            PitEntry {
                name: name.clone(),
                inbound_faces: BTreeSet::from([face]),
                created_at: now,
                expires_at,
                guard_tag: guard_tag(),
            },
        );
        PitOutcome::Created
    }

    /// Live entries whose name is a prefix of (or equal to) `content_name`,
    /// shortest first. Expired entries met on the way are purged.
    pub fn matching(&mut self, content_name: &Name, now: u64) -> Vec<Name> {
        let mut out = Vec::new();
        for n in 0..=content_name.len() {
            let prefix = content_name.prefix(n);
            match self.entries.get(&prefix) {
                Some(e) if e.is_live(now) => out.push(prefix),
                Some(_) => {
                    self.entries.remove(&prefix);
                }
                None => {}
            }
        }
        out
    }

    pub fn remove(&mut self, name: &Name) -> Option<PitEntry> {
        self.entries.remove(name)
    }

    /// Drops every expired entry; returns how many were removed.
    pub fn purge(&mut self, now: u64) -> usize {
        let before = self.entries.len();
        self.entries.retain(|_, e| e.is_live(now));
        before - self.entries.len()
    }
}
