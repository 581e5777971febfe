//! Node-local forwarding engine and the simulated network it runs in.
//!
//! [`Forwarder`] is pure: it consumes one packet and returns the effects
//! (transmissions and drops). [`sim::Sim`] owns the clock, links, adversaries
//! and applications and turns those effects into scheduled deliveries.

pub mod adversary;
pub mod cs;
pub mod fib;
pub mod log;
pub mod pit;
pub mod sim;

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::name::Name;
use crate::packet::{ContentObject, Interest, Packet};

pub use cs::ContentStore;
pub use fib::Fib;
pub use pit::{Pit, PitEntry, PitOutcome};

pub type FaceId = u32;

/// The face connecting a node's forwarder to its local application.
pub const LOCAL_FACE: FaceId = 0;

/// Lets routers check acks without keys. `tag` runs when a PIT entry is
/// created and extracts whatever the check needs from the interest name;
/// `check` runs on content before it may satisfy that entry.
pub trait AckGuard: Send + Sync {
    fn tag(&self, interest_name: &Name) -> Option<Vec<u8>>;
    fn check(&self, tag: &[u8], content: &ContentObject) -> bool;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    NoRoute,
    Unsolicited,
    GuardRejected,
    Malformed,
    LinkLoss,
    Adversary,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::NoRoute => "no_route",
            DropReason::Unsolicited => "unsolicited",
            DropReason::GuardRejected => "guard_rejected",
            DropReason::Malformed => "malformed",
            DropReason::LinkLoss => "link_loss",
            DropReason::Adversary => "adversary",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Effect {
    Send { face: FaceId, packet: Packet },
    Drop { reason: DropReason },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counters {
    pub cs_hits: u64,
    pub collapsed: u64,
    pub retransmissions: u64,
    pub no_route: u64,
    pub unsolicited: u64,
    pub guard_rejected: u64,
}

#[derive(Clone, Default)]
pub struct Forwarder {
    pub pit: Pit,
    pub fib: Fib,
    pub cs: ContentStore,
    guard: Option<Arc<dyn AckGuard>>,
    pub counters: Counters,
}

impl std::fmt::Debug for Forwarder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Forwarder")
            .field("pit", &self.pit.len())
            .field("cs", &self.cs.len())
            .field("guard", &self.guard.is_some())
            .field("counters", &self.counters)
            .finish()
    }
}

impl Forwarder {
    pub fn new(cs_capacity: usize) -> Self {
        Self {
            cs: ContentStore::new(cs_capacity),
            ..Default::default()
        }
    }

    pub fn set_guard(&mut self, guard: Arc<dyn AckGuard>) {
        self.guard = Some(guard);
    }

    pub fn on_interest(&mut self, face: FaceId, interest: &Interest, now: u64) -> Vec<Effect> {
        if let Some(hit) = self.cs.lookup(&interest.name) {
            self.counters.cs_hits += 1;
            return vec![Effect::Send {
                face,
                packet: Packet::Content(hit.clone()),
            }];
        }
        let Some(upstream) = self.fib.lookup(&interest.name, face) else {
            self.counters.no_route += 1;
            return vec![Effect::Drop {
                reason: DropReason::NoRoute,
            }];
        };
        let guard = self.guard.clone();
        let outcome = self.pit.insert(&interest.name, face, now, interest.lifetime_ms, || {
            guard.and_then(|g| g.tag(&interest.name))
        });
        match outcome {
            PitOutcome::Collapsed => {
                self.counters.collapsed += 1;
                Vec::new()
            }
            PitOutcome::Created | PitOutcome::Retransmission => {
                if outcome == PitOutcome::Retransmission {
                    self.counters.retransmissions += 1;
                }
                vec![Effect::Send {
                    face: upstream,
                    packet: Packet::Interest(interest.clone()),
                }]
            }
        }
    }

    pub fn on_content(&mut self, face: FaceId, content: &ContentObject, now: u64) -> Vec<Effect> {
        let names = self.pit.matching(&content.name, now);
        let mut faces = BTreeSet::new();
        let mut rejected = false;
        for name in names {
            let entry = self.pit.get(&name).expect("matching returns present names");
            let passes = match (&self.guard, &entry.guard_tag) {
                (Some(g), Some(tag)) => g.check(tag, content),
                _ => true,
            };
            if passes {
                let entry = self.pit.remove(&name).expect("present");
                faces.extend(entry.inbound_faces);
            } else {
                rejected = true;
            }
        }
        faces.remove(&face);
        if faces.is_empty() {
            let reason = if rejected {
                self.counters.guard_rejected += 1;
                DropReason::GuardRejected
            } else {
                self.counters.unsolicited += 1;
                DropReason::Unsolicited
            };
            return vec![Effect::Drop { reason }];
        }
        self.cs.insert(content.clone());
        faces
            .into_iter()
            .map(|f| Effect::Send {
                face: f,
                packet: Packet::Content(content.clone()),
            })
            .collect()
    }
}
