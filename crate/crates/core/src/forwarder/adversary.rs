//! Scripted on-path adversary: ordered match rules over packets crossing a
//! link in one direction.
//!
//! The first rule whose predicate matches decides the packet's fate.
//! Predicates and random choices draw from the script's own seeded RNG, so
//! a run is reproducible from (seed, script, packet sequence).

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::name::Name;
use crate::packet::{decode_packet, encode_packet, ContentObject, Interest, Packet, PacketKind};

/// Produces a fake reply to an interest, as an attacker without keys would.
pub trait Forger: Send + Sync {
    fn forge(&self, interest: &Interest, rng: &mut dyn RngCore) -> Option<ContentObject>;
}

#[derive(Debug, Clone, Default)]
pub struct Match {
    pub kind: Option<PacketKind>,
    pub prefix: Option<Name>,
    /// Chance that an otherwise matching packet is acted on.
    pub probability: Option<f64>,
    /// Let this many matching packets through untouched first.
    pub skip: u32,
    /// Act on at most this many packets.
    pub limit: Option<u32>,
}

#[derive(Clone)]
pub enum Action {
    /// Deliver untouched. Shields matching packets from later rules.
    Pass,
    Drop,
    Delay { ms: u64 },
    Duplicate { gap_ms: u64 },
    /// Deliver the packet, then deliver a recorded copy `after_ms` later.
    Replay { after_ms: u64 },
    /// XOR one byte of the wire encoding. `offset: None` picks one at random.
    FlipWireByte { offset: Option<usize>, xor: Option<u8> },
    /// XOR one byte inside a name component; negative indices count from the
    /// end. A random byte is drawn from `from..len`. Applied to the decoded
    /// packet and re-encoded.
    FlipComponentByte {
        component: i32,
        byte: Option<usize>,
        from: usize,
        xor: Option<u8>,
    },
    /// Inject a forged reply back toward the sender.
    Forge { forger: Arc<dyn Forger>, drop_original: bool },
}

impl fmt::Debug for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Pass => write!(f, "Pass"),
            Action::Drop => write!(f, "Drop"),
            Action::Delay { ms } => write!(f, "Delay({ms})"),
            Action::Duplicate { gap_ms } => write!(f, "Duplicate({gap_ms})"),
            Action::Replay { after_ms } => write!(f, "Replay({after_ms})"),
            Action::FlipWireByte { offset, xor } => write!(f, "FlipWireByte({offset:?}, {xor:?})"),
            Action::FlipComponentByte { component, byte, from, xor } => {
                write!(f, "FlipComponentByte({component}, {byte:?}, {from}, {xor:?})")
            }
            Action::Forge { drop_original, .. } => write!(f, "Forge(drop_original={drop_original})"),
        }
    }
}

impl Action {
    pub fn label(&self) -> &'static str {
        match self {
            Action::Pass => "pass",
            Action::Drop => "drop",
            Action::Delay { .. } => "delay",
            Action::Duplicate { .. } => "duplicate",
            Action::Replay { .. } => "replay",
            Action::FlipWireByte { .. } | Action::FlipComponentByte { .. } => "modify",
            Action::Forge { .. } => "forge",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Rule {
    pub when: Match,
    pub action: Action,
    seen: u32,
    fired: u32,
}

impl Rule {
    pub fn new(when: Match, action: Action) -> Self {
        Self {
            when,
            action,
            seen: 0,
            fired: 0,
        }
    }

    pub fn fired(&self) -> u32 {
        self.fired
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Emission {
    pub bytes: Vec<u8>,
    pub delay_ms: u64,
    /// Sent back toward the transmitting node instead of onward.
    pub reverse: bool,
    /// Set on anything the adversary altered or injected.
    pub tampered: Option<&'static str>,
}

impl Emission {
    fn pass(bytes: &[u8], delay_ms: u64) -> Self {
        Self {
            bytes: bytes.to_vec(),
            delay_ms,
            reverse: false,
            tampered: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdversaryScript {
    rules: Vec<Rule>,
    rng: ChaCha20Rng,
}

impl Default for AdversaryScript {
    fn default() -> Self {
        Self::new(Vec::new(), 0)
    }
}

fn nonzero_xor(xor: Option<u8>, rng: &mut ChaCha20Rng) -> u8 {
    xor.filter(|x| *x != 0).unwrap_or_else(|| rng.gen_range(1..=255))
}

impl AdversaryScript {
    pub fn new(rules: Vec<Rule>, seed: u64) -> Self {
        Self {
            rules,
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha20Rng::seed_from_u64(seed);
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    fn select(&mut self, packet: &Packet) -> Option<Action> {
        for rule in &mut self.rules {
            let m = &rule.when;
            if m.kind.is_some_and(|k| k != packet.kind()) {
                continue;
            }
            if m.prefix.as_ref().is_some_and(|p| !p.is_prefix_of(packet.name())) {
                continue;
            }
            rule.seen += 1;
            if rule.seen <= m.skip || m.limit.is_some_and(|l| rule.fired >= l) {
                continue;
            }
            if let Some(p) = m.probability {
                if !self.rng.gen_bool(p.clamp(0.0, 1.0)) {
                    continue;
                }
            }
            rule.fired += 1;
            return Some(rule.action.clone());
        }
        None
    }

    /// Decides what reaches the far end (and what bounces back) for one
    /// packet. An empty result means the packet vanished.
    pub fn apply(&mut self, packet: &Packet, wire: &[u8]) -> Vec<Emission> {
        let Some(action) = self.select(packet) else {
            return vec![Emission::pass(wire, 0)];
        };
        match action {
            Action::Pass => vec![Emission::pass(wire, 0)],
            Action::Drop => Vec::new(),
            Action::Delay { ms } => vec![Emission {
                tampered: Some("delay"),
                ..Emission::pass(wire, ms)
            }],
            Action::Duplicate { gap_ms } => vec![
                Emission::pass(wire, 0),
                Emission {
                    tampered: Some("duplicate"),
                    ..Emission::pass(wire, gap_ms)
                },
            ],
            Action::Replay { after_ms } => vec![
                Emission::pass(wire, 0),
                Emission {
                    tampered: Some("replay"),
                    ..Emission::pass(wire, after_ms)
                },
            ],
            Action::FlipWireByte { offset, xor } => {
                let mut bytes = wire.to_vec();
                if !bytes.is_empty() {
                    let i = offset.unwrap_or_else(|| self.rng.gen_range(0..bytes.len())) % bytes.len();
                    bytes[i] ^= nonzero_xor(xor, &mut self.rng);
                }
                vec![Emission {
                    tampered: Some("modify"),
                    ..Emission::pass(&bytes, 0)
                }]
            }
            Action::FlipComponentByte { component, byte, from, xor } => {
                let bytes = flip_component(packet, component, byte, from, xor, &mut self.rng).unwrap_or_else(|| wire.to_vec());
                vec![Emission {
                    tampered: Some("modify"),
                    ..Emission::pass(&bytes, 0)
                }]
            }
            Action::Forge { forger, drop_original } => {
                let mut out = Vec::new();
                if !drop_original {
                    out.push(Emission::pass(wire, 0));
                }
                if let Packet::Interest(i) = packet {
                    if let Some(fake) = forger.forge(i, &mut self.rng) {
                        out.push(Emission {
                            bytes: encode_packet(&Packet::Content(fake)),
                            delay_ms: 0,
                            reverse: true,
                            tampered: Some("forge"),
                        });
                    }
                }
                out
            }
        }
    }
}

fn flip_component(
    packet: &Packet,
    component: i32,
    byte: Option<usize>,
    from: usize,
    xor: Option<u8>,
    rng: &mut ChaCha20Rng,
) -> Option<Vec<u8>> {
    let name = packet.name();
    let idx = if component < 0 {
        name.len().checked_sub(component.unsigned_abs() as usize)?
    } else {
        component as usize
    };
    let mut comps = name.components().to_vec();
    let comp = comps.get_mut(idx)?;
    if from >= comp.len() {
        return None;
    }
    let b = byte.unwrap_or_else(|| rng.gen_range(from..comp.len())) % comp.len();
    comp[b] ^= nonzero_xor(xor, rng);
    let new_name = Name::from_components(comps).ok()?;
    let mut p = packet.clone();
    match &mut p {
        Packet::Interest(i) => i.name = new_name,
        Packet::Content(c) => c.name = new_name,
    }
    Some(encode_packet(&p))
}

/// Decodes a wire buffer, for callers that only hold bytes.
pub fn peek(wire: &[u8]) -> Option<Packet> {
    decode_packet(wire).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interest(s: &str) -> Packet {
        Packet::Interest(Interest {
            name: Name::parse(s).unwrap(),
            nonce: [1; 8],
            lifetime_ms: 100,
        })
    }

    #[test]
    fn empty_script_passthrough() {
        let mut s = AdversaryScript::default();
        let p = interest("/a");
        let wire = p.encode();
        assert_eq!(s.apply(&p, &wire), vec![Emission::pass(&wire, 0)]);
    }

    #[test]
    fn drop_all() {
        let mut s = AdversaryScript::new(vec![Rule::new(Match::default(), Action::Drop)], 1);
        for name in ["/a", "/b/c", "/"] {
            let p = interest(name);
            assert!(s.apply(&p, &p.encode()).is_empty());
        }
    }

    #[test]
    fn pass_shields_later_rules() {
        let shield = Match {
            prefix: Some(Name::parse("/a/safe").unwrap()),
            ..Default::default()
        };
        let mut s = AdversaryScript::new(
            vec![Rule::new(shield, Action::Pass), Rule::new(Match::default(), Action::Drop)],
            1,
        );
        let safe = interest("/a/safe/x");
        let wire = safe.encode();
        assert_eq!(s.apply(&safe, &wire), vec![Emission::pass(&wire, 0)]);
        let other = interest("/a/other");
        assert!(s.apply(&other, &other.encode()).is_empty());
    }

    #[test]
    fn skip_and_limit() {
        let rule = Rule::new(
            Match {
                skip: 1,
                limit: Some(1),
                ..Default::default()
            },
            Action::Drop,
        );
        let mut s = AdversaryScript::new(vec![rule], 1);
        let p = interest("/a");
        let kept: Vec<usize> = (0..4).map(|_| s.apply(&p, &p.encode()).len()).collect();
        assert_eq!(kept, vec![1, 0, 1, 1]);
    }

    #[test]
    fn prefix_and_kind_filter() {
        let rule = Rule::new(
            Match {
                kind: Some(PacketKind::Interest),
                prefix: Some(Name::parse("/x").unwrap()),
                ..Default::default()
            },
            Action::Drop,
        );
        let mut s = AdversaryScript::new(vec![rule], 1);
        let a = interest("/a/x");
        assert_eq!(s.apply(&a, &a.encode()).len(), 1);
        let x = interest("/x/a");
        assert!(s.apply(&x, &x.encode()).is_empty());
    }

    #[test]
    fn component_flip_changes_one_component() {
        let rule = Rule::new(
            Match::default(),
            Action::FlipComponentByte {
                component: -1,
                byte: Some(0),
                from: 0,
                xor: Some(0x20),
            },
        );
        let mut s = AdversaryScript::new(vec![rule], 1);
        let p = interest("/a/b");
        let out = s.apply(&p, &p.encode());
        assert_eq!(peek(&out[0].bytes).unwrap().name(), &Name::parse("/a/B").unwrap());
    }

    #[test]
    fn random_flip_respects_from() {
        let rule = Rule::new(
            Match::default(),
            Action::FlipComponentByte {
                component: -1,
                byte: None,
                from: 6,
                xor: None,
            },
        );
        let mut s = AdversaryScript::new(vec![rule], 3);
        for _ in 0..50 {
            let name = Name::from_components([&b"a"[..], b"level/123"]).unwrap();
            let p = Packet::Interest(Interest {
                name,
                nonce: [0; 8],
                lifetime_ms: 1000,
            });
            let out = s.apply(&p, &p.encode());
            let got = peek(&out[0].bytes).unwrap();
            let last = got.name().last().unwrap();
            assert!(last.starts_with(b"level/"));
            assert_ne!(last, b"level/123");
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let mk = || {
            AdversaryScript::new(
                vec![Rule::new(
                    Match {
                        probability: Some(0.5),
                        ..Default::default()
                    },
                    Action::Drop,
                )],
                42,
            )
        };
        let p = interest("/a");
        let w = p.encode();
        let (mut s1, mut s2) = (mk(), mk());
        let r1: Vec<usize> = (0..64).map(|_| s1.apply(&p, &w).len()).collect();
        let r2: Vec<usize> = (0..64).map(|_| s2.apply(&p, &w).len()).collect();
        assert_eq!(r1, r2);
        assert!(r1.contains(&0) && r1.contains(&1));
    }
}
