//! Scenario adversary rules and a key-less ack forger.

use std::sync::Arc;

use rand::{Rng, RngCore};

use lumen_core::ack_auth::AckBody;
use lumen_core::forwarder::adversary::{Action, AdversaryScript, Forger, Match, Rule};
use lumen_core::{ContentObject, Interest, Name};

use crate::config::{parse_kind, ActionCfg, RuleCfg};

/// Fabricates acks of every kind without any key material: random
/// signatures, MAC tags, challenge answers and chain preimages.
#[derive(Debug, Default)]
pub struct FakeAcker;

impl FakeAcker {
    pub fn forge_kind(interest: &Interest, kind: u8, rng: &mut dyn RngCore) -> ContentObject {
        let mut rand32 = || {
            let mut b = [0u8; 32];
            rng.fill_bytes(&mut b);
            b
        };
        let (body, sig) = match kind % 4 {
            0 => (
                AckBody::Signed { status: 0, sync: None },
                [rand32(), rand32(), rand32(), rand32()].concat(),
            ),
            1 => (AckBody::Mac { status: 0 }, rand32().to_vec()),
            2 => (AckBody::EncAnswer, rand32()[..16].to_vec()),
            _ => {
                let (anchor, preimage) = (rand32(), rand32());
                (
                    AckBody::ChainAnswer {
                        anchor,
                        preimage,
                        refill: None,
                    },
                    rand32().to_vec(),
                )
            }
        };
        let mut c = ContentObject::unsigned(interest.name.clone(), body.encode(), Name::new(), 0);
        c.signature = sig;
        c
    }
}

impl Forger for FakeAcker {
    fn forge(&self, interest: &Interest, rng: &mut dyn RngCore) -> Option<ContentObject> {
        let kind = rng.gen::<u8>();
        Some(Self::forge_kind(interest, kind, rng))
    }
}

pub fn rule_from(cfg: &RuleCfg) -> Rule {
    let when = Match {
        kind: cfg.kind.as_deref().and_then(parse_kind),
        prefix: cfg.prefix.as_deref().and_then(|p| Name::parse(p).ok()),
        probability: cfg.probability,
        skip: cfg.skip,
        limit: cfg.limit,
    };
    let action = match cfg.action {
        ActionCfg::Pass => Action::Pass,
        ActionCfg::Drop => Action::Drop,
        ActionCfg::Delay { ms } => Action::Delay { ms },
        ActionCfg::Duplicate { gap_ms } => Action::Duplicate { gap_ms },
        ActionCfg::Replay { after_ms } => Action::Replay { after_ms },
        ActionCfg::ModifyCmd { from } => Action::FlipComponentByte {
            component: -2,
            byte: None,
            from,
            xor: None,
        },
        ActionCfg::ModifyToken => Action::FlipComponentByte {
            component: -1,
            byte: None,
            from: 0,
            xor: None,
        },
        ActionCfg::FlipWire { offset } => Action::FlipWireByte { offset, xor: None },
        ActionCfg::ForgeAck { drop_original } => Action::Forge {
            forger: Arc::new(FakeAcker),
            drop_original,
        },
    };
    Rule::new(when, action)
}

pub fn script_from(rules: &[RuleCfg], seed: u64) -> AdversaryScript {
    AdversaryScript::new(rules.iter().map(rule_from).collect(), seed)
}
