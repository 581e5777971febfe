//! Authenticated acknowledgments: signed, MAC'd, encrypted-challenge and
//! hash-chain acks, the router-side check for the latter two, and the
//! retransmission loop.

pub mod ack;
pub mod chain;
pub mod enc;
pub mod guard;
pub mod retransmit;

pub use ack::{AckBody, ChainSync};
pub use chain::{chain_verify, iterate, steps_to_anchor, ChainCert, ChainError, HashChain};
pub use enc::{enc_challenge_answer, enc_challenge_create, enc_key, router_verify_enc_ack, EncChallenge};
pub use guard::HashAckGuard;
pub use retransmit::{ack_retransmit_loop, LoopOutcome, RetransmitPolicy, RetransmitState};
