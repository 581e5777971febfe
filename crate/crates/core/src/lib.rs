//! Named-data networking core and a secure lighting-control protocol built
//! on it.
//!
//! - [`name`], [`packet`], [`tlv`]: names, interests, content objects and
//!   their canonical wire format.
//! - [`crypto`]: signature schemes and symmetric primitives.
//! - [`forwarder`]: PIT, FIB, content store and a discrete-event network
//!   simulator with scripted adversaries.
//! - [`trust`]: key records, delegation, ownership proofs, name-encoded
//!   attributes and policy.
//! - [`control`]: bootstrap, authenticated command interests, replay state,
//!   key handoff and command privacy.
//! - [`ack_auth`]: authenticated acknowledgments (signature, MAC, encrypted
//!   challenge, hash chain) and retransmission.

pub mod ack_auth;
pub mod control;
pub mod crypto;
pub mod forwarder;
pub mod name;
pub mod packet;
pub mod parallel;
pub mod tlv;
pub mod trust;

pub use crypto::{KeyPair, PublicKey, SchemeTag};
pub use name::Name;
pub use packet::{ContentObject, Interest, Packet, PacketKind};
