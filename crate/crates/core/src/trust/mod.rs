//! Trust model: namespace-bound keys, delegation, ownership proofs, and
//! attribute-based policy.

pub mod attributes;
pub mod keys;
pub mod ownership;
pub mod policy;

pub use attributes::{parse_attributes, parse_attributes_under, Access, Attr, AttributeSet};
pub use keys::{key_name, publish_key, KeyRecord, Signer, TrustError, TrustRoot};
pub use ownership::{check_ownership, decode_path, encode_path, prove_ownership, verify_ownership, NonceBook, OwnershipProof, ProofFailure};
pub use policy::{evaluate_policy, Acl, CommandRegistry, Decision, DenyReason, PermissionClass};
