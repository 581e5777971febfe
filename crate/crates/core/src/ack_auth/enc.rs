//! Encrypted-challenge acks. The app sends `y = E_k(x)` and `z = H(x)`;
//! the fixture proves it holds `k` by revealing `x`, which any router can
//! check against `z` without keys.

use rand::RngCore;
use thiserror::Error;

use crate::crypto::{aes128_decrypt_block, aes128_encrypt_block, hmac_sha256, sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("decrypted challenge does not hash to z")]
pub struct ChallengeMismatch;

/// `k = HMAC(k_App, "enc-ack")[..16]`.
pub fn enc_key(k_app: &[u8; 32]) -> [u8; 16] {
    hmac_sha256(k_app, b"enc-ack")[..16].try_into().expect("16 bytes")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncChallenge {
    /// Kept by the app; revealed by the fixture in the ack.
    pub x: [u8; 16],
    pub y: [u8; 16],
    pub z: [u8; 32],
}

pub fn enc_challenge_create<R: RngCore + ?Sized>(k: &[u8; 16], rng: &mut R) -> EncChallenge {
    let mut x = [0u8; 16];
    rng.fill_bytes(&mut x);
    EncChallenge {
        x,
        y: aes128_encrypt_block(k, &x),
        z: sha256(&x),
    }
}

/// Fixture side: recover `x` from `y` and check it against `z`.
pub fn enc_challenge_answer(k: &[u8; 16], y: &[u8; 16], z: &[u8; 32]) -> Result<[u8; 16], ChallengeMismatch> {
    let x = aes128_decrypt_block(k, y);
    if &sha256(&x) == z {
        Ok(x)
    } else {
        Err(ChallengeMismatch)
    }
}

/// Router side: does the revealed `x` hash to the `z` remembered in the PIT?
pub fn router_verify_enc_ack(z: &[u8; 32], x: &[u8]) -> bool {
    x.len() == 16 && &sha256(x) == z
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn honest_round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let k = enc_key(&[3; 32]);
        let c = enc_challenge_create(&k, &mut rng);
        assert_eq!(sha256(&c.x), c.z);
        assert_eq!(aes128_decrypt_block(&k, &c.y), c.x);
        let x = enc_challenge_answer(&k, &c.y, &c.z).unwrap();
        assert_eq!(x, c.x);
        assert!(router_verify_enc_ack(&c.z, &x));
    }

    #[test]
    fn tampered_z_aborts() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let k = enc_key(&[3; 32]);
        let c = enc_challenge_create(&k, &mut rng);
        let mut z = c.z;
        z[0] ^= 1;
        assert_eq!(enc_challenge_answer(&k, &c.y, &z), Err(ChallengeMismatch));
    }

    #[test]
    fn stale_x_fails_new_z() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let k = enc_key(&[3; 32]);
        let old = enc_challenge_create(&k, &mut rng);
        let new = enc_challenge_create(&k, &mut rng);
        assert!(!router_verify_enc_ack(&new.z, &old.x));
        assert!(!router_verify_enc_ack(&new.z, &new.x[..15]));
    }
}
