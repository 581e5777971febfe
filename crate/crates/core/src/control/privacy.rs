//! Command privacy: the `cmd` component is replaced by ciphertext before
//! the name is built. Sizes are not padded; ciphertext grows by a fixed
//! overhead per mode.
//!
//! - MAC mode: AES-128-GCM under `HMAC(k_App, "cmd-enc")[..16]`.
//! - Signature mode: a random AES-128-GCM key wrapped with RSA-OAEP under
//!   the fixture's public key, followed by the sealed command.

use rand::{CryptoRng, RngCore};

use crate::crypto::{aead_open, aead_seal, hmac_sha256, CryptoError, KeyPair, PublicKey, AEAD_OVERHEAD};

use super::command::AuthMode;

/// Length of an RSA-1024 OAEP block.
pub const WRAPPED_KEY_LEN: usize = 128;

pub fn command_key(k_app: &[u8; 32]) -> [u8; 16] {
    hmac_sha256(k_app, b"cmd-enc")[..16].try_into().expect("16 bytes")
}

/// Fixed ciphertext expansion for `mode`.
pub fn overhead(mode: AuthMode) -> usize {
    match mode {
        AuthMode::Mac => AEAD_OVERHEAD,
        AuthMode::Sig => WRAPPED_KEY_LEN + AEAD_OVERHEAD,
    }
}

pub fn encrypt_command_mac<R: RngCore + ?Sized>(k_app: &[u8; 32], cmd: &[u8], rng: &mut R) -> Vec<u8> {
    aead_seal(&command_key(k_app), rng, cmd)
}

pub fn decrypt_command_mac(k_app: &[u8; 32], ct: &[u8]) -> Result<Vec<u8>, CryptoError> {
    aead_open(&command_key(k_app), ct)
}

pub fn encrypt_command_sig<R: RngCore + CryptoRng>(fix_pk: &PublicKey, cmd: &[u8], rng: &mut R) -> Result<Vec<u8>, CryptoError> {
    let mut key = [0u8; 16];
    rng.fill_bytes(&mut key);
    let mut out = fix_pk.encrypt(rng, &key)?;
    if out.len() != WRAPPED_KEY_LEN {
        return Err(CryptoError::EncryptFailed);
    }
    out.extend_from_slice(&aead_seal(&key, rng, cmd));
    Ok(out)
}

pub fn decrypt_command_sig(fix_kp: &KeyPair, ct: &[u8]) -> Result<Vec<u8>, CryptoError> {
    if ct.len() < WRAPPED_KEY_LEN + AEAD_OVERHEAD {
        return Err(CryptoError::DecryptFailed);
    }
    let (wrapped, sealed) = ct.split_at(WRAPPED_KEY_LEN);
    let key: [u8; 16] = fix_kp
        .decrypt(wrapped)?
        .try_into()
        .map_err(|_| CryptoError::DecryptFailed)?;
    aead_open(&key, sealed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::SchemeTag;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn mac_round_trip_and_overhead() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let k = [4u8; 32];
        for len in [0usize, 2, 40] {
            let cmd = vec![b'a'; len];
            let ct = encrypt_command_mac(&k, &cmd, &mut rng);
            assert_eq!(ct.len(), len + overhead(AuthMode::Mac));
            assert_eq!(decrypt_command_mac(&k, &ct).unwrap(), cmd);
            assert!(decrypt_command_mac(&[5; 32], &ct).is_err());
        }
    }

    #[test]
    fn sig_round_trip_and_overhead() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let fix = KeyPair::from_seed(SchemeTag::Rsa1024E3Sha256, 21);
        let ct = encrypt_command_sig(fix.public(), b"on", &mut rng).unwrap();
        assert_eq!(ct.len(), 2 + overhead(AuthMode::Sig));
        assert_eq!(decrypt_command_sig(&fix, &ct).unwrap(), b"on");
        let other = KeyPair::from_seed(SchemeTag::Rsa1024E3Sha256, 22);
        assert_eq!(decrypt_command_sig(&other, &ct), Err(CryptoError::DecryptFailed));
    }
}
