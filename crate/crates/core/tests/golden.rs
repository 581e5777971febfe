//! Frozen byte vectors. Regenerate with `LUMEN_BLESS=1 cargo test --test golden`
//! only when a wire format changes on purpose.

use std::path::PathBuf;

use lumen_core::ack_auth::{enc_key, iterate};
use lumen_core::control::{build_command, derive_app_key, AckRequest, AppCredentials, AuthMode, ReplayState};
use lumen_core::crypto::aes128_encrypt_block;
use lumen_core::packet::{encode_content, encode_interest};
use lumen_core::{ContentObject, Interest, Name};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn n(s: &str) -> Name {
    Name::parse(s).unwrap()
}

fn check(file: &str, bytes: &[u8]) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../vectors").join(file);
    let got = hex::encode(bytes);
    if std::env::var_os("LUMEN_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, format!("{got}\n")).unwrap();
        return;
    }
    let want = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(got, want.trim(), "{file}");
}

#[test]
fn empty_interest() {
    let i = Interest {
        name: Name::new(),
        nonce: [0; 8],
        lifetime_ms: 4000,
    };
    check("empty_interest.hex", &encode_interest(&i));
}

#[test]
fn content_object() {
    let c = ContentObject {
        name: n("/ndn/cnn/news/2011aug20"),
        payload: b"headline".to_vec(),
        key_locator: n("/ndn/cnn/key"),
        signature: vec![0xAB; 4],
        timestamp_ms: 1_313_798_400_000,
    };
    check("content_object.hex", &encode_content(&c));
}

#[test]
fn app_key() {
    check("app_key.hex", &derive_app_key(&[1; 32], &n("/dom/app1")));
}

#[test]
fn mac_command_name() {
    let creds = AppCredentials {
        name_app: n("/dom/app1"),
        keypair: None,
        k_app: Some(derive_app_key(&[1; 32], &n("/dom/app1"))),
    };
    let state = ReplayState::at(7, 1_700_000_000_123, 25);
    let mut rng = ChaCha20Rng::seed_from_u64(0);
    let i = build_command(&creds, &n("/dom/fix1"), b"on", false, AuthMode::Mac, state, AckRequest::Mac, 1000, &mut rng).unwrap();
    check("mac_command_name.hex", &i.name.encode());
}

#[test]
fn enc_challenge_block() {
    let x: [u8; 16] = core::array::from_fn(|i| i as u8);
    check("enc_challenge_y.hex", &aes128_encrypt_block(&enc_key(&[7; 32]), &x));
}

#[test]
fn chain_anchor() {
    check("chain_anchor_l3.hex", &iterate(&[0x5a; 32], 3));
}
