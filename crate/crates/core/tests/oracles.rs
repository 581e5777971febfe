use std::collections::HashSet;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use lumen_core::ack_auth::{enc_challenge_answer, enc_challenge_create, enc_key, router_verify_enc_ack};
use lumen_core::control::{authorize_app, build_command, AckRequest, AppCredentials, AuthMode, Grant, ReplayState};
use lumen_core::crypto::{aes128_decrypt_block, sha256, sign_content, verify_content};
use lumen_core::trust::policy::{DenyReason, PermissionClass};
use lumen_core::trust::{evaluate_policy, parse_attributes, publish_key, Access, Decision, Signer};
use lumen_core::{ContentObject, KeyPair, Name, SchemeTag};

fn n(s: &str) -> Name {
    Name::parse(s).unwrap()
}

#[test]
fn every_payload_byte_is_covered_by_the_signature() {
    let kp = KeyPair::from_seed(SchemeTag::Rsa1024E3Sha256, 3);
    let payload: Vec<u8> = (0..64).collect();
    let obj = sign_content(&kp, ContentObject::unsigned(n("/dom/obj"), payload, n("/dom/key"), 0)).unwrap();
    assert!(verify_content(kp.public(), &obj).unwrap());
    for i in 0..64 {
        let mut bad = obj.clone();
        bad.payload[i] ^= 0x01;
        assert!(!verify_content(kp.public(), &bad).unwrap(), "byte {i}");
    }
}

#[test]
fn wrong_key_never_opens_the_challenge() {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    for _ in 0..10_000 {
        let mut k = [0u8; 16];
        let mut k2 = [0u8; 16];
        rng.fill_bytes(&mut k);
        rng.fill_bytes(&mut k2);
        let c = enc_challenge_create(&k, &mut rng);
        assert_eq!(aes128_decrypt_block(&k, &c.y), c.x);
        assert_ne!(sha256(&aes128_decrypt_block(&k2, &c.y)), c.z);
        assert!(enc_challenge_answer(&k2, &c.y, &c.z).is_err());
    }
}

#[test]
fn every_tampered_y_byte_aborts() {
    let k = enc_key(&[7; 32]);
    let c = enc_challenge_create(&k, &mut ChaCha20Rng::seed_from_u64(12));
    assert_eq!(enc_challenge_answer(&k, &c.y, &c.z), Ok(c.x));
    for i in 0..16 {
        let mut y = c.y;
        y[i] ^= 0x80;
        assert!(enc_challenge_answer(&k, &y, &c.z).is_err(), "position {i}");
    }
}

#[test]
fn random_x_never_passes_the_router() {
    let mut rng = ChaCha20Rng::seed_from_u64(13);
    let c = enc_challenge_create(&enc_key(&[8; 32]), &mut rng);
    for _ in 0..10_000 {
        let x: [u8; 16] = rng.gen();
        assert!(!router_verify_enc_ack(&c.z, &x));
    }
    assert!(router_verify_enc_ack(&c.z, &c.x));
    assert!(!router_verify_enc_ack(&c.z, &[c.x.as_slice(), &[0]].concat()));
}

#[test]
fn command_names_are_unique() {
    let mut rng = ChaCha20Rng::seed_from_u64(14);
    let creds = AppCredentials {
        name_app: n("/dom/app1"),
        keypair: None,
        k_app: Some([5; 32]),
    };
    let mut names = HashSet::new();
    for seq in 0..10_000u64 {
        let state = ReplayState::at(seq, 1_700_000_000_000 + seq * 3, 20);
        let i = build_command(&creds, &n("/dom/fix1"), b"on", false, AuthMode::Mac, state, AckRequest::Mac, 1000, &mut rng).unwrap();
        assert!(names.insert(i.name));
    }
}

/// Access × command class × expiry, enumerated by hand.
#[test]
fn policy_truth_table() {
    let now = 1_700_000_000;
    let table = [
        ("read-only", PermissionClass::Read, false, Decision::Allow),
        ("read-only", PermissionClass::Read, true, Decision::Deny(DenyReason::Expired)),
        ("read-only", PermissionClass::Actuate, false, Decision::Deny(DenyReason::AccessInsufficient)),
        ("read-only", PermissionClass::Actuate, true, Decision::Deny(DenyReason::Expired)),
        ("actuate", PermissionClass::Read, false, Decision::Allow),
        ("actuate", PermissionClass::Read, true, Decision::Deny(DenyReason::Expired)),
        ("actuate", PermissionClass::Actuate, false, Decision::Allow),
        ("actuate", PermissionClass::Actuate, true, Decision::Deny(DenyReason::Expired)),
    ];
    for (access, class, expired, want) in table {
        let expires = if expired { "20151231235959Z" } else { "20991231235959Z" };
        let ns = n(&format!("/dom/appname/a1/access/{access}/expires/{expires}"));
        let attrs = parse_attributes(&ns).unwrap();
        let cmd: &[u8] = if class == PermissionClass::Read { b"status" } else { b"on" };
        assert_eq!(evaluate_policy(&attrs, None, &ns, cmd, class, None, now), want, "{access} {class:?} {expired}");
    }
}

#[test]
fn sub_delegation_intersects_access() {
    let am = Signer::root(KeyPair::from_seed(SchemeTag::Rsa1024E3Sha256, 1), n("/dom/key"));
    let kp = KeyPair::from_seed(SchemeTag::Rsa1024E3Sha256, 2);
    let grant = Grant {
        domain: Some(b"lights".to_vec()),
        appname: b"board".to_vec(),
        access: Access::FullAccess,
        expires: None,
    };
    let rec = authorize_app(&am, &n("/dom"), kp.public(), &grant, 0).unwrap();
    assert_eq!(parse_attributes(&rec.namespace).unwrap().effective().unwrap().access, Some(Access::FullAccess));
    let mut signer = Signer::owner(kp, &rec).unwrap();
    let mut ns = rec.namespace.clone();
    for (level, access) in [Access::Actuate, Access::FullAccess, Access::ReadOnly].into_iter().enumerate() {
        ns = ns.child(&b"access"[..]).unwrap().child(access.as_str().as_bytes()).unwrap();
        let sub = KeyPair::from_seed(SchemeTag::Rsa1024E3Sha256, 10 + level as u64);
        let sub_rec = publish_key(&signer, &ns, sub.public(), 0).unwrap();
        let eff = parse_attributes(&sub_rec.namespace).unwrap().effective().unwrap();
        let want = if level < 2 { Access::Actuate } else { Access::ReadOnly };
        assert_eq!(eff.access, Some(want), "level {level}");
        signer = Signer::owner(sub, &sub_rec).unwrap();
    }
}
