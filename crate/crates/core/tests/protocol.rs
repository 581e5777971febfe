mod common;

use common::*;
use lumen_core::ack_auth::{guard::HashAckGuard, LoopOutcome};
use lumen_core::control::command::{build_command, derive_app_key};
use lumen_core::control::fixture::{FixtureConfig, Outcome, RejectReason, Verdict};
use lumen_core::control::handoff::{handoff_name, open_handoff, ownership_reply, HandoffError};
use lumen_core::control::privacy::overhead;
use lumen_core::control::{AckEvent, AckRequest, AckScheme, AppCredentials, AppSession, AuthMode, LinkConfig, ReplayState, TimeoutAction};
use lumen_core::forwarder::AckGuard;
use lumen_core::trust::policy::{AclBody, AclEntry, CommandPattern};
use lumen_core::trust::{Access, Acl, Signer};
use lumen_core::{KeyPair, SchemeTag};

fn executed(o: &Outcome) -> &lumen_core::ContentObject {
    match o {
        Outcome::Executed { ack, .. } => ack,
        other => panic!("expected execution, got {other:?}"),
    }
}

fn rejected(o: &Outcome) -> RejectReason {
    match o {
        Outcome::Rejected { reason, .. } => *reason,
        other => panic!("expected reject, got {other:?}"),
    }
}

#[test]
fn mac_round_trip() {
    let mut w = world(FixtureConfig::default());
    let mut app = w.app(2, &grant("board", Access::FullAccess), AuthMode::Mac, AckScheme::Mac);
    let fix = w.fixture_name();
    let (i, _) = app.session.issue(&fix, b"on", EPOCH + 10, &mut w.rng).unwrap();
    let out = w.fixture.handle_command(&i, 15);
    let ack = executed(&out);
    match app.session.on_content(ack, EPOCH + 20) {
        AckEvent::Acked { latency_ms, outcome, cmd, .. } => {
            assert_eq!(latency_ms, 10);
            assert_eq!(outcome, LoopOutcome::Acked);
            assert_eq!(cmd, b"on");
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(app.session.pending_for(&fix), 0);
}

#[test]
fn identical_resend_is_seq_replay() {
    let mut w = world(FixtureConfig::default());
    let mut app = w.app(2, &grant("board", Access::FullAccess), AuthMode::Sig, AckScheme::Signed);
    let fix = w.fixture_name();
    let (i, _) = app.session.issue(&fix, b"on", EPOCH, &mut w.rng).unwrap();
    executed(&w.fixture.handle_command(&i, 1));
    assert_eq!(rejected(&w.fixture.handle_command(&i, 2)), RejectReason::SeqReplay);
}

#[test]
fn complex_command_component() {
    let mut w = world(FixtureConfig::default());
    let mut app = w.app(2, &grant("board", Access::FullAccess), AuthMode::Sig, AckScheme::Signed);
    let fix = w.fixture_name();
    let cmd = b"intensity/+10/rgb-8bit-color/F0FF39";
    let (i, _) = app.session.issue(&fix, cmd, EPOCH, &mut w.rng).unwrap();
    match w.fixture.handle_command(&i, 1) {
        Outcome::Executed { cmd: got, .. } => assert_eq!(got, cmd),
        other => panic!("{other:?}"),
    }
}

#[test]
fn sig_mode_fetches_key_first() {
    let mut w = world(FixtureConfig::default());
    let kp = KeyPair::from_seed(SchemeTag::Rsa1024E3Sha256, 5);
    let rec = lumen_core::control::authorize_app(&w.am, &n("/dom"), kp.public(), &grant("seq", Access::Actuate), 0).unwrap();
    let mut s = AppSession::new(AppCredentials {
        name_app: rec.namespace.clone(),
        keypair: Some(kp),
        k_app: None,
    });
    let fix = w.fixture_name();
    s.add_fixture(LinkConfig::new(fix.clone(), w.fixture.public_key().clone(), AuthMode::Sig, AckScheme::Signed));
    let (i, _) = s.issue(&fix, b"off", EPOCH, &mut w.rng).unwrap();
    match w.fixture.handle_command(&i, 0) {
        Outcome::NeedKey { key_name } => assert_eq!(key_name, rec.carrier.name),
        other => panic!("{other:?}"),
    }
    assert_eq!(w.fixture.install_app_key(std::slice::from_ref(&rec.carrier)), Some(rec.namespace.clone()));
    let ack = executed(&w.fixture.handle_command(&i, 1)).clone();
    assert!(matches!(s.on_content(&ack, EPOCH + 3), AckEvent::Acked { .. }));
}

#[test]
fn forged_key_record_not_installed() {
    let mut w = world(FixtureConfig::default());
    let rogue = Signer::root(KeyPair::from_seed(SchemeTag::Rsa1024E3Sha256, 77), n("/dom/key"));
    let kp = KeyPair::from_seed(SchemeTag::Rsa1024E3Sha256, 5);
    let rec = lumen_core::control::authorize_app(&rogue, &n("/dom"), kp.public(), &grant("x", Access::FullAccess), 0).unwrap();
    assert_eq!(w.fixture.install_app_key(&[rec.carrier]), None);
}

/// One command per verification step, each violating only that step.
#[test]
fn each_check_has_its_own_reason() {
    let mut w = world(FixtureConfig {
        domain: Some(b"lights".to_vec()),
        ..FixtureConfig::default()
    });
    let fix = w.fixture_name();
    let mut good = w.app(2, &grant("board", Access::FullAccess), AuthMode::Mac, AckScheme::Mac);
    let mut reader = w.app(3, &grant("viewer", Access::ReadOnly), AuthMode::Mac, AckScheme::Mac);
    let acl = Acl::sign(
        &w.am,
        n("/dom/acl/v1"),
        AclBody {
            entries: vec![AclEntry {
                prefix: good.record.namespace.to_uri(),
                commands: vec![CommandPattern("on".into()), CommandPattern("off".into()), CommandPattern("status".into())],
            }],
        },
        0,
    );
    assert!(w.fixture.install_acl(acl.carrier));

    // 1. registry
    let (i, _) = good.session.issue(&fix, b"dance", EPOCH, &mut w.rng).unwrap();
    assert_eq!(rejected(&w.fixture.handle_command(&i, 0)), RejectReason::Malformed);
    // 2. attributes: read-only may not actuate
    let (i, _) = reader.session.issue(&fix, b"on", EPOCH, &mut w.rng).unwrap();
    assert_eq!(rejected(&w.fixture.handle_command(&i, 0)), RejectReason::PolicyDenied);
    // 3. ACL: "level/50" is not listed
    let (i, _) = good.session.issue(&fix, b"level/50", EPOCH, &mut w.rng).unwrap();
    assert_eq!(rejected(&w.fixture.handle_command(&i, 0)), RejectReason::AclDenied);
    // 4a. freshness
    let (i, _) = good.session.issue(&fix, b"on", EPOCH, &mut w.rng).unwrap();
    assert_eq!(rejected(&w.fixture.handle_command(&i, 5_000)), RejectReason::Stale);
    // accept one so a lower sequence number exists
    let (i, _) = good.session.issue(&fix, b"on", EPOCH + 6000, &mut w.rng).unwrap();
    executed(&w.fixture.handle_command(&i, 6000));
    // 4b. sequence: reuse seq 1 with fresh time
    let creds = good.session.creds.clone();
    let old = build_command(&creds, &fix, b"off", false, AuthMode::Mac, ReplayState::at(1, EPOCH + 6000, 100), AckRequest::Mac, 4000, &mut w.rng).unwrap();
    assert_eq!(rejected(&w.fixture.handle_command(&old, 6000)), RejectReason::SeqReplay);
    // 5. authenticator
    let mut wrong = creds.clone();
    wrong.k_app = Some([0; 32]);
    let bad = build_command(&wrong, &fix, b"off", false, AuthMode::Mac, ReplayState::at(50, EPOCH + 6000, 100), AckRequest::Mac, 4000, &mut w.rng).unwrap();
    assert_eq!(rejected(&w.fixture.handle_command(&bad, 6000)), RejectReason::BadAuthenticator);
    // after all of that the sequence number 50 is still unused
    let ok = build_command(&creds, &fix, b"off", false, AuthMode::Mac, ReplayState::at(50, EPOCH + 6000, 100), AckRequest::Mac, 4000, &mut w.rng).unwrap();
    executed(&w.fixture.handle_command(&ok, 6000));
    // challenge
    let bogus = build_command(
        &creds,
        &fix,
        b"off",
        false,
        AuthMode::Mac,
        ReplayState::at(51, EPOCH + 6000, 100),
        AckRequest::Enc { z: [1; 32], y: [2; 16] },
        4000,
        &mut w.rng,
    )
    .unwrap();
    assert_eq!(rejected(&w.fixture.handle_command(&bogus, 6000)), RejectReason::ChallengeMismatch);
}

#[test]
fn policy_deny_carries_detail() {
    let mut w = world(FixtureConfig {
        domain: Some(b"other".to_vec()),
        ..FixtureConfig::default()
    });
    let fix = w.fixture_name();
    let mut app = w.app(2, &grant("board", Access::FullAccess), AuthMode::Mac, AckScheme::Mac);
    let (i, _) = app.session.issue(&fix, b"on", EPOCH, &mut w.rng).unwrap();
    let now = w.fixture.clock(0);
    assert_eq!(
        w.fixture.verify_command(&i, now),
        Verdict::Reject {
            reason: RejectReason::PolicyDenied,
            detail: lumen_core::control::fixture::deny_detail(lumen_core::trust::DenyReason::DomainMismatch)
        }
    );
}

#[test]
fn expired_grant_denied() {
    let mut w = world(FixtureConfig::default());
    let fix = w.fixture_name();
    let mut g = grant("board", Access::FullAccess);
    g.expires = Some((EPOCH / 1000) as i64 - 1);
    let mut app = w.app(2, &g, AuthMode::Mac, AckScheme::Mac);
    let (i, _) = app.session.issue(&fix, b"on", EPOCH, &mut w.rng).unwrap();
    assert_eq!(rejected(&w.fixture.handle_command(&i, 0)), RejectReason::PolicyDenied);
}

#[test]
fn rejects_reach_the_app() {
    let mut w = world(FixtureConfig::default());
    let fix = w.fixture_name();
    let mut app = w.app(2, &grant("viewer", Access::ReadOnly), AuthMode::Mac, AckScheme::Mac);
    let (i, _) = app.session.issue(&fix, b"on", EPOCH, &mut w.rng).unwrap();
    let Outcome::Rejected { ack, .. } = w.fixture.handle_command(&i, 0) else {
        panic!()
    };
    match app.session.on_content(&ack, EPOCH + 5) {
        AckEvent::Rejected { reason, .. } => assert_eq!(reason, RejectReason::PolicyDenied),
        other => panic!("{other:?}"),
    }
}

#[test]
fn encrypted_commands_both_modes() {
    for mode in [AuthMode::Mac, AuthMode::Sig] {
        let mut w = world(FixtureConfig::default());
        let fix = w.fixture_name();
        let mut app = w.app(2, &grant("board", Access::FullAccess), mode, AckScheme::Signed);
        let mut cfg = app.session.link_config(&fix).unwrap().clone();
        cfg.encrypt = true;
        app.session.add_fixture(cfg);
        let cmd = b"level/42";
        let (i, _) = app.session.issue(&fix, cmd, EPOCH, &mut w.rng).unwrap();
        let comp = i.name.get(fix.len() + 1 + app.record.namespace.len()).unwrap();
        assert_eq!(comp.len(), cmd.len() + overhead(mode));
        assert!(!comp.windows(cmd.len()).any(|win| win == cmd));
        match w.fixture.handle_command(&i, 0) {
            Outcome::Executed { cmd: got, .. } => assert_eq!(got, cmd),
            other => panic!("{mode:?}: {other:?}"),
        }
    }
}

#[test]
fn enc_ack_passes_router_guard() {
    let mut w = world(FixtureConfig::default());
    let fix = w.fixture_name();
    let mut app = w.app(2, &grant("board", Access::FullAccess), AuthMode::Mac, AckScheme::Enc);
    let (i, _) = app.session.issue(&fix, b"on", EPOCH, &mut w.rng).unwrap();
    let tag = HashAckGuard.tag(&i.name).unwrap();
    let ack = executed(&w.fixture.handle_command(&i, 0)).clone();
    assert!(HashAckGuard.check(&tag, &ack));
    let mut forged = ack.clone();
    forged.signature[0] ^= 1;
    assert!(!HashAckGuard.check(&tag, &forged));
    assert!(matches!(app.session.on_content(&forged, EPOCH + 1), AckEvent::Ignored { .. }));
    assert!(matches!(app.session.on_content(&ack, EPOCH + 1), AckEvent::Acked { .. }));
}

#[test]
fn chain_mode_with_refill() {
    let mut w = world(FixtureConfig {
        chain_len: 6,
        chain_stride: 2,
        ..FixtureConfig::default()
    });
    let fix = w.fixture_name();
    let mut app = w.app(2, &grant("board", Access::FullAccess), AuthMode::Mac, AckScheme::Chain);
    let mut preimages = std::collections::BTreeSet::new();
    let mut t = 0;
    for k in 0..20 {
        t += 10;
        let (i, _) = app.session.issue(&fix, b"on", EPOCH + t, &mut w.rng).unwrap();
        assert_eq!(
            app.session.issue(&fix, b"off", EPOCH + t, &mut w.rng),
            Err(lumen_core::control::IssueError::Busy)
        );
        let ack = executed(&w.fixture.handle_command(&i, t)).clone();
        // an identical resend is answered from the cache, not re-executed
        match w.fixture.handle_command(&i, t + 1) {
            Outcome::Resent { ack: again } => assert_eq!(again, ack),
            other => panic!("{other:?}"),
        }
        match app.session.on_content(&ack, EPOCH + t + 2) {
            AckEvent::Acked { preimage, .. } => {
                if k == 0 {
                    assert!(preimage.is_none(), "first command synchronizes");
                } else {
                    assert!(preimages.insert(preimage.unwrap()), "preimage reused");
                }
            }
            other => panic!("command {k}: {other:?}"),
        }
    }
    assert_eq!(w.fixture.stats.accepted, 20);
    assert_eq!(w.fixture.stats.resent, 20);
}

#[test]
fn chain_fallback_after_deadline() {
    let mut w = world(FixtureConfig {
        chain_len: 50,
        chain_stride: 10,
        ..FixtureConfig::default()
    });
    let fix = w.fixture_name();
    let mut app = w.app(2, &grant("board", Access::FullAccess), AuthMode::Mac, AckScheme::Chain);
    let (i, _) = app.session.issue(&fix, b"on", EPOCH, &mut w.rng).unwrap();
    let ack = executed(&w.fixture.handle_command(&i, 0)).clone();
    app.session.on_content(&ack, EPOCH + 1);
    // second command is lost every time
    let (i2, mut next) = app.session.issue(&fix, b"off", EPOCH + 10, &mut w.rng).unwrap();
    let mut current = i2.name.clone();
    let fallback = loop {
        match app.session.on_timeout(&current, EPOCH + next - EPOCH, &mut w.rng) {
            TimeoutAction::Resend(_) => next += 200,
            TimeoutAction::Fallback { interest, .. } => break interest,
            other => panic!("{other:?}"),
        }
        current = i2.name.clone();
    };
    let ack = executed(&w.fixture.handle_command(&fallback, next - EPOCH)).clone();
    match app.session.on_content(&ack, next + 5) {
        AckEvent::Acked { outcome, .. } => assert_eq!(outcome, LoopOutcome::FellBack),
        other => panic!("{other:?}"),
    }
}

#[test]
fn handoff_for_other_namespace_fails() {
    let mut w = world(FixtureConfig::default());
    let honest = w.app(2, &grant("board", Access::FullAccess), AuthMode::Mac, AckScheme::Mac);
    let kp = KeyPair::from_seed(SchemeTag::Rsa1024E3Sha256, 9);
    let rec = lumen_core::control::authorize_app(&w.am, &n("/dom"), kp.public(), &grant("mallory", Access::ReadOnly), 0).unwrap();
    let owner = Signer::owner(kp.clone(), &rec).unwrap();
    // asks for the honest app's key using a proof for its own namespace
    let nonce = [4u8; 16];
    let req = handoff_name(&w.fixture_name(), &honest.record.namespace, b"x").unwrap();
    let reply = ownership_reply(&owner, std::slice::from_ref(&rec), rec.namespace.child(nonce.to_vec()).unwrap(), 0);
    let out = w.fixture.complete_handoff(&req, &nonce, &reply, 0, &mut w.rng).unwrap();
    assert_eq!(out.result, Err(HandoffError::OwnershipFailed));
    assert_eq!(open_handoff(&kp, w.fixture.public_key(), &out.content), Err(HandoffError::OwnershipFailed));
}

#[test]
fn recorded_handoff_useless_to_another_app() {
    let mut w = world(FixtureConfig::default());
    let honest = w.app(2, &grant("board", Access::FullAccess), AuthMode::Mac, AckScheme::Mac);
    let nonce = [6u8; 16];
    let req = handoff_name(&w.fixture_name(), &honest.record.namespace, b"y").unwrap();
    let owner = Signer::owner(honest.keypair.clone(), &honest.record).unwrap();
    let reply = ownership_reply(&owner, std::slice::from_ref(&honest.record), honest.record.namespace.child(nonce.to_vec()).unwrap(), 0);
    let out = w.fixture.complete_handoff(&req, &nonce, &reply, 0, &mut w.rng).unwrap();
    let k = open_handoff(&honest.keypair, w.fixture.public_key(), &out.content).unwrap();
    assert_eq!(k, derive_app_key(w.fixture.k_fix(), &honest.record.namespace));
    let other = KeyPair::from_seed(SchemeTag::Rsa1024E3Sha256, 10);
    assert_eq!(open_handoff(&other, w.fixture.public_key(), &out.content), Err(HandoffError::DecryptFailed));
}

#[test]
fn stale_entries_evicted() {
    let mut w = world(FixtureConfig::default());
    let fix = w.fixture_name();
    let mut a = w.app(2, &grant("a", Access::FullAccess), AuthMode::Mac, AckScheme::Mac);
    let mut b = w.app(3, &grant("b", Access::FullAccess), AuthMode::Mac, AckScheme::Mac);
    let (i, _) = a.session.issue(&fix, b"on", EPOCH, &mut w.rng).unwrap();
    executed(&w.fixture.handle_command(&i, 0));
    let (i, _) = b.session.issue(&fix, b"on", EPOCH + 50_000, &mut w.rng).unwrap();
    executed(&w.fixture.handle_command(&i, 50_000));
    assert_eq!(w.fixture.replay().len(), 2);
    assert_eq!(w.fixture.evict_stale(EPOCH + 70_000), 1);
    assert!(w.fixture.replay().get(&b.record.namespace).is_some());
}
