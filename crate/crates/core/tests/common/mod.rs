#![allow(dead_code)]

use lumen_core::control::handoff::{handoff_name, open_handoff, ownership_reply};
use lumen_core::control::{
    authorize_app, bootstrap, AckScheme, AppCredentials, AppSession, AuthMode, BootstrapOffer, Device, FixtureConfig,
    FixtureState, Grant, LinkConfig,
};
use lumen_core::trust::{Access, KeyRecord, Signer};
use lumen_core::{KeyPair, Name, SchemeTag};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub const EPOCH: u64 = 1_700_000_000_000;

pub fn n(s: &str) -> Name {
    Name::parse(s).unwrap()
}

pub struct World {
    pub rng: ChaCha20Rng,
    pub am: Signer,
    pub fixture: FixtureState,
}

pub fn world(cfg: FixtureConfig) -> World {
    let mut rng = ChaCha20Rng::seed_from_u64(42);
    let am = Signer::root(KeyPair::from_seed(SchemeTag::Rsa1024E3Sha256, 1), n("/dom/key"));
    let offer = BootstrapOffer {
        name_fix: n("/dom/fix1"),
        root: am.trust_root(),
        acl_names: vec![n("/dom/acl")],
        cm_time_ms: EPOCH,
    };
    let mut dev = Device::new([9; 16], SchemeTag::Rsa1024E3Sha256);
    let (rec, _) = bootstrap([9; 16], &offer, &mut dev, 0, &mut rng).unwrap();
    World {
        rng,
        am,
        fixture: FixtureState::from_bootstrap(&rec, cfg),
    }
}

pub fn grant(appname: &str, access: Access) -> Grant {
    Grant {
        domain: Some(b"lights".to_vec()),
        appname: appname.as_bytes().to_vec(),
        access,
        expires: None,
    }
}

pub struct App {
    pub session: AppSession,
    pub record: KeyRecord,
    pub keypair: KeyPair,
}

impl World {
    pub fn fixture_name(&self) -> Name {
        self.fixture.name_fix.clone()
    }

    /// Authorizes an app and runs the key handoff so it also holds k_App.
    pub fn app(&mut self, seed: u64, g: &Grant, mode: AuthMode, ack: AckScheme) -> App {
        let keypair = KeyPair::from_seed(SchemeTag::Rsa1024E3Sha256, seed);
        let record = authorize_app(&self.am, &n("/dom"), keypair.public(), g, 0).unwrap();
        let name_app = record.namespace.clone();
        let mut session = AppSession::new(AppCredentials {
            name_app: name_app.clone(),
            keypair: Some(keypair.clone()),
            k_app: None,
        });
        let req = handoff_name(&self.fixture.name_fix, &name_app, &seed.to_be_bytes()).unwrap();
        let nonce = [seed as u8; 16];
        let owner = Signer::owner(keypair.clone(), &record).unwrap();
        let reply = ownership_reply(&owner, std::slice::from_ref(&record), name_app.child(nonce.to_vec()).unwrap(), 0);
        let out = self.fixture.complete_handoff(&req, &nonce, &reply, 0, &mut self.rng).unwrap();
        assert_eq!(out.result, Ok(()));
        let k_app = open_handoff(&keypair, self.fixture.public_key(), &out.content).unwrap();
        session.set_k_app(k_app);
        session.add_fixture(LinkConfig::new(self.fixture_name(), self.fixture.public_key().clone(), mode, ack));
        App {
            session,
            record,
            keypair,
        }
    }
}
