//! Wall-clock micro-benchmarks for command and ack authentication.
//!
//! Absolute timings depend on the machine; the ratio checks are what a run
//! is judged on. Everything runs on the calling thread.

use std::hint::black_box;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use lumen_core::ack_auth::ack::{ack_mac, verify_mac_ack};
use lumen_core::ack_auth::{enc_challenge_answer, enc_challenge_create, router_verify_enc_ack, HashChain};
use lumen_core::control::{build_command, derive_app_key, parse_command, AckRequest, AppCredentials, AuthMode, ReplayState};
use lumen_core::crypto::{sha256, verify_content};
use lumen_core::trust::keys::Signer;
use lumen_core::{KeyPair, Name, SchemeTag};

pub const CHAIN_LEN: u32 = 10_000;
pub const CHAIN_STRIDE: u32 = 100;

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub op: &'static str,
    pub iterations: usize,
    pub mean_us: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioCheck {
    pub name: &'static str,
    pub slow: &'static str,
    pub fast: &'static str,
    pub ratio: f64,
    pub min_ratio: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchTable {
    pub rows: Vec<BenchRow>,
    pub checks: Vec<RatioCheck>,
}

impl BenchTable {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn mean_us(&self, op: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.op == op).map(|r| r.mean_us)
    }

    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Fixed-width text table followed by the ratio checks.
    pub fn render(&self) -> String {
        let mut s = format!("{:<44} {:>8} {:>12}\n", "operation", "iters", "mean (us)");
        for r in &self.rows {
            s += &format!("{:<44} {:>8} {:>12.3}\n", r.op, r.iterations, r.mean_us);
        }
        s.push('\n');
        for c in &self.checks {
            s += &format!(
                "{} {:<40} {:>9.1}x (need >= {}x)\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.ratio,
                c.min_ratio
            );
        }
        s
    }
}

pub const CMD_SIG_CREATE: &str = "create auth. command (RSA-1024)";
pub const CMD_SIG_VERIFY: &str = "verify command (RSA-1024)";
pub const DERIVE_KEY: &str = "compute HMAC key from fixture secret";
pub const CMD_MAC_CREATE: &str = "create auth. command (HMAC)";
pub const CMD_MAC_VERIFY: &str = "verify command (HMAC)";
pub const CONTENT_SIGN: &str = "sign content object (RSA-1024)";
pub const CONTENT_VERIFY: &str = "verify content object (RSA-1024)";
pub const ACK_MAC: &str = "authenticate/verify ack (HMAC)";
pub const ENC_CREATE: &str = "encrypted challenge create";
pub const ENC_ANSWER: &str = "encrypted challenge answer";
pub const ENC_VERIFY: &str = "encrypted challenge verify";
pub const CHAIN_CREATE: &str = "hash chain create";
pub const CHAIN_LOOKUP: &str = "hash chain answer w/ full lookup";
pub const CHAIN_NO_LOOKUP: &str = "hash chain answer w/o lookup";
pub const CHAIN_PEBBLED: &str = "hash chain answer w/ pebbling";
pub const CHAIN_VERIFY: &str = "hash chain verify";

fn time<T>(iterations: usize, mut f: impl FnMut(usize) -> T) -> f64 {
    let start = Instant::now();
    for i in 0..iterations {
        black_box(f(i));
    }
    start.elapsed().as_secs_f64() * 1e6 / iterations as f64
}

/// Times every operation `iterations` times (chain creation a tenth as
/// often) with a fixed RNG seed for the inputs.
pub fn bench(iterations: usize) -> BenchTable {
    let iterations = iterations.max(1);
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let keypair = KeyPair::from_seed(SchemeTag::Rsa1024E3Sha256, 7);
    let name_fix = Name::parse("/lumen/fixture/bench").expect("valid");
    let name_app = Name::parse("/lumen/appname/bench/access/full-access").expect("valid");
    let k_fix: [u8; 32] = rng.gen();
    let k_app = derive_app_key(&k_fix, &name_app);
    let creds = AppCredentials {
        name_app: name_app.clone(),
        keypair: Some(keypair.clone()),
        k_app: Some(k_app),
    };
    let signer = Signer::root(keypair.clone(), name_fix.child(&b"KEY"[..]).expect("valid"));
    let state = |i: usize| ReplayState::at(i as u64 + 1, 1_700_000_000_000, 100);
    let command = |mode: AuthMode, i: usize, rng: &mut ChaCha20Rng| {
        build_command(&creds, &name_fix, b"on", false, mode, state(i), AckRequest::Mac, 4000, rng).expect("valid command")
    };

    let mut rows = Vec::new();
    let mut row = |op: &'static str, n: usize, mean_us: f64| rows.push(BenchRow { op, iterations: n, mean_us });

    row(CMD_SIG_CREATE, iterations, time(iterations, |i| command(AuthMode::Sig, i, &mut rng)));
    let sig_cmd = parse_command(&command(AuthMode::Sig, 0, &mut rng).name, &name_fix).expect("parses");
    row(CMD_SIG_VERIFY, iterations, time(iterations, |_| sig_cmd.verify_sig(keypair.public())));
    row(DERIVE_KEY, iterations, time(iterations, |_| derive_app_key(&k_fix, &name_app)));
    row(CMD_MAC_CREATE, iterations, time(iterations, |i| command(AuthMode::Mac, i, &mut rng)));
    let mac_cmd = parse_command(&command(AuthMode::Mac, 0, &mut rng).name, &name_fix).expect("parses");
    row(CMD_MAC_VERIFY, iterations, time(iterations, |_| mac_cmd.verify_mac(&k_app)));

    let ack_name = mac_cmd.prefix.clone();
    row(CONTENT_SIGN, iterations, time(iterations, |i| signer.sign(ack_name.clone(), vec![0], i as u64)));
    let signed = signer.sign(ack_name.clone(), vec![0], 0);
    row(CONTENT_VERIFY, iterations, time(iterations, |_| verify_content(keypair.public(), &signed)));
    row(
        ACK_MAC,
        iterations,
        time(iterations, |i| {
            let a = ack_mac(&k_app, name_fix.clone(), ack_name.clone(), 0, i as u64);
            verify_mac_ack(&k_app, &a)
        }),
    );

    let k_enc: [u8; 16] = rng.gen();
    row(ENC_CREATE, iterations, time(iterations, |_| enc_challenge_create(&k_enc, &mut rng)));
    let ch = enc_challenge_create(&k_enc, &mut rng);
    row(ENC_ANSWER, iterations, time(iterations, |_| enc_challenge_answer(&k_enc, &ch.y, &ch.z)));
    row(ENC_VERIFY, iterations, time(iterations, |_| router_verify_enc_ack(&ch.z, &ch.x)));

    let seed: [u8; 32] = rng.gen();
    let creates = (iterations / 10).max(1);
    row(CHAIN_CREATE, creates, time(creates, |_| HashChain::create(seed, CHAIN_LEN, CHAIN_STRIDE)));
    let full = HashChain::create(seed, CHAIN_LEN, 1);
    let pebbled = HashChain::create(seed, CHAIN_LEN, CHAIN_STRIDE);
    let positions: Vec<u32> = (0..iterations).map(|_| rng.gen_range(0..CHAIN_LEN)).collect();
    row(CHAIN_LOOKUP, iterations, time(iterations, |i| full.link(positions[i])));
    row(CHAIN_NO_LOOKUP, iterations, time(iterations, |i| pebbled.link_from_seed(positions[i])));
    row(CHAIN_PEBBLED, iterations, time(iterations, |i| pebbled.link(positions[i])));
    let (pre, _) = pebbled.link(CHAIN_LEN - 1);
    let challenge = pebbled.anchor();
    row(CHAIN_VERIFY, iterations, time(iterations, |_| sha256(&pre) == challenge));

    let mean = |op: &str| rows.iter().find(|r| r.op == op).map(|r| r.mean_us).expect("row exists");
    let check = |name, slow, fast, min_ratio: f64| {
        let ratio = mean(slow) / mean(fast).max(1e-9);
        RatioCheck {
            name,
            slow,
            fast,
            ratio,
            min_ratio,
            passed: ratio >= min_ratio,
        }
    };
    let checks = vec![
        check("MAC vs signature command creation", CMD_SIG_CREATE, CMD_MAC_CREATE, 10.0),
        check("pebbled vs unpebbled chain answer", CHAIN_NO_LOOKUP, CHAIN_PEBBLED, 10.0),
        check("enc create vs one signature", CONTENT_SIGN, ENC_CREATE, 1.0),
        check("enc answer vs one signature", CONTENT_SIGN, ENC_ANSWER, 1.0),
        check("enc verify vs one signature", CONTENT_SIGN, ENC_VERIFY, 1.0),
        check("chain verify vs pebbled answer", CHAIN_PEBBLED, CHAIN_VERIFY, 1.0),
    ];
    BenchTable { rows, checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_has_every_row_and_csv_header() {
        let t = bench(3);
        assert_eq!(t.rows.len(), 16);
        let csv = t.to_csv().unwrap();
        assert!(csv.starts_with("op,iterations,mean_us\n"));
        assert_eq!(csv.lines().count(), 17);
        assert!(t.render().contains(CHAIN_PEBBLED));
    }
}
