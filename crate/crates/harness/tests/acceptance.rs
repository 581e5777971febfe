//! Acceptance criteria, one line per criterion. Run with
//! `cargo test -p lumen-harness --test acceptance`.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use lumen_core::ack_auth::{chain_verify, enc_challenge_answer, enc_challenge_create, enc_key, router_verify_enc_ack, ChainCert, HashChain};
use lumen_core::control::app::AckScheme;
use lumen_core::crypto::sha256;
use lumen_core::trust::attributes::{format_generalized_time, with_attributes, Agreement};
use lumen_core::trust::{parse_attributes, prove_ownership, publish_key, verify_ownership, Access, Attr, KeyRecord, OwnershipProof, Signer};
use lumen_core::{ContentObject, KeyPair, Name, SchemeTag};
use lumen_harness::attacks::{bundled, BUNDLED};
use lumen_harness::bench::bench;
use lumen_harness::config::Protocol;
use lumen_harness::{run_many, run_scenario, RunReport};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn run(name: &str) -> RunReport {
    run_scenario(&bundled(name).expect("bundled")).expect("scenario builds")
}

fn message_counts() -> Outcome {
    let mut parts = Vec::new();
    for (name, want) in [("baseline", 40), ("authenticated", 20)] {
        let t = Instant::now();
        let r = run(name);
        let wall = t.elapsed();
        ensure(r.metrics.messages == want, || format!("{name}: {} messages, want {want}", r.metrics.messages))?;
        ensure(r.metrics.executed == 10, || format!("{name}: {} executed", r.metrics.executed))?;
        ensure(wall < Duration::from_secs(1), || format!("{name}: took {wall:?}"))?;
        parts.push(format!("{name} {} in {} ms", r.metrics.messages, wall.as_millis()));
    }
    Ok(parts.join(", "))
}

fn replay_suite() -> Outcome {
    let m = run("replay").metrics;
    let replayed = m.adversary.get("replay").copied().unwrap_or(0);
    let seq = m.rejected.get("SeqReplay").copied().unwrap_or(0);
    let stale = m.rejected.get("Stale").copied().unwrap_or(0);
    ensure(replayed == 100, || format!("{replayed} replays injected"))?;
    ensure(m.duplicate_executions == 0, || format!("{} duplicate executions", m.duplicate_executions))?;
    ensure(seq + stale == 100 && m.rejected_total() == 100, || format!("rejected {:?}", m.rejected))?;
    Ok(format!("100 replays, 0 duplicates, SeqReplay {seq} + Stale {stale}"))
}

struct Node {
    signer: Signer,
    path: Vec<KeyRecord>,
}

fn component(rng: &mut ChaCha20Rng) -> Vec<u8> {
    format!("n{:08x}", rng.gen::<u32>()).into_bytes()
}

/// Random delegation tree of depth 1..=4 under `root`; every node owns a key.
fn delegation_tree(root: &Signer, base: &Name, pool: &[KeyPair], rng: &mut ChaCha20Rng) -> Vec<Node> {
    let depth = rng.gen_range(1..=4);
    let mut nodes: Vec<Node> = Vec::new();
    let mut frontier: Vec<Option<usize>> = vec![None];
    for _ in 0..depth {
        let mut next = Vec::new();
        for parent in frontier {
            for _ in 0..rng.gen_range(1..=2) {
                let (signer, prefix, mut path) = match parent {
                    None => (root, base.clone(), Vec::new()),
                    Some(p) => (&nodes[p].signer, nodes[p].path.last().unwrap().namespace.clone(), nodes[p].path.clone()),
                };
                let ns = prefix.child(component(rng)).unwrap();
                let kp = pool[rng.gen_range(0..pool.len())].clone();
                let rec = publish_key(signer, &ns, kp.public(), 0).unwrap();
                path.push(rec.clone());
                let node = Node {
                    signer: Signer::owner(kp, &rec).unwrap(),
                    path,
                };
                nodes.push(node);
                next.push(Some(nodes.len() - 1));
            }
        }
        frontier = next;
    }
    nodes
}

fn flip_bytes(b: &mut Vec<u8>, rng: &mut ChaCha20Rng) {
    if b.is_empty() {
        b.push(rng.gen_range(1..=255));
    } else {
        let i = rng.gen_range(0..b.len());
        b[i] ^= rng.gen_range(1..=255u8);
    }
}

fn flip_name(n: &Name, rng: &mut ChaCha20Rng) -> Name {
    let mut comps = n.components().to_vec();
    let i = rng.gen_range(0..comps.len());
    flip_bytes(&mut comps[i], rng);
    Name::from_components(comps).unwrap()
}

fn flip_object(o: &mut ContentObject, rng: &mut ChaCha20Rng) {
    match rng.gen_range(0..5) {
        0 => o.name = flip_name(&o.name, rng),
        1 => flip_bytes(&mut o.payload, rng),
        2 => o.key_locator = flip_name(&o.key_locator, rng),
        3 => o.timestamp_ms ^= rng.gen_range(1..=u64::from(u32::MAX)),
        _ => flip_bytes(&mut o.signature, rng),
    }
}

/// One field of the proof changed: the nonce, a field of the response or
/// of one path record, the record order, or a dropped record.
fn mutate(p: &OwnershipProof, rng: &mut ChaCha20Rng) -> OwnershipProof {
    let mut m = p.clone();
    match rng.gen_range(0..5) {
        0 => flip_bytes(&mut m.nonce, rng),
        1 => flip_object(&mut m.response, rng),
        2 => {
            let i = rng.gen_range(0..m.path.len());
            flip_object(&mut m.path[i], rng);
        }
        3 if m.path.len() >= 2 => {
            let i = rng.gen_range(0..m.path.len());
            let j = (i + rng.gen_range(1..m.path.len())) % m.path.len();
            m.path.swap(i, j);
        }
        3 => m.path.push(m.path[0].clone()),
        _ => {
            let i = rng.gen_range(0..m.path.len());
            m.path.remove(i);
        }
    }
    m
}

fn ownership_soundness() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed);
    let pool: Vec<KeyPair> = (1..=4).map(|s| KeyPair::from_seed(SchemeTag::Rsa1024E3Sha256, s)).collect();
    let root = Signer::root(KeyPair::from_seed(SchemeTag::Rsa1024E3Sha256, 100), Name::parse("/acc/root/key").unwrap());
    let trust = root.trust_root();
    let base = Name::parse("/acc/dom").unwrap();
    let mut proofs = Vec::new();
    let mut depths = BTreeSet::new();
    for _ in 0..12 {
        for node in delegation_tree(&root, &base, &pool, &mut rng) {
            let own = node.path.last().unwrap().namespace.clone();
            let claim = if rng.gen_bool(0.5) { own.child(&b"dev"[..]).unwrap() } else { own };
            let mut nonce = vec![0u8; 16];
            rng.fill_bytes(&mut nonce);
            let proof = prove_ownership(&node.signer, &node.path, &claim, &nonce, 0).unwrap();
            ensure(verify_ownership(&trust, &claim, &nonce, &proof), || format!("honest proof for {claim} rejected"))?;
            depths.insert(node.path.len());
            proofs.push((claim, nonce, proof));
        }
    }
    ensure(depths.len() == 4, || format!("depths covered {depths:?}"))?;
    let mut accepted = 0;
    for _ in 0..1000 {
        let (claim, nonce, proof) = &proofs[rng.gen_range(0..proofs.len())];
        let m = mutate(proof, &mut rng);
        ensure(&m != proof, || "mutation left the proof unchanged".into())?;
        if verify_ownership(&trust, claim, nonce, &m) {
            accepted += 1;
        }
    }
    let wall = t.elapsed();
    ensure(accepted == 0, || format!("{accepted} mutants accepted"))?;
    ensure(wall < Duration::from_secs(10), || format!("took {wall:?}"))?;
    Ok(format!("{} honest proofs accepted, 1000 mutants rejected, {} ms", proofs.len(), wall.as_millis()))
}

/// Permissions each access level grants, as a set.
fn grants(a: Access) -> BTreeSet<&'static str> {
    match a {
        Access::ReadOnly => ["read"].into(),
        Access::Actuate => ["read", "actuate"].into(),
        Access::FullAccess => ["read", "actuate", "configure"].into(),
    }
}

fn attribute_intersection() -> Outcome {
    const TIMES: [i64; 4] = [946_684_800, 1_451_606_399, 1_451_606_400, 4_102_444_800];
    let mut tokens: Vec<(Attr, Vec<u8>)> = Vec::new();
    for a in [Access::ReadOnly, Access::Actuate, Access::FullAccess] {
        tokens.push((Attr::Access, a.as_str().as_bytes().to_vec()));
    }
    for t in TIMES {
        tokens.push((Attr::Expires, format_generalized_time(t).into_bytes()));
    }
    for v in ["d1", "d2"] {
        tokens.push((Attr::Domain, v.as_bytes().to_vec()));
    }
    for v in ["a1", "a2"] {
        tokens.push((Attr::AppName, v.as_bytes().to_vec()));
    }
    let probes: Vec<i64> = TIMES.iter().flat_map(|t| [t - 1, *t, t + 1]).collect();
    let base = Name::parse("/acc/dom").unwrap();
    let mut cases = 0;
    let mut seqs: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..3 {
        seqs = seqs
            .iter()
            .flat_map(|s| (0..tokens.len()).map(move |t| [s.clone(), vec![t]].concat()))
            .collect();
        for seq in &seqs {
            let attrs: Vec<(Attr, &[u8])> = seq.iter().map(|&i| (tokens[i].0, tokens[i].1.as_slice())).collect();
            let name = with_attributes(&base, &attrs).unwrap().child(&b"key"[..]).unwrap();
            let eff = parse_attributes(&name).unwrap().effective().unwrap();

            let mut perm: Option<BTreeSet<&str>> = None;
            let mut bounds = Vec::new();
            let mut domains: Option<BTreeSet<&[u8]>> = None;
            let mut appnames: Option<BTreeSet<&[u8]>> = None;
            for (a, v) in &attrs {
                match a {
                    Attr::Access => {
                        let g = grants(Access::parse(v).unwrap());
                        perm = Some(perm.map_or(g.clone(), |p| p.intersection(&g).copied().collect()));
                    }
                    Attr::Expires => bounds.push(*TIMES.iter().find(|&&t| format_generalized_time(t).as_bytes() == *v).unwrap()),
                    Attr::Domain => {
                        let s: BTreeSet<&[u8]> = [*v].into();
                        domains = Some(domains.map_or(s.clone(), |d| d.intersection(&s).copied().collect()));
                    }
                    Attr::AppName => {
                        let s: BTreeSet<&[u8]> = [*v].into();
                        appnames = Some(appnames.map_or(s.clone(), |d| d.intersection(&s).copied().collect()));
                    }
                }
            }
            let label = name.to_uri();
            ensure(eff.access.map(grants) == perm, || format!("{label}: access {:?}", eff.access))?;
            for &p in &probes {
                let oracle = bounds.iter().all(|&b| p <= b);
                let got = eff.expires.is_none_or(|e| p <= e);
                ensure(oracle == got, || format!("{label}: probe {p} oracle {oracle} got {got}"))?;
            }
            for (got, want) in [(&eff.domain, &domains), (&eff.appname, &appnames)] {
                let expected = match want {
                    None => Agreement::Absent,
                    Some(s) if s.is_empty() => Agreement::Conflict,
                    Some(s) => Agreement::Value(s.iter().next().unwrap().to_vec()),
                };
                ensure(*got == expected, || format!("{label}: {got:?} want {expected:?}"))?;
            }
            cases += 1;
        }
    }
    Ok(format!("{cases} sequences match the oracle"))
}

fn hash_chain() -> Outcome {
    let t = Instant::now();
    let am = Signer::root(KeyPair::from_seed(SchemeTag::Rsa1024E3Sha256, 9), Name::parse("/acc/root/key").unwrap());
    let mut chain = HashChain::create([0x42; 32], 10_000, 100);
    ensure(chain.pebble_count() == 101, || format!("{} pebbles", chain.pebble_count()))?;
    let cert = ChainCert::issue(
        &am,
        &Name::parse("/acc/fixture/f1").unwrap(),
        &Name::parse("/acc/app/a1").unwrap(),
        0,
        chain.anchor(),
        chain.len(),
        0,
    );
    let cert = ChainCert::verify(cert.carrier, am.keypair.public()).map_err(|e| e.to_string())?;
    let mut prev = cert.anchor;
    let (mut total, mut max) = (0u64, 0u32);
    for i in 0..1000 {
        let challenge = chain.current_challenge();
        ensure(challenge == prev, || format!("answer {i}: challenge is not the last preimage"))?;
        let a = chain.answer(&challenge).map_err(|e| e.to_string())?;
        // Each preimage hashes to the one before it, so all reach the anchor.
        ensure(sha256(&a.preimage) == prev, || format!("answer {i}: preimage does not hash to the challenge"))?;
        if i % 100 == 0 || i == 999 {
            ensure(chain_verify(&cert, &challenge, &a.preimage), || format!("answer {i}: chain_verify"))?;
        }
        total += u64::from(a.hashes);
        max = max.max(a.hashes);
        prev = a.preimage;
    }
    let mean = total as f64 / 1000.0;
    let wall = t.elapsed();
    ensure(max <= 99, || format!("max {max} hashes"))?;
    ensure((mean - 50.0).abs() <= 5.0, || format!("mean {mean} hashes"))?;
    ensure(wall < Duration::from_secs(5), || format!("took {wall:?}"))?;
    Ok(format!("101 pebbles, max {max} mean {mean:.1} hashes per answer, {} ms", wall.as_millis()))
}

fn enc_challenge() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(0xe2c);
    let mut k_app = [0u8; 32];
    for i in 0..10_000 {
        rng.fill_bytes(&mut k_app);
        let k = enc_key(&k_app);
        let c = enc_challenge_create(&k, &mut rng);
        let x = enc_challenge_answer(&k, &c.y, &c.z).map_err(|_| format!("honest challenge {i} aborted"))?;
        ensure(router_verify_enc_ack(&c.z, &x), || format!("honest ack {i} rejected"))?;
        let mut forged = [0u8; 16];
        rng.fill_bytes(&mut forged);
        ensure(forged == x || !router_verify_enc_ack(&c.z, &forged), || format!("forgery {i} accepted"))?;
    }
    Ok("10000 honest acks pass, 10000 forgeries fail".into())
}

fn chain_lossy() -> Outcome {
    let r = run("chain_lossy");
    let m = &r.metrics;
    let drops: u64 = m.adversary.iter().filter(|(k, _)| k.as_str() == "drop").map(|(_, v)| v).sum();
    let replays = m.adversary.get("replay").copied().unwrap_or(0);
    ensure(drops > 0 && replays > 0, || format!("adversary idle: {:?}", m.adversary))?;
    ensure(m.preimage_reuse == 0, || format!("{} preimages reused", m.preimage_reuse))?;
    ensure(m.max_chain_in_flight <= 1, || format!("{} chain commands in flight", m.max_chain_in_flight))?;
    Ok(format!(
        "{drops} drops, {replays} replays, preimage reuse 0, max in flight {}, {} acked",
        m.max_chain_in_flight, m.acked
    ))
}

fn benchmark_ordering() -> Outcome {
    let table = bench(1000);
    let summary: Vec<String> = table.checks.iter().map(|c| format!("{} {:.1}x", c.name, c.ratio)).collect();
    ensure(table.passed(), || {
        let failed: Vec<String> = table
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{} {:.2}x < {}x", c.name, c.ratio, c.min_ratio))
            .collect();
        failed.join("; ")
    })?;
    Ok(summary.join(", "))
}

fn latency() -> Outcome {
    let mut worst = 0;
    let acks = [None, Some(AckScheme::Signed), Some(AckScheme::Mac), Some(AckScheme::Enc), Some(AckScheme::Chain)];
    for protocol in [Protocol::Sig, Protocol::Mac] {
        for ack in acks {
            let mut s = bundled("authenticated").unwrap();
            s.apps[0].protocol = protocol;
            s.apps[0].ack = ack;
            let m = run_scenario(&s).map_err(|e| e.to_string())?.metrics;
            ensure(m.acked == 10, || format!("{protocol:?}/{ack:?}: {} acked", m.acked))?;
            ensure(m.latency.max_ms <= 100, || format!("{protocol:?}/{ack:?}: max {} ms", m.latency.max_ms))?;
            worst = worst.max(m.latency.max_ms);
        }
    }
    let f = run("fade").metrics;
    ensure(f.executed == 44 && f.acked == 44, || format!("fade executed {} acked {}", f.executed, f.acked))?;
    ensure(f.rejected_total() == 0, || format!("fade rejected {:?}", f.rejected))?;
    Ok(format!("worst round trip {worst} ms over 10 modes, fade 44/44 with 0 rejections"))
}

fn determinism() -> Outcome {
    let scenarios: Vec<_> = BUNDLED.iter().flat_map(|(n, _)| [bundled(n).unwrap(), bundled(n).unwrap()]).collect();
    let reports = run_many(scenarios);
    for (pair, (name, _)) in reports.chunks(2).zip(BUNDLED) {
        let a = pair[0].as_ref().map_err(|e| e.to_string())?.log.to_ndjson();
        let b = pair[1].as_ref().map_err(|e| e.to_string())?.log.to_ndjson();
        ensure(!a.is_empty() && a == b, || format!("{name}: logs differ"))?;
    }
    Ok(format!("{} scenarios, identical logs", BUNDLED.len()))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("message counts", message_counts),
        ("replay suite", replay_suite),
        ("ownership-proof soundness", ownership_soundness),
        ("attribute intersection", attribute_intersection),
        ("hash-chain arithmetic", hash_chain),
        ("enc-challenge public verifiability", enc_challenge),
        ("one-time preimage and lock-step", chain_lossy),
        ("benchmark ordering", benchmark_ordering),
        ("latency and fade throughput", latency),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
