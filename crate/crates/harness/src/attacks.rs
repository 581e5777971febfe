//! Scripted attacker suite.
//!
//! Each attack is a bundled scenario whose `[expect]` block states what a
//! failed attack looks like (no execution, no false ack, a specific
//! rejection). An attack "passes" when the protocol defeats it.

use serde::Serialize;

use crate::config::Scenario;
use crate::runner::run_scenario;
use lumen_core::parallel;

/// Scenario files compiled into the binary, by file name.
pub const BUNDLED: &[(&str, &str)] = &[
    ("attack_delay.toml", include_str!("../scenarios/attack_delay.toml")),
    ("attack_fake_ack.toml", include_str!("../scenarios/attack_fake_ack.toml")),
    ("attack_fake_ack_onpath.toml", include_str!("../scenarios/attack_fake_ack_onpath.toml")),
    ("attack_modify.toml", include_str!("../scenarios/attack_modify.toml")),
    ("attack_token.toml", include_str!("../scenarios/attack_token.toml")),
    ("authenticated.toml", include_str!("../scenarios/authenticated.toml")),
    ("baseline.toml", include_str!("../scenarios/baseline.toml")),
    ("chain_lossy.toml", include_str!("../scenarios/chain_lossy.toml")),
    ("fade.toml", include_str!("../scenarios/fade.toml")),
    ("gateway.toml", include_str!("../scenarios/gateway.toml")),
    ("polling.toml", include_str!("../scenarios/polling.toml")),
    ("reference.toml", include_str!("../scenarios/reference.toml")),
    ("replay.toml", include_str!("../scenarios/replay.toml")),
];

/// Looks up a bundled scenario by file name, with or without `.toml`.
pub fn bundled(name: &str) -> Option<Scenario> {
    let file = if name.ends_with(".toml") { name.to_string() } else { format!("{name}.toml") };
    let (path, text) = BUNDLED.iter().find(|(n, _)| *n == file)?;
    Some(Scenario::from_toml(text, path).expect("bundled scenarios parse"))
}

/// Attacker goal, scenario file, and what defeating it means.
pub const ATTACKS: &[(&str, &str, &str)] = &[
    ("command forgery", "attack_modify.toml", "every mutated command rejected with BadAuthenticator"),
    ("token tampering", "attack_token.toml", "no tampered command executes"),
    ("replay", "replay.toml", "every replay rejected, no duplicate execution"),
    ("delay beyond window", "attack_delay.toml", "delayed commands rejected as Stale, apps report failure"),
    ("fake ack", "attack_fake_ack.toml", "no app reports an ack the fixture never sent"),
    ("fake ack on path", "attack_fake_ack_onpath.toml", "forgeries ignored, real acks still delivered"),
];

#[derive(Debug, Clone, Serialize)]
pub struct AttackOutcome {
    pub attack: String,
    pub scenario: String,
    pub defeated_when: String,
    pub passed: bool,
    pub failures: Vec<String>,
    pub executed: u64,
    pub acked: u64,
    pub failed: u64,
    pub rejected: std::collections::BTreeMap<String, u64>,
    pub duplicate_executions: u64,
    pub unbacked_acks: u64,
}

/// Runs every attack, in parallel across scenarios.
pub fn run_adversary_suite() -> Vec<AttackOutcome> {
    parallel::map(ATTACKS.to_vec(), |(attack, file, defeated_when)| {
        let scenario = bundled(file).expect("attack scenario is bundled");
        let (passed, failures, m) = match run_scenario(&scenario) {
            Ok(r) => (r.passed(), r.failures, r.metrics),
            Err(e) => (false, vec![e.to_string()], Default::default()),
        };
        AttackOutcome {
            attack: attack.to_string(),
            scenario: file.to_string(),
            defeated_when: defeated_when.to_string(),
            passed,
            failures,
            executed: m.executed,
            acked: m.acked,
            failed: m.failed,
            rejected: m.rejected,
            duplicate_executions: m.duplicate_executions,
            unbacked_acks: m.unbacked_acks,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_bundled_file_parses() {
        for (name, _) in BUNDLED {
            assert!(bundled(name).is_some(), "{name}");
        }
        assert!(bundled("baseline").is_some());
        assert!(bundled("missing").is_none());
    }

    #[test]
    fn bundled_list_matches_directory() {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
        let mut on_disk: Vec<String> = std::fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .filter(|n| n.ends_with(".toml"))
            .collect();
        on_disk.sort();
        let listed: Vec<String> = BUNDLED.iter().map(|(n, _)| n.to_string()).collect();
        assert_eq!(on_disk, listed);
    }
}
