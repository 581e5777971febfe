use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lumen_harness::attacks::{bundled, run_adversary_suite};
use lumen_harness::bench::bench;
use lumen_harness::gateway::{serve, GatewayOptions};
use lumen_harness::{run_scenario, Scenario};

/// Secure lighting control over a simulated named-data network.
#[derive(Parser)]
#[command(name = "lumen", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario and check its expectations.
    Run {
        /// Scenario file, or the name of a bundled scenario.
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the event log here as NDJSON.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Print the full report as JSON instead of a summary.
        #[arg(long)]
        json: bool,
    },
    /// Run every scripted attack; all must be defeated.
    AttackSuite,
    /// Time the authentication primitives and check their ratios.
    Bench {
        #[arg(long, default_value_t = 1000)]
        iters: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Serve a live scenario to operator clients.
    Gateway {
        #[arg(long, default_value = "127.0.0.1:8044")]
        listen: String,
        #[arg(long, default_value = "gateway")]
        scenario: String,
        /// Require clients to present this token in a hello message.
        #[arg(long)]
        token: Option<String>,
    },
}

fn load(which: &str) -> Result<Scenario, String> {
    let path = Path::new(which);
    if path.exists() {
        return Scenario::load(path).map_err(|e| e.to_string());
    }
    bundled(which).ok_or_else(|| format!("{which}: no such file or bundled scenario"))
}

fn run(which: &str, seed: Option<u64>, log: Option<PathBuf>, json: bool) -> Result<bool, String> {
    let mut s = load(which)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    let report = run_scenario(&s).map_err(|e| e.to_string())?;
    if let Some(path) = log {
        let file = std::fs::File::create(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        report
            .log
            .write_ndjson(std::io::BufWriter::new(file))
            .map_err(|e| format!("{}: {e}", path.display()))?;
    }
    if json {
        println!("{}", serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?);
    } else {
        let m = &report.metrics;
        println!("scenario {} (seed {})", report.scenario, report.seed);
        println!("  messages   {} ({} interests, {} content)", m.messages, m.interests, m.contents);
        println!("  commands   {} issued, {} executed, {} acked, {} failed", m.commands, m.executed, m.acked, m.failed);
        println!("  latency    min {} / mean {:.1} / max {} ms", m.latency.min_ms, m.latency.mean_ms, m.latency.max_ms);
        println!("  rejected   {:?}", m.rejected);
        if m.poll_interests > 0 {
            println!("  polls      {}", m.poll_interests);
        }
        for f in &report.failures {
            println!("  FAIL {f}");
        }
        println!("{}", if report.passed() { "PASS" } else { "FAIL" });
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run { scenario, seed, log, json } => run(&scenario, seed, log, json),
        Cmd::AttackSuite => {
            let outcomes = run_adversary_suite();
            for o in &outcomes {
                println!(
                    "{} {:<20} {:<28} executed={} acked={} failed={} rejected={:?}",
                    if o.passed { "PASS" } else { "FAIL" },
                    o.attack,
                    o.scenario,
                    o.executed,
                    o.acked,
                    o.failed,
                    o.rejected
                );
                for f in &o.failures {
                    println!("     {f}");
                }
            }
            Ok(outcomes.iter().all(|o| o.passed))
        }
        Cmd::Bench { iters, csv } => {
            let table = bench(iters);
            print!("{}", table.render());
            match csv {
                Some(path) => table
                    .to_csv()
                    .map_err(|e| e.to_string())
                    .and_then(|text| std::fs::write(&path, text).map_err(|e| format!("{}: {e}", path.display())))
                    .map(|()| table.passed()),
                None => Ok(table.passed()),
            }
        }
        Cmd::Gateway { listen, scenario, token } => load(&scenario).and_then(|s| {
            eprintln!("gateway on {listen} with scenario {}", s.name);
            serve(&s, &listen, GatewayOptions { token }).map(|()| true).map_err(|e| e.to_string())
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
