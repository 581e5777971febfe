//! Scenario runner, adversary suite, benchmarks and the live gateway for
//! the lighting-control protocol in `lumen-core`.

pub mod actors;
pub mod adversary;
pub mod attacks;
pub mod bench;
pub mod config;
pub mod gateway;
pub mod light;
pub mod metrics;
pub mod runner;

pub use attacks::{run_adversary_suite, AttackOutcome};
pub use config::{ConfigError, Scenario};
pub use metrics::Metrics;
pub use runner::{build, run_many, run_scenario, RunReport, World};
