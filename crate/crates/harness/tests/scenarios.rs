use lumen_harness::attacks::{bundled, BUNDLED};
use lumen_harness::run_many;

#[test]
fn every_bundled_scenario_passes() {
    let scenarios: Vec<_> = BUNDLED.iter().map(|(n, _)| bundled(n).unwrap()).collect();
    for ((file, _), report) in BUNDLED.iter().zip(run_many(scenarios)) {
        let r = report.unwrap();
        let m = &r.metrics;
        println!(
            "{file}: messages={} executed={} acked={} failed={} rejected={:?} ignored={:?} max_latency={}",
            m.messages, m.executed, m.acked, m.failed, m.rejected, m.ignored, m.latency.max_ms
        );
        assert!(r.passed(), "{file}: {:?}", r.failures);
    }
}
