//! Prints one PASS/FAIL line per acceptance criterion.

mod common;

use std::io::Write;

use common::criteria::{self, Check};

// Written to the process stdout directly so the lines survive test capture.
fn say(text: String) {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}").unwrap();
    out.flush().unwrap();
}

fn line(name: &str, result: &Check) -> bool {
    match result {
        Ok(detail) => say(format!("PASS {name}: {detail}")),
        Err(reason) => say(format!("FAIL {name}: {reason}")),
    }
    result.is_ok()
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn acceptance() {
    let results = [
        ("routing_exhaustion", criteria::routing_all().await),
        ("guideline_utterances", criteria::reference_utterances()),
        ("parser_properties", criteria::parser_properties()),
        ("sim_vs_oracle", criteria::sim_oracles()),
        ("end_to_end_session", criteria::end_to_end().await),
        ("replay_determinism", criteria::replay_determinism()),
        ("golden_images", criteria::golden_images()),
    ];
    let passed = results.iter().filter(|(n, r)| line(n, r)).count();
    say(format!("{passed}/{} criteria passed", results.len()));
    assert_eq!(passed, results.len());
}
