//! Full verification suite as the acceptance gate: one pass/fail line per
//! criterion, then a single assertion over the whole suite.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use twophase::verify;

#[test]
fn acceptance_criteria() {
    let results = verify::run_all();
    let mut failed = Vec::new();
    for r in &results {
        println!(
            "criterion {:>2} {:<28} {}  {}",
            r.id,
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.detail
        );
        if !r.passed {
            failed.push(format!("criterion {} ({})", r.id, r.name));
        }
    }
    assert!(
        failed.is_empty(),
        "failed acceptance criteria: {}",
        failed.join(", ")
    );
}
