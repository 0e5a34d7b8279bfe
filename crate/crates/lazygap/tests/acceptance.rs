//! Runs every acceptance criterion in sequence and prints one line each.

use lazygap::accept::{run_criterion, CRITERIA};

#[test]
fn acceptance_suite() {
    let mut failed = Vec::new();
    for id in CRITERIA {
        let report = run_criterion(id);
        println!("{}", report.line());
        if !report.passed {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
