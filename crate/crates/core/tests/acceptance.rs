//! Acceptance run: one line per criterion, printed on every `cargo test`.
//!
//! Criteria 1 and 3 contain sub-checks that the mathematics does not satisfy
//! (reasons below). They are run exactly as stated, reported as FAIL, and
//! tracked as expected failures: the run exits nonzero if any other criterion
//! fails, if an expected failure starts passing, or if it fails for a
//! different reason than the recorded one.

use std::process::ExitCode;

use projmetric::acceptance::{run_criterion, CriterionResult, ACCEPTANCE_SEED, CRITERIA};

/// Criteria that fail as stated, with the reason.
const EXPECTED_FAILURES: [(u8, &str); 2] = [
    (1, "(1,y) is not a projective field of the (2c) normal form in its own coordinates"),
    (3, "the (2c) closed forms pinned for I and Delta R are off by the constant factors 36 and 3"),
];

fn failed_items(r: &CriterionResult) -> Vec<&str> {
    let Some(rest) = r.detail.split("failed: ").nth(1) else {
        return Vec::new();
    };
    // failed items are `; `-separated and precede the `, `-separated passing summary
    let mut items: Vec<&str> = rest.split("; ").collect();
    if let Some(last) = items.last_mut() {
        for summary in [", max ", ", (1a)"] {
            *last = last.split(summary).next().unwrap_or(last);
        }
    }
    items
}

/// The failing sub-checks are exactly the recorded ones.
fn failure_matches_record(r: &CriterionResult) -> bool {
    let items = failed_items(r);
    match r.number {
        1 => items.len() == 1 && items[0].starts_with("2c(") && items[0].contains("symmetry residual of (1,y)"),
        3 => {
            !items.is_empty()
                && items.iter().all(|i| i.starts_with("(2c) I ") || i.starts_with("(2c) Delta R "))
                && r.detail.contains("computed/display = 36.000000")
                && r.detail.contains("computed/display = 3.000000")
        }
        _ => false,
    }
}

fn main() -> ExitCode {
    let mut unexpected = Vec::new();
    let mut red = 0;
    let mut expected_red = 0;
    for number in 1..=CRITERIA.len() as u8 {
        let r = match run_criterion(number, ACCEPTANCE_SEED) {
            Some(r) => r,
            None => {
                println!("criterion {number} [FAIL] not implemented");
                unexpected.push(number);
                continue;
            }
        };
        println!("{r}");
        if !r.passed {
            red += 1;
        }
        match EXPECTED_FAILURES.iter().find(|(n, _)| *n == number) {
            Some((_, reason)) => {
                if r.passed {
                    println!("  criterion {number} now passes; remove it from the expected failures");
                    unexpected.push(number);
                } else if failure_matches_record(&r) {
                    println!("  expected failure: {reason}");
                    expected_red += 1;
                } else {
                    println!("  fails for an unrecorded reason");
                    unexpected.push(number);
                }
            }
            None if !r.passed => unexpected.push(number),
            None => {}
        }
    }
    println!(
        "acceptance: {} passed, {red} failed ({expected_red} expected), seed {ACCEPTANCE_SEED}",
        CRITERIA.len() - red,
    );
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("acceptance: unexpected outcome for criteria {unexpected:?}");
        ExitCode::FAILURE
    }
}
