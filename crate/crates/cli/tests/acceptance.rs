//! The acceptance suite as a test target: one PASS/FAIL line per criterion,
//! nonzero exit if any criterion fails. `cargo test --test acceptance -- 3 5`
//! runs a subset.

use std::process::ExitCode;

use nls_bnf_cli::acceptance::{run_criterion, IDS};

fn main() -> ExitCode {
    let picked: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let ids = if picked.is_empty() { IDS.to_vec() } else { picked };
    let mut failed = 0;
    for id in ids {
        let r = run_criterion(id).expect("known criterion");
        println!("{}", r.line());
        if !r.passed {
            failed += 1;
        }
    }
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
