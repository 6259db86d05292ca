//! The acceptance suite: nine criteria, each reduced to a pass/fail line with
//! the measured quantities attached.

mod criteria;

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

pub use criteria::desk_config;

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub metrics: BTreeMap<String, f64>,
    pub elapsed_s: f64,
    pub budget_s: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] {}. {}: {} ({:.1} s of {:.0} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.elapsed_s,
            self.budget_s
        )
    }
}

/// What a criterion body reports before timing is attached.
pub(crate) struct Outcome {
    pub passed: bool,
    pub detail: String,
    pub metrics: BTreeMap<String, f64>,
}

impl Outcome {
    pub fn new(passed: bool, detail: String) -> Self {
        Self { passed, detail, metrics: BTreeMap::new() }
    }

    pub fn metric(mut self, name: &str, value: f64) -> Self {
        self.metrics.insert(name.to_string(), value);
        self
    }

    pub fn failed(err: impl std::fmt::Display) -> Self {
        Self::new(false, format!("error: {err}"))
    }
}

pub const IDS: [u8; 9] = [1, 2, 3, 4, 5, 6, 7, 8, 9];

/// `(name, runtime budget in seconds)`.
pub fn describe(id: u8) -> Option<(&'static str, f64)> {
    Some(match id {
        1 => ("bracket oracle equivalence", 60.0),
        2 => ("generator cancellation", 60.0),
        3 => ("Lie/flow consistency", 60.0),
        4 => ("small-divisor statistics", 300.0),
        5 => ("induction-bound conformance", 600.0),
        6 => ("simulator correctness", 120.0),
        7 => ("desk-scale stability ensemble", 1800.0),
        8 => ("symplectic closeness", 600.0),
        9 => ("parameter-condition evaluator", 60.0),
        _ => return None,
    })
}

/// Runs one criterion; a criterion over its runtime budget fails.
pub fn run_criterion(id: u8) -> Option<CriterionResult> {
    let (name, budget_s) = describe(id)?;
    let start = Instant::now();
    let out = match id {
        1 => criteria::bracket_oracle(),
        2 => criteria::generator_cancellation(),
        3 => criteria::lie_flow_consistency(),
        4 => criteria::divisor_statistics(),
        5 => criteria::induction_conformance(),
        6 => criteria::simulator_correctness(),
        7 => criteria::stability_ensemble(),
        8 => criteria::symplectic_closeness(),
        9 => criteria::condition_evaluator(),
        _ => unreachable!(),
    };
    let elapsed_s = start.elapsed().as_secs_f64();
    let in_budget = elapsed_s <= budget_s;
    let mut detail = out.detail;
    if !in_budget {
        detail.push_str("; over runtime budget");
    }
    Some(CriterionResult {
        id,
        name,
        passed: out.passed && in_budget,
        detail,
        metrics: out.metrics,
        elapsed_s,
        budget_s,
    })
}

pub fn run(ids: &[u8]) -> Vec<CriterionResult> {
    ids.iter().filter_map(|&id| run_criterion(id)).collect()
}
