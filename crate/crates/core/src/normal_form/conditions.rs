//! Parameter conditions of the iteration, evaluated in log space so that the
//! large-`A` schedule (with `eps` far below `f64` range) can be checked too.

use serde::{Deserialize, Serialize};

use super::schedule::IterationSchedule;
use crate::divisor::EnvelopeParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    Certified,
    Empirical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionInput {
    #[serde(rename = "A")]
    pub a: usize,
    pub s: f64,
    pub s1: f64,
    pub tau: f64,
    pub ln_eps: f64,
    pub cutoffs: Vec<f64>,
    pub m: u32,
    #[serde(rename = "C")]
    pub c: f64,
}

impl ConditionInput {
    pub fn from_schedule(schedule: &IterationSchedule, env: &EnvelopeParams, m: u32) -> Self {
        Self {
            a: schedule.a,
            s: schedule.s,
            s1: schedule.s1,
            tau: schedule.tau,
            ln_eps: schedule.eps.ln(),
            cutoffs: schedule.cutoffs.clone(),
            m,
            c: env.c,
        }
    }

    /// `A = 200 B`, `s = A^3`, `m = A^2`, `s1 = s - 5 tau`, with `eps` one
    /// `e`-fold below `A^{-s}` and `N_inf = eps^{-A/(100 s)}`; cutoffs
    /// `1, N_inf^{1/2}, N_inf`. `tau` follows `reading`.
    pub fn large_a_with(b: usize, gamma: f64, reading: TauReading) -> Self {
        let a = 200 * b;
        let af = a as f64;
        let s = af.powi(3);
        let tau = match reading {
            TauReading::FiftyASquared => 50.0 * af * af,
            TauReading::TenSOverA => 10.0 * s / af,
        };
        let ln_eps = -s * af.ln() - 1.0;
        let ln_n_inf = -(af / (100.0 * s)) * ln_eps;
        Self {
            a,
            s,
            s1: s - 5.0 * tau,
            tau,
            ln_eps,
            cutoffs: vec![1.0, (0.5 * ln_n_inf).exp(), ln_n_inf.exp()],
            m: (a * a) as u32,
            c: (40.0 / gamma).powi(4),
        }
    }

    /// The large-`A` schedule with `tau = 50 A^2`.
    pub fn large_a(b: usize, gamma: f64) -> Self {
        Self::large_a_with(b, gamma, TauReading::FiftyASquared)
    }
}

/// The two incompatible values of `tau` at `s = A^3`: a fixed `50 A^2`, or
/// `10 s / A = 10 A^2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TauReading {
    FiftyASquared,
    TenSOverA,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionItem {
    pub name: String,
    /// `ln` of the left side (or the compared quantity).
    pub lhs: f64,
    /// `ln` of the right side.
    pub rhs: f64,
    pub holds: bool,
    /// `rhs - lhs`, or minus the mismatch for equalities.
    pub slack: f64,
    /// Counts toward certification.
    pub required: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub input: ConditionInput,
    pub items: Vec<ConditionItem>,
    pub mode: RunMode,
}

impl ConditionReport {
    pub fn get(&self, name: &str) -> Option<&ConditionItem> {
        self.items.iter().find(|i| i.name == name)
    }
}

fn le(name: &str, lhs: f64, rhs: f64, required: bool) -> ConditionItem {
    ConditionItem {
        name: name.into(),
        lhs,
        rhs,
        holds: lhs <= rhs,
        slack: rhs - lhs,
        required,
    }
}

fn eq(name: &str, lhs: f64, rhs: f64, required: bool) -> ConditionItem {
    let diff = (lhs - rhs).abs();
    ConditionItem {
        name: name.into(),
        lhs,
        rhs,
        holds: diff <= 1e-12 * lhs.abs().max(rhs.abs()).max(1.0),
        slack: -diff,
        required,
    }
}

/// Worst case over consecutive cutoff pairs `(N_a, N_{a+1})` of
/// `ln eps + extra + 4A^2 ln N_inf + m ln N_{a+1} + (A/m) ln C + w ln N_a`.
fn worst(inp: &ConditionInput, extra: f64, w: f64) -> f64 {
    let af = inp.a as f64;
    let mf = inp.m as f64;
    let ln_inf = inp.cutoffs.last().copied().unwrap_or(1.0).ln();
    let base = inp.ln_eps + extra + 4.0 * af * af * ln_inf + (af / mf) * inp.c.ln();
    inp.cutoffs
        .windows(2)
        .map(|p| {
            let wa = if w == 0.0 { 0.0 } else { w * p[0].ln() };
            base + mf * p[1].ln() + wa
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn evaluate_conditions(inp: &ConditionInput) -> ConditionReport {
    let af = inp.a as f64;
    let mf = inp.m as f64;
    let ln_a = af.ln();
    let ln_inf = inp.cutoffs.last().copied().unwrap_or(1.0).ln();
    let ln_c_am = (af / mf) * inp.c.ln();
    let mut items = vec![
        le("cond1", worst(inp, ln_a, 0.0), 0.0, true),
        le("cond20", worst(inp, 2.0 * ln_a, 0.0), 0.0, true),
        le("cond2", worst(inp, 2.0 * ln_a, 2.0 * inp.tau), 0.0, true),
        le(
            "cond3",
            worst(inp, 2.0 * ln_a, -2.0 * inp.s1 + 2.0 * inp.tau),
            0.0,
            true,
        ),
        le(
            "cond33",
            worst(inp, 2.0 * ln_a, -3.0 * inp.s1 + 3.0 * inp.tau),
            0.0,
            true,
        ),
        le(
            "overallcondition",
            inp.ln_eps + 2.0 * ln_a + (4.0 * af * af + mf) * ln_inf + ln_c_am,
            0.0,
            true,
        ),
        le("ep-s", inp.s * ln_a + inp.ln_eps, 0.0, true),
        le("condition", 0.5 * inp.ln_eps + ln_c_am, 0.0, true),
        eq(
            "N_inf",
            ln_inf,
            -(af / (100.0 * inp.s)) * inp.ln_eps,
            true,
        ),
        le("m_le_s_over_A", mf, inp.s / af, true),
        eq("s_eq_s1_plus_5tau", inp.s, inp.s1 + 5.0 * inp.tau, true),
        eq("tau_eq_10s_over_A", inp.tau, 10.0 * inp.s / af, true),
        le("s_ge_A3", af.powi(3), inp.s, false),
        eq("tau_eq_50A2", inp.tau, 50.0 * af * af, false),
        eq("five_tau_eq_50A2", 5.0 * inp.tau, 50.0 * af * af, false),
    ];
    // A^2 << tau << s1, read as a factor of at least ten at each step.
    let a2 = af * af;
    items.push(ConditionItem {
        name: "A2_ll_tau_ll_s1".into(),
        lhs: (10.0 * a2).ln().max((10.0 * inp.tau).ln()),
        rhs: if inp.s1 > 0.0 {
            inp.tau.ln().min(inp.s1.ln())
        } else {
            f64::NEG_INFINITY
        },
        holds: 10.0 * a2 <= inp.tau && 10.0 * inp.tau <= inp.s1,
        slack: (inp.tau / (10.0 * a2))
            .min(inp.s1 / (10.0 * inp.tau))
            .max(0.0)
            .ln(),
        required: false,
    });
    let mode = if items.iter().filter(|i| i.required).all(|i| i.holds) {
        RunMode::Certified
    } else {
        RunMode::Empirical
    };
    ConditionReport {
        input: inp.clone(),
        items,
        mode,
    }
}

pub fn check_conditions(
    schedule: &IterationSchedule,
    env: &EnvelopeParams,
    m: u32,
) -> ConditionReport {
    evaluate_conditions(&ConditionInput::from_schedule(schedule, env, m))
}
