use std::sync::OnceLock;

use nls_bnf_core::algebra::classify::initial_hamiltonian;
use nls_bnf_core::algebra::{poisson_bracket, Bucket, MonoKey, Polynomial};
use nls_bnf_core::divisor::{monte_carlo_violation, EnvelopeParams, EnvelopeVariant, MonteCarloConfig};
use nls_bnf_core::flow::{
    generator_flow_with, initial_state, stability_experiment, transform_distance, FlowOptions,
    SimConfig, Stepper,
};
use nls_bnf_core::lattice::box_points;
use nls_bnf_core::normal_form::{
    build_generator, cancellation_residual, check_conditions, evaluate_conditions, lie_transform,
    ConditionInput, IterationSchedule, NormalFormRun, RunMode,
};
use nls_bnf_core::oracle::{bracket_by_differentiation, random_polynomial, random_real_polynomial, random_state};
use nls_bnf_core::{Complex64, FourierState, LatticeVector, PotentialParams, RandomPotential};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Outcome;
use crate::commands::{report_passes, run_ensemble, run_normal_form, summarize};
use crate::config::RunConfig;

fn envelope() -> EnvelopeParams {
    EnvelopeParams::from_gamma(0.2, EnvelopeVariant::MuExponent).expect("valid gamma")
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

pub fn bracket_oracle() -> Outcome {
    const PAIRS: usize = 240;
    let mut rng = ChaCha8Rng::seed_from_u64(0xb1);
    let mut worst: f64 = 0.0;
    let mut terms = 0;
    for i in 0..PAIRS {
        let dim = 1 + i % 2;
        let pts = box_points(dim, 3);
        let count = rng.random_range(1..=5);
        let modes: Vec<LatticeVector> = sample(&mut rng, pts.len(), count)
            .into_iter()
            .map(|j| pts[j])
            .collect();
        let (nf, ng) = (rng.random_range(1..=5), rng.random_range(1..=5));
        let f = random_polynomial(&mut rng, &modes, nf, 8);
        let g = random_polynomial(&mut rng, &modes, ng, 8);
        let rules = poisson_bracket(&f, &g);
        let oracle = bracket_by_differentiation(&f, &g);
        terms += rules.len();
        worst = worst.max(rules.max_relative_deviation(&oracle));
    }
    Outcome::new(
        worst <= 1e-12,
        format!("{PAIRS} pairs, {terms} bracket terms, max relative deviation {worst:.3e} (limit 1e-12)"),
    )
    .metric("pairs", PAIRS as f64)
    .metric("max_relative_deviation", worst)
}

pub fn generator_cancellation() -> Outcome {
    const BLOCKS: usize = 60;
    let eps = 0.05;
    let env = envelope();
    let schedule = IterationSchedule::new(6, eps, 0.0, vec![1.0, 2.0]);
    let mut done = 0;
    let mut skipped = 0;
    let mut worst: f64 = 0.0;
    let mut seed = 0;
    while done < BLOCKS {
        seed += 1;
        let params = PotentialParams { dim: 1 + (seed % 2) as usize, r: 1.0, m: 2, cutoff: 4, seed };
        let pot = match RandomPotential::sample(params) {
            Ok(p) => p,
            Err(e) => return Outcome::failed(e),
        };
        let h = match initial_hamiltonian(&pot, schedule.class_params(1.0, 2.0)) {
            Ok(h) => h,
            Err(e) => return Outcome::failed(e),
        };
        let block = h.targeted_block(1.0, 2.0);
        if block.is_empty() {
            skipped += 1;
            continue;
        }
        let Ok((f, _)) = build_generator(&block, &pot, &env, eps) else {
            skipped += 1;
            continue;
        };
        let r = cancellation_residual(&block, h.bucket(Bucket::S0), &f);
        worst = worst.max(r.norm1() / block.norm1());
        done += 1;
    }
    Outcome::new(
        worst <= 1e-12,
        format!(
            "{done} certified blocks ({skipped} uncertified skipped), max |block + {{F, Sigma_0}}|_1 / |block|_1 = {worst:.3e} (limit 1e-12)"
        ),
    )
    .metric("blocks", done as f64)
    .metric("max_relative_residual", worst)
}

/// Errors of the order-1..5 Lie series against the numerical time-1 flow on
/// a three-mode toy.
pub fn lie_errors() -> nls_bnf_core::Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let v = |x: i32| LatticeVector::new(&[x]);
    let modes = [v(-1), v(0), v(2)];
    let mut h = Polynomial::new();
    for (n, w) in modes.iter().zip([1.3, 0.2, 4.1]) {
        h.add_term(MonoKey::action(*n), Complex64::new(w, 0.0));
    }
    h.add_assign(&random_real_polynomial(&mut rng, &modes, 4, 4));
    let f = random_real_polynomial(&mut rng, &modes, 4, 4).filter(|k| k.degree() == 4);
    let q = random_state(&mut rng, 1, 2, &modes, 0.15);
    let opts = FlowOptions { tol: 1e-14, max_steps: 1_000_000 };
    let exact = h.evaluate(&generator_flow_with(&f, &q, 1.0, &opts)?.0);
    (1..=5)
        .map(|k| Ok((lie_transform(&h, &f, k)?.evaluate(&q) - exact).norm()))
        .collect()
}

pub fn lie_flow_consistency() -> Outcome {
    let errs = match lie_errors() {
        Ok(e) => e,
        Err(e) => return Outcome::failed(e),
    };
    // errs[k] is the order-(k+1) error; factors for orders 2 -> 3 -> 4 -> 5.
    let factors: Vec<f64> = (1..4).map(|k| errs[k] / errs[k + 1]).collect();
    let min = factors.iter().copied().fold(f64::INFINITY, f64::min);
    let mut out = Outcome::new(
        min >= 5.0,
        format!(
            "errors at orders 1..5: {}; factors 2->3->4->5: {:.1}, {:.1}, {:.1} (need >= 5)",
            errs.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join(", "),
            factors[0],
            factors[1],
            factors[2]
        ),
    )
    .metric("min_factor", min);
    for (k, e) in errs.iter().enumerate() {
        out = out.metric(&format!("error_order_{}", k + 1), *e);
    }
    out
}

pub fn divisor_statistics() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    let mut out = Outcome::new(true, String::new());
    for dim in [1usize, 2] {
        let cfg = MonteCarloConfig {
            r_max: 2,
            k_max: 4,
            envelope: envelope(),
            potential: PotentialParams { dim, r: 1.0, m: 2, cutoff: 4, seed: 10_000 * dim as u64 },
            trials: 2000,
            enumeration_limit: 100_000_000,
        };
        let r = match monte_carlo_violation(&cfg) {
            Ok(r) => r,
            Err(e) => return Outcome::failed(e),
        };
        ok &= r.fraction <= 0.2 && r.resonant_nonzero == 0 && r.resonant_tuples > 0;
        parts.push(format!(
            "d={dim}: {} / {} violating, fraction {:.4} (95% Wilson upper {:.4}), {} nonresonant and {} resonant tuples, {} nonzero resonant divisors",
            r.violations, r.trials, r.fraction, r.wilson_high, r.nonresonant_tuples, r.resonant_tuples, r.resonant_nonzero
        ));
        out = out
            .metric(&format!("fraction_d{dim}"), r.fraction)
            .metric(&format!("wilson_high_d{dim}"), r.wilson_high)
            .metric(&format!("resonant_nonzero_d{dim}"), r.resonant_nonzero as f64)
            .metric(&format!("min_margin_d{dim}"), r.min_margin);
    }
    out.passed = ok;
    out.detail = parts.join("; ");
    out
}

/// The desk normal-form run: `d = 1, K = 8, A = 6, eps = 0.05, s = 0`,
/// cutoffs `1, 2`, brackets capped at degree 8.
pub fn desk_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.global.d = 1;
    cfg.global.k = 8;
    cfg.global.eps = 0.05;
    cfg.global.seed = 1;
    let nf = &mut cfg.normal_form;
    nf.a = 6;
    nf.s = 0.0;
    nf.cutoffs = vec![1.0, 2.0];
    nf.max_degree = 8;
    nf.empirical = true;
    cfg
}

fn desk_run() -> &'static Result<NormalFormRun, String> {
    static RUN: OnceLock<Result<NormalFormRun, String>> = OnceLock::new();
    RUN.get_or_init(|| run_normal_form(&desk_config()).map(|r| r.0).map_err(|e| e.to_string()))
}

pub fn induction_conformance() -> Outcome {
    let run = match desk_run() {
        Ok(r) => r,
        Err(e) => return Outcome::failed(e),
    };
    let rep = &run.report;
    let initial = rep.initial_bounds.as_ref().map_or(f64::INFINITY, |b| b.max_ratio);
    let worst = rep.all_bounds().map(|b| b.max_ratio).fold(0.0, f64::max);
    let extra = rep.steps.iter().filter(|s| s.extra_eps_holds).count();
    let ok = report_passes(rep) && initial <= 1.0 && !rep.steps.is_empty();
    Outcome::new(
        ok,
        format!(
            "initial ratio {initial:.3e}; {} steps and {} upgrades, worst bound ratio {worst:.3e}; extra eps in {extra}/{} steps; max residual {:.2e}; routing conformant {}",
            rep.steps.len(),
            rep.upgrades.len(),
            rep.steps.len(),
            rep.max_residual_relative,
            rep.routing_conformant
        ),
    )
    .metric("initial_max_ratio", initial)
    .metric("worst_max_ratio", worst)
    .metric("steps", rep.steps.len() as f64)
    .metric("max_residual_relative", rep.max_residual_relative)
}

fn pot1(k: u32) -> nls_bnf_core::Result<RandomPotential> {
    RandomPotential::sample(PotentialParams { dim: 1, r: 1.0, m: 2, cutoff: k, seed: 7 })
}

fn simulator_checks() -> nls_bnf_core::Result<(f64, f64, Vec<f64>)> {
    let p16 = pot1(16)?;
    let cfg = SimConfig { k: 16, eps: 0.5, s: 1.0, dt: 1e-3, t_final: 10.0, sample_every: 100, ..Default::default() };
    let mass = stability_experiment(&cfg, &p16)?.max_mass_deviation;

    let p8 = pot1(8)?;
    let n = LatticeVector::new(&[3]);
    let a = Complex64::new(0.8, 0.0);
    let mut st = FourierState::new(1, 8);
    st.set(n, a)?;
    let c = SimConfig { k: 8, dt: 1e-3, t_final: 1.0, ..Default::default() };
    let mut s = Stepper::new(&c, &p8)?;
    s.load(&st)?;
    for _ in 0..1000 {
        s.step()?;
    }
    let w = n.norm_sq() as f64 + p8.get(&n)? + c.cubic_coeff * a.norm_sqr();
    let phase = (s.state().get(&n) - a * Complex64::from_polar(1.0, -w)).norm();

    let mut drifts = Vec::new();
    for dt in [4e-3, 2e-3, 1e-3] {
        let c = SimConfig { k: 16, eps: 1.0, s: 1.0, dt, t_final: 1.0, sample_every: 1, ..Default::default() };
        drifts.push(stability_experiment(&c, &p16)?.max_energy_deviation);
    }
    Ok((mass, phase, drifts))
}

pub fn simulator_correctness() -> Outcome {
    let (mass, phase, drifts) = match simulator_checks() {
        Ok(x) => x,
        Err(e) => return Outcome::failed(e),
    };
    let r1 = drifts[0] / drifts[1];
    let r2 = drifts[1] / drifts[2];
    let ok = mass <= 1e-10 && phase <= 1e-6 && (r1 - 4.0).abs() <= 0.5 && (r2 - 4.0).abs() <= 0.5;
    Outcome::new(
        ok,
        format!(
            "mass deviation {mass:.2e} over 1e4 steps (limit 1e-10); plane-wave error {phase:.2e} at t=1 (limit 1e-6); energy drift ratios {r1:.3}, {r2:.3} (need 4 +- 0.5)"
        ),
    )
    .metric("mass_deviation", mass)
    .metric("plane_wave_error", phase)
    .metric("energy_ratio_1", r1)
    .metric("energy_ratio_2", r2)
}

/// `d = 1, K = 32, s = 6, eps = 0.05, T = 400, dt = 0.01`, 20 seeds.
pub fn ensemble_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.global.d = 1;
    cfg.global.k = 32;
    cfg.global.eps = 0.05;
    cfg.global.seed = 1;
    let sc = &mut cfg.simulate;
    sc.s = 6.0;
    sc.dt = 0.01;
    sc.t_final = 400.0;
    sc.ensemble = 20;
    sc.certify = true;
    sc.drift_factor = 10.0;
    cfg
}

pub fn stability_ensemble() -> Outcome {
    let cfg = ensemble_config();
    let runs = match run_ensemble(&cfg) {
        Ok(r) => r,
        Err(e) => return Outcome::failed(e),
    };
    let s = summarize(&cfg, &runs);
    let worst = s.runs.iter().map(|r| r.sup_ratio).fold(0.0, f64::max);
    let max_drift = s.runs.iter().map(|r| r.final_drift).fold(0.0, f64::max);
    let within = s.runs.iter().filter(|r| r.drift_within_threshold).count();
    Outcome::new(
        s.pass_fraction == 1.0 && within == s.runs.len(),
        format!(
            "{} runs, pass fraction {} (need 1.0), worst sup ratio {worst:.4}; drift median {:.3e}, threshold {:.3e} (median x10), max {max_drift:.3e}, {within}/{} within",
            s.runs.len(),
            s.pass_fraction,
            s.drift_median,
            s.drift_threshold,
            s.runs.len()
        ),
    )
    .metric("pass_fraction", s.pass_fraction)
    .metric("worst_sup_ratio", worst)
    .metric("drift_median", s.drift_median)
    .metric("drift_threshold", s.drift_threshold)
    .metric("max_drift", max_drift)
}

/// `transform_distance / eps^2` for each generator, at a state with
/// `|q|_{H^s} = eps`.
pub fn closeness_ratios(cfg: &RunConfig, run: &NormalFormRun) -> nls_bnf_core::Result<Vec<f64>> {
    let eps = cfg.global.eps;
    let s = cfg.normal_form.s;
    // initial_state normalizes to |q|_{H^s} = eps^2 for its eps field.
    let sim = SimConfig { d: cfg.global.d, k: cfg.global.k, eps: eps.sqrt(), s, seed: cfg.global.seed, ..Default::default() };
    let q = initial_state(&sim);
    run.generators
        .iter()
        .map(|f| Ok(transform_distance(f, &q, s)? / (eps * eps)))
        .collect()
}

pub fn symplectic_closeness() -> Outcome {
    let cfg = desk_config();
    let first = match desk_run() {
        Ok(r) => r,
        Err(e) => return Outcome::failed(e),
    };
    let again = match run_normal_form(&cfg) {
        Ok(r) => r.0,
        Err(e) => return Outcome::failed(e),
    };
    let (a, b) = match (closeness_ratios(&cfg, first), closeness_ratios(&cfg, &again)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return Outcome::failed(e),
    };
    let worst = a.iter().copied().fold(0.0, f64::max);
    let finite = a.iter().all(|x| x.is_finite());
    let reproducible = a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| rel_close(*x, *y, 1e-12) || x == y);
    let certified = first.report.mode == RunMode::Certified;
    let ok = finite && reproducible && !a.is_empty() && (!certified || worst <= 1.0);
    Outcome::new(
        ok,
        format!(
            "{} generators, max distance / eps^2 = {worst:.3e}, {} mode ({}), finite {finite}, reproducible to 1e-12 {reproducible}",
            a.len(),
            if certified { "certified" } else { "empirical" },
            if certified { "must be <= 1" } else { "logged" },
        ),
    )
    .metric("generators", a.len() as f64)
    .metric("max_ratio", worst)
}

pub fn condition_evaluator() -> Outcome {
    let large = evaluate_conditions(&ConditionInput::large_a(1, 0.2));
    let names = ["tau_eq_50A2", "s_eq_s1_plus_5tau", "m_le_s_over_A"];
    let holds: Vec<bool> = names.iter().map(|n| large.get(n).is_some_and(|i| i.holds)).collect();
    // Desk A with the large-A relation s = A^3.
    let desk = IterationSchedule::new(6, 0.05, 216.0, vec![1.0, 2.0]);
    let rep = check_conditions(&desk, &envelope(), 2);
    let ep_s = rep.get("ep-s").map(|i| i.holds);
    let ok = holds.iter().all(|h| *h) && ep_s == Some(false) && rep.mode == RunMode::Empirical;
    let shown: Vec<String> = names.iter().zip(&holds).map(|(n, h)| format!("{n} {h}")).collect();
    Outcome::new(
        ok,
        format!(
            "large-A schedule (A=200, s=A^3, m=A^2): {}; desk schedule (A=6, s=216, eps=0.05) ep-s {:?}, mode {:?}",
            shown.join(", "),
            ep_s,
            rep.mode
        ),
    )
}
