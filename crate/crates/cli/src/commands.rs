//! The subcommands. Each writes its artifacts under the output directory and
//! embeds the resolved config in every JSON file it emits.

use std::fmt;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use nls_bnf_core::algebra::classify::initial_hamiltonian;
use nls_bnf_core::algebra::text::{format_classified, parse_polynomial};
use nls_bnf_core::algebra::ClassifiedHamiltonian;
use nls_bnf_core::divisor::{
    certify, enumerate_tuples, monte_carlo_violation, omega_scaled, DivisorRecord,
    MonteCarloConfig, MonteCarloResult, TupleSet,
};
use nls_bnf_core::flow::{run_trajectory, stability_experiment, Trajectory};
use nls_bnf_core::normal_form::{check_conditions, nf_iterate, NormalFormReport, NormalFormRun, RunMode};
use nls_bnf_core::{Complex64, Error as CoreError, FourierState, LatticeVector, OscIndex, RandomPotential};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{InitialData, RecordFilter, RunConfig};

/// Process exit codes.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const VERDICT_FAIL: i32 = 2;
    pub const BAD_POTENTIAL: i32 = 3;
    pub const CONFIG: i32 = 4;
}

/// Invalid or inconsistent configuration.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Every resampled potential was rejected.
#[derive(Debug)]
pub struct RetriesExhausted {
    pub attempts: usize,
    pub last: String,
}

impl fmt::Display for RetriesExhausted {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "no acceptable potential after {} attempts; last: {}", self.attempts, self.last)
    }
}

impl std::error::Error for RetriesExhausted {}

pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<ConfigError>().is_some() {
        exit::CONFIG
    } else if err.downcast_ref::<RetriesExhausted>().is_some() {
        exit::BAD_POTENTIAL
    } else {
        exit::OTHER
    }
}

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

/// Outcome of a command that ran to completion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => exit::PASS,
            Verdict::Fail => exit::VERDICT_FAIL,
        }
    }
}

/// Seed of the `attempt`-th resample. The stride keeps retries clear of the
/// consecutive seeds used by ensembles and Monte Carlo trials.
pub fn retry_seed(seed: u64, attempt: usize) -> u64 {
    seed.wrapping_add((attempt as u64) << 32)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn core<T>(r: nls_bnf_core::Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        CoreError::InvalidParameter(m) => config_error(m),
        CoreError::EnumerationTooLarge { .. } => config_error(e.to_string()),
        e => anyhow::Error::new(e),
    })
}

// ---------------------------------------------------------------------------
// sample-potential

#[derive(Serialize)]
struct PotentialFile<'a> {
    config: &'a RunConfig,
    potential: nls_bnf_core::potential::PotentialDocument,
}

pub fn sample_potential(cfg: &RunConfig) -> Result<Verdict> {
    let pot = core(RandomPotential::sample(cfg.potential_params(cfg.global.seed)))?;
    ensure_dir(&cfg.global.output)?;
    write_json(
        &cfg.global.output.join("potential.json"),
        &PotentialFile { config: cfg, potential: pot.to_document() },
    )?;
    Ok(Verdict::Pass)
}

// ---------------------------------------------------------------------------
// divisor-scan

pub fn format_tuple(t: &OscIndex) -> String {
    let join = |v: &[nls_bnf_core::LatticeVector]| {
        v.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",")
    };
    format!("{}|{}", join(t.upper()), join(t.lower()))
}

#[derive(Serialize)]
struct RecordRow {
    tuple: String,
    omega_scaled: f64,
    envelope: f64,
    pass: bool,
}

#[derive(Serialize)]
struct TupleCounts {
    nonresonant: usize,
    resonant: usize,
}

#[derive(Serialize)]
struct SinglePotential {
    seed: u64,
    violations: usize,
    resonant_nonzero: usize,
    min_margin: f64,
}

#[derive(Serialize)]
struct ScanSummary<'a> {
    config: &'a RunConfig,
    tuples: TupleCounts,
    records_written: usize,
    single_potential: SinglePotential,
    monte_carlo: Option<MonteCarloResult>,
    /// Monte Carlo fraction within `gamma` and resonant divisors exactly zero.
    verdict: Verdict,
}

pub fn divisor_scan(cfg: &RunConfig) -> Result<Verdict> {
    let dc = &cfg.divisor;
    if dc.k_max > cfg.global.k {
        return Err(config_error(format!(
            "divisor.k_max {} exceeds global.K {}",
            dc.k_max, cfg.global.k
        )));
    }
    if dc.r_max == 0 {
        return Err(config_error("divisor.r_max must be at least 1"));
    }
    let env = core(cfg.envelope())?;
    let params = cfg.potential_params(cfg.global.seed);
    let pot = core(RandomPotential::sample(params))?;
    let tuples = core(enumerate_tuples(cfg.global.d, dc.r_max, dc.k_max, dc.enumeration_limit))?;
    let records: Vec<DivisorRecord> = core(
        tuples
            .nonresonant
            .par_iter()
            .map(|t| certify(t, &pot, &env))
            .collect(),
    )?;
    let resonant_nonzero = resonant_nonzero(&tuples, &pot)?;

    ensure_dir(&cfg.global.output)?;
    let path = cfg.global.output.join("divisor_records.csv");
    let mut wr = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    let mut written = 0;
    for r in records.iter().filter(|r| match dc.filter {
        RecordFilter::All | RecordFilter::Nonresonant => true,
        RecordFilter::Resonant => false,
        RecordFilter::Violations => !r.passes,
    }) {
        wr.serialize(RecordRow {
            tuple: format_tuple(&r.tuple),
            omega_scaled: r.omega_scaled,
            envelope: r.lower_envelope,
            pass: r.passes,
        })?;
        written += 1;
    }
    if written == 0 {
        wr.write_record(["tuple", "omega_scaled", "envelope", "pass"])?;
    }
    wr.flush()?;

    let monte_carlo = if dc.trials > 0 {
        Some(core(monte_carlo_violation(&MonteCarloConfig {
            r_max: dc.r_max,
            k_max: dc.k_max,
            envelope: env,
            potential: params,
            trials: dc.trials,
            enumeration_limit: dc.enumeration_limit,
        }))?)
    } else {
        None
    };
    let verdict = Verdict::from_bool(
        resonant_nonzero == 0
            && monte_carlo
                .as_ref()
                .is_none_or(|m| m.fraction <= dc.gamma && m.resonant_nonzero == 0),
    );
    let summary = ScanSummary {
        config: cfg,
        tuples: TupleCounts {
            nonresonant: tuples.nonresonant.len(),
            resonant: tuples.resonant.len(),
        },
        records_written: written,
        single_potential: SinglePotential {
            seed: params.seed,
            violations: records.iter().filter(|r| !r.passes).count(),
            resonant_nonzero,
            min_margin: records
                .iter()
                .map(|r| r.omega_scaled.abs() / r.lower_envelope)
                .fold(f64::INFINITY, f64::min),
        },
        monte_carlo,
        verdict,
    };
    write_json(&cfg.global.output.join("divisor_summary.json"), &summary)?;
    Ok(verdict)
}

fn resonant_nonzero(tuples: &TupleSet, pot: &RandomPotential) -> Result<usize> {
    let mut n = 0;
    for t in &tuples.resonant {
        if core(omega_scaled(t, pot))? != 0.0 {
            n += 1;
        }
    }
    Ok(n)
}

// ---------------------------------------------------------------------------
// normal-form

#[derive(Clone, Debug, Serialize)]
pub struct Attempt {
    pub seed: u64,
    pub error: Option<String>,
}

#[derive(Serialize)]
struct NormalFormFile<'a> {
    config: &'a RunConfig,
    attempts: &'a [Attempt],
    error: Option<String>,
    report: &'a NormalFormReport,
    verdict: Verdict,
}

/// All recorded bounds pass, every residual is within tolerance, every step
/// shows the extra `eps` and every routing event lands where allowed.
pub fn report_passes(rep: &NormalFormReport) -> bool {
    rep.all_bounds().all(|b| b.passes)
        && rep.residual_within_tol
        && rep.extra_eps_all
        && rep.routing_conformant
}

/// Runs the iteration, resampling the potential after bad-potential aborts.
/// A read-in Hamiltonian is run once against the configured potential.
pub fn run_normal_form(cfg: &RunConfig) -> Result<(NormalFormRun, Vec<Attempt>)> {
    let schedule = cfg.schedule();
    core(schedule.validate())?;
    let env = core(cfg.envelope())?;
    let conditions = check_conditions(&schedule, &env, cfg.potential.m);
    if conditions.mode == RunMode::Empirical && !cfg.normal_form.empirical {
        let failed: Vec<&str> = conditions
            .items
            .iter()
            .filter(|i| i.required && !i.holds)
            .map(|i| i.name.as_str())
            .collect();
        return Err(config_error(format!(
            "parameter conditions fail ({}) and normal_form.empirical is false",
            failed.join(", ")
        )));
    }
    let input = &cfg.normal_form.input;
    let read_in = if input.as_os_str().is_empty() {
        None
    } else {
        let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
        Some(core(parse_polynomial(&text))?)
    };
    let c = &schedule.cutoffs;
    let tries = if read_in.is_some() { 1 } else { cfg.normal_form.max_retries + 1 };
    let mut attempts = Vec::new();
    for attempt in 0..tries {
        let seed = retry_seed(cfg.global.seed, attempt);
        let pot = core(RandomPotential::sample(cfg.potential_params(seed)))?;
        let params = schedule.class_params(c[0], c[1]);
        let h0 = match &read_in {
            Some(p) => core(ClassifiedHamiltonian::classify(p, params))?,
            None => core(initial_hamiltonian(&pot, params))?,
        };
        match nf_iterate(&h0, &schedule, &pot, &env) {
            Ok(run) => {
                attempts.push(Attempt { seed, error: None });
                return Ok((run, attempts));
            }
            Err(abort) => {
                let msg = abort.error.to_string();
                attempts.push(Attempt { seed, error: Some(msg.clone()) });
                if !matches!(abort.error, CoreError::BadPotential { .. }) {
                    return Err(anyhow::Error::new(NormalFormFailed { abort: *abort, attempts }));
                }
                eprintln!("seed {seed}: {msg}; resampling");
            }
        }
    }
    let last = attempts.last().and_then(|a| a.error.clone()).unwrap_or_default();
    Err(RetriesExhausted { attempts: attempts.len(), last }.into())
}

/// A run that stopped on something other than a bad potential.
#[derive(Debug)]
pub struct NormalFormFailed {
    pub abort: nls_bnf_core::normal_form::NormalFormAbort,
    pub attempts: Vec<Attempt>,
}

impl fmt::Display for NormalFormFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.abort.fmt(f)
    }
}

impl std::error::Error for NormalFormFailed {}

pub fn normal_form(cfg: &RunConfig) -> Result<Verdict> {
    let out = &cfg.global.output;
    match run_normal_form(cfg) {
        Ok((run, attempts)) => {
            ensure_dir(out)?;
            fs::write(out.join("hamiltonian.txt"), format_classified(&run.h))?;
            let verdict = Verdict::from_bool(report_passes(&run.report));
            write_json(
                &out.join("normal_form_report.json"),
                &NormalFormFile {
                    config: cfg,
                    attempts: &attempts,
                    error: None,
                    report: &run.report,
                    verdict,
                },
            )?;
            Ok(verdict)
        }
        Err(e) => {
            // Induction violations and divergence are claim failures: keep
            // the partial report and report a failed verdict.
            let Some(failed) = e.downcast_ref::<NormalFormFailed>() else {
                return Err(e);
            };
            ensure_dir(out)?;
            write_json(
                &out.join("normal_form_report.json"),
                &NormalFormFile {
                    config: cfg,
                    attempts: &failed.attempts,
                    error: Some(failed.abort.error.to_string()),
                    report: &failed.abort.report,
                    verdict: Verdict::Fail,
                },
            )?;
            eprintln!("{}", failed.abort);
            Ok(Verdict::Fail)
        }
    }
}

// ---------------------------------------------------------------------------
// simulate

/// Resamples from `seed` until every nonresonant tuple with `r <= r_max` and
/// `|n| <= k_max` clears its envelope.
pub fn certified_potential(cfg: &RunConfig, seed: u64) -> Result<(RandomPotential, Vec<Attempt>)> {
    let sc = &cfg.simulate;
    let params = cfg.potential_params(seed);
    if !sc.certify {
        let pot = core(RandomPotential::sample(params))?;
        return Ok((pot, vec![Attempt { seed, error: None }]));
    }
    let env = core(cfg.envelope())?;
    let tuples = core(enumerate_tuples(cfg.global.d, sc.certify_r_max, sc.certify_k_max, cfg.divisor.enumeration_limit))?;
    let mut attempts = Vec::new();
    for attempt in 0..=sc.max_retries {
        let s = retry_seed(seed, attempt);
        let pot = core(RandomPotential::sample(params.with_seed(s)))?;
        let mut failures = 0;
        let mut first = None;
        for t in &tuples.nonresonant {
            let r = core(certify(t, &pot, &env))?;
            if !r.passes {
                failures += 1;
                first.get_or_insert_with(|| format_tuple(t));
            }
        }
        if failures == 0 {
            attempts.push(Attempt { seed: s, error: None });
            return Ok((pot, attempts));
        }
        let msg = format!("{failures} divisor(s) below envelope, first {}", first.unwrap());
        attempts.push(Attempt { seed: s, error: Some(msg) });
    }
    let last = attempts.last().and_then(|a| a.error.clone()).unwrap_or_default();
    Err(RetriesExhausted { attempts: attempts.len(), last }.into())
}

pub struct MemberRun {
    pub index: usize,
    pub seed: u64,
    pub attempts: Vec<Attempt>,
    pub trajectory: Trajectory,
}

#[derive(Clone, Debug, Serialize)]
pub struct MemberVerdict {
    pub index: usize,
    pub seed: u64,
    pub potential_seed: u64,
    pub initial_hs: f64,
    pub sup_hs: f64,
    pub sup_ratio: f64,
    /// `sup |u(t)|_{H^s} <= 2 |u(0)|_{H^s}` with no abort.
    pub norm_bound: bool,
    pub final_drift: f64,
    pub drift_within_threshold: bool,
    pub max_mass_deviation: f64,
    pub max_energy_deviation: f64,
    pub aborted: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnsembleSummary {
    pub runs: Vec<MemberVerdict>,
    pub pass_fraction: f64,
    pub drift_median: f64,
    /// `drift_factor` times the median final drift.
    pub drift_threshold: f64,
    pub verdict: Verdict,
}

/// Member `i` uses seed `seed + i` for both its potential and its initial phases.
pub fn run_ensemble(cfg: &RunConfig) -> Result<Vec<MemberRun>> {
    let sc = &cfg.simulate;
    if sc.certify && sc.certify_k_max > cfg.global.k {
        return Err(config_error(format!(
            "simulate.certify_k_max {} exceeds global.K {}",
            sc.certify_k_max, cfg.global.k
        )));
    }
    (0..sc.ensemble)
        .into_par_iter()
        .map(|i| {
            let seed = cfg.global.seed.wrapping_add(i as u64);
            let (pot, attempts) = certified_potential(cfg, seed)?;
            let sim = cfg.sim_config(seed);
            let trajectory = match cfg.simulate.initial {
                InitialData::Profile => core(stability_experiment(&sim, &pot))?,
                InitialData::PlaneWave => core(run_trajectory(&sim, &pot, &plane_wave(cfg)?))?,
            };
            Ok(MemberRun { index: i, seed, attempts, trajectory })
        })
        .collect()
}

/// `u(0) = eps^2 <n>^{-s} e_n` at `n = plane_wave_mode`.
fn plane_wave(cfg: &RunConfig) -> Result<FourierState> {
    let n = LatticeVector::new(&cfg.simulate.plane_wave_mode);
    let eps = cfg.global.eps;
    let amp = eps * eps * (1.0 + n.norm_sq() as f64).powf(-cfg.simulate.s / 2.0);
    let mut st = FourierState::new(cfg.global.d, cfg.global.k);
    core(st.set(n, Complex64::new(amp, 0.0)))?;
    Ok(st)
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

pub fn summarize(cfg: &RunConfig, runs: &[MemberRun]) -> EnsembleSummary {
    let drifts: Vec<f64> = runs.iter().map(|r| r.trajectory.final_drift).collect();
    let drift_median = median(&drifts);
    let drift_threshold = cfg.simulate.drift_factor * drift_median;
    let verdicts: Vec<MemberVerdict> = runs
        .iter()
        .map(|r| {
            let t = &r.trajectory;
            MemberVerdict {
                index: r.index,
                seed: r.seed,
                potential_seed: r.attempts.last().map_or(r.seed, |a| a.seed),
                initial_hs: t.initial_hs,
                sup_hs: t.sup_hs,
                sup_ratio: t.sup_hs / t.initial_hs,
                norm_bound: t.passes,
                final_drift: t.final_drift,
                drift_within_threshold: t.final_drift <= drift_threshold,
                max_mass_deviation: t.max_mass_deviation,
                max_energy_deviation: t.max_energy_deviation,
                aborted: t.aborted.clone(),
            }
        })
        .collect();
    let passed = verdicts.iter().filter(|v| v.norm_bound).count();
    let pass_fraction = passed as f64 / verdicts.len().max(1) as f64;
    let ok = passed == verdicts.len() && verdicts.iter().all(|v| v.drift_within_threshold);
    EnsembleSummary {
        runs: verdicts,
        pass_fraction,
        drift_median,
        drift_threshold,
        verdict: Verdict::from_bool(ok),
    }
}

#[derive(Serialize)]
struct RunFile<'a> {
    config: &'a RunConfig,
    attempts: &'a [Attempt],
    #[serde(flatten)]
    run: &'a MemberVerdict,
    verdict: Verdict,
}

#[derive(Serialize)]
struct EnsembleFile<'a> {
    config: &'a RunConfig,
    #[serde(flatten)]
    summary: &'a EnsembleSummary,
}

pub fn run_dir(cfg: &RunConfig, index: usize) -> PathBuf {
    if cfg.simulate.ensemble == 1 {
        cfg.global.output.clone()
    } else {
        cfg.global.output.join(format!("run_{index}"))
    }
}

pub fn simulate(cfg: &RunConfig) -> Result<Verdict> {
    let runs = run_ensemble(cfg)?;
    let summary = summarize(cfg, &runs);
    for (r, v) in runs.iter().zip(&summary.runs) {
        let dir = run_dir(cfg, r.index);
        ensure_dir(&dir)?;
        let f = fs::File::create(dir.join("trajectory.csv"))?;
        core(r.trajectory.write_csv(BufWriter::new(f)))?;
        let verdict = Verdict::from_bool(v.norm_bound && v.drift_within_threshold);
        write_json(
            &dir.join("verdict.json"),
            &RunFile { config: cfg, attempts: &r.attempts, run: v, verdict },
        )?;
    }
    if cfg.simulate.ensemble > 1 {
        write_json(
            &cfg.global.output.join("ensemble.json"),
            &EnsembleFile { config: cfg, summary: &summary },
        )?;
    }
    Ok(summary.verdict)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_kind() {
        assert_eq!(exit_code(&config_error("x")), exit::CONFIG);
        let e: anyhow::Error = RetriesExhausted { attempts: 3, last: "x".into() }.into();
        assert_eq!(exit_code(&e), exit::BAD_POTENTIAL);
        assert_eq!(exit_code(&anyhow::anyhow!("io")), exit::OTHER);
        assert_eq!(Verdict::Fail.exit_code(), exit::VERDICT_FAIL);
    }

    #[test]
    fn retry_seeds_avoid_neighbours() {
        let seeds: Vec<u64> = (0..4).map(|a| retry_seed(7, a)).collect();
        assert_eq!(seeds[0], 7);
        assert!(seeds[1..].iter().all(|s| s.abs_diff(7) >= 1 << 32));
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
