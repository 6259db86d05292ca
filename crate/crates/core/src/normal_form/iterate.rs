use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::conditions::{check_conditions, ConditionReport, RunMode};
use super::schedule::{IterationSchedule, ReshiftWindow};
use super::step::{
    classify_with_overflow, induction_check, nf_step_report, sigma3_max_ratio, RoutingTally,
    StepReport,
};
use crate::algebra::{verify_induction, BoundReport, Bucket, ClassifiedHamiltonian, Polynomial};
use crate::divisor::EnvelopeParams;
use crate::error::Error;
use crate::potential::RandomPotential;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpgradeReport {
    pub level: usize,
    pub from: f64,
    pub to: f64,
    /// `Sigma_3` terms below the new cutoff moved into `eps^A Sigma_7`.
    pub moved_to_sigma7: usize,
    pub bounds: BoundReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalFormReport {
    pub schedule: IterationSchedule,
    pub conditions: ConditionReport,
    pub mode: RunMode,
    pub initial_bounds: Option<BoundReport>,
    pub steps: Vec<StepReport>,
    pub upgrades: Vec<UpgradeReport>,
    pub final_bounds: Option<BoundReport>,
    pub final_bucket_sizes: BTreeMap<Bucket, usize>,
    pub final_sigma3_below_n_inf: usize,
    pub max_residual_relative: f64,
    pub residual_within_tol: bool,
    pub extra_eps_all: bool,
    pub routing_conformant: bool,
    /// Routing tallies summed over all steps.
    pub routing_totals: Vec<RoutingTally>,
}

impl NormalFormReport {
    fn new(schedule: &IterationSchedule, conditions: ConditionReport) -> Self {
        Self {
            schedule: schedule.clone(),
            mode: conditions.mode,
            conditions,
            initial_bounds: None,
            steps: Vec::new(),
            upgrades: Vec::new(),
            final_bounds: None,
            final_bucket_sizes: BTreeMap::new(),
            final_sigma3_below_n_inf: 0,
            max_residual_relative: 0.0,
            residual_within_tol: true,
            extra_eps_all: true,
            routing_conformant: true,
            routing_totals: Vec::new(),
        }
    }

    fn push_step(&mut self, r: StepReport) {
        self.max_residual_relative = self.max_residual_relative.max(r.residual_relative);
        self.residual_within_tol &= r.residual_relative <= self.schedule.residual_tol;
        self.extra_eps_all &= r.extra_eps_holds;
        self.routing_conformant &= r.routing_conformant;
        for t in &r.routing {
            match self
                .routing_totals
                .iter_mut()
                .find(|x| x.from == t.from && x.to == t.to)
            {
                Some(x) => {
                    x.count += t.count;
                    x.mass += t.mass;
                    x.max_ratio = x.max_ratio.max(t.max_ratio);
                }
                None => self.routing_totals.push(t.clone()),
            }
        }
        self.routing_totals.sort_by_key(|t| (t.from, t.to));
        self.steps.push(r);
    }

    /// Every bound report in the run, in order.
    pub fn all_bounds(&self) -> impl Iterator<Item = &BoundReport> {
        self.initial_bounds
            .iter()
            .chain(self.steps.iter().map(|s| &s.bounds))
            .chain(self.upgrades.iter().map(|u| &u.bounds))
    }
}

pub struct NormalFormRun {
    pub h: ClassifiedHamiltonian,
    pub report: NormalFormReport,
    pub generators: Vec<Polynomial>,
}

/// A failed run together with everything recorded up to the failure.
#[derive(Debug)]
pub struct NormalFormAbort {
    pub error: Error,
    pub report: NormalFormReport,
}

impl fmt::Display for NormalFormAbort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "normal form aborted: {}", self.error)
    }
}

impl std::error::Error for NormalFormAbort {}

/// Iterates steps, re-shifts and cutoff upgrades down to `H_b`.
pub fn nf_iterate(
    h0: &ClassifiedHamiltonian,
    schedule: &IterationSchedule,
    pot: &RandomPotential,
    env: &EnvelopeParams,
) -> Result<NormalFormRun, Box<NormalFormAbort>> {
    let mut report = NormalFormReport::new(schedule, check_conditions(schedule, env, pot.params().m));
    macro_rules! bail {
        ($e:expr) => {
            return Err(Box::new(NormalFormAbort { error: $e, report }))
        };
    }
    if let Err(e) = schedule.validate() {
        bail!(e);
    }
    let c = &schedule.cutoffs;
    let mut h = match h0.reclassify(schedule.class_params(c[0], c[1])) {
        Ok(h) => h,
        Err(e) => bail!(e),
    };
    let initial = verify_induction(&h);
    report.initial_bounds = Some(initial.clone());
    if let Err(e) = induction_check(&initial, "initial") {
        bail!(e);
    }

    let eps_a = schedule.eps.powi(schedule.a as i32);
    let mut generators = Vec::new();
    for level in 0..c.len() - 1 {
        let (n_a, n_a1) = (c[level], c[level + 1]);
        for rep in 0..=schedule.inner_reps {
            let (lo, hi) = match (rep, schedule.reshift) {
                (r, ReshiftWindow::Literal) if r > 0 => (n_a1, n_a1),
                _ => (n_a, n_a1),
            };
            if h.targeted_block(lo, hi).is_empty() {
                break;
            }
            if rep > 0 && sigma3_max_ratio(&h, lo, hi) <= eps_a {
                break;
            }
            let out = match nf_step_report(&h, lo, hi, schedule, pot, env) {
                Ok(o) => o,
                Err(e) => bail!(e),
            };
            let mut r = out.report;
            r.level = level;
            r.rep = rep;
            let check = induction_check(&r.bounds, &format!("level {level} rep {rep}"));
            report.push_step(r);
            if let Err(e) = check {
                bail!(e);
            }
            h = out.h;
            generators.push(out.generator);
        }

        let next = c.get(level + 2).copied().unwrap_or(schedule.n_inf());
        let params = schedule.class_params(n_a1, next);
        let (h2, moved) =
            match classify_with_overflow(&h.untagged(), h.sigma7().clone(), params) {
                Ok(x) => x,
                Err(e) => bail!(e),
            };
        let bounds = verify_induction(&h2);
        let check = induction_check(&bounds, &format!("upgrade {n_a1}"));
        report.upgrades.push(UpgradeReport {
            level,
            from: n_a,
            to: n_a1,
            moved_to_sigma7: moved,
            bounds,
        });
        if let Err(e) = check {
            bail!(e);
        }
        h = h2;
    }

    let n_inf = schedule.n_inf();
    report.final_bounds = report.upgrades.last().map(|u| u.bounds.clone());
    report.final_bucket_sizes = h.buckets().map(|(b, p)| (b, p.len())).collect();
    report.final_sigma3_below_n_inf = h
        .bucket(Bucket::S3)
        .filter(|k| k.osc.n_minus().max(1.0) < n_inf)
        .len();
    Ok(NormalFormRun {
        h,
        report,
        generators,
    })
}
