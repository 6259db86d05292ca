//! One normal-form step: remove the targeted `Sigma_3` block by the time-1
//! shift of its generator and reclassify.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::generator::{build_generator, cancellation_residual, DivisorSummary};
use super::lie::{lie_series_from, LieOptions};
use super::schedule::IterationSchedule;
use crate::algebra::bounds::term_ratio;
use crate::algebra::{
    bracket_truncated, bucket_of, verify_induction, BoundReport, BracketOutput, Bucket,
    ClassParams, ClassifiedHamiltonian, HypothesisParams, Polynomial,
};
use crate::divisor::EnvelopeParams;
use crate::error::{Error, Result};
use crate::potential::RandomPotential;

/// One row of the bracket table: products of `{Sigma_from, F}` landing in `Sigma_to`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoutingTally {
    pub from: u8,
    pub to: u8,
    pub count: usize,
    pub mass: f64,
    /// Largest coefficient/envelope ratio among the products.
    pub max_ratio: f64,
    pub conformant: bool,
}

/// Bucket families a first-order product `{Sigma_from, F}` may land in.
pub fn allowed_destinations(from: u8, even_degenerate_resonant: bool) -> &'static [u8] {
    match from {
        0 => &[3],
        1 => &[3, 5, 6],
        2 if even_degenerate_resonant => &[2, 3, 4, 5, 6],
        2 => &[3, 5, 6],
        3 | 4 => &[2, 3, 4, 5, 6],
        5 => &[5, 6],
        6 => &[6],
        _ => &[7],
    }
}

/// `Sigma_1` results count as `Sigma_2` content.
fn family(b: Bucket) -> u8 {
    match b.family() {
        1 => 2,
        f => f,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub level: usize,
    pub rep: usize,
    pub window: (f64, f64),
    pub block_terms: usize,
    pub block_norm: f64,
    pub generator_terms: usize,
    pub generator_norm: f64,
    pub divisors: DivisorSummary,
    /// `|block + {Sigma_0, F}|_1`.
    pub residual_norm: f64,
    pub residual_relative: f64,
    /// Largest `|c_after| / |c_before|` over the keys of the removed block.
    pub block_key_max_ratio: f64,
    pub lie_orders: usize,
    pub lie_term_norms: Vec<f64>,
    pub remainder_proxy: f64,
    pub overflow_mass: f64,
    pub pruned_mass: f64,
    /// Terms that fit no bucket at the current cutoff and were tagged into `Sigma_7`.
    pub tagged_terms: usize,
    pub routing: Vec<RoutingTally>,
    pub routing_conformant: bool,
    /// Largest `Sigma_3` ratio inside the window, before and after.
    pub sigma3_pre_ratio: f64,
    pub sigma3_post_ratio: f64,
    pub extra_eps_holds: bool,
    pub bounds: BoundReport,
}

pub struct StepOutcome {
    pub h: ClassifiedHamiltonian,
    pub generator: Polynomial,
    pub report: StepReport,
}

fn hyp(p: &ClassParams) -> HypothesisParams {
    HypothesisParams {
        n: p.n_a,
        s1: p.s1,
        tau: p.tau,
    }
}

fn in_window(p: &Polynomial, lo: f64, hi: f64) -> Polynomial {
    p.filter(|k| {
        let nm = k.osc.n_minus().max(1.0);
        nm >= lo && nm < hi
    })
}

/// Largest `Sigma_3` coefficient/envelope ratio among terms with `lo <= |n_-| < hi`.
pub fn sigma3_max_ratio(h: &ClassifiedHamiltonian, lo: f64, hi: f64) -> f64 {
    let hp = hyp(&h.params);
    in_window(h.bucket(Bucket::S3), lo, hi)
        .iter()
        .filter_map(|(k, c)| term_ratio(&hp, Bucket::S3, k, c.norm()))
        .fold(0.0, f64::max)
}

/// Classifies `raw`; terms that fit no bucket at the current cutoff are moved
/// into the tagged `Sigma_7` with their `eps^A` prefactor removed.
pub fn classify_with_overflow(
    raw: &Polynomial,
    tagged: Polynomial,
    params: ClassParams,
) -> Result<(ClassifiedHamiltonian, usize)> {
    let scale = params.eps.powi(params.a as i32);
    let mut keep = Polynomial::new();
    let mut tagged = tagged;
    let mut moved = 0;
    for (k, c) in raw.iter() {
        match bucket_of(k, &params) {
            Ok(_) => keep.insert(k.clone(), *c),
            Err(Error::Classification(_)) if scale > 0.0 => {
                tagged.add_term(k.clone(), *c / scale);
                moved += 1;
            }
            Err(e) => return Err(e),
        }
    }
    Ok((
        ClassifiedHamiltonian::classify(&keep, params)?.with_sigma7(tagged),
        moved,
    ))
}

/// `nf_step` without the final induction check; the report records whether it passed.
pub fn nf_step_report(
    h: &ClassifiedHamiltonian,
    n_a: f64,
    n_a1: f64,
    schedule: &IterationSchedule,
    pot: &RandomPotential,
    env: &EnvelopeParams,
) -> Result<StepOutcome> {
    let params = h.params;
    let hp = hyp(&params);
    let block = h.targeted_block(n_a, n_a1);
    let (f, divisors) = build_generator(&block, pot, env, params.eps)?;
    let residual = cancellation_residual(&block, h.bucket(Bucket::S0), &f);
    let block_norm = block.norm1();
    let residual_norm = residual.norm1();
    let sigma3_pre_ratio = sigma3_max_ratio(h, n_a, n_a1);

    let opts = LieOptions {
        max_order: schedule.lie_order,
        tol: schedule.lie_tol,
        max_degree: schedule.max_degree(),
        prune_rel: schedule.prune_rel,
        detect_divergence: true,
    };

    // First-order products per source bucket, for the routing table.
    let mut tallies: BTreeMap<(u8, u8), RoutingTally> = BTreeMap::new();
    let mut first = BracketOutput::default();
    for (b, poly) in h.buckets() {
        if b == Bucket::S7 || poly.is_empty() || f.is_empty() {
            continue;
        }
        let prod = bracket_truncated(poly, &f, opts.max_degree);
        for (k, c) in prod.poly.iter() {
            let (to, ratio) = match bucket_of(k, &params) {
                Ok(dest) => (
                    family(dest),
                    term_ratio(&hp, dest, k, c.norm()).unwrap_or(0.0),
                ),
                Err(_) => (7, 0.0),
            };
            let t = tallies.entry((family(b), to)).or_insert(RoutingTally {
                from: family(b),
                to,
                count: 0,
                mass: 0.0,
                max_ratio: 0.0,
                conformant: allowed_destinations(family(b), params.even_degenerate_resonant)
                    .contains(&to),
            });
            t.count += 1;
            t.mass += c.norm();
            t.max_ratio = t.max_ratio.max(ratio);
        }
        first.poly.add_assign(&prod.poly);
        first.overflow_mass += prod.overflow_mass;
        first.overflow_terms += prod.overflow_terms;
    }

    let untagged = h.untagged();
    let reference = untagged
        .filter(|k| k.degree() > 2)
        .norm1()
        .max(f64::MIN_POSITIVE);
    let lie = lie_series_from(&untagged, Some(first), &f, &opts, reference)?;
    let mut raw = lie.poly;

    let mut tagged = h.sigma7().clone();
    let mut overflow_mass = lie.overflow_mass;
    let mut pruned_mass = lie.pruned_mass;
    if !tagged.is_empty() && !f.is_empty() {
        let t1 = bracket_truncated(&tagged, &f, opts.max_degree);
        tallies.insert(
            (7, 7),
            RoutingTally {
                from: 7,
                to: 7,
                count: t1.poly.len(),
                mass: t1.poly.norm1(),
                max_ratio: 0.0,
                conformant: true,
            },
        );
        let t = lie_series_from(&tagged, Some(t1), &f, &opts, tagged.norm1())?;
        overflow_mass += t.overflow_mass;
        pruned_mass += t.pruned_mass;
        tagged = t.poly;
    }

    // Remove rounding residue; the removed block leaves only this.
    let scale = untagged
        .filter(|k| k.degree() > 2)
        .max_abs();
    if schedule.prune_rel > 0.0 {
        pruned_mass += raw.prune_below(schedule.prune_rel * scale);
    }

    let block_key_max_ratio = block
        .iter()
        .map(|(k, c)| raw.get(k).norm() / c.norm())
        .fold(0.0, f64::max);

    let (new_h, tagged_terms) = classify_with_overflow(&raw, tagged, params)?;
    let bounds = verify_induction(&new_h);
    let sigma3_post_ratio = sigma3_max_ratio(&new_h, n_a, n_a1);
    let routing: Vec<RoutingTally> = tallies.into_values().collect();
    let report = StepReport {
        level: 0,
        rep: 0,
        window: (n_a, n_a1),
        block_terms: block.len(),
        block_norm,
        generator_terms: f.len(),
        generator_norm: f.norm1(),
        divisors,
        residual_norm,
        residual_relative: if block_norm > 0.0 {
            residual_norm / block_norm
        } else {
            0.0
        },
        block_key_max_ratio,
        lie_orders: lie.orders_used,
        lie_term_norms: lie.term_norms,
        remainder_proxy: lie.remainder_proxy,
        overflow_mass,
        pruned_mass,
        tagged_terms,
        routing_conformant: routing.iter().all(|t| t.conformant),
        routing,
        sigma3_pre_ratio,
        sigma3_post_ratio,
        extra_eps_holds: sigma3_post_ratio
            <= params.eps * sigma3_pre_ratio * (1.0 + crate::algebra::bounds::RATIO_SLACK),
        bounds,
    };
    Ok(StepOutcome {
        h: new_h,
        generator: f,
        report,
    })
}

/// One step; fails with the offender list if the induction bounds break.
pub fn nf_step(
    h: &ClassifiedHamiltonian,
    n_a: f64,
    n_a1: f64,
    schedule: &IterationSchedule,
    pot: &RandomPotential,
    env: &EnvelopeParams,
) -> Result<StepOutcome> {
    let out = nf_step_report(h, n_a, n_a1, schedule, pot, env)?;
    induction_check(&out.report.bounds, "step")?;
    Ok(out)
}

pub(crate) fn induction_check(b: &BoundReport, stage: &str) -> Result<()> {
    if b.passes {
        return Ok(());
    }
    let first = b.worst.first();
    Err(Error::InductionViolation {
        stage: stage.to_string(),
        worst_ratio: b.max_ratio,
        term: first
            .map(|o| format!("{} {}", o.bucket, o.term))
            .unwrap_or_default(),
    })
}

