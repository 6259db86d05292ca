//! Small divisors `Omega(n)`, their lower envelopes and Monte Carlo violation rates.
//!
//! Divisors are handled in the epsilon-free normalization `eps^2 Omega(n)`; the
//! envelopes below are the matching epsilon-free lower bounds, so the `eps^2`
//! factors cancel in every comparison.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{box_points, multiset_intersection, IndexVec, LatticeVector, OscIndex};
use crate::potential::{PotentialParams, RandomPotential};

/// 97.5% standard normal quantile.
pub const Z_95: f64 = 1.959963984540054;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EnvelopeVariant {
    /// `<mu(n)>^{-4r^2}`.
    #[default]
    MuExponent,
    /// `<n_+>^{-4r^2}` with an extra `1/10`.
    NplusExponent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeParams {
    pub gamma: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub variant: EnvelopeVariant,
}

impl EnvelopeParams {
    /// `C = (40/gamma)^4`.
    pub fn from_gamma(gamma: f64, variant: EnvelopeVariant) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidParameter(format!("gamma = {gamma}")));
        }
        Ok(Self {
            gamma,
            c: (40.0 / gamma).powi(4),
            variant,
        })
    }
}

fn cancel_common(tuple: &OscIndex) -> (IndexVec, IndexVec) {
    let common = multiset_intersection(tuple.upper(), tuple.lower());
    let strip = |side: &[LatticeVector]| {
        let mut out = IndexVec::new();
        let mut j = 0;
        for x in side {
            if j < common.len() && common[j] == *x {
                j += 1;
            } else {
                out.push(*x);
            }
        }
        out
    };
    (strip(tuple.upper()), strip(tuple.lower()))
}

fn signed_sum(
    upper: &[LatticeVector],
    lower: &[LatticeVector],
    pot: &RandomPotential,
) -> Result<f64> {
    let mut up = 0.0;
    for k in upper {
        up += pot.scaled_frequency(k)?;
    }
    let mut down = 0.0;
    for p in lower {
        down += pot.scaled_frequency(p)?;
    }
    // Summing each side separately keeps the result exactly antisymmetric.
    Ok(up - down)
}

/// `eps^2 Omega(n) = sum_k (|k|^2 + v_k) - sum_p (|p|^2 + v_p)`.
///
/// Indices common to both sides are cancelled first, so resonant tuples give
/// exactly zero.
pub fn omega_scaled(tuple: &OscIndex, pot: &RandomPotential) -> Result<f64> {
    for n in tuple.entries() {
        pot.get(n)?;
    }
    let (u, l) = cancel_common(tuple);
    signed_sum(&u, &l, pot)
}

/// `Omega(n) = sum_k omega_k - sum_p omega_p`.
pub fn omega(tuple: &OscIndex, pot: &RandomPotential, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps = {eps}")));
    }
    Ok(omega_scaled(tuple, pot)? / (eps * eps))
}

pub fn is_nonresonant(tuple: &OscIndex) -> bool {
    tuple.is_nonresonant()
}

/// True when the divisor vanishes for every even potential: after cancelling
/// common indices, the upper and lower sides agree up to `n -> -n`.
pub fn is_even_degenerate(tuple: &OscIndex) -> bool {
    if !tuple.is_nonresonant() {
        return false;
    }
    let class = |n: &LatticeVector| {
        if n.is_positive_representative() {
            *n
        } else {
            n.neg()
        }
    };
    let mut u: Vec<_> = tuple.upper().iter().map(class).collect();
    let mut l: Vec<_> = tuple.lower().iter().map(class).collect();
    u.sort_unstable();
    l.sort_unstable();
    u == l
}

/// Natural log of the epsilon-free envelope.
pub fn log_lower_envelope(
    tuple: &OscIndex,
    env: &EnvelopeParams,
    r_amp: f64,
    m: u32,
) -> Result<f64> {
    if !tuple.is_nonresonant() {
        return Err(Error::ResonantTuple(format!("{tuple:?}")));
    }
    let r = tuple.half_len() as f64;
    let br = |x: f64| (1.0 + x * x).sqrt().ln();
    let n_minus = br(tuple.n_minus());
    let log_c_term = -(r / m as f64) * env.c.ln();
    Ok(match env.variant {
        EnvelopeVariant::MuExponent => {
            env.gamma.ln() + r_amp.ln() + log_c_term
                - 4.0 * r * r * br(tuple.mu())
                - m as f64 * n_minus
        }
        EnvelopeVariant::NplusExponent => {
            (r_amp / 10.0).ln() + env.gamma.ln() + log_c_term
                - 4.0 * r * r * br(tuple.n_plus())
                - m as f64 * n_minus
        }
    })
}

/// Epsilon-free envelope `gamma R C^{-r/m} <mu>^{-4r^2} <n_->^{-m}` (or its
/// `n_+` variant).
pub fn lower_envelope(tuple: &OscIndex, env: &EnvelopeParams, r_amp: f64, m: u32) -> Result<f64> {
    Ok(log_lower_envelope(tuple, env, r_amp, m)?.exp())
}

/// `Omega(n) + lam1 omega_{l1} + lam2 omega_{l2}`.
pub fn extended_divisor(
    tuple: &OscIndex,
    l1: &LatticeVector,
    l2: &LatticeVector,
    lam1: i8,
    lam2: i8,
    pot: &RandomPotential,
    eps: f64,
) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps = {eps}")));
    }
    for lam in [lam1, lam2] {
        if !(-1..=1).contains(&lam) {
            return Err(Error::InvalidParameter(format!("lambda = {lam}")));
        }
    }
    let mut upper: IndexVec = tuple.upper().iter().copied().collect();
    let mut lower: IndexVec = tuple.lower().iter().copied().collect();
    for (l, lam) in [(l1, lam1), (l2, lam2)] {
        pot.get(l)?;
        match lam {
            1 => upper.push(*l),
            -1 => lower.push(*l),
            _ => {}
        }
    }
    upper.sort_unstable();
    lower.sort_unstable();
    let common = multiset_intersection(&upper, &lower);
    let strip = |side: &IndexVec| {
        let mut out = IndexVec::new();
        let mut j = 0;
        for x in side {
            if j < common.len() && common[j] == *x {
                j += 1;
            } else {
                out.push(*x);
            }
        }
        out
    };
    Ok(signed_sum(&strip(&upper), &strip(&lower), pot)? / (eps * eps))
}

/// Epsilon-free envelope of the extended divisor, `(R/10) gamma (gamma/40)^{4r/m} <n_+>^{-4r^2} <n_->^{-m}`.
pub fn extended_envelope(tuple: &OscIndex, gamma: f64, r_amp: f64, m: u32) -> f64 {
    let r = tuple.half_len() as f64;
    let br = |x: f64| (1.0 + x * x).sqrt();
    (r_amp / 10.0)
        * gamma
        * (gamma / 40.0).powf(4.0 * r / m as f64)
        * br(tuple.n_plus()).powf(-4.0 * r * r)
        * br(tuple.n_minus()).powf(-(m as f64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivisorRecord {
    pub tuple: OscIndex,
    pub omega_scaled: f64,
    pub lower_envelope: f64,
    pub passes: bool,
}

pub fn certify(
    tuple: &OscIndex,
    pot: &RandomPotential,
    env: &EnvelopeParams,
) -> Result<DivisorRecord> {
    let omega_scaled = omega_scaled(tuple, pot)?;
    let lower_envelope = lower_envelope(tuple, env, pot.params().r, pot.params().m)?;
    Ok(DivisorRecord {
        tuple: tuple.clone(),
        omega_scaled,
        lower_envelope,
        passes: omega_scaled.abs() >= lower_envelope,
    })
}

/// Momentum-conserving tuples with `1 <= L <= r_max` and every `|n| <= k_max`,
/// one per `k <-> p` swap class.
#[derive(Clone, Debug, Default)]
pub struct TupleSet {
    pub nonresonant: Vec<OscIndex>,
    pub resonant: Vec<OscIndex>,
}

fn multisets(points: &[LatticeVector], len: usize) -> Vec<Vec<LatticeVector>> {
    fn rec(
        points: &[LatticeVector],
        start: usize,
        len: usize,
        cur: &mut Vec<LatticeVector>,
        out: &mut Vec<Vec<LatticeVector>>,
    ) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for i in start..points.len() {
            cur.push(points[i]);
            rec(points, i, len, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(points, 0, len, &mut Vec::new(), &mut out);
    out
}

fn binomial(n: u64, k: u64) -> u64 {
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

pub fn enumerate_tuples(dim: usize, r_max: usize, k_max: u32, limit: u64) -> Result<TupleSet> {
    let points: Vec<LatticeVector> = box_points(dim, k_max)
        .into_iter()
        .filter(|n| n.norm_sq() <= (k_max as i64) * (k_max as i64))
        .collect();
    let p = points.len() as u64;
    let multiset_count: u64 = (1..=r_max as u64)
        .map(|l| binomial(p + l - 1, l))
        .fold(0u64, |a, b| a.saturating_add(b));
    if multiset_count > limit {
        return Err(Error::EnumerationTooLarge {
            estimate: multiset_count,
            limit,
        });
    }
    let mut groups_by_len = Vec::new();
    let mut total: u64 = 0;
    for l in 1..=r_max {
        let mut groups: HashMap<LatticeVector, Vec<Vec<LatticeVector>>> = HashMap::new();
        for ms in multisets(&points, l) {
            let mut sum = LatticeVector::zero(dim);
            for n in &ms {
                sum = sum.add(n);
            }
            groups.entry(sum).or_default().push(ms);
        }
        for g in groups.values() {
            let n = g.len() as u64;
            total = total.saturating_add(n * (n + 1) / 2);
        }
        let mut sorted: Vec<_> = groups.into_iter().collect();
        sorted.sort_by(|a, b| a.0.cmp(&b.0));
        groups_by_len.push(sorted);
    }
    if total > limit {
        return Err(Error::EnumerationTooLarge {
            estimate: total,
            limit,
        });
    }
    let mut set = TupleSet::default();
    for groups in groups_by_len {
        for (_, g) in groups {
            for i in 0..g.len() {
                for j in i..g.len() {
                    let t = OscIndex::from_slices(&g[i], &g[j])?;
                    if i == j {
                        set.resonant.push(t);
                    } else {
                        set.nonresonant.push(t);
                    }
                }
            }
        }
    }
    Ok(set)
}

/// Two-sided Wilson score interval for `successes` out of `n`.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub r_max: usize,
    #[serde(rename = "K")]
    pub k_max: u32,
    pub envelope: EnvelopeParams,
    pub potential: PotentialParams,
    pub trials: usize,
    pub enumeration_limit: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloResult {
    pub trials: usize,
    pub violations: usize,
    pub fraction: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub nonresonant_tuples: usize,
    pub resonant_tuples: usize,
    /// Resonant tuples whose divisor was not exactly zero, summed over trials.
    pub resonant_nonzero: usize,
    /// Smallest `|eps^2 Omega| / envelope` seen over all trials and tuples.
    pub min_margin: f64,
}

struct Prepared {
    upper: Vec<usize>,
    lower: Vec<usize>,
    envelope: f64,
}

fn prepare(
    tuple: &OscIndex,
    pot: &RandomPotential,
    env: Option<(&EnvelopeParams, f64, u32)>,
) -> Prepared {
    let (u, l) = cancel_common(tuple);
    let ix = pot.indexer();
    Prepared {
        upper: u.iter().map(|n| ix.index(n).unwrap()).collect(),
        lower: l.iter().map(|n| ix.index(n).unwrap()).collect(),
        envelope: env
            .map(|(e, r, m)| lower_envelope(tuple, e, r, m).unwrap())
            .unwrap_or(0.0),
    }
}

fn dense_omega(t: &Prepared, freq: &[f64]) -> f64 {
    let up: f64 = t.upper.iter().map(|&i| freq[i]).sum();
    let down: f64 = t.lower.iter().map(|&i| freq[i]).sum();
    up - down
}

/// Fraction of sampled potentials with at least one nonresonant tuple below
/// its envelope. Trial `i` uses seed `potential.seed + i`.
pub fn monte_carlo_violation(cfg: &MonteCarloConfig) -> Result<MonteCarloResult> {
    if cfg.trials < 100 {
        return Err(Error::InvalidParameter(format!(
            "trials = {} (need >= 100)",
            cfg.trials
        )));
    }
    if cfg.k_max > cfg.potential.cutoff {
        return Err(Error::InvalidParameter(format!(
            "tuple bound {} exceeds potential cutoff {}",
            cfg.k_max, cfg.potential.cutoff
        )));
    }
    cfg.potential.validate()?;
    let tuples = enumerate_tuples(
        cfg.potential.dim,
        cfg.r_max,
        cfg.k_max,
        cfg.enumeration_limit,
    )?;
    let template = RandomPotential::zero(cfg.potential.dim, cfg.potential.cutoff);
    let env = (&cfg.envelope, cfg.potential.r, cfg.potential.m);
    let nonres: Vec<Prepared> = tuples
        .nonresonant
        .iter()
        .map(|t| prepare(t, &template, Some(env)))
        .collect();
    let res: Vec<Prepared> = tuples
        .resonant
        .iter()
        .map(|t| prepare(t, &template, None))
        .collect();
    let squares: Vec<f64> = template.iter().map(|(n, _)| n.norm_sq() as f64).collect();

    let per_trial: Vec<(bool, usize, f64)> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let params = cfg.potential.with_seed(cfg.potential.seed.wrapping_add(i as u64));
            let pot = RandomPotential::sample(params).expect("validated parameters");
            let freq: Vec<f64> = squares
                .iter()
                .zip(pot.dense())
                .map(|(s, v)| s + v)
                .collect();
            let mut violated = false;
            let mut margin = f64::INFINITY;
            for t in &nonres {
                let ratio = dense_omega(t, &freq).abs() / t.envelope;
                margin = margin.min(ratio);
                if ratio < 1.0 {
                    violated = true;
                }
            }
            let nonzero = res.iter().filter(|t| dense_omega(t, &freq) != 0.0).count();
            (violated, nonzero, margin)
        })
        .collect();

    let violations = per_trial.iter().filter(|t| t.0).count();
    let resonant_nonzero = per_trial.iter().map(|t| t.1).sum();
    let min_margin = per_trial.iter().map(|t| t.2).fold(f64::INFINITY, f64::min);
    let (lo, hi) = wilson_interval(violations as u64, cfg.trials as u64, Z_95);
    Ok(MonteCarloResult {
        trials: cfg.trials,
        violations,
        fraction: violations as f64 / cfg.trials as f64,
        wilson_low: lo,
        wilson_high: hi,
        nonresonant_tuples: nonres.len(),
        resonant_tuples: res.len(),
        resonant_nonzero,
        min_margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: i32) -> LatticeVector {
        LatticeVector::new(&[x])
    }

    fn t(u: &[i32], l: &[i32]) -> OscIndex {
        let u: Vec<_> = u.iter().map(|&x| v(x)).collect();
        let l: Vec<_> = l.iter().map(|&x| v(x)).collect();
        OscIndex::from_slices(&u, &l).unwrap()
    }

    #[test]
    fn omega_examples() {
        let zero = RandomPotential::zero(1, 6);
        assert_eq!(omega(&t(&[1, 3], &[2, 2]), &zero, 1.0).unwrap(), 2.0);
        let pot = RandomPotential::sample(PotentialParams {
            dim: 1,
            r: 1.0,
            m: 2,
            cutoff: 6,
            seed: 11,
        })
        .unwrap();
        assert_eq!(omega(&t(&[1, 3], &[3, 1]), &pot, 0.3).unwrap(), 0.0);
        let tup = t(&[1, 3], &[2, 2]);
        let a = omega(&tup, &pot, 0.1).unwrap();
        let b = omega(&tup, &pot, 1.0).unwrap();
        assert!((a - 100.0 * b).abs() <= 1e-12 * a.abs());
    }

    #[test]
    fn extended_examples() {
        let zero = RandomPotential::zero(1, 6);
        let tup = t(&[1, 3], &[2, 2]);
        assert_eq!(
            extended_divisor(&tup, &v(5), &v(0), 1, 0, &zero, 1.0).unwrap(),
            27.0
        );
        let pot = RandomPotential::sample(PotentialParams {
            dim: 1,
            r: 1.0,
            m: 2,
            cutoff: 6,
            seed: 5,
        })
        .unwrap();
        let base = omega(&tup, &pot, 0.2).unwrap();
        assert_eq!(
            extended_divisor(&tup, &v(4), &v(4), 1, -1, &pot, 0.2).unwrap(),
            base
        );
        assert_eq!(
            extended_divisor(&tup, &v(4), &v(2), 0, 0, &pot, 0.2).unwrap(),
            base
        );
    }

    #[test]
    fn constant_c_from_gamma() {
        let e = EnvelopeParams::from_gamma(0.1, EnvelopeVariant::MuExponent).unwrap();
        assert!((e.c - 2.56e10).abs() < 1.0);
    }

    #[test]
    fn envelope_unit_weights() {
        let e = EnvelopeParams::from_gamma(0.2, EnvelopeVariant::MuExponent).unwrap();
        let z = LatticeVector::new(&[0, 0]);
        let a = LatticeVector::new(&[1, 0]);
        let b = LatticeVector::new(&[0, 1]);
        let c = LatticeVector::new(&[1, 1]);
        let tup = OscIndex::from_slices(&[z, c], &[a, b]).unwrap();
        let got = lower_envelope(&tup, &e, 1.0, 2).unwrap();
        // n_- = 0 and mu = 1: <0>^-2 = 1, <1>^{-16} = 2^{-8}.
        let want = 0.2 / e.c * 2f64.powi(-8);
        assert!((got - want).abs() <= 1e-12 * want);
        assert!(lower_envelope(&t(&[1, 2], &[2, 1]), &e, 1.0, 2).is_err());
    }

    #[test]
    fn even_degenerate_detected() {
        let tup = t(&[1, -2, 1], &[-1, 2, -1]);
        assert!(is_even_degenerate(&tup));
        assert!(!is_even_degenerate(&t(&[0, 3, 3], &[1, 1, 4])));
        for seed in 0..5 {
            let pot = RandomPotential::sample(PotentialParams {
                dim: 1,
                r: 1.0,
                m: 2,
                cutoff: 4,
                seed,
            })
            .unwrap();
            assert!(omega_scaled(&tup, &pot).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn wilson_matches_reference() {
        // 10 of 100: reference values from the closed form.
        let (lo, hi) = wilson_interval(10, 100, Z_95);
        assert!((lo - 0.05522914).abs() < 1e-7);
        assert!((hi - 0.17436566).abs() < 1e-7);
        let (lo, hi) = wilson_interval(0, 2000, Z_95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.002);
    }

    #[test]
    fn enumeration_guard() {
        assert!(matches!(
            enumerate_tuples(3, 4, 10, 1000),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }
}
