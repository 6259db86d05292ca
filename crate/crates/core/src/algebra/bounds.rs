//! Envelope functions `I`, `Q`, `Q4` and the induction-hypothesis check.
//!
//! Every envelope factor carries its own `N^{tau}` (resp. `N^{2 tau}`), so the
//! envelopes factorize over concatenated multi-indices. All values are
//! computed as natural logs since `s1` may be large and negative.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::classify::{Bucket, ClassifiedHamiltonian};
use super::monomial::MonoKey;
use crate::lattice::LatticeVector;

pub const RATIO_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnvelopeKind {
    I,
    Q,
    Q4,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeBound {
    pub kind: EnvelopeKind,
    #[serde(rename = "N")]
    pub n: f64,
    pub s1: f64,
    pub tau: f64,
}

impl EnvelopeBound {
    pub fn new(kind: EnvelopeKind, n: f64, s1: f64, tau: f64) -> Self {
        Self { kind, n, s1, tau }
    }

    fn log_factor(&self, v: &LatticeVector, power: f64) -> f64 {
        let capped = v.eff_norm().min(self.n);
        power * (self.s1 * capped.ln() + self.tau * self.n.ln())
    }

    /// `ln` of the envelope over the given entries.
    pub fn log_value(&self, entries: &[LatticeVector]) -> f64 {
        match self.kind {
            EnvelopeKind::I => entries.iter().map(|v| self.log_factor(v, 2.0)).sum(),
            EnvelopeKind::Q => entries.iter().map(|v| self.log_factor(v, 1.0)).sum(),
            EnvelopeKind::Q4 => {
                let mut sorted: Vec<&LatticeVector> = entries.iter().collect();
                sorted.sort_by(|a, b| b.norm_sq().cmp(&a.norm_sq()));
                sorted
                    .into_iter()
                    .skip(3)
                    .map(|v| self.log_factor(v, 1.0))
                    .sum()
            }
        }
    }

    pub fn value(&self, entries: &[LatticeVector]) -> f64 {
        self.log_value(entries).exp()
    }
}

/// Parameters of the induction hypotheses at cutoff `N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisParams {
    #[serde(rename = "N")]
    pub n: f64,
    pub s1: f64,
    pub tau: f64,
}

impl HypothesisParams {
    fn env(&self, kind: EnvelopeKind) -> EnvelopeBound {
        EnvelopeBound::new(kind, self.n, self.s1, self.tau)
    }

    pub fn log_i(&self, key: &MonoKey) -> f64 {
        self.env(EnvelopeKind::I).log_value(key.actions.entries())
    }

    pub fn log_q(&self, key: &MonoKey) -> f64 {
        let e: Vec<_> = key.osc.entries().copied().collect();
        self.env(EnvelopeKind::Q).log_value(&e)
    }

    pub fn log_q4(&self, key: &MonoKey) -> f64 {
        let e: Vec<_> = key.osc.entries().copied().collect();
        self.env(EnvelopeKind::Q4).log_value(&e)
    }

    /// `ln` of the hypothesis bound for a term of the given bucket, or `None`
    /// for buckets without a hypothesis.
    pub fn log_bound(&self, bucket: Bucket, key: &MonoKey) -> Option<f64> {
        let ln_n = self.n.ln();
        let softplus = |x: f64| if x > 30.0 { x } else { x.exp().ln_1p() };
        match bucket {
            Bucket::S0 | Bucket::S21 => None,
            // Correction to -I_n^2, checked like a Sigma_22 coefficient.
            Bucket::S1 => {
                (key.actions.m_plus().max(1.0) >= self.n)
                    .then(|| softplus(-2.0 * self.s1 * ln_n + self.log_i(key)))
            }
            Bucket::S22 => Some(softplus(
                -2.0 * self.s1 * ln_n + self.log_i(key) + self.log_q(key),
            )),
            Bucket::S3 | Bucket::S5 => {
                Some(-4.0 * self.s1 * ln_n + self.log_i(key) + self.log_q(key))
            }
            Bucket::S4 => Some(self.log_i(key) + self.log_q4(key)),
            Bucket::S6 => {
                let m = key.actions.len().max(1) as f64;
                let n = key.osc.degree().max(1) as f64;
                Some(m.ln() + n.ln() + self.log_i(key) + self.log_q(key))
            }
            Bucket::S7 => Some(self.log_i(key) + self.log_q(key)),
        }
    }
}

/// Coefficient in the ordered-tuple convention: the canonical coefficient
/// divided by the number of ordered tuples collapsing onto the key.
pub fn normalized_coefficient(key: &MonoKey, c: f64) -> f64 {
    c / key.ordered_multiplicity()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BucketStats {
    pub count: usize,
    pub checked: usize,
    pub max_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Offender {
    pub bucket: Bucket,
    pub term: String,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub passes: bool,
    pub params: HypothesisParams,
    pub max_ratio: f64,
    pub buckets: BTreeMap<Bucket, BucketStats>,
    /// Largest ratios first, at most ten.
    pub worst: Vec<Offender>,
}

/// Ratio of `magnitude` (the canonical coefficient size, or its deviation
/// from `-1` for `Sigma_1`) to the hypothesis bound.
pub fn term_ratio(
    params: &HypothesisParams,
    bucket: Bucket,
    key: &MonoKey,
    magnitude: f64,
) -> Option<f64> {
    let lb = params.log_bound(bucket, key)?;
    let c = normalized_coefficient(key, magnitude);
    if c == 0.0 {
        return Some(0.0);
    }
    Some((c.ln() - lb).exp())
}

pub fn verify_induction(h: &ClassifiedHamiltonian) -> BoundReport {
    let params = HypothesisParams {
        n: h.params.n_a,
        s1: h.params.s1,
        tau: h.params.tau,
    };
    let mut buckets = BTreeMap::new();
    let mut all: Vec<(f64, Bucket, &MonoKey)> = Vec::new();
    let mut max_ratio: f64 = 0.0;
    for (bucket, poly) in h.buckets() {
        let stats: &mut BucketStats = buckets.entry(bucket).or_default();
        for (key, c) in poly.iter() {
            stats.count += 1;
            let magnitude = if bucket == Bucket::S1 {
                (c + 1.0).norm()
            } else {
                c.norm()
            };
            if let Some(r) = term_ratio(&params, bucket, key, magnitude) {
                stats.checked += 1;
                stats.max_ratio = stats.max_ratio.max(r);
                max_ratio = max_ratio.max(r);
                all.push((r, bucket, key));
            }
        }
    }
    all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let worst = all
        .into_iter()
        .take(10)
        .map(|(ratio, bucket, key)| Offender {
            bucket,
            term: format!("{key:?}"),
            ratio,
        })
        .collect();
    BoundReport {
        passes: max_ratio <= 1.0 + RATIO_SLACK,
        params,
        max_ratio,
        buckets,
        worst,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: i32) -> LatticeVector {
        LatticeVector::new(&[x])
    }

    #[test]
    fn q4_skips_three_largest() {
        let e = EnvelopeBound::new(EnvelopeKind::Q4, 4.0, -1.0, 0.5);
        let entries = [v(5), v(-1), v(3), v(2), v(-7)];
        // Two smallest entries: |2| and |1|.
        let want = (2f64.powf(-1.0) * 4f64.sqrt()) * (1.0 * 4f64.sqrt());
        assert!((e.value(&entries) - want).abs() < 1e-12);
    }

    #[test]
    fn envelopes_at_unit_cutoff_are_one() {
        for kind in [EnvelopeKind::I, EnvelopeKind::Q, EnvelopeKind::Q4] {
            let e = EnvelopeBound::new(kind, 1.0, -44.0, 10.0);
            assert_eq!(e.value(&[v(0), v(3), v(-8), v(2), v(1)]), 1.0);
        }
    }
}
