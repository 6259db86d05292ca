//! Poisson bracket `{F, G} = i sum_n (dF/dq_n dG/dqbar_n - dF/dqbar_n dG/dq_n)`.
//!
//! For monomials `c1 q^{alpha1} qbar^{beta1}` and `c2 q^{alpha2} qbar^{beta2}` the
//! mode-`n` contribution is `i c1 c2 (alpha1_n beta2_n - beta1_n alpha2_n)` times
//! the product divided by `I_n`. Writing `alpha = a + k`, `beta = a + p` the
//! integer factor splits as
//!
//! ```text
//! a1 (p2 - k2)      loss of I_n from the left term
//! a2 (k1 - p1)      loss of I_n from the right term
//! k1 p2 - p1 k2     contraction of a (q_n, qbar_n) pair
//! ```

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use super::monomial::{MonoKey, Monomial, Profile};
use super::polynomial::Polynomial;
use crate::lattice::LatticeVector;

const I: Complex64 = Complex64::new(0.0, 1.0);
const CHUNK: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContractionCase {
    LeftActionLoss,
    RightActionLoss,
    PairContraction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Contraction {
    pub case: ContractionCase,
    pub mode: LatticeVector,
    pub term: Monomial,
}

#[derive(Clone, Debug, Default)]
pub struct BracketOutput {
    pub poly: Polynomial,
    /// Upper bound on the coefficient mass of products above the degree cap,
    /// `sum |c1| deg1 |c2| deg2` over the dropped pairs.
    pub overflow_mass: f64,
    /// Number of monomial pairs whose product exceeds the cap.
    pub overflow_terms: usize,
}

struct Prepared {
    coeff: Complex64,
    profile: Profile,
    degree: usize,
}

fn prepare(p: &Polynomial) -> Vec<Prepared> {
    p.iter()
        .map(|(k, c)| Prepared {
            coeff: *c,
            profile: k.profile(),
            degree: k.degree(),
        })
        .collect()
}

type Combined = SmallVec<[(LatticeVector, u16, u16, i32); 16]>;

/// Merges two profiles into raw exponents and per-mode bracket factors.
fn combine(p1: &Profile, p2: &Profile) -> Option<Combined> {
    let mut out = Combined::new();
    let mut any = false;
    let (mut i, mut j) = (0, 0);
    while i < p1.len() || j < p2.len() {
        let take_left = j >= p2.len() || (i < p1.len() && p1[i].0 < p2[j].0);
        let take_right = i >= p1.len() || (j < p2.len() && p2[j].0 < p1[i].0);
        if take_left {
            let (n, a, k, p) = p1[i];
            out.push((n, a + k, a + p, 0));
            i += 1;
        } else if take_right {
            let (n, a, k, p) = p2[j];
            out.push((n, a + k, a + p, 0));
            j += 1;
        } else {
            let (n, a1, k1, p1_) = p1[i];
            let (_, a2, k2, p2_) = p2[j];
            let (a1, k1, p1_, a2, k2, p2_) = (
                a1 as i32, k1 as i32, p1_ as i32, a2 as i32, k2 as i32, p2_ as i32,
            );
            let f = a1 * (p2_ - k2) + a2 * (k1 - p1_) + (k1 * p2_ - p1_ * k2);
            any |= f != 0;
            out.push((
                n,
                (a1 + k1 + a2 + k2) as u16,
                (a1 + p1_ + a2 + p2_) as u16,
                f,
            ));
            i += 1;
            j += 1;
        }
    }
    any.then_some(out)
}

fn key_without(comb: &Combined, idx: usize) -> MonoKey {
    let exps: SmallVec<[(LatticeVector, u16, u16); 16]> = comb
        .iter()
        .enumerate()
        .map(|(i, &(n, a, b, _))| if i == idx { (n, a - 1, b - 1) } else { (n, a, b) })
        .collect();
    MonoKey::from_exponents(&exps)
}

/// Bracket of two monomials, accumulated into `out`.
fn pair_into(t1: &Prepared, t2: &Prepared, out: &mut BTreeMap<MonoKey, Complex64>) {
    let Some(comb) = combine(&t1.profile, &t2.profile) else {
        return;
    };
    let c = I * t1.coeff * t2.coeff;
    for (idx, e) in comb.iter().enumerate() {
        if e.3 != 0 {
            *out.entry(key_without(&comb, idx)).or_default() += c * e.3 as f64;
        }
    }
}

/// `{f, g}` with products above `max_degree` dropped and their mass recorded.
pub fn bracket_truncated(f: &Polynomial, g: &Polynomial, max_degree: usize) -> BracketOutput {
    if f.is_empty() || g.is_empty() {
        return BracketOutput::default();
    }
    // Iterate over the smaller side; {f, g} = -{g, f}.
    let (outer, inner, sign) = if f.len() <= g.len() {
        (prepare(f), prepare(g), 1.0)
    } else {
        (prepare(g), prepare(f), -1.0)
    };
    // Inner terms in ascending degree so each mode list can be cut at the cap.
    let mut inner = inner;
    inner.sort_by_key(|t| t.degree);
    let mut by_mode: HashMap<LatticeVector, Vec<u32>> = HashMap::new();
    for (j, t) in inner.iter().enumerate() {
        for e in &t.profile {
            by_mode.entry(e.0).or_default().push(j as u32);
        }
    }
    // Suffix sums of |c| deg over the inner side, for the overflow bound.
    let mut tail_mass = vec![0.0; inner.len() + 1];
    for j in (0..inner.len()).rev() {
        tail_mass[j] = tail_mass[j + 1] + inner[j].coeff.norm() * inner[j].degree as f64;
    }
    let first_above = |limit: usize| inner.partition_point(|t| t.degree <= limit);

    let chunks: Vec<(BTreeMap<MonoKey, Complex64>, f64, usize)> = outer
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = BTreeMap::new();
            let mut seen = vec![u32::MAX; inner.len()];
            let mut overflow = 0.0;
            let mut overflow_terms = 0;
            for (ci, t1) in chunk.iter().enumerate() {
                let stamp = ci as u32;
                // Products with inner degree above `limit` exceed the cap; they are
                // bounded in aggregate by |c1| deg1 sum |c2| deg2.
                let limit = max_degree.saturating_add(2).saturating_sub(t1.degree);
                let cut = first_above(limit);
                if cut < inner.len() {
                    overflow += t1.coeff.norm() * t1.degree as f64 * tail_mass[cut];
                    overflow_terms += inner.len() - cut;
                }
                let mut cands: Vec<u32> = Vec::new();
                for e in &t1.profile {
                    if let Some(list) = by_mode.get(&e.0) {
                        for &j in list {
                            if j as usize >= cut {
                                break;
                            }
                            if seen[j as usize] != stamp {
                                seen[j as usize] = stamp;
                                cands.push(j);
                            }
                        }
                    }
                }
                cands.sort_unstable();
                for j in cands {
                    let t2 = &inner[j as usize];
                    if sign > 0.0 {
                        pair_into(t1, t2, &mut acc);
                    } else {
                        pair_into(t2, t1, &mut acc);
                    }
                }
            }
            (acc, overflow, overflow_terms)
        })
        .collect();

    let mut out = BracketOutput::default();
    for (acc, overflow, n) in chunks {
        for (k, c) in acc {
            out.poly.add_term(k, c);
        }
        out.overflow_mass += overflow;
        out.overflow_terms += n;
    }
    out
}

/// Exact bracket `{f, g}` without degree truncation.
pub fn poisson_bracket(f: &Polynomial, g: &Polynomial) -> Polynomial {
    bracket_truncated(f, g, usize::MAX).poly
}

/// Bracket of two monomials split into the three structural cases, one entry
/// per (case, shared mode).
pub fn contract_rules(t1: &Monomial, t2: &Monomial) -> Vec<Contraction> {
    let p1 = t1.key.profile();
    let p2 = t2.key.profile();
    let c = I * t1.coeff * t2.coeff;
    let mut out = Vec::new();
    let Some(comb) = combine(&p1, &p2) else {
        return out;
    };
    for (idx, e) in comb.iter().enumerate() {
        if e.3 == 0 {
            continue;
        }
        let n = e.0;
        let (a1, k1, q1) = p1
            .iter()
            .find(|x| x.0 == n)
            .map(|x| (x.1 as i32, x.2 as i32, x.3 as i32))
            .unwrap();
        let (a2, k2, q2) = p2
            .iter()
            .find(|x| x.0 == n)
            .map(|x| (x.1 as i32, x.2 as i32, x.3 as i32))
            .unwrap();
        let key = key_without(&comb, idx);
        for (case, f) in [
            (ContractionCase::LeftActionLoss, a1 * (q2 - k2)),
            (ContractionCase::RightActionLoss, a2 * (k1 - q1)),
            (ContractionCase::PairContraction, k1 * q2 - q1 * k2),
        ] {
            if f != 0 {
                out.push(Contraction {
                    case,
                    mode: n,
                    term: Monomial {
                        coeff: c * f as f64,
                        key: key.clone(),
                    },
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: i32) -> LatticeVector {
        LatticeVector::new(&[x])
    }

    fn mono(c: f64, a: &[i32], u: &[i32], l: &[i32]) -> Monomial {
        let f = |s: &[i32]| s.iter().map(|&x| v(x)).collect::<Vec<_>>();
        Monomial::new(Complex64::new(c, 0.0), &f(a), &f(u), &f(l)).unwrap()
    }

    #[test]
    fn actions_commute() {
        let f = Polynomial::from_monomials([mono(1.0, &[1, 2], &[], &[])]);
        let g = Polynomial::from_monomials([mono(2.0, &[2, 2, 3], &[], &[])]);
        assert!(poisson_bracket(&f, &g).is_empty());
    }

    #[test]
    fn b1_frequency_rule() {
        // {q_1 q_3 qbar_2 qbar_2, sum w_l I_l} = i Omega q_n.
        let m = mono(1.5, &[], &[1, 3], &[2, 2]);
        let w = |n: i32| (n * n) as f64 + 0.1 * n as f64;
        let h0 = Polynomial::from_monomials((-3..=3).map(|n| mono(w(n), &[n], &[], &[])));
        let b = poisson_bracket(&Polynomial::from_monomials([m.clone()]), &h0);
        let omega = w(1) + w(3) - 2.0 * w(2);
        assert_eq!(b.len(), 1);
        let got = b.get(&m.key);
        assert!((got - I * omega * 1.5).norm() < 1e-13);
    }

    #[test]
    fn action_loss_single_shared_index() {
        // {q_n, I_l}: one shared upper index of multiplicity 1 gives +i I_l~n q_n.
        let q = mono(1.0, &[], &[1, 3], &[2, 2]);
        let il = mono(1.0, &[1, 5], &[], &[]);
        let rules = contract_rules(&q, &il);
        assert_eq!(rules.len(), 1);
        assert_eq!(rules[0].case, ContractionCase::RightActionLoss);
        assert_eq!(rules[0].term.coeff, I);
        assert_eq!(rules[0].term.key, mono(1.0, &[5], &[1, 3], &[2, 2]).key);
    }

    #[test]
    fn disjoint_supports_vanish() {
        let a = mono(1.0, &[], &[1, 3], &[2, 2]);
        let b = mono(1.0, &[5], &[4, 6], &[7, 3 + 0 * 7]);
        let b = Monomial { key: mono(1.0, &[5], &[4, 6], &[-7, 17]).key, ..b };
        assert!(contract_rules(&a, &b).is_empty());
    }

    #[test]
    fn truncation_records_overflow() {
        let a = Polynomial::from_monomials([mono(1.0, &[], &[1, 3], &[2, 2])]);
        let b = Polynomial::from_monomials([mono(2.0, &[], &[2, 2], &[0, 4])]);
        let full = poisson_bracket(&a, &b);
        assert!(!full.is_empty());
        let t = bracket_truncated(&a, &b, 4);
        assert!(t.poly.is_empty());
        assert_eq!(t.overflow_terms, 1);
        assert!(t.overflow_mass >= full.norm1());
        assert_eq!(t.overflow_mass, 1.0 * 4.0 * 2.0 * 4.0);
    }
}
