//! Reference implementations used to cross-check the fast paths: a Poisson
//! bracket by literal differentiation of exponent maps, a brute-force quartic
//! evaluation, and random polynomial generators.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;

use crate::algebra::{MonoKey, Polynomial};
use crate::lattice::{box_points, FourierState, LatticeVector};

/// `q^alpha qbar^beta` as a map from mode to `(alpha_n, beta_n)`.
type Exponents = BTreeMap<LatticeVector, (u32, u32)>;

#[derive(Clone, Debug, Default)]
pub struct RawPolynomial {
    terms: BTreeMap<Vec<(LatticeVector, u32, u32)>, Complex64>,
}

fn flatten(e: &Exponents) -> Vec<(LatticeVector, u32, u32)> {
    e.iter()
        .filter(|(_, &(a, b))| a + b > 0)
        .map(|(n, &(a, b))| (*n, a, b))
        .collect()
}

impl RawPolynomial {
    pub fn from_polynomial(p: &Polynomial) -> Self {
        let mut out = Self::default();
        for (k, c) in p.iter() {
            let mut e = Exponents::new();
            for n in k.actions.entries() {
                let x = e.entry(*n).or_default();
                x.0 += 1;
                x.1 += 1;
            }
            for n in k.osc.upper() {
                e.entry(*n).or_default().0 += 1;
            }
            for n in k.osc.lower() {
                e.entry(*n).or_default().1 += 1;
            }
            out.add(flatten(&e), *c);
        }
        out
    }

    fn add(&mut self, key: Vec<(LatticeVector, u32, u32)>, c: Complex64) {
        *self.terms.entry(key).or_default() += c;
    }

    /// Back to canonical keys by listing every `q` factor as upper and every
    /// `qbar` factor as lower index.
    pub fn to_polynomial(&self) -> Polynomial {
        let mut p = Polynomial::new();
        for (e, c) in &self.terms {
            let mut upper = Vec::new();
            let mut lower = Vec::new();
            for &(n, a, b) in e {
                upper.extend(std::iter::repeat_n(n, a as usize));
                lower.extend(std::iter::repeat_n(n, b as usize));
            }
            let key = MonoKey::new(&[], &upper, &lower).expect("balanced");
            p.add_term(key, *c);
        }
        p
    }

    fn modes(&self) -> Vec<LatticeVector> {
        let mut v: Vec<_> = self.terms.keys().flatten().map(|x| x.0).collect();
        v.sort();
        v.dedup();
        v
    }

    /// `d/dq_n` (`conj = false`) or `d/dqbar_n` (`conj = true`).
    pub fn derivative(&self, n: &LatticeVector, conj: bool) -> Self {
        let mut out = Self::default();
        for (e, c) in &self.terms {
            let mut map: Exponents = e.iter().map(|&(m, a, b)| (m, (a, b))).collect();
            let Some(x) = map.get_mut(n) else { continue };
            let p = if conj { &mut x.1 } else { &mut x.0 };
            if *p == 0 {
                continue;
            }
            let factor = *p as f64;
            *p -= 1;
            out.add(flatten(&map), c * factor);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::default();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let mut map: Exponents = e1.iter().map(|&(m, a, b)| (m, (a, b))).collect();
                for &(m, a, b) in e2 {
                    let x = map.entry(m).or_default();
                    x.0 += a;
                    x.1 += b;
                }
                out.add(flatten(&map), c1 * c2);
            }
        }
        out
    }

    fn add_scaled(&mut self, other: &Self, s: Complex64) {
        for (e, c) in &other.terms {
            self.add(e.clone(), c * s);
        }
    }
}

/// `{f, g} = i sum_n (df/dq_n dg/dqbar_n - df/dqbar_n dg/dq_n)` by differentiation.
pub fn bracket_by_differentiation(f: &Polynomial, g: &Polynomial) -> Polynomial {
    let rf = RawPolynomial::from_polynomial(f);
    let rg = RawPolynomial::from_polynomial(g);
    let mut modes = rf.modes();
    modes.extend(rg.modes());
    modes.sort();
    modes.dedup();
    let i = Complex64::new(0.0, 1.0);
    let mut out = RawPolynomial::default();
    for n in &modes {
        let a = rf.derivative(n, false).mul(&rg.derivative(n, true));
        let b = rf.derivative(n, true).mul(&rg.derivative(n, false));
        out.add_scaled(&a, i);
        out.add_scaled(&b, -i);
    }
    out.to_polynomial()
}

/// `sum_{n1 - n2 + n3 - n4 = 0} q_{n1} qbar_{n2} q_{n3} qbar_{n4}` over the box
/// `|n|_inf <= k`, summed over ordered tuples.
pub fn direct_quartic(state: &FourierState, k: u32) -> Complex64 {
    let pts = box_points(state.dim(), k);
    let mut total = Complex64::default();
    for n1 in &pts {
        for n2 in &pts {
            for n3 in &pts {
                let n4 = n1.sub(n2).add(n3);
                if n4.max_norm() > k {
                    continue;
                }
                total += state.get(n1)
                    * state.get(n2).conj()
                    * state.get(n3)
                    * state.get(&n4).conj();
            }
        }
    }
    total
}

/// A random balanced monomial key of half-degree `half` over `modes`, with a
/// random number of action factors.
pub fn random_key<R: Rng>(rng: &mut R, modes: &[LatticeVector], degree: usize) -> MonoKey {
    let half = degree / 2;
    let n_act = rng.random_range(0..=half);
    let pick = |rng: &mut R| modes[rng.random_range(0..modes.len())];
    let actions: Vec<_> = (0..n_act).map(|_| pick(rng)).collect();
    let upper: Vec<_> = (0..half - n_act).map(|_| pick(rng)).collect();
    let lower: Vec<_> = (0..half - n_act).map(|_| pick(rng)).collect();
    MonoKey::new(&actions, &upper, &lower).expect("balanced")
}

/// Random polynomial with up to `terms` monomials of even degree in `2..=max_degree`.
pub fn random_polynomial<R: Rng>(
    rng: &mut R,
    modes: &[LatticeVector],
    terms: usize,
    max_degree: usize,
) -> Polynomial {
    let mut p = Polynomial::new();
    for _ in 0..terms {
        let degree = 2 * rng.random_range(1..=max_degree / 2);
        let key = random_key(rng, modes, degree);
        let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        p.add_term(key, c);
    }
    p
}

/// Random polynomial whose monomials all satisfy `sum k - sum p = 0`; the last
/// lower index is solved for and draws leaving the box `|n|_inf <= cutoff` are
/// retried.
pub fn random_momentum_zero_polynomial<R: Rng>(
    rng: &mut R,
    dim: usize,
    cutoff: u32,
    terms: usize,
    max_degree: usize,
) -> Polynomial {
    let pts = box_points(dim, cutoff);
    let mut p = Polynomial::new();
    while p.len() < terms {
        let half = rng.random_range(1..=max_degree / 2);
        let pick = |rng: &mut R| pts[rng.random_range(0..pts.len())];
        let upper: Vec<_> = (0..half).map(|_| pick(rng)).collect();
        let mut lower: Vec<_> = (0..half - 1).map(|_| pick(rng)).collect();
        let mut last = LatticeVector::zero(dim);
        for k in &upper {
            last = last.add(k);
        }
        for q in &lower {
            last = last.sub(q);
        }
        if last.max_norm() > cutoff {
            continue;
        }
        lower.push(last);
        let key = MonoKey::new(&[], &upper, &lower).expect("balanced");
        let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        p.add_term(key, c);
    }
    p
}

/// Random real-valued polynomial: every term is paired with its conjugate.
pub fn random_real_polynomial<R: Rng>(
    rng: &mut R,
    modes: &[LatticeVector],
    terms: usize,
    max_degree: usize,
) -> Polynomial {
    let base = random_polynomial(rng, modes, terms, max_degree);
    let mut p = Polynomial::new();
    for (k, c) in base.iter() {
        let conj = MonoKey {
            actions: k.actions.clone(),
            osc: k.osc.swapped(),
        };
        p.add_term(k.clone(), *c);
        p.add_term(conj, c.conj());
    }
    p
}

/// Random state on the given modes with amplitudes below `radius`.
pub fn random_state<R: Rng>(
    rng: &mut R,
    dim: usize,
    cutoff: u32,
    modes: &[LatticeVector],
    radius: f64,
) -> FourierState {
    let mut st = FourierState::new(dim, cutoff);
    for n in modes {
        let r = radius * rng.random::<f64>();
        let th = rng.random::<f64>() * std::f64::consts::TAU;
        st.set(*n, Complex64::from_polar(r, th)).expect("in cutoff");
    }
    st
}
