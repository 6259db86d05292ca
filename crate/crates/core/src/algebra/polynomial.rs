use std::collections::btree_map::{self, BTreeMap};

use num_complex::Complex64;

use super::monomial::{MonoKey, Monomial};
use crate::lattice::FourierState;

/// Sparse polynomial in `(I, q, qbar)` keyed by canonical monomials.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Polynomial {
    terms: BTreeMap<MonoKey, Complex64>,
}

impl Polynomial {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (MonoKey, Complex64)>) -> Self {
        let mut p = Self::new();
        for (k, c) in terms {
            p.add_term(k, c);
        }
        p
    }

    pub fn from_monomials(terms: impl IntoIterator<Item = Monomial>) -> Self {
        Self::from_terms(terms.into_iter().map(|m| (m.key, m.coeff)))
    }

    /// Adds `c` to the coefficient of `key`, dropping exact zeros.
    pub fn add_term(&mut self, key: MonoKey, c: Complex64) {
        match self.terms.entry(key) {
            btree_map::Entry::Vacant(e) => {
                if c != Complex64::new(0.0, 0.0) {
                    e.insert(c);
                }
            }
            btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if *e.get() == Complex64::new(0.0, 0.0) {
                    e.remove();
                }
            }
        }
    }

    pub fn insert(&mut self, key: MonoKey, c: Complex64) {
        if c == Complex64::new(0.0, 0.0) {
            self.terms.remove(&key);
        } else {
            self.terms.insert(key, c);
        }
    }

    pub fn remove(&mut self, key: &MonoKey) -> Option<Complex64> {
        self.terms.remove(key)
    }

    pub fn get(&self, key: &MonoKey) -> Complex64 {
        self.terms.get(key).copied().unwrap_or_default()
    }

    pub fn contains(&self, key: &MonoKey) -> bool {
        self.terms.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MonoKey, &Complex64)> {
        self.terms.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = &MonoKey> {
        self.terms.keys()
    }

    pub fn add_assign(&mut self, other: &Polynomial) {
        for (k, c) in other.iter() {
            self.add_term(k.clone(), *c);
        }
    }

    pub fn add_scaled(&mut self, other: &Polynomial, s: Complex64) {
        for (k, c) in other.iter() {
            self.add_term(k.clone(), *c * s);
        }
    }

    pub fn scaled(&self, s: Complex64) -> Polynomial {
        Self::from_terms(self.iter().map(|(k, c)| (k.clone(), *c * s)))
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        out.add_scaled(other, Complex64::new(-1.0, 0.0));
        out
    }

    /// Sum of coefficient magnitudes.
    pub fn norm1(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, |a, x| a + x)
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn max_degree(&self) -> usize {
        self.terms.keys().map(|k| k.degree()).max().unwrap_or(0)
    }

    /// Drops terms with `|c| < threshold`; returns the dropped mass.
    pub fn prune_below(&mut self, threshold: f64) -> f64 {
        let mut dropped = 0.0;
        self.terms.retain(|_, c| {
            let keep = c.norm() >= threshold;
            if !keep {
                dropped += c.norm();
            }
            keep
        });
        dropped
    }

    pub fn retain(&mut self, f: impl FnMut(&MonoKey, &mut Complex64) -> bool) {
        self.terms.retain(f);
    }

    pub fn filter(&self, mut f: impl FnMut(&MonoKey) -> bool) -> Polynomial {
        Self {
            terms: self
                .terms
                .iter()
                .filter(|(k, _)| f(k))
                .map(|(k, c)| (k.clone(), *c))
                .collect(),
        }
    }

    pub fn evaluate(&self, state: &FourierState) -> Complex64 {
        self.terms.iter().map(|(k, c)| c * k.evaluate(state)).sum()
    }

    /// Largest `|c_a - c_b|` over the union of supports, relative to the largest coefficient.
    pub fn max_relative_deviation(&self, other: &Polynomial) -> f64 {
        let scale = self.max_abs().max(other.max_abs());
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for (k, c) in self.iter() {
            worst = worst.max((c - other.get(k)).norm());
        }
        for (k, c) in other.iter() {
            if !self.contains(k) {
                worst = worst.max(c.norm());
            }
        }
        worst / scale
    }
}

impl FromIterator<(MonoKey, Complex64)> for Polynomial {
    fn from_iter<T: IntoIterator<Item = (MonoKey, Complex64)>>(iter: T) -> Self {
        Self::from_terms(iter)
    }
}
