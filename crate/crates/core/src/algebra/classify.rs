//! Bucket decomposition `Sigma_0 .. Sigma_7` and the initial Hamiltonian.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::monomial::MonoKey;
use super::polynomial::Polynomial;
use crate::divisor::is_even_degenerate;
use crate::error::{Error, Result};
use crate::lattice::{box_points, LatticeVector};
use crate::potential::RandomPotential;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Bucket {
    S0,
    S1,
    S21,
    S22,
    S3,
    S4,
    S5,
    S6,
    S7,
}

impl Bucket {
    pub const ALL: [Bucket; 9] = [
        Bucket::S0,
        Bucket::S1,
        Bucket::S21,
        Bucket::S22,
        Bucket::S3,
        Bucket::S4,
        Bucket::S5,
        Bucket::S6,
        Bucket::S7,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Bucket::S0 => "S0",
            Bucket::S1 => "S1",
            Bucket::S21 => "S21",
            Bucket::S22 => "S22",
            Bucket::S3 => "S3",
            Bucket::S4 => "S4",
            Bucket::S5 => "S5",
            Bucket::S6 => "S6",
            Bucket::S7 => "S7",
        }
    }

    /// `Sigma_21` and `Sigma_22` both count as `Sigma_2`.
    pub fn family(&self) -> u8 {
        match self {
            Bucket::S0 => 0,
            Bucket::S1 => 1,
            Bucket::S21 | Bucket::S22 => 2,
            Bucket::S3 => 3,
            Bucket::S4 => 4,
            Bucket::S5 => 5,
            Bucket::S6 => 6,
            Bucket::S7 => 7,
        }
    }
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Bucket {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Bucket::ALL
            .into_iter()
            .find(|b| b.label() == s)
            .ok_or_else(|| Error::Parse(format!("bucket {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassParams {
    #[serde(rename = "N_a")]
    pub n_a: f64,
    #[serde(rename = "N_a1")]
    pub n_a1: f64,
    #[serde(rename = "N_inf")]
    pub n_inf: f64,
    #[serde(rename = "A")]
    pub a: usize,
    pub eps: f64,
    pub s1: f64,
    pub tau: f64,
    /// Route monomials whose divisor vanishes for every even potential to `Sigma_2`
    /// instead of `Sigma_3`.
    pub even_degenerate_resonant: bool,
}

fn max_eff(entries: impl Iterator<Item = f64>) -> f64 {
    entries.fold(1.0, f64::max)
}

/// Bucket of an untagged monomial under the fixed precedence
/// `S6 > S5 > pure action > S4 > S3`.
pub fn bucket_of(key: &MonoKey, p: &ClassParams) -> Result<Bucket> {
    let deg = key.degree();
    if deg > 2 * p.a {
        return Ok(Bucket::S6);
    }
    if deg > p.a {
        return Ok(Bucket::S5);
    }
    let split_2 = |m_plus: f64| {
        if m_plus < p.n_a {
            Bucket::S21
        } else {
            Bucket::S22
        }
    };
    if key.is_pure_action() {
        let e = key.actions.entries();
        if e.len() == 1 {
            return Ok(Bucket::S0);
        }
        if e.len() == 2 && e[0] == e[1] {
            return Ok(Bucket::S1);
        }
        return Ok(split_2(max_eff(e.iter().map(|n| n.eff_norm()))));
    }
    let mu = key.osc.mu().max(1.0);
    if mu >= p.n_inf {
        return Ok(Bucket::S4);
    }
    if p.even_degenerate_resonant && is_even_degenerate(&key.osc) {
        return Ok(split_2(max_eff(key.modes().map(|n| n.eff_norm()))));
    }
    if key.osc.n_minus().max(1.0) >= p.n_a {
        return Ok(Bucket::S3);
    }
    Err(Error::Classification(format!(
        "{key:?}: |n_-| < N_a = {} with mu < N_inf = {}",
        p.n_a, p.n_inf
    )))
}

/// Hamiltonian split into buckets. `Sigma_7` coefficients are stored without
/// their `eps^A` prefactor.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifiedHamiltonian {
    pub params: ClassParams,
    buckets: BTreeMap<Bucket, Polynomial>,
    sigma7: Polynomial,
}

impl ClassifiedHamiltonian {
    pub fn classify(raw: &Polynomial, params: ClassParams) -> Result<Self> {
        let mut buckets: BTreeMap<Bucket, Polynomial> = BTreeMap::new();
        for (k, c) in raw.iter() {
            let b = bucket_of(k, &params)?;
            buckets.entry(b).or_default().insert(k.clone(), *c);
        }
        Ok(Self {
            params,
            buckets,
            sigma7: Polynomial::new(),
        })
    }

    pub fn with_sigma7(mut self, tagged: Polynomial) -> Self {
        self.sigma7 = tagged;
        self
    }

    pub fn bucket(&self, b: Bucket) -> &Polynomial {
        static EMPTY: std::sync::OnceLock<Polynomial> = std::sync::OnceLock::new();
        if b == Bucket::S7 {
            return &self.sigma7;
        }
        self.buckets
            .get(&b)
            .unwrap_or_else(|| EMPTY.get_or_init(Polynomial::new))
    }

    pub fn sigma7(&self) -> &Polynomial {
        &self.sigma7
    }

    /// Every bucket in order, including `Sigma_7`.
    pub fn buckets(&self) -> impl Iterator<Item = (Bucket, &Polynomial)> {
        Bucket::ALL.into_iter().map(move |b| (b, self.bucket(b)))
    }

    pub fn len(&self) -> usize {
        self.buckets.values().map(|p| p.len()).sum::<usize>() + self.sigma7.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sum of the untagged buckets.
    pub fn untagged(&self) -> Polynomial {
        let mut out = Polynomial::new();
        for p in self.buckets.values() {
            out.add_assign(p);
        }
        out
    }

    /// Full Hamiltonian, with `eps^A Sigma_7` folded back in.
    pub fn total(&self) -> Polynomial {
        let mut out = self.untagged();
        out.add_scaled(
            &self.sigma7,
            Complex64::new(self.params.eps.powi(self.params.a as i32), 0.0),
        );
        out
    }

    pub fn reclassify(&self, params: ClassParams) -> Result<Self> {
        Ok(Self::classify(&self.untagged(), params)?.with_sigma7(self.sigma7.clone()))
    }

    /// `Sigma_3` monomials with `N_a <= |n_-| < N_{a+1}`.
    pub fn targeted_block(&self, lo: f64, hi: f64) -> Polynomial {
        self.bucket(Bucket::S3).filter(|k| {
            let nm = k.osc.n_minus().max(1.0);
            nm >= lo && nm < hi
        })
    }

    /// Replaces the contents of one untagged bucket.
    pub fn set_bucket(&mut self, b: Bucket, p: Polynomial) {
        if b == Bucket::S7 {
            self.sigma7 = p;
        } else {
            self.buckets.insert(b, p);
        }
    }
}

/// The quartic `sum_{n1-n2+n3-n4=0} q_{n1} qbar_{n2} q_{n3} qbar_{n4}` over the
/// box `|n|_inf <= k`, with every ordered tuple accumulated onto its canonical key.
pub fn quartic_raw(dim: usize, k: u32) -> Polynomial {
    let pts = box_points(dim, k);
    let ix = crate::lattice::BoxIndexer::new(dim, k);
    let mut acc: BTreeMap<MonoKey, f64> = BTreeMap::new();
    for n1 in &pts {
        for n2 in &pts {
            for n3 in &pts {
                let n4 = n1.sub(n2).add(n3);
                if ix.index(&n4).is_none() {
                    continue;
                }
                let key = MonoKey::new(&[], &[*n1, *n3], &[*n2, n4]).expect("balanced");
                *acc.entry(key).or_default() += 1.0;
            }
        }
    }
    acc.into_iter()
        .map(|(k, c)| (k, Complex64::new(c, 0.0)))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResonantSplit {
    /// `2 (sum I)^2`.
    pub gauge: Polynomial,
    /// `-sum I_n^2`.
    pub sigma1: Polynomial,
    /// Fully nonresonant quartic remainder.
    pub nonresonant: Polynomial,
}

/// Splits a momentum-zero quartic sum into `2(sum I)^2 - sum I^2` and the
/// fully nonresonant remainder.
pub fn resonant_split(quartic: &Polynomial) -> Result<ResonantSplit> {
    let mut out = ResonantSplit {
        gauge: Polynomial::new(),
        sigma1: Polynomial::new(),
        nonresonant: Polynomial::new(),
    };
    for (k, c) in quartic.iter() {
        if k.degree() != 4 {
            return Err(Error::MalformedMonomial(format!("not quartic: {k:?}")));
        }
        k.validate_momentum()?;
        if !k.is_pure_action() {
            out.nonresonant.insert(k.clone(), *c);
            continue;
        }
        let e = k.actions.entries();
        if e[0] == e[1] {
            // c = 2 - 1 on the diagonal.
            out.gauge.add_term(k.clone(), *c * 2.0);
            out.sigma1.add_term(k.clone(), -*c);
        } else {
            out.gauge.add_term(k.clone(), *c);
        }
    }
    Ok(out)
}

/// `Sigma_0 + Sigma_1 + (nonresonant quartic)` in the scaled variables, with
/// `omega_n = (|n|^2 + v_n)/eps^2`. The gauge term `2 (sum I)^2` commutes with
/// every balanced monomial and is left out.
pub fn initial_raw(pot: &RandomPotential, eps: f64) -> Result<Polynomial> {
    let dim = pot.dim();
    let k = pot.cutoff();
    let mut h = Polynomial::new();
    for n in box_points(dim, k) {
        let w = crate::potential::frequency(&n, pot, eps)?;
        h.add_term(MonoKey::action(n), Complex64::new(w, 0.0));
    }
    let split = resonant_split(&quartic_raw(dim, k))?;
    h.add_assign(&split.sigma1);
    h.add_assign(&split.nonresonant);
    Ok(h)
}

pub fn initial_hamiltonian(
    pot: &RandomPotential,
    params: ClassParams,
) -> Result<ClassifiedHamiltonian> {
    ClassifiedHamiltonian::classify(&initial_raw(pot, params.eps)?, params)
}

/// Modes touched by any term.
pub fn support(p: &Polynomial) -> Vec<LatticeVector> {
    let mut v: Vec<LatticeVector> = p.keys().flat_map(|k| k.modes().copied()).collect();
    v.sort_unstable();
    v.dedup();
    v
}
