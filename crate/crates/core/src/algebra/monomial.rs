use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::lattice::{canonicalize, ActionIndex, FourierState, IndexVec, LatticeVector, OscIndex};

/// Canonical key of `I_m q_n`: actions plus a fully nonresonant oscillatory part.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct MonoKey {
    pub actions: ActionIndex,
    pub osc: OscIndex,
}

/// Per-mode exponents: `(n, a, k, p)` with `q_n^{a+k} qbar_n^{a+p}`.
/// Sorted by mode; in canonical keys at most one of `k`, `p` is nonzero.
pub type Profile = SmallVec<[(LatticeVector, u16, u16, u16); 12]>;

impl MonoKey {
    /// `I_{actions} q_{upper} qbar_{lower}`, canonicalized.
    pub fn new(
        actions: &[LatticeVector],
        upper: &[LatticeVector],
        lower: &[LatticeVector],
    ) -> Result<Self> {
        let (extra, osc) = canonicalize(upper, lower)?;
        let mut all: IndexVec = actions.iter().copied().collect();
        all.extend(extra.entries().iter().copied());
        Ok(Self {
            actions: ActionIndex::new(all),
            osc,
        })
    }

    pub fn action(n: LatticeVector) -> Self {
        Self {
            actions: ActionIndex::from_slice(&[n]),
            osc: OscIndex::empty(),
        }
    }

    /// Degree in `(q, qbar)`: each action counts 2.
    pub fn degree(&self) -> usize {
        2 * self.actions.len() + self.osc.degree()
    }

    pub fn is_pure_action(&self) -> bool {
        self.osc.is_empty()
    }

    pub fn profile(&self) -> Profile {
        let mut out = Profile::new();
        let mut bump = |n: LatticeVector, slot: usize| {
            match out.binary_search_by(|e| e.0.cmp(&n)) {
                Ok(i) => match slot {
                    0 => out[i].1 += 1,
                    1 => out[i].2 += 1,
                    _ => out[i].3 += 1,
                },
                Err(i) => {
                    let mut e = (n, 0, 0, 0);
                    match slot {
                        0 => e.1 = 1,
                        1 => e.2 = 1,
                        _ => e.3 = 1,
                    }
                    out.insert(i, e);
                }
            }
        };
        for n in self.actions.entries() {
            bump(*n, 0);
        }
        for n in self.osc.upper() {
            bump(*n, 1);
        }
        for n in self.osc.lower() {
            bump(*n, 2);
        }
        out
    }

    /// Rebuilds the canonical key from raw exponents `(n, alpha, beta)` sorted by mode.
    pub fn from_exponents(exps: &[(LatticeVector, u16, u16)]) -> Self {
        let mut actions = IndexVec::new();
        let mut upper = IndexVec::new();
        let mut lower = IndexVec::new();
        for &(n, alpha, beta) in exps {
            let a = alpha.min(beta);
            for _ in 0..a {
                actions.push(n);
            }
            for _ in a..alpha {
                upper.push(n);
            }
            for _ in a..beta {
                lower.push(n);
            }
        }
        Self {
            actions: ActionIndex::new(actions),
            osc: OscIndex::new(upper, lower).expect("balanced by construction"),
        }
    }

    /// Number of ordered index tuples `(m; k; p)` that collapse onto this key:
    /// `|m|!/prod mult! * L!/prod mult_k! * L!/prod mult_p!`.
    pub fn ordered_multiplicity(&self) -> f64 {
        fn perms(s: &[LatticeVector]) -> f64 {
            let mut acc = factorial(s.len());
            let mut i = 0;
            while i < s.len() {
                let mut j = i;
                while j < s.len() && s[j] == s[i] {
                    j += 1;
                }
                acc /= factorial(j - i);
                i = j;
            }
            acc
        }
        perms(self.actions.entries()) * perms(self.osc.upper()) * perms(self.osc.lower())
    }

    pub fn evaluate(&self, state: &FourierState) -> Complex64 {
        let mut acc = Complex64::new(1.0, 0.0);
        for n in self.actions.entries() {
            acc *= state.action(n);
        }
        for n in self.osc.upper() {
            acc *= state.get(n);
        }
        for n in self.osc.lower() {
            acc *= state.get(n).conj();
        }
        acc
    }

    /// All indices touched by the key.
    pub fn modes(&self) -> impl Iterator<Item = &LatticeVector> {
        self.actions.entries().iter().chain(self.osc.entries())
    }

    pub fn validate_momentum(&self) -> Result<()> {
        if self.osc.is_momentum_zero() {
            Ok(())
        } else {
            Err(Error::MalformedMonomial(format!(
                "momentum not conserved: {self:?}"
            )))
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|x| x as f64).product()
}

impl fmt::Debug for MonoKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "I{:?} q{:?}", self.actions, self.osc)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Monomial {
    pub coeff: Complex64,
    pub key: MonoKey,
}

impl Monomial {
    pub fn new(
        coeff: Complex64,
        actions: &[LatticeVector],
        upper: &[LatticeVector],
        lower: &[LatticeVector],
    ) -> Result<Self> {
        Ok(Self {
            coeff,
            key: MonoKey::new(actions, upper, lower)?,
        })
    }

    pub fn degree(&self) -> usize {
        self.key.degree()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: i32) -> LatticeVector {
        LatticeVector::new(&[x])
    }

    #[test]
    fn new_moves_pairs_into_actions() {
        let k = MonoKey::new(&[v(4)], &[v(1), v(2), v(2)], &[v(2), v(5), v(5)]).unwrap();
        assert_eq!(k.actions.entries(), &[v(2), v(4)]);
        assert_eq!(k.osc.upper(), &[v(1), v(2)]);
        assert_eq!(k.degree(), 8);
    }

    #[test]
    fn profile_round_trip() {
        let k = MonoKey::new(&[v(1), v(1)], &[v(1), v(3)], &[v(2), v(2)]).unwrap();
        let exps: Vec<_> = k
            .profile()
            .iter()
            .map(|&(n, a, kk, p)| (n, a + kk, a + p))
            .collect();
        assert_eq!(MonoKey::from_exponents(&exps), k);
    }

    #[test]
    fn multiplicity_of_quartic() {
        let k = MonoKey::new(&[], &[v(1), v(3)], &[v(2), v(2)]).unwrap();
        assert_eq!(k.ordered_multiplicity(), 2.0);
        let k = MonoKey::new(&[], &[v(0), v(3)], &[v(1), v(2)]).unwrap();
        assert_eq!(k.ordered_multiplicity(), 4.0);
    }
}
