//! Fixtures shared by the benchmarks in `benches/`.

use nls_bnf_core::algebra::Polynomial;
use nls_bnf_core::oracle::{random_polynomial, random_real_polynomial};
use nls_bnf_core::LatticeVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn modes_1d(k: i32) -> Vec<LatticeVector> {
    (-k..=k).map(|x| LatticeVector::new(&[x])).collect()
}

/// Two random polynomials with `terms` monomials each, degree at most `max_degree`.
pub fn polynomial_pair(seed: u64, terms: usize, max_degree: usize) -> (Polynomial, Polynomial) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = modes_1d(3);
    (
        random_polynomial(&mut rng, &m, terms, max_degree),
        random_polynomial(&mut rng, &m, terms, max_degree),
    )
}

/// A real quartic Hamiltonian and a real quartic generator on `2k + 1` modes.
pub fn lie_inputs(seed: u64, k: i32, terms: usize) -> (Polynomial, Polynomial) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = modes_1d(k);
    let h = random_real_polynomial(&mut rng, &m, terms, 4);
    let f = random_real_polynomial(&mut rng, &m, terms, 4).filter(|key| key.degree() == 4);
    (h, f)
}
