//! Sparse polynomial Hamiltonians in `(I_m, q_n, qbar_n)`.

pub mod bounds;
pub mod bracket;
pub mod classify;
pub mod monomial;
pub mod polynomial;
pub mod text;

pub use bounds::{verify_induction, BoundReport, EnvelopeBound, EnvelopeKind, HypothesisParams};
pub use bracket::{bracket_truncated, contract_rules, poisson_bracket, BracketOutput, ContractionCase};
pub use classify::{
    bucket_of, initial_hamiltonian, initial_raw, quartic_raw, resonant_split, Bucket,
    ClassParams, ClassifiedHamiltonian, ResonantSplit,
};
pub use monomial::{MonoKey, Monomial};
pub use polynomial::Polynomial;
