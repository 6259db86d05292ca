//! Iterated Birkhoff normal forms for the cubic NLS with a random even
//! convolution potential on the torus, small-divisor statistics, and a
//! spectral simulator for long-time Sobolev stability experiments.

pub mod algebra;
pub mod divisor;
pub mod error;
pub mod flow;
pub mod lattice;
pub mod normal_form;
pub mod oracle;
pub mod potential;

pub use error::{Error, Result};
pub use lattice::{canonicalize, hs_norm, ActionIndex, FourierState, LatticeVector, OscIndex};
pub use num_complex::Complex64;
pub use potential::{frequency, PotentialParams, RandomPotential};
