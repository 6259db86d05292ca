//! Random even convolution potentials `v_n = R (1+|n|)^{-m} sigma_n`.
//!
//! Each representative index `n` (leading nonzero coordinate positive, or zero)
//! draws its `sigma_n` from its own ChaCha8 stream: the generator is seeded with
//! the run seed and the stream id is the packed zigzag encoding of `n`
//! (16 bits per coordinate). The draw for `n` is therefore independent of
//! iteration order and of the cutoff. `v_{-n}` mirrors `v_n`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{box_points, BoxIndexer, LatticeVector};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialParams {
    pub dim: usize,
    #[serde(rename = "R")]
    pub r: f64,
    pub m: u32,
    #[serde(rename = "K")]
    pub cutoff: u32,
    pub seed: u64,
}

impl PotentialParams {
    pub fn validate(&self) -> Result<()> {
        if !(1..=crate::lattice::MAX_DIM).contains(&self.dim) {
            return Err(Error::InvalidParameter(format!("d = {}", self.dim)));
        }
        if !(self.r >= 0.0 && self.r.is_finite()) {
            return Err(Error::InvalidParameter(format!("R = {}", self.r)));
        }
        if self.m < 1 {
            return Err(Error::InvalidParameter("m must be >= 1".into()));
        }
        if self.cutoff < 1 || self.cutoff > i16::MAX as u32 {
            return Err(Error::InvalidParameter(format!("K = {}", self.cutoff)));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// Stream id for the draw of `sigma_n`.
pub fn stream_id(n: &LatticeVector) -> u64 {
    n.coords().iter().fold(0u64, |acc, &c| {
        let z = ((c << 1) ^ (c >> 31)) as u32 as u64;
        (acc << 16) | (z & 0xffff)
    })
}

/// Draws `sigma_n` uniform on `[-1/2, 1/2)` for a representative index.
pub fn sigma(seed: u64, n: &LatticeVector) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(n));
    rng.random::<f64>() - 0.5
}

/// Decay profile `(1+|n|)^{-m}`.
pub fn decay(n: &LatticeVector, m: u32) -> f64 {
    (1.0 + n.norm()).powi(-(m as i32))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RandomPotential {
    params: PotentialParams,
    indexer: BoxIndexer,
    coeffs: Vec<f64>,
}

impl RandomPotential {
    pub fn sample(params: PotentialParams) -> Result<Self> {
        params.validate()?;
        let indexer = BoxIndexer::new(params.dim, params.cutoff);
        let mut coeffs = vec![0.0; indexer.len()];
        for n in box_points(params.dim, params.cutoff) {
            if !n.is_positive_representative() {
                continue;
            }
            let v = params.r * decay(&n, params.m) * sigma(params.seed, &n);
            coeffs[indexer.index(&n).unwrap()] = v;
            coeffs[indexer.index(&n.neg()).unwrap()] = v;
        }
        Ok(Self {
            params,
            indexer,
            coeffs,
        })
    }

    pub fn zero(dim: usize, cutoff: u32) -> Self {
        let params = PotentialParams {
            dim,
            r: 0.0,
            m: 1,
            cutoff,
            seed: 0,
        };
        let indexer = BoxIndexer::new(dim, cutoff);
        Self {
            params,
            indexer,
            coeffs: vec![0.0; indexer.len()],
        }
    }

    /// Builds a potential from explicit coefficients; missing entries are zero.
    /// Fails if the table is not even.
    pub fn from_coefficients(
        params: PotentialParams,
        entries: &[(LatticeVector, f64)],
    ) -> Result<Self> {
        let mut pot = Self::zero(params.dim, params.cutoff);
        pot.params = params;
        for (n, v) in entries {
            let i = pot.checked_index(n)?;
            pot.coeffs[i] = *v;
        }
        for n in box_points(params.dim, params.cutoff) {
            if pot.get(&n)? != pot.get(&n.neg())? {
                return Err(Error::InvalidParameter(format!("potential not even at {n}")));
            }
        }
        Ok(pot)
    }

    pub fn params(&self) -> &PotentialParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.dim
    }

    pub fn cutoff(&self) -> u32 {
        self.params.cutoff
    }

    pub fn indexer(&self) -> BoxIndexer {
        self.indexer
    }

    pub fn dense(&self) -> &[f64] {
        &self.coeffs
    }

    fn checked_index(&self, n: &LatticeVector) -> Result<usize> {
        if n.dim() != self.params.dim {
            return Err(Error::DimensionMismatch {
                expected: self.params.dim,
                got: n.dim(),
            });
        }
        self.indexer.index(n).ok_or_else(|| Error::OutOfRange {
            index: n.to_string(),
            cutoff: self.params.cutoff,
        })
    }

    pub fn get(&self, n: &LatticeVector) -> Result<f64> {
        Ok(self.coeffs[self.checked_index(n)?])
    }

    /// The epsilon-free frequency `|n|^2 + v_n`.
    pub fn scaled_frequency(&self, n: &LatticeVector) -> Result<f64> {
        Ok(n.norm_sq() as f64 + self.get(n)?)
    }

    pub fn iter(&self) -> impl Iterator<Item = (LatticeVector, f64)> + '_ {
        box_points(self.params.dim, self.params.cutoff)
            .into_iter()
            .zip(self.coeffs.iter().copied())
    }

    pub fn to_document(&self) -> PotentialDocument {
        PotentialDocument {
            d: self.params.dim,
            r: self.params.r,
            m: self.params.m,
            k: self.params.cutoff,
            seed: self.params.seed,
            coefficients: self
                .iter()
                .map(|(n, v)| CoefficientEntry { n, v })
                .collect(),
        }
    }

    pub fn from_document(doc: &PotentialDocument) -> Result<Self> {
        let params = PotentialParams {
            dim: doc.d,
            r: doc.r,
            m: doc.m,
            cutoff: doc.k,
            seed: doc.seed,
        };
        params.validate()?;
        let entries: Vec<_> = doc.coefficients.iter().map(|e| (e.n, e.v)).collect();
        Self::from_coefficients(params, &entries)
    }
}

/// `omega_n = (|n|^2 + v_n) / eps^2`.
pub fn frequency(n: &LatticeVector, pot: &RandomPotential, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps = {eps}")));
    }
    Ok(pot.scaled_frequency(n)? / (eps * eps))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientEntry {
    pub n: LatticeVector,
    pub v: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialDocument {
    pub d: usize,
    #[serde(rename = "R")]
    pub r: f64,
    pub m: u32,
    #[serde(rename = "K")]
    pub k: u32,
    pub seed: u64,
    pub coefficients: Vec<CoefficientEntry>,
}
