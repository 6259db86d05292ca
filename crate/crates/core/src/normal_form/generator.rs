use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::{bracket_truncated, Polynomial};
use crate::divisor::{lower_envelope, omega_scaled, EnvelopeParams};
use crate::error::{Error, Result};
use crate::lattice::OscIndex;
use crate::potential::RandomPotential;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DivisorSummary {
    pub distinct_tuples: usize,
    pub certified: usize,
    pub failures: usize,
    /// Smallest `|eps^2 Omega| / envelope` over the block.
    pub min_margin: f64,
    pub min_abs_omega_scaled: f64,
}

/// Certifies every divisor of the block and returns `eps^2 Omega` per tuple.
pub fn certify_block(
    block: &Polynomial,
    pot: &RandomPotential,
    env: &EnvelopeParams,
) -> Result<(BTreeMap<OscIndex, f64>, DivisorSummary)> {
    let mut omegas = BTreeMap::new();
    let mut summary = DivisorSummary {
        min_margin: f64::INFINITY,
        min_abs_omega_scaled: f64::INFINITY,
        ..Default::default()
    };
    let mut first_failure = None;
    for key in block.keys() {
        if omegas.contains_key(&key.osc) {
            continue;
        }
        let w = omega_scaled(&key.osc, pot)?;
        let e = lower_envelope(&key.osc, env, pot.params().r, pot.params().m)?;
        summary.distinct_tuples += 1;
        let margin = w.abs() / e;
        summary.min_margin = summary.min_margin.min(margin);
        summary.min_abs_omega_scaled = summary.min_abs_omega_scaled.min(w.abs());
        if w.abs() >= e && w != 0.0 {
            summary.certified += 1;
        } else {
            summary.failures += 1;
            first_failure.get_or_insert_with(|| format!("{:?} (eps^2 Omega = {w:e}, envelope {e:e})", key.osc));
        }
        omegas.insert(key.osc.clone(), w);
    }
    if let Some(first) = first_failure {
        return Err(Error::BadPotential {
            failures: summary.failures,
            first,
        });
    }
    Ok((omegas, summary))
}

/// `F = -i sum c eps^2 / (eps^2 Omega) I_m q_n` over the targeted block, so that
/// `block + {Sigma_0, F} = 0`.
pub fn build_generator(
    block: &Polynomial,
    pot: &RandomPotential,
    env: &EnvelopeParams,
    eps: f64,
) -> Result<(Polynomial, DivisorSummary)> {
    let (omegas, summary) = certify_block(block, pot, env)?;
    let e2 = eps * eps;
    let f = block
        .iter()
        .map(|(k, c)| {
            let w = omegas[&k.osc];
            (k.clone(), Complex64::new(0.0, -1.0) * c * (e2 / w))
        })
        .collect();
    Ok((f, summary))
}

/// `block + {Sigma_0, F}`; zero up to rounding for a correctly built generator.
pub fn cancellation_residual(block: &Polynomial, sigma0: &Polynomial, f: &Polynomial) -> Polynomial {
    let mut r = bracket_truncated(sigma0, f, usize::MAX).poly;
    r.add_assign(block);
    r
}
