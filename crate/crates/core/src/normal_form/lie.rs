//! Truncated Lie series `H o Phi_F = sum_k (1/k!) ad^k H` with `ad X = {X, F}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::{bracket_truncated, BracketOutput, Polynomial};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LieOptions {
    /// Highest order `k` retained.
    pub max_order: usize,
    /// Stop once `|T_k|_1 <= tol * reference`.
    pub tol: f64,
    pub max_degree: usize,
    /// Terms of each `T_k` below `prune_rel * max|T_k|` are dropped.
    pub prune_rel: f64,
    /// Abort with `LieDivergence` after three consecutive growing term norms.
    pub detect_divergence: bool,
}

impl LieOptions {
    /// Exactly `order` terms, no truncation or pruning.
    pub fn exact(order: usize) -> Self {
        Self {
            max_order: order,
            tol: 0.0,
            max_degree: usize::MAX,
            prune_rel: 0.0,
            detect_divergence: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LieOutput {
    #[serde(skip)]
    pub poly: Polynomial,
    /// `|T_k|_1` for `k = 1..`.
    pub term_norms: Vec<f64>,
    pub orders_used: usize,
    pub overflow_mass: f64,
    pub pruned_mass: f64,
    /// Norm of the last retained term.
    pub remainder_proxy: f64,
}

/// Sum of `T_0 = H`, `T_k = {T_{k-1}, F}/k`. `reference` scales the stopping
/// tolerance (typically the norm of `H` without its quadratic part).
pub fn lie_series(
    h: &Polynomial,
    f: &Polynomial,
    opts: &LieOptions,
    reference: f64,
) -> Result<LieOutput> {
    lie_series_from(h, None, f, opts, reference)
}

/// As [`lie_series`], reusing an already computed `{H, F}` (truncated at
/// `opts.max_degree`) as the first-order term.
pub fn lie_series_from(
    h: &Polynomial,
    first: Option<BracketOutput>,
    f: &Polynomial,
    opts: &LieOptions,
    reference: f64,
) -> Result<LieOutput> {
    let mut out = LieOutput {
        poly: h.clone(),
        ..Default::default()
    };
    if f.is_empty() || h.is_empty() {
        return Ok(out);
    }
    let mut term = h.clone();
    let mut growth = 0;
    let mut first = first;
    for k in 1..=opts.max_order {
        let b = match first.take() {
            Some(b) => b,
            None => bracket_truncated(&term, f, opts.max_degree),
        };
        out.overflow_mass += b.overflow_mass / factorial(k - 1);
        term = b.poly.scaled(Complex64::new(1.0 / k as f64, 0.0));
        if opts.prune_rel > 0.0 {
            out.pruned_mass += term.prune_below(opts.prune_rel * term.max_abs());
        }
        let norm = term.norm1();
        if let Some(&prev) = out.term_norms.last() {
            if norm > prev && k >= 3 {
                growth += 1;
            } else {
                growth = 0;
            }
        }
        out.term_norms.push(norm);
        out.poly.add_assign(&term);
        out.orders_used = k;
        out.remainder_proxy = norm;
        if opts.detect_divergence && growth >= 3 {
            return Err(Error::LieDivergence {
                order: k,
                norms: out.term_norms,
            });
        }
        if norm == 0.0 || norm <= opts.tol * reference {
            break;
        }
    }
    Ok(out)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|x| x as f64).product()
}

/// `lie_transform(H, F, order)`: the series through order `order` without
/// truncation or early stopping.
pub fn lie_transform(h: &Polynomial, f: &Polynomial, order: usize) -> Result<Polynomial> {
    Ok(lie_series(h, f, &LieOptions::exact(order), 0.0)?.poly)
}
