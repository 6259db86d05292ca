use serde::{Deserialize, Serialize};

use crate::algebra::ClassParams;
use crate::error::{Error, Result};

/// Which block the re-shifts after the first step of a cutoff target.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReshiftWindow {
    /// `N_a <= |n_-| < N_{a+1}`, the same block as the first step.
    #[default]
    Current,
    /// `N_{a+1} <= |n_-| < N_{a+1}` as printed: an empty range, so re-shifts
    /// are identity maps.
    Literal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationSchedule {
    /// `N_1 = 1 < N_2 < ... < N_b = N_inf`.
    pub cutoffs: Vec<f64>,
    #[serde(rename = "A")]
    pub a: usize,
    pub eps: f64,
    pub s: f64,
    pub s1: f64,
    pub tau: f64,
    pub lie_order: usize,
    /// Lie series stops once a term is below `lie_tol` times the nonquadratic norm.
    pub lie_tol: f64,
    /// Re-shifts after the first step at each cutoff.
    pub inner_reps: usize,
    /// Bracket degree cap; `2A + 2` when absent.
    pub max_degree: Option<usize>,
    /// Relative threshold below which coefficients are dropped as rounding residue.
    pub prune_rel: f64,
    pub reshift: ReshiftWindow,
    pub even_degenerate_resonant: bool,
    /// Bound on the removed-block residual `|block + {Sigma_0, F}|_1 / |block|_1`.
    pub residual_tol: f64,
}

impl IterationSchedule {
    /// Schedule with `tau = 10 s / A` and `s1 = s - 5 tau`.
    pub fn new(a: usize, eps: f64, s: f64, cutoffs: Vec<f64>) -> Self {
        let tau = 10.0 * s / a as f64;
        Self {
            cutoffs,
            a,
            eps,
            s,
            s1: s - 5.0 * tau,
            tau,
            lie_order: 8,
            lie_tol: 1e-16,
            inner_reps: a + 1,
            max_degree: None,
            prune_rel: 1e-14,
            reshift: ReshiftWindow::Current,
            even_degenerate_resonant: true,
            residual_tol: 1e-12,
        }
    }

    pub fn n_inf(&self) -> f64 {
        *self.cutoffs.last().unwrap_or(&1.0)
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree.unwrap_or(2 * self.a + 2)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.cutoffs.len() < 2 {
            return bad("schedule needs at least two cutoffs".into());
        }
        if self.cutoffs[0] != 1.0 {
            return bad(format!("first cutoff must be 1, got {}", self.cutoffs[0]));
        }
        if self.cutoffs.windows(2).any(|w| !(w[1] > w[0])) {
            return bad(format!("cutoffs must increase strictly: {:?}", self.cutoffs));
        }
        if self.a < 4 || self.a % 2 != 0 {
            return bad(format!("A must be even and >= 4, got {}", self.a));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        if self.lie_order < 2 {
            return bad(format!("lie_order must be >= 2, got {}", self.lie_order));
        }
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1.0);
        if !close(self.s, self.s1 + 5.0 * self.tau) {
            return bad(format!("s = s1 + 5 tau fails: {} vs {}", self.s, self.s1 + 5.0 * self.tau));
        }
        if !close(self.tau, 10.0 * self.s / self.a as f64) {
            return bad(format!("tau = 10 s / A fails: {}", self.tau));
        }
        Ok(())
    }

    pub fn class_params(&self, n_a: f64, n_a1: f64) -> ClassParams {
        ClassParams {
            n_a,
            n_a1,
            n_inf: self.n_inf(),
            a: self.a,
            eps: self.eps,
            s1: self.s1,
            tau: self.tau,
            even_degenerate_resonant: self.even_degenerate_resonant,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relations_hold_by_construction() {
        let s = IterationSchedule::new(6, 0.05, 216.0, vec![1.0, 2.0]);
        s.validate().unwrap();
        assert_eq!(s.tau, 360.0);
        assert_eq!(s.s1, 216.0 - 1800.0);
    }

    #[test]
    fn rejects_bad_cutoffs() {
        let mut s = IterationSchedule::new(6, 0.05, 0.0, vec![1.0, 2.0]);
        s.cutoffs = vec![1.0, 1.0];
        assert!(s.validate().is_err());
        s.cutoffs = vec![2.0, 3.0];
        assert!(s.validate().is_err());
        s.cutoffs = vec![1.0, 3.0];
        s.a = 5;
        assert!(s.validate().is_err());
    }
}
