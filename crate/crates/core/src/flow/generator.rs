//! Time-`t` flow of a polynomial generator, `qdot_n = i dF/dqbar_n`, by an
//! adaptive Dormand-Prince 5(4) scheme. `F` is assumed real-valued so the
//! conjugate equation is implied.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::Polynomial;
use crate::error::{Error, Result};
use crate::lattice::{FourierState, LatticeVector};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    /// Local error tolerance, relative to the largest amplitude.
    pub tol: f64,
    pub max_steps: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_steps: 10_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowStats {
    pub accepted: usize,
    pub rejected: usize,
}

struct Term {
    coeff: Complex64,
    /// `(mode slot, alpha, beta)`.
    exps: Vec<(usize, u16, u16)>,
}

/// `dF/dqbar_n` for every slot, evaluated on dense amplitude vectors.
struct VectorField {
    terms: Vec<Term>,
}

impl VectorField {
    fn new(f: &Polynomial, slot: &BTreeMap<LatticeVector, usize>) -> Self {
        let terms = f
            .iter()
            .map(|(k, c)| Term {
                coeff: *c,
                exps: k
                    .profile()
                    .iter()
                    .map(|&(n, a, kk, p)| (slot[&n], a + kk, a + p))
                    .collect(),
            })
            .collect();
        Self { terms }
    }

    /// `out_n = i dF/dqbar_n (q)`.
    fn eval(&self, q: &[Complex64], out: &mut [Complex64]) {
        out.iter_mut().for_each(|x| *x = Complex64::default());
        let mut factors: Vec<Complex64> = Vec::new();
        for t in &self.terms {
            factors.clear();
            factors.extend(
                t.exps
                    .iter()
                    .map(|&(s, a, b)| q[s].powu(a as u32) * q[s].conj().powu(b as u32)),
            );
            for (j, &(s, a, b)) in t.exps.iter().enumerate() {
                if b == 0 {
                    continue;
                }
                let mut v = t.coeff * b as f64 * q[s].powu(a as u32) * q[s].conj().powu(b as u32 - 1);
                for (i, f) in factors.iter().enumerate() {
                    if i != j {
                        v *= f;
                    }
                }
                out[s] += Complex64::new(0.0, 1.0) * v;
            }
        }
    }
}

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Fifth-order weights minus the embedded fourth-order weights.
const E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

/// Integrates `qdot = i dF/dqbar` from `0` to `t_final >= 0`.
pub fn generator_flow_with(
    f: &Polynomial,
    state: &FourierState,
    t_final: f64,
    opts: &FlowOptions,
) -> Result<(FourierState, FlowStats)> {
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidParameter(format!("t_final = {t_final}")));
    }
    let mut slot: BTreeMap<LatticeVector, usize> = BTreeMap::new();
    for n in state.iter().map(|(n, _)| *n).chain(crate::algebra::classify::support(f)) {
        if n.dim() != state.dim() {
            return Err(Error::DimensionMismatch {
                expected: state.dim(),
                got: n.dim(),
            });
        }
        if n.max_norm() > state.cutoff() {
            return Err(Error::OutOfRange {
                index: n.to_string(),
                cutoff: state.cutoff(),
            });
        }
        let len = slot.len();
        slot.entry(n).or_insert(len);
    }
    let modes: Vec<LatticeVector> = {
        let mut v = vec![LatticeVector::zero(state.dim()); slot.len()];
        for (n, &i) in &slot {
            v[i] = *n;
        }
        v
    };
    let mut y: Vec<Complex64> = modes.iter().map(|n| state.get(n)).collect();
    let mut stats = FlowStats::default();
    let scale = y.iter().fold(0.0f64, |a, x| a.max(x.norm()));
    if f.is_empty() || t_final == 0.0 || scale == 0.0 {
        return Ok((state.clone(), stats));
    }
    let field = VectorField::new(f, &slot);
    let dim = y.len();
    let mut k = vec![vec![Complex64::default(); dim]; 7];
    let mut tmp = vec![Complex64::default(); dim];
    let mut t = 0.0;
    let mut h = t_final.min(0.1);
    let atol = opts.tol * scale;
    field.eval(&y, &mut k[0]);
    while t < t_final {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::StepUnderflow { t });
        }
        if h <= 1e-14 * t_final.max(1.0) {
            return Err(Error::StepUnderflow { t });
        }
        let remaining = t_final - t;
        if remaining <= 1e-15 * t_final {
            break;
        }
        h = h.min(remaining);
        for s in 1..7 {
            for i in 0..dim {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(s) {
                    if A[s][j] != 0.0 {
                        acc += kj[i] * (h * A[s][j]);
                    }
                }
                tmp[i] = acc;
            }
            field.eval(&tmp, &mut k[s]);
        }
        // The last stage is evaluated at the fifth-order solution, left in `tmp`.
        let mut err: f64 = 0.0;
        for i in 0..dim {
            let mut e = Complex64::default();
            for (j, kj) in k.iter().enumerate() {
                if E[j] != 0.0 {
                    e += kj[i] * (h * E[j]);
                }
            }
            let sc = atol + opts.tol * y[i].norm().max(tmp[i].norm());
            err = err.max(e.norm() / sc);
        }
        if err <= 1.0 {
            t += h;
            y.copy_from_slice(&tmp);
            let last = k[6].clone();
            k[0].copy_from_slice(&last);
            stats.accepted += 1;
            if y.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
                return Err(Error::NonFinite {
                    step: stats.accepted,
                });
            }
        } else {
            stats.rejected += 1;
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
    }
    let mut out = FourierState::new(state.dim(), state.cutoff());
    for (n, q) in modes.iter().zip(&y) {
        out.set(*n, *q)?;
    }
    Ok((out, stats))
}

/// `Phi_F^t(q)` with local tolerance `1e-10`.
pub fn generator_flow(f: &Polynomial, state: &FourierState, t_final: f64) -> Result<FourierState> {
    Ok(generator_flow_with(f, state, t_final, &FlowOptions::default())?.0)
}

/// `sum <n>^{2s} |Phi_F(q)_n - q_n|^2`.
pub fn transform_distance(f: &Polynomial, state: &FourierState, s: f64) -> Result<f64> {
    let img = generator_flow(f, state, 1.0)?;
    let mut modes: Vec<&LatticeVector> = state.iter().map(|(n, _)| n).collect();
    modes.extend(img.iter().map(|(n, _)| n));
    modes.sort();
    modes.dedup();
    Ok(modes
        .into_iter()
        .map(|n| (1.0 + n.norm_sq() as f64).powf(s) * (img.get(n) - state.get(n)).norm_sqr())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::MonoKey;

    fn v(x: i32) -> LatticeVector {
        LatticeVector::new(&[x])
    }

    #[test]
    fn pure_action_generator_rotates_phase() {
        let c = 0.7;
        let f = Polynomial::from_terms([(MonoKey::action(v(2)), Complex64::new(c, 0.0))]);
        let mut st = FourierState::new(1, 4);
        st.set(v(2), Complex64::new(0.3, -0.1)).unwrap();
        st.set(v(-1), Complex64::new(0.05, 0.0)).unwrap();
        let out = generator_flow(&f, &st, 1.0).unwrap();
        let want = st.get(&v(2)) * Complex64::from_polar(1.0, c);
        assert!((out.get(&v(2)) - want).norm() < 1e-9);
        assert_eq!(out.get(&v(-1)), st.get(&v(-1)));
        let d = transform_distance(&f, &st, 1.0).unwrap();
        let closed = 5.0 * st.get(&v(2)).norm_sqr() * (Complex64::from_polar(1.0, c) - 1.0).norm_sqr();
        assert!((d - closed).abs() < 1e-9 * closed);
    }

    #[test]
    fn zero_generator_is_identity() {
        let mut st = FourierState::new(1, 4);
        st.set(v(1), Complex64::new(0.3, 0.2)).unwrap();
        let out = generator_flow(&Polynomial::new(), &st, 1.0).unwrap();
        assert_eq!(out, st);
        assert_eq!(transform_distance(&Polynomial::new(), &st, 2.0).unwrap(), 0.0);
    }
}
