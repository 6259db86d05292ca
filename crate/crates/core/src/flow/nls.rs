//! Spectral integrators for `i u_t = -Lap u + V*u + c |u|^2 u` on the torus.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::SpectralGrid;
use crate::error::{Error, Result};
use crate::lattice::{FourierState, LatticeVector};
use crate::potential::RandomPotential;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    StrangSplit,
    Rk4Spectral,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dealias {
    /// Grid of `2K+1` points per axis holding exactly the modes `|n|_inf <= K`.
    #[default]
    None,
    /// Grid of `3K+1` points per axis; modes outside the box are zeroed after
    /// every nonlinear evaluation. Not mass conserving.
    TwoThirds,
}

/// Largest `dt * max|omega|` for which classical RK4 is stable on the imaginary axis.
pub const RK4_STABILITY: f64 = 2.8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub d: usize,
    #[serde(rename = "K")]
    pub k: u32,
    pub eps: f64,
    pub s: f64,
    pub cubic_coeff: f64,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub scheme: Scheme,
    pub dealias: Dealias,
    /// Diagnostics are sampled every this many steps.
    pub sample_every: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            d: 1,
            k: 32,
            eps: 0.05,
            s: 6.0,
            cubic_coeff: 2.0,
            dt: 0.01,
            t_final: 400.0,
            scheme: Scheme::StrangSplit,
            dealias: Dealias::None,
            sample_every: 100,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self, pot: &RandomPotential) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if pot.dim() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: pot.dim(),
            });
        }
        if pot.cutoff() < self.k {
            return bad(format!(
                "potential cutoff {} below simulation cutoff {}",
                pot.cutoff(),
                self.k
            ));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt = {}", self.dt));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return bad(format!("T = {}", self.t_final));
        }
        if self.sample_every == 0 {
            return bad("sample_every must be positive".into());
        }
        if self.scheme == Scheme::Rk4Spectral {
            let wmax = max_linear_frequency(self.d, self.k, pot);
            if self.dt * wmax > RK4_STABILITY {
                return bad(format!(
                    "dt = {} exceeds the RK4 bound {} at K = {}",
                    self.dt,
                    RK4_STABILITY / wmax,
                    self.k
                ));
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

fn max_linear_frequency(d: usize, k: u32, pot: &RandomPotential) -> f64 {
    let kk = (k as f64).powi(2) * d as f64;
    kk + pot.dense().iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

/// Integrator state on the spectral grid.
pub struct Stepper {
    grid: SpectralGrid,
    k: u32,
    scheme: Scheme,
    dealias: Dealias,
    cubic: f64,
    dt: f64,
    /// `|n|^2 + v_n` per grid index (zero outside the box).
    omega: Vec<f64>,
    half_phase: Vec<Complex64>,
    /// Grid indices inside the box.
    inside: Vec<(LatticeVector, usize)>,
    outside: Vec<usize>,
    pub hat: Vec<Complex64>,
    work: Vec<Complex64>,
    steps_taken: usize,
}

impl Stepper {
    pub fn new(cfg: &SimConfig, pot: &RandomPotential) -> Result<Self> {
        cfg.validate(pot)?;
        let m = match cfg.dealias {
            Dealias::None => 2 * cfg.k as usize + 1,
            Dealias::TwoThirds => 3 * cfg.k as usize + 1,
        };
        let grid = SpectralGrid::new(cfg.d, m);
        let n = grid.len();
        let inside = grid.box_indices(cfg.k);
        let mut omega = vec![0.0; n];
        let mut is_inside = vec![false; n];
        for (v, i) in &inside {
            omega[*i] = v.norm_sq() as f64 + pot.get(v)?;
            is_inside[*i] = true;
        }
        let outside = (0..n).filter(|i| !is_inside[*i]).collect();
        let half_phase = omega
            .iter()
            .map(|w| Complex64::from_polar(1.0, -w * cfg.dt / 2.0))
            .collect();
        Ok(Self {
            grid,
            k: cfg.k,
            scheme: cfg.scheme,
            dealias: cfg.dealias,
            cubic: cfg.cubic_coeff,
            dt: cfg.dt,
            omega,
            half_phase,
            inside,
            outside,
            hat: vec![Complex64::default(); n],
            work: vec![Complex64::default(); n],
            steps_taken: 0,
        })
    }

    pub fn load(&mut self, state: &FourierState) -> Result<()> {
        if state.dim() != self.grid.dim {
            return Err(Error::DimensionMismatch {
                expected: self.grid.dim,
                got: state.dim(),
            });
        }
        self.hat.iter_mut().for_each(|x| *x = Complex64::default());
        for (n, q) in state.iter() {
            if n.max_norm() > self.k {
                return Err(Error::OutOfRange {
                    index: n.to_string(),
                    cutoff: self.k,
                });
            }
            let i = self.grid.index(n);
            self.hat[i] = *q;
        }
        Ok(())
    }

    pub fn state(&self) -> FourierState {
        let mut st = FourierState::new(self.grid.dim, self.k);
        for (n, i) in &self.inside {
            st.set(*n, self.hat[*i]).expect("in box");
        }
        st
    }

    /// `(n, uhat_n)` over the box.
    pub fn modes(&self) -> impl Iterator<Item = (&LatticeVector, Complex64)> {
        self.inside.iter().map(|(n, i)| (n, self.hat[*i]))
    }

    fn mask(&mut self) {
        if self.dealias == Dealias::TwoThirds {
            for &i in &self.outside {
                self.hat[i] = Complex64::default();
            }
        }
    }

    fn strang(&mut self) {
        for (x, p) in self.hat.iter_mut().zip(&self.half_phase) {
            *x *= p;
        }
        if self.cubic == 0.0 {
            for (x, p) in self.hat.iter_mut().zip(&self.half_phase) {
                *x *= p;
            }
            return;
        }
        self.work.copy_from_slice(&self.hat);
        self.grid.to_physical(&mut self.work);
        let cdt = self.cubic * self.dt;
        for u in self.work.iter_mut() {
            *u *= Complex64::from_polar(1.0, -cdt * u.norm_sqr());
        }
        self.grid.to_spectral(&mut self.work);
        std::mem::swap(&mut self.hat, &mut self.work);
        self.mask();
        for (x, p) in self.hat.iter_mut().zip(&self.half_phase) {
            *x *= p;
        }
    }

    /// `-i (omega uhat + c (|u|^2 u)^)`.
    fn rhs(&mut self, hat: &[Complex64], out: &mut Vec<Complex64>) {
        out.clear();
        out.extend_from_slice(hat);
        self.grid.to_physical(out);
        for u in out.iter_mut() {
            *u *= u.norm_sqr();
        }
        self.grid.to_spectral(out);
        let mi = Complex64::new(0.0, -1.0);
        for (i, x) in out.iter_mut().enumerate() {
            *x = mi * (self.omega[i] * hat[i] + self.cubic * *x);
        }
        if self.dealias == Dealias::TwoThirds {
            for &i in &self.outside {
                out[i] = Complex64::default();
            }
        }
    }

    fn rk4(&mut self) {
        let h = self.dt;
        let y = self.hat.clone();
        let mut k1 = Vec::new();
        let mut k2 = Vec::new();
        let mut k3 = Vec::new();
        let mut k4 = Vec::new();
        self.rhs(&y, &mut k1);
        let y2: Vec<_> = y.iter().zip(&k1).map(|(a, b)| a + b * (h / 2.0)).collect();
        self.rhs(&y2, &mut k2);
        let y3: Vec<_> = y.iter().zip(&k2).map(|(a, b)| a + b * (h / 2.0)).collect();
        self.rhs(&y3, &mut k3);
        let y4: Vec<_> = y.iter().zip(&k3).map(|(a, b)| a + b * h).collect();
        self.rhs(&y4, &mut k4);
        for i in 0..y.len() {
            self.hat[i] = y[i] + (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (h / 6.0);
        }
    }

    /// Advances one `dt`; fails on non-finite values.
    pub fn step(&mut self) -> Result<()> {
        match self.scheme {
            Scheme::StrangSplit => self.strang(),
            Scheme::Rk4Spectral => self.rk4(),
        }
        self.steps_taken += 1;
        if self.hat.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::NonFinite {
                step: self.steps_taken,
            });
        }
        Ok(())
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    pub fn mass(&self) -> f64 {
        self.hat.iter().map(|x| x.norm_sqr()).sum()
    }

    /// `sum omega_n |uhat_n|^2 + (c/2) <|u|^4>`, the average taken over the grid.
    pub fn energy(&mut self) -> f64 {
        let quad: f64 = self
            .hat
            .iter()
            .zip(&self.omega)
            .map(|(x, w)| w * x.norm_sqr())
            .sum();
        self.work.copy_from_slice(&self.hat);
        self.grid.to_physical(&mut self.work);
        let quart: f64 =
            self.work.iter().map(|u| u.norm_sqr().powi(2)).sum::<f64>() / self.work.len() as f64;
        quad + 0.5 * self.cubic * quart
    }
}

/// One step of the configured scheme applied to `state`.
pub fn nls_step(state: &FourierState, cfg: &SimConfig, pot: &RandomPotential) -> Result<FourierState> {
    let mut st = Stepper::new(cfg, pot)?;
    st.load(state)?;
    st.step()?;
    Ok(st.state())
}
