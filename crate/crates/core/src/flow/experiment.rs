//! Long-time stability runs and their diagnostics.

use std::io::{Read, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::nls::{SimConfig, Stepper};
use crate::error::{Error, Result};
use crate::lattice::{box_points, hs_norm, FourierState, LatticeVector};
use crate::potential::{stream_id, RandomPotential};

/// Mixed into the run seed so initial phases never share streams with the potential.
const PHASE_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// `q_n = eps^2 <n>^{-s} e^{i theta_n} / Z` over `|n|_inf <= K` with
/// `|q|_{H^s} = eps^2`.
pub fn initial_state(cfg: &SimConfig) -> FourierState {
    let mut st = FourierState::new(cfg.d, cfg.k);
    let pts = box_points(cfg.d, cfg.k);
    let target = cfg.eps * cfg.eps;
    for n in &pts {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ PHASE_SALT);
        rng.set_stream(stream_id(n));
        let theta = rng.random::<f64>() * std::f64::consts::TAU;
        let amp = (1.0 + n.norm_sq() as f64).powf(-cfg.s / 2.0);
        st.set(*n, Complex64::from_polar(amp, theta)).expect("in box");
    }
    let z = hs_norm(&st, cfg.s);
    let mut out = FourierState::new(cfg.d, cfg.k);
    if z > 0.0 {
        for (n, q) in st.iter() {
            out.set(*n, q * (target / z)).expect("in box");
        }
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub hs_norm: Vec<f64>,
    pub mass: Vec<f64>,
    pub energy: Vec<f64>,
    /// `D_s(t) = sum <n>^{2s} | |q_n(t)|^2 - |q_n(0)|^2 |`.
    pub action_drift: Vec<f64>,
    pub initial_hs: f64,
    pub sup_hs: f64,
    /// `sup |q(t)|_{H^s} <= 2 |q(0)|_{H^s}` over the samples.
    pub passes: bool,
    pub max_mass_deviation: f64,
    pub max_energy_deviation: f64,
    pub final_drift: f64,
    /// Set when the run stopped early.
    pub aborted: Option<String>,
}

impl Trajectory {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::InvalidParameter(format!("csv: {e}"));
        wr.write_record(["t", "hs_norm", "mass", "energy", "action_drift"])
            .map_err(io)?;
        for i in 0..self.times.len() {
            wr.serialize((
                self.times[i],
                self.hs_norm[i],
                self.mass[i],
                self.energy[i],
                self.action_drift[i],
            ))
            .map_err(io)?;
        }
        wr.flush()
            .map_err(|e| Error::InvalidParameter(format!("csv: {e}")))?;
        Ok(())
    }
}

struct Sampler {
    weights: Vec<f64>,
    initial: Vec<f64>,
}

impl Sampler {
    fn new(st: &Stepper, s: f64) -> Self {
        let weights = st
            .modes()
            .map(|(n, _)| (1.0 + n.norm_sq() as f64).powf(s))
            .collect();
        let initial = st.modes().map(|(_, q)| q.norm_sqr()).collect();
        Self { weights, initial }
    }

    fn push(&self, st: &mut Stepper, t: f64, tr: &mut Trajectory) {
        let mut hs = 0.0;
        let mut drift = 0.0;
        for (((_, q), w), i0) in st.modes().zip(&self.weights).zip(&self.initial) {
            let i = q.norm_sqr();
            hs += w * i;
            drift += w * (i - i0).abs();
        }
        tr.times.push(t);
        tr.hs_norm.push(hs.sqrt());
        tr.mass.push(st.mass());
        tr.energy.push(st.energy());
        tr.action_drift.push(drift);
    }
}

/// Integrates from `u0` to `T`, sampling every `sample_every` steps and at the end.
pub fn run_trajectory(cfg: &SimConfig, pot: &RandomPotential, u0: &FourierState) -> Result<Trajectory> {
    let mut st = Stepper::new(cfg, pot)?;
    st.load(u0)?;
    let sampler = Sampler::new(&st, cfg.s);
    let mut tr = Trajectory::default();
    sampler.push(&mut st, 0.0, &mut tr);
    let steps = cfg.steps();
    let blowup = 1e6 * tr.hs_norm[0].max(f64::MIN_POSITIVE);
    for k in 1..=steps {
        if let Err(e) = st.step() {
            tr.aborted = Some(e.to_string());
            break;
        }
        if k % cfg.sample_every == 0 || k == steps {
            sampler.push(&mut st, k as f64 * cfg.dt, &mut tr);
            if *tr.hs_norm.last().unwrap() > blowup {
                tr.aborted = Some(format!("blow-up at step {k}"));
                break;
            }
        }
    }
    tr.initial_hs = tr.hs_norm[0];
    tr.sup_hs = tr.hs_norm.iter().fold(0.0, |a: f64, b| a.max(*b));
    tr.passes = tr.aborted.is_none() && tr.sup_hs <= 2.0 * tr.initial_hs;
    let (m0, e0) = (tr.mass[0], tr.energy[0]);
    tr.max_mass_deviation = tr
        .mass
        .iter()
        .map(|m| (m - m0).abs() / m0.max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    tr.max_energy_deviation = tr.energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max);
    tr.final_drift = *tr.action_drift.last().unwrap();
    Ok(tr)
}

/// Stability run from the seeded initial data of [`initial_state`].
pub fn stability_experiment(cfg: &SimConfig, pot: &RandomPotential) -> Result<Trajectory> {
    run_trajectory(cfg, pot, &initial_state(cfg))
}

const SNAPSHOT_MAGIC: &[u8; 8] = b"NLSBNFSS";
pub const SNAPSHOT_VERSION: u32 = 1;

/// Binary state snapshot: magic, version, dim, cutoff, count, then per mode
/// the coordinates (`i32`) and the amplitude (`f64` re, im), little endian.
pub fn write_snapshot<W: Write>(state: &FourierState, mut w: W) -> std::io::Result<()> {
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
    w.write_all(&(state.dim() as u32).to_le_bytes())?;
    w.write_all(&state.cutoff().to_le_bytes())?;
    w.write_all(&(state.len() as u64).to_le_bytes())?;
    for (n, q) in state.iter() {
        for c in n.coords() {
            w.write_all(&c.to_le_bytes())?;
        }
        w.write_all(&q.re.to_le_bytes())?;
        w.write_all(&q.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<FourierState> {
    let bad = |m: &str| Error::Parse(format!("snapshot: {m}"));
    let mut buf8 = [0u8; 8];
    let mut buf4 = [0u8; 4];
    r.read_exact(&mut buf8).map_err(|_| bad("truncated header"))?;
    if &buf8 != SNAPSHOT_MAGIC {
        return Err(bad("bad magic"));
    }
    let mut u32_of = |r: &mut R| -> Result<u32> {
        r.read_exact(&mut buf4).map_err(|_| bad("truncated header"))?;
        Ok(u32::from_le_bytes(buf4))
    };
    let version = u32_of(&mut r)?;
    if version != SNAPSHOT_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let dim = u32_of(&mut r)? as usize;
    let cutoff = u32_of(&mut r)?;
    r.read_exact(&mut buf8).map_err(|_| bad("truncated header"))?;
    let count = u64::from_le_bytes(buf8);
    let mut st = FourierState::new(dim, cutoff);
    for _ in 0..count {
        let mut coords = [0i32; 4];
        for c in coords.iter_mut().take(dim) {
            r.read_exact(&mut buf4).map_err(|_| bad("truncated body"))?;
            *c = i32::from_le_bytes(buf4);
        }
        r.read_exact(&mut buf8).map_err(|_| bad("truncated body"))?;
        let re = f64::from_le_bytes(buf8);
        r.read_exact(&mut buf8).map_err(|_| bad("truncated body"))?;
        let im = f64::from_le_bytes(buf8);
        st.set(LatticeVector::try_new(&coords[..dim])?, Complex64::new(re, im))?;
    }
    Ok(st)
}
