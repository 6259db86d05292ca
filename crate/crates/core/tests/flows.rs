use nls_bnf_core::algebra::{poisson_bracket, Polynomial};
use nls_bnf_core::flow::{
    generator_flow_with, initial_state, stability_experiment, FlowOptions, SimConfig, Stepper,
};
use nls_bnf_core::lattice::{FourierState, LatticeVector};
use nls_bnf_core::oracle::{direct_quartic, random_real_polynomial, random_state};
use nls_bnf_core::potential::{PotentialParams, RandomPotential};
use nls_bnf_core::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn v(x: i32) -> LatticeVector {
    LatticeVector::new(&[x])
}

fn pot(k: u32) -> RandomPotential {
    RandomPotential::sample(PotentialParams { dim: 1, r: 1.0, m: 2, cutoff: k, seed: 7 }).unwrap()
}

const TIGHT: FlowOptions = FlowOptions { tol: 1e-13, max_steps: 1_000_000 };

/// Real coordinates `(x_1..x_N, y_1..y_N)` with `q = x + i y`.
fn to_real(st: &FourierState, modes: &[LatticeVector]) -> Vec<f64> {
    let mut z: Vec<f64> = modes.iter().map(|n| st.get(n).re).collect();
    z.extend(modes.iter().map(|n| st.get(n).im));
    z
}

fn from_real(z: &[f64], modes: &[LatticeVector]) -> FourierState {
    let n = modes.len();
    let mut st = FourierState::new(1, 3);
    for (i, m) in modes.iter().enumerate() {
        st.set(*m, Complex64::new(z[i], z[n + i])).unwrap();
    }
    st
}

fn eval(p: &Polynomial, z: &[f64], modes: &[LatticeVector]) -> f64 {
    p.evaluate(&from_real(z, modes)).re
}

fn gradient(f: impl Fn(&[f64]) -> f64, z: &[f64], h: f64) -> Vec<f64> {
    (0..z.len())
        .map(|i| {
            let mut zp = z.to_vec();
            let mut zm = z.to_vec();
            zp[i] += h;
            zm[i] -= h;
            (f(&zp) - f(&zm)) / (2.0 * h)
        })
        .collect()
}

/// `{F, G} = (F_y G_x - F_x G_y) / 2` in real coordinates.
fn bracket_form(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() / 2;
    (0..n).map(|i| (a[n + i] * b[i] - a[i] * b[n + i]) / 2.0).sum()
}

#[test]
fn generator_flow_preserves_poisson_bracket() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let modes = [v(-2), v(0), v(1), v(3)];
    let f = random_real_polynomial(&mut rng, &modes, 4, 4).filter(|k| k.degree() == 4);
    for _ in 0..3 {
        let obs_f = random_real_polynomial(&mut rng, &modes, 3, 4);
        let obs_g = random_real_polynomial(&mut rng, &modes, 3, 4);
        let q = random_state(&mut rng, 1, 3, &modes, 0.6);
        let z = to_real(&q, &modes);
        let flow = |z: &[f64]| {
            let img = generator_flow_with(&f, &from_real(z, &modes), 1.0, &TIGHT).unwrap().0;
            to_real(&img, &modes)
        };
        // f o Phi and g o Phi differentiated through the flow.
        let h = 1e-5;
        let lhs_f = gradient(|z| eval(&obs_f, &flow(z), &modes), &z, h);
        let lhs_g = gradient(|z| eval(&obs_g, &flow(z), &modes), &z, h);
        let lhs = bracket_form(&lhs_f, &lhs_g);
        let img = from_real(&flow(&z), &modes);
        let rhs = poisson_bracket(&obs_f, &obs_g).evaluate(&img).re;
        assert!(
            (lhs - rhs).abs() <= 1e-6 * rhs.abs().max(1e-2),
            "lhs {lhs} rhs {rhs}"
        );
    }
}

#[test]
fn forward_and_backward_flows_cancel() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let modes = [v(-1), v(0), v(2)];
    let f = random_real_polynomial(&mut rng, &modes, 5, 4);
    let neg = f.scaled(Complex64::new(-1.0, 0.0));
    let q = random_state(&mut rng, 1, 3, &modes, 0.5);
    let there = generator_flow_with(&f, &q, 1.0, &TIGHT).unwrap().0;
    let back = generator_flow_with(&neg, &there, 1.0, &TIGHT).unwrap().0;
    for n in &modes {
        assert!((back.get(n) - q.get(n)).norm() < 1e-10);
    }
    assert!(modes.iter().any(|n| (there.get(n) - q.get(n)).norm() > 1e-3));
}

#[test]
fn mass_conserved_over_ten_thousand_steps() {
    let p = pot(16);
    let cfg = SimConfig { k: 16, eps: 0.5, s: 1.0, dt: 1e-3, t_final: 10.0, sample_every: 1000, ..Default::default() };
    let tr = stability_experiment(&cfg, &p).unwrap();
    assert_eq!(cfg.steps(), 10_000);
    assert!(tr.max_mass_deviation <= 1e-10, "{}", tr.max_mass_deviation);
}

#[test]
fn energy_error_is_second_order() {
    let p = pot(16);
    let devs: Vec<f64> = [4e-3, 2e-3, 1e-3]
        .iter()
        .map(|&dt| {
            let c = SimConfig { k: 16, eps: 1.0, s: 1.0, dt, t_final: 1.0, sample_every: 1, ..Default::default() };
            stability_experiment(&c, &p).unwrap().max_energy_deviation
        })
        .collect();
    for w in devs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((ratio - 4.0).abs() <= 0.5, "ratio {ratio} from {devs:?}");
    }
}

#[test]
fn plane_wave_phase() {
    let p = pot(8);
    let n = v(3);
    let a = Complex64::new(0.8, 0.0);
    let mut st = FourierState::new(1, 8);
    st.set(n, a).unwrap();
    let c = SimConfig { k: 8, dt: 1e-3, t_final: 1.0, ..Default::default() };
    let mut s = Stepper::new(&c, &p).unwrap();
    s.load(&st).unwrap();
    for _ in 0..1000 {
        s.step().unwrap();
    }
    let w = 9.0 + p.get(&n).unwrap() + c.cubic_coeff * a.norm_sqr();
    let want = a * Complex64::from_polar(1.0, -w);
    assert!((s.state().get(&n) - want).norm() <= 1e-6);
}

/// Ordered-tuple quartic sum with momentum conserved modulo `m`, as seen by
/// an `m`-point collocation grid.
fn aliased_quartic(st: &FourierState, m: i32) -> Complex64 {
    let modes: Vec<(LatticeVector, Complex64)> = st.iter().map(|(n, q)| (*n, *q)).collect();
    let mut total = Complex64::default();
    for (n1, q1) in &modes {
        for (n2, q2) in &modes {
            for (n3, q3) in &modes {
                for (n4, q4) in &modes {
                    let k = n1.coords()[0] - n2.coords()[0] + n3.coords()[0] - n4.coords()[0];
                    if k.rem_euclid(m) == 0 {
                        total += q1 * q2.conj() * q3 * q4.conj();
                    }
                }
            }
        }
    }
    total
}

#[test]
fn grid_energy_matches_fourier_sums() {
    let p = pot(4);
    let cfg = SimConfig { k: 4, eps: 0.8, s: 1.0, cubic_coeff: 2.0, ..Default::default() };
    let st = initial_state(&cfg);
    let mut lin = Stepper::new(&SimConfig { cubic_coeff: 0.0, ..cfg.clone() }, &p).unwrap();
    lin.load(&st).unwrap();
    let mut full = Stepper::new(&cfg, &p).unwrap();
    full.load(&st).unwrap();
    let quad: f64 = st
        .iter()
        .map(|(n, q)| (n.norm_sq() as f64 + p.get(n).unwrap()) * q.norm_sqr())
        .sum();
    assert!((lin.energy() - quad).abs() <= 1e-14 * quad);
    let quartic = (full.energy() - lin.energy()) / (cfg.cubic_coeff / 2.0);
    let aliased = aliased_quartic(&st, 9);
    assert!(aliased.im.abs() < 1e-14);
    assert!((quartic - aliased.re).abs() <= 1e-12 * aliased.re, "{quartic} vs {}", aliased.re);
    // The aliased tuples are visible at this resolution.
    assert!((direct_quartic(&st, 4).re - aliased.re).abs() > 1e-6 * aliased.re);
}
