use nls_bnf_core::divisor::{
    enumerate_tuples, lower_envelope, monte_carlo_violation, omega, omega_scaled, EnvelopeParams,
    EnvelopeVariant, MonteCarloConfig,
};
use nls_bnf_core::lattice::{LatticeVector, OscIndex};
use nls_bnf_core::potential::{PotentialParams, RandomPotential};
use proptest::prelude::*;

fn v(x: i32) -> LatticeVector {
    LatticeVector::new(&[x])
}

fn pot(seed: u64) -> RandomPotential {
    RandomPotential::sample(PotentialParams { dim: 1, r: 1.0, m: 2, cutoff: 6, seed }).unwrap()
}

fn sides() -> impl Strategy<Value = (Vec<LatticeVector>, Vec<LatticeVector>)> {
    (1usize..=3).prop_flat_map(|l| {
        (
            prop::collection::vec((-6i32..=6).prop_map(v), l),
            prop::collection::vec((-6i32..=6).prop_map(v), l),
        )
    })
}

proptest! {
    #[test]
    fn omega_antisymmetric((u, l) in sides(), seed in 0u64..1000) {
        let p = pot(seed);
        let t = OscIndex::from_slices(&u, &l).unwrap();
        let a = omega_scaled(&t, &p).unwrap();
        let b = omega_scaled(&t.swapped(), &p).unwrap();
        prop_assert_eq!(a, -b);
    }

    #[test]
    fn omega_vanishes_on_resonant_tuples(
        u in prop::collection::vec((-6i32..=6).prop_map(v), 1..=4),
        seed in 0u64..1000,
        eps in 0.01f64..1.0,
        rot in 0usize..4,
    ) {
        let mut l = u.clone();
        let k = rot % l.len();
        l.rotate_left(k);
        let t = OscIndex::from_slices(&u, &l).unwrap();
        prop_assert_eq!(omega(&t, &pot(seed), eps).unwrap(), 0.0);
    }

    #[test]
    fn scaled_omega_independent_of_eps((u, l) in sides(), e1 in 0.01f64..1.0, e2 in 0.01f64..1.0) {
        let p = pot(7);
        let t = OscIndex::from_slices(&u, &l).unwrap();
        let a = omega(&t, &p, e1).unwrap() * e1 * e1;
        let b = omega(&t, &p, e2).unwrap() * e2 * e2;
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn envelope_permutation_invariant((u, l) in sides(), shift in 0usize..3, nplus in any::<bool>()) {
        prop_assume!(u.iter().collect::<std::collections::BTreeSet<_>>() != l.iter().collect());
        let t = OscIndex::from_slices(&u, &l).unwrap();
        prop_assume!(t.is_nonresonant());
        let variant = if nplus { EnvelopeVariant::NplusExponent } else { EnvelopeVariant::MuExponent };
        let env = EnvelopeParams::from_gamma(0.2, variant).unwrap();
        let (mut u2, mut l2) = (u.clone(), l.clone());
        u2.rotate_left(shift % u.len());
        l2.reverse();
        let t2 = OscIndex::from_slices(&u2, &l2).unwrap();
        let e = lower_envelope(&t, &env, 1.0, 2).unwrap();
        prop_assert_eq!(e, lower_envelope(&t2, &env, 1.0, 2).unwrap());
        prop_assert_eq!(e, lower_envelope(&t.swapped(), &env, 1.0, 2).unwrap());
    }
}

#[test]
fn resonant_tuple_has_no_envelope() {
    let env = EnvelopeParams::from_gamma(0.2, EnvelopeVariant::MuExponent).unwrap();
    let t = OscIndex::from_slices(&[v(1), v(2)], &[v(2), v(1)]).unwrap();
    assert!(lower_envelope(&t, &env, 1.0, 2).is_err());
}

#[test]
fn enumeration_splits_resonant_and_nonresonant() {
    let ts = enumerate_tuples(1, 2, 3, 1_000_000).unwrap();
    assert!(ts.nonresonant.iter().all(|t| t.is_nonresonant() && t.is_momentum_zero()));
    assert!(ts.resonant.iter().all(|t| !t.is_nonresonant()));
    let p = pot(3);
    assert!(ts.resonant.iter().all(|t| omega_scaled(t, &p).unwrap() == 0.0));
}

#[test]
fn violation_fraction_within_gamma() {
    let cfg = MonteCarloConfig {
        r_max: 2,
        k_max: 4,
        envelope: EnvelopeParams::from_gamma(0.2, EnvelopeVariant::MuExponent).unwrap(),
        potential: PotentialParams { dim: 1, r: 1.0, m: 2, cutoff: 4, seed: 100 },
        trials: 500,
        enumeration_limit: 10_000_000,
    };
    let r = monte_carlo_violation(&cfg).unwrap();
    assert!(r.fraction <= 0.2, "fraction {}", r.fraction);
    assert!(r.wilson_low <= r.fraction && r.fraction <= r.wilson_high);
    assert_eq!(r.resonant_nonzero, 0);
    assert!(r.resonant_tuples > 0);
}
