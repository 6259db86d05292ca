use nls_bnf_core::algebra::text::{format_polynomial, parse_polynomial};
use nls_bnf_core::algebra::{
    bracket_truncated, contract_rules, poisson_bracket, Bucket, ClassParams, ClassifiedHamiltonian,
    EnvelopeBound, EnvelopeKind, Monomial, Polynomial,
};
use nls_bnf_core::lattice::LatticeVector;
use nls_bnf_core::oracle::{bracket_by_differentiation, random_momentum_zero_polynomial, random_polynomial};
use nls_bnf_core::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn modes(dim: usize) -> Vec<LatticeVector> {
    if dim == 1 {
        (-2..=2).map(|x| LatticeVector::new(&[x])).collect()
    } else {
        vec![
            LatticeVector::new(&[0, 0]),
            LatticeVector::new(&[1, 0]),
            LatticeVector::new(&[0, -1]),
            LatticeVector::new(&[1, 1]),
            LatticeVector::new(&[-2, 1]),
        ]
    }
}

fn scale(ps: &[&Polynomial]) -> f64 {
    ps.iter().map(|p| p.max_abs()).fold(1.0, f64::max)
}

fn max_dev(a: &Polynomial, b: &Polynomial) -> f64 {
    a.sub(b).max_abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bracket_matches_differentiation(seed in any::<u64>(), dim in 1usize..=2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = modes(dim);
        let f = random_polynomial(&mut rng, &m, 4, 8);
        let g = random_polynomial(&mut rng, &m, 4, 8);
        let a = poisson_bracket(&f, &g);
        let b = bracket_by_differentiation(&f, &g);
        prop_assert!(a.max_relative_deviation(&b) <= 1e-12);
    }

    #[test]
    fn bracket_antisymmetric(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = modes(1);
        let f = random_polynomial(&mut rng, &m, 5, 6);
        let g = random_polynomial(&mut rng, &m, 5, 6);
        let fg = poisson_bracket(&f, &g);
        let gf = poisson_bracket(&g, &f);
        let mut sum = fg.clone();
        sum.add_assign(&gf);
        prop_assert!(sum.max_abs() <= 1e-14 * fg.max_abs().max(1.0));
    }

    #[test]
    fn jacobi_identity(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = modes(1);
        let f = random_polynomial(&mut rng, &m, 3, 4);
        let g = random_polynomial(&mut rng, &m, 3, 4);
        let h = random_polynomial(&mut rng, &m, 3, 4);
        let mut total = poisson_bracket(&f, &poisson_bracket(&g, &h));
        total.add_assign(&poisson_bracket(&g, &poisson_bracket(&h, &f)));
        total.add_assign(&poisson_bracket(&h, &poisson_bracket(&f, &g)));
        let s = scale(&[&f, &g, &h]).powi(3) * 64.0;
        prop_assert!(total.max_abs() <= 1e-13 * s, "jacobi residual {}", total.max_abs());
    }

    #[test]
    fn bracket_preserves_momentum_zero(seed in any::<u64>(), dim in 1usize..=2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_momentum_zero_polynomial(&mut rng, dim, 3, 6, 6);
        let g = random_momentum_zero_polynomial(&mut rng, dim, 3, 6, 6);
        for k in f.keys().chain(g.keys()) {
            prop_assert!(k.osc.is_momentum_zero());
        }
        for k in poisson_bracket(&f, &g).keys() {
            prop_assert!(k.osc.is_momentum_zero(), "{:?}", k);
        }
    }

    /// Gaussian-integer coefficients keep every product exact, so the
    /// per-case split must reproduce the bracket bit for bit.
    #[test]
    fn contraction_totals_equal_bracket(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = modes(1);
        let integral = |p: Polynomial| {
            Polynomial::from_terms(p.iter().map(|(k, c)| {
                (k.clone(), Complex64::new((8.0 * c.re).round(), (8.0 * c.im).round()))
            }))
        };
        let f = integral(random_polynomial(&mut rng, &m, 4, 6));
        let g = integral(random_polynomial(&mut rng, &m, 4, 6));
        let mut total = Polynomial::new();
        for (k1, c1) in f.iter() {
            for (k2, c2) in g.iter() {
                let t1 = Monomial { coeff: *c1, key: k1.clone() };
                let t2 = Monomial { coeff: *c2, key: k2.clone() };
                for c in contract_rules(&t1, &t2) {
                    total.add_term(c.term.key, c.term.coeff);
                }
            }
        }
        prop_assert_eq!(total, poisson_bracket(&f, &g));
    }

    #[test]
    fn envelope_factorizes(
        a in prop::collection::vec((-9i32..=9).prop_map(|x| LatticeVector::new(&[x])), 0..6),
        b in prop::collection::vec((-9i32..=9).prop_map(|x| LatticeVector::new(&[x])), 0..6),
        n in 1.0f64..20.0,
        s1 in -50.0f64..5.0,
        tau in 0.0f64..10.0,
    ) {
        for kind in [EnvelopeKind::I, EnvelopeKind::Q] {
            let e = EnvelopeBound::new(kind, n, s1, tau);
            let joint: Vec<_> = a.iter().chain(&b).copied().collect();
            let lhs = e.log_value(&joint);
            let rhs = e.log_value(&a) + e.log_value(&b);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn classify_is_partition(seed in any::<u64>(), a in 2usize..8, n_inf in 1.0f64..4.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = random_momentum_zero_polynomial(&mut rng, 1, 3, 12, 10);
        let params = ClassParams {
            n_a: 1.0, n_a1: 2.0, n_inf, a, eps: 0.1, s1: 0.0, tau: 0.0,
            even_degenerate_resonant: true,
        };
        let h = ClassifiedHamiltonian::classify(&raw, params).unwrap();
        let mut seen = 0;
        for (_, p) in h.buckets() {
            seen += p.len();
            for k in p.keys() {
                let hits = h.buckets().filter(|(_, q)| q.contains(k)).count();
                prop_assert_eq!(hits, 1);
            }
        }
        prop_assert_eq!(seen, raw.len());
        prop_assert_eq!(h.total(), raw.clone());
        prop_assert_eq!(parse_polynomial(&format_polynomial(&h.total())).unwrap(), raw);
    }
}

#[test]
fn sextic_bracket_oracle_two_dims() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let m = modes(2);
    for _ in 0..50 {
        let f = random_polynomial(&mut rng, &m, 5, 8);
        let g = random_polynomial(&mut rng, &m, 5, 8);
        let a = poisson_bracket(&f, &g);
        let b = bracket_by_differentiation(&f, &g);
        assert!(a.max_relative_deviation(&b) <= 1e-12);
    }
}

#[test]
fn truncated_bracket_drops_only_high_degree() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = modes(1);
    let f = random_polynomial(&mut rng, &m, 6, 8);
    let g = random_polynomial(&mut rng, &m, 6, 8);
    let full = poisson_bracket(&f, &g);
    let cut = bracket_truncated(&f, &g, 8);
    let low = full.filter(|k| k.degree() <= 8);
    assert!(max_dev(&cut.poly, &low) <= 1e-14 * full.max_abs().max(1.0));
    let dropped = full.filter(|k| k.degree() > 8).norm1();
    assert!(cut.overflow_mass >= dropped * (1.0 - 1e-12));
}

#[test]
fn quadratic_actions_commute_with_resonant_terms() {
    let v = |x: i32| LatticeVector::new(&[x]);
    let s0 = Polynomial::from_terms([(
        nls_bnf_core::algebra::MonoKey::action(v(1)),
        Complex64::new(3.0, 0.0),
    )]);
    let i1i2 = Monomial::new(Complex64::new(1.0, 0.0), &[v(1), v(2)], &[], &[]).unwrap();
    assert!(poisson_bracket(&s0, &Polynomial::from_monomials([i1i2])).is_empty());
    let _ = Bucket::S0;
}
