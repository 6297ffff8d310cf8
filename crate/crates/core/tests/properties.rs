//! Property tests over random words, parameters and permutations.

use martin_gasket::boundary::{harmonic_h, BoundaryPoint, MartinMetric, MetricParams};
use martin_gasket::kernel::transition;
use martin_gasket::linalg::{SparseLu, SparseMatrix};
use martin_gasket::matrices::Levels;
use martin_gasket::potential::Potential;
use martin_gasket::scalar::Field;
use martin_gasket::words::{pi_partner, LetterPerm};
use martin_gasket::{AnyWord, BoundaryWord, ChainParams, FiniteWord, Rational};
use proptest::prelude::*;

fn word(max: usize) -> impl Strategy<Value = FiniteWord> {
    prop::collection::vec(1u8..=3, 0..=max).prop_map(|v| FiniteWord::new(v).unwrap())
}

fn nonempty_word(max: usize) -> impl Strategy<Value = FiniteWord> {
    prop::collection::vec(1u8..=3, 1..=max).prop_map(|v| FiniteWord::new(v).unwrap())
}

fn boundary_word() -> impl Strategy<Value = BoundaryWord> {
    (
        prop::collection::vec(1u8..=3, 0..=4),
        prop::collection::vec(1u8..=3, 1..=3),
    )
        .prop_map(|(p, c)| BoundaryWord::new(p, c).unwrap())
}

fn perm() -> impl Strategy<Value = LetterPerm> {
    (0usize..6).prop_map(|k| LetterPerm::all()[k])
}

/// `p = k/60` strictly inside `(0, 1/2)`.
fn exact_p() -> impl Strategy<Value = ChainParams> {
    (1i64..30).prop_map(|k| ChainParams::exact(k, 60).unwrap())
}

fn float_p() -> impl Strategy<Value = f64> {
    0.02f64..0.48
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rows_are_stochastic(params in exact_p(), u in word(7)) {
        let row = transition::<Rational>(&params, &u).unwrap();
        prop_assert_eq!(row.total(), Rational::from_ratio(1, 1));
        prop_assert!(row.targets.iter().all(|(v, _)| v.len() == u.len() || v.len() == u.len() + 1));
    }

    #[test]
    fn absorption_is_a_distribution(params in exact_p(), x in nonempty_word(6)) {
        let levels = Levels::<Rational>::new(&params).unwrap();
        let r = levels.rho(&x).unwrap();
        let zero = Rational::from_ratio(0, 1);
        prop_assert!(r.iter().all(|v| *v >= zero));
        prop_assert_eq!(r[0].clone() + r[1].clone() + r[2].clone(), Rational::from_ratio(1, 1));
    }

    #[test]
    fn absorption_is_equivariant(params in exact_p(), x in nonempty_word(6), tau in perm()) {
        let levels = Levels::<Rational>::new(&params).unwrap();
        let r = levels.rho(&x).unwrap();
        let rt = levels.rho(&x.permute(tau)).unwrap();
        for i in 1..=3u8 {
            prop_assert_eq!(&rt[tau.apply(i) as usize - 1], &r[i as usize - 1]);
        }
    }

    #[test]
    fn class_representative_is_canonical(x in boundary_word()) {
        let pt = BoundaryPoint::new(&x);
        prop_assert!(pt.contains(&x));
        prop_assert_eq!(&BoundaryPoint::new(pt.representative()), &pt);
        prop_assert_eq!(pt.class_size(), 1 + usize::from(pi_partner(&x).is_some()));
        let back: BoundaryWord = x.to_string().parse().unwrap();
        prop_assert_eq!(back, x);
    }

    #[test]
    fn sparse_solves_are_exact(
        entries in prop::collection::vec((0usize..6, 0usize..6, 1i64..5), 0..20),
        rhs in prop::collection::vec(-5i64..5, 6),
    ) {
        // Strict diagonal dominance with non-positive off-diagonals.
        let mut m = SparseMatrix::<Rational>::new(6);
        let mut weight = [1i64; 6];
        for &(r, c, v) in &entries {
            if r != c {
                m.add(r, c, Rational::from_ratio(-v, 1)).unwrap();
                weight[r] += v;
            }
        }
        for (r, w) in weight.iter().enumerate() {
            m.add(r, r, Rational::from_ratio(*w, 1)).unwrap();
        }
        let b: Vec<Rational> = rhs.iter().map(|&v| Rational::from_ratio(v, 1)).collect();
        let x = SparseLu::factor(m.clone()).unwrap().solve(&b);
        prop_assert_eq!(m.mul_vec(&x), b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hitting_is_a_probability(p in float_p(), x in word(3), y in word(4)) {
        let pot = Potential::<f64>::new(&ChainParams::float(p).unwrap()).unwrap();
        let rho = pot.hitting_probability(&x, &y).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&rho));
        let k = pot.martin_kernel(&x, &y).unwrap();
        prop_assert!(k <= pot.kernel_bound(&x).unwrap() * (1.0 + 1e-9));
    }

    #[test]
    fn kernel_respects_classes(p in float_p(), z in word(4), omega in word(2), k in 1u8..=3, shift in 1u8..=2) {
        let l = (k + shift - 1) % 3 + 1;
        let pot = Potential::<f64>::new(&ChainParams::float(p).unwrap()).unwrap();
        let a = BoundaryWord::eventually_constant(&omega.with(l), k);
        let b = BoundaryWord::eventually_constant(&omega.with(k), l);
        let ka = pot.kernel_at_boundary(&z, &a, 1e-11).unwrap().value;
        let kb = pot.kernel_at_boundary(&z, &b, 1e-11).unwrap().value;
        prop_assert!((ka - kb).abs() < 1e-9, "{} {} {}: {} vs {}", z, a, b, ka, kb);
        prop_assert!(ka <= pot.kernel_bound(&z).unwrap() * (1.0 + 1e-9));
    }

    #[test]
    fn harmonic_functions_are_symmetric(p in float_p(), x in word(5), tau in perm(), i in 1u8..=3) {
        let tol = 1e-10;
        let pot = Potential::<f64>::new(&ChainParams::float(p).unwrap()).unwrap();
        let h = harmonic_h(&pot, i, &x, tol).unwrap();
        let ht = harmonic_h(&pot, tau.apply(i), &x.permute(tau), tol).unwrap();
        prop_assert!((h - ht).abs() <= 2.0 * tol);
        let sum: f64 = (1..=3u8).map(|j| harmonic_h(&pot, j, &x, tol).unwrap()).sum();
        prop_assert!((sum - 3.0).abs() <= 3.0 * tol);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn metric_is_symmetric_and_triangular(
        a in boundary_word(), b in boundary_word(), c in word(3),
    ) {
        let pot = Potential::<f64>::new(&ChainParams::float(1.0 / 3.0).unwrap()).unwrap();
        let metric = MartinMetric::new(&pot, MetricParams::new(0.5, 4, 1e-10).unwrap()).unwrap();
        let pa = metric.profile(&AnyWord::Boundary(a)).unwrap();
        let pb = metric.profile(&AnyWord::Boundary(b)).unwrap();
        let pc = metric.profile(&AnyWord::Finite(c)).unwrap();
        let ab = metric.distance(&pa, &pb);
        prop_assert_eq!(ab.value, metric.distance(&pb, &pa).value);
        prop_assert_eq!(metric.distance(&pc, &pc).value, 0.0);
        let ac = metric.distance(&pa, &pc);
        let cb = metric.distance(&pc, &pb);
        let slack = ab.error_bound + ac.error_bound + cb.error_bound;
        prop_assert!(ab.value <= ac.value + cb.value + slack);
    }

    #[test]
    fn enclosures_hold_exact_products(
        a in (1i64..50, 1i64..50), b in (1i64..50, 1i64..50), c in (-20i64..20, 1i64..20),
    ) {
        use martin_gasket::interval::Interval;
        let r = |(n, d): (i64, i64)| Rational::from_ratio(n, d);
        let exact = (r(a) * r(b) - r(c)) / (r(a) + r(b));
        let iv = |x: (i64, i64)| Interval::from_rational(&r(x));
        let enclosed = (iv(a) * iv(b) - iv(c)) / (iv(a) + iv(b));
        prop_assert!(enclosed.contains(&exact));
    }
}
