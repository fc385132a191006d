use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;

use quinque_core::equation::{eval_h, EquationFamily, MappingOracle, Polynomial};
use quinque_core::fuzzy::{gamma, FuzzyControl, FuzzyNorm, GammaSpec, StandardFuzzyNorm};
use quinque_core::identity::{auto_eliminate, default_instances, expand_instance, InstanceSpec};
use quinque_core::matrix::{lift_h, matrix_bound_check, MatrixNorm, MatrixOfPoints};
use quinque_core::numeric::{factorial, Precision, Prime, Scalar};
use quinque_core::stability::{
    apply_p, bound_factor, fixed_point_iterate, omega0_power, sigma_star, ControlFunction, Tolerance, Q,
};

fn rational() -> impl Strategy<Value = BigRational> {
    (-60i64..=60, 1i64..=40).prop_map(|(n, d)| BigRational::new(n.into(), d.into()))
}

fn nonzero_rational() -> impl Strategy<Value = BigRational> {
    rational().prop_filter("nonzero", |x| !x.is_zero())
}

fn odd_degree() -> impl Strategy<Value = u32> {
    prop::sample::select(vec![1u32, 3, 5, 7, 9, 25])
}

fn q_sign() -> impl Strategy<Value = Q> {
    prop::sample::select(vec![Q::Plus, Q::Minus])
}

fn r(n: i64) -> BigRational {
    BigRational::from_integer(n.into())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kernel_contains_scaled_monomial(n in odd_degree(), a in rational(), u in rational(), v in rational()) {
        let fam = EquationFamily::new(n).unwrap();
        let f = Polynomial::monomial(a, n);
        let h = eval_h(&fam, &f, &Scalar::Exact(u), &Scalar::Exact(v)).unwrap();
        prop_assert!(h.is_zero());
    }

    #[test]
    fn lower_powers_leave_factorial_residual(n in odd_degree(), d_frac in 0.0f64..1.0, u in rational(), v in rational()) {
        let fam = EquationFamily::new(n).unwrap();
        let d = ((d_frac * n as f64) as u32).min(n - 1);
        let h = eval_h(&fam, &Polynomial::power(d), &Scalar::Exact(u), &Scalar::Exact(v.clone())).unwrap();
        let want = -BigRational::from_integer(factorial(n)) * v.pow(d as i32);
        prop_assert_eq!(h, Scalar::Exact(want));
    }

    #[test]
    fn elimination_ratio_ignores_instance_order(n in prop::sample::select(vec![3u32, 5, 7, 9]), seed in any::<u64>()) {
        let fam = EquationFamily::new(n).unwrap();
        let mut instances = default_instances(&fam);
        let len = instances.len();
        let mut state = seed;
        for i in (1..len).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            instances.swap(i, (state >> 33) as usize % (i + 1));
        }
        let cert = auto_eliminate(&fam, &instances).unwrap();
        prop_assert!(cert.verify(&fam));
        prop_assert_eq!(cert.ratio, Some(BigRational::from_integer(BigInt::from(2u32).pow(n))));
    }

    #[test]
    fn instances_are_odd_under_negation(a in -14i64..=14, b in -3i64..=3) {
        let fam = EquationFamily::default();
        let plus = expand_instance(&fam, InstanceSpec::new(a, b));
        let minus = expand_instance(&fam, InstanceSpec::new(-a, -b));
        let summed = plus.coeffs().keys().chain(minus.coeffs().keys()).all(|j| plus.get(*j) + minus.get(*j) == BigInt::zero());
        prop_assert!(summed);
    }

    #[test]
    fn monomial_is_fixed_by_p(a in rational(), c in rational(), q in q_sign()) {
        let fam = EquationFamily::default();
        let f = Polynomial::monomial(a.clone(), 25);
        let x = Scalar::Exact(c);
        prop_assert_eq!(apply_p(&fam, &f, q, &x).unwrap(), f.eval(&x));
    }

    #[test]
    fn iterates_contract_geometrically(l in 0u32..=40, eps in nonzero_rational(), c in nonzero_rational()) {
        prop_assume!(l != 25);
        let fam = EquationFamily::default();
        let q = if l < 25 { Q::Plus } else { Q::Minus };
        let f = Polynomial::power(25).plus_term(eps, l);
        let x = Scalar::Exact(c);
        let v = fixed_point_iterate(&fam, &f, q, 6, &x).unwrap();
        let chain: Vec<Scalar> = std::iter::once(f.eval(&x)).chain(v).collect();
        let kappa = BigRational::from_integer(BigInt::from(2u32).pow((25i64 - l as i64).unsigned_abs() as u32)).recip();
        for w in chain.windows(3) {
            let prev = (&w[1] - &w[0]).to_rational();
            let next = (&w[2] - &w[1]).to_rational();
            prop_assume!(!prev.is_zero());
            prop_assert_eq!(next / prev, kappa.clone());
        }
    }

    #[test]
    fn bound_factor_grows_with_kappa(a in 1i64..1000, b in 1i64..1000, q in q_sign()) {
        prop_assume!(a != b);
        let fam = EquationFamily::default();
        let (lo, hi) = (a.min(b), a.max(b));
        let k1 = Scalar::rational(lo, 1001);
        let k2 = Scalar::rational(hi, 1001);
        prop_assert!(bound_factor(&fam, &k1, q).unwrap() < bound_factor(&fam, &k2, q).unwrap());
    }

    #[test]
    fn power_constants_match_sigma_star(l in 0i64..=40, omega in nonzero_rational(), c in rational()) {
        prop_assume!(l != 25);
        let fam = EquationFamily::default();
        let omega = omega.abs();
        let p = Precision::DEFAULT;
        let bundle = omega0_power(&fam, &r(l), p).unwrap();
        let control = ControlFunction::power_sum(omega.clone(), r(l)).unwrap();
        let x = Scalar::Exact(c);
        let want = &bundle.omega0(&fam, &omega) * &x.abs().powi(l as u32);
        prop_assert_eq!(sigma_star(&fam, &control, &x, p), want);
    }

    #[test]
    fn lifted_operator_kills_monomial_matrices(
        n in 1usize..=4,
        a in rational(),
        xs in prop::collection::vec(rational(), 16),
        ys in prop::collection::vec(rational(), 16),
    ) {
        let fam = EquationFamily::default();
        let f = Polynomial::monomial(a, 25);
        let x = MatrixOfPoints::from_fn(n, |r, s| Scalar::Exact(xs[r * 4 + s].clone())).unwrap();
        let y = MatrixOfPoints::from_fn(n, |r, s| Scalar::Exact(ys[r * 4 + s].clone())).unwrap();
        prop_assert!(lift_h(&fam, &f, &x, &y).unwrap().is_zero());
    }

    #[test]
    fn one_by_one_matrix_bound_is_the_scalar_bound(c in rational(), norm in prop::sample::select(MatrixNorm::ALL.to_vec())) {
        let fam = EquationFamily::default();
        let p = Precision::DEFAULT;
        let f = Polynomial::power(25).plus_term(r(1), 2);
        let v = Polynomial::power(25);
        let control = ControlFunction::power_sum(BigRational::from_integer(factorial(25)), r(2)).unwrap();
        let kappa = Scalar::rational(1, 1 << 23);
        let x = Scalar::Exact(c);
        let m = MatrixOfPoints::new(1, vec![x.clone()]).unwrap();
        let rep = matrix_bound_check(&fam, &f, &v, &control, Q::Plus, &kappa, norm, &m, &Tolerance::exact(), p).unwrap();
        let scalar = &bound_factor(&fam, &kappa, Q::Plus).unwrap() * &sigma_star(&fam, &control, &x, p);
        prop_assert_eq!(&rep.rhs, &scalar);
        prop_assert_eq!(rep.lhs, (&f.eval(&x) - &v.eval(&x)).abs());
        prop_assert!(rep.passed);
    }

    #[test]
    fn fuzzy_membership_is_graded(x in rational(), t1 in 1i64..500, t2 in 1i64..500, p in prop::sample::select(vec![2u64, 3, 29])) {
        let norm = StandardFuzzyNorm::padic(Prime::new(p).unwrap());
        let (lo, hi) = (r(t1.min(t2)), r(t1.max(t2)));
        let a = norm.membership(&x, &lo);
        let b = norm.membership(&x, &hi);
        prop_assert!(a.is_positive() && a <= BigRational::one());
        prop_assert!(a <= b);
    }

    #[test]
    fn gamma_is_monotone_and_trivial_for_zero(x in rational(), t1 in 1i64..500, t2 in 1i64..500, theta in nonzero_rational(), p in prop::sample::select(vec![2u64, 29])) {
        let fam = EquationFamily::default();
        let prime = Prime::new(p).unwrap();
        let spec = GammaSpec::new(&fam);
        let norm = StandardFuzzyNorm::padic(prime);
        let sigma = FuzzyControl::PAdicPower { theta: theta.abs(), m: 1, p: prime };
        let (lo, hi) = (r(t1.min(t2)), r(t1.max(t2)));
        prop_assert!(gamma(&spec, &norm, &sigma, &x, &lo, prime).unwrap() <= gamma(&spec, &norm, &sigma, &x, &hi, prime).unwrap());
        prop_assert_eq!(gamma(&spec, &norm, &FuzzyControl::Zero, &x, &lo, prime).unwrap(), BigRational::one());
    }
}
