use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use quinque_core::equation::{eval_h, MappingOracle};
use quinque_core::fuzzy::{
    check_control_scaling, check_fuzzy_bound, fuzzy_axiom_check, fuzzy_minlift_check, FuzzyConfig, FuzzyControl,
    FuzzyGrid, FuzzyNorm, GammaSpec, GridCheck, StandardFuzzyNorm,
};
use quinque_core::matrix::{MatrixOfPoints, MAX_DIMENSION};
use quinque_core::numeric::{Prime, RationalSampler, Scalar};
use quinque_core::stability::{IteratedMapping, Q};
use serde_json::json;

use super::setup;
use crate::args::FuzzyArgs;
use crate::grammar::{parse_function, parse_fuzzy_control, parse_number};
use crate::report::{grid, int, rational, Report};
use crate::Error;

const DEFECT_POINTS: usize = 8;

/// `v_p(n!)` by Legendre's formula.
fn legendre(n: u32, p: u64) -> i64 {
    let (n, mut pk, mut total) = (u64::from(n), p, 0u64);
    while pk <= n {
        total += n / pk;
        pk = match pk.checked_mul(p) {
            Some(next) => next,
            None => break,
        };
    }
    total as i64
}

fn int_valuation(x: &BigInt, p: u64) -> i64 {
    let p = BigInt::from(p);
    let mut x = x.clone();
    let mut v = 0;
    while !x.is_zero() && (&x % &p).is_zero() {
        x /= &p;
        v += 1;
    }
    v
}

fn pow_p(p: u64, e: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(p)).pow(e as i32)
}

fn merge(name: &str, checks: impl IntoIterator<Item = GridCheck>) -> (usize, usize, Option<serde_json::Value>) {
    let mut checked = 0;
    let mut failures = 0;
    let mut example = None;
    for c in checks {
        checked += c.checked;
        failures += c.failures.len();
        if example.is_none() && !c.passed() {
            example = Some(json!({ "check": name, "detail": grid(&c) }));
        }
    }
    (checked, failures, example)
}

pub fn run(args: &FuzzyArgs, report: &mut Report) -> Result<(), Error> {
    let (family, _) = setup(&args.common)?;
    let p = Prime::new(args.p)?;
    let q = Q::from_i64(args.q)?;
    if args.n == 0 || args.n > MAX_DIMENSION {
        return Err(Error::usage(format!("--n must lie in 1..={MAX_DIMENSION}")));
    }
    if args.grid < 2 || args.iters == 0 || args.matrices == 0 {
        return Err(Error::usage(
            "--grid must be at least 2; --iters and --matrices at least 1",
        ));
    }
    let f = parse_function(&args.function, family.degree())?;
    let sigma = parse_fuzzy_control(&args.control)?;
    let kappa = match &args.kappa {
        Some(k) => parse_number(k)?,
        None => match &sigma {
            FuzzyControl::PAdicPower { m, .. } => BigRational::new(BigInt::one(), BigInt::from(2u32).pow(*m)),
            _ => BigRational::one(),
        },
    };
    let grid_points = FuzzyGrid::random(args.common.seed, args.grid, p);
    let config = FuzzyConfig {
        p,
        kappa: kappa.clone(),
        q,
        iterations: args.iters,
        ts: grid_points.ts.clone(),
        n: args.n,
    };
    config.validate(&family)?;
    let norm = StandardFuzzyNorm::padic(p);
    let control_norm = StandardFuzzyNorm::real();

    for check in fuzzy_axiom_check(&norm, &grid_points) {
        report.grid_check(&format!("fuzzy axiom: {}", check.name), &check);
    }

    let spec = GammaSpec::new(&family);
    let nu_fact = legendre(family.degree(), p.get());
    let mut mismatches = 0usize;
    let mut all_t = true;
    for t in &grid_points.ts {
        for (entry, arg) in spec.entries.iter().zip(spec.time_arguments(p, t)) {
            let want = t * pow_p(p.get(), int_valuation(&entry.divisor, p.get()) - nu_fact);
            if arg != want {
                mismatches += 1;
            }
            all_t &= arg == *t;
        }
    }
    let divisors: Vec<_> = spec
        .divisibility(p)
        .into_iter()
        .map(|(d, divisible)| json!({ "divisor": int(&d), "divisible_by_p": divisible }))
        .collect();
    report.check(
        "gamma time arguments",
        mismatches == 0,
        json!({
            "p": p.get(),
            "valuation_of_factorial": nu_fact,
            "abs_factorial": rational(&pow_p(p.get(), -nu_fact)),
            "collapse_to_t": all_t,
            "t_values": grid_points.ts.len(),
            "mismatches": mismatches,
            "divisors": divisors,
        }),
    );

    let scaling = check_control_scaling(&sigma, &control_norm, &kappa, q, &grid_points.xs, &grid_points.ts)?;
    report.grid_check("control scaling", &scaling);

    let pts: Vec<&BigRational> = grid_points.xs.iter().take(DEFECT_POINTS).collect();
    let mut failures = 0usize;
    let mut checked = 0usize;
    for c in &pts {
        for d in &pts {
            let h = eval_h(&family, &f, &Scalar::Exact((*c).clone()), &Scalar::Exact((*d).clone()))?.to_rational();
            let s = sigma.eval(c, d);
            for t in &grid_points.ts {
                checked += 1;
                if norm.membership(&h, t) < control_norm.membership(&s, t) {
                    failures += 1;
                }
            }
        }
    }
    report.check(
        "defect hypothesis",
        failures == 0,
        json!({ "control": sigma.describe(), "checked": checked, "failures": failures }),
    );

    let mut sampler = RationalSampler::new(args.common.seed ^ 0x5eed);
    let random =
        |sampler: &mut RationalSampler| MatrixOfPoints::from_fn(args.n, |_, _| Scalar::Exact(sampler.rational()));
    let x = random(&mut sampler)?;
    let limit = IteratedMapping::new(&family, &f, q, args.iters);
    let bound = check_fuzzy_bound(&family, &f, &limit, &sigma, &norm, &control_norm, &config, &x)?;
    let lhs_is_one = bound.min_lhs == BigRational::one();
    let mut scalar_details = grid(&bound.scalar);
    scalar_details["min_lhs"] = rational(&bound.min_lhs);
    scalar_details["lhs_identically_one"] = json!(lhs_is_one);
    scalar_details["limit"] = json!(limit.describe());
    report.check("fuzzy bound (scalar)", bound.scalar.passed(), scalar_details);
    let mut matrix_details = grid(&bound.matrix);
    matrix_details["n"] = json!(args.n);
    report.check("fuzzy bound (matrix)", bound.matrix.passed(), matrix_details);

    let mut lifts = Vec::new();
    let mut singles = Vec::new();
    for _ in 0..args.matrices {
        let m = random(&mut sampler)?;
        let mut checks = fuzzy_minlift_check(&norm, &m, &grid_points.ts)?.into_iter();
        lifts.push(checks.next().expect("min-lift check"));
        singles.push(checks.next().expect("single entry check"));
    }
    for (name, checks) in [("min-lift", lifts), ("single entry", singles)] {
        let (checked, failures, example) = merge(name, checks);
        report.check(
            name,
            failures == 0,
            json!({ "n": args.n, "matrices": args.matrices, "checked": checked, "failures": failures, "example": example }),
        );
    }
    Ok(())
}
