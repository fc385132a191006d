use num_bigint::BigInt;
use num_traits::One;
use quinque_core::equation::{
    doubling_defects, random_pairs, residual_scan, symmetry_checks, MappingOracle, Polynomial,
};
use quinque_core::numeric::{Mode, Precision, Scalar};
use serde_json::json;

use super::setup;
use crate::args::VerifyArgs;
use crate::grammar::{parse_function, residual_pattern};
use crate::report::{scalar, Report};
use crate::Error;

const SHOWN_SAMPLES: usize = 5;

/// `-n! sum_{d<n} c_d v^d`, the residual predicted for a polynomial of degree `<= n`.
fn predicted(poly: &Polynomial, degree: u32, factorial: &BigInt, v: &Scalar) -> Scalar {
    let sum = poly
        .terms()
        .iter()
        .filter(|(d, _)| **d < degree)
        .fold(v.zero_like(), |acc, (d, c)| &acc + &(&v.lift(c) * &v.powi(*d)));
    -&(&v.lift_int(factorial) * &sum)
}

fn slack(reference: &Scalar, precision: Precision) -> Scalar {
    let one = reference.lift(&num_rational::BigRational::one());
    reference
        .abs()
        .max(one)
        .mul_pow2(-(precision.bits() as i64) / 2)
        .expect("tolerance in range")
}

pub fn run(args: &VerifyArgs, report: &mut Report) -> Result<(), Error> {
    let (family, precision) = setup(&args.common)?;
    if args.samples == 0 {
        return Err(Error::usage("--samples must be at least 1"));
    }
    let n = family.degree();
    let f = parse_function(&args.function, n)?;
    let mode = args.mode.mode();
    let pairs = random_pairs(args.common.seed, args.samples, mode, precision);
    let scan = residual_scan(&family, &f, &pairs)?;
    let shown: Vec<_> = scan
        .samples
        .iter()
        .take(SHOWN_SAMPLES)
        .map(|s| json!({ "u": scalar(&s.u), "v": scalar(&s.v), "residual": scalar(&s.value) }))
        .collect();

    let pattern = residual_pattern(&f, n);
    let mut kernel = false;
    match &pattern {
        Some(pattern) => {
            let mut mismatches = 0usize;
            for s in &scan.samples {
                let want = predicted(&f, n, family.rhs_factor(), &s.v);
                let ok = match mode {
                    Mode::Exact => s.value == want,
                    Mode::BigReal => {
                        let magnitude = s
                            .condition
                            .as_ref()
                            .map(|c| c * &s.value.abs())
                            .unwrap_or_else(|| s.value.zero_like());
                        (&s.value - &want).abs() <= slack(&(&magnitude + &want.abs()), precision)
                    }
                };
                if !ok {
                    mismatches += 1;
                }
            }
            kernel = mismatches == 0 && pattern == "0";
            report.check(
                "residual law",
                mismatches == 0,
                json!({
                    "mode": mode.name(),
                    "seed": args.common.seed,
                    "samples": scan.samples.len(),
                    "pattern": pattern,
                    "mismatches": mismatches,
                    "max_abs_residual": scalar(&scan.max_abs_residual),
                    "exact_zero": scan.all_zero(),
                    "first_samples": shown,
                }),
            );
        }
        None => report.finding(
            "residual scan",
            json!({
                "mode": mode.name(),
                "seed": args.common.seed,
                "samples": scan.samples.len(),
                "note": format!("terms above degree {n} have no closed-form residual"),
                "max_abs_residual": scalar(&scan.max_abs_residual),
                "exact_zero": scan.all_zero(),
                "first_samples": shown,
            }),
        ),
    }

    let points: Vec<Scalar> = pairs.iter().map(|(u, _)| u.clone()).collect();
    let sym = symmetry_checks(&f, &points);
    let sym_details = json!({
        "f_at_zero": scalar(&sym.f_at_zero),
        "zero_ok": sym.zero_ok,
        "checked": sym.checked,
        "oddness_violations": sym.oddness_violations.len(),
        "first_violation": sym.oddness_violations.first().map(|v| json!({
            "x": scalar(&v.x), "f_x": scalar(&v.f_x), "f_neg_x": scalar(&v.f_neg_x),
        })),
    });
    let defects = doubling_defects(&family, &f, &points);
    let doubling_ok = defects.iter().zip(&points).all(|(d, u)| match mode {
        Mode::Exact => d.is_zero(),
        Mode::BigReal => d.abs() <= slack(&f.eval(u).mul_pow2(i64::from(n)).expect("in range"), precision),
    });
    let max_defect = defects
        .iter()
        .map(Scalar::abs)
        .reduce(Scalar::max)
        .expect("samples nonempty");
    let doubling_details = json!({
        "checked": defects.len(),
        "max_abs_defect": scalar(&max_defect),
    });
    if kernel {
        report.check("symmetry", sym.passed(), sym_details);
        report.check("doubling law", doubling_ok, doubling_details);
    } else {
        report.finding("symmetry", sym_details);
        report.finding("doubling law", doubling_details);
    }
    Ok(())
}
