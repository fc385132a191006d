use num_rational::BigRational;
use num_traits::Zero;
use quinque_core::equation::EquationFamily;
use quinque_core::identity::{Erratum, ErratumKind};
use quinque_core::matrix::{matrix_bound_check, norm_axiom_check, MatrixNorm, MatrixOfPoints};
use quinque_core::numeric::{Mode, Precision, RationalSampler, Scalar};
use quinque_core::stability::{
    certify_stability, check_doubling_defect, contraction_check, fit_omega, omega0_mixed, omega0_power, omega0_product,
    ConstantsBundle, ControlKind, ExponentialSum, IteratedMapping, StabilityConfig, Tolerance, Q,
};
use serde_json::{json, Map, Value};

use super::setup;
use crate::args::{StabilityArgs, Which};
use crate::grammar::{parse_control, parse_function, parse_number, parse_range};
use crate::report::{int, opt_scalar, rational, scalar, Report};
use crate::Error;

fn bracket(sum: &ExponentialSum) -> Value {
    let mut map = Map::new();
    for ((a, b), c) in sum.terms() {
        map.insert(format!("{a}^A*{b}^B"), int(c));
    }
    Value::Object(map)
}

fn constants_bundle(
    family: &EquationFamily,
    kind: ControlKind,
    exponents: &(BigRational, BigRational),
    precision: Precision,
) -> Result<ConstantsBundle, Error> {
    let (a, b) = exponents;
    Ok(match kind {
        ControlKind::Power => omega0_power(family, a, precision)?,
        ControlKind::Product => omega0_product(family, a, b, precision)?,
        ControlKind::Mixed => omega0_mixed(family, a, b, precision)?,
    })
}

fn report_constants(bundle: &ConstantsBundle, report: &mut Report) {
    let differences: Vec<Value> = bundle
        .differences
        .iter()
        .map(|((a, b), p, r)| json!({ "term": format!("{a}^A*{b}^B"), "printed": int(p), "recomputed": int(r) }))
        .collect();
    report.finding(
        "omega0 constants",
        json!({
            "kind": bundle.kind.name(),
            "exponents": [rational(&bundle.exponents.0), rational(&bundle.exponents.1)],
            "l": rational(&bundle.l),
            "q": bundle.q.sign(),
            "kappa": scalar(&bundle.kappa),
            "printed_bracket": bracket(&bundle.printed),
            "recomputed_bracket": bracket(&bundle.recomputed),
            "printed_value": scalar(&bundle.printed_value),
            "recomputed_value": scalar(&bundle.recomputed_value),
            "printed_constant": int(&bundle.printed_constant),
            "recomputed_constant": int(&bundle.recomputed_constant),
            "differences": differences,
            "discrepancy": bundle.discrepancy,
            "authoritative": "recomputed",
        }),
    );
    if bundle.printed_constant != bundle.recomputed_constant {
        report.erratum(&Erratum {
            label: format!("omega0 constant term ({})", bundle.kind.name()),
            index: None,
            kind: ErratumKind::Constant,
            printed: Some(bundle.printed_constant.to_string()),
            computed: Some(bundle.recomputed_constant.to_string()),
            relative_error: None,
        });
    }
    for ((a, b), p, r) in &bundle.differences {
        if (*a, *b) == (1, 1) {
            continue;
        }
        report.erratum(&Erratum {
            label: format!("omega0 {} bracket term {a}^A*{b}^B", bundle.kind.name()),
            index: None,
            kind: ErratumKind::Constant,
            printed: Some(p.to_string()),
            computed: Some(r.to_string()),
            relative_error: None,
        });
    }
}

fn constants_only(
    args: &StabilityArgs,
    family: &EquationFamily,
    precision: Precision,
    report: &mut Report,
) -> Result<(), Error> {
    let (kind, exponents) = match args.which {
        Which::Power => (ControlKind::Power, (parse_number(&args.l)?, BigRational::zero())),
        Which::Product => (ControlKind::Product, (parse_number(&args.a)?, parse_number(&args.b)?)),
        Which::Mixed => (ControlKind::Mixed, (parse_number(&args.a)?, parse_number(&args.b)?)),
    };
    if family.degree() != 25 {
        return Err(Error::usage("printed constants exist for degree 25 only"));
    }
    let bundle = constants_bundle(family, kind, &exponents, precision)?;
    report_constants(&bundle, report);
    Ok(())
}

pub fn run(args: &StabilityArgs, report: &mut Report) -> Result<(), Error> {
    let (family, precision) = setup(&args.common)?;
    let q = Q::from_i64(args.q)?;
    if args.constants_only {
        return constants_only(args, &family, precision, report);
    }
    if args.samples == 0 || args.iters == 0 {
        return Err(Error::usage("--samples and --iters must be at least 1"));
    }
    if args.matrix_n > quinque_core::matrix::MAX_DIMENSION {
        return Err(Error::usage(format!(
            "--matrix-n must be at most {}",
            quinque_core::matrix::MAX_DIMENSION
        )));
    }
    let control = parse_control(&args.control)?;
    let f = parse_function(&args.function, family.degree())?;
    let (lo, hi) = parse_range(&args.range)?;
    let mode = args.mode.mode();
    let lift = |x: BigRational| Scalar::Exact(x).in_mode(mode, precision);
    let mut sampler = RationalSampler::new(args.common.seed);
    let samples: Vec<Scalar> = (0..args.samples).map(|_| lift(sampler.rational_in(lo, hi))).collect();
    let kappa = args.kappa.as_deref().map(parse_number).transpose()?.map(&lift);

    let mut config = StabilityConfig::new(q, args.iters, samples.clone());
    config.precision = precision;
    config.kappa = kappa;
    config.seed = Some(args.common.seed);
    config.tolerance = Tolerance::for_precision(precision);
    let resolved_kappa = config.resolve_kappa(&family, &control.shape)?;

    let mut points = samples.clone();
    points.push(lift(BigRational::zero()));
    let fit = match fit_omega(&family, &f, &control.shape, &points, precision) {
        Ok(fit) => fit,
        Err(quinque_core::Error::Precondition(msg)) => {
            report.check(
                "control dominance",
                false,
                json!({ "control": control.shape.describe(), "error": msg }),
            );
            return Ok(());
        }
        Err(e) => return Err(e.into()),
    };
    let fitted = fit.omega.to_rational();
    let omega = control.omega.clone().unwrap_or_else(|| fitted.clone());
    let dominated = match mode {
        Mode::Exact => omega >= fitted,
        Mode::BigReal => config
            .tolerance
            .admits(&fit.omega, &Scalar::Exact(omega.clone()).in_mode(mode, precision)),
    };
    let sigma = control.shape.with_omega(omega.clone())?;
    report.check(
        "control dominance",
        dominated,
        json!({
            "control": sigma.describe(),
            "omega": rational(&omega),
            "omega_source": if control.omega.is_some() { "given" } else { "fitted" },
            "fitted_omega": scalar(&fit.omega),
            "pairs_checked": fit.pairs_checked,
            "witness": fit.witness.as_ref().map(|(c, d)| json!([scalar(c), scalar(d)])),
        }),
    );

    let rows = check_doubling_defect(&family, &f, &sigma, &samples, &config.tolerance, precision)?;
    let failures: Vec<Value> = rows
        .iter()
        .filter(|r| !r.passed)
        .take(3)
        .map(|r| json!({ "c": scalar(&r.c), "defect": scalar(&r.defect), "sigma_star": scalar(&r.sigma_star) }))
        .collect();
    report.check(
        "doubling defect",
        rows.iter().all(|r| r.passed),
        json!({ "checked": rows.len(), "failed": rows.iter().filter(|r| !r.passed).count(), "examples": failures }),
    );

    let cert = certify_stability(&family, &f, &sigma, &config)?;
    let per_sample: Vec<Value> = cert
        .samples
        .iter()
        .map(|s| {
            json!({
                "c": scalar(&s.c),
                "sigma_star": scalar(&s.sigma_star),
                "v_k": scalar(s.final_value()),
                "observed": scalar(&s.observed),
                "bound": scalar(&s.bound),
                "max_ratio": opt_scalar(s.ratios.iter().cloned().reduce(Scalar::max).as_ref()),
                "doubling_gap": scalar(&s.doubling_gap),
                "ratio_ok": s.ratio_ok,
                "bound_ok": s.bound_ok,
                "doubling_ok": s.doubling_ok,
            })
        })
        .collect();
    report.check(
        "stability certificate",
        cert.passed(),
        json!({
            "q": cert.q.sign(),
            "kappa": scalar(&cert.kappa),
            "iterations": cert.iterations,
            "precision": cert.precision.bits(),
            "seed": cert.seed,
            "mode": mode.name(),
            "tolerance": { "value": rational(&config.tolerance.value), "relative": config.tolerance.relative },
            "bound_factor": scalar(&cert.bound_factor),
            "max_ratio": opt_scalar(cert.max_ratio.as_ref()),
            "max_violation": scalar(&cert.max_violation),
            "loose": cert.loose,
            "samples": per_sample,
        }),
    );

    let limit = IteratedMapping::new(&family, &f, q, args.iters);
    let contraction = contraction_check(
        &family,
        &f,
        &limit,
        &sigma,
        q,
        &resolved_kappa,
        &samples,
        &config.tolerance,
        precision,
    )?;
    report.check(
        "contraction",
        contraction.passed(),
        json!({
            "g": format!("V_{}", args.iters),
            "nu": opt_scalar(contraction.nu.as_ref()),
            "non_dominated": contraction.non_dominated.iter().map(scalar).collect::<Vec<_>>(),
            "checked": contraction.rows.len(),
            "failed": contraction.rows.iter().filter(|r| !r.passed).count(),
        }),
    );

    if family.degree() == 25 {
        let bundle = constants_bundle(&family, control.kind, &control.exponents, precision)?;
        report_constants(&bundle, report);
    }

    if args.matrix_n > 0 {
        let n = args.matrix_n;
        let random =
            |sampler: &mut RationalSampler| MatrixOfPoints::from_fn(n, |_, _| lift(sampler.rational_in(lo, hi)));
        let x = random(&mut sampler)?;
        for norm in MatrixNorm::ALL {
            let rep = matrix_bound_check(
                &family,
                &f,
                &limit,
                &sigma,
                q,
                &resolved_kappa,
                norm,
                &x,
                &config.tolerance,
                precision,
            )?;
            report.check(
                &format!("matrix bound ({})", norm.name()),
                rep.passed,
                json!({ "n": n, "lhs": scalar(&rep.lhs), "rhs": scalar(&rep.rhs) }),
            );
        }
        let matrices = (0..args.matrices)
            .map(|_| random(&mut sampler))
            .collect::<Result<Vec<_>, _>>()?;
        for norm in MatrixNorm::ALL {
            let rep = norm_axiom_check(norm, &matrices)?;
            report.check(
                &format!("matrix norm axioms ({})", norm.name()),
                rep.passed(),
                json!({
                    "n": n,
                    "matrices": rep.matrices_checked,
                    "single_entry_failures": rep.single_entry_failures.len(),
                    "sum_bound_failures": rep.sum_bound_failures.len(),
                }),
            );
        }
    }
    Ok(())
}
