use std::collections::BTreeMap;

use quinque_core::equation::EquationFamily;
use quinque_core::identity::{
    auto_eliminate, default_instances, diff_against_printed, multiplier_errata, multiplier_pattern_check,
    oddness_derivation_check, script_instances, scripted_cascade, zero_derivation_check, CascadeFixture, CascadeScript,
    RawIdentity,
};
use quinque_core::numeric::rational_to_string;
use serde_json::{json, Map, Value};

use super::setup;
use crate::args::{InstanceSet, ReplayArgs, ReplayMode};
use crate::report::{identity, int, Report};
use crate::Error;

fn raw(x: &RawIdentity) -> Value {
    let mut map = Map::new();
    for (j, c) in x.coeffs() {
        map.insert(j.to_string(), int(c));
    }
    Value::Object(map)
}

fn auto(family: &EquationFamily, args: &ReplayArgs, report: &mut Report) -> Result<(), Error> {
    let zero = zero_derivation_check(family);
    report.check(
        "zero derivation",
        zero.forces_zero && zero.normalized.is_empty(),
        json!({ "instance": "(0,0)", "raw": raw(&zero.raw), "normalized": identity(&zero.normalized) }),
    );
    let odd = oddness_derivation_check(family);
    report.check(
        "oddness derivation",
        odd.passed,
        json!({ "instances": ["(0,1)", "(1,-1)"], "sum": raw(&odd.sum), "expected": raw(&odd.expected) }),
    );

    let instances = match args.instances {
        InstanceSet::Default => default_instances(family),
        InstanceSet::Script => script_instances(family),
    };
    let names: Vec<String> = instances.iter().map(ToString::to_string).collect();
    match auto_eliminate(family, &instances) {
        Ok(cert) => {
            let verified = cert.verify(family);
            let doubling = cert.is_doubling_law(family);
            report.check(
                "elimination certificate",
                verified && doubling,
                json!({
                    "instances": names,
                    "weights": cert.weights.iter().map(int).collect::<Vec<_>>(),
                    "identity": identity(&cert.identity),
                    "ratio": cert.ratio.as_ref().map(rational_to_string),
                    "expected_ratio": format!("2^{}", family.degree()),
                    "eliminated_indices": cert.eliminated_indices,
                    "recombination_verified": verified,
                }),
            );
        }
        Err(quinque_core::Error::Unreachable(k)) => report.check(
            "elimination certificate",
            false,
            json!({
                "instances": names,
                "error": quinque_core::Error::Unreachable(k).to_string(),
            }),
        ),
        Err(e) => return Err(e.into()),
    }
    Ok(())
}

fn scripted(family: &EquationFamily, args: &ReplayArgs, report: &mut Report) -> Result<(), Error> {
    if family.degree() != 25 {
        return Err(Error::usage(format!(
            "the scripted cascade is defined for degree 25, got {}",
            family.degree()
        )));
    }
    let fixture = match &args.fixture {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| Error::usage(format!("fixture {}: {e}", path.display())))?;
            Some(CascadeFixture::from_json(&text)?)
        }
        None if args.diff => Some(CascadeFixture::builtin()),
        None => None,
    };
    let script = match &fixture {
        Some(f) => f.script()?,
        None => CascadeScript::printed(),
    };
    let computed = scripted_cascade(family, &script);
    let mut steps = vec![json!({
        "instance": format!("seed (0,2) - ({},1)", family.shift() - 1),
        "multiplier": "1",
        "identity": identity(&computed[0]),
    })];
    for (step, id) in script.steps().iter().zip(&computed[1..]) {
        steps.push(json!({
            "instance": step.instance.to_string(),
            "multiplier": int(&step.multiplier),
            "identity": identity(id),
        }));
    }
    let last = computed.last().expect("seed present");
    report.finding(
        "scripted cascade",
        json!({
            "steps": steps,
            "terminal_support": last.support(),
            "terminal_leading_index": last.leading_index(),
            "terminal_doubling_ratio": last.doubling_ratio().as_ref().map(rational_to_string),
            "reaches_doubling_law": last.doubling_ratio().is_some(),
        }),
    );

    let rows = multiplier_pattern_check(family, &script);
    let table: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "instance": r.instance.to_string(),
                "scripted": int(&r.scripted),
                "pattern": int(&r.pattern),
                "matches": r.matches(),
            })
        })
        .collect();
    let positive_ok = rows.iter().filter(|r| r.instance.a >= 1).all(|r| r.matches());
    report.check(
        "multiplier pattern",
        positive_ok,
        json!({ "pattern": "C(n, s-j) + C(n, s-2-j) for j >= 1", "rows": table }),
    );
    for e in multiplier_errata(&rows) {
        report.erratum(&e);
    }

    if args.diff {
        let fixture = fixture.expect("diff mode loads a fixture");
        let diff = diff_against_printed(&computed, &fixture)?;
        let mut by_kind: BTreeMap<String, usize> = BTreeMap::new();
        for e in &diff.entries {
            let kind = serde_json::to_value(e.kind).expect("kind serializes");
            *by_kind.entry(kind.as_str().unwrap_or("?").to_string()).or_default() += 1;
        }
        report.finding(
            "printed cascade diff",
            json!({
                "identities": fixture.identities.len(),
                "compared_terms": diff.compared_terms,
                "matched_terms": diff.matched_terms,
                "errata_by_kind": by_kind,
            }),
        );
        for e in &diff.entries {
            report.erratum(e);
        }
    }
    Ok(())
}

pub fn run(args: &ReplayArgs, report: &mut Report) -> Result<(), Error> {
    let (family, _) = setup(&args.common)?;
    if args.mode == ReplayMode::Auto && (args.diff || args.fixture.is_some()) {
        return Err(Error::usage("--diff and --fixture need --mode scripted or both"));
    }
    if matches!(args.mode, ReplayMode::Auto | ReplayMode::Both) {
        auto(&family, args, report)?;
    }
    if matches!(args.mode, ReplayMode::Scripted | ReplayMode::Both) {
        scripted(&family, args, report)?;
    }
    Ok(())
}
