//! Report document: header, version, config echo, results, errata, summary.

use std::time::{SystemTime, UNIX_EPOCH};

use num_bigint::BigInt;
use num_rational::BigRational;
use quinque_core::fuzzy::GridCheck;
use quinque_core::identity::{Erratum, FormalIdentity};
use quinque_core::numeric::{rational_to_string, Scalar};
use serde_json::{json, Map, Value};

const EXAMPLE_FAILURES: usize = 3;

#[derive(Debug, Default)]
pub struct Report {
    results: Vec<Value>,
    errata: Vec<Value>,
    failed: Vec<String>,
    checks: usize,
    findings: usize,
}

impl Report {
    pub fn check(&mut self, name: &str, passed: bool, details: Value) {
        self.checks += 1;
        if !passed {
            self.failed.push(name.to_string());
        }
        self.results.push(json!({
            "name": name,
            "kind": "check",
            "passed": passed,
            "details": details,
        }));
    }

    pub fn finding(&mut self, name: &str, details: Value) {
        self.findings += 1;
        self.results.push(json!({
            "name": name,
            "kind": "finding",
            "passed": Value::Null,
            "details": details,
        }));
    }

    pub fn grid_check(&mut self, name: &str, check: &GridCheck) {
        self.check(name, check.passed(), grid(check));
    }

    pub fn erratum(&mut self, e: &Erratum) {
        self.errata
            .push(serde_json::to_value(e).expect("errata serialize to plain JSON"));
    }

    pub fn passed(&self) -> bool {
        self.failed.is_empty()
    }

    pub fn into_document(self, config: Value) -> Value {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let summary = json!({
            "status": if self.failed.is_empty() { "pass" } else { "fail" },
            "checks": self.checks,
            "failed": self.failed.len(),
            "findings": self.findings,
            "errata": self.errata.len(),
            "failed_checks": self.failed,
        });
        json!({
            "header": { "tool": "quinque", "unix_time": timestamp },
            "version": env!("CARGO_PKG_VERSION"),
            "config": config,
            "results": self.results,
            "errata": self.errata,
            "summary": summary,
        })
    }
}

pub fn int(x: &BigInt) -> Value {
    Value::String(x.to_string())
}

pub fn rational(x: &BigRational) -> Value {
    Value::String(rational_to_string(x))
}

/// Exact values as `"p/q"` strings; reals as a hex triple plus a decimal rendering.
pub fn scalar(x: &Scalar) -> Value {
    match x {
        Scalar::Exact(q) => rational(q),
        Scalar::Real(r) => {
            let (mantissa, exponent) = r.hex_parts();
            json!({
                "hex_mantissa": mantissa,
                "exponent": exponent,
                "precision": r.precision().bits(),
                "decimal": r.to_decimal_string(),
            })
        }
    }
}

pub fn opt_scalar(x: Option<&Scalar>) -> Value {
    x.map(scalar).unwrap_or(Value::Null)
}

pub fn identity(x: &FormalIdentity) -> Value {
    let mut map = Map::new();
    for (j, c) in x.coeffs().iter().rev() {
        map.insert(j.to_string(), int(c));
    }
    Value::Object(map)
}

pub fn grid(check: &GridCheck) -> Value {
    let examples: Vec<Value> = check
        .failures
        .iter()
        .take(EXAMPLE_FAILURES)
        .map(|f| json!({ "point": f.point, "lhs": rational(&f.lhs), "rhs": rational(&f.rhs) }))
        .collect();
    json!({
        "checked": check.checked,
        "failures": check.failures.len(),
        "examples": examples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use quinque_core::numeric::{Mode, Precision};

    fn without_header(doc: &Value) -> Value {
        let mut doc = doc.clone();
        if let Value::Object(map) = &mut doc {
            map.shift_remove("header");
        }
        doc
    }

    #[test]
    fn scalars() {
        assert_eq!(scalar(&Scalar::rational(-3, 4)), json!("-3/4"));
        assert_eq!(scalar(&Scalar::int(12)), json!("12"));
        let r = Scalar::rational(1, 2).in_mode(Mode::BigReal, Precision::DEFAULT);
        let v = scalar(&r);
        assert_eq!(v["precision"], json!(256));
        let decimal = v["decimal"].as_str().unwrap();
        assert!(decimal.starts_with('5') && decimal.ends_with("e-1"), "{decimal}");
    }

    #[test]
    fn document_layout() {
        let mut r = Report::default();
        r.check("a", true, json!({}));
        r.finding("b", json!({}));
        r.check("c", false, json!({}));
        assert!(!r.passed());
        let doc = r.into_document(json!({"command": "verify"}));
        let keys: Vec<&String> = doc.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["header", "version", "config", "results", "errata", "summary"]);
        assert_eq!(doc["summary"]["failed_checks"], json!(["c"]));
        assert_eq!(doc["summary"]["status"], json!("fail"));
        assert!(without_header(&doc).get("header").is_none());
    }
}
