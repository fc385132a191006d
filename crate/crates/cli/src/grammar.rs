//! Small grammars for mappings, controls and numeric parameters.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use quinque_core::equation::Polynomial;
use quinque_core::fuzzy::FuzzyControl;
use quinque_core::numeric::{parse_rational, Prime};
use quinque_core::stability::{ControlFunction, ControlKind};

use crate::Error;

/// Splits `name:k=v,k=v` and rejects keys outside `allowed`.
fn split_term<'a>(term: &'a str, allowed: &[&str]) -> Result<(&'a str, BTreeMap<&'a str, &'a str>), Error> {
    let (name, rest) = term.split_once(':').unwrap_or((term, ""));
    let mut params = BTreeMap::new();
    for kv in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::usage(format!("expected key=value in {term:?}, got {kv:?}")))?;
        let k = k.trim();
        if !allowed.contains(&k) {
            return Err(Error::usage(format!("unknown parameter {k:?} in {term:?}")));
        }
        if params.insert(k, v.trim()).is_some() {
            return Err(Error::usage(format!("parameter {k:?} repeated in {term:?}")));
        }
    }
    Ok((name.trim(), params))
}

/// Rational, decimal, or `b^e` with integer `b` and `e`.
pub fn parse_number(text: &str) -> Result<BigRational, Error> {
    if let Some((base, exp)) = text.split_once('^') {
        let base: BigInt = base
            .trim()
            .parse()
            .map_err(|_| Error::usage(format!("bad base in {text:?}")))?;
        let exp: i32 = exp
            .trim()
            .parse()
            .map_err(|_| Error::usage(format!("bad exponent in {text:?}")))?;
        if base.is_zero() && exp < 0 {
            return Err(Error::usage(format!("{text:?} divides by zero")));
        }
        return Ok(BigRational::from_integer(base).pow(exp));
    }
    Ok(parse_rational(text)?)
}

fn required<'a>(params: &BTreeMap<&str, &'a str>, key: &str, term: &str) -> Result<&'a str, Error> {
    params
        .get(key)
        .copied()
        .ok_or_else(|| Error::usage(format!("{term:?} needs {key}=..")))
}

fn exponent(text: &str) -> Result<u32, Error> {
    text.parse()
        .map_err(|_| Error::usage(format!("exponent must be a nonnegative integer, got {text:?}")))
}

/// `monomial[:a=..]`, `power:l=..[,eps=..]` and `zero`, joined by `+`.
pub fn parse_function(text: &str, degree: u32) -> Result<Polynomial, Error> {
    let mut poly = Polynomial::zero();
    for term in text.split('+').map(str::trim) {
        if term.is_empty() {
            return Err(Error::usage(format!("empty term in function {text:?}")));
        }
        let (name, params) = split_term(term, &["a", "l", "eps"])?;
        match name {
            "monomial" => {
                if params.contains_key("l") || params.contains_key("eps") {
                    return Err(Error::usage(format!("monomial takes only a=.., got {term:?}")));
                }
                let a = params
                    .get("a")
                    .map(|s| parse_number(s))
                    .transpose()?
                    .unwrap_or_else(BigRational::one);
                poly = poly.plus_term(a, degree);
            }
            "power" => {
                if params.contains_key("a") {
                    return Err(Error::usage(format!("power takes l=.. and eps=.., got {term:?}")));
                }
                let l = exponent(required(&params, "l", term)?)?;
                let eps = params
                    .get("eps")
                    .map(|s| parse_number(s))
                    .transpose()?
                    .unwrap_or_else(BigRational::one);
                poly = poly.plus_term(eps, l);
            }
            "zero" if params.is_empty() => {}
            _ => return Err(Error::usage(format!("unknown function term {term:?}"))),
        }
    }
    Ok(poly)
}

/// A control shape with `omega = 1`, plus the requested `omega` if any.
#[derive(Clone, Debug)]
pub struct ControlSpec {
    pub kind: ControlKind,
    pub shape: ControlFunction,
    pub omega: Option<BigRational>,
    pub exponents: (BigRational, BigRational),
}

pub fn parse_control(text: &str) -> Result<ControlSpec, Error> {
    let (name, params) = split_term(text.trim(), &["l", "a", "b", "omega"])?;
    let omega = params.get("omega").map(|s| parse_number(s)).transpose()?;
    if let Some(w) = &omega {
        if w.is_negative() {
            return Err(Error::usage(format!("omega must be nonnegative, got {w}")));
        }
    }
    let get = |k: &str| required(&params, k, text).and_then(parse_number);
    let no = |k: &str| -> Result<(), Error> {
        if params.contains_key(k) {
            Err(Error::usage(format!("{name} control does not take {k}=..")))
        } else {
            Ok(())
        }
    };
    let one = BigRational::one();
    let (kind, shape, exponents) = match name {
        "power" => {
            no("a")?;
            no("b")?;
            let l = get("l")?;
            let shape = ControlFunction::power_sum(one, l.clone())?;
            (ControlKind::Power, shape, (l, BigRational::zero()))
        }
        "product" | "mixed" => {
            no("l")?;
            let (a, b) = (get("a")?, get("b")?);
            if name == "product" {
                let shape = ControlFunction::power_product(one, a.clone(), b.clone())?;
                (ControlKind::Product, shape, (a, b))
            } else {
                let shape = ControlFunction::mixed(one, a.clone(), b.clone())?;
                (ControlKind::Mixed, shape, (a, b))
            }
        }
        _ => return Err(Error::usage(format!("unknown control {text:?}"))),
    };
    Ok(ControlSpec {
        kind,
        shape,
        omega,
        exponents,
    })
}

/// `dpow:theta=..,m=..[,p=..]`, `const:theta=..` or `zero`.
pub fn parse_fuzzy_control(text: &str) -> Result<FuzzyControl, Error> {
    let (name, params) = split_term(text.trim(), &["theta", "m", "p"])?;
    let theta = || -> Result<BigRational, Error> {
        let t = parse_number(required(&params, "theta", text)?)?;
        if t.is_negative() {
            return Err(Error::usage(format!("theta must be nonnegative, got {t}")));
        }
        Ok(t)
    };
    match name {
        "dpow" => {
            let m = exponent(required(&params, "m", text)?)?;
            let p = params
                .get("p")
                .map(|s| s.parse::<u64>().map_err(|_| Error::usage(format!("bad prime {s:?}"))))
                .transpose()?
                .unwrap_or(2);
            Ok(FuzzyControl::PAdicPower {
                theta: theta()?,
                m,
                p: Prime::new(p)?,
            })
        }
        "const" if !params.contains_key("m") && !params.contains_key("p") => Ok(FuzzyControl::Constant(theta()?)),
        "zero" if params.is_empty() => Ok(FuzzyControl::Zero),
        _ => Err(Error::usage(format!("unknown fuzzy control {text:?}"))),
    }
}

/// `lo:hi` with integers `lo <= hi`.
pub fn parse_range(text: &str) -> Result<(i64, i64), Error> {
    let bad = || Error::usage(format!("range must be lo:hi with integers lo <= hi, got {text:?}"));
    let (lo, hi) = text.split_once(':').ok_or_else(bad)?;
    let lo: i64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: i64 = hi.trim().parse().map_err(|_| bad())?;
    if lo > hi || lo.checked_mul(100).is_none() || hi.checked_mul(100).is_none() {
        return Err(bad());
    }
    Ok((lo, hi))
}

/// Human-readable `-n! * sum c_d v^d` for the terms below the degree.
pub fn residual_pattern(poly: &Polynomial, degree: u32) -> Option<String> {
    if poly.terms().keys().any(|d| *d > degree) {
        return None;
    }
    let parts: Vec<String> = poly
        .terms()
        .iter()
        .filter(|(d, _)| **d < degree)
        .map(|(d, c)| format!("({c})*v^{d}"))
        .collect();
    if parts.is_empty() {
        Some("0".into())
    } else {
        Some(format!("-{degree}!*({})", parts.join(" + ")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn functions() {
        let f = parse_function("monomial+power:l=3,eps=1/1000", 25).unwrap();
        assert_eq!(f.terms().len(), 2);
        assert_eq!(f.terms()[&3], q(1, 1000));
        assert_eq!(f.terms()[&25], q(1, 1));
        let g = parse_function("monomial:a=-2/3", 5).unwrap();
        assert_eq!(g.terms()[&5], q(-2, 3));
        assert!(parse_function("zero", 25).unwrap().is_zero());
        for bad in [
            "",
            "power",
            "power:l=-1",
            "monomial:l=2",
            "cubic",
            "monomial+",
            "power:l=2,l=3",
        ] {
            assert!(parse_function(bad, 25).is_err(), "{bad}");
        }
    }

    #[test]
    fn controls() {
        let c = parse_control("power:l=2").unwrap();
        assert_eq!(c.kind, ControlKind::Power);
        assert!(c.omega.is_none());
        let c = parse_control("mixed:a=1,b=2,omega=5").unwrap();
        assert_eq!(c.exponents, (q(1, 1), q(2, 1)));
        assert_eq!(c.omega, Some(q(5, 1)));
        for bad in [
            "power",
            "power:a=1",
            "product:a=1",
            "mixed:a=-1,b=1",
            "power:l=2,omega=-1",
            "sum:l=2",
        ] {
            assert!(parse_control(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn fuzzy_controls() {
        assert_eq!(parse_fuzzy_control("zero").unwrap(), FuzzyControl::Zero);
        assert_eq!(
            parse_fuzzy_control("const:theta=3").unwrap(),
            FuzzyControl::Constant(q(3, 1))
        );
        match parse_fuzzy_control("dpow:theta=1/2,m=3,p=5").unwrap() {
            FuzzyControl::PAdicPower { theta, m, p } => {
                assert_eq!((theta, m, p.get()), (q(1, 2), 3, 5));
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_fuzzy_control("dpow:theta=1,m=1,p=4").is_err());
    }

    #[test]
    fn numbers_and_ranges() {
        assert_eq!(parse_number("2^-23").unwrap(), q(1, 1 << 23));
        assert_eq!(parse_number("-3/4").unwrap(), q(-3, 4));
        assert_eq!(parse_number("0.25").unwrap(), q(1, 4));
        assert!(parse_number("0^-1").is_err());
        assert_eq!(parse_range("-10:10").unwrap(), (-10, 10));
        assert!(parse_range("3:1").is_err());
        assert!(parse_range("5").is_err());
    }

    #[test]
    fn patterns() {
        let f = parse_function("monomial+power:l=3,eps=1/1000", 25).unwrap();
        assert_eq!(residual_pattern(&f, 25).unwrap(), "-25!*((1/1000)*v^3)");
        assert_eq!(residual_pattern(&Polynomial::power(25), 25).unwrap(), "0");
        assert!(residual_pattern(&Polynomial::power(26), 25).is_none());
    }
}
