//! The odd-degree difference operator
//!
//! ```text
//! H f(u, v) = sum_{k=0}^{n} (-1)^k C(n,k) f(u + (s-k) v) - n! f(v),   s = (n+1)/2
//! ```
//!
//! which for `n = 25` is the quinquevigintic operator. Its arguments
//! `u + (s-k)v = (u - (n-s)v) + (n-k)v` make the sum an n-th forward
//! difference, so `f(x) = a x^n` lies in the kernel and any polynomial of
//! degree `d < n` leaves `-n! f(v)`.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::{binomial, compensated_sum, factorial, Mode, Precision, RationalSampler, Scalar};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EquationFamily {
    degree: u32,
    coefficients: Vec<BigInt>,
    rhs_factor: BigInt,
}

impl EquationFamily {
    pub const DEFAULT_DEGREE: u32 = 25;

    /// Canonical family `c_k = (-1)^k C(n,k)`; `n` must be odd.
    pub fn new(degree: u32) -> Result<Self> {
        if degree.is_multiple_of(2) {
            return Err(Error::EvenDegree(degree));
        }
        let coefficients = (0..=degree)
            .map(|k| {
                let c = binomial(degree, i64::from(k));
                if k % 2 == 0 {
                    c
                } else {
                    -c
                }
            })
            .collect();
        Ok(EquationFamily {
            degree,
            coefficients,
            rhs_factor: factorial(degree),
        })
    }

    /// A family with caller-supplied coefficients, used for negative controls.
    /// It is not required to satisfy the binomial rule.
    pub fn with_coefficients(degree: u32, coefficients: Vec<BigInt>) -> Result<Self> {
        if degree.is_multiple_of(2) {
            return Err(Error::EvenDegree(degree));
        }
        if coefficients.len() != degree as usize + 1 {
            return Err(Error::Precondition(format!(
                "expected {} coefficients, got {}",
                degree + 1,
                coefficients.len()
            )));
        }
        Ok(EquationFamily {
            degree,
            coefficients,
            rhs_factor: factorial(degree),
        })
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// `s = (n+1)/2`: the k-th argument is `u + (s-k) v`.
    pub fn shift(&self) -> i64 {
        i64::from(self.degree + 1) / 2
    }

    pub fn rhs_factor(&self) -> &BigInt {
        &self.rhs_factor
    }

    pub fn coefficients(&self) -> &[BigInt] {
        &self.coefficients
    }

    pub fn coefficient(&self, k: i64) -> Result<BigInt> {
        if k < 0 || k > i64::from(self.degree) {
            return Err(Error::IndexOutOfRange {
                index: k,
                max: i64::from(self.degree),
            });
        }
        Ok(self.coefficients[k as usize].clone())
    }

    /// True when every coefficient follows `(-1)^k C(n,k)`.
    pub fn is_canonical(&self) -> bool {
        EquationFamily::new(self.degree)
            .map(|c| c.coefficients == self.coefficients)
            .unwrap_or(false)
    }

    /// `(coefficient, offset)` pairs: term k is `c_k f(u + offset v)`.
    pub fn terms(&self) -> impl Iterator<Item = (&BigInt, i64)> + '_ {
        let s = self.shift();
        self.coefficients
            .iter()
            .enumerate()
            .map(move |(k, c)| (c, s - k as i64))
    }
}

impl Default for EquationFamily {
    fn default() -> Self {
        EquationFamily::new(Self::DEFAULT_DEGREE).expect("25 is odd")
    }
}

/// A deterministic mapping evaluated in the mode of its argument.
pub trait MappingOracle: Send + Sync {
    fn eval(&self, x: &Scalar) -> Scalar;

    fn describe(&self) -> String;
}

/// Sparse polynomial with rational coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Polynomial {
    terms: BTreeMap<u32, BigRational>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Polynomial::default()
    }

    pub fn monomial(coefficient: BigRational, exponent: u32) -> Self {
        Polynomial::zero().plus_term(coefficient, exponent)
    }

    pub fn power(exponent: u32) -> Self {
        Polynomial::monomial(BigRational::one(), exponent)
    }

    pub fn identity() -> Self {
        Polynomial::power(1)
    }

    pub fn plus_term(mut self, coefficient: BigRational, exponent: u32) -> Self {
        let entry = self.terms.entry(exponent).or_insert_with(BigRational::zero);
        *entry += coefficient;
        if entry.is_zero() {
            self.terms.remove(&exponent);
        }
        self
    }

    pub fn plus(mut self, other: &Polynomial) -> Self {
        for (e, c) in &other.terms {
            self = self.plus_term(c.clone(), *e);
        }
        self
    }

    pub fn terms(&self) -> &BTreeMap<u32, BigRational> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// True when only odd powers appear.
    pub fn is_odd(&self) -> bool {
        self.terms.keys().all(|e| e % 2 == 1)
    }
}

impl MappingOracle for Polynomial {
    fn eval(&self, x: &Scalar) -> Scalar {
        self.terms
            .iter()
            .fold(x.zero_like(), |acc, (e, c)| &acc + &(&x.lift(c) * &x.powi(*e)))
    }

    fn describe(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .rev()
            .map(|(e, c)| match (c.is_one(), *e) {
                (true, 0) => "1".to_string(),
                (true, e) => format!("x^{e}"),
                (false, 0) => format!("{c}"),
                (false, e) => format!("({c})*x^{e}"),
            })
            .collect();
        f.write_str(&parts.join(" + "))
    }
}

/// Wraps a closure as a [`MappingOracle`].
pub struct FnMapping<F> {
    name: String,
    f: F,
}

impl<F> FnMapping<F>
where
    F: Fn(&Scalar) -> Scalar + Send + Sync,
{
    pub fn new(name: impl Into<String>, f: F) -> Self {
        FnMapping { name: name.into(), f }
    }
}

impl<F> MappingOracle for FnMapping<F>
where
    F: Fn(&Scalar) -> Scalar + Send + Sync,
{
    fn eval(&self, x: &Scalar) -> Scalar {
        (self.f)(x)
    }

    fn describe(&self) -> String {
        self.name.clone()
    }
}

fn same_mode(expected: &Scalar, found: &Scalar) -> Result<()> {
    if expected.mode() == found.mode() {
        Ok(())
    } else {
        Err(Error::ModeMismatch {
            expected: expected.mode().name(),
            found: found.mode().name(),
        })
    }
}

/// `H f(u, v)` together with its conditioning.
#[derive(Clone, Debug)]
pub struct HEvaluation {
    pub value: Scalar,
    /// `sum |term|` over the n+2 terms.
    pub magnitude: Scalar,
    /// `sum |term| / |H f(u,v)|`; `None` when the value is exactly zero.
    pub condition: Option<Scalar>,
}

pub fn eval_h_detailed(family: &EquationFamily, f: &dyn MappingOracle, u: &Scalar, v: &Scalar) -> Result<HEvaluation> {
    same_mode(u, v)?;
    let mut terms = Vec::with_capacity(family.degree() as usize + 2);
    for (c, offset) in family.terms() {
        let arg = u + &(v * &v.lift_int(&BigInt::from(offset)));
        let fx = f.eval(&arg);
        same_mode(u, &fx)?;
        terms.push(&u.lift_int(c) * &fx);
    }
    let fv = f.eval(v);
    same_mode(u, &fv)?;
    terms.push(-&(&u.lift_int(family.rhs_factor()) * &fv));
    let sum = compensated_sum(&terms);
    Ok(HEvaluation {
        condition: sum.condition(),
        value: sum.value,
        magnitude: sum.magnitude,
    })
}

pub fn eval_h(family: &EquationFamily, f: &dyn MappingOracle, u: &Scalar, v: &Scalar) -> Result<Scalar> {
    eval_h_detailed(family, f, u, v).map(|h| h.value)
}

#[derive(Clone, Debug)]
pub struct ResidualSample {
    pub u: Scalar,
    pub v: Scalar,
    pub value: Scalar,
    pub condition: Option<Scalar>,
}

#[derive(Clone, Debug)]
pub struct ResidualReport {
    pub mode: Mode,
    pub seed: Option<u64>,
    pub samples: Vec<ResidualSample>,
    pub max_abs_residual: Scalar,
}

impl ResidualReport {
    pub fn all_zero(&self) -> bool {
        self.max_abs_residual.is_zero()
    }
}

/// Evaluates `H f` on every pair; samples run in parallel and keep input order.
pub fn residual_scan(
    family: &EquationFamily,
    f: &dyn MappingOracle,
    samples: &[(Scalar, Scalar)],
) -> Result<ResidualReport> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Precondition("residual scan needs at least one sample".into()))?;
    let evaluated: Vec<ResidualSample> = samples
        .par_iter()
        .map(|(u, v)| {
            eval_h_detailed(family, f, u, v).map(|h| ResidualSample {
                u: u.clone(),
                v: v.clone(),
                value: h.value,
                condition: h.condition,
            })
        })
        .collect::<Result<_>>()?;
    let max_abs_residual = evaluated
        .iter()
        .map(|s| s.value.abs())
        .fold(first.0.zero_like(), Scalar::max);
    Ok(ResidualReport {
        mode: first.0.mode(),
        seed: None,
        samples: evaluated,
        max_abs_residual,
    })
}

/// Seeded random `(u, v)` pairs in the requested mode.
pub fn random_pairs(seed: u64, count: usize, mode: Mode, precision: Precision) -> Vec<(Scalar, Scalar)> {
    let mut sampler = RationalSampler::new(seed);
    sampler
        .pairs(count)
        .into_iter()
        .map(|(u, v)| {
            (
                Scalar::Exact(u).in_mode(mode, precision),
                Scalar::Exact(v).in_mode(mode, precision),
            )
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct OddnessViolation {
    pub x: Scalar,
    pub f_x: Scalar,
    pub f_neg_x: Scalar,
}

#[derive(Clone, Debug)]
pub struct SymmetryReport {
    pub f_at_zero: Scalar,
    pub zero_ok: bool,
    pub checked: usize,
    pub oddness_violations: Vec<OddnessViolation>,
}

impl SymmetryReport {
    pub fn passed(&self) -> bool {
        self.zero_ok && self.oddness_violations.is_empty()
    }
}

/// Checks `f(0) = 0` and `f(-x) = -f(x)` at each sample. Exact samples are
/// compared exactly; bigreal samples within `2^(-precision/2)` relative.
pub fn symmetry_checks(f: &dyn MappingOracle, samples: &[Scalar]) -> SymmetryReport {
    let zero = samples.first().map(Scalar::zero_like).unwrap_or_else(|| Scalar::int(0));
    let f_at_zero = f.eval(&zero);
    let close = |a: &Scalar, b: &Scalar| -> bool {
        match a.precision() {
            None => a == b,
            Some(p) => {
                let diff = (a - b).abs();
                let scale = a.abs().max(a.lift(&BigRational::one()));
                let tol = scale.mul_pow2(-(p.bits() as i64) / 2).expect("tolerance in range");
                diff <= tol
            }
        }
    };
    let zero_ok = close(&f_at_zero, &zero);
    let oddness_violations = samples
        .iter()
        .filter_map(|x| {
            let f_x = f.eval(x);
            let f_neg_x = f.eval(&-x);
            if close(&f_neg_x, &-&f_x) {
                None
            } else {
                Some(OddnessViolation {
                    x: x.clone(),
                    f_x,
                    f_neg_x,
                })
            }
        })
        .collect();
    SymmetryReport {
        f_at_zero,
        zero_ok,
        checked: samples.len(),
        oddness_violations,
    }
}

/// `f(2u) - 2^n f(u)` for each sample point.
pub fn doubling_defects(family: &EquationFamily, f: &dyn MappingOracle, points: &[Scalar]) -> Vec<Scalar> {
    points
        .iter()
        .map(|u| {
            let two_u = u.mul_pow2(1).expect("doubling stays in range");
            let scaled = f
                .eval(u)
                .mul_pow2(i64::from(family.degree()))
                .expect("scaling stays in range");
            &f.eval(&two_u) - &scaled
        })
        .collect()
}

pub fn is_exact_zero(values: &[Scalar]) -> bool {
    values.iter().all(Scalar::is_zero)
}
