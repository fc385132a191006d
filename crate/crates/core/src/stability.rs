//! Fixed-point stability on the scalar line.
//!
//! `P f(c) = 2^(-n q) f(2^q c)`; iterating gives `V_k(c) = 2^(-n k q) f(2^(k q) c)`.
//! A control `sigma` bounds the operator defect and `sigma*` aggregates it
//! over the instances that produce the doubling law.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::equation::{eval_h, EquationFamily, MappingOracle};
use crate::error::{Error, Result};
use crate::numeric::{binomial, Precision, Scalar};

/// The direction `q = +1` or `q = -1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Q {
    Plus,
    Minus,
}

impl Q {
    pub fn from_i64(q: i64) -> Result<Q> {
        match q {
            1 => Ok(Q::Plus),
            -1 => Ok(Q::Minus),
            other => Err(Error::Precondition(format!("q must be 1 or -1, got {other}"))),
        }
    }

    pub fn sign(self) -> i64 {
        match self {
            Q::Plus => 1,
            Q::Minus => -1,
        }
    }
}

impl fmt::Display for Q {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.sign())
    }
}

/// A user-supplied `sigma(c, d) >= 0`.
pub trait ControlOracle: Send + Sync {
    fn eval(&self, c: &Scalar, d: &Scalar) -> Scalar;

    fn describe(&self) -> String;
}

#[derive(Clone)]
pub enum ControlFunction {
    General(Arc<dyn ControlOracle>),
    /// `omega (|c|^l + |d|^l)`
    PowerSum {
        omega: BigRational,
        l: BigRational,
    },
    /// `omega |c|^a |d|^b`
    PowerProduct {
        omega: BigRational,
        a: BigRational,
        b: BigRational,
    },
    /// `omega (|c|^a |d|^b + |c|^(a+b) + |d|^(a+b))`
    Mixed {
        omega: BigRational,
        a: BigRational,
        b: BigRational,
    },
}

impl fmt::Debug for ControlFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

impl ControlFunction {
    pub fn power_sum(omega: BigRational, l: BigRational) -> Result<Self> {
        nonnegative("omega", &omega)?;
        nonnegative("l", &l)?;
        Ok(ControlFunction::PowerSum { omega, l })
    }

    pub fn power_product(omega: BigRational, a: BigRational, b: BigRational) -> Result<Self> {
        nonnegative("omega", &omega)?;
        nonnegative("a", &a)?;
        nonnegative("b", &b)?;
        Ok(ControlFunction::PowerProduct { omega, a, b })
    }

    pub fn mixed(omega: BigRational, a: BigRational, b: BigRational) -> Result<Self> {
        nonnegative("omega", &omega)?;
        nonnegative("a", &a)?;
        nonnegative("b", &b)?;
        Ok(ControlFunction::Mixed { omega, a, b })
    }

    /// Same shape with a different `omega`; general controls are rejected.
    pub fn with_omega(&self, omega: BigRational) -> Result<Self> {
        match self {
            ControlFunction::General(_) => Err(Error::Precondition("a general control has no omega".into())),
            ControlFunction::PowerSum { l, .. } => Self::power_sum(omega, l.clone()),
            ControlFunction::PowerProduct { a, b, .. } => Self::power_product(omega, a.clone(), b.clone()),
            ControlFunction::Mixed { a, b, .. } => Self::mixed(omega, a.clone(), b.clone()),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            ControlFunction::General(o) => o.describe(),
            ControlFunction::PowerSum { omega, l } => format!("{omega}*(|c|^{l} + |d|^{l})"),
            ControlFunction::PowerProduct { omega, a, b } => format!("{omega}*|c|^{a}*|d|^{b}"),
            ControlFunction::Mixed { omega, a, b } => {
                format!("{omega}*(|c|^{a}*|d|^{b} + |c|^({a}+{b}) + |d|^({a}+{b}))")
            }
        }
    }

    /// Homogeneity degree `l` (or `a + b`); `None` for general controls.
    pub fn degree(&self) -> Option<BigRational> {
        match self {
            ControlFunction::General(_) => None,
            ControlFunction::PowerSum { l, .. } => Some(l.clone()),
            ControlFunction::PowerProduct { a, b, .. } | ControlFunction::Mixed { a, b, .. } => Some(a + b),
        }
    }

    pub fn omega(&self) -> Option<&BigRational> {
        match self {
            ControlFunction::General(_) => None,
            ControlFunction::PowerSum { omega, .. }
            | ControlFunction::PowerProduct { omega, .. }
            | ControlFunction::Mixed { omega, .. } => Some(omega),
        }
    }

    pub fn eval(&self, c: &Scalar, d: &Scalar, precision: Precision) -> Scalar {
        let p = c.precision().unwrap_or(precision);
        match self {
            ControlFunction::General(o) => o.eval(c, d),
            ControlFunction::PowerSum { omega, l } => &c.lift(omega) * &(&c.abs_pow(l, p) + &d.abs_pow(l, p)),
            ControlFunction::PowerProduct { omega, a, b } => &c.lift(omega) * &(&c.abs_pow(a, p) * &d.abs_pow(b, p)),
            ControlFunction::Mixed { omega, a, b } => {
                let l = a + b;
                let sum = &(&c.abs_pow(a, p) * &d.abs_pow(b, p)) + &(&c.abs_pow(&l, p) + &d.abs_pow(&l, p));
                &c.lift(omega) * &sum
            }
        }
    }
}

fn nonnegative(name: &str, x: &BigRational) -> Result<()> {
    if x.is_negative() {
        Err(Error::Precondition(format!("{name} must be nonnegative, got {x}")))
    } else {
        Ok(())
    }
}

/// One term `weight * sigma(alpha c, beta c)` of `sigma*`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SigmaTerm {
    pub alpha: i64,
    pub beta: i64,
    pub weight: BigInt,
}

/// `(0,2)` with weight 1, then `(j,1)` with weight `C(n,s-j) + C(n,s-2-j)` for `j = s..=0`.
pub fn sigma_star_terms(family: &EquationFamily) -> Vec<SigmaTerm> {
    let n = family.degree();
    let s = family.shift();
    std::iter::once(SigmaTerm {
        alpha: 0,
        beta: 2,
        weight: BigInt::one(),
    })
    .chain((0..=s).rev().map(|j| SigmaTerm {
        alpha: j,
        beta: 1,
        weight: binomial(n, s - j) + binomial(n, s - 2 - j),
    }))
    .collect()
}

/// `(1/n!) sum_i w_i sigma(alpha_i c, beta_i c)`.
pub fn sigma_star(family: &EquationFamily, control: &ControlFunction, c: &Scalar, precision: Precision) -> Scalar {
    let total = sigma_star_terms(family).iter().fold(c.zero_like(), |acc, t| {
        let x = &c.lift_int(&BigInt::from(t.alpha)) * c;
        let y = &c.lift_int(&BigInt::from(t.beta)) * c;
        &acc + &(&c.lift_int(&t.weight) * &control.eval(&x, &y, precision))
    });
    &total / &c.lift_int(family.rhs_factor())
}

/// `2^e` for rational `e`, exact when `e` is an integer.
pub fn pow2(e: &BigRational, precision: Precision) -> Scalar {
    if e.is_integer() {
        let k = e.to_integer().to_i64().expect("exponent fits in i64");
        Scalar::int(1).mul_pow2(k).expect("exact power of two")
    } else {
        Scalar::int(2).abs_pow(e, precision)
    }
}

/// `kappa = 2^(q (l - n))`, which must lie below 1.
pub fn kappa_for_power(family: &EquationFamily, l: &BigRational, q: Q, precision: Precision) -> Result<Scalar> {
    let n = BigRational::from_integer(family.degree().into());
    if *l == n {
        return Err(Error::Precondition(format!("l≠{n} required")));
    }
    let e = BigRational::from_integer(q.sign().into()) * (l - &n);
    if !e.is_negative() {
        return Err(Error::Precondition(format!(
            "kappa = 2^({e}) is not below 1; q = 1 needs l < {n}, q = -1 needs l > {n}"
        )));
    }
    Ok(pow2(&e, precision))
}

/// The `q` for which `kappa_for_power` is admissible.
pub fn admissible_q(family: &EquationFamily, l: &BigRational) -> Result<Q> {
    let n = BigRational::from_integer(family.degree().into());
    match l.cmp(&n) {
        std::cmp::Ordering::Less => Ok(Q::Plus),
        std::cmp::Ordering::Greater => Ok(Q::Minus),
        std::cmp::Ordering::Equal => Err(Error::Precondition(format!("l≠{n} required"))),
    }
}

/// `sum coeff * base_a^A * base_b^B` with symbolic exponents `(A, B)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExponentialSum {
    terms: BTreeMap<(u64, u64), BigInt>,
}

impl ExponentialSum {
    pub fn from_pairs(pairs: impl IntoIterator<Item = ((u64, u64), BigInt)>) -> Self {
        let mut out = ExponentialSum::default();
        for (k, c) in pairs {
            out.add(k, c);
        }
        out
    }

    fn add(&mut self, key: (u64, u64), c: BigInt) {
        let e = self.terms.entry(key).or_insert_with(BigInt::zero);
        *e += c;
        if e.is_zero() {
            self.terms.remove(&key);
        }
    }

    pub fn terms(&self) -> &BTreeMap<(u64, u64), BigInt> {
        &self.terms
    }

    /// Collapses `base^0` and `1^e` to 1 and drops `0^e` for `e > 0`.
    pub fn reduce(&self, exponents: &(BigRational, BigRational)) -> ExponentialSum {
        let fold = |base: u64, e: &BigRational| -> Option<u64> {
            if e.is_zero() || base == 1 {
                Some(1)
            } else if base == 0 {
                None
            } else {
                Some(base)
            }
        };
        let mut out = ExponentialSum::default();
        for ((ba, bb), c) in &self.terms {
            if let (Some(x), Some(y)) = (fold(*ba, &exponents.0), fold(*bb, &exponents.1)) {
                out.add((x, y), c.clone());
            }
        }
        out
    }

    pub fn constant_term(&self, exponents: &(BigRational, BigRational)) -> BigInt {
        self.reduce(exponents).terms.get(&(1, 1)).cloned().unwrap_or_default()
    }

    pub fn evaluate(&self, exponents: &(BigRational, BigRational), precision: Precision) -> Scalar {
        self.terms.iter().fold(Scalar::int(0), |acc, ((ba, bb), c)| {
            let x = Scalar::int(*ba as i64).abs_pow(&exponents.0, precision);
            let y = Scalar::int(*bb as i64).abs_pow(&exponents.1, precision);
            &acc + &(&Scalar::Exact(BigRational::from_integer(c.clone())) * &(&x * &y))
        })
    }
}

impl fmt::Display for ExponentialSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|((ba, bb), c)| match (ba, bb) {
                (1, 1) => format!("{c}"),
                (a, 1) => format!("{c}*{a}^A"),
                (1, b) => format!("{c}*{b}^B"),
                (a, b) => format!("{c}*{a}^A*{b}^B"),
            })
            .collect();
        f.write_str(&parts.join(" + "))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ControlKind {
    Power,
    Product,
    Mixed,
}

impl ControlKind {
    pub fn name(self) -> &'static str {
        match self {
            ControlKind::Power => "power",
            ControlKind::Product => "product",
            ControlKind::Mixed => "mixed",
        }
    }
}

/// Expands the `sigma*` bracket symbolically for a structured control.
pub fn recompute_bracket(family: &EquationFamily, kind: ControlKind) -> ExponentialSum {
    let mut out = ExponentialSum::default();
    for t in sigma_star_terms(family) {
        let (a, b) = (t.alpha as u64, t.beta as u64);
        match kind {
            ControlKind::Power => {
                out.add((a, 1), t.weight.clone());
                out.add((b, 1), t.weight);
            }
            ControlKind::Product => out.add((a, b), t.weight),
            ControlKind::Mixed => {
                out.add((a, b), t.weight.clone());
                out.add((a, a), t.weight.clone());
                out.add((b, b), t.weight);
            }
        }
    }
    out
}

const PRINTED_TAIL: [u64; 11] = [
    4350335, 2523675, 1258675, 533830, 189750, 55430, 12950, 2325, 301, 25, 1,
];

/// The bracket as printed for the degree-25 equation.
pub fn printed_bracket(kind: ControlKind) -> ExponentialSum {
    let tail = PRINTED_TAIL
        .iter()
        .enumerate()
        .map(|(i, c)| (i as u64 + 3, BigInt::from(*c)));
    let one = |c: u64| BigInt::from(c);
    match kind {
        ControlKind::Power => ExponentialSum::from_pairs(
            [((1, 1), one(34861936)), ((2, 1), one(6500376))]
                .into_iter()
                .chain(tail.map(|(j, c)| ((j, 1), c))),
        ),
        ControlKind::Product => ExponentialSum::from_pairs(
            [((1, 1), one(8469060)), ((2, 1), one(6500375))]
                .into_iter()
                .chain(tail.map(|(j, c)| ((j, 1), c))),
        ),
        ControlKind::Mixed => ExponentialSum::from_pairs(
            [((1, 1), one(50492552)), ((2, 1), one(6500375)), ((2, 2), one(6500376))]
                .into_iter()
                .chain(tail.flat_map(|(j, c)| [((j, 1), c.clone()), ((j, j), c)])),
        ),
    }
}

/// Recomputed and printed `omega_0` brackets for one control shape.
/// `omega_0 = omega / n! * bracket`.
#[derive(Clone, Debug)]
pub struct ConstantsBundle {
    pub kind: ControlKind,
    pub exponents: (BigRational, BigRational),
    pub l: BigRational,
    pub q: Q,
    pub kappa: Scalar,
    pub printed: ExponentialSum,
    pub recomputed: ExponentialSum,
    pub printed_value: Scalar,
    pub recomputed_value: Scalar,
    pub printed_constant: BigInt,
    pub recomputed_constant: BigInt,
    /// Reduced terms whose coefficients differ: `(key, printed, recomputed)`.
    pub differences: Vec<((u64, u64), BigInt, BigInt)>,
    pub discrepancy: bool,
}

impl ConstantsBundle {
    /// `omega / n! * bracket`, using the recomputed bracket.
    pub fn omega0(&self, family: &EquationFamily, omega: &BigRational) -> Scalar {
        let w = Scalar::Exact(omega / BigRational::from_integer(family.rhs_factor().clone()));
        &w * &self.recomputed_value
    }

    /// `omega_0 / |2^n - 2^l|`, the coefficient of `|c|^l` in the final bound.
    pub fn bound_coefficient(&self, family: &EquationFamily, omega: &BigRational, precision: Precision) -> Scalar {
        let n = BigRational::from_integer(family.degree().into());
        let gap = (&pow2(&n, precision) - &pow2(&self.l, precision)).abs();
        &self.omega0(family, omega) / &gap
    }
}

const REAL_AGREEMENT: f64 = 1e-12;

fn constants(
    family: &EquationFamily,
    kind: ControlKind,
    exponents: (BigRational, BigRational),
    l: BigRational,
    precision: Precision,
) -> Result<ConstantsBundle> {
    nonnegative("exponent", &exponents.0)?;
    nonnegative("exponent", &exponents.1)?;
    let q = admissible_q(family, &l)?;
    let kappa = kappa_for_power(family, &l, q, precision)?;
    let printed = printed_bracket(kind);
    let recomputed = recompute_bracket(family, kind);
    let printed_value = printed.evaluate(&exponents, precision);
    let recomputed_value = recomputed.evaluate(&exponents, precision);
    let (pr, rr) = (printed.reduce(&exponents), recomputed.reduce(&exponents));
    let mut keys: Vec<_> = pr.terms.keys().chain(rr.terms.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();
    let differences: Vec<_> = keys
        .into_iter()
        .filter_map(|k| {
            let (a, b) = (
                pr.terms.get(&k).cloned().unwrap_or_default(),
                rr.terms.get(&k).cloned().unwrap_or_default(),
            );
            (a != b).then_some((k, a, b))
        })
        .collect();
    let discrepancy = match (&printed_value, &recomputed_value) {
        (Scalar::Exact(a), Scalar::Exact(b)) => a != b,
        (a, b) => {
            let diff = (a - b).abs().to_f64();
            let scale = b.abs().to_f64().max(f64::MIN_POSITIVE);
            diff / scale > REAL_AGREEMENT
        }
    };
    Ok(ConstantsBundle {
        kind,
        printed_constant: printed.constant_term(&exponents),
        recomputed_constant: recomputed.constant_term(&exponents),
        exponents,
        l,
        q,
        kappa,
        printed,
        recomputed,
        printed_value,
        recomputed_value,
        differences,
        discrepancy,
    })
}

pub fn omega0_power(family: &EquationFamily, l: &BigRational, precision: Precision) -> Result<ConstantsBundle> {
    constants(
        family,
        ControlKind::Power,
        (l.clone(), BigRational::zero()),
        l.clone(),
        precision,
    )
}

pub fn omega0_product(
    family: &EquationFamily,
    a: &BigRational,
    b: &BigRational,
    precision: Precision,
) -> Result<ConstantsBundle> {
    constants(family, ControlKind::Product, (a.clone(), b.clone()), a + b, precision)
}

pub fn omega0_mixed(
    family: &EquationFamily,
    a: &BigRational,
    b: &BigRational,
    precision: Precision,
) -> Result<ConstantsBundle> {
    constants(family, ControlKind::Mixed, (a.clone(), b.clone()), a + b, precision)
}

/// `[V_1(c), ..., V_K(c)]`.
pub fn fixed_point_iterate(
    family: &EquationFamily,
    f: &dyn MappingOracle,
    q: Q,
    iterations: usize,
    c: &Scalar,
) -> Result<Vec<Scalar>> {
    if iterations == 0 {
        return Err(Error::Precondition("iteration count must be at least 1".into()));
    }
    let n = i64::from(family.degree());
    (1..=iterations as i64)
        .map(|k| {
            let x = c.mul_pow2(k * q.sign())?;
            f.eval(&x).mul_pow2(-n * k * q.sign())
        })
        .collect()
}

/// `P f(c) = 2^(-n q) f(2^q c)`.
pub fn apply_p(family: &EquationFamily, f: &dyn MappingOracle, q: Q, c: &Scalar) -> Result<Scalar> {
    let n = i64::from(family.degree());
    f.eval(&c.mul_pow2(q.sign())?).mul_pow2(-n * q.sign())
}

/// `x -> V_k(x)` as a mapping.
pub struct IteratedMapping<'a> {
    family: EquationFamily,
    f: &'a dyn MappingOracle,
    q: Q,
    k: usize,
}

impl<'a> IteratedMapping<'a> {
    pub fn new(family: &EquationFamily, f: &'a dyn MappingOracle, q: Q, k: usize) -> Self {
        IteratedMapping {
            family: family.clone(),
            f,
            q,
            k,
        }
    }
}

impl MappingOracle for IteratedMapping<'_> {
    fn eval(&self, x: &Scalar) -> Scalar {
        let n = i64::from(self.family.degree());
        let k = self.k as i64 * self.q.sign();
        let y = x.mul_pow2(k).expect("iterate point within exponent range");
        self.f
            .eval(&y)
            .mul_pow2(-n * k)
            .expect("iterate value within exponent range")
    }

    fn describe(&self) -> String {
        format!("V_{}[{}]", self.k, self.f.describe())
    }
}

/// Slack added to the right-hand side of each inequality.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tolerance {
    pub value: BigRational,
    /// Scale by `max(1, |rhs|)` when set.
    pub relative: bool,
}

impl Tolerance {
    pub fn exact() -> Self {
        Tolerance {
            value: BigRational::zero(),
            relative: false,
        }
    }

    pub fn absolute(value: BigRational) -> Self {
        Tolerance { value, relative: false }
    }

    /// `2^(-bits/2)`, relative.
    pub fn for_precision(precision: Precision) -> Self {
        let half = (precision.bits() / 2) as u32;
        Tolerance {
            value: BigRational::new(BigInt::one(), BigInt::from(2u32).pow(half)),
            relative: true,
        }
    }

    pub fn slack(&self, rhs: &Scalar) -> Scalar {
        let t = rhs.lift(&self.value);
        if self.relative {
            let one = rhs.lift(&BigRational::one());
            &t * &rhs.abs().max(one)
        } else {
            t
        }
    }

    pub fn admits(&self, lhs: &Scalar, rhs: &Scalar) -> bool {
        *lhs <= rhs + &self.slack(rhs)
    }

    /// `|gap| <= slack(reference)`.
    pub fn within(&self, gap: &Scalar, reference: &Scalar) -> bool {
        gap.abs() <= self.slack(reference)
    }
}

#[derive(Clone, Debug)]
pub struct DoublingRow {
    pub c: Scalar,
    pub defect: Scalar,
    pub sigma_star: Scalar,
    pub passed: bool,
}

/// `|f(2c) - 2^n f(c)| <= sigma*(c)` at each sample.
pub fn check_doubling_defect(
    family: &EquationFamily,
    f: &dyn MappingOracle,
    control: &ControlFunction,
    samples: &[Scalar],
    tolerance: &Tolerance,
    precision: Precision,
) -> Result<Vec<DoublingRow>> {
    let n = i64::from(family.degree());
    samples
        .iter()
        .map(|c| {
            let defect = (&f.eval(&c.mul_pow2(1)?) - &f.eval(c).mul_pow2(n)?).abs();
            let s = sigma_star(family, control, c, precision);
            Ok(DoublingRow {
                passed: tolerance.admits(&defect, &s),
                c: c.clone(),
                defect,
                sigma_star: s,
            })
        })
        .collect()
}

/// Least `omega` with `|H f(c,d)| <= omega sigma_1(c,d)` over a grid, where
/// `sigma_1` is the control shape with `omega = 1`.
#[derive(Clone, Debug)]
pub struct OmegaFit {
    pub omega: Scalar,
    pub pairs_checked: usize,
    /// Pair attaining the maximum ratio.
    pub witness: Option<(Scalar, Scalar)>,
}

/// Fits over all ordered pairs drawn from `points`; pairs where the shape
/// vanishes must have a vanishing defect.
pub fn fit_omega(
    family: &EquationFamily,
    f: &dyn MappingOracle,
    shape: &ControlFunction,
    points: &[Scalar],
    precision: Precision,
) -> Result<OmegaFit> {
    let unit = shape.with_omega(BigRational::one())?;
    let first = points
        .first()
        .ok_or_else(|| Error::Precondition("omega fit needs at least one point".into()))?;
    let mut best = first.zero_like();
    let mut witness = None;
    let mut checked = 0;
    for c in points {
        for d in points {
            let h = eval_h(family, f, c, d)?.abs();
            let denom = unit.eval(c, d, precision);
            checked += 1;
            if denom.is_zero() {
                if !h.is_zero() {
                    return Err(Error::Precondition(format!(
                        "defect {h} at ({c}, {d}) is not dominated by {}",
                        unit.describe()
                    )));
                }
                continue;
            }
            let ratio = &h / &denom;
            if ratio > best {
                best = ratio;
                witness = Some((c.clone(), d.clone()));
            }
        }
    }
    Ok(OmegaFit {
        omega: best,
        pairs_checked: checked,
        witness,
    })
}

#[derive(Clone, Debug)]
pub struct StabilityConfig {
    pub q: Q,
    /// Derived from the control's homogeneity degree when absent.
    pub kappa: Option<Scalar>,
    pub iterations: usize,
    pub precision: Precision,
    pub samples: Vec<Scalar>,
    pub tolerance: Tolerance,
    pub seed: Option<u64>,
}

impl StabilityConfig {
    pub fn new(q: Q, iterations: usize, samples: Vec<Scalar>) -> Self {
        StabilityConfig {
            q,
            kappa: None,
            iterations,
            precision: Precision::DEFAULT,
            samples,
            tolerance: Tolerance::for_precision(Precision::DEFAULT),
            seed: None,
        }
    }

    pub fn resolve_kappa(&self, family: &EquationFamily, control: &ControlFunction) -> Result<Scalar> {
        let kappa = match (&self.kappa, control.degree()) {
            (Some(k), _) => k.clone(),
            (None, Some(l)) => kappa_for_power(family, &l, self.q, self.precision)?,
            (None, None) => {
                return Err(Error::Precondition(
                    "kappa must be supplied for a general control".into(),
                ))
            }
        };
        if kappa.is_negative() || kappa.is_zero() || kappa >= kappa.lift(&BigRational::one()) {
            return Err(Error::Precondition(format!("kappa must lie in (0,1), got {kappa}")));
        }
        Ok(kappa)
    }
}

#[derive(Clone, Debug)]
pub struct SampleCertificate {
    pub c: Scalar,
    pub sigma_star: Scalar,
    pub iterates: Vec<Scalar>,
    /// `|V_{k+1} - V_k| / |V_k - V_{k-1}|` over `[f(c), V_1, ..., V_K]`,
    /// skipping steps below the noise floor.
    pub ratios: Vec<Scalar>,
    pub bound: Scalar,
    pub observed: Scalar,
    pub doubling_gap: Scalar,
    pub ratio_ok: bool,
    pub bound_ok: bool,
    pub doubling_ok: bool,
}

impl SampleCertificate {
    pub fn passed(&self) -> bool {
        self.ratio_ok && self.bound_ok && self.doubling_ok
    }

    pub fn final_value(&self) -> &Scalar {
        self.iterates.last().expect("at least one iterate")
    }
}

#[derive(Clone, Debug)]
pub struct StabilityReport {
    pub q: Q,
    pub kappa: Scalar,
    pub iterations: usize,
    pub precision: Precision,
    pub seed: Option<u64>,
    pub bound_factor: Scalar,
    pub samples: Vec<SampleCertificate>,
    pub max_violation: Scalar,
    pub max_ratio: Option<Scalar>,
    /// Observed contraction is at most half the configured `kappa`.
    pub loose: bool,
}

impl StabilityReport {
    pub fn passed(&self) -> bool {
        self.samples.iter().all(SampleCertificate::passed)
    }
}

/// `kappa^((1-q)/2) / (2^n (1 - kappa))`.
pub fn bound_factor(family: &EquationFamily, kappa: &Scalar, q: Q) -> Result<Scalar> {
    let one = kappa.lift(&BigRational::one());
    let num = if q == Q::Plus { one.clone() } else { kappa.clone() };
    (&num / &(&one - kappa)).mul_pow2(-i64::from(family.degree()))
}

/// Differences at or below `|x| 2^(4 - p/2)` are not resolved well enough for a ratio.
fn noise_floor(x: &Scalar) -> Scalar {
    match x.precision() {
        None => x.zero_like(),
        Some(p) => x
            .abs()
            .mul_pow2(4 - (p.bits() / 2) as i64)
            .unwrap_or_else(|_| x.zero_like()),
    }
}

/// Runs the iteration at every sample and checks the ratio, distance and
/// doubling conclusions.
pub fn certify_stability(
    family: &EquationFamily,
    f: &dyn MappingOracle,
    control: &ControlFunction,
    config: &StabilityConfig,
) -> Result<StabilityReport> {
    if config.samples.is_empty() {
        return Err(Error::Precondition("no samples".into()));
    }
    let kappa = config.resolve_kappa(family, control)?;
    let factor = bound_factor(family, &kappa, config.q)?;
    let n = i64::from(family.degree());
    let tol = &config.tolerance;
    let ratio_limit = &kappa + &tol.slack(&kappa.zero_like());

    let samples = config
        .samples
        .par_iter()
        .map(|c| {
            let iterates = fixed_point_iterate(family, f, config.q, config.iterations, c)?;
            let fc = f.eval(c);
            let chain: Vec<&Scalar> = std::iter::once(&fc).chain(iterates.iter()).collect();
            let mut ratios = Vec::new();
            for w in chain.windows(3) {
                let prev = (w[1] - w[0]).abs();
                let next = (w[2] - w[1]).abs();
                if prev > noise_floor(w[1]) && !prev.is_zero() {
                    ratios.push(&next / &prev);
                }
            }
            let ratio_ok = ratios.iter().all(|r| *r <= ratio_limit);
            let s = sigma_star(family, control, c, config.precision);
            let bound = &factor * &s;
            let last = iterates.last().expect("iterations >= 1");
            let observed = (&fc - last).abs();
            let bound_ok = tol.admits(&observed, &bound);
            let last2 = fixed_point_iterate(family, f, config.q, config.iterations, &c.mul_pow2(1)?)?
                .pop()
                .expect("iterations >= 1");
            let scaled = last.mul_pow2(n)?;
            let doubling_gap = (&last2 - &scaled).abs();
            let doubling_ok = tol.within(&doubling_gap, &scaled);
            Ok(SampleCertificate {
                c: c.clone(),
                sigma_star: s,
                iterates,
                ratios,
                bound,
                observed,
                doubling_gap,
                ratio_ok,
                bound_ok,
                doubling_ok,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let zero = kappa.zero_like();
    let max_violation = samples
        .iter()
        .map(|s| (&s.observed - &s.bound).max(zero.clone()))
        .fold(zero.clone(), Scalar::max);
    let max_ratio = samples
        .iter()
        .flat_map(|s| s.ratios.iter().cloned())
        .reduce(Scalar::max);
    let loose = max_ratio
        .as_ref()
        .map(|r| r.mul_pow2(1).map(|r2| r2 <= kappa).unwrap_or(false))
        .unwrap_or(false);
    Ok(StabilityReport {
        q: config.q,
        kappa,
        iterations: config.iterations,
        precision: config.precision,
        seed: config.seed,
        bound_factor: factor,
        samples,
        max_violation,
        max_ratio,
        loose,
    })
}

#[derive(Clone, Debug)]
pub struct ContractionRow {
    pub c: Scalar,
    pub lhs: Scalar,
    pub rhs: Scalar,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct ContractionReport {
    /// `max |f - g| / sigma*` over the samples and their images `2^q c`;
    /// `None` when some point has `sigma* = 0` but `f != g`.
    pub nu: Option<Scalar>,
    pub non_dominated: Vec<Scalar>,
    pub rows: Vec<ContractionRow>,
}

impl ContractionReport {
    pub fn passed(&self) -> bool {
        self.nu.is_some() && self.rows.iter().all(|r| r.passed)
    }
}

/// `|P f(c) - P g(c)| <= kappa nu sigma*(c)` at each sample.
#[allow(clippy::too_many_arguments)]
pub fn contraction_check(
    family: &EquationFamily,
    f: &dyn MappingOracle,
    g: &dyn MappingOracle,
    control: &ControlFunction,
    q: Q,
    kappa: &Scalar,
    samples: &[Scalar],
    tolerance: &Tolerance,
    precision: Precision,
) -> Result<ContractionReport> {
    let mut nu = kappa.zero_like();
    let mut non_dominated = Vec::new();
    for c in samples {
        for x in [c.clone(), c.mul_pow2(q.sign())?] {
            let gap = (&f.eval(&x) - &g.eval(&x)).abs();
            let s = sigma_star(family, control, &x, precision);
            if s.is_zero() {
                if !gap.is_zero() {
                    non_dominated.push(x);
                }
            } else {
                nu = nu.max(&gap / &s);
            }
        }
    }
    if !non_dominated.is_empty() {
        return Ok(ContractionReport {
            nu: None,
            non_dominated,
            rows: Vec::new(),
        });
    }
    let rows = samples
        .iter()
        .map(|c| {
            let lhs = (&apply_p(family, f, q, c)? - &apply_p(family, g, q, c)?).abs();
            let rhs = &(kappa * &nu) * &sigma_star(family, control, c, precision);
            Ok(ContractionRow {
                passed: tolerance.admits(&lhs, &rhs),
                c: c.clone(),
                lhs,
                rhs,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ContractionReport {
        nu: Some(nu),
        non_dominated,
        rows,
    })
}

/// Distance between the `K`-th iterates of two mappings at each sample.
pub fn limit_gaps(
    family: &EquationFamily,
    f: &dyn MappingOracle,
    g: &dyn MappingOracle,
    q: Q,
    iterations: usize,
    samples: &[Scalar],
) -> Result<Vec<Scalar>> {
    samples
        .iter()
        .map(|c| {
            let a = fixed_point_iterate(family, f, q, iterations, c)?
                .pop()
                .expect("nonempty");
            let b = fixed_point_iterate(family, g, q, iterations, c)?
                .pop()
                .expect("nonempty");
            Ok((&a - &b).abs())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equation::Polynomial;
    use crate::identity::{auto_eliminate, default_instances};
    use crate::numeric::factorial;

    fn r(n: i64) -> BigRational {
        BigRational::from_integer(n.into())
    }

    fn fam() -> EquationFamily {
        EquationFamily::default()
    }

    const LISTED: [(i64, i64, u64); 15] = [
        (0, 2, 1),
        (13, 1, 1),
        (12, 1, 25),
        (11, 1, 301),
        (10, 1, 2325),
        (9, 1, 12950),
        (8, 1, 55430),
        (7, 1, 189750),
        (6, 1, 533830),
        (5, 1, 1258675),
        (4, 1, 2523675),
        (3, 1, 4350335),
        (2, 1, 6500375),
        (1, 1, 8469060),
        (0, 1, 9657700),
    ];

    #[test]
    fn sigma_terms_match_listing() {
        let terms = sigma_star_terms(&fam());
        let got: Vec<_> = terms
            .iter()
            .map(|t| (t.alpha, t.beta, t.weight.to_u64().unwrap()))
            .collect();
        assert_eq!(got, LISTED.to_vec());
        let total: u64 = LISTED.iter().map(|t| t.2).sum();
        assert_eq!(total, 33554433);
    }

    #[test]
    fn sigma_weights_are_the_elimination_weights() {
        let f = fam();
        let cert = auto_eliminate(&f, &default_instances(&f)).unwrap();
        let g = cert
            .weights
            .iter()
            .fold(BigInt::zero(), |g, w| num_integer::Integer::gcd(&g, w));
        let got: Vec<BigInt> = cert.weights.iter().map(|w| (w / &g).abs()).collect();
        let want: Vec<BigInt> = sigma_star_terms(&f).into_iter().map(|t| t.weight).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn constant_control() {
        struct Constant;
        impl ControlOracle for Constant {
            fn eval(&self, c: &Scalar, _: &Scalar) -> Scalar {
                c.lift(&BigRational::new(7.into(), 3.into()))
            }
            fn describe(&self) -> String {
                "7/3".into()
            }
        }
        let control = ControlFunction::General(Arc::new(Constant));
        let want = BigRational::new(BigInt::from(33554433) * 7, factorial(25) * 3);
        for c in [Scalar::int(0), Scalar::rational(-5, 7), Scalar::int(9)] {
            assert_eq!(
                sigma_star(&fam(), &control, &c, Precision::DEFAULT),
                Scalar::Exact(want.clone())
            );
        }
    }

    #[test]
    fn power_sum_vanishes_at_zero() {
        let control = ControlFunction::power_sum(r(3), r(2)).unwrap();
        assert!(sigma_star(&fam(), &control, &Scalar::int(0), Precision::DEFAULT).is_zero());
    }

    #[test]
    fn kappa_examples() {
        let p = Precision::DEFAULT;
        assert_eq!(
            kappa_for_power(&fam(), &r(2), Q::Plus, p).unwrap(),
            Scalar::rational(1, 1 << 23)
        );
        assert_eq!(
            kappa_for_power(&fam(), &r(26), Q::Minus, p).unwrap(),
            Scalar::rational(1, 2)
        );
        assert!(kappa_for_power(&fam(), &r(25), Q::Plus, p).is_err());
        assert!(kappa_for_power(&fam(), &r(26), Q::Plus, p).is_err());
        assert!(kappa_for_power(&fam(), &r(2), Q::Minus, p).is_err());
        let half = kappa_for_power(&fam(), &BigRational::new(49.into(), 2.into()), Q::Plus, p).unwrap();
        assert!((half.to_f64() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn product_and_mixed_constants_match_print() {
        let p = Precision::DEFAULT;
        let prod = omega0_product(&fam(), &r(1), &r(1), p).unwrap();
        assert_eq!(prod.recomputed_constant, BigInt::from(8469060));
        assert!(!prod.discrepancy);
        let mixed = omega0_mixed(&fam(), &r(1), &r(1), p).unwrap();
        assert_eq!(mixed.recomputed_constant, BigInt::from(50492552));
        assert_eq!(
            mixed.recomputed_constant,
            BigInt::from(15427672 + 3 * 8469060 + 9657700)
        );
        assert!(!mixed.discrepancy);
    }

    #[test]
    fn power_constant_differs_from_print() {
        let b = omega0_power(&fam(), &r(2), Precision::DEFAULT).unwrap();
        assert_eq!(b.recomputed_constant, BigInt::from(15427672 + 2 * 8469060 + 9657700));
        assert_eq!(b.recomputed_constant, BigInt::from(42023492));
        assert_eq!(b.printed_constant, BigInt::from(34861936));
        assert!(b.discrepancy);
        assert_eq!(b.differences.len(), 1);
        assert_eq!(b.differences[0].0, (1, 1));
        assert_eq!(b.recomputed.terms()[&(2, 1)], BigInt::from(6500376));
    }

    #[test]
    fn power_constants_agree_with_sigma_star() {
        let omega = r(5);
        for l in [1, 2, 3, 24, 30] {
            let control = ControlFunction::power_sum(omega.clone(), r(l)).unwrap();
            let b = omega0_power(&fam(), &r(l), Precision::DEFAULT).unwrap();
            assert_eq!(
                sigma_star(&fam(), &control, &Scalar::int(1), Precision::DEFAULT),
                b.omega0(&fam(), &omega)
            );
        }
    }

    #[test]
    fn bound_factor_matches_closed_form() {
        let b = omega0_power(&fam(), &r(2), Precision::DEFAULT).unwrap();
        let factor = bound_factor(&fam(), &b.kappa, Q::Plus).unwrap();
        assert_eq!(factor, Scalar::rational(1, (1 << 25) - 4));
        let k = kappa_for_power(&fam(), &r(27), Q::Minus, Precision::DEFAULT).unwrap();
        assert_eq!(
            bound_factor(&fam(), &k, Q::Minus).unwrap(),
            Scalar::rational(1, (1 << 27) - (1 << 25))
        );
    }

    #[test]
    fn iterate_examples() {
        let f = Polynomial::power(25).plus_term(r(1), 2);
        let v = fixed_point_iterate(&fam(), &f, Q::Plus, 5, &Scalar::int(1)).unwrap();
        for (k, x) in v.iter().enumerate() {
            let want = r(1) + BigRational::new(1.into(), BigInt::from(2u32).pow(23 * (k as u32 + 1)));
            assert_eq!(*x, Scalar::Exact(want));
        }
        let g = Polynomial::power(25).plus_term(r(1), 26);
        let v = fixed_point_iterate(&fam(), &g, Q::Minus, 5, &Scalar::int(1)).unwrap();
        for (k, x) in v.iter().enumerate() {
            let want = r(1) + BigRational::new(1.into(), BigInt::from(2u32).pow(k as u32 + 1));
            assert_eq!(*x, Scalar::Exact(want));
        }
        assert!(fixed_point_iterate(&fam(), &g, Q::Minus, 0, &Scalar::int(1)).is_err());
    }

    #[test]
    fn doubling_defect_examples() {
        let p = Precision::DEFAULT;
        let tol = Tolerance::exact();
        let pts = [Scalar::int(0), Scalar::rational(3, 2), Scalar::int(-7)];
        let control = ControlFunction::power_sum(r(1), r(1)).unwrap();
        let mono = Polynomial::power(25);
        assert!(check_doubling_defect(&fam(), &mono, &control, &pts, &tol, p)
            .unwrap()
            .iter()
            .all(|r| r.passed && r.defect.is_zero()));

        let eps = BigRational::new(1.into(), 1000.into());
        let f = Polynomial::power(25).plus_term(eps.clone(), 1);
        let omega = BigRational::from_integer(factorial(25)) * &eps;
        let control = ControlFunction::power_sum(omega, r(1)).unwrap();
        let rows = check_doubling_defect(&fam(), &f, &control, &pts, &tol, p).unwrap();
        for row in &rows {
            let direct = &(&row.c.abs() * &Scalar::Exact(eps.clone())) * &Scalar::int((1 << 25) - 2);
            assert_eq!(row.defect, direct);
            assert!(row.passed);
        }

        let offset = Polynomial::power(25).plus_term(r(1), 0);
        let rows = check_doubling_defect(&fam(), &offset, &control, &pts[..1], &tol, p).unwrap();
        assert!(!rows[0].passed);
    }

    #[test]
    fn omega_fit_for_power_perturbation() {
        let eps = BigRational::new(3.into(), 7.into());
        let f = Polynomial::power(25).plus_term(eps.clone(), 2);
        let pts: Vec<Scalar> = [0, 1, -2, 5].iter().map(|x| Scalar::int(*x)).collect();
        let shape = ControlFunction::power_sum(r(1), r(2)).unwrap();
        let fit = fit_omega(&fam(), &f, &shape, &pts, Precision::DEFAULT).unwrap();
        assert_eq!(fit.omega, Scalar::Exact(BigRational::from_integer(factorial(25)) * eps));
        assert_eq!(fit.pairs_checked, 16);
        let product = ControlFunction::power_product(r(1), r(1), r(1)).unwrap();
        assert!(fit_omega(&fam(), &f, &product, &pts, Precision::DEFAULT).is_err());
    }

    fn certified_example(kappa: Option<Scalar>) -> StabilityReport {
        let f = Polynomial::power(25).plus_term(r(1), 2);
        let control = ControlFunction::power_sum(BigRational::from_integer(factorial(25)), r(2)).unwrap();
        let samples = (-10..=10).map(|k| Scalar::rational(k * 3, 4)).collect();
        let mut cfg = StabilityConfig::new(Q::Plus, 20, samples);
        cfg.kappa = kappa;
        certify_stability(&fam(), &f, &control, &cfg).unwrap()
    }

    #[test]
    fn certify_power_perturbation() {
        let rep = certified_example(None);
        assert!(rep.passed());
        assert!(!rep.loose);
        assert_eq!(rep.max_ratio, Some(Scalar::rational(1, 1 << 23)));
        assert!(rep.max_violation.is_zero());
    }

    #[test]
    fn wrong_kappa_is_loose() {
        let rep = certified_example(Some(Scalar::rational(1, 2)));
        assert!(rep.samples.iter().all(|s| s.ratio_ok));
        assert!(rep.loose);
    }

    #[test]
    fn monomial_certifies_with_zero_defect() {
        let f = Polynomial::power(25);
        let control = ControlFunction::power_sum(r(1), r(3)).unwrap();
        let cfg = StabilityConfig::new(Q::Plus, 4, vec![Scalar::int(2), Scalar::rational(-1, 3)]);
        let rep = certify_stability(&fam(), &f, &control, &cfg).unwrap();
        assert!(rep.passed());
        assert!(rep.samples.iter().all(|s| s.observed.is_zero() && s.ratios.is_empty()));
    }

    #[test]
    fn bigreal_certification() {
        let f = Polynomial::power(25).plus_term(r(1), 2);
        let control = ControlFunction::power_sum(BigRational::from_integer(factorial(25)), r(2)).unwrap();
        let samples = [Scalar::rational(7, 3), Scalar::int(-4)]
            .iter()
            .map(|c| c.in_mode(crate::numeric::Mode::BigReal, Precision::DEFAULT))
            .collect();
        let cfg = StabilityConfig::new(Q::Plus, 20, samples);
        let rep = certify_stability(&fam(), &f, &control, &cfg).unwrap();
        assert!(rep.passed());
        let ratio = rep.max_ratio.unwrap().to_f64();
        assert!((ratio - 2f64.powi(-23)).abs() < 1e-6);
    }

    #[test]
    fn contraction_examples() {
        let p = Precision::DEFAULT;
        let tol = Tolerance::exact();
        let f = Polynomial::power(25).plus_term(r(1), 2);
        let g = Polynomial::power(25);
        let control = ControlFunction::power_sum(BigRational::from_integer(factorial(25)), r(2)).unwrap();
        let kappa = kappa_for_power(&fam(), &r(2), Q::Plus, p).unwrap();
        let pts: Vec<Scalar> = [1, -3, 5].iter().map(|x| Scalar::int(*x)).collect();
        let rep = contraction_check(&fam(), &f, &g, &control, Q::Plus, &kappa, &pts, &tol, p).unwrap();
        assert!(rep.passed());
        let same = contraction_check(&fam(), &f, &f, &control, Q::Plus, &kappa, &pts, &tol, p).unwrap();
        assert!(same.passed());
        assert_eq!(same.nu, Some(Scalar::int(0)));
        let shifted = Polynomial::power(25).plus_term(r(1), 0);
        let mut with_zero = pts.clone();
        with_zero.push(Scalar::int(0));
        let rep = contraction_check(&fam(), &shifted, &g, &control, Q::Plus, &kappa, &with_zero, &tol, p).unwrap();
        assert!(rep.nu.is_none());
        assert!(!rep.passed());
    }

    #[test]
    fn iterated_mapping_matches_iterates() {
        let f = Polynomial::power(25).plus_term(r(3), 4);
        let v = IteratedMapping::new(&fam(), &f, Q::Plus, 6);
        let c = Scalar::rational(-5, 3);
        let direct = fixed_point_iterate(&fam(), &f, Q::Plus, 6, &c).unwrap();
        assert_eq!(v.eval(&c), direct[5]);
    }

    #[test]
    fn two_perturbations_share_a_limit() {
        let f = Polynomial::power(25).plus_term(r(1), 2);
        let g = Polynomial::power(25).plus_term(r(-4), 3);
        let gaps = limit_gaps(&fam(), &f, &g, Q::Plus, 12, &[Scalar::int(3), Scalar::rational(1, 5)]).unwrap();
        for gap in gaps {
            assert!(gap.to_f64() < 1e-50);
        }
    }
}
