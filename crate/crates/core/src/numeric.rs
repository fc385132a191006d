//! Exact and high-precision arithmetic shared by every other module.
//!
//! Integers and rationals come from `num-bigint`/`num-rational`. [`BigReal`]
//! wraps an `astro-float` value together with the precision it was computed
//! at; binary operations always run at the larger of the two operand
//! precisions. [`Scalar`] is the value type that flows through the equation
//! and stability code: either an exact rational or a [`BigReal`].

use std::cell::RefCell;
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use astro_float::{BigFloat, Consts, Radix, RoundingMode, Sign, EXPONENT_MAX, EXPONENT_MIN};
use num_bigint::{BigInt, Sign as IntSign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type ExactInt = BigInt;
pub type ExactRational = BigRational;

const RM: RoundingMode = RoundingMode::ToEven;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("astro-float constants cache"));
}

/// `C(n, k)`, zero outside `0..=n`.
pub fn binomial(n: u32, k: i64) -> BigInt {
    if k < 0 || k > i64::from(n) {
        return BigInt::zero();
    }
    let k = k.min(i64::from(n) - k) as u32;
    let mut acc = BigInt::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

pub fn factorial(n: u32) -> BigInt {
    (2..=n).fold(BigInt::one(), |acc, i| acc * i)
}

pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    if p.is_multiple_of(2) {
        return p == 2;
    }
    let mut d = 3u64;
    while d.saturating_mul(d) <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// A validated prime, used as the residue characteristic of `|.|_p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Prime(u64);

impl Prime {
    pub fn new(p: u64) -> Result<Self> {
        if is_prime(p) {
            Ok(Prime(p))
        } else {
            Err(Error::NotPrime(p))
        }
    }

    pub fn get(self) -> u64 {
        self.0
    }
}

impl fmt::Display for Prime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

fn int_valuation(n: &BigInt, p: u64) -> i64 {
    debug_assert!(!n.is_zero());
    let p = BigInt::from(p);
    let mut m = n.abs();
    let mut v = 0;
    loop {
        let (q, r) = m.div_rem(&p);
        if !r.is_zero() {
            return v;
        }
        m = q;
        v += 1;
    }
}

/// `v_p(x)`, or `None` for `x = 0`.
pub fn padic_valuation(x: &BigRational, p: Prime) -> Option<i64> {
    if x.is_zero() {
        return None;
    }
    Some(int_valuation(x.numer(), p.0) - int_valuation(x.denom(), p.0))
}

/// `|x|_p = p^(-v_p(x))`, exactly; `|0|_p = 0`.
pub fn padic_abs(x: &BigRational, p: u64) -> Result<BigRational> {
    let p = Prime::new(p)?;
    Ok(padic_abs_prime(x, p))
}

pub fn padic_abs_prime(x: &BigRational, p: Prime) -> BigRational {
    match padic_valuation(x, p) {
        None => BigRational::zero(),
        Some(v) => {
            let base = BigInt::from(p.0).pow(v.unsigned_abs() as u32);
            if v >= 0 {
                BigRational::new(BigInt::one(), base)
            } else {
                BigRational::from_integer(base)
            }
        }
    }
}

/// Parses `"3"`, `"-7/2"` or a plain decimal such as `"2.5"` into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational number: {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((int_part, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let negative = int_part.starts_with('-');
        let digits = format!("{}{}", int_part.trim_start_matches(['-', '+']), frac);
        let mut n: BigInt = digits.parse().map_err(|_| bad())?;
        if negative {
            n = -n;
        }
        let d = BigInt::from(10u32).pow(frac.len() as u32);
        return Ok(BigRational::new(n, d));
    }
    let n: BigInt = s.parse().map_err(|_| bad())?;
    Ok(BigRational::from_integer(n))
}

pub fn rational_to_string(x: &BigRational) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Working precision in bits; never below 64.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Precision(usize);

impl Precision {
    pub const DEFAULT: Precision = Precision(256);

    pub fn new(bits: usize) -> Result<Self> {
        if bits < 64 {
            Err(Error::Precision(bits))
        } else {
            Ok(Precision(bits))
        }
    }

    pub fn bits(self) -> usize {
        self.0
    }
}

impl Default for Precision {
    fn default() -> Self {
        Precision::DEFAULT
    }
}

/// Binary floating-point value with round-to-nearest-even at a recorded precision.
#[derive(Clone, Debug)]
pub struct BigReal {
    value: BigFloat,
    precision: Precision,
}

fn int_to_bigfloat(n: &BigInt) -> BigFloat {
    let (sign, digits) = n.to_u64_digits();
    if digits.is_empty() {
        return BigFloat::from_word(0, 64);
    }
    let sign = if sign == IntSign::Minus { Sign::Neg } else { Sign::Pos };
    BigFloat::from_words(&digits, sign, (digits.len() * 64) as i32)
}

impl BigReal {
    fn wrap(value: BigFloat, precision: Precision) -> Self {
        BigReal { value, precision }
    }

    pub fn zero(precision: Precision) -> Self {
        Self::wrap(BigFloat::from_word(0, precision.0), precision)
    }

    pub fn from_int(n: &BigInt, precision: Precision) -> Self {
        let mut v = int_to_bigfloat(n);
        v.set_precision(precision.0, RM).expect("set precision");
        Self::wrap(v, precision)
    }

    /// Rounds `x` once, after an exact division of its numerator by its denominator.
    pub fn from_rational(x: &BigRational, precision: Precision) -> Self {
        if x.denom().is_one() {
            return Self::from_int(x.numer(), precision);
        }
        let n = int_to_bigfloat(x.numer());
        let d = int_to_bigfloat(x.denom());
        Self::wrap(n.div(&d, precision.0, RM), precision)
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn is_zero(&self) -> bool {
        self.value.is_zero()
    }

    pub fn is_finite(&self) -> bool {
        !self.value.is_nan() && !self.value.is_inf()
    }

    pub fn is_negative(&self) -> bool {
        self.value.is_negative() && !self.value.is_zero()
    }

    pub fn abs(&self) -> Self {
        Self::wrap(self.value.abs(), self.precision)
    }

    fn joint(&self, other: &Self) -> Precision {
        self.precision.max(other.precision)
    }

    /// Multiplies by `2^k` without rounding.
    pub fn mul_pow2(&self, k: i64) -> Result<Self> {
        if self.value.is_zero() || k == 0 {
            return Ok(self.clone());
        }
        let e = i64::from(self.value.exponent().expect("finite value"));
        let target = e + k;
        if target > i64::from(EXPONENT_MAX) || target < i64::from(EXPONENT_MIN) {
            return Err(Error::Overflow(k));
        }
        let mut v = self.value.clone();
        v.set_exponent(target as i32);
        Ok(Self::wrap(v, self.precision))
    }

    pub fn powi(&self, n: u32) -> Self {
        Self::wrap(self.value.powi(n as usize, self.precision.0, RM), self.precision)
    }

    /// `self^e` for a nonnegative base; `0^0 = 1`.
    pub fn pow_rational(&self, e: &BigRational) -> Self {
        let p = self.precision;
        if e.is_integer() {
            let k = e.numer().to_i64().expect("exponent fits in i64");
            let r = self.powi(k.unsigned_abs() as u32);
            return if k < 0 {
                &BigReal::from_int(&BigInt::one(), p) / &r
            } else {
                r
            };
        }
        if self.is_zero() {
            return if e.is_positive() {
                self.clone()
            } else {
                BigReal::from_int(&BigInt::one(), p)
            };
        }
        assert!(!self.is_negative(), "fractional power of a negative value");
        // x = m * 2^k exactly, so x^num = m^num * 2^(k*num) exactly; then an
        // integer root with 64 guard bits and a single final rounding.
        let num = e.numer().to_i64().expect("exponent numerator fits in i64");
        let den = e.denom().to_u32().expect("exponent denominator fits in u32");
        let x = self.to_rational();
        let (mut m, mut k) = if x.is_integer() {
            (x.numer().clone(), 0i64)
        } else {
            (x.numer().clone(), -(x.denom().bits() as i64 - 1))
        };
        m = m.pow(num.unsigned_abs() as u32);
        k *= num.unsigned_abs() as i64;
        let want = (p.0 as u64 + 64) * u64::from(den);
        let mut shift = want.saturating_sub(m.bits()) as i64;
        shift += (k - shift).rem_euclid(i64::from(den));
        let root = num_integer::Roots::nth_root(&(m << shift as usize), den);
        let mut r = int_to_bigfloat(&root);
        r.set_exponent(r.exponent().expect("nonzero root") + ((k - shift) / i64::from(den)) as i32);
        let r = Self::wrap(r.add(&BigFloat::from_word(0, 64), p.0, RM), p);
        if num < 0 {
            &BigReal::from_int(&BigInt::one(), p) / &r
        } else {
            r
        }
    }

    /// The exact value held, as a rational.
    pub fn to_rational(&self) -> BigRational {
        match self.value.as_raw_parts() {
            None => BigRational::zero(),
            Some((words, _, sign, exponent, _)) => {
                let mut m = BigInt::from_slice(
                    IntSign::Plus,
                    &words
                        .iter()
                        .flat_map(|w| [*w as u32, (*w >> 32) as u32])
                        .collect::<Vec<_>>(),
                );
                if m.is_zero() {
                    return BigRational::zero();
                }
                if sign == Sign::Neg {
                    m = -m;
                }
                let shift = i64::from(exponent) - (words.len() as i64) * 64;
                let two = BigInt::from(2u32);
                if shift >= 0 {
                    BigRational::from_integer(m * two.pow(shift as u32))
                } else {
                    BigRational::new(m, two.pow(shift.unsigned_abs() as u32))
                }
            }
        }
    }

    /// `(odd mantissa in hex, binary exponent)` with `value = mantissa * 2^exponent`.
    pub fn hex_parts(&self) -> (String, i64) {
        let q = self.to_rational();
        if q.is_zero() {
            return ("0x0".into(), 0);
        }
        let (mut m, mut e) = if q.is_integer() {
            (q.numer().clone(), 0i64)
        } else {
            let bits = q.denom().bits() as i64 - 1;
            (q.numer().clone(), -bits)
        };
        while m.is_even() {
            m >>= 1;
            e += 1;
        }
        let sign = if m.is_negative() { "-" } else { "" };
        (format!("{sign}0x{:x}", m.abs()), e)
    }

    pub fn to_decimal_string(&self) -> String {
        if self.value.is_zero() {
            return "0".into();
        }
        CONSTS
            .with(|cc| self.value.format(Radix::Dec, RM, &mut cc.borrow_mut()))
            .unwrap_or_else(|_| self.value.to_string())
    }

    pub fn to_f64(&self) -> f64 {
        self.to_decimal_string().parse().unwrap_or(f64::NAN)
    }
}

impl fmt::Display for BigReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal_string())
    }
}

impl PartialEq for BigReal {
    fn eq(&self, other: &Self) -> bool {
        self.partial_cmp(other) == Some(Ordering::Equal)
    }
}

impl PartialOrd for BigReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.value.cmp(&other.value).map(|c| c.cmp(&0))
    }
}

macro_rules! real_binop {
    ($tr:ident, $method:ident) => {
        impl $tr<&BigReal> for &BigReal {
            type Output = BigReal;
            fn $method(self, rhs: &BigReal) -> BigReal {
                let p = self.joint(rhs);
                BigReal::wrap(self.value.$method(&rhs.value, p.0, RM), p)
            }
        }
    };
}
real_binop!(Add, add);
real_binop!(Sub, sub);
real_binop!(Mul, mul);
real_binop!(Div, div);

impl Neg for &BigReal {
    type Output = BigReal;
    fn neg(self) -> BigReal {
        BigReal::wrap(BigFloat::neg(&self.value), self.precision)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Exact,
    BigReal,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::BigReal => "bigreal",
        }
    }
}

/// A point or value: an exact rational or a [`BigReal`].
#[derive(Clone, Debug)]
pub enum Scalar {
    Exact(BigRational),
    Real(BigReal),
}

impl Scalar {
    pub fn int(n: i64) -> Self {
        Scalar::Exact(BigRational::from_integer(n.into()))
    }

    pub fn rational(n: i64, d: i64) -> Self {
        Scalar::Exact(BigRational::new(n.into(), d.into()))
    }

    pub fn mode(&self) -> Mode {
        match self {
            Scalar::Exact(_) => Mode::Exact,
            Scalar::Real(_) => Mode::BigReal,
        }
    }

    pub fn precision(&self) -> Option<Precision> {
        match self {
            Scalar::Exact(_) => None,
            Scalar::Real(r) => Some(r.precision()),
        }
    }

    /// Embeds an exact rational in the same mode (and precision) as `self`.
    pub fn lift(&self, x: &BigRational) -> Scalar {
        match self {
            Scalar::Exact(_) => Scalar::Exact(x.clone()),
            Scalar::Real(r) => Scalar::Real(BigReal::from_rational(x, r.precision())),
        }
    }

    pub fn lift_int(&self, n: &BigInt) -> Scalar {
        self.lift(&BigRational::from_integer(n.clone()))
    }

    pub fn zero_like(&self) -> Scalar {
        self.lift(&BigRational::zero())
    }

    pub fn in_mode(&self, mode: Mode, precision: Precision) -> Scalar {
        match (self, mode) {
            (Scalar::Exact(q), Mode::BigReal) => Scalar::Real(BigReal::from_rational(q, precision)),
            _ => self.clone(),
        }
    }

    pub fn to_real(&self, precision: Precision) -> BigReal {
        match self {
            Scalar::Exact(q) => BigReal::from_rational(q, precision),
            Scalar::Real(r) => r.clone(),
        }
    }

    pub fn as_exact(&self) -> Option<&BigRational> {
        match self {
            Scalar::Exact(q) => Some(q),
            Scalar::Real(_) => None,
        }
    }

    pub fn to_rational(&self) -> BigRational {
        match self {
            Scalar::Exact(q) => q.clone(),
            Scalar::Real(r) => r.to_rational(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Exact(q) => q.is_zero(),
            Scalar::Real(r) => r.is_zero(),
        }
    }

    pub fn is_negative(&self) -> bool {
        match self {
            Scalar::Exact(q) => q.is_negative(),
            Scalar::Real(r) => r.is_negative(),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Scalar::Exact(_) => true,
            Scalar::Real(r) => r.is_finite(),
        }
    }

    pub fn abs(&self) -> Scalar {
        match self {
            Scalar::Exact(q) => Scalar::Exact(q.abs()),
            Scalar::Real(r) => Scalar::Real(r.abs()),
        }
    }

    pub fn powi(&self, n: u32) -> Scalar {
        match self {
            Scalar::Exact(q) => Scalar::Exact(num_traits::pow(q.clone(), n as usize)),
            Scalar::Real(r) => Scalar::Real(r.powi(n)),
        }
    }

    /// `|self|^e`. Stays exact for exact values and integral `e >= 0`;
    /// otherwise switches to a [`BigReal`] at `precision`. `0^0 = 1`.
    pub fn abs_pow(&self, e: &BigRational, precision: Precision) -> Scalar {
        let base = self.abs();
        match &base {
            Scalar::Exact(q) if e.is_integer() && !e.is_negative() => {
                let k = e.numer().to_u32().expect("exponent fits in u32");
                Scalar::Exact(num_traits::pow(q.clone(), k as usize))
            }
            _ => Scalar::Real(base.to_real(precision).pow_rational(e)),
        }
    }

    /// Multiplies by `2^k`, exactly in both modes.
    pub fn mul_pow2(&self, k: i64) -> Result<Scalar> {
        match self {
            Scalar::Exact(q) => {
                let p = BigInt::from(2u32).pow(k.unsigned_abs() as u32);
                Ok(Scalar::Exact(if k >= 0 {
                    q * BigRational::from_integer(p)
                } else {
                    q / BigRational::from_integer(p)
                }))
            }
            Scalar::Real(r) => r.mul_pow2(k).map(Scalar::Real),
        }
    }

    pub fn to_decimal_string(&self) -> String {
        match self {
            Scalar::Exact(q) => rational_to_string(q),
            Scalar::Real(r) => r.to_decimal_string(),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::Exact(q) => q.to_f64().unwrap_or(f64::NAN),
            Scalar::Real(r) => r.to_f64(),
        }
    }

    pub fn max(self, other: Scalar) -> Scalar {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl From<BigRational> for Scalar {
    fn from(q: BigRational) -> Self {
        Scalar::Exact(q)
    }
}

impl From<BigReal> for Scalar {
    fn from(r: BigReal) -> Self {
        Scalar::Real(r)
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal_string())
    }
}

impl PartialEq for Scalar {
    fn eq(&self, other: &Self) -> bool {
        self.partial_cmp(other) == Some(Ordering::Equal)
    }
}

impl PartialOrd for Scalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Some(a.cmp(b)),
            (Scalar::Real(a), Scalar::Real(b)) => a.partial_cmp(b),
            (Scalar::Exact(a), Scalar::Real(b)) => Some(a.cmp(&b.to_rational())),
            (Scalar::Real(a), Scalar::Exact(b)) => Some(a.to_rational().cmp(b)),
        }
    }
}

macro_rules! scalar_binop {
    ($tr:ident, $method:ident) => {
        impl $tr<&Scalar> for &Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &Scalar) -> Scalar {
                match (self, rhs) {
                    (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a.$method(b)),
                    (Scalar::Real(a), Scalar::Real(b)) => Scalar::Real(a.$method(b)),
                    (Scalar::Exact(a), Scalar::Real(b)) => {
                        Scalar::Real(BigReal::from_rational(a, b.precision()).$method(b))
                    }
                    (Scalar::Real(a), Scalar::Exact(b)) => {
                        Scalar::Real(a.$method(&BigReal::from_rational(b, a.precision())))
                    }
                }
            }
        }
    };
}
scalar_binop!(Add, add);
scalar_binop!(Sub, sub);
scalar_binop!(Mul, mul);
scalar_binop!(Div, div);

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        match self {
            Scalar::Exact(q) => Scalar::Exact(-q),
            Scalar::Real(r) => Scalar::Real(-r),
        }
    }
}

/// Result of a compensated sum: the value and `sum |term|`.
#[derive(Clone, Debug)]
pub struct CompensatedSum {
    pub value: Scalar,
    pub magnitude: Scalar,
}

impl CompensatedSum {
    /// `sum |term| / |value|`, or `None` when the sum vanishes.
    pub fn condition(&self) -> Option<Scalar> {
        if self.value.is_zero() {
            None
        } else {
            Some(&self.magnitude / &self.value.abs())
        }
    }
}

/// Neumaier summation in bigreal mode, plain exact summation otherwise.
pub fn compensated_sum(terms: &[Scalar]) -> CompensatedSum {
    let first = terms.first().expect("non-empty sum");
    let mut sum = first.zero_like();
    let mut comp = first.zero_like();
    let mut magnitude = first.zero_like();
    for t in terms {
        magnitude = &magnitude + &t.abs();
        match (&sum, t) {
            (Scalar::Exact(_), _) | (_, Scalar::Exact(_)) => sum = &sum + t,
            _ => {
                let next = &sum + t;
                if sum.abs() >= t.abs() {
                    comp = &comp + &(&(&sum - &next) + t);
                } else {
                    comp = &comp + &(&(t - &next) + &sum);
                }
                sum = next;
            }
        }
    }
    CompensatedSum {
        value: &sum + &comp,
        magnitude,
    }
}

/// Seeded source of random rationals. Same seed, same sequence.
#[derive(Clone, Debug)]
pub struct RationalSampler {
    rng: ChaCha8Rng,
    seed: u64,
}

impl RationalSampler {
    pub const BOUND: i64 = 99;

    pub fn new(seed: u64) -> Self {
        RationalSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Numerator in `[-99, 99]`, denominator in `[-99, 99] \ {0}`.
    pub fn rational(&mut self) -> BigRational {
        let n = self.rng.gen_range(-Self::BOUND..=Self::BOUND);
        let mut d = 0;
        while d == 0 {
            d = self.rng.gen_range(-Self::BOUND..=Self::BOUND);
        }
        BigRational::new(n.into(), d.into())
    }

    /// Rational in `[lo, hi]` with denominator in `1..=99`.
    pub fn rational_in(&mut self, lo: i64, hi: i64) -> BigRational {
        let d = self.rng.gen_range(1..=Self::BOUND);
        let n = self.rng.gen_range(lo * d..=hi * d);
        BigRational::new(n.into(), d.into())
    }

    pub fn nonzero_rational(&mut self) -> BigRational {
        loop {
            let q = self.rational();
            if !q.is_zero() {
                return q;
            }
        }
    }

    pub fn index(&mut self, upper: usize) -> usize {
        self.rng.gen_range(0..upper)
    }

    pub fn pairs(&mut self, count: usize) -> Vec<(BigRational, BigRational)> {
        (0..count).map(|_| (self.rational(), self.rational())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(25, 2), BigInt::from(300));
        assert_eq!(binomial(25, 13), BigInt::from(5200300));
        assert_eq!(binomial(25, 26), BigInt::zero());
        assert_eq!(binomial(25, -1), BigInt::zero());
        assert_eq!(binomial(0, 0), BigInt::one());
    }

    #[test]
    fn pascal_rule_exhaustive() {
        for n in 1..=30u32 {
            for k in 1..i64::from(n) {
                assert_eq!(
                    binomial(n, k),
                    binomial(n - 1, k - 1) + binomial(n - 1, k),
                    "n={n} k={k}"
                );
            }
        }
    }

    #[test]
    fn factorial_values() {
        assert_eq!(factorial(0), BigInt::one());
        assert_eq!(factorial(5), BigInt::from(120));
        let by_hand = (1..=25u64).map(BigInt::from).product::<BigInt>();
        assert_eq!(factorial(25), by_hand);
        assert_eq!(factorial(25).to_string(), "15511210043330985984000000");
    }

    #[test]
    fn padic_examples() {
        assert_eq!(padic_abs(&q(32, 1), 2).unwrap(), q(1, 32));
        assert_eq!(padic_abs(&q(3, 4), 2).unwrap(), q(4, 1));
        let f25 = BigRational::from_integer(factorial(25));
        assert_eq!(padic_abs(&f25, 29).unwrap(), q(1, 1));
        assert_eq!(padic_abs(&q(0, 1), 3).unwrap(), q(0, 1));
        assert_eq!(padic_abs(&q(5, 1), 4), Err(Error::NotPrime(4)));
        assert_eq!(padic_abs(&q(5, 1), 1), Err(Error::NotPrime(1)));
    }

    #[test]
    fn legendre_valuation_of_25_factorial() {
        let f25 = BigRational::from_integer(factorial(25));
        // 12 + 6 + 3 + 1
        assert_eq!(padic_valuation(&f25, Prime::new(2).unwrap()), Some(22));
        assert_eq!(padic_valuation(&f25, Prime::new(5).unwrap()), Some(6));
    }

    #[test]
    fn parse_forms() {
        assert_eq!(parse_rational("1/1000").unwrap(), q(1, 1000));
        assert_eq!(parse_rational("-2.5").unwrap(), q(-5, 2));
        assert_eq!(parse_rational("26").unwrap(), q(26, 1));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
    }

    #[test]
    fn bigreal_round_trip_and_hex() {
        let p = Precision::DEFAULT;
        let x = BigReal::from_rational(&q(3, 8), p);
        assert_eq!(x.to_rational(), q(3, 8));
        assert_eq!(x.hex_parts(), ("0x3".to_string(), -3));
        let big = BigReal::from_int(&factorial(25), p);
        assert_eq!(big.to_rational(), BigRational::from_integer(factorial(25)));
        assert_eq!(BigReal::zero(p).hex_parts(), ("0x0".to_string(), 0));
    }

    #[test]
    fn bigreal_third_is_correctly_rounded() {
        let p = Precision::new(128).unwrap();
        let third = BigReal::from_rational(&q(1, 3), p).to_rational();
        let err = (third - q(1, 3)).abs();
        let ulp = BigRational::new(BigInt::one(), BigInt::from(2u32).pow(129));
        assert!(err <= ulp);
    }

    #[test]
    fn pow_rational_matches_integer_power() {
        let p = Precision::DEFAULT;
        let two = BigReal::from_int(&BigInt::from(2), p);
        let k = two.pow_rational(&q(-23, 1));
        assert_eq!(k.to_rational(), q(1, 1 << 23));
        let root = BigReal::from_int(&BigInt::from(4), p).pow_rational(&q(1, 2));
        assert_eq!(root.to_rational(), q(2, 1));
        // 10^(5/2) = 316.2277660168379332...
        let r = BigReal::from_int(&BigInt::from(10), p).pow_rational(&q(5, 2));
        let sq = &r * &r;
        let err = (sq.to_rational() - q(100_000, 1)).abs();
        assert!(err < q(1, 1_000_000_000_000_000_000));
        let inv = BigReal::from_rational(&q(1, 8), p).pow_rational(&q(-2, 3));
        assert_eq!(inv.to_rational(), q(4, 1));
    }

    #[test]
    fn mul_pow2_is_exact() {
        let p = Precision::DEFAULT;
        let x = BigReal::from_rational(&q(5, 7), p);
        let y = x.mul_pow2(500).unwrap().mul_pow2(-500).unwrap();
        assert_eq!(x, y);
        assert!(x.mul_pow2(i64::from(i32::MAX) * 2).is_err());
    }

    #[test]
    fn precision_floor() {
        assert!(Precision::new(63).is_err());
        assert!(Precision::new(64).is_ok());
    }

    #[test]
    fn compensated_sum_recovers_cancellation() {
        let p = Precision::new(64).unwrap();
        let big = Scalar::Real(BigReal::from_int(&BigInt::from(2u32).pow(80), p));
        let one = Scalar::Real(BigReal::from_int(&BigInt::one(), p));
        let s = compensated_sum(&[big.clone(), one.clone(), -&big]);
        assert_eq!(s.value.to_rational(), q(1, 1));
        assert!(s.condition().is_some());
    }

    #[test]
    fn sampler_is_deterministic() {
        let a: Vec<_> = {
            let mut s = RationalSampler::new(7);
            (0..10).map(|_| s.rational()).collect()
        };
        let mut s = RationalSampler::new(7);
        let b: Vec<_> = (0..10).map(|_| s.rational()).collect();
        assert_eq!(a, b);
        let mut s = RationalSampler::new(1);
        for _ in 0..100 {
            let x = s.rational_in(-10, 10);
            assert!(x >= q(-10, 1) && x <= q(10, 1));
        }
    }
}
