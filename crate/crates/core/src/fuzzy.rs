//! Non-Archimedean fuzzy norms over exact rationals.
//!
//! Membership values are exact rationals in `[0, 1]`. The carrier field is
//! `Q` with a p-adic absolute value; the control space may use the real one.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;

use crate::equation::{EquationFamily, MappingOracle};
use crate::error::{Error, Result};
use crate::matrix::MatrixOfPoints;
use crate::numeric::{padic_abs_prime, Prime, RationalSampler, Scalar};
use crate::stability::{fixed_point_iterate, sigma_star_terms, Q};

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(n.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AbsoluteValue {
    PAdic(Prime),
    Real,
}

impl AbsoluteValue {
    pub fn apply(self, x: &BigRational) -> BigRational {
        match self {
            AbsoluteValue::PAdic(p) => padic_abs_prime(x, p),
            AbsoluteValue::Real => x.abs(),
        }
    }

    pub fn is_non_archimedean(self) -> bool {
        matches!(self, AbsoluteValue::PAdic(_))
    }
}

impl fmt::Display for AbsoluteValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AbsoluteValue::PAdic(p) => write!(f, "|.|_{p}"),
            AbsoluteValue::Real => f.write_str("|.|"),
        }
    }
}

/// `N(x, t)` for `t > 0`.
pub trait FuzzyNorm: Send + Sync {
    fn membership(&self, x: &BigRational, t: &BigRational) -> BigRational;

    /// The absolute value of the scalar field acting on this space.
    fn field_abs(&self) -> AbsoluteValue;

    /// `N_n([x_rs], t)`. The default is the equal split `min N(x_rs, t/n^2)`.
    fn matrix_membership(&self, entries: &[BigRational], t: &BigRational) -> BigRational {
        let share = t / rat(entries.len() as i64);
        entries
            .iter()
            .map(|x| self.membership(x, &share))
            .min()
            .unwrap_or_else(BigRational::one)
    }

    fn describe(&self) -> String;
}

/// `N(x, t) = t / (t + |x|)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StandardFuzzyNorm {
    pub abs: AbsoluteValue,
}

impl StandardFuzzyNorm {
    pub fn padic(p: Prime) -> Self {
        StandardFuzzyNorm {
            abs: AbsoluteValue::PAdic(p),
        }
    }

    pub fn real() -> Self {
        StandardFuzzyNorm {
            abs: AbsoluteValue::Real,
        }
    }
}

impl FuzzyNorm for StandardFuzzyNorm {
    fn membership(&self, x: &BigRational, t: &BigRational) -> BigRational {
        t / (t + self.abs.apply(x))
    }

    fn field_abs(&self) -> AbsoluteValue {
        self.abs
    }

    /// Supremum over splits `t = sum t_rs` of `min N(x_rs, t_rs)`, which is
    /// `t / (t + sum |x_rs|)`.
    fn matrix_membership(&self, entries: &[BigRational], t: &BigRational) -> BigRational {
        let total = entries.iter().fold(BigRational::zero(), |a, x| a + self.abs.apply(x));
        t / (t + total)
    }

    fn describe(&self) -> String {
        format!("t/(t+{})", self.abs)
    }
}

/// Outcome of one pointwise inequality over a grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridCheck {
    pub name: String,
    pub checked: usize,
    pub failures: Vec<GridFailure>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridFailure {
    pub point: String,
    pub lhs: BigRational,
    pub rhs: BigRational,
}

const MAX_RECORDED_FAILURES: usize = 20;

impl GridCheck {
    fn new(name: &str) -> Self {
        GridCheck {
            name: name.to_string(),
            checked: 0,
            failures: Vec::new(),
        }
    }

    fn record(&mut self, ok: bool, point: impl FnOnce() -> String, lhs: &BigRational, rhs: &BigRational) {
        self.checked += 1;
        if !ok && self.failures.len() < MAX_RECORDED_FAILURES {
            self.failures.push(GridFailure {
                point: point(),
                lhs: lhs.clone(),
                rhs: rhs.clone(),
            });
        }
    }

    fn merge(&mut self, other: GridCheck) {
        self.checked += other.checked;
        let room = MAX_RECORDED_FAILURES.saturating_sub(self.failures.len());
        self.failures.extend(other.failures.into_iter().take(room));
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// `(x, t)` grid: `xs[0] = 0`, other points carry assorted p-adic valuations.
#[derive(Clone, Debug)]
pub struct FuzzyGrid {
    pub xs: Vec<BigRational>,
    pub ts: Vec<BigRational>,
    pub lambdas: Vec<BigRational>,
}

impl FuzzyGrid {
    pub fn random(seed: u64, size: usize, p: Prime) -> Self {
        let mut sampler = RationalSampler::new(seed);
        let scaled = |sampler: &mut RationalSampler| {
            let k = sampler.index(5) as i32 - 2;
            let pk = BigRational::from_integer(BigInt::from(p.get())).pow(k);
            sampler.nonzero_rational() * pk
        };
        let xs = std::iter::once(BigRational::zero())
            .chain((1..size).map(|_| scaled(&mut sampler)))
            .collect();
        let mut ts = std::collections::BTreeSet::new();
        while ts.len() < size {
            ts.insert(scaled(&mut sampler).abs());
        }
        let ts: Vec<BigRational> = ts.into_iter().collect();
        let lambdas = std::iter::once(BigRational::one())
            .chain((1..size).map(|_| scaled(&mut sampler)))
            .collect();
        FuzzyGrid { xs, ts, lambdas }
    }
}

/// Checks the five fuzzy-norm axioms on the grid, in order: monotone in
/// `t`, `N(0,t) = 1`, homogeneity, strong triangle, limit 1 at infinity.
pub fn fuzzy_axiom_check(norm: &dyn FuzzyNorm, grid: &FuzzyGrid) -> Vec<GridCheck> {
    let abs = norm.field_abs();
    let mut ts = grid.ts.clone();
    ts.sort();

    let mut monotone = GridCheck::new("nondecreasing in t");
    for x in &grid.xs {
        for w in ts.windows(2) {
            let (a, b) = (norm.membership(x, &w[0]), norm.membership(x, &w[1]));
            monotone.record(a <= b, || format!("x={x}, t={}..{}", w[0], w[1]), &a, &b);
        }
    }

    let mut zero = GridCheck::new("N(0,t) = 1");
    for t in &ts {
        let v = norm.membership(&BigRational::zero(), t);
        zero.record(v.is_one(), || format!("t={t}"), &v, &BigRational::one());
    }

    let mut homogeneous = GridCheck::new("N(lx,t) = N(x,t/|l|)");
    for l in grid.lambdas.iter().filter(|l| !l.is_zero()) {
        let la = abs.apply(l);
        for x in &grid.xs {
            for t in &ts {
                let (a, b) = (norm.membership(&(l * x), t), norm.membership(x, &(t / &la)));
                homogeneous.record(a == b, || format!("l={l}, x={x}, t={t}"), &a, &b);
            }
        }
    }

    let triangle = grid
        .xs
        .par_iter()
        .map(|x| {
            let mut part = GridCheck::new("strong triangle");
            for y in &grid.xs {
                let sum = x + y;
                for s in &ts {
                    let ns = norm.membership(x, s);
                    for t in &ts {
                        let lhs = norm.membership(&sum, s.max(t));
                        let rhs = (&ns).min(&norm.membership(y, t)).clone();
                        part.record(lhs >= rhs, || format!("x={x}, y={y}, s={s}, t={t}"), &lhs, &rhs);
                    }
                }
            }
            part
        })
        .reduce(
            || GridCheck::new("strong triangle"),
            |mut a, b| {
                a.merge(b);
                a
            },
        );

    let mut limit = GridCheck::new("N(x,t) -> 1");
    let epsilon = BigRational::new(BigInt::one(), BigInt::from(10u32).pow(9));
    for x in &grid.xs {
        let scale = abs.apply(x).max(BigRational::one());
        let far: Vec<BigRational> = (3..=12)
            .map(|k| &scale * BigRational::from_integer(BigInt::from(10u32).pow(k)))
            .collect();
        let values: Vec<BigRational> = far.iter().map(|t| norm.membership(x, t)).collect();
        let nondecreasing = values.windows(2).all(|w| w[0] <= w[1]);
        let gap = BigRational::one() - values.last().expect("nonempty");
        limit.record(nondecreasing && gap <= epsilon, || format!("x={x}"), &gap, &epsilon);
    }

    vec![monotone, zero, homogeneous, triangle, limit]
}

/// A control `sigma : X^2 -> Z` with exact values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FuzzyControl {
    Zero,
    Constant(BigRational),
    /// `theta |d|_p^m`
    PAdicPower {
        theta: BigRational,
        m: u32,
        p: Prime,
    },
}

impl FuzzyControl {
    pub fn eval(&self, _c: &BigRational, d: &BigRational) -> BigRational {
        match self {
            FuzzyControl::Zero => BigRational::zero(),
            FuzzyControl::Constant(theta) => theta.clone(),
            FuzzyControl::PAdicPower { theta, m, p } => theta * padic_abs_prime(d, *p).pow(*m as i32),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            FuzzyControl::Zero => "0".into(),
            FuzzyControl::Constant(t) => format!("{t}"),
            FuzzyControl::PAdicPower { theta, m, p } => format!("{theta}*|d|_{p}^{m}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GammaEntry {
    pub alpha: i64,
    pub beta: i64,
    pub divisor: BigInt,
}

/// The fifteen `(sigma(alpha x, beta x), divisor)` entries of `Gamma`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GammaSpec {
    pub entries: Vec<GammaEntry>,
    pub scale: BigInt,
}

impl GammaSpec {
    pub fn new(family: &EquationFamily) -> Self {
        GammaSpec {
            entries: sigma_star_terms(family)
                .into_iter()
                .map(|t| GammaEntry {
                    alpha: t.alpha,
                    beta: t.beta,
                    divisor: t.weight,
                })
                .collect(),
            scale: family.rhs_factor().clone(),
        }
    }

    /// `|n!|_p t / |divisor|_p` for each entry.
    pub fn time_arguments(&self, p: Prime, t: &BigRational) -> Vec<BigRational> {
        let scale = padic_abs_prime(&BigRational::from_integer(self.scale.clone()), p);
        self.entries
            .iter()
            .map(|e| &scale * t / padic_abs_prime(&BigRational::from_integer(e.divisor.clone()), p))
            .collect()
    }

    /// `(divisor, p divides it)` for each entry, by direct remainder.
    pub fn divisibility(&self, p: Prime) -> Vec<(BigInt, bool)> {
        let p = BigInt::from(p.get());
        self.entries
            .iter()
            .map(|e| (e.divisor.clone(), e.divisor.is_multiple_of(&p)))
            .collect()
    }
}

/// `min_i N'(sigma(alpha_i x, beta_i x), |n!|_p t / |divisor_i|_p)`.
pub fn gamma(
    spec: &GammaSpec,
    norm: &dyn FuzzyNorm,
    sigma: &FuzzyControl,
    x: &BigRational,
    t: &BigRational,
    p: Prime,
) -> Result<BigRational> {
    if !t.is_positive() {
        return Err(Error::Precondition(format!("t must be positive, got {t}")));
    }
    Ok(spec
        .entries
        .iter()
        .zip(spec.time_arguments(p, t))
        .map(|(e, time)| {
            let value = sigma.eval(&(x * rat(e.alpha)), &(x * rat(e.beta)));
            norm.membership(&value, &time)
        })
        .min()
        .expect("fifteen entries"))
}

/// `N'(sigma(2^q c, 2^q d), t) >= N'(sigma(c, d), kappa^(-q) t)`.
pub fn check_control_scaling(
    sigma: &FuzzyControl,
    norm: &dyn FuzzyNorm,
    kappa: &BigRational,
    q: Q,
    points: &[BigRational],
    ts: &[BigRational],
) -> Result<GridCheck> {
    if !kappa.is_positive() {
        return Err(Error::Precondition(format!("kappa must be positive, got {kappa}")));
    }
    let two_q = rat(2).pow(q.sign() as i32);
    let kappa_neg_q = kappa.pow(-q.sign() as i32);
    let mut check = GridCheck::new("control scaling");
    for c in points {
        for d in points {
            let scaled = sigma.eval(&(c * &two_q), &(d * &two_q));
            let plain = sigma.eval(c, d);
            for t in ts {
                let lhs = norm.membership(&scaled, t);
                let rhs = norm.membership(&plain, &(&kappa_neg_q * t));
                check.record(lhs >= rhs, || format!("c={c}, d={d}, t={t}"), &lhs, &rhs);
            }
        }
    }
    Ok(check)
}

#[derive(Clone, Debug)]
pub struct FuzzyIterates {
    pub values: Vec<BigRational>,
    /// `|V_k - V_{k-1}|_p`, with `V_0 = f(c)`.
    pub padic_steps: Vec<BigRational>,
    /// `|V_k - V_{k-1}|`.
    pub real_steps: Vec<BigRational>,
}

pub fn fuzzy_fixed_point(
    family: &EquationFamily,
    f: &dyn MappingOracle,
    q: Q,
    iterations: usize,
    c: &BigRational,
    p: Prime,
) -> Result<FuzzyIterates> {
    let x = Scalar::Exact(c.clone());
    let values: Vec<BigRational> = fixed_point_iterate(family, f, q, iterations, &x)?
        .iter()
        .map(Scalar::to_rational)
        .collect();
    let start = f.eval(&x).to_rational();
    let chain: Vec<&BigRational> = std::iter::once(&start).chain(values.iter()).collect();
    let diffs: Vec<BigRational> = chain.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(FuzzyIterates {
        padic_steps: diffs.iter().map(|d| padic_abs_prime(d, p)).collect(),
        real_steps: diffs.iter().map(Signed::abs).collect(),
        values,
    })
}

#[derive(Clone, Debug)]
pub struct FuzzyConfig {
    pub p: Prime,
    pub kappa: BigRational,
    pub q: Q,
    pub iterations: usize,
    pub ts: Vec<BigRational>,
    pub n: usize,
}

impl FuzzyConfig {
    /// `kappa != 2^n`, with `kappa < 2^n` for `q = 1` and `kappa > 2^n` for `q = -1`.
    pub fn validate(&self, family: &EquationFamily) -> Result<()> {
        let limit = BigRational::from_integer(BigInt::from(2u32).pow(family.degree()));
        if !self.kappa.is_positive() {
            return Err(Error::Precondition(format!(
                "kappa must be positive, got {}",
                self.kappa
            )));
        }
        if self.kappa == limit {
            return Err(Error::Precondition(format!("kappa≠2^{} required", family.degree())));
        }
        match (self.q, self.kappa < limit) {
            (Q::Plus, false) => Err(Error::Precondition(format!(
                "q = 1 needs kappa < 2^{}",
                family.degree()
            ))),
            (Q::Minus, true) => Err(Error::Precondition(format!(
                "q = -1 needs kappa > 2^{}",
                family.degree()
            ))),
            _ => {
                if self.ts.iter().any(|t| !t.is_positive()) {
                    return Err(Error::Precondition("t-grid must be positive".into()));
                }
                if self.iterations == 0 {
                    return Err(Error::Precondition("iteration count must be at least 1".into()));
                }
                Ok(())
            }
        }
    }

    /// `|kappa - 2^n|` in the real absolute value.
    pub fn gap(&self, family: &EquationFamily) -> BigRational {
        (&self.kappa - BigRational::from_integer(BigInt::from(2u32).pow(family.degree()))).abs()
    }
}

#[derive(Clone, Debug)]
pub struct FuzzyBoundReport {
    pub scalar: GridCheck,
    pub matrix: GridCheck,
    /// Smallest `N(f(c) - V(c), t)` seen on the scalar grid.
    pub min_lhs: BigRational,
}

impl FuzzyBoundReport {
    pub fn passed(&self) -> bool {
        self.scalar.passed() && self.matrix.passed()
    }
}

/// Scalar form `N(f(c) - V(c), t) >= Gamma(c, |kappa - 2^n| t)` at every
/// entry of `x`, then the matrix form with `Gamma(x_rs, |kappa - 2^n| t / n^2)`.
#[allow(clippy::too_many_arguments)]
pub fn check_fuzzy_bound(
    family: &EquationFamily,
    f: &dyn MappingOracle,
    v: &dyn MappingOracle,
    sigma: &FuzzyControl,
    norm: &dyn FuzzyNorm,
    control_norm: &dyn FuzzyNorm,
    config: &FuzzyConfig,
    x: &MatrixOfPoints,
) -> Result<FuzzyBoundReport> {
    config.validate(family)?;
    let spec = GammaSpec::new(family);
    let gap = config.gap(family);
    let entries: Vec<BigRational> = x.entries().iter().map(Scalar::to_rational).collect();
    let diffs: Vec<BigRational> = entries
        .iter()
        .map(|c| {
            let s = Scalar::Exact(c.clone());
            (&f.eval(&s) - &v.eval(&s)).to_rational()
        })
        .collect();

    let mut scalar = GridCheck::new("scalar bound");
    let mut min_lhs = BigRational::one();
    for (c, d) in entries.iter().zip(&diffs) {
        for t in &config.ts {
            let lhs = norm.membership(d, t);
            let rhs = gamma(&spec, control_norm, sigma, c, &(&gap * t), config.p)?;
            if lhs < min_lhs {
                min_lhs = lhs.clone();
            }
            scalar.record(lhs >= rhs, || format!("c={c}, t={t}"), &lhs, &rhs);
        }
    }

    let mut matrix = GridCheck::new("matrix bound");
    let n2 = rat((x.dimension() * x.dimension()) as i64);
    for t in &config.ts {
        let lhs = norm.matrix_membership(&diffs, t);
        let share = &gap * t / &n2;
        let rhs = entries
            .iter()
            .map(|c| gamma(&spec, control_norm, sigma, c, &share, config.p))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .min()
            .expect("nonempty matrix");
        matrix.record(lhs >= rhs, || format!("t={t}"), &lhs, &rhs);
    }
    Ok(FuzzyBoundReport {
        scalar,
        matrix,
        min_lhs,
    })
}

/// `N_n([x_rs], t) >= min N(x_rs, t/n^2)` and `N_n(E_rs (x), t) = N(x, t)`.
pub fn fuzzy_minlift_check(norm: &dyn FuzzyNorm, x: &MatrixOfPoints, ts: &[BigRational]) -> Result<Vec<GridCheck>> {
    let n = x.dimension();
    let entries: Vec<BigRational> = x.entries().iter().map(Scalar::to_rational).collect();
    let n2 = rat((n * n) as i64);
    let mut lift = GridCheck::new("min-lift");
    let mut single = GridCheck::new("single entry");
    for t in ts {
        let lhs = norm.matrix_membership(&entries, t);
        let share = t / &n2;
        let rhs = entries
            .iter()
            .map(|e| norm.membership(e, &share))
            .min()
            .expect("nonempty matrix");
        lift.record(lhs >= rhs, || format!("t={t}"), &lhs, &rhs);
        for ((r, s), e) in x.indexed() {
            let unit = MatrixOfPoints::unit(n, r, s, e)?;
            let unit_entries: Vec<BigRational> = unit.entries().iter().map(Scalar::to_rational).collect();
            let a = norm.matrix_membership(&unit_entries, t);
            let b = norm.membership(&e.to_rational(), t);
            single.record(a == b, || format!("r={r}, s={s}, t={t}"), &a, &b);
        }
    }
    Ok(vec![lift, single])
}
