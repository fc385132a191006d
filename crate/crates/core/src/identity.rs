//! Integer linear identities on the symbols `f(j u0)`.
//!
//! Substituting `(u, v) = (a u0, b u0)` into the equation gives a linear
//! relation among the values `f(j u0)`. These relations are combined either
//! along a fixed script (the hand cascade) or by exact elimination, which
//! searches for a relation supported on `{f(u0), f(2 u0)}`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::equation::{EquationFamily, MappingOracle};
use crate::error::{Error, Result};
use crate::numeric::{binomial, parse_rational, Scalar};

/// `sum_j coeffs[j] f(j u0) = 0` over signed indices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RawIdentity {
    coeffs: BTreeMap<i64, BigInt>,
}

impl RawIdentity {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (i64, BigInt)>) -> Self {
        let mut out = RawIdentity::default();
        for (j, c) in pairs {
            out.accumulate(j, c);
        }
        out
    }

    fn accumulate(&mut self, j: i64, c: BigInt) {
        let entry = self.coeffs.entry(j).or_insert_with(BigInt::zero);
        *entry += c;
        if entry.is_zero() {
            self.coeffs.remove(&j);
        }
    }

    pub fn coeffs(&self) -> &BTreeMap<i64, BigInt> {
        &self.coeffs
    }

    pub fn get(&self, j: i64) -> BigInt {
        self.coeffs.get(&j).cloned().unwrap_or_default()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn sum(&self, other: &RawIdentity) -> RawIdentity {
        let mut out = self.clone();
        for (j, c) in &other.coeffs {
            out.accumulate(*j, c.clone());
        }
        out
    }
}

/// Identity on positive indices, after `f(0) = 0` and oddness are applied.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct FormalIdentity {
    coeffs: BTreeMap<u64, BigInt>,
}

impl FormalIdentity {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u64, BigInt)>) -> Self {
        let mut out = FormalIdentity::default();
        for (j, c) in pairs {
            assert!(j >= 1, "formal identities live on positive indices");
            out.accumulate(j, c);
        }
        out
    }

    fn accumulate(&mut self, j: u64, c: BigInt) {
        let entry = self.coeffs.entry(j).or_insert_with(BigInt::zero);
        *entry += c;
        if entry.is_zero() {
            self.coeffs.remove(&j);
        }
    }

    pub fn coeffs(&self) -> &BTreeMap<u64, BigInt> {
        &self.coeffs
    }

    pub fn get(&self, j: u64) -> BigInt {
        self.coeffs.get(&j).cloned().unwrap_or_default()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn support(&self) -> BTreeSet<u64> {
        self.coeffs.keys().copied().collect()
    }

    pub fn leading_index(&self) -> Option<u64> {
        self.coeffs.keys().next_back().copied()
    }

    fn leading(&self) -> Option<(u64, &BigInt)> {
        self.coeffs.iter().next_back().map(|(j, c)| (*j, c))
    }

    fn scaled(&self, m: &BigInt) -> FormalIdentity {
        FormalIdentity::from_pairs(self.coeffs.iter().map(|(j, c)| (*j, c * m)))
    }

    /// `-c_1 / c_2` when the support is exactly `{1, 2}` or `{2}`.
    pub fn doubling_ratio(&self) -> Option<BigRational> {
        let c2 = self.coeffs.get(&2)?;
        if self.coeffs.keys().any(|j| *j > 2) {
            return None;
        }
        Some(BigRational::new(-self.get(1), c2.clone()))
    }

    /// `sum_j c_j f(j u0)`.
    pub fn evaluate(&self, f: &dyn MappingOracle, u0: &Scalar) -> Scalar {
        self.coeffs.iter().fold(u0.zero_like(), |acc, (j, c)| {
            let x = &u0.lift_int(&BigInt::from(*j)) * u0;
            &acc + &(&u0.lift_int(c) * &f.eval(&x))
        })
    }
}

impl fmt::Display for FormalIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return f.write_str("0 = 0");
        }
        let parts: Vec<String> = self.coeffs.iter().rev().map(|(j, c)| format!("{c}*f({j}u)")).collect();
        write!(f, "{} = 0", parts.join(" + "))
    }
}

/// The substitution `(u, v) := (a u0, b u0)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub a: i64,
    pub b: i64,
}

impl InstanceSpec {
    pub const fn new(a: i64, b: i64) -> Self {
        InstanceSpec { a, b }
    }
}

impl fmt::Display for InstanceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.a, self.b)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CascadeStep {
    pub instance: InstanceSpec,
    pub multiplier: BigInt,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CascadeScript {
    steps: Vec<CascadeStep>,
}

impl CascadeScript {
    pub fn new(steps: Vec<CascadeStep>) -> Result<Self> {
        if let Some(bad) = steps.iter().find(|s| s.multiplier.is_zero()) {
            return Err(Error::Precondition(format!(
                "zero multiplier at instance {}",
                bad.instance
            )));
        }
        Ok(CascadeScript { steps })
    }

    pub fn empty() -> Self {
        CascadeScript { steps: Vec::new() }
    }

    /// The printed script: `(j,1)` for `j = 12..=0` with its printed multiplier.
    pub fn printed() -> Self {
        const MULTIPLIERS: [u64; 13] = [
            25, 301, 2325, 12950, 55430, 189750, 533830, 1258675, 2523675, 4350335, 6500375, 8469060, 2496144,
        ];
        let steps = MULTIPLIERS
            .iter()
            .enumerate()
            .map(|(i, m)| CascadeStep {
                instance: InstanceSpec::new(12 - i as i64, 1),
                multiplier: BigInt::from(*m),
            })
            .collect();
        CascadeScript { steps }
    }

    pub fn steps(&self) -> &[CascadeStep] {
        &self.steps
    }
}

/// Accumulates `c_k` at `a + (s-k) b` and `-n!` at `b`.
pub fn expand_instance_raw(family: &EquationFamily, spec: InstanceSpec) -> RawIdentity {
    let mut raw = RawIdentity::default();
    for (c, offset) in family.terms() {
        raw.accumulate(spec.a + offset * spec.b, c.clone());
    }
    raw.accumulate(spec.b, -family.rhs_factor().clone());
    raw
}

/// Drops index 0 and folds `f(-j) = -f(j)`.
pub fn normalize(raw: &RawIdentity) -> FormalIdentity {
    let mut out = FormalIdentity::default();
    for (j, c) in &raw.coeffs {
        match j.cmp(&0) {
            std::cmp::Ordering::Equal => {}
            std::cmp::Ordering::Greater => out.accumulate(*j as u64, c.clone()),
            std::cmp::Ordering::Less => out.accumulate(j.unsigned_abs(), -c.clone()),
        }
    }
    out
}

pub fn expand_instance(family: &EquationFamily, spec: InstanceSpec) -> FormalIdentity {
    normalize(&expand_instance_raw(family, spec))
}

/// `x - m y`.
pub fn combine(x: &FormalIdentity, y: &FormalIdentity, m: &BigInt) -> FormalIdentity {
    let mut out = x.clone();
    for (j, c) in &y.coeffs {
        out.accumulate(*j, -(c * m));
    }
    out
}

#[derive(Clone, Debug)]
pub struct ZeroDerivation {
    pub raw: RawIdentity,
    pub normalized: FormalIdentity,
    /// `raw == {0: -n!}`, i.e. the instance forces `f(0) = 0`.
    pub forces_zero: bool,
}

pub fn zero_derivation_check(family: &EquationFamily) -> ZeroDerivation {
    let raw = expand_instance_raw(family, InstanceSpec::new(0, 0));
    let expected = RawIdentity::from_pairs([(0, -family.rhs_factor().clone())]);
    ZeroDerivation {
        forces_zero: raw == expected,
        normalized: normalize(&raw),
        raw,
    }
}

#[derive(Clone, Debug)]
pub struct OddnessVerdict {
    pub sum: RawIdentity,
    pub expected: RawIdentity,
    pub passed: bool,
}

/// Adds the instances `(0,1)` and `(1,-1)`: every difference term must
/// cancel, leaving `-n! (f(u) + f(-u)) = 0`.
pub fn oddness_derivation_check(family: &EquationFamily) -> OddnessVerdict {
    let sum = expand_instance_raw(family, InstanceSpec::new(0, 1))
        .sum(&expand_instance_raw(family, InstanceSpec::new(1, -1)));
    let factor = -family.rhs_factor().clone();
    let expected = RawIdentity::from_pairs([(1, factor.clone()), (-1, factor)]);
    OddnessVerdict {
        passed: sum == expected,
        sum,
        expected,
    }
}

/// Seed `expand(0,2) - expand(s-1,1)`, then `current - m * expand(instance)` per step.
/// Returns the seed followed by every intermediate identity.
pub fn scripted_cascade(family: &EquationFamily, script: &CascadeScript) -> Vec<FormalIdentity> {
    let seed = combine(
        &expand_instance(family, InstanceSpec::new(0, 2)),
        &expand_instance(family, InstanceSpec::new(family.shift() - 1, 1)),
        &BigInt::one(),
    );
    let mut out = vec![seed];
    for step in script.steps() {
        let next = combine(
            out.last().expect("seed"),
            &expand_instance(family, step.instance),
            &step.multiplier,
        );
        out.push(next);
    }
    out
}

/// The instance set used by the hand cascade: `(0,2)` and `(j,1)` for `j = s-1..=0`.
pub fn script_instances(family: &EquationFamily) -> Vec<InstanceSpec> {
    let s = family.shift();
    std::iter::once(InstanceSpec::new(0, 2))
        .chain((0..s).rev().map(|j| InstanceSpec::new(j, 1)))
        .collect()
}

/// `(0,2)` and `(j,1)` for `j = s..=0`: the smallest such set whose span
/// contains the doubling relation.
pub fn default_instances(family: &EquationFamily) -> Vec<InstanceSpec> {
    let s = family.shift();
    std::iter::once(InstanceSpec::new(0, 2))
        .chain((0..=s).rev().map(|j| InstanceSpec::new(j, 1)))
        .collect()
}

/// An identity and the integer weights that produce it from the instances.
#[derive(Clone, Debug)]
pub struct EliminationCertificate {
    pub instances: Vec<InstanceSpec>,
    pub weights: Vec<BigInt>,
    pub identity: FormalIdentity,
    pub ratio: Option<BigRational>,
    pub eliminated_indices: Vec<u64>,
}

impl EliminationCertificate {
    /// Recombines the weighted instances from scratch and compares.
    pub fn verify(&self, family: &EquationFamily) -> bool {
        let mut acc = FormalIdentity::default();
        for (spec, w) in self.instances.iter().zip(&self.weights) {
            if !w.is_zero() {
                acc = combine(&acc, &expand_instance(family, *spec), &-w.clone());
            }
        }
        acc == self.identity
    }

    pub fn is_doubling_law(&self, family: &EquationFamily) -> bool {
        self.ratio == Some(BigRational::from_integer(BigInt::from(2u32).pow(family.degree())))
    }
}

#[derive(Clone)]
struct Row {
    identity: FormalIdentity,
    weights: Vec<BigInt>,
}

impl Row {
    /// Divides out the common content and makes the leading coefficient positive.
    fn reduce_content(&mut self) {
        let g = self
            .identity
            .coeffs
            .values()
            .chain(self.weights.iter())
            .fold(BigInt::zero(), |g, c| g.gcd(c));
        let flip = self.identity.leading().map(|(_, c)| c.is_negative()).unwrap_or(false);
        if g.is_zero() {
            return;
        }
        let g = if flip { -g } else { g };
        if !g.is_one() {
            self.identity = FormalIdentity::from_pairs(self.identity.coeffs.iter().map(|(j, c)| (*j, c / &g)));
            for w in &mut self.weights {
                *w = &*w / &g;
            }
        }
    }
}

/// Exact elimination of the largest surviving index until a relation
/// supported on `{1, 2}` appears. Pivot: smallest leading coefficient in
/// absolute value, first in input order on ties. Arithmetic is fraction-free
/// (`p_lead * r - r_lead * p`, then content removal).
pub fn auto_eliminate(family: &EquationFamily, instances: &[InstanceSpec]) -> Result<EliminationCertificate> {
    let n = instances.len();
    let mut rows: Vec<Row> = instances
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let mut weights = vec![BigInt::zero(); n];
            weights[i] = BigInt::one();
            let mut row = Row {
                identity: expand_instance(family, *spec),
                weights,
            };
            row.reduce_content();
            row
        })
        .filter(|r| !r.identity.is_empty())
        .collect();
    let mut eliminated = Vec::new();

    loop {
        if let Some(found) = rows
            .iter()
            .find(|r| r.identity.leading_index().map(|j| j <= 2).unwrap_or(false) && r.identity.coeffs.contains_key(&2))
        {
            return Ok(EliminationCertificate {
                instances: instances.to_vec(),
                weights: found.weights.clone(),
                ratio: found.identity.doubling_ratio(),
                identity: found.identity.clone(),
                eliminated_indices: eliminated,
            });
        }
        let top = match rows.iter().filter_map(|r| r.identity.leading_index()).max() {
            Some(top) if top > 2 => top,
            _ => return Err(Error::Unreachable(n)),
        };
        let pivot_pos = rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.identity.leading_index() == Some(top))
            .min_by(|(_, x), (_, y)| {
                let cx = x.identity.leading().expect("nonempty").1.abs();
                let cy = y.identity.leading().expect("nonempty").1.abs();
                cx.cmp(&cy)
            })
            .map(|(i, _)| i)
            .expect("some row has the top index");
        let pivot = rows.remove(pivot_pos);
        let p_lead = pivot.identity.get(top);
        rows = rows
            .into_iter()
            .filter_map(|mut r| {
                if r.identity.leading_index() == Some(top) {
                    let r_lead = r.identity.get(top);
                    let identity = combine(&r.identity.scaled(&p_lead), &pivot.identity, &r_lead);
                    let weights = r
                        .weights
                        .iter()
                        .zip(&pivot.weights)
                        .map(|(rw, pw)| rw * &p_lead - pw * &r_lead)
                        .collect();
                    r = Row { identity, weights };
                    r.reduce_content();
                }
                (!r.identity.is_empty()).then_some(r)
            })
            .collect();
        eliminated.push(top);
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiplierRow {
    pub instance: InstanceSpec,
    pub scripted: BigInt,
    /// `C(n, s-j) + C(n, s-2-j)` for the step at `(j, 1)`.
    pub pattern: BigInt,
}

impl MultiplierRow {
    pub fn matches(&self) -> bool {
        self.scripted == self.pattern
    }
}

pub fn multiplier_pattern_check(family: &EquationFamily, script: &CascadeScript) -> Vec<MultiplierRow> {
    let n = family.degree();
    let s = family.shift();
    script
        .steps()
        .iter()
        .map(|step| {
            let j = step.instance.a;
            MultiplierRow {
                instance: step.instance,
                scripted: step.multiplier.clone(),
                pattern: binomial(n, s - j) + binomial(n, s - 2 - j),
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApproxValue {
    pub mantissa: String,
    pub exponent: i32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrintedTerm {
    pub index: u64,
    pub printed: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approx: Option<ApproxValue>,
}

impl PrintedTerm {
    pub fn is_approximate(&self) -> bool {
        self.approx.is_some()
    }

    pub fn value(&self) -> Result<BigRational> {
        match (&self.exact, &self.approx) {
            (Some(s), None) => s
                .parse::<BigInt>()
                .map(BigRational::from_integer)
                .map_err(|_| Error::Fixture(format!("bad integer {s:?}"))),
            (None, Some(a)) => {
                let m = parse_rational(&a.mantissa).map_err(|e| Error::Fixture(e.to_string()))?;
                let scale = BigRational::from_integer(BigInt::from(10u32).pow(a.exponent.unsigned_abs()));
                Ok(if a.exponent >= 0 { m * scale } else { m / scale })
            }
            _ => Err(Error::Fixture(format!(
                "term {} must carry exactly one of exact/approx",
                self.printed
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrintedIdentity {
    pub label: String,
    pub terms: Vec<PrintedTerm>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureStep {
    pub instance: [i64; 2],
    pub multiplier: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureSeed {
    pub minuend: [i64; 2],
    pub subtrahend: [i64; 2],
}

/// Printed multipliers and coefficients of a hand cascade.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CascadeFixture {
    #[serde(default)]
    pub description: String,
    pub seed: FixtureSeed,
    pub steps: Vec<FixtureStep>,
    pub identities: Vec<PrintedIdentity>,
}

const BUILTIN_FIXTURE: &str = include_str!("../data/printed_cascade.json");

impl CascadeFixture {
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN_FIXTURE).expect("built-in fixture parses")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let fixture: CascadeFixture = serde_json::from_str(text).map_err(|e| Error::Fixture(e.to_string()))?;
        for id in &fixture.identities {
            for t in &id.terms {
                t.value()?;
            }
        }
        fixture.script()?;
        Ok(fixture)
    }

    pub fn script(&self) -> Result<CascadeScript> {
        let steps = self
            .steps
            .iter()
            .map(|s| {
                let multiplier = s
                    .multiplier
                    .parse::<BigInt>()
                    .map_err(|_| Error::Fixture(format!("bad multiplier {:?}", s.multiplier)))?;
                Ok(CascadeStep {
                    instance: InstanceSpec::new(s.instance[0], s.instance[1]),
                    multiplier,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        CascadeScript::new(steps).map_err(|e| Error::Fixture(e.to_string()))
    }
}

/// Relative tolerance for printed decimal approximations.
pub const APPROX_TOLERANCE: f64 = 5e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErratumKind {
    /// Printed exact value differs from the recomputed one.
    Mismatch,
    /// Printed decimal is further than the tolerance from the recomputed value.
    ApproximateMismatch,
    /// The same index is printed more than once in one identity.
    DuplicateTerm,
    /// Recomputed coefficient is nonzero but no term is printed for it.
    MissingFromPrint,
    /// A printed identity has no recomputed counterpart.
    MissingIdentity,
    /// Scripted multiplier differs from the binomial pattern.
    MultiplierPattern,
    /// Printed constant differs from the recomputed constant.
    Constant,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Erratum {
    pub label: String,
    pub index: Option<u64>,
    pub kind: ErratumKind,
    pub printed: Option<String>,
    pub computed: Option<String>,
    pub relative_error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ErrataReport {
    pub entries: Vec<Erratum>,
    pub compared_terms: usize,
    pub matched_terms: usize,
}

impl ErrataReport {
    pub fn of_kind(&self, kind: ErratumKind) -> impl Iterator<Item = &Erratum> {
        self.entries.iter().filter(move |e| e.kind == kind)
    }
}

fn relative_error(computed: &BigRational, printed: &BigRational) -> Option<f64> {
    if computed.is_zero() {
        return None;
    }
    ((computed - printed).abs() / computed.abs()).to_f64()
}

/// Compares `computed[i]` with `fixture.identities[i]` term by term.
pub fn diff_against_printed(computed: &[FormalIdentity], fixture: &CascadeFixture) -> Result<ErrataReport> {
    let mut report = ErrataReport::default();
    for (i, printed) in fixture.identities.iter().enumerate() {
        let Some(identity) = computed.get(i) else {
            report.entries.push(Erratum {
                label: printed.label.clone(),
                index: None,
                kind: ErratumKind::MissingIdentity,
                printed: None,
                computed: None,
                relative_error: None,
            });
            continue;
        };
        let mut seen = BTreeSet::new();
        for term in &printed.terms {
            let computed_value = BigRational::from_integer(identity.get(term.index));
            if !seen.insert(term.index) {
                report.entries.push(Erratum {
                    label: printed.label.clone(),
                    index: Some(term.index),
                    kind: ErratumKind::DuplicateTerm,
                    printed: Some(term.printed.clone()),
                    computed: Some(computed_value.to_string()),
                    relative_error: None,
                });
                continue;
            }
            let printed_value = term.value()?;
            report.compared_terms += 1;
            let rel = relative_error(&computed_value, &printed_value);
            let ok = if term.is_approximate() {
                rel.map(|r| r <= APPROX_TOLERANCE).unwrap_or(printed_value.is_zero())
            } else {
                computed_value == printed_value
            };
            if ok {
                report.matched_terms += 1;
            } else {
                report.entries.push(Erratum {
                    label: printed.label.clone(),
                    index: Some(term.index),
                    kind: if term.is_approximate() {
                        ErratumKind::ApproximateMismatch
                    } else {
                        ErratumKind::Mismatch
                    },
                    printed: Some(term.printed.clone()),
                    computed: Some(computed_value.to_string()),
                    relative_error: rel.map(|r| format!("{r:.3e}")),
                });
            }
        }
        for (j, c) in identity.coeffs() {
            if !seen.contains(j) {
                report.entries.push(Erratum {
                    label: printed.label.clone(),
                    index: Some(*j),
                    kind: ErratumKind::MissingFromPrint,
                    printed: None,
                    computed: Some(c.to_string()),
                    relative_error: None,
                });
            }
        }
    }
    Ok(report)
}

/// One erratum per scripted multiplier that breaks the binomial pattern.
pub fn multiplier_errata(rows: &[MultiplierRow]) -> Vec<Erratum> {
    rows.iter()
        .filter(|r| !r.matches())
        .map(|r| Erratum {
            label: format!("multiplier at instance {}", r.instance),
            index: None,
            kind: ErratumKind::MultiplierPattern,
            printed: Some(r.scripted.to_string()),
            computed: Some(r.pattern.to_string()),
            relative_error: None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equation::Polynomial;
    use crate::numeric::{factorial, RationalSampler};

    fn big(n: i64) -> BigInt {
        BigInt::from(n)
    }

    fn fam() -> EquationFamily {
        EquationFamily::default()
    }

    /// Direct accumulation with Pascal-row binomials.
    fn oracle_expand(n: u32, a: i64, b: i64) -> BTreeMap<i64, BigInt> {
        let mut row = vec![big(1)];
        for _ in 0..n {
            let mut next = vec![big(1); row.len() + 1];
            for i in 1..row.len() {
                next[i] = &row[i - 1] + &row[i];
            }
            row = next;
        }
        let s = i64::from(n + 1) / 2;
        let mut out: BTreeMap<i64, BigInt> = BTreeMap::new();
        for (k, c) in row.into_iter().enumerate() {
            let sign = if k % 2 == 0 { 1 } else { -1 };
            *out.entry(a + (s - k as i64) * b).or_default() += c * sign;
        }
        let fact: BigInt = (1..=n).map(BigInt::from).product();
        *out.entry(b).or_default() -= fact;
        out.retain(|_, c| !c.is_zero());
        out
    }

    #[test]
    fn degenerate_instance() {
        let raw = expand_instance_raw(&fam(), InstanceSpec::new(0, 0));
        assert_eq!(raw.coeffs().clone(), oracle_expand(25, 0, 0));
        assert_eq!(raw, RawIdentity::from_pairs([(0, -factorial(25))]));
        assert!(normalize(&raw).is_empty());
        assert!(zero_derivation_check(&fam()).forces_zero);
    }

    #[test]
    fn instance_twelve_one() {
        let raw = expand_instance_raw(&fam(), InstanceSpec::new(12, 1));
        assert_eq!(raw.coeffs().clone(), oracle_expand(25, 12, 1));
        assert_eq!(raw.get(25), big(1));
        assert_eq!(raw.get(24), big(-25));
        assert_eq!(raw.get(1), big(25) - factorial(25));
        assert_eq!(raw.get(0), big(-1));
    }

    #[test]
    fn even_step_has_even_support() {
        let raw = expand_instance_raw(&fam(), InstanceSpec::new(0, 2));
        assert!(raw.coeffs().keys().all(|j| j % 2 == 0));
        assert_eq!(raw.coeffs().clone(), oracle_expand(25, 0, 2));
    }

    #[test]
    fn normalize_examples() {
        let f = |pairs: &[(i64, i64)]| RawIdentity::from_pairs(pairs.iter().map(|(j, c)| (*j, big(*c))));
        assert_eq!(
            normalize(&f(&[(3, 5), (-3, 2)])),
            FormalIdentity::from_pairs([(3, big(3))])
        );
        assert_eq!(normalize(&f(&[(-1, 7)])), FormalIdentity::from_pairs([(1, big(-7))]));
        assert!(normalize(&f(&[(2, 4), (-2, 4)])).is_empty());
    }

    #[test]
    fn oddness_derivation() {
        let v = oddness_derivation_check(&fam());
        assert!(v.passed);
        assert_eq!(
            v.sum,
            RawIdentity::from_pairs([(1, -factorial(25)), (-1, -factorial(25))])
        );
        let v3 = oddness_derivation_check(&EquationFamily::new(3).unwrap());
        assert!(v3.passed);
        assert_eq!(v3.sum, RawIdentity::from_pairs([(1, big(-6)), (-1, big(-6))]));
    }

    #[test]
    fn oddness_negative_control() {
        let mut coeffs = fam().coefficients().to_vec();
        coeffs[3] += 1;
        let perturbed = EquationFamily::with_coefficients(25, coeffs).unwrap();
        assert!(!perturbed.is_canonical());
        assert!(!oddness_derivation_check(&perturbed).passed);
    }

    #[test]
    fn combine_examples() {
        let x = FormalIdentity::from_pairs([(25, big(25)), (1, big(5))]);
        assert!(combine(&x, &x, &big(1)).is_empty());
        let two = FormalIdentity::from_pairs([(2, big(1))]);
        let one = FormalIdentity::from_pairs([(1, big(1))]);
        assert_eq!(combine(&two, &one, &big(0)), two);
        let y = FormalIdentity::from_pairs([(25, big(1))]);
        assert_eq!(combine(&x, &y, &big(25)), FormalIdentity::from_pairs([(1, big(5))]));
    }

    #[test]
    fn empty_script_returns_seed_only() {
        let out = scripted_cascade(&fam(), &CascadeScript::empty());
        assert_eq!(out.len(), 1);
        assert!(out[0].support().iter().all(|j| (1..=26).contains(j)));
    }

    #[test]
    fn printed_script_replay_is_sound_but_not_doubling() {
        let out = scripted_cascade(&fam(), &CascadeScript::printed());
        assert_eq!(out.len(), 14);
        let mut sampler = RationalSampler::new(4);
        let f = Polynomial::power(25);
        for id in &out {
            for _ in 0..5 {
                let u0 = Scalar::Exact(sampler.nonzero_rational());
                assert!(id.evaluate(&f, &u0).is_zero());
            }
        }
        // the top term f(26u) from (0,2) is never eliminated
        assert_eq!(out.last().unwrap().leading_index(), Some(26));
        assert!(out.last().unwrap().doubling_ratio().is_none());
    }

    #[test]
    fn auto_eliminate_recovers_doubling_law() {
        let cert = auto_eliminate(&fam(), &default_instances(&fam())).unwrap();
        assert_eq!(cert.ratio, Some(BigRational::from_integer(big(33554432))));
        assert_eq!(cert.identity.support(), BTreeSet::from([1, 2]));
        assert!(cert.verify(&fam()));
        assert!(cert.is_doubling_law(&fam()));
        let f = Polynomial::power(25);
        assert!(cert.identity.evaluate(&f, &Scalar::int(1)).is_zero());
    }

    #[test]
    fn script_instance_set_cannot_reach_doubling() {
        let err = auto_eliminate(&fam(), &script_instances(&fam())).unwrap_err();
        assert_eq!(err, Error::Unreachable(14));
        assert!(auto_eliminate(&fam(), &[InstanceSpec::new(0, 2)]).is_err());
    }

    #[test]
    fn small_degrees() {
        let f3 = EquationFamily::new(3).unwrap();
        let inst = [(0, 2), (1, 1), (0, 1), (2, 1)].map(|(a, b)| InstanceSpec::new(a, b));
        let cert = auto_eliminate(&f3, &inst).unwrap();
        assert_eq!(cert.ratio, Some(BigRational::from_integer(big(8))));
        let f5 = EquationFamily::new(5).unwrap();
        let cert = auto_eliminate(&f5, &default_instances(&f5)).unwrap();
        assert_eq!(cert.ratio, Some(BigRational::from_integer(big(32))));
        assert!(cert.verify(&f5));
    }

    #[test]
    fn degenerate_instance_is_harmless() {
        let mut inst = default_instances(&fam());
        inst.insert(3, InstanceSpec::new(0, 0));
        let cert = auto_eliminate(&fam(), &inst).unwrap();
        assert!(cert.is_doubling_law(&fam()));
    }

    #[test]
    fn multiplier_pattern() {
        let rows = multiplier_pattern_check(&fam(), &CascadeScript::printed());
        assert_eq!(rows.len(), 13);
        assert_eq!(rows[0].pattern, big(25));
        assert_eq!(rows[6].instance, InstanceSpec::new(6, 1));
        assert_eq!(rows[6].pattern, big(533830));
        assert!(rows[..12].iter().all(MultiplierRow::matches));
        assert_eq!(rows[12].pattern, big(9657700));
        assert_eq!(rows[12].scripted, big(2496144));
        assert_eq!(multiplier_errata(&rows).len(), 1);
    }

    #[test]
    fn builtin_fixture_loads() {
        let fx = CascadeFixture::builtin();
        assert_eq!(fx.identities.len(), 13);
        assert_eq!(fx.script().unwrap(), CascadeScript::printed());
    }

    #[test]
    fn fixture_diff_flags_duplicates_and_tail_value() {
        let fx = CascadeFixture::builtin();
        let computed = scripted_cascade(&fam(), &fx.script().unwrap());
        let report = diff_against_printed(&computed, &fx).unwrap();
        let dup: Vec<_> = report.of_kind(ErratumKind::DuplicateTerm).collect();
        assert_eq!(dup.len(), 1);
        assert_eq!(dup[0].label, "identity 6");
        assert_eq!(dup[0].index, Some(7));
        // the last identity prints f(u) with 25!*23896732; the exact value carries a remainder
        let tail = report
            .entries
            .iter()
            .find(|e| e.label == "identity 13" && e.index == Some(1))
            .expect("last identity f(u) compared");
        assert_eq!(tail.kind, ErratumKind::Mismatch);
        assert!(report.compared_terms > 200);
    }

    #[test]
    fn empty_fixture_gives_empty_report() {
        let mut fx = CascadeFixture::builtin();
        fx.identities.clear();
        let report = diff_against_printed(&[], &fx).unwrap();
        assert!(report.entries.is_empty());
        assert!(CascadeFixture::from_json("{").is_err());
    }
}
