//! Square matrices of scalar points and entrywise lifts.

use std::fmt;

use rayon::prelude::*;

use crate::equation::{eval_h, EquationFamily, MappingOracle};
use crate::error::{Error, Result};
use crate::numeric::{Precision, RationalSampler, Scalar};
use crate::stability::{bound_factor, sigma_star, ControlFunction, Tolerance, Q};

pub const MAX_DIMENSION: usize = 8;

/// Row-major `n x n` matrix; all entries share one mode.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixOfPoints {
    n: usize,
    entries: Vec<Scalar>,
}

impl MatrixOfPoints {
    pub fn new(n: usize, entries: Vec<Scalar>) -> Result<Self> {
        if n == 0 || n > MAX_DIMENSION {
            return Err(Error::Precondition(format!(
                "matrix size must be in 1..={MAX_DIMENSION}, got {n}"
            )));
        }
        if entries.len() != n * n {
            return Err(Error::Precondition(format!(
                "{n}x{n} matrix needs {} entries, got {}",
                n * n,
                entries.len()
            )));
        }
        if let Some(bad) = entries.iter().find(|e| e.mode() != entries[0].mode()) {
            return Err(Error::ModeMismatch {
                expected: entries[0].mode().name(),
                found: bad.mode().name(),
            });
        }
        Ok(MatrixOfPoints { n, entries })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Scalar) -> Result<Self> {
        let entries = (0..n * n).map(|i| f(i / n, i % n)).collect();
        Self::new(n, entries)
    }

    pub fn zero(n: usize) -> Result<Self> {
        Self::from_fn(n, |_, _| Scalar::int(0))
    }

    /// `E_rs (x)`: `x` at `(r, s)`, zero elsewhere.
    pub fn unit(n: usize, r: usize, s: usize, x: &Scalar) -> Result<Self> {
        if r >= n || s >= n {
            return Err(Error::IndexOutOfRange {
                index: r.max(s) as i64,
                max: n as i64 - 1,
            });
        }
        Self::from_fn(n, |i, j| if (i, j) == (r, s) { x.clone() } else { x.zero_like() })
    }

    pub fn random(sampler: &mut RationalSampler, n: usize) -> Result<Self> {
        Self::from_fn(n, |_, _| Scalar::Exact(sampler.rational()))
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn get(&self, r: usize, s: usize) -> &Scalar {
        &self.entries[r * self.n + s]
    }

    pub fn entries(&self) -> &[Scalar] {
        &self.entries
    }

    /// `((r, s), x_rs)` in row-major order.
    pub fn indexed(&self) -> impl Iterator<Item = ((usize, usize), &Scalar)> {
        self.entries
            .iter()
            .enumerate()
            .map(move |(i, x)| ((i / self.n, i % self.n), x))
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Scalar::is_zero)
    }

    fn map(&self, f: impl Fn(&Scalar) -> Scalar + Sync + Send) -> MatrixOfPoints {
        MatrixOfPoints {
            n: self.n,
            entries: self.entries.par_iter().map(f).collect(),
        }
    }

    pub fn sub(&self, other: &MatrixOfPoints) -> Result<MatrixOfPoints> {
        self.same_shape(other)?;
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect();
        Ok(MatrixOfPoints { n: self.n, entries })
    }

    fn same_shape(&self, other: &MatrixOfPoints) -> Result<()> {
        if self.n == other.n {
            Ok(())
        } else {
            Err(Error::Shape(self.n, other.n))
        }
    }
}

impl fmt::Display for MatrixOfPoints {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = self
            .entries
            .chunks(self.n)
            .map(|row| row.iter().map(Scalar::to_string).collect::<Vec<_>>().join(", "))
            .collect();
        write!(f, "[{}]", rows.join("; "))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MatrixNorm {
    EntrywiseMax,
    EntrywiseSum,
}

impl MatrixNorm {
    pub const ALL: [MatrixNorm; 2] = [MatrixNorm::EntrywiseMax, MatrixNorm::EntrywiseSum];

    pub fn name(self) -> &'static str {
        match self {
            MatrixNorm::EntrywiseMax => "entrywise-max",
            MatrixNorm::EntrywiseSum => "entrywise-sum",
        }
    }

    pub fn norm(self, x: &MatrixOfPoints) -> Scalar {
        let zero = x.entries[0].zero_like();
        let abs = x.entries.iter().map(Scalar::abs);
        match self {
            MatrixNorm::EntrywiseMax => abs.fold(zero, Scalar::max),
            MatrixNorm::EntrywiseSum => abs.fold(zero, |a, b| &a + &b),
        }
    }
}

pub fn lift_apply(f: &dyn MappingOracle, x: &MatrixOfPoints) -> MatrixOfPoints {
    x.map(|e| f.eval(e))
}

/// Entrywise `H f(x_rs, y_rs)`.
pub fn lift_h(
    family: &EquationFamily,
    f: &dyn MappingOracle,
    x: &MatrixOfPoints,
    y: &MatrixOfPoints,
) -> Result<MatrixOfPoints> {
    x.same_shape(y)?;
    let entries = x
        .entries
        .par_iter()
        .zip(&y.entries)
        .map(|(u, v)| eval_h(family, f, u, v))
        .collect::<Result<Vec<_>>>()?;
    MatrixOfPoints::new(x.n, entries)
}

#[derive(Clone, Debug)]
pub struct MatrixBoundReport {
    pub norm: MatrixNorm,
    pub lhs: Scalar,
    /// Scalar bound at each entry, row-major.
    pub entry_bounds: Vec<Scalar>,
    pub rhs: Scalar,
    pub passed: bool,
}

/// `||f_n(X) - V_n(X)||_n <= sum_rs kappa^((1-q)/2) / (2^n (1-kappa)) sigma*(x_rs)`.
#[allow(clippy::too_many_arguments)]
pub fn matrix_bound_check(
    family: &EquationFamily,
    f: &dyn MappingOracle,
    v: &dyn MappingOracle,
    control: &ControlFunction,
    q: Q,
    kappa: &Scalar,
    norm: MatrixNorm,
    x: &MatrixOfPoints,
    tolerance: &Tolerance,
    precision: Precision,
) -> Result<MatrixBoundReport> {
    let factor = bound_factor(family, kappa, q)?;
    let lhs = norm.norm(&lift_apply(f, x).sub(&lift_apply(v, x))?);
    let entry_bounds: Vec<Scalar> = x
        .entries
        .par_iter()
        .map(|c| &factor * &sigma_star(family, control, c, precision))
        .collect();
    let rhs = entry_bounds.iter().fold(lhs.zero_like(), |a, b| &a + b);
    Ok(MatrixBoundReport {
        norm,
        passed: tolerance.admits(&lhs, &rhs),
        lhs,
        entry_bounds,
        rhs,
    })
}

#[derive(Clone, Debug)]
pub struct NormAxiomReport {
    pub norm: MatrixNorm,
    pub matrices_checked: usize,
    /// `(matrix index, r, s)` where `||E_rs (x)|| != |x|`.
    pub single_entry_failures: Vec<(usize, usize, usize)>,
    /// Matrix indices where `||X|| > sum |x_rs|`.
    pub sum_bound_failures: Vec<usize>,
}

impl NormAxiomReport {
    pub fn passed(&self) -> bool {
        self.single_entry_failures.is_empty() && self.sum_bound_failures.is_empty()
    }
}

pub fn norm_axiom_check(norm: MatrixNorm, samples: &[MatrixOfPoints]) -> Result<NormAxiomReport> {
    let mut single_entry_failures = Vec::new();
    let mut sum_bound_failures = Vec::new();
    for (i, x) in samples.iter().enumerate() {
        for ((r, s), e) in x.indexed() {
            if norm.norm(&MatrixOfPoints::unit(x.n, r, s, e)?) != e.abs() {
                single_entry_failures.push((i, r, s));
            }
        }
        if norm.norm(x) > MatrixNorm::EntrywiseSum.norm(x) {
            sum_bound_failures.push(i);
        }
    }
    Ok(NormAxiomReport {
        norm,
        matrices_checked: samples.len(),
        single_entry_failures,
        sum_bound_failures,
    })
}
