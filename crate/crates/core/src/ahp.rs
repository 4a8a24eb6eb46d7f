//! Analytic hierarchy process: pairwise judgment matrices, priority vectors
//! and consistency diagnostics.

use std::fmt;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_CRITERIA: usize = 2;
pub const MAX_CRITERIA: usize = 15;
/// Largest judgment on the 1-9 scale ("extremely high" importance).
pub const SCALE_MAX: f64 = 9.0;
/// Judgment sets at or below this consistency ratio are accepted.
pub const CR_THRESHOLD: f64 = 0.05;

const RECIPROCAL_TOL: f64 = 1e-9;
const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITER: usize = 100_000;

static RANDOM_INDEX: LazyLock<Vec<f64>> = LazyLock::new(|| {
    include_str!("../data/random_index.csv")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .skip(1)
        .enumerate()
        .map(|(i, l)| {
            let mut f = l.split(',');
            let n: usize = f.next().unwrap().trim().parse().unwrap();
            assert_eq!(n, i + 1, "random index table must list n = 1, 2, ... in order");
            f.next().unwrap().trim().parse().unwrap()
        })
        .collect()
});

/// Saaty's random consistency index for an `n`-criteria matrix.
pub fn random_index(n: usize) -> Option<f64> {
    n.checked_sub(1).and_then(|i| RANDOM_INDEX.get(i).copied())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Diagonal,
    Reciprocal,
    Range,
    NonPositive,
    Shape,
    /// Entry is not a number or fraction.
    Parse,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixViolation {
    pub row: usize,
    pub col: usize,
    pub kind: ViolationKind,
    pub message: String,
}

impl fmt::Display for MatrixViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}): {}", self.row, self.col, self.message)
    }
}

/// Reciprocal judgment matrix with entries on the 1/9..9 scale.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseMatrix {
    n: usize,
    a: Vec<f64>,
}

impl PairwiseMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.a.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    /// Matrix with `a[i][j] = w[i] / w[j]`; perfectly consistent. Weight
    /// ratios must stay within the 1-9 scale.
    pub fn from_weights(w: &[f64]) -> Result<Self> {
        let n = w.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            1.0
                        } else if i < j {
                            w[i] / w[j]
                        } else {
                            1.0 / (w[j] / w[i])
                        }
                    })
                    .collect()
            })
            .collect();
        validate_matrix(&rows)
    }

    /// Builds a matrix from upper-triangle judgments; the lower triangle is
    /// filled with exact reciprocals.
    pub fn from_upper(n: usize, upper: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut rows = vec![vec![1.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let v = upper(i, j);
                rows[i][j] = v;
                rows[j][i] = 1.0 / v;
            }
        }
        validate_matrix(&rows)
    }

    fn mul_vec(&self, w: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.a[i * self.n..(i + 1) * self.n]
                .iter()
                .zip(w)
                .map(|(x, y)| x * y)
                .sum();
        }
    }
}

/// Checks diagonal, reciprocity and the 1/9..9 range, collecting every
/// violation with its (row, col) position.
pub fn validate_matrix(raw: &[Vec<f64>]) -> Result<PairwiseMatrix> {
    let n = raw.len();
    let mut v: Vec<MatrixViolation> = Vec::new();
    let violation = |row, col, kind, message: String| MatrixViolation {
        row,
        col,
        kind,
        message,
    };
    if !(MIN_CRITERIA..=MAX_CRITERIA).contains(&n) {
        v.push(violation(
            0,
            0,
            ViolationKind::Shape,
            format!("matrix size must be between {MIN_CRITERIA} and {MAX_CRITERIA}, got {n}"),
        ));
        return Err(Error::Matrix(v));
    }
    for (i, row) in raw.iter().enumerate() {
        if row.len() != n {
            v.push(violation(
                i,
                0,
                ViolationKind::Shape,
                format!("row has {} entries, expected {n}", row.len()),
            ));
        }
    }
    if !v.is_empty() {
        return Err(Error::Matrix(v));
    }
    let lo = 1.0 / SCALE_MAX;
    for i in 0..n {
        for j in 0..n {
            let x = raw[i][j];
            if !(x.is_finite() && x > 0.0) {
                v.push(violation(
                    i,
                    j,
                    ViolationKind::NonPositive,
                    format!("entry {x} must be a positive number"),
                ));
                continue;
            }
            if i == j {
                if x != 1.0 {
                    v.push(violation(
                        i,
                        j,
                        ViolationKind::Diagonal,
                        format!("diagonal entry must be 1, got {x}"),
                    ));
                }
                continue;
            }
            if x > SCALE_MAX * (1.0 + RECIPROCAL_TOL) || x < lo * (1.0 - RECIPROCAL_TOL) {
                v.push(violation(
                    i,
                    j,
                    ViolationKind::Range,
                    format!("entry {x} is outside the 1-9 judgment scale (allowed 1/9 to 9)"),
                ));
            }
            if i > j {
                let y = raw[j][i];
                if y.is_finite() && y > 0.0 && (x * y - 1.0).abs() > RECIPROCAL_TOL {
                    v.push(violation(
                        i,
                        j,
                        ViolationKind::Reciprocal,
                        format!("entry {x} is not the reciprocal of ({j}, {i}) = {y}"),
                    ));
                }
            }
        }
    }
    if !v.is_empty() {
        return Err(Error::Matrix(v));
    }
    Ok(PairwiseMatrix {
        n,
        a: raw.iter().flatten().copied().collect(),
    })
}

/// Parses a judgment such as `3`, `0.25` or `1/3`.
pub fn parse_judgment(s: &str) -> Result<f64> {
    let s = s.trim();
    let bad = || Error::Config(format!("invalid judgment '{s}'"));
    let v = match s.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|_| bad())?;
            let den: f64 = den.trim().parse().map_err(|_| bad())?;
            num / den
        }
        None => s.parse().map_err(|_| bad())?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

/// Reads a matrix file: `n` on the first line, then `n` rows of `n`
/// whitespace or comma separated judgments.
pub fn parse_matrix_text(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (line, first) = lines.next().ok_or(Error::Parse {
        line: 0,
        message: "empty matrix file".into(),
    })?;
    let n: usize = first.parse().map_err(|_| Error::Parse {
        line,
        message: format!("expected matrix size, found '{first}'"),
    })?;
    let mut rows = Vec::with_capacity(n);
    for (line, l) in lines {
        let row = l
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| {
                parse_judgment(t).map_err(|_| Error::Parse {
                    line,
                    message: format!("invalid judgment '{t}'"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != n {
            return Err(Error::Parse {
                line,
                message: format!("expected {n} entries, found {}", row.len()),
            });
        }
        rows.push(row);
    }
    if rows.len() != n {
        return Err(Error::Parse {
            line: 0,
            message: format!("expected {n} rows, found {}", rows.len()),
        });
    }
    Ok(rows)
}

/// Nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PriorityVector(Vec<f64>);

impl PriorityVector {
    /// Accepts weights that already sum to 1 within 1e-9; values are kept
    /// bit-for-bit.
    pub fn new(w: Vec<f64>) -> Result<Self> {
        check_weights(&w)?;
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Weights(format!("weights sum to {sum}, expected 1")));
        }
        Ok(PriorityVector(w))
    }

    /// Rescales nonnegative weights to sum to 1. Input sums further than
    /// 1e-3 from one are rejected so typos in published tables surface.
    pub fn from_published(w: Vec<f64>) -> Result<Self> {
        check_weights(&w)?;
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-3 {
            return Err(Error::Weights(format!("weights sum to {sum}, expected 1 within 0.001")));
        }
        Self::normalized(w)
    }

    /// Rescales any nonnegative, not-all-zero weights to sum to 1.
    pub fn normalized(w: Vec<f64>) -> Result<Self> {
        check_weights(&w)?;
        let sum: f64 = w.iter().sum();
        if sum <= 0.0 {
            return Err(Error::Weights("weights sum to zero".into()));
        }
        Ok(PriorityVector(w.into_iter().map(|x| x / sum).collect()))
    }

    pub fn uniform(n: usize) -> Self {
        PriorityVector(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Drops entry `index` and rescales the rest by `1 / (1 - w[index])`,
    /// keeping their mutual ratios.
    pub fn without(&self, index: usize) -> Result<Self> {
        let removed = *self
            .0
            .get(index)
            .ok_or_else(|| Error::Weights(format!("no weight at index {index}")))?;
        let rest = 1.0 - removed;
        if rest <= 0.0 {
            return Err(Error::Weights("cannot drop the only weighted criterion".into()));
        }
        Ok(PriorityVector(
            self.0
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != index)
                .map(|(_, &w)| w / rest)
                .collect(),
        ))
    }
}

fn check_weights(w: &[f64]) -> Result<()> {
    if w.is_empty() {
        return Err(Error::Weights("no weights given".into()));
    }
    if let Some(x) = w.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::Weights(format!("weight {x} must be finite and nonnegative")));
    }
    Ok(())
}

impl TryFrom<Vec<f64>> for PriorityVector {
    type Error = Error;

    fn try_from(w: Vec<f64>) -> Result<Self> {
        PriorityVector::new(w)
    }
}

impl From<PriorityVector> for Vec<f64> {
    fn from(p: PriorityVector) -> Self {
        p.0
    }
}

/// Principal right eigenvector by power iteration, normalized to sum 1.
///
/// Iterates until `max_i |(A w)_i - λ w_i| <= 1e-12` with `λ` the mean
/// Rayleigh ratio.
pub fn priority_vector(m: &PairwiseMatrix) -> Result<PriorityVector> {
    let n = m.n;
    let mut w = vec![1.0 / n as f64; n];
    let mut aw = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..POWER_MAX_ITER {
        m.mul_vec(&w, &mut aw);
        let lambda = aw.iter().zip(&w).map(|(a, b)| a / b).sum::<f64>() / n as f64;
        residual = aw
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - lambda * b).abs())
            .fold(0.0, f64::max);
        let sum: f64 = aw.iter().sum();
        if residual <= POWER_TOL {
            return Ok(PriorityVector(w));
        }
        for (x, y) in w.iter_mut().zip(&aw) {
            *x = y / sum;
        }
    }
    Err(Error::NonConvergence {
        iterations: POWER_MAX_ITER,
        residual,
    })
}

/// Column-normalize, then average each row: the classical approximate
/// prioritization. Exact for consistent matrices.
pub fn priority_vector_column_average(m: &PairwiseMatrix) -> PriorityVector {
    let n = m.n;
    let col_sums: Vec<f64> = (0..n).map(|j| (0..n).map(|i| m.get(i, j)).sum()).collect();
    let w: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| m.get(i, j) / col_sums[j]).sum::<f64>() / n as f64)
        .collect();
    let s: f64 = w.iter().sum();
    PriorityVector(w.into_iter().map(|x| x / s).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub n: usize,
    pub lambda_max: f64,
    pub ci: f64,
    pub ri: f64,
    pub cr: f64,
    pub consistent: bool,
}

/// λ_max as the mean of `(A w)_i / w_i`, CI = (λ_max - n)/(n - 1), CR = CI/RI.
/// CR is defined as 0 for n <= 2.
pub fn consistency(m: &PairwiseMatrix, w: &PriorityVector) -> ConsistencyReport {
    let n = m.n;
    let mut aw = vec![0.0; n];
    m.mul_vec(w.as_slice(), &mut aw);
    let lambda_max = aw.iter().zip(w.as_slice()).map(|(a, b)| a / b).sum::<f64>() / n as f64;
    let ci = (lambda_max - n as f64) / (n as f64 - 1.0);
    let ri = random_index(n).unwrap_or(0.0);
    let cr = if n <= 2 || ri == 0.0 { 0.0 } else { ci / ri };
    ConsistencyReport {
        n,
        lambda_max,
        ci,
        ri,
        cr,
        consistent: cr <= CR_THRESHOLD,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AhpEvaluation {
    pub weights: Vec<f64>,
    pub lambda_max: f64,
    pub ci: f64,
    pub ri: f64,
    pub cr: f64,
    pub consistent: bool,
}

/// Validates a raw matrix and returns weights with consistency diagnostics.
pub fn evaluate(raw: &[Vec<f64>]) -> Result<AhpEvaluation> {
    let m = validate_matrix(raw)?;
    let w = priority_vector(&m)?;
    let r = consistency(&m, &w);
    Ok(AhpEvaluation {
        weights: w.0,
        lambda_max: r.lambda_max,
        ci: r.ci,
        ri: r.ri,
        cr: r.cr,
        consistent: r.consistent,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriteriaGroup<K> {
    pub name: String,
    pub members: Vec<K>,
}

/// Sums member weights per group. Groups must partition `factors`.
pub fn aggregate_criteria<K: PartialEq + fmt::Display>(
    w: &PriorityVector,
    factors: &[K],
    groups: &[CriteriaGroup<K>],
) -> Result<Vec<(String, f64)>> {
    if factors.len() != w.len() {
        return Err(Error::Partition(format!(
            "{} factors but {} weights",
            factors.len(),
            w.len()
        )));
    }
    let mut owner = vec![None; factors.len()];
    for (g, group) in groups.iter().enumerate() {
        for m in &group.members {
            let idx = factors
                .iter()
                .position(|f| f == m)
                .ok_or_else(|| Error::Partition(format!("group {} lists unknown factor {m}", group.name)))?;
            if let Some(prev) = owner[idx] {
                let prev: &CriteriaGroup<K> = &groups[prev];
                return Err(Error::Partition(format!(
                    "factor {m} appears in both {} and {}",
                    prev.name, group.name
                )));
            }
            owner[idx] = Some(g);
        }
    }
    if let Some(i) = owner.iter().position(Option::is_none) {
        return Err(Error::Partition(format!("factor {} belongs to no group", factors[i])));
    }
    Ok(groups
        .iter()
        .enumerate()
        .map(|(g, group)| {
            let s = owner
                .iter()
                .zip(w.as_slice())
                .filter(|(o, _)| **o == Some(g))
                .map(|(_, x)| x)
                .sum();
            (group.name.clone(), s)
        })
        .collect())
}
