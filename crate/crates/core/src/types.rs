//! Probability vectors, stochastic matrices, and parameter objects.
//!
//! All matrices are dense row-major `f64`; dimensions stay small (d <= 64), so
//! there is no sparse path. Stored objects keep row sums within 1e-12 of 1;
//! user input is accepted within 1e-9 and renormalized.

use crate::error::{Error, Result};

/// Row-sum tolerance for stored objects.
pub const STORED_TOL: f64 = 1e-12;
/// Row-sum tolerance for user input, which is renormalized on acceptance.
pub const INPUT_TOL: f64 = 1e-9;

/// A point of the simplex: nonnegative entries summing to 1 within 1e-12.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbVector {
    entries: Vec<f64>,
}

impl ProbVector {
    /// Validates and renormalizes a raw vector whose sum is within `tol` of 1.
    pub fn new(entries: Vec<f64>, tol: f64) -> Result<Self> {
        for (j, &v) in entries.iter().enumerate() {
            if !(v >= 0.0) {
                return Err(Error::NegativeEntry(0, j));
            }
        }
        let sum: f64 = entries.iter().sum();
        if !((sum - 1.0).abs() <= tol) {
            return Err(Error::RowSumOutOfTolerance(0, sum));
        }
        let entries = entries.into_iter().map(|v| v / sum).collect();
        Ok(ProbVector { entries })
    }

    /// Wraps entries already known to satisfy the invariant (e.g. a freshly
    /// normalized gamma vector). Checked in debug builds only.
    pub(crate) fn from_normalized(entries: Vec<f64>) -> Self {
        debug_assert!(entries.iter().all(|&v| v >= 0.0));
        debug_assert!((entries.iter().sum::<f64>() - 1.0).abs() <= STORED_TOL);
        ProbVector { entries }
    }

    pub fn uniform(d: usize) -> Self {
        ProbVector {
            entries: vec![1.0 / d as f64; d],
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<f64> {
        self.entries
    }
}

/// A row-stochastic matrix: every row is a `ProbVector` of length `cols`.
/// Serializes as its list of rows.
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl serde::Serialize for StochasticMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq((0..self.rows).map(|i| self.row(i)))
    }
}

impl serde::Serialize for ProbVector {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.entries.iter())
    }
}

impl StochasticMatrix {
    /// Validates a raw matrix: entries nonnegative, every row sum within
    /// `tol` of 1. Accepted rows are renormalized exactly.
    ///
    /// The whole matrix is scanned for negative entries before row sums are
    /// judged, so a sign error is always reported as `NegativeEntry`.
    pub fn validate(raw: &[Vec<f64>], tol: f64) -> Result<Self> {
        let rows = raw.len();
        if rows == 0 {
            return Err(Error::DimensionMismatch("matrix has no rows".into()));
        }
        let cols = raw[0].len();
        if cols < 2 {
            return Err(Error::DimensionMismatch(format!(
                "matrix must have at least 2 columns, got {cols}"
            )));
        }
        for (i, row) in raw.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !(v >= 0.0) {
                    return Err(Error::NegativeEntry(i, j));
                }
            }
        }
        let mut data = Vec::with_capacity(rows * cols);
        for (i, row) in raw.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if !((sum - 1.0).abs() <= tol) {
                return Err(Error::RowSumOutOfTolerance(i, sum));
            }
            data.extend(row.iter().map(|&v| v / sum));
        }
        Ok(StochasticMatrix { rows, cols, data })
    }

    /// Wraps data already known stochastic (e.g. products of stochastic
    /// factors). Checked in debug builds only.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        debug_assert!(data.iter().all(|&v| v >= 0.0));
        debug_assert!((0..rows).all(|i| {
            let s: f64 = data[i * cols..(i + 1) * cols].iter().sum();
            (s - 1.0).abs() <= 1e-10
        }));
        StochasticMatrix { rows, cols, data }
    }

    pub fn identity(d: usize) -> Self {
        let mut data = vec![0.0; d * d];
        for i in 0..d {
            data[i * d + i] = 1.0;
        }
        StochasticMatrix { rows: d, cols: d, data }
    }

    /// A rank-one matrix: every row equals `row`.
    pub fn rank_one(d: usize, row: &ProbVector) -> Self {
        let mut data = Vec::with_capacity(d * row.len());
        for _ in 0..d {
            data.extend_from_slice(row.entries());
        }
        StochasticMatrix { rows: d, cols: row.len(), data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_vector(&self, i: usize) -> ProbVector {
        ProbVector::from_normalized(self.row(i).to_vec())
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_positive(&self) -> bool {
        self.data.iter().all(|&v| v > 0.0)
    }

    /// Max over columns of (max - min) down the column; 0 iff all rows equal.
    pub fn row_spread(&self) -> f64 {
        let mut spread = 0.0f64;
        for j in 0..self.cols {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for i in 0..self.rows {
                let v = self.get(i, j);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            spread = spread.max(hi - lo);
        }
        spread
    }
}

/// Standard matrix product; the set of stochastic matrices is closed under it.
pub fn mat_product(a: &StochasticMatrix, b: &StochasticMatrix) -> Result<StochasticMatrix> {
    if a.cols != b.rows {
        return Err(Error::DimensionMismatch(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut data = vec![0.0; a.rows * b.cols];
    for i in 0..a.rows {
        let out = &mut data[i * b.cols..(i + 1) * b.cols];
        for k in 0..a.cols {
            let aik = a.get(i, k);
            if aik == 0.0 {
                continue;
            }
            let brow = b.row(k);
            for (o, &bv) in out.iter_mut().zip(brow) {
                *o += aik * bv;
            }
        }
    }
    Ok(StochasticMatrix { rows: a.rows, cols: b.cols, data })
}

/// Row vector times matrix; preserves the simplex.
pub fn vec_mat_product(v: &[f64], m: &StochasticMatrix) -> Result<Vec<f64>> {
    if v.len() != m.rows {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} times {}x{} matrix",
            v.len(),
            m.rows,
            m.cols
        )));
    }
    let mut out = vec![0.0; m.cols];
    for (k, &vk) in v.iter().enumerate() {
        if vk == 0.0 {
            continue;
        }
        let row = m.row(k);
        for (o, &mv) in out.iter_mut().zip(row) {
            *o += vk * mv;
        }
    }
    Ok(out)
}

/// Gamma/Dirichlet shape parameters. With `extended` set, zero entries are
/// allowed and mark coordinates that are identically zero; at least one entry
/// must be positive either way.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ParamVector {
    entries: Vec<f64>,
    extended: bool,
}

impl ParamVector {
    pub fn new(entries: Vec<f64>, extended: bool) -> Result<Self> {
        let floor = if extended { 0.0 } else { f64::MIN_POSITIVE };
        for &v in &entries {
            if !(v >= floor) || !v.is_finite() {
                return Err(Error::NonPositiveShape(v));
            }
        }
        if !entries.iter().any(|&v| v > 0.0) {
            return Err(Error::AllZeroParams);
        }
        Ok(ParamVector { entries, extended })
    }

    pub fn strict(entries: Vec<f64>) -> Result<Self> {
        ParamVector::new(entries, false)
    }

    pub fn extended(entries: Vec<f64>) -> Result<Self> {
        ParamVector::new(entries, true)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn is_extended(&self) -> bool {
        self.extended
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.entries.iter().all(|&v| v > 0.0)
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().sum()
    }
}

/// Nonnegative r x c parameter matrix (Dirichlet row parameters, windowed
/// column sums, etc.).
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ParamMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ParamMatrix {
    pub fn new(raw: &[Vec<f64>]) -> Result<Self> {
        let rows = raw.len();
        if rows == 0 {
            return Err(Error::DimensionMismatch("parameter matrix has no rows".into()));
        }
        let cols = raw[0].len();
        if cols == 0 {
            return Err(Error::DimensionMismatch("parameter matrix has no columns".into()));
        }
        for (i, row) in raw.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::NegativeEntry(i, j));
                }
            }
        }
        let data = raw.iter().flatten().copied().collect();
        Ok(ParamMatrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// Exact row sums and column sums.
    pub fn row_col_sums(&self) -> (Vec<f64>, Vec<f64>) {
        let mut row_sums = vec![0.0; self.rows];
        let mut col_sums = vec![0.0; self.cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                let v = self.get(i, j);
                row_sums[i] += v;
                col_sums[j] += v;
            }
        }
        (row_sums, col_sums)
    }
}

/// True iff the matrix is square, every row sum is positive, and row sum i
/// equals column sum i within `tol` for every i.
pub fn check_balance(a: &ParamMatrix, tol: f64) -> Result<bool> {
    if !a.is_square() {
        return Err(Error::NotSquare(a.rows, a.cols));
    }
    let (rs, cs) = a.row_col_sums();
    let balanced = rs
        .iter()
        .zip(&cs)
        .all(|(&r, &c)| r > 0.0 && (r - c).abs() <= tol);
    Ok(balanced)
}

/// A realization of a vector with independent nonnegative components (gamma
/// draws and their transforms).
#[derive(Clone, Debug, PartialEq)]
pub struct NonNegVector {
    entries: Vec<f64>,
}

impl NonNegVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        for (j, &v) in entries.iter().enumerate() {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::NegativeEntry(0, j));
            }
        }
        Ok(NonNegVector { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<f64> {
        self.entries
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().sum()
    }
}
