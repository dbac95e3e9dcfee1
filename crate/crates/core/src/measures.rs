//! Core data types: discrete measures, log-kernels, potentials and couplings.
//!
//! Kernels are stored through their natural logarithms. An exact zero of the
//! reference measure is the log-entry `-inf`; it is never floored to a small
//! positive number, so zero patterns survive every computation unchanged.

use crate::error::{Error, Result};
use crate::transforms::logsumexp;

/// Relative tolerance for cached masses and probability normalization.
pub const MASS_TOL: f64 = 1e-12;

/// Absolute tolerance on the total mass of a coupling.
pub const COUPLING_MASS_TOL: f64 = 1e-10;

/// Nonnegative weights on a finite set, with the total mass cached.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    weights: Vec<f64>,
    mass: f64,
    probability: bool,
}

impl DiscreteMeasure {
    /// Validates `weights`. With `require_probability` the total mass must be
    /// one to within [`MASS_TOL`]; the probability flag is set only then.
    pub fn new(weights: Vec<f64>, require_probability: bool) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        for (idx, &value) in weights.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { idx, value });
            }
            if value < 0.0 {
                return Err(Error::NegativeWeight { idx, value });
            }
        }
        let mass: f64 = weights.iter().sum();
        let probability = (mass - 1.0).abs() <= MASS_TOL;
        if require_probability && !probability {
            return Err(Error::NotProbability { mass });
        }
        Ok(Self {
            weights,
            mass,
            probability: require_probability,
        })
    }

    /// Probability measure from weights, validated.
    pub fn probability(weights: Vec<f64>) -> Result<Self> {
        Self::new(weights, true)
    }

    /// Builds a measure from weights the caller guarantees to be finite and
    /// nonnegative (row/column sums of exponentials). The probability flag
    /// is set when the mass is one within [`MASS_TOL`].
    pub(crate) fn from_nonnegative(weights: Vec<f64>) -> Self {
        debug_assert!(weights.iter().all(|w| w.is_finite() && *w >= 0.0));
        let mass: f64 = weights.iter().sum();
        let probability = (mass - 1.0).abs() <= MASS_TOL;
        Self {
            weights,
            mass,
            probability,
        }
    }

    /// Uniform probability measure on `n` atoms.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyMeasure);
        }
        Ok(Self::from_nonnegative(vec![1.0 / n as f64; n]))
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn is_probability(&self) -> bool {
        self.probability
    }

    /// Integral of `f` against the measure, skipping atoms of zero weight.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(f)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, v)| w * v)
            .sum()
    }
}

/// How a kernel was supplied; only affects export.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StorageKind {
    Dense,
    Triplets,
}

/// Natural logarithms of a nonnegative reference matrix `R`.
///
/// Only finite log-entries are stored, both row-wise and column-wise, each
/// list sorted by index so that every reduction runs in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct LogKernel {
    n_rows: usize,
    n_cols: usize,
    kind: StorageKind,
    row_ptr: Vec<usize>,
    row_cols: Vec<usize>,
    row_vals: Vec<f64>,
    col_ptr: Vec<usize>,
    col_rows: Vec<usize>,
    col_vals: Vec<f64>,
    log_mass: f64,
}

impl LogKernel {
    /// Kernel from the entries of `R` (not logs). Zeros become `-inf`.
    pub fn from_dense(values: &[Vec<f64>]) -> Result<Self> {
        let (n_rows, n_cols) = dense_shape(values)?;
        let mut triplets = Vec::new();
        for (i, row) in values.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::InvalidEntry {
                        row: i,
                        col: j,
                        reason: "entry must be finite",
                    });
                }
                if v < 0.0 {
                    return Err(Error::NegativeEntry {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
                if v > 0.0 {
                    triplets.push((i, j, v.ln()));
                }
            }
        }
        Self::build(n_rows, n_cols, StorageKind::Dense, triplets)
    }

    /// Kernel from positive entries `(row, col, value)`; absent entries are zero.
    pub fn from_triplets(n_rows: usize, n_cols: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let mut triplets = Vec::with_capacity(entries.len());
        for &(i, j, v) in entries {
            if !v.is_finite() {
                return Err(Error::InvalidEntry {
                    row: i,
                    col: j,
                    reason: "entry must be finite",
                });
            }
            if v < 0.0 {
                return Err(Error::NegativeEntry {
                    row: i,
                    col: j,
                    value: v,
                });
            }
            if v == 0.0 {
                return Err(Error::InvalidEntry {
                    row: i,
                    col: j,
                    reason: "triplet values must be positive",
                });
            }
            triplets.push((i, j, v.ln()));
        }
        Self::build(n_rows, n_cols, StorageKind::Triplets, triplets)
    }

    /// Kernel from a dense matrix of log-entries in `[-inf, inf)`.
    pub fn from_log_dense(log_values: &[Vec<f64>]) -> Result<Self> {
        let (n_rows, n_cols) = dense_shape(log_values)?;
        let mut triplets = Vec::new();
        for (i, row) in log_values.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                check_log_entry(i, j, v)?;
                if v > f64::NEG_INFINITY {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::build(n_rows, n_cols, StorageKind::Dense, triplets)
    }

    /// Kernel from finite log-entries `(row, col, log_value)`.
    pub fn from_log_triplets(
        n_rows: usize,
        n_cols: usize,
        entries: &[(usize, usize, f64)],
    ) -> Result<Self> {
        for &(i, j, v) in entries {
            check_log_entry(i, j, v)?;
            if v == f64::NEG_INFINITY {
                return Err(Error::InvalidEntry {
                    row: i,
                    col: j,
                    reason: "triplets list finite log-entries only",
                });
            }
        }
        Self::build(n_rows, n_cols, StorageKind::Triplets, entries.to_vec())
    }

    fn build(
        n_rows: usize,
        n_cols: usize,
        kind: StorageKind,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::DimensionMismatch(format!(
                "kernel dimensions must be positive, got {n_rows}x{n_cols}"
            )));
        }
        for &(i, j, _) in &triplets {
            if i >= n_rows || j >= n_cols {
                return Err(Error::DimensionMismatch(format!(
                    "entry ({i}, {j}) outside {n_rows}x{n_cols}"
                )));
            }
        }
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        for w in triplets.windows(2) {
            if (w[0].0, w[0].1) == (w[1].0, w[1].1) {
                return Err(Error::InvalidEntry {
                    row: w[0].0,
                    col: w[0].1,
                    reason: "duplicate entry",
                });
            }
        }
        if triplets.is_empty() {
            return Err(Error::AllZeroKernel);
        }

        let mut row_ptr = vec![0usize; n_rows + 1];
        for &(i, _, _) in &triplets {
            row_ptr[i + 1] += 1;
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let row_cols: Vec<usize> = triplets.iter().map(|t| t.1).collect();
        let row_vals: Vec<f64> = triplets.iter().map(|t| t.2).collect();

        let mut col_ptr = vec![0usize; n_cols + 1];
        for &(_, j, _) in &triplets {
            col_ptr[j + 1] += 1;
        }
        for j in 0..n_cols {
            col_ptr[j + 1] += col_ptr[j];
        }
        let mut fill = col_ptr.clone();
        let nnz = triplets.len();
        let mut col_rows = vec![0usize; nnz];
        let mut col_vals = vec![0.0; nnz];
        // row-major order guarantees ascending rows within each column
        for &(i, j, v) in &triplets {
            col_rows[fill[j]] = i;
            col_vals[fill[j]] = v;
            fill[j] += 1;
        }

        let log_mass = logsumexp(&row_vals);
        if !log_mass.is_finite() || log_mass.exp() == f64::INFINITY {
            return Err(Error::InvalidParameter(format!(
                "kernel mass is not finite (log mass {log_mass})"
            )));
        }

        Ok(Self {
            n_rows,
            n_cols,
            kind,
            row_ptr,
            row_cols,
            row_vals,
            col_ptr,
            col_rows,
            col_vals,
            log_mass,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn storage_kind(&self) -> StorageKind {
        self.kind
    }

    /// Number of finite log-entries (positive entries of `R`).
    pub fn nnz(&self) -> usize {
        self.row_vals.len()
    }

    /// Column indices and log-values of the finite entries in row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.row_cols[r.clone()], &self.row_vals[r])
    }

    /// Row indices and log-values of the finite entries in column `j`.
    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.col_rows[r.clone()], &self.col_vals[r])
    }

    /// `ln R_ij`, `-inf` for zero entries.
    pub fn log_entry(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => f64::NEG_INFINITY,
        }
    }

    /// `ln ∬R`.
    pub fn log_mass(&self) -> f64 {
        self.log_mass
    }

    /// Dense row-major log-entries with `-inf` for zeros.
    pub fn to_log_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![f64::NEG_INFINITY; self.n_cols]; self.n_rows];
        for (i, row) in out.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                row[j] = v;
            }
        }
        out
    }

    /// Finite log-entries in row-major order.
    pub fn log_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            out.extend(cols.iter().zip(vals).map(|(&j, &v)| (i, j, v)));
        }
        out
    }
}

fn dense_shape(values: &[Vec<f64>]) -> Result<(usize, usize)> {
    let n_rows = values.len();
    let n_cols = values.first().map_or(0, Vec::len);
    if n_rows == 0 || n_cols == 0 {
        return Err(Error::DimensionMismatch("empty dense kernel".into()));
    }
    if let Some(bad) = values.iter().position(|r| r.len() != n_cols) {
        return Err(Error::DimensionMismatch(format!(
            "row {bad} has {} columns, expected {n_cols}",
            values[bad].len()
        )));
    }
    Ok((n_rows, n_cols))
}

fn check_log_entry(row: usize, col: usize, v: f64) -> Result<()> {
    if v.is_nan() || v == f64::INFINITY {
        return Err(Error::InvalidEntry {
            row,
            col,
            reason: "log-entry must not be NaN or +inf",
        });
    }
    Ok(())
}

/// Total mass `∬R`, accumulated in the log domain.
pub fn kernel_mass(k: &LogKernel) -> f64 {
    k.log_mass().exp()
}

/// Row sums and column sums of `R`: the X-marginal `μ̄` and Y-marginal `ν̄`.
pub fn kernel_marginals(k: &LogKernel) -> (DiscreteMeasure, DiscreteMeasure) {
    let rows = (0..k.n_rows()).map(|i| logsumexp(k.row(i).1).exp()).collect();
    let cols = (0..k.n_cols()).map(|j| logsumexp(k.col(j).1).exp()).collect();
    (
        DiscreteMeasure::from_nonnegative(rows),
        DiscreteMeasure::from_nonnegative(cols),
    )
}

/// Which marginal space a potential lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    X,
    Y,
}

/// A finite real function on X (`ψ`) or on Y (`φ`).
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    side: Side,
    values: Vec<f64>,
}

impl Potential {
    pub fn new(side: Side, values: Vec<f64>) -> Result<Self> {
        if let Some((idx, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { idx, value });
        }
        Ok(Self { side, values })
    }

    pub fn zeros(side: Side, n: usize) -> Self {
        Self {
            side,
            values: vec![0.0; n],
        }
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `self + c·1`.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            side: self.side,
            values: self.values.iter().map(|v| v + c).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub(crate) fn from_raw(side: Side, values: Vec<f64>) -> Self {
        Self { side, values }
    }
}

/// A joint probability matrix on X×Y, stored both linearly and as logs,
/// with its normalization constant and marginals cached.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<f64>,
    log_entries: Vec<f64>,
    log_z: f64,
    x_marginal: DiscreteMeasure,
    y_marginal: DiscreteMeasure,
}

impl Coupling {
    /// From normalized log-entries (row-major) and the log of the
    /// normalization constant that was divided out.
    pub(crate) fn from_log_entries(
        n_rows: usize,
        n_cols: usize,
        log_entries: Vec<f64>,
        log_z: f64,
    ) -> Self {
        let entries: Vec<f64> = log_entries.iter().map(|l| l.exp()).collect();
        let (x_marginal, y_marginal) = marginals_of(n_rows, n_cols, &entries);
        Self {
            n_rows,
            n_cols,
            entries,
            log_entries,
            log_z,
            x_marginal,
            y_marginal,
        }
    }

    /// From explicit nonnegative entries (row-major) summing to one.
    pub fn from_entries(n_rows: usize, n_cols: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n_rows * n_cols {
            return Err(Error::LengthMismatch(entries.len(), n_rows * n_cols));
        }
        for (idx, &value) in entries.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { idx, value });
            }
            if value < 0.0 {
                return Err(Error::NegativeWeight { idx, value });
            }
        }
        let total: f64 = entries.iter().sum();
        if (total - 1.0).abs() > COUPLING_MASS_TOL {
            return Err(Error::NotProbability { mass: total });
        }
        let log_entries = entries.iter().map(|v| v.ln()).collect();
        let (x_marginal, y_marginal) = marginals_of(n_rows, n_cols, &entries);
        Ok(Self {
            n_rows,
            n_cols,
            entries,
            log_entries,
            log_z: 0.0,
            x_marginal,
            y_marginal,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Row-major log-entries; these keep precision where entries underflow.
    pub fn log_entries(&self) -> &[f64] {
        &self.log_entries
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n_cols + j]
    }

    /// Normalization constant `Z` divided out at construction.
    pub fn z(&self) -> f64 {
        self.log_z.exp()
    }

    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    pub fn x_marginal(&self) -> &DiscreteMeasure {
        &self.x_marginal
    }

    pub fn y_marginal(&self) -> &DiscreteMeasure {
        &self.y_marginal
    }
}

fn marginals_of(n_rows: usize, n_cols: usize, entries: &[f64]) -> (DiscreteMeasure, DiscreteMeasure) {
    let mut rows = vec![0.0; n_rows];
    let mut cols = vec![0.0; n_cols];
    for i in 0..n_rows {
        let row = &entries[i * n_cols..(i + 1) * n_cols];
        let mut s = 0.0;
        for (j, &v) in row.iter().enumerate() {
            s += v;
            cols[j] += v;
        }
        rows[i] = s;
    }
    (
        DiscreteMeasure::from_nonnegative(rows),
        DiscreteMeasure::from_nonnegative(cols),
    )
}

/// Checks the coupling invariants: unit mass, consistent cached marginals,
/// and support contained in the support of `kernel`.
pub fn validate_coupling(c: &Coupling, kernel: &LogKernel) -> Result<()> {
    if c.shape() != kernel.shape() {
        return Err(Error::ShapeMismatch(c.shape(), kernel.shape()));
    }
    let total: f64 = c.entries.iter().sum();
    if (total - 1.0).abs() > COUPLING_MASS_TOL {
        return Err(Error::NotProbability { mass: total });
    }
    let (rows, cols) = marginals_of(c.n_rows, c.n_cols, &c.entries);
    let close = |a: &DiscreteMeasure, b: &DiscreteMeasure| {
        a.weights()
            .iter()
            .zip(b.weights())
            .all(|(x, y)| (x - y).abs() <= MASS_TOL * x.abs().max(y.abs()).max(1.0))
    };
    if !close(&rows, &c.x_marginal) || !close(&cols, &c.y_marginal) {
        return Err(Error::DimensionMismatch("cached marginals are stale".into()));
    }
    for i in 0..c.n_rows {
        for j in 0..c.n_cols {
            let v = c.entry(i, j);
            if v > 0.0 && kernel.log_entry(i, j) == f64::NEG_INFINITY {
                return Err(Error::InvalidEntry {
                    row: i,
                    col: j,
                    reason: "coupling charges a zero of the kernel",
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_probability() {
        let m = DiscreteMeasure::new(vec![0.5, 0.5], true).unwrap();
        assert_eq!(m.mass(), 1.0);
        assert!(m.is_probability());
        let m = DiscreteMeasure::new(vec![0.5, 0.5], false).unwrap();
        assert!(!m.is_probability());
    }

    #[test]
    fn measure_errors() {
        assert!(matches!(
            DiscreteMeasure::new(vec![0.3, -0.1], false),
            Err(Error::NegativeWeight { idx: 1, .. })
        ));
        assert!(matches!(
            DiscreteMeasure::new(vec![0.3, -0.1], true),
            Err(Error::NegativeWeight { .. })
        ));
        assert!(matches!(
            DiscreteMeasure::new(vec![0.2, 0.2], true),
            Err(Error::NotProbability { .. })
        ));
        assert!(matches!(DiscreteMeasure::new(vec![], false), Err(Error::EmptyMeasure)));
        assert!(matches!(
            DiscreteMeasure::new(vec![f64::NAN], false),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn dense_kernel() {
        let k = LogKernel::from_dense(&[vec![0.4, 0.1], vec![0.1, 0.4]]).unwrap();
        assert_eq!(k.shape(), (2, 2));
        assert_eq!(k.nnz(), 4);
        assert!((kernel_mass(&k) - 1.0).abs() < 1e-15);
        assert_eq!(k.log_entry(0, 1), 0.1f64.ln());
        assert_eq!(k.storage_kind(), StorageKind::Dense);
    }

    #[test]
    fn diagonal_triplets() {
        let k = LogKernel::from_triplets(2, 2, &[(0, 0, 0.5), (1, 1, 0.5)]).unwrap();
        assert_eq!(k.log_entry(0, 0), 0.5f64.ln());
        assert_eq!(k.log_entry(1, 1), 0.5f64.ln());
        assert_eq!(k.log_entry(0, 1), f64::NEG_INFINITY);
        assert_eq!(k.log_entry(1, 0), f64::NEG_INFINITY);
        assert!((kernel_mass(&k) - 1.0).abs() < 1e-15);
        let (mu_bar, nu_bar) = kernel_marginals(&k);
        assert_eq!(mu_bar.weights(), &[0.5, 0.5]);
        assert_eq!(nu_bar.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn kernel_errors() {
        assert!(matches!(
            LogKernel::from_dense(&[vec![0.0, 0.0], vec![0.0, 0.0]]),
            Err(Error::AllZeroKernel)
        ));
        assert!(matches!(
            LogKernel::from_dense(&[vec![0.1, -0.2]]),
            Err(Error::NegativeEntry { row: 0, col: 1, .. })
        ));
        assert!(LogKernel::from_log_dense(&[vec![f64::INFINITY]]).is_err());
        assert!(LogKernel::from_log_dense(&[vec![f64::NAN]]).is_err());
        assert!(LogKernel::from_triplets(2, 2, &[(0, 0, 0.0)]).is_err());
        assert!(LogKernel::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
        assert!(LogKernel::from_log_triplets(2, 2, &[(0, 0, 0.0), (0, 0, 1.0)]).is_err());
        assert!(LogKernel::from_dense(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn mass_and_marginals() {
        let k = LogKernel::from_dense(&[vec![2.0]]).unwrap();
        assert!((kernel_mass(&k) - 2.0).abs() < 1e-15);

        let k = LogKernel::from_dense(&[vec![0.4, 0.1], vec![0.1, 0.4]]).unwrap();
        let (mu_bar, nu_bar) = kernel_marginals(&k);
        for w in mu_bar.weights().iter().chain(nu_bar.weights()) {
            assert!((w - 0.5).abs() < 1e-15);
        }

        let k = LogKernel::from_dense(&[vec![0.5, 0.25], vec![0.125, 0.125]]).unwrap();
        let (mu_bar, nu_bar) = kernel_marginals(&k);
        let expect = |m: &DiscreteMeasure, w: [f64; 2]| {
            for (a, b) in m.weights().iter().zip(w) {
                assert!((a - b).abs() < 1e-15, "{a} vs {b}");
            }
        };
        expect(&mu_bar, [0.75, 0.25]);
        expect(&nu_bar, [0.625, 0.375]);
    }

    #[test]
    fn huge_log_entries_keep_finite_log_mass() {
        let k = LogKernel::from_log_dense(&[vec![-1000.0, -1001.0]]).unwrap();
        assert!(k.log_mass().is_finite());
        assert!(LogKernel::from_log_dense(&[vec![800.0]]).is_err());
    }

    #[test]
    fn coupling_validation() {
        let k = LogKernel::from_dense(&[vec![0.4, 0.1], vec![0.0, 0.5]]).unwrap();
        let good = Coupling::from_entries(2, 2, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        validate_coupling(&good, &k).unwrap();
        let bad = Coupling::from_entries(2, 2, vec![0.4, 0.1, 0.1, 0.4]).unwrap();
        assert!(validate_coupling(&bad, &k).is_err());
        assert!(Coupling::from_entries(2, 2, vec![0.4, 0.1, 0.1, 0.1]).is_err());
    }

    #[test]
    fn potentials_reject_non_finite() {
        assert!(Potential::new(Side::Y, vec![0.0, f64::INFINITY]).is_err());
        let p = Potential::new(Side::X, vec![1.0, -2.0]).unwrap();
        assert_eq!(p.shifted(1.0).values(), &[2.0, -1.0]);
        assert_eq!(p.max_abs(), 2.0);
    }
}
