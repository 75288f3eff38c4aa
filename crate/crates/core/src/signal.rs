//! Sparse sources, Gaussian sensing matrices, the measurement operator and
//! the NMSE distortion metric.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::linalg::{dot, norm_sq, sq_distance};
use crate::{Error, Result};

/// Relative tolerance on unit column norms.
pub const COLUMN_NORM_TOL: f64 = 1e-12;

/// A K-sparse vector together with its support.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSignal {
    values: Vec<f64>,
    support: Vec<usize>,
    sparsity: usize,
}

impl SparseSignal {
    /// Builds a signal from dense values, deriving the support from the
    /// nonzero entries.
    pub fn from_dense(values: Vec<f64>, sparsity: usize) -> Result<Self> {
        let m = values.len();
        if sparsity == 0 || sparsity >= m {
            return Err(Error::InvalidSparsity { k: sparsity, m });
        }
        let support: Vec<usize> = (0..m).filter(|&i| values[i] != 0.0).collect();
        if support.len() > sparsity {
            return Err(Error::InvalidInput(format!(
                "{} nonzeros exceed sparsity {sparsity}",
                support.len()
            )));
        }
        Ok(Self {
            values,
            support,
            sparsity,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Support indexes in ascending order.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn sparsity(&self) -> usize {
        self.sparsity
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn energy(&self) -> f64 {
        norm_sq(&self.values)
    }
}

/// Draws a K-sparse signal: a uniform random k-subset as support with
/// i.i.d. standard Gaussian values on it.
pub fn gen_sparse_signal<R: Rng + ?Sized>(rng: &mut R, m: usize, k: usize) -> Result<SparseSignal> {
    if k == 0 || k >= m {
        return Err(Error::InvalidSparsity { k, m });
    }
    let mut support = index::sample(rng, m, k).into_vec();
    support.sort_unstable();
    let mut values = vec![0.0; m];
    for &i in &support {
        values[i] = StandardNormal.sample(rng);
    }
    Ok(SparseSignal {
        values,
        support,
        sparsity: k,
    })
}

/// An N×M sensing matrix with unit-norm columns, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrix {
    columns: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl SensingMatrix {
    /// Takes row-major data, normalizes every column to unit norm and
    /// requires an under-determined shape.
    pub fn normalized_from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let phi = Self::normalized_from_rows_any_shape(rows)?;
        if phi.rows >= phi.cols {
            return Err(Error::InvalidShape(format!(
                "sensing matrix must have fewer rows than columns, got {}x{}",
                phi.rows, phi.cols
            )));
        }
        Ok(phi)
    }

    /// Same as [`normalized_from_rows`](Self::normalized_from_rows) but
    /// accepts square and tall matrices. Intended for tests and small
    /// hand-built examples.
    pub fn normalized_from_rows_any_shape(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if n == 0 || m == 0 {
            return Err(Error::InvalidShape("empty sensing matrix".into()));
        }
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidShape("ragged rows".into()));
        }
        let mut columns = vec![0.0; n * m];
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                columns[j * n + i] = v;
            }
        }
        normalize_columns(&mut columns, n)?;
        Ok(Self {
            columns,
            rows: n,
            cols: m,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Measurement rate N/M.
    pub fn rate(&self) -> f64 {
        self.rows as f64 / self.cols as f64
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j * self.rows..(j + 1) * self.rows]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.columns[j * self.rows + i]
    }

    /// Matrix-vector product with a dense length-M vector.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::InvalidShape(format!(
                "vector of length {} does not match {} columns",
                x.len(),
                self.cols
            )));
        }
        let mut y = vec![0.0; self.rows];
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            for (yi, aij) in y.iter_mut().zip(self.column(j)) {
                *yi += aij * xj;
            }
        }
        Ok(y)
    }

    /// Inner products of every column with `r`.
    pub fn correlate(&self, r: &[f64]) -> Vec<f64> {
        (0..self.cols).map(|j| dot(self.column(j), r)).collect()
    }
}

fn normalize_columns(columns: &mut [f64], rows: usize) -> Result<()> {
    for (j, col) in columns.chunks_exact_mut(rows).enumerate() {
        let norm = norm_sq(col).sqrt();
        if norm == 0.0 {
            return Err(Error::DegenerateColumn(j));
        }
        col.iter_mut().for_each(|v| *v /= norm);
    }
    Ok(())
}

/// Draws Φ with i.i.d. N(0, 1/n) entries, then rescales every column to
/// unit norm.
pub fn gen_sensing_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize) -> Result<SensingMatrix> {
    if n == 0 || n >= m {
        return Err(Error::InvalidShape(format!(
            "need 0 < n < m, got n = {n}, m = {m}"
        )));
    }
    let normal = Normal::new(0.0, (1.0 / n as f64).sqrt()).expect("finite std");
    let mut columns: Vec<f64> = (0..n * m).map(|_| normal.sample(rng)).collect();
    normalize_columns(&mut columns, n)?;
    Ok(SensingMatrix {
        columns,
        rows: n,
        cols: m,
    })
}

/// Y = Φ X.
pub fn measure(phi: &SensingMatrix, x: &SparseSignal) -> Result<Vec<f64>> {
    phi.apply(x.values())
}

/// Ratio-of-sums NMSE: Σ‖x_t − x̂_t‖² / Σ‖x_t‖².
pub fn nmse(originals: &[SparseSignal], estimates: &[Vec<f64>]) -> Result<f64> {
    if originals.is_empty() || originals.len() != estimates.len() {
        return Err(Error::InvalidInput(format!(
            "{} originals vs {} estimates",
            originals.len(),
            estimates.len()
        )));
    }
    let mut error = 0.0;
    let mut energy = 0.0;
    for (x, x_hat) in originals.iter().zip(estimates) {
        if x.len() != x_hat.len() {
            return Err(Error::InvalidInput(format!(
                "dimension mismatch {} vs {}",
                x.len(),
                x_hat.len()
            )));
        }
        error += sq_distance(x.values(), x_hat);
        energy += x.energy();
    }
    if energy == 0.0 {
        return Err(Error::DivisionByZero("all original signals have zero energy"));
    }
    Ok(error / energy)
}
