use nalgebra::{DMatrix, DVector};

use crate::{GemError, Result};

/// `N` samples of dimension `m`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    m: usize,
    values: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset from a row-major buffer of `n * m` finite values.
    pub fn from_row_major(m: usize, values: Vec<f64>) -> Result<Self> {
        if m == 0 {
            return Err(GemError::InvalidDataset("dimension must be positive".into()));
        }
        if !values.len().is_multiple_of(m) {
            return Err(GemError::InvalidDataset(format!(
                "{} values do not fill rows of length {m}",
                values.len()
            )));
        }
        let n = values.len() / m;
        if n == 0 {
            return Err(GemError::InvalidDataset("dataset has no samples".into()));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(GemError::InvalidDataset(format!(
                "sample {} has a non-finite coordinate",
                pos / m
            )));
        }
        Ok(Self { n, m, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.first().map(Vec::len).unwrap_or(0);
        if let Some(bad) = rows.iter().position(|r| r.len() != m) {
            return Err(GemError::InvalidDataset(format!(
                "row {bad} has {} columns, expected {m}",
                rows[bad].len()
            )));
        }
        Self::from_row_major(m, rows.concat())
    }

    /// One sample per matrix row.
    pub fn from_matrix(x: &DMatrix<f64>) -> Result<Self> {
        let values = (0..x.nrows())
            .flat_map(|t| x.row(t).iter().copied().collect::<Vec<_>>())
            .collect();
        Self::from_row_major(x.ncols(), values)
    }

    /// Number of samples `N`.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Sample dimension `m`.
    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.m..(t + 1) * self.m]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.m)
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.values
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.m, &self.values)
    }

    /// Coordinate-wise sample mean.
    pub fn mean(&self) -> DVector<f64> {
        let mut acc = DVector::zeros(self.m);
        for row in self.rows() {
            for (a, v) in row.iter().enumerate() {
                acc[a] += v;
            }
        }
        acc / self.n as f64
    }

    /// Maximum-likelihood (divide by `N`) sample covariance.
    pub fn covariance(&self) -> DMatrix<f64> {
        let mean = self.mean();
        let mut acc = DMatrix::zeros(self.m, self.m);
        for row in self.rows() {
            let z = DVector::from_iterator(self.m, row.iter().zip(mean.iter()).map(|(x, c)| x - c));
            acc += &z * z.transpose();
        }
        acc / self.n as f64
    }

    /// Dataset made of the rows of `self` followed by the rows of `other`.
    pub fn concat(&self, other: &Dataset) -> Result<Self> {
        if self.m != other.m {
            return Err(GemError::DimensionMismatch(format!(
                "cannot concatenate datasets of dimension {} and {}",
                self.m, other.m
            )));
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Self::from_row_major(self.m, values)
    }
}

/// Posterior membership probabilities `H[t][j] = P(component j | x_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    h: DMatrix<f64>,
}

impl Responsibilities {
    pub(crate) fn from_matrix(h: DMatrix<f64>) -> Self {
        Self { h }
    }

    /// The `N x K` matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn get(&self, t: usize, j: usize) -> f64 {
        self.h[(t, j)]
    }

    pub fn n(&self) -> usize {
        self.h.nrows()
    }

    pub fn k(&self) -> usize {
        self.h.ncols()
    }

    /// `n_j = sum_t h_j(t)`, the responsibility mass of each component.
    pub fn column_sums(&self) -> DVector<f64> {
        DVector::from_iterator(self.k(), self.h.column_iter().map(|c| c.sum()))
    }
}
