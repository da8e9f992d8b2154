use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::{GemError, Result};

/// Shape of the flat parameter vector for `K` components in dimension `m`.
///
/// The layout is `[alpha (K) | mu_1 .. mu_K (m each) | vec Sigma_1 .. vec Sigma_K (m^2 each)]`
/// where `vec` stacks the columns of a matrix, so entry `(a, b)` of `Sigma_j`
/// lives at offset `K + mK + j m^2 + a + b m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ThetaLayout {
    pub k: usize,
    pub m: usize,
}

impl ThetaLayout {
    pub fn new(k: usize, m: usize) -> Self {
        Self { k, m }
    }

    /// `K + mK + m^2 K`.
    pub fn len(&self) -> usize {
        self.k * (1 + self.m + self.m * self.m)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn alpha_range(&self) -> Range<usize> {
        0..self.k
    }

    pub fn mu_range(&self, j: usize) -> Range<usize> {
        let start = self.k + j * self.m;
        start..start + self.m
    }

    pub fn sigma_range(&self, j: usize) -> Range<usize> {
        let start = self.k + self.k * self.m + j * self.m * self.m;
        start..start + self.m * self.m
    }

    /// All mean coordinates.
    pub fn mu_block(&self) -> Range<usize> {
        self.k..self.k + self.k * self.m
    }

    /// All covariance coordinates.
    pub fn sigma_block(&self) -> Range<usize> {
        self.k + self.k * self.m..self.len()
    }

    pub(crate) fn check(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(GemError::DimensionMismatch(format!(
                "vector of length {len} does not match layout K={}, m={} (length {})",
                self.k,
                self.m,
                self.len()
            )));
        }
        Ok(())
    }
}

/// Flat parameter vector in the [`ThetaLayout`] order.
///
/// Unlike [`crate::GmmParams`], a `ThetaVector` is not required to be
/// feasible: raw gradient steps produce vectors whose weights leave the
/// simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaVector {
    layout: ThetaLayout,
    values: DVector<f64>,
}

impl ThetaVector {
    pub fn new(layout: ThetaLayout, values: DVector<f64>) -> Result<Self> {
        layout.check(values.len())?;
        Ok(Self { layout, values })
    }

    pub(crate) fn from_parts(layout: ThetaLayout, values: DVector<f64>) -> Self {
        debug_assert_eq!(layout.len(), values.len());
        Self { layout, values }
    }

    pub fn zeros(layout: ThetaLayout) -> Self {
        Self::from_parts(layout, DVector::zeros(layout.len()))
    }

    pub fn layout(&self) -> ThetaLayout {
        self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut DVector<f64> {
        &mut self.values
    }

    pub fn into_values(self) -> DVector<f64> {
        self.values
    }

    pub fn alpha(&self) -> &[f64] {
        &self.values.as_slice()[self.layout.alpha_range()]
    }

    pub fn mu(&self, j: usize) -> &[f64] {
        &self.values.as_slice()[self.layout.mu_range(j)]
    }

    /// `vec Sigma_j` (column-stacked).
    pub fn sigma_vec(&self, j: usize) -> &[f64] {
        &self.values.as_slice()[self.layout.sigma_range(j)]
    }

    pub fn sigma_matrix(&self, j: usize) -> DMatrix<f64> {
        let m = self.layout.m;
        DMatrix::from_column_slice(m, m, self.sigma_vec(j))
    }

    /// Splits into raw `(alpha, means, covariances)` without validation.
    pub fn split(&self) -> (DVector<f64>, Vec<DVector<f64>>, Vec<DMatrix<f64>>) {
        let k = self.layout.k;
        let alpha = DVector::from_column_slice(self.alpha());
        let mu = (0..k).map(|j| DVector::from_column_slice(self.mu(j))).collect();
        let sigma = (0..k).map(|j| self.sigma_matrix(j)).collect();
        (alpha, mu, sigma)
    }

    pub fn norm(&self) -> f64 {
        self.values.norm()
    }
}

impl std::ops::Add<&ThetaVector> for &ThetaVector {
    type Output = ThetaVector;

    fn add(self, rhs: &ThetaVector) -> ThetaVector {
        assert_eq!(self.layout, rhs.layout, "layout mismatch");
        ThetaVector::from_parts(self.layout, &self.values + &rhs.values)
    }
}

impl std::ops::Sub<&ThetaVector> for &ThetaVector {
    type Output = ThetaVector;

    fn sub(self, rhs: &ThetaVector) -> ThetaVector {
        assert_eq!(self.layout, rhs.layout, "layout mismatch");
        ThetaVector::from_parts(self.layout, &self.values - &rhs.values)
    }
}
