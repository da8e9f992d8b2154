use nalgebra::{Cholesky, DMatrix, DVector};

use super::theta::{ThetaLayout, ThetaVector};
use crate::{GemError, Result};

/// Allowed deviation of `sum(alpha)` from one.
pub const SUM_TOLERANCE: f64 = 1e-12;
/// Allowed elementwise asymmetry `max |S_ab - S_ba|` of a covariance.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Largest elementwise asymmetry of a square matrix.
pub fn max_asymmetry(s: &DMatrix<f64>) -> f64 {
    let n = s.nrows();
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in (a + 1)..n {
            worst = worst.max((s[(a, b)] - s[(b, a)]).abs());
        }
    }
    worst
}

/// Cached Cholesky factor `Sigma = L L^T` of one component covariance.
#[derive(Debug, Clone)]
pub(crate) struct CovFactor {
    lower: DMatrix<f64>,
    log_det: f64,
}

impl CovFactor {
    fn new(sigma: &DMatrix<f64>, component: usize) -> Result<Self> {
        let chol = Cholesky::new(sigma.clone()).ok_or_else(|| GemError::InvalidCovariance {
            component,
            reason: "not positive definite (Cholesky factorization failed)".into(),
        })?;
        let lower = chol.unpack();
        let log_det = 2.0 * lower.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        if !log_det.is_finite() {
            return Err(GemError::InvalidCovariance {
                component,
                reason: "log-determinant is not finite".into(),
            });
        }
        Ok(Self { lower, log_det })
    }

    /// `ln det Sigma`.
    pub(crate) fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Overwrites `z` with `L^{-1} z` and returns `z^T Sigma^{-1} z`.
    pub(crate) fn mahalanobis_sq(&self, z: &mut [f64]) -> f64 {
        let m = z.len();
        let mut acc = 0.0;
        for i in 0..m {
            let (solved, rest) = z.split_at(i);
            let mut v = rest[0];
            for (k, zk) in solved.iter().enumerate() {
                v -= self.lower[(i, k)] * zk;
            }
            v /= self.lower[(i, i)];
            z[i] = v;
            acc += v * v;
        }
        acc
    }

    /// `Sigma^{-1}`, symmetrized.
    pub(crate) fn inverse(&self) -> DMatrix<f64> {
        let m = self.lower.nrows();
        let mut linv = DMatrix::<f64>::identity(m, m);
        // L is lower triangular with a positive diagonal, so this cannot fail.
        self.lower.solve_lower_triangular_mut(&mut linv);
        let inv = linv.transpose() * &linv;
        (&inv + inv.transpose()) * 0.5
    }
}

/// Gaussian mixture parameters `(alpha, mu_1..mu_K, Sigma_1..Sigma_K)`.
///
/// Construction validates the simplex constraint on `alpha` and that every
/// covariance is symmetric and positive definite; a value of this type is
/// always a member of the feasible parameter set. Components with `K = 1`
/// carry `alpha = [1]`.
#[derive(Debug, Clone)]
pub struct GmmParams {
    alpha: DVector<f64>,
    mu: Vec<DVector<f64>>,
    sigma: Vec<DMatrix<f64>>,
    factors: Vec<CovFactor>,
}

impl PartialEq for GmmParams {
    fn eq(&self, other: &Self) -> bool {
        self.alpha == other.alpha && self.mu == other.mu && self.sigma == other.sigma
    }
}

impl GmmParams {
    pub fn new(
        alpha: DVector<f64>,
        mu: Vec<DVector<f64>>,
        sigma: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let k = alpha.len();
        if k == 0 {
            return Err(GemError::InvalidArgument(
                "a mixture needs at least one component".into(),
            ));
        }
        if mu.len() != k || sigma.len() != k {
            return Err(GemError::DimensionMismatch(format!(
                "{} weights, {} means, {} covariances",
                k,
                mu.len(),
                sigma.len()
            )));
        }
        let m = mu[0].len();
        if m == 0 {
            return Err(GemError::InvalidArgument(
                "data dimension must be positive".into(),
            ));
        }

        for (j, &a) in alpha.iter().enumerate() {
            if !a.is_finite() || a <= 0.0 || a > 1.0 {
                return Err(GemError::InvalidWeights(format!(
                    "alpha[{j}] = {a} is outside (0, 1]"
                )));
            }
        }
        let residual = (alpha.sum() - 1.0).abs();
        if residual > SUM_TOLERANCE {
            return Err(GemError::InvalidWeights(format!(
                "weights sum to 1 {:+e}",
                alpha.sum() - 1.0
            )));
        }

        for (j, mean) in mu.iter().enumerate() {
            if mean.len() != m {
                return Err(GemError::DimensionMismatch(format!(
                    "mean {j} has length {}, expected {m}",
                    mean.len()
                )));
            }
            if mean.iter().any(|v| !v.is_finite()) {
                return Err(GemError::InvalidArgument(format!(
                    "mean {j} has non-finite entries"
                )));
            }
        }

        let mut factors = Vec::with_capacity(k);
        for (j, s) in sigma.iter().enumerate() {
            if s.nrows() != m || s.ncols() != m {
                return Err(GemError::DimensionMismatch(format!(
                    "covariance {j} is {}x{}, expected {m}x{m}",
                    s.nrows(),
                    s.ncols()
                )));
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(GemError::InvalidCovariance {
                    component: j,
                    reason: "non-finite entries".into(),
                });
            }
            let asym = max_asymmetry(s);
            if asym > SYMMETRY_TOLERANCE {
                return Err(GemError::InvalidCovariance {
                    component: j,
                    reason: format!("asymmetric (max |S_ab - S_ba| = {asym:e})"),
                });
            }
            factors.push(CovFactor::new(s, j)?);
        }

        Ok(Self {
            alpha,
            mu,
            sigma,
            factors,
        })
    }

    /// Convenience constructor from nested vectors; matrices are row-major.
    pub fn from_nested(
        alpha: &[f64],
        mu: &[Vec<f64>],
        sigma: &[Vec<Vec<f64>>],
    ) -> Result<Self> {
        let mut covs = Vec::with_capacity(sigma.len());
        for (j, rows) in sigma.iter().enumerate() {
            let m = rows.len();
            if rows.iter().any(|r| r.len() != m) {
                return Err(GemError::DimensionMismatch(format!(
                    "covariance {j} is not square"
                )));
            }
            covs.push(DMatrix::from_fn(m, m, |a, b| rows[a][b]));
        }
        Self::new(
            DVector::from_column_slice(alpha),
            mu.iter().map(|v| DVector::from_column_slice(v)).collect(),
            covs,
        )
    }

    /// Equal weights and identity covariances at the given means.
    pub fn with_means(mu: Vec<DVector<f64>>) -> Result<Self> {
        let k = mu.len();
        let m = mu.first().map(|v| v.len()).unwrap_or(0);
        Self::new(
            DVector::from_element(k, 1.0 / k as f64),
            mu,
            vec![DMatrix::identity(m, m); k],
        )
    }

    /// Number of mixture components `K`.
    pub fn k(&self) -> usize {
        self.alpha.len()
    }

    /// Data dimension `m`.
    pub fn dim(&self) -> usize {
        self.mu[0].len()
    }

    pub fn layout(&self) -> ThetaLayout {
        ThetaLayout::new(self.k(), self.dim())
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn means(&self) -> &[DVector<f64>] {
        &self.mu
    }

    pub fn mean(&self, j: usize) -> &DVector<f64> {
        &self.mu[j]
    }

    pub fn covariances(&self) -> &[DMatrix<f64>] {
        &self.sigma
    }

    pub fn covariance(&self, j: usize) -> &DMatrix<f64> {
        &self.sigma[j]
    }

    pub(crate) fn factor(&self, j: usize) -> &CovFactor {
        &self.factors[j]
    }

    /// `Sigma_j^{-1}` computed from the cached factor.
    pub fn precision(&self, j: usize) -> DMatrix<f64> {
        self.factors[j].inverse()
    }

    /// `|sum(alpha) - 1|`.
    pub fn alpha_residual(&self) -> f64 {
        (self.alpha.sum() - 1.0).abs()
    }

    /// Largest covariance asymmetry over all components.
    pub fn symmetry_residual(&self) -> f64 {
        self.sigma.iter().map(max_asymmetry).fold(0.0, f64::max)
    }

    /// Flattens into `theta = [alpha; mu_1; ..; mu_K; vec Sigma_1; ..; vec Sigma_K]`,
    /// where `vec` stacks columns.
    pub fn flatten(&self) -> ThetaVector {
        let layout = self.layout();
        let mut values = Vec::with_capacity(layout.len());
        values.extend(self.alpha.iter());
        for mean in &self.mu {
            values.extend(mean.iter());
        }
        for s in &self.sigma {
            // nalgebra storage is column-major, which is exactly vec(S).
            values.extend(s.as_slice());
        }
        ThetaVector::from_parts(layout, DVector::from_vec(values))
    }

    /// Inverse of [`GmmParams::flatten`]; validates the result.
    pub fn unflatten(theta: &ThetaVector) -> Result<Self> {
        let (alpha, mu, sigma) = theta.split();
        Self::new(alpha, mu, sigma)
    }

    /// Permutes components: component `j` of the result is component
    /// `order[j]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.k() {
            return Err(GemError::DimensionMismatch(
                "permutation length differs from K".into(),
            ));
        }
        Self::new(
            DVector::from_iterator(self.k(), order.iter().map(|&i| self.alpha[i])),
            order.iter().map(|&i| self.mu[i].clone()).collect(),
            order.iter().map(|&i| self.sigma[i].clone()).collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_component() -> GmmParams {
        GmmParams::from_nested(
            &[0.3, 0.7],
            &[vec![1.0, -2.0], vec![0.5, 0.25]],
            &[
                vec![vec![2.0, 0.3], vec![0.3, 1.0]],
                vec![vec![1.0, 0.0], vec![0.0, 0.5]],
            ],
        )
        .unwrap()
    }

    #[test]
    fn flatten_layout_stacks_columns() {
        let p = two_component();
        let theta = p.flatten();
        assert_eq!(theta.len(), 2 + 4 + 8);
        assert_eq!(&theta.values().as_slice()[..2], &[0.3, 0.7]);
        assert_eq!(&theta.values().as_slice()[2..6], &[1.0, -2.0, 0.5, 0.25]);
        // Sigma_1 = [[2, 0.3], [0.3, 1]] column by column.
        assert_eq!(&theta.values().as_slice()[6..10], &[2.0, 0.3, 0.3, 1.0]);
        assert_eq!(GmmParams::unflatten(&theta).unwrap(), p);
    }

    #[test]
    fn rejects_weights_off_simplex() {
        let err = GmmParams::from_nested(
            &[0.3, 0.6],
            &[vec![0.0], vec![1.0]],
            &[vec![vec![1.0]], vec![vec![1.0]]],
        )
        .unwrap_err();
        assert!(matches!(err, GemError::InvalidWeights(_)));

        let err = GmmParams::from_nested(
            &[1.2, -0.2],
            &[vec![0.0], vec![1.0]],
            &[vec![vec![1.0]], vec![vec![1.0]]],
        )
        .unwrap_err();
        assert!(matches!(err, GemError::InvalidWeights(_)));
    }

    #[test]
    fn rejects_singular_and_asymmetric_covariances() {
        let singular = GmmParams::from_nested(
            &[1.0],
            &[vec![0.0, 0.0]],
            &[vec![vec![1.0, 1.0], vec![1.0, 1.0]]],
        );
        assert!(matches!(
            singular,
            Err(GemError::InvalidCovariance { component: 0, .. })
        ));

        let asym = GmmParams::from_nested(
            &[1.0],
            &[vec![0.0, 0.0]],
            &[vec![vec![1.0, 0.1], vec![0.1 + 1e-9, 1.0]]],
        );
        assert!(matches!(asym, Err(GemError::InvalidCovariance { .. })));
    }

    #[test]
    fn precision_inverts_covariance() {
        let p = two_component();
        let prod = p.covariance(0) * p.precision(0);
        assert!((prod - DMatrix::<f64>::identity(2, 2)).amax() < 1e-14);
    }

    #[test]
    fn permutation_reorders_components() {
        let p = two_component();
        let q = p.permuted(&[1, 0]).unwrap();
        assert_eq!(q.alpha()[0], 0.7);
        assert_eq!(q.mean(1), p.mean(0));
    }
}
