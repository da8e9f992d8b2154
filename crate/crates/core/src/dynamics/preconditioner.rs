use nalgebra::{DMatrix, DVector};

use crate::em::{EStep, GradientVector};
use crate::gmm::{Dataset, GmmParams, ThetaLayout, ThetaVector};
use crate::{GemError, Result};

/// Block-diagonal preconditioner
/// `P(theta) = diag[P_alpha, P_mu_1..P_mu_K, P_Sigma_1..P_Sigma_K]` with
///
/// * `P_alpha = (diag(alpha) - alpha alpha^T) / N`
/// * `P_mu_j = Sigma_j / n_j`
/// * `P_Sigma_j = 2 (Sigma_j kron Sigma_j) / n_j`
///
/// where `n_j` is the responsibility mass of component `j`. With these
/// blocks `theta + P grad L` reproduces the shifted-covariance EM update.
#[derive(Debug, Clone, PartialEq)]
pub struct Preconditioner {
    layout: ThetaLayout,
    pub p_alpha: DMatrix<f64>,
    pub p_mu: Vec<DMatrix<f64>>,
    pub p_sigma: Vec<DMatrix<f64>>,
}

impl Preconditioner {
    pub fn build(params: &GmmParams, data: &Dataset) -> Result<Self> {
        let e = EStep::compute(params, data)?;
        Self::from_estep(params, data.len(), &e)
    }

    pub(crate) fn from_estep(params: &GmmParams, n: usize, e: &EStep) -> Result<Self> {
        e.require_nondegenerate()?;
        Ok(Self::from_masses(params, n, &e.mass))
    }

    /// Builds the blocks from explicit responsibility masses `n_j`.
    pub fn from_masses(params: &GmmParams, n: usize, mass: &DVector<f64>) -> Self {
        let alpha = params.alpha();
        let p_alpha = (DMatrix::from_diagonal(alpha) - alpha * alpha.transpose()) / n as f64;
        let p_mu = (0..params.k())
            .map(|j| params.covariance(j) / mass[j])
            .collect();
        let p_sigma = (0..params.k())
            .map(|j| {
                let s = params.covariance(j);
                s.kronecker(s) * (2.0 / mass[j])
            })
            .collect();
        Self {
            layout: params.layout(),
            p_alpha,
            p_mu,
            p_sigma,
        }
    }

    pub fn layout(&self) -> ThetaLayout {
        self.layout
    }

    /// `P g`, evaluated block by block.
    pub fn apply(&self, g: &GradientVector) -> Result<ThetaVector> {
        let g = g.as_theta();
        if g.layout() != self.layout {
            return Err(GemError::DimensionMismatch(
                "gradient layout differs from preconditioner layout".into(),
            ));
        }
        let layout = self.layout;
        let mut out = ThetaVector::zeros(layout);
        let values = out.values_mut();

        let a = &self.p_alpha * DVector::from_column_slice(g.alpha());
        values.rows_range_mut(layout.alpha_range()).copy_from(&a);
        for j in 0..layout.k {
            let mu = &self.p_mu[j] * DVector::from_column_slice(g.mu(j));
            values.rows_range_mut(layout.mu_range(j)).copy_from(&mu);
            let s = &self.p_sigma[j] * DVector::from_column_slice(g.sigma_vec(j));
            values.rows_range_mut(layout.sigma_range(j)).copy_from(&s);
        }
        Ok(out)
    }

    /// Dense block-diagonal matrix of side `K + mK + m^2 K`.
    pub fn assemble(&self) -> DMatrix<f64> {
        let layout = self.layout;
        let n = layout.len();
        let mut out = DMatrix::zeros(n, n);
        let mut place = |range: std::ops::Range<usize>, block: &DMatrix<f64>| {
            out.view_mut((range.start, range.start), (range.len(), range.len()))
                .copy_from(block);
        };
        place(layout.alpha_range(), &self.p_alpha);
        for j in 0..layout.k {
            place(layout.mu_range(j), &self.p_mu[j]);
            place(layout.sigma_range(j), &self.p_sigma[j]);
        }
        out
    }
}
