use std::fmt;

use nalgebra::DVector;

use super::{Preconditioner, Projection};
use crate::em::{em_step, gradient_from_estep, shifted_em_step, EStep};
use crate::gmm::{Dataset, GmmParams, ThetaLayout, ThetaVector, SUM_TOLERANCE};
use crate::{GemError, Result};

/// Per-component scaling of the mean updates, `W = diag(beta_1 I_m, .., beta_K I_m)`.
///
/// The full design matrix is `D = diag(I_K, W, I)` with the trailing identity
/// sized to the covariance block (`m^2 K`), so only mean coordinates are
/// rescaled.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightDesign {
    betas: Vec<f64>,
}

impl WeightDesign {
    pub fn new(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(GemError::InvalidArgument("empty beta vector".into()));
        }
        if let Some(b) = betas.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
            return Err(GemError::InvalidArgument(format!(
                "beta values must be positive and finite, got {b}"
            )));
        }
        Ok(Self { betas })
    }

    /// The same `beta` for each of `k` components.
    pub fn uniform(k: usize, beta: f64) -> Result<Self> {
        Self::new(vec![beta; k])
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// Diagonal of `D` for the given layout.
    pub fn diagonal(&self, layout: ThetaLayout) -> Result<DVector<f64>> {
        self.check(layout)?;
        let mut d = DVector::from_element(layout.len(), 1.0);
        for (j, beta) in self.betas.iter().enumerate() {
            d.rows_range_mut(layout.mu_range(j)).fill(*beta);
        }
        Ok(d)
    }

    fn check(&self, layout: ThetaLayout) -> Result<()> {
        if self.betas.len() != layout.k {
            return Err(GemError::DimensionMismatch(format!(
                "{} beta values for {} components",
                self.betas.len(),
                layout.k
            )));
        }
        Ok(())
    }

    fn scale_means(&self, v: &mut ThetaVector) -> Result<()> {
        let layout = v.layout();
        self.check(layout)?;
        for (j, beta) in self.betas.iter().enumerate() {
            for i in layout.mu_range(j) {
                v.values_mut()[i] *= beta;
            }
        }
        Ok(())
    }
}

/// Update map selector for [`super::run`] and the analysis tools.
#[derive(Debug, Clone, PartialEq)]
pub enum Algorithm {
    Em,
    ShiftedEm,
    PbGem,
    WPbGem(WeightDesign),
}

impl Algorithm {
    pub fn step(&self, params: &GmmParams, data: &Dataset) -> Result<GmmParams> {
        match self {
            Algorithm::Em => em_step(params, data),
            Algorithm::ShiftedEm => shifted_em_step(params, data),
            Algorithm::PbGem => pb_gem_step(params, data),
            Algorithm::WPbGem(design) => w_pb_gem_step(params, data, design),
        }
    }

    /// Short identifier used in reports (`em`, `shifted-em`, `pb-gem`, `w-pb-gem`).
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Em => "em",
            Algorithm::ShiftedEm => "shifted-em",
            Algorithm::PbGem => "pb-gem",
            Algorithm::WPbGem(_) => "w-pb-gem",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Projection-based GEM step `theta + E E^T P(theta) grad L(theta)`.
///
/// Post-step covariances are symmetrized before the positive-definiteness
/// check. Weight positivity is checked, never repaired.
pub fn pb_gem_step(params: &GmmParams, data: &Dataset) -> Result<GmmParams> {
    projected_step(params, data, None)
}

/// Weighted PB-GEM step `theta + E E^T D P(theta) grad L(theta)`.
///
/// With every `beta_i = 1` the result is bit-identical to [`pb_gem_step`].
pub fn w_pb_gem_step(
    params: &GmmParams,
    data: &Dataset,
    design: &WeightDesign,
) -> Result<GmmParams> {
    projected_step(params, data, Some(design))
}

fn projected_step(
    params: &GmmParams,
    data: &Dataset,
    design: Option<&WeightDesign>,
) -> Result<GmmParams> {
    let e = EStep::compute(params, data)?;
    let precond = Preconditioner::from_estep(params, data.len(), &e)?;
    let grad = gradient_from_estep(params, data, &e);
    let mut step = precond.apply(&grad)?;
    if let Some(d) = design {
        d.scale_means(&mut step)?;
    }
    Projection::new(params.layout()).apply_in_place(&mut step);
    let theta = &params.flatten() + &step;
    into_feasible_params(&theta)
}

/// Converts a stepped vector back into parameters, symmetrizing the
/// covariances and reporting which constraint failed.
pub(crate) fn into_feasible_params(theta: &ThetaVector) -> Result<GmmParams> {
    let (alpha, mu, sigma) = theta.split();
    let sum_residual = alpha.sum() - 1.0;
    if let Some(j) = alpha.iter().position(|a| a.is_nan() || *a <= 0.0) {
        return Err(GemError::SimplexViolation {
            component: j,
            value: alpha[j],
            sum_residual,
        });
    }
    if sum_residual.abs() > SUM_TOLERANCE {
        let j = alpha.imax();
        return Err(GemError::SimplexViolation {
            component: j,
            value: alpha[j],
            sum_residual,
        });
    }
    let sigma: Vec<_> = sigma.into_iter().map(|s| (&s + s.transpose()) * 0.5).collect();
    GmmParams::new(alpha, mu, sigma).map_err(|err| match err {
        GemError::InvalidCovariance { component, .. } => GemError::CovarianceViolation { component },
        other => other,
    })
}
