//! Closed-form EM updates and the analytic log-likelihood gradient.

use nalgebra::{DMatrix, DVector};

use crate::gmm::{responsibilities, Dataset, GmmParams, Responsibilities, ThetaVector};
use crate::{GemError, Result};

/// A component whose responsibility mass falls below `DEGENERATE_MASS * N`
/// is considered empty.
pub const DEGENERATE_MASS: f64 = 1e-12;

/// Gradient of the log-likelihood, stored in the [`ThetaVector`] layout:
/// `[dL/dalpha; dL/dmu_1..K; dL/dvec Sigma_1..K]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector(pub ThetaVector);

impl GradientVector {
    pub fn as_theta(&self) -> &ThetaVector {
        &self.0
    }

    pub fn values(&self) -> &DVector<f64> {
        self.0.values()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
}

/// Posteriors together with the per-component responsibility mass.
#[derive(Debug, Clone)]
pub(crate) struct EStep {
    pub h: Responsibilities,
    pub mass: DVector<f64>,
}

impl EStep {
    pub fn compute(params: &GmmParams, data: &Dataset) -> Result<Self> {
        let h = responsibilities(params, data)?;
        let mass = h.column_sums();
        Ok(Self { h, mass })
    }

    /// Fails with a degenerate-component error if some mass is (numerically) zero.
    pub fn require_nondegenerate(&self) -> Result<()> {
        let floor = DEGENERATE_MASS * self.h.n() as f64;
        match self.mass.iter().position(|&n| n.is_nan() || n < floor) {
            Some(j) => Err(GemError::DegenerateComponent {
                component: j,
                mass: self.mass[j],
            }),
            None => Ok(()),
        }
    }

    /// `sum_t h_j(t) x_t / n_j`.
    pub fn weighted_mean(&self, data: &Dataset, j: usize) -> DVector<f64> {
        let mut acc = DVector::zeros(data.dim());
        for (t, x) in data.rows().enumerate() {
            let w = self.h.get(t, j);
            for (a, v) in x.iter().enumerate() {
                acc[a] += w * v;
            }
        }
        acc / self.mass[j]
    }

    /// `sum_t h_j(t) (x_t - c)(x_t - c)^T`, exactly symmetric.
    pub fn scatter(&self, data: &Dataset, j: usize, center: &DVector<f64>) -> DMatrix<f64> {
        let m = data.dim();
        let mut acc = DMatrix::zeros(m, m);
        let mut z = vec![0.0; m];
        for (t, x) in data.rows().enumerate() {
            let w = self.h.get(t, j);
            for a in 0..m {
                z[a] = x[a] - center[a];
            }
            for b in 0..m {
                for a in b..m {
                    acc[(a, b)] += w * z[a] * z[b];
                }
            }
        }
        for b in 0..m {
            for a in (b + 1)..m {
                acc[(b, a)] = acc[(a, b)];
            }
        }
        acc
    }
}

#[derive(Clone, Copy)]
enum CovarianceCenter {
    /// Deviations about the freshly updated mean (classic EM).
    Updated,
    /// Deviations about the previous mean (shifted update).
    Previous,
}

fn closed_form_step(
    params: &GmmParams,
    data: &Dataset,
    center: CovarianceCenter,
) -> Result<GmmParams> {
    let e = EStep::compute(params, data)?;
    e.require_nondegenerate()?;
    let n = data.len() as f64;
    let k = params.k();

    let alpha = e.mass.map(|nj| nj / n);
    let mut mu = Vec::with_capacity(k);
    let mut sigma = Vec::with_capacity(k);
    for j in 0..k {
        let mean = e.weighted_mean(data, j);
        let c = match center {
            CovarianceCenter::Updated => &mean,
            CovarianceCenter::Previous => params.mean(j),
        };
        sigma.push(e.scatter(data, j, c) / e.mass[j]);
        mu.push(mean);
    }
    GmmParams::new(alpha, mu, sigma).map_err(|err| match err {
        GemError::InvalidCovariance { component, .. } => GemError::CovarianceViolation { component },
        other => other,
    })
}

/// One classic EM iteration: `alpha_j = n_j / N`, `mu_j` the
/// responsibility-weighted mean and `Sigma_j` the weighted scatter about the
/// new mean.
pub fn em_step(params: &GmmParams, data: &Dataset) -> Result<GmmParams> {
    closed_form_step(params, data, CovarianceCenter::Updated)
}

/// EM iteration whose covariance update uses deviations about the previous
/// means `mu_j^(k)` instead of the updated ones. Weight and mean updates are
/// those of [`em_step`].
pub fn shifted_em_step(params: &GmmParams, data: &Dataset) -> Result<GmmParams> {
    closed_form_step(params, data, CovarianceCenter::Previous)
}

/// Analytic gradient of the log-likelihood with respect to `theta`.
///
/// * `dL/dalpha_j = n_j / alpha_j` (the unconstrained partial; the simplex
///   constraint is left to the preconditioner and projection),
/// * `dL/dmu_j = Sigma_j^{-1} sum_t h_j(t) (x_t - mu_j)`,
/// * `dL/dvec Sigma_j = 1/2 vec(Sigma_j^{-1} M_j Sigma_j^{-1} - n_j Sigma_j^{-1})`
///   with `M_j = sum_t h_j(t) (x_t - mu_j)(x_t - mu_j)^T`.
///
/// The covariance block treats every entry of `Sigma_j` as an independent
/// coordinate.
pub fn grad_log_likelihood(params: &GmmParams, data: &Dataset) -> Result<GradientVector> {
    let e = EStep::compute(params, data)?;
    Ok(gradient_from_estep(params, data, &e))
}

pub(crate) fn gradient_from_estep(params: &GmmParams, data: &Dataset, e: &EStep) -> GradientVector {
    let layout = params.layout();
    let mut g = ThetaVector::zeros(layout);
    let values = g.values_mut();

    for j in 0..params.k() {
        values[j] = e.mass[j] / params.alpha()[j];

        let precision = params.precision(j);
        let mean = params.mean(j);
        let mut resid = DVector::zeros(params.dim());
        for (t, x) in data.rows().enumerate() {
            let w = e.h.get(t, j);
            for a in 0..params.dim() {
                resid[a] += w * (x[a] - mean[a]);
            }
        }
        let g_mu = &precision * resid;
        for (dst, v) in layout.mu_range(j).zip(g_mu.iter()) {
            values[dst] = *v;
        }

        let scatter = e.scatter(data, j, mean);
        let g_sigma = (&precision * scatter * &precision - &precision * e.mass[j]) * 0.5;
        for (dst, v) in layout.sigma_range(j).zip(g_sigma.as_slice()) {
            values[dst] = *v;
        }
    }
    GradientVector(g)
}

/// Plain gradient-ascent GEM step `theta + eta * grad L(theta)`.
///
/// The result is a raw vector: nothing keeps the weights on the simplex or the
/// covariances positive definite, which is the shortcoming the projected
/// variants address.
pub fn grad_ascent_gem_step(params: &GmmParams, data: &Dataset, eta: f64) -> Result<ThetaVector> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(GemError::InvalidArgument(format!(
            "step size must be positive and finite, got {eta}"
        )));
    }
    let g = grad_log_likelihood(params, data)?;
    let mut theta = params.flatten();
    *theta.values_mut() += g.values() * eta;
    Ok(theta)
}
