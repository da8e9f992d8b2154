//! Component densities, log-likelihood, posteriors and the Q-function.
//!
//! Everything is evaluated in log space; posteriors and the likelihood go
//! through log-sum-exp so that distant points do not underflow.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::{Dataset, GmmParams, Responsibilities};
use crate::{GemError, Result};

fn check_dims(params: &GmmParams, data: &Dataset) -> Result<()> {
    if params.dim() != data.dim() {
        return Err(GemError::DimensionMismatch(format!(
            "parameters have dimension {}, data has {}",
            params.dim(),
            data.dim()
        )));
    }
    Ok(())
}

fn log_weighted_density(params: &GmmParams, j: usize, x: &[f64], scratch: &mut [f64]) -> f64 {
    let mean = params.mean(j);
    for (a, z) in scratch.iter_mut().enumerate() {
        *z = x[a] - mean[a];
    }
    let factor = params.factor(j);
    let quad = factor.mahalanobis_sq(scratch);
    let m = x.len() as f64;
    params.alpha()[j].ln() - 0.5 * (m * (2.0 * PI).ln() + factor.log_det()) - 0.5 * quad
}

/// `ln sum_i exp(v_i)`, computed stably. Returns `-inf` for an empty slice or
/// when every entry is `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Weighted component density `alpha_j N(x; mu_j, Sigma_j)` (zero-based `j`).
pub fn component_density(params: &GmmParams, j: usize, x: &[f64]) -> Result<f64> {
    if j >= params.k() {
        return Err(GemError::InvalidArgument(format!(
            "component {j} out of range for K = {}",
            params.k()
        )));
    }
    if x.len() != params.dim() {
        return Err(GemError::DimensionMismatch(format!(
            "point has dimension {}, model has {}",
            x.len(),
            params.dim()
        )));
    }
    let mut scratch = vec![0.0; x.len()];
    let value = log_weighted_density(params, j, x, &mut scratch).exp();
    if value > 0.0 {
        Ok(value)
    } else {
        Err(GemError::NumericUnderflow { sample: 0 })
    }
}

/// `N x K` matrix of `ln(alpha_j p(x_t | mu_j, Sigma_j))`.
pub fn log_joint(params: &GmmParams, data: &Dataset) -> Result<DMatrix<f64>> {
    check_dims(params, data)?;
    let k = params.k();
    let mut out = DMatrix::zeros(data.len(), k);
    let mut scratch = vec![0.0; data.dim()];
    for (t, x) in data.rows().enumerate() {
        for j in 0..k {
            out[(t, j)] = log_weighted_density(params, j, x, &mut scratch);
        }
    }
    Ok(out)
}

fn row_lse(lj: &DMatrix<f64>, t: usize, buf: &mut Vec<f64>) -> Result<f64> {
    buf.clear();
    buf.extend(lj.row(t).iter());
    let lse = log_sum_exp(buf);
    if lse.is_finite() {
        Ok(lse)
    } else {
        Err(GemError::NumericUnderflow { sample: t })
    }
}

/// `L(theta) = sum_t ln sum_j alpha_j p(x_t | mu_j, Sigma_j)`.
pub fn log_likelihood(params: &GmmParams, data: &Dataset) -> Result<f64> {
    let lj = log_joint(params, data)?;
    let mut buf = Vec::with_capacity(params.k());
    let mut total = 0.0;
    for t in 0..data.len() {
        total += row_lse(&lj, t, &mut buf)?;
    }
    Ok(total)
}

fn responsibilities_from_log_joint(lj: &DMatrix<f64>) -> Result<Responsibilities> {
    let mut h = lj.clone();
    for t in 0..lj.nrows() {
        let max = lj.row(t).max();
        if !max.is_finite() {
            return Err(GemError::NumericUnderflow { sample: t });
        }
        let mut total = 0.0;
        for j in 0..lj.ncols() {
            let w = (lj[(t, j)] - max).exp();
            h[(t, j)] = w;
            total += w;
        }
        for j in 0..lj.ncols() {
            h[(t, j)] /= total;
        }
    }
    Ok(Responsibilities::from_matrix(h))
}

/// Posterior responsibilities `h_j(t)` under `params`.
pub fn responsibilities(params: &GmmParams, data: &Dataset) -> Result<Responsibilities> {
    responsibilities_from_log_joint(&log_joint(params, data)?)
}

/// Expected complete-data log-likelihood
/// `Q(theta, theta') = sum_t sum_j h_j^{theta'}(t) ln(alpha_j p(x_t | mu_j, Sigma_j))`.
pub fn q_function(theta: &GmmParams, theta_prev: &GmmParams, data: &Dataset) -> Result<f64> {
    if theta.layout() != theta_prev.layout() {
        return Err(GemError::DimensionMismatch(
            "Q-function arguments have different shapes".into(),
        ));
    }
    let h = responsibilities(theta_prev, data)?;
    let lj = log_joint(theta, data)?;
    let mut total = 0.0;
    for t in 0..data.len() {
        for j in 0..theta.k() {
            let w = h.get(t, j);
            if w > 0.0 {
                total += w * lj[(t, j)];
            }
        }
    }
    if total.is_finite() {
        Ok(total)
    } else {
        Err(GemError::NumericUnderflow { sample: 0 })
    }
}
