use nalgebra::{DMatrix, DVector, Schur};
use serde::{Deserialize, Serialize};

use super::SectorBounds;
use crate::dynamics::Algorithm;
use crate::gmm::{Dataset, GmmParams, ThetaLayout, ThetaVector};
use crate::{GemError, Result};

/// Reporting convention: spectral radius below this is "Newton-like".
pub const NEWTON_LIKE_THRESHOLD: f64 = 0.1;
/// Reporting convention: spectral radius above this is "first-order".
pub const FIRST_ORDER_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    NewtonLike,
    FirstOrder,
    Mixed,
}

impl Classification {
    /// Classifies by spectral radius using the 0.1 / 0.9 reporting thresholds.
    pub fn from_spectral_radius(radius: f64) -> Self {
        if radius < NEWTON_LIKE_THRESHOLD {
            Classification::NewtonLike
        } else if radius > FIRST_ORDER_THRESHOLD {
            Classification::FirstOrder
        } else {
            Classification::Mixed
        }
    }
}

/// Finite-difference Jacobian of an update map and its spectrum.
#[derive(Debug, Clone)]
pub struct JacobianReport {
    pub jacobian: DMatrix<f64>,
    /// Eigenvalue moduli, largest first.
    pub eigen_moduli: Vec<f64>,
    pub classification: Classification,
}

impl JacobianReport {
    pub fn from_jacobian(jacobian: DMatrix<f64>) -> Result<Self> {
        let mut eigen_moduli = eigen_moduli(&jacobian)?;
        eigen_moduli.sort_by(|a, b| b.total_cmp(a));
        let radius = eigen_moduli.first().copied().unwrap_or(0.0);
        Ok(Self {
            jacobian,
            eigen_moduli,
            classification: Classification::from_spectral_radius(radius),
        })
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigen_moduli.first().copied().unwrap_or(0.0)
    }
}

fn eigen_moduli(j: &DMatrix<f64>) -> Result<Vec<f64>> {
    if j.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(j.clone(), f64::EPSILON, 100_000).ok_or_else(|| {
        GemError::InvalidArgument("eigenvalue iteration did not converge".into())
    })?;
    Ok(schur.complex_eigenvalues().iter().map(|z| z.norm()).collect())
}

/// Feasible direction for coordinate `i`: the orthogonal projection of the
/// unit vector `e_i` onto directions that keep `sum(alpha) = 1` and every
/// covariance symmetric.
fn feasible_direction(layout: ThetaLayout, i: usize) -> DVector<f64> {
    let mut d = DVector::zeros(layout.len());
    let k = layout.k;
    if i < k {
        d.rows_range_mut(layout.alpha_range())
            .fill(-1.0 / k as f64);
        d[i] += 1.0;
    } else if i < layout.sigma_block().start {
        d[i] = 1.0;
    } else {
        let m = layout.m;
        let offset = i - layout.sigma_block().start;
        let j = offset / (m * m);
        let within = offset % (m * m);
        let (a, b) = (within % m, within / m);
        let base = layout.sigma_range(j).start;
        d[base + a + b * m] += 0.5;
        d[base + b + a * m] += 0.5;
    }
    d
}

/// Orthonormal basis (as columns) of the feasible tangent space: a Helmert
/// basis of the zero-sum weight directions, unit mean directions, and the
/// symmetric-matrix basis for each covariance.
pub fn tangent_basis(layout: ThetaLayout) -> DMatrix<f64> {
    let (k, m) = (layout.k, layout.m);
    let mut cols: Vec<DVector<f64>> = Vec::new();
    for i in 1..k {
        let mut v = DVector::zeros(layout.len());
        let scale = 1.0 / ((i * (i + 1)) as f64).sqrt();
        for c in 0..i {
            v[c] = scale;
        }
        v[i] = -(i as f64) * scale;
        cols.push(v);
    }
    for i in layout.mu_block() {
        let mut v = DVector::zeros(layout.len());
        v[i] = 1.0;
        cols.push(v);
    }
    for j in 0..k {
        let base = layout.sigma_range(j).start;
        for b in 0..m {
            for a in b..m {
                let mut v = DVector::zeros(layout.len());
                if a == b {
                    v[base + a + a * m] = 1.0;
                } else {
                    let s = std::f64::consts::FRAC_1_SQRT_2;
                    v[base + a + b * m] = s;
                    v[base + b + a * m] = s;
                }
                cols.push(v);
            }
        }
    }
    DMatrix::from_columns(&cols)
}

/// Central-difference Jacobian of `map` at `params`.
///
/// Column `i` is `(F(theta + h d_i) - F(theta - h d_i)) / 2h` where `d_i` is
/// the feasible projection of the unit vector `e_i`, so every probe point
/// stays on the simplex with symmetric covariances. The result equals
/// `DF * Pi` with `Pi` the orthogonal projector onto the feasible directions;
/// on that subspace it is the differential of the map.
pub fn map_jacobian<F>(params: &GmmParams, fd_step: f64, map: F) -> Result<DMatrix<f64>>
where
    F: Fn(&GmmParams) -> Result<ThetaVector>,
{
    if !(fd_step > 0.0 && fd_step.is_finite()) {
        return Err(GemError::InvalidArgument(format!(
            "finite-difference step must be positive, got {fd_step}"
        )));
    }
    let layout = params.layout();
    let n = layout.len();
    let theta = params.flatten();
    let mut jac = DMatrix::zeros(n, n);
    for i in 0..n {
        let d = feasible_direction(layout, i);
        if d.iter().all(|v| *v == 0.0) {
            continue;
        }
        let eval = |sign: f64| -> Result<DVector<f64>> {
            let probe = ThetaVector::new(layout, theta.values() + &d * (sign * fd_step))?;
            let p = GmmParams::unflatten(&probe)?;
            let out = map(&p)?;
            layout.check(out.len())?;
            Ok(out.into_values())
        };
        let wrap = |e: GemError| GemError::Perturbed {
            index: i,
            source: Box::new(e),
        };
        let plus = eval(1.0).map_err(wrap)?;
        let minus = eval(-1.0).map_err(wrap)?;
        jac.set_column(i, &((plus - minus) / (2.0 * fd_step)));
    }
    Ok(jac)
}

/// Jacobian report for one of the update maps at `params`.
pub fn update_map_jacobian(
    params: &GmmParams,
    data: &Dataset,
    algorithm: &Algorithm,
    fd_step: f64,
) -> Result<JacobianReport> {
    let jac = map_jacobian(params, fd_step, |p| {
        algorithm.step(p, data).map(|q| q.flatten())
    })?;
    JacobianReport::from_jacobian(jac)
}

/// Estimates sector bounds from the step field `phi(theta) = F(theta) - theta`
/// at the given points: the extreme eigenvalues of the symmetric part of
/// `-D phi` restricted to the feasible tangent space, taken over all points.
pub fn estimate_sector_bounds(
    points: &[GmmParams],
    data: &Dataset,
    algorithm: &Algorithm,
    fd_step: f64,
) -> Result<SectorBounds> {
    let first = points
        .first()
        .ok_or_else(|| GemError::InvalidArgument("no points to estimate bounds at".into()))?;
    let basis = tangent_basis(first.layout());
    let r = basis.ncols();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in points {
        if p.layout() != first.layout() {
            return Err(GemError::DimensionMismatch(
                "points have different layouts".into(),
            ));
        }
        let report = update_map_jacobian(p, data, algorithm, fd_step)?;
        let restricted = basis.transpose() * &report.jacobian * &basis;
        let neg_field = DMatrix::identity(r, r) - restricted;
        let sym = (&neg_field + neg_field.transpose()) * 0.5;
        let eig = sym.symmetric_eigenvalues();
        lo = lo.min(eig.min());
        hi = hi.max(eig.max());
    }
    SectorBounds::new(lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tangent_basis_is_orthonormal_and_feasible() {
        let layout = ThetaLayout::new(3, 2);
        let q = tangent_basis(layout);
        // (K - 1) + mK + K m (m + 1) / 2
        assert_eq!(q.ncols(), 2 + 6 + 9);
        let gram = q.transpose() * &q;
        assert!((gram - DMatrix::<f64>::identity(17, 17)).amax() < 1e-14);
        for c in q.column_iter() {
            let s: f64 = c.rows_range(layout.alpha_range()).sum();
            assert!(s.abs() < 1e-14);
        }
    }

    #[test]
    fn feasible_directions_form_the_projector() {
        let layout = ThetaLayout::new(2, 2);
        let q = tangent_basis(layout);
        let projector = &q * q.transpose();
        for i in 0..layout.len() {
            let d = feasible_direction(layout, i);
            assert!((d - projector.column(i)).amax() < 1e-14, "column {i}");
        }
    }

    #[test]
    fn identity_map_gives_the_feasible_projector() {
        let p = GmmParams::from_nested(
            &[0.3, 0.7],
            &[vec![0.0, 1.0], vec![2.0, -1.0]],
            &[
                vec![vec![1.0, 0.2], vec![0.2, 2.0]],
                vec![vec![0.5, 0.0], vec![0.0, 0.5]],
            ],
        )
        .unwrap();
        let jac = map_jacobian(&p, 1e-5, |q| Ok(q.flatten())).unwrap();
        let q = tangent_basis(p.layout());
        let restricted = q.transpose() * &jac * &q;
        assert!((restricted - DMatrix::<f64>::identity(q.ncols(), q.ncols())).amax() < 1e-8);
        let projector = &q * q.transpose();
        assert!((jac - projector).amax() < 1e-8);
    }

    #[test]
    fn classification_thresholds() {
        assert_eq!(Classification::from_spectral_radius(0.05), Classification::NewtonLike);
        assert_eq!(Classification::from_spectral_radius(0.5), Classification::Mixed);
        assert_eq!(Classification::from_spectral_radius(0.95), Classification::FirstOrder);
    }

    #[test]
    fn eigen_moduli_of_rotation() {
        let r = DMatrix::from_row_slice(2, 2, &[0.0, -0.5, 0.5, 0.0]);
        let report = JacobianReport::from_jacobian(r).unwrap();
        for v in &report.eigen_moduli {
            assert!((v - 0.5).abs() < 1e-14);
        }
        assert_eq!(report.classification, Classification::Mixed);
    }
}
