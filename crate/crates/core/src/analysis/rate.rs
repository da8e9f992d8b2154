use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::{GemError, Result};

/// Slack on the largest eigenvalue when deciding `M <= 0`.
pub const LMI_SLACK: f64 = 1e-10;

/// Sector bounds of the step field: strong-convexity constant `m_lo` and
/// gradient Lipschitz constant `l_hi`, with `0 < m_lo <= l_hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorBounds {
    m_lo: f64,
    l_hi: f64,
}

impl SectorBounds {
    pub fn new(m_lo: f64, l_hi: f64) -> Result<Self> {
        if !(m_lo > 0.0 && m_lo.is_finite() && l_hi.is_finite() && m_lo <= l_hi) {
            return Err(GemError::InvalidArgument(format!(
                "sector bounds need 0 < m <= L, got m = {m_lo}, L = {l_hi}"
            )));
        }
        Ok(Self { m_lo, l_hi })
    }

    pub fn m_lo(&self) -> f64 {
        self.m_lo
    }

    pub fn l_hi(&self) -> f64 {
        self.l_hi
    }
}

/// Outcome of the LMI search: the smallest certified rate and its multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateCertificate {
    pub feasible: bool,
    pub mu_bound: Option<f64>,
    pub lambda: Option<f64>,
}

impl RateCertificate {
    pub fn infeasible() -> Self {
        Self {
            feasible: false,
            mu_bound: None,
            lambda: None,
        }
    }
}

/// Grid for [`min_feasible_rate`]: rates `0, mu_step, 2 mu_step, .. < 1` and
/// multipliers scanned at `lambda_min, lambda_min + lambda_step, .. <= lambda_max`
/// before local refinement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub mu_step: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            mu_step: 1e-3,
            lambda_min: 0.5,
            lambda_max: 5.0,
            lambda_step: 1e-4,
        }
    }
}

impl GridSpec {
    fn validate(&self) -> Result<()> {
        let ok = self.mu_step > 0.0
            && self.mu_step < 1.0
            && self.lambda_step > 0.0
            && self.lambda_min.is_finite()
            && self.lambda_max >= self.lambda_min
            && self.lambda_max.is_finite();
        if ok {
            Ok(())
        } else {
            Err(GemError::InvalidArgument(format!("invalid grid {self:?}")))
        }
    }

    fn mu_points(&self) -> usize {
        // Number of points i * mu_step strictly below 1.
        let mut n = (1.0 / self.mu_step).floor() as usize + 1;
        while n > 1 && (n - 1) as f64 * self.mu_step >= 1.0 {
            n -= 1;
        }
        n
    }

    fn lambda_points(&self) -> usize {
        ((self.lambda_max - self.lambda_min) / self.lambda_step + 1e-9).floor() as usize + 1
    }
}

/// `max(|1 - m|, |1 - L|)`.
pub fn rate_bound(bounds: &SectorBounds) -> f64 {
    (1.0 - bounds.m_lo).abs().max((1.0 - bounds.l_hi).abs())
}

/// The LMI matrix with `R = 1`:
/// `[[1 - mu^2 - 2 m L lambda, -1 + lambda (L + m)], [-1 + lambda (L + m), 1 - 2 lambda]]`.
pub fn lmi_matrix(mu: f64, lambda: f64, bounds: &SectorBounds) -> Matrix2<f64> {
    let (m, l) = (bounds.m_lo, bounds.l_hi);
    let off = -1.0 + lambda * (l + m);
    Matrix2::new(1.0 - mu * mu - 2.0 * m * l * lambda, off, off, 1.0 - 2.0 * lambda)
}

/// Largest eigenvalue of the symmetric LMI matrix, in closed form.
pub fn lmi_max_eigenvalue(mu: f64, lambda: f64, bounds: &SectorBounds) -> f64 {
    let m = lmi_matrix(mu, lambda, bounds);
    let (a, b, c) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
    0.5 * (a + c) + (0.25 * (a - c).powi(2) + b * b).sqrt()
}

/// True iff the LMI matrix is negative semidefinite (largest eigenvalue at
/// most [`LMI_SLACK`]). Rates outside `[0, 1)` are never feasible.
pub fn lmi_check(mu: f64, lambda: f64, bounds: &SectorBounds) -> bool {
    if !(0.0..1.0).contains(&mu) || !lambda.is_finite() {
        return false;
    }
    lmi_max_eigenvalue(mu, lambda, bounds) <= LMI_SLACK
}

/// A multiplier certifying `mu`, if one exists in `[lambda_min, lambda_max]`.
///
/// The grid is scanned first. The largest eigenvalue is convex in `lambda`,
/// so when no grid point passes, the minimizer is bracketed by the neighbours
/// of the best grid point and refined by golden-section search; at the exact
/// critical rate the feasible multiplier is a single point.
fn feasible_lambda(mu: f64, bounds: &SectorBounds, grid: &GridSpec) -> Option<f64> {
    let n = grid.lambda_points();
    let lambda_at = |i: usize| (grid.lambda_min + i as f64 * grid.lambda_step).min(grid.lambda_max);
    let mut best = (0usize, f64::INFINITY);
    for i in 0..n {
        let lambda = lambda_at(i);
        if lmi_check(mu, lambda, bounds) {
            return Some(lambda);
        }
        let e = lmi_max_eigenvalue(mu, lambda, bounds);
        if e < best.1 {
            best = (i, e);
        }
    }

    let f = |lambda: f64| lmi_max_eigenvalue(mu, lambda, bounds);
    let mut a = lambda_at(best.0.saturating_sub(1));
    let mut b = lambda_at((best.0 + 1).min(n - 1));
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if b - a <= 4.0 * f64::EPSILON * b.abs() {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    let lambda = if fc <= fd { c } else { d };
    lmi_check(mu, lambda, bounds).then_some(lambda)
}

/// Smallest grid rate for which some multiplier in `[lambda_min, lambda_max]`
/// satisfies the LMI.
///
/// Feasibility is upward closed in `mu` for a fixed multiplier, so the
/// smallest feasible grid rate is located by bisection over grid indices.
pub fn min_feasible_rate(bounds: &SectorBounds, grid: &GridSpec) -> Result<RateCertificate> {
    grid.validate()?;
    let n = grid.mu_points();
    let mu_at = |i: usize| i as f64 * grid.mu_step;

    let Some(top) = feasible_lambda(mu_at(n - 1), bounds, grid) else {
        return Ok(RateCertificate::infeasible());
    };
    if let Some(lambda) = feasible_lambda(0.0, bounds, grid) {
        return Ok(RateCertificate {
            feasible: true,
            mu_bound: Some(0.0),
            lambda: Some(lambda),
        });
    }
    // Invariant: index lo infeasible, index hi feasible with multiplier best.
    let (mut lo, mut hi, mut best) = (0usize, n - 1, top);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        match feasible_lambda(mu_at(mid), bounds, grid) {
            Some(lambda) => {
                hi = mid;
                best = lambda;
            }
            None => lo = mid,
        }
    }
    Ok(RateCertificate {
        feasible: true,
        mu_bound: Some(mu_at(hi)),
        lambda: Some(best),
    })
}


#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sb(m: f64, l: f64) -> SectorBounds {
        SectorBounds::new(m, l).unwrap()
    }

    #[test]
    fn critical_rate_is_certified_off_the_lambda_grid() {
        // m = 0.1, L = 1.2: the only multiplier at rate 0.9 is 0.9 / 1.1
        let b = sb(0.1, 1.2);
        let cert = min_feasible_rate(&b, &GridSpec::default()).unwrap();
        let mu = cert.mu_bound.unwrap();
        assert!((mu - 0.9).abs() < 1e-9, "{cert:?}");
        let lambda = cert.lambda.unwrap();
        assert!((lambda - 0.9 / 1.1).abs() < 1e-6, "{lambda}");
        assert!(lmi_check(mu, lambda, &b));
    }

    #[test]
    fn closed_form_rates() {
        assert_eq!(rate_bound(&sb(1.0, 1.0)), 0.0);
        assert_eq!(rate_bound(&sb(0.5, 1.5)), 0.5);
        assert!((rate_bound(&sb(0.1, 1.2)) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn invalid_bounds() {
        assert!(SectorBounds::new(0.0, 1.0).is_err());
        assert!(SectorBounds::new(1.5, 1.0).is_err());
        assert!(SectorBounds::new(0.5, f64::INFINITY).is_err());
    }

    #[test]
    fn grid_counts() {
        let g = GridSpec::default();
        assert_eq!(g.mu_points(), 1000);
        assert_eq!(g.lambda_points(), 45_001);
    }

    #[test]
    fn zero_matrix_at_unit_bounds() {
        let b = sb(1.0, 1.0);
        assert_eq!(lmi_matrix(0.0, 0.5, &b), Matrix2::zeros());
        assert!(lmi_check(0.0, 0.5, &b));
    }

    #[test]
    fn multiplier_below_one_half_is_rejected() {
        for (m, l) in [(0.5, 1.5), (1.0, 1.0), (0.1, 1.9)] {
            for mu in [0.0, 0.5, 0.99] {
                assert!(!lmi_check(mu, 0.4, &sb(m, l)));
            }
        }
    }

    #[test]
    fn grid_search_finds_a_multiplier_at_the_closed_form_rate() {
        let b = sb(0.5, 1.5);
        let lambdas = || (0..=4500).map(|i| 0.5 + i as f64 * 1e-3);
        assert!(lambdas().any(|lambda| lmi_check(0.5, lambda, &b)));
        assert!(!lambdas().any(|lambda| lmi_check(0.49, lambda, &b)));
    }

    #[test]
    fn min_rate_examples() {
        let grid = GridSpec::default();
        let c = min_feasible_rate(&sb(1.0, 1.0), &grid).unwrap();
        assert!(c.feasible);
        assert!(c.mu_bound.unwrap() <= grid.mu_step);

        let c = min_feasible_rate(&sb(0.5, 1.5), &grid).unwrap();
        assert!((c.mu_bound.unwrap() - 0.5).abs() <= 1e-3);
        let lambda = c.lambda.unwrap();
        assert!(lambda >= 0.5);
        assert!(lmi_max_eigenvalue(c.mu_bound.unwrap(), lambda, &sb(0.5, 1.5)) <= LMI_SLACK);

        let c = min_feasible_rate(&sb(0.1, 2.5), &grid).unwrap();
        assert!(!c.feasible);
        assert_eq!(c.mu_bound, None);
    }

    proptest! {
        #[test]
        fn feasibility_is_monotone_in_rate(
            m in 0.05f64..1.0,
            extra in 0.0f64..1.0,
            lambda in 0.5f64..3.0,
            mu0 in 0.0f64..1.0,
            t in 0.0f64..1.0,
        ) {
            let b = sb(m, m + extra);
            if lmi_check(mu0, lambda, &b) {
                let mu1 = mu0 + t * (1.0 - mu0) * 0.999;
                prop_assert!(lmi_check(mu1, lambda, &b));
            }
        }

        #[test]
        fn eigenvalue_test_agrees_with_schur_complement(
            m in 0.05f64..1.0,
            extra in 0.0f64..1.0,
            lambda in 0.5001f64..3.0,
            mu in 0.0f64..1.0,
        ) {
            let l = m + extra;
            let b = sb(m, l);
            let schur = 1.0 - mu * mu - 2.0 * m * l * lambda
                - (lambda * (l + m) - 1.0).powi(2) / (1.0 - 2.0 * lambda);
            prop_assume!(schur.abs() > 1e-9);
            prop_assert_eq!(lmi_max_eigenvalue(mu, lambda, &b) <= 0.0, schur <= 0.0);
        }
    }
}
