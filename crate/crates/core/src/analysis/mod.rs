//! Convergence analysis of the update maps.
//!
//! * [`rate`]: the sector-bound rate `max(|1 - m|, |1 - L|)` and the scalar
//!   2x2 LMI that certifies it.
//! * [`jacobian`]: finite-difference Jacobians of update maps, their spectra
//!   and an empirical estimate of the sector bounds.
//! * [`empirical`]: contraction factors read off a log-likelihood trace.

pub mod empirical;
pub mod jacobian;
pub mod rate;

pub use empirical::{empirical_rate, trace_empirical_rate, UndefinedRate};
pub use jacobian::{
    estimate_sector_bounds, map_jacobian, tangent_basis, update_map_jacobian, Classification,
    JacobianReport, FIRST_ORDER_THRESHOLD, NEWTON_LIKE_THRESHOLD,
};
pub use rate::{
    lmi_check, lmi_matrix, lmi_max_eigenvalue, min_feasible_rate, rate_bound, GridSpec,
    RateCertificate, SectorBounds, LMI_SLACK,
};
