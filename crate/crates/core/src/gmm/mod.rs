//! Mixture parameters, datasets and the likelihood machinery shared by every
//! update map.

mod data;
mod density;
mod params;
mod sampling;
mod theta;

pub use data::{Dataset, Responsibilities};
pub use density::{
    component_density, log_joint, log_likelihood, log_sum_exp, q_function, responsibilities,
};
pub use params::{max_asymmetry, GmmParams, SUM_TOLERANCE, SYMMETRY_TOLERANCE};
pub use sampling::sample;
pub use theta::{ThetaLayout, ThetaVector};
