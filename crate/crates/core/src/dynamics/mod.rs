//! Preconditioned, projected GEM updates and the iteration driver.

mod preconditioner;
mod projection;
mod run;
mod step;

pub use preconditioner::Preconditioner;
pub use projection::Projection;
pub use run::{
    default_snapshot_stride, run, run_with_stride, IterationRecord, RunError, RunTrace,
    StopCriteria, Termination,
};
pub use step::{pb_gem_step, w_pb_gem_step, Algorithm, WeightDesign};
