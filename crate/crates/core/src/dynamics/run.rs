use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Algorithm;
use crate::gmm::{log_likelihood, Dataset, GmmParams, ThetaVector};
use crate::GemError;

/// Stopping rule: stop once `|L_{k+1} - L_k| / |L_k| < rel_ll_tol`, or after
/// `max_iters` steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopCriteria {
    pub rel_ll_tol: f64,
    pub max_iters: usize,
}

impl Default for StopCriteria {
    fn default() -> Self {
        Self {
            rel_ll_tol: 1e-10,
            max_iters: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Tolerance,
    MaxIterations,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Tolerance => "tolerance",
            Termination::MaxIterations => "max_iterations",
        }
    }
}

/// State after one accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// One-based step index.
    pub iteration: usize,
    pub log_likelihood: f64,
    /// `||theta_{k+1} - theta_k||_2`.
    pub step_norm: f64,
    /// `|sum(alpha) - 1|`.
    pub alpha_residual: f64,
    /// Largest covariance asymmetry.
    pub sym_residual: f64,
    pub snapshot: Option<ThetaVector>,
}

/// Everything recorded by [`run`].
#[derive(Debug, Clone)]
pub struct RunTrace {
    pub algorithm: String,
    pub initial_params: GmmParams,
    pub initial_log_likelihood: f64,
    pub records: Vec<IterationRecord>,
    /// `None` for the partial trace attached to a [`RunError`].
    pub termination: Option<Termination>,
    pub final_params: GmmParams,
    pub wall_time: Duration,
}

impl RunTrace {
    /// Number of accepted steps.
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn final_log_likelihood(&self) -> f64 {
        self.records
            .last()
            .map(|r| r.log_likelihood)
            .unwrap_or(self.initial_log_likelihood)
    }

    /// `L` after each step (the initial value is not included).
    pub fn log_likelihoods(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.log_likelihood).collect()
    }

    /// `(iteration, theta)` pairs for the recorded snapshots.
    pub fn snapshots(&self) -> impl Iterator<Item = (usize, &ThetaVector)> {
        self.records
            .iter()
            .filter_map(|r| r.snapshot.as_ref().map(|s| (r.iteration, s)))
    }
}

/// A step failure together with the trace recorded up to that point.
#[derive(Debug, Clone, Error)]
#[error("iteration {iteration}: {source}")]
pub struct RunError {
    pub iteration: usize,
    pub source: GemError,
    pub partial: Box<RunTrace>,
}

/// Snapshot every iteration unless the parameter vector exceeds `10^4`
/// entries, then every 10th.
pub fn default_snapshot_stride(theta_len: usize) -> usize {
    if theta_len > 10_000 {
        10
    } else {
        1
    }
}

/// Iterates `algorithm` from `init` until the stopping rule fires.
pub fn run(
    init: &GmmParams,
    data: &Dataset,
    algorithm: &Algorithm,
    stop: &StopCriteria,
) -> Result<RunTrace, RunError> {
    let stride = default_snapshot_stride(init.layout().len());
    run_with_stride(init, data, algorithm, stop, Some(stride))
}

/// Like [`run`] with an explicit snapshot stride; `None` disables snapshots.
pub fn run_with_stride(
    init: &GmmParams,
    data: &Dataset,
    algorithm: &Algorithm,
    stop: &StopCriteria,
    snapshot_stride: Option<usize>,
) -> Result<RunTrace, RunError> {
    let started = Instant::now();
    let mut trace = RunTrace {
        algorithm: algorithm.name().to_string(),
        initial_params: init.clone(),
        initial_log_likelihood: f64::NAN,
        records: Vec::new(),
        termination: None,
        final_params: init.clone(),
        wall_time: Duration::ZERO,
    };
    let fail = |iteration: usize, source: GemError, mut trace: RunTrace| {
        trace.wall_time = started.elapsed();
        RunError {
            iteration,
            source,
            partial: Box::new(trace),
        }
    };

    if stop.rel_ll_tol.is_nan() || stop.rel_ll_tol <= 0.0 || stop.max_iters == 0 {
        let err = GemError::InvalidArgument(format!(
            "stopping rule needs rel_ll_tol > 0 and max_iters >= 1, got {} and {}",
            stop.rel_ll_tol, stop.max_iters
        ));
        return Err(fail(0, err, trace));
    }
    if snapshot_stride == Some(0) {
        return Err(fail(
            0,
            GemError::InvalidArgument("snapshot stride must be positive".into()),
            trace,
        ));
    }

    let mut ll = match log_likelihood(init, data) {
        Ok(v) => v,
        Err(e) => return Err(fail(0, e, trace)),
    };
    trace.initial_log_likelihood = ll;
    let mut current = init.clone();
    let mut current_theta = init.flatten();

    for iteration in 1..=stop.max_iters {
        let next = match algorithm.step(&current, data) {
            Ok(p) => p,
            Err(e) => return Err(fail(iteration, e, trace)),
        };
        let ll_next = match log_likelihood(&next, data) {
            Ok(v) => v,
            Err(e) => return Err(fail(iteration, e, trace)),
        };
        let next_theta = next.flatten();
        let snapshot = snapshot_stride
            .filter(|s| iteration % s == 0)
            .map(|_| next_theta.clone());
        trace.records.push(IterationRecord {
            iteration,
            log_likelihood: ll_next,
            step_norm: (&next_theta - &current_theta).norm(),
            alpha_residual: next.alpha_residual(),
            sym_residual: next.symmetry_residual(),
            snapshot,
        });

        let rel_change = (ll_next - ll).abs() / ll.abs().max(f64::MIN_POSITIVE);
        trace.final_params = next.clone();
        current = next;
        current_theta = next_theta;
        ll = ll_next;
        if rel_change < stop.rel_ll_tol {
            trace.termination = Some(Termination::Tolerance);
            break;
        }
    }
    if trace.termination.is_none() {
        trace.termination = Some(Termination::MaxIterations);
    }
    trace.wall_time = started.elapsed();
    Ok(trace)
}
