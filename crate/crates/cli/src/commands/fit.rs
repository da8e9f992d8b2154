use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gmm_gem::dynamics::{run_with_stride, Algorithm, RunTrace, Termination};
use gmm_gem::io::{params_to_json, ParamsFile};
use gmm_gem::GemError;
use serde::{Deserialize, Serialize};

use super::{dataset_label, load_dataset, load_truth, to_json, write_file, REPRODUCIBILITY_NOTE};
use crate::config::ExperimentConfig;
use crate::error::{exit, HarnessError, Result};
use crate::plot::{Chart, Series};

pub const TRACE_HEADER: &str = "iter,loglik,step_norm,alpha_residual,sym_residual";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitFailure {
    pub iteration: usize,
    pub message: String,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub algorithm: String,
    pub beta: Option<Vec<f64>>,
    pub data: String,
    pub seed: u64,
    pub tol: f64,
    pub max_iters: usize,
    pub iterations: usize,
    /// `tolerance`, `max_iterations` or `failed`.
    pub termination: String,
    pub error: Option<FitFailure>,
    pub initial_loglik: f64,
    pub final_loglik: f64,
    pub max_alpha_residual: f64,
    pub max_sym_residual: f64,
    pub initial_params: ParamsFile,
    pub final_params: ParamsFile,
    pub wall_time_s: f64,
    pub note: String,
}

pub struct FitOutcome {
    pub trace: RunTrace,
    pub summary: FitSummary,
    pub trace_path: PathBuf,
    pub summary_path: PathBuf,
    pub plot_path: Option<PathBuf>,
}

impl FitOutcome {
    /// `0` when the tolerance was met, `4` when `max_iters` ran out.
    pub fn exit_code(&self) -> i32 {
        match self.trace.termination {
            Some(Termination::MaxIterations) => exit::MAX_ITERATIONS,
            _ => exit::SUCCESS,
        }
    }
}

/// One row per accepted step. The log-likelihood is written in shortest
/// round-trip form, the norms and residuals in scientific notation.
pub fn trace_csv(trace: &RunTrace) -> String {
    let mut out = String::with_capacity(64 * (trace.records.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in &trace.records {
        let _ = writeln!(
            out,
            "{},{},{:e},{:e},{:e}",
            r.iteration, r.log_likelihood, r.step_norm, r.alpha_residual, r.sym_residual
        );
    }
    out
}

/// The `loglik` column of a trace file.
pub fn read_trace_loglik(path: &Path) -> Result<Vec<f64>> {
    let input_err = |reason: String| HarnessError::Input {
        path: path.to_path_buf(),
        reason,
    };
    let text = std::fs::read_to_string(path).map_err(|e| input_err(e.to_string()))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == TRACE_HEADER => {}
        _ => return Err(input_err(format!("expected header '{TRACE_HEADER}'"))),
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.split(',')
                .nth(1)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| input_err(format!("malformed row {}", i + 2)))
        })
        .collect()
}

fn summarize(
    cfg: &ExperimentConfig,
    algorithm: &Algorithm,
    trace: &RunTrace,
    error: Option<FitFailure>,
) -> FitSummary {
    let termination = match (&error, trace.termination) {
        (Some(_), _) | (None, None) => "failed",
        (None, Some(t)) => t.as_str(),
    };
    let beta = match algorithm {
        Algorithm::WPbGem(d) => Some(d.betas().to_vec()),
        _ => None,
    };
    let max_of = |f: fn(&gmm_gem::dynamics::IterationRecord) -> f64| {
        trace.records.iter().map(f).fold(0.0, f64::max)
    };
    FitSummary {
        algorithm: algorithm.name().to_string(),
        beta,
        data: dataset_label(cfg),
        seed: cfg.seed,
        tol: cfg.tol,
        max_iters: cfg.max_iters,
        iterations: trace.iterations(),
        termination: termination.to_string(),
        error,
        initial_loglik: trace.initial_log_likelihood,
        final_loglik: trace.final_log_likelihood(),
        max_alpha_residual: max_of(|r| r.alpha_residual),
        max_sym_residual: max_of(|r| r.sym_residual),
        initial_params: ParamsFile::from(&trace.initial_params),
        final_params: ParamsFile::from(&trace.final_params),
        wall_time_s: trace.wall_time.as_secs_f64(),
        note: REPRODUCIBILITY_NOTE.to_string(),
    }
}

fn negll_chart(trace: &RunTrace, inset: Option<(usize, usize)>) -> Chart {
    Chart {
        title: format!("{}: negative log-likelihood", trace.algorithm),
        x_label: "iteration".into(),
        y_label: "negative log-likelihood".into(),
        series: vec![Series {
            label: trace.algorithm.clone(),
            color: "#1f4e99",
            points: trace
                .records
                .iter()
                .map(|r| (r.iteration as f64, -r.log_likelihood))
                .collect(),
            band: None,
        }],
        inset,
    }
}

/// Fits the configured algorithm and writes `trace.csv`, `summary.json`,
/// `final.json` (the last parameters) and,
/// with `plot` set, `negll.svg`. On a failed step the partial trace and a
/// summary carrying the error are written before the error is returned.
pub fn fit(cfg: &ExperimentConfig) -> Result<FitOutcome> {
    cfg.validate()?;
    let truth = load_truth(cfg)?;
    let data = load_dataset(cfg, &truth)?;
    let init = cfg.init.build(&truth)?;
    if init.dim() != data.dim() {
        return Err(HarnessError::Config(format!(
            "initial parameters have dimension {}, the data has {}",
            init.dim(),
            data.dim()
        )));
    }
    let algorithm = cfg.algorithm(init.k())?;

    let (trace, failure) =
        match run_with_stride(&init, &data, &algorithm, &cfg.stop_criteria(), None) {
            Ok(t) => (t, None),
            Err(e) => (*e.partial, Some((e.iteration, e.source))),
        };

    let error = failure.as_ref().map(|(iteration, source)| FitFailure {
        iteration: *iteration,
        message: source.to_string(),
    });
    let summary = summarize(cfg, &algorithm, &trace, error);
    let trace_path = cfg.out_dir.join("trace.csv");
    let summary_path = cfg.out_dir.join("summary.json");
    write_file(&trace_path, trace_csv(&trace).as_bytes())?;
    write_file(&summary_path, &to_json(&summary))?;
    let mut final_json = params_to_json(&trace.final_params);
    final_json.push('\n');
    write_file(&cfg.out_dir.join("final.json"), final_json.as_bytes())?;
    let plot_path = if cfg.plot {
        let p = cfg.out_dir.join("negll.svg");
        write_file(&p, negll_chart(&trace, cfg.inset).to_svg().as_bytes())?;
        Some(p)
    } else {
        None
    };

    if let Some((iteration, source)) = failure {
        return Err(run_error(&algorithm, iteration, source));
    }
    Ok(FitOutcome {
        trace,
        summary,
        trace_path,
        summary_path,
        plot_path,
    })
}

fn run_error(algorithm: &Algorithm, iteration: usize, source: GemError) -> HarnessError {
    HarnessError::Run {
        algorithm: algorithm.name().to_string(),
        iteration,
        source,
    }
}
