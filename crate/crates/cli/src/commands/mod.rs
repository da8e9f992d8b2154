mod analyze;
mod fit;
mod replicate;

use std::fs;
use std::path::{Path, PathBuf};

use gmm_gem::gmm::sample;
use gmm_gem::io::{params_to_json, read_dataset_csv, write_dataset_csv};
use gmm_gem::{Dataset, GemError, GmmParams};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};

pub use analyze::{analyze, AnalysisReport, AnalyzeRequest, BoundsReport, JacobianSummary};
pub use fit::{fit, read_trace_loglik, trace_csv, FitFailure, FitOutcome, FitSummary, TRACE_HEADER};
pub use replicate::{
    aggregate_csv, replicate, Aggregate, AlgorithmStats, InstanceFailure, ReplicateOutcome,
    ReplicateReport, AGGREGATE_HEADER,
};

/// Written into generated reports.
pub const REPRODUCIBILITY_NOTE: &str = "datasets come from this harness's seeded generator; \
iteration counts depend on the particular draw, so compare them with other studies \
statistically rather than run by run";

pub(crate) fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| HarnessError::Output {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| HarnessError::Output {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn to_json<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    text.into_bytes()
}

pub(crate) fn load_truth(cfg: &ExperimentConfig) -> Result<GmmParams> {
    cfg.true_model.load()
}

/// Where the fitted data came from.
pub(crate) fn dataset_label(cfg: &ExperimentConfig) -> String {
    match &cfg.data {
        Some(p) => p.display().to_string(),
        None => format!("sampled(seed={}, n={})", cfg.seed, cfg.n_samples),
    }
}

/// The configured dataset file, or a fresh draw from the true model.
pub(crate) fn load_dataset(cfg: &ExperimentConfig, truth: &GmmParams) -> Result<Dataset> {
    match &cfg.data {
        Some(path) => read_dataset_csv(path, cfg.data_header).map_err(|e| match e {
            GemError::Io { reason, .. } => HarnessError::Input {
                path: path.clone(),
                reason,
            },
            other => HarnessError::Input {
                path: path.clone(),
                reason: other.to_string(),
            },
        }),
        None => sample(truth, cfg.n_samples, cfg.seed)
            .map_err(|e| HarnessError::model("sampling the true model", e)),
    }
}

pub struct GenerateOutput {
    pub dataset: Dataset,
    pub dataset_path: PathBuf,
    pub truth_path: PathBuf,
}

/// Samples `n_samples` points from the true model and writes
/// `dataset.csv` and `truth.json` into the output directory.
pub fn generate(cfg: &ExperimentConfig) -> Result<GenerateOutput> {
    cfg.validate()?;
    let truth = load_truth(cfg)?;
    let dataset = sample(&truth, cfg.n_samples, cfg.seed)
        .map_err(|e| HarnessError::model("sampling the true model", e))?;

    let dataset_path = cfg.out_dir.join("dataset.csv");
    let mut csv = Vec::new();
    write_dataset_csv(&mut csv, &dataset).expect("writing to memory");
    write_file(&dataset_path, &csv)?;

    let truth_path = cfg.out_dir.join("truth.json");
    let mut json = params_to_json(&truth);
    json.push('\n');
    write_file(&truth_path, json.as_bytes())?;

    Ok(GenerateOutput {
        dataset,
        dataset_path,
        truth_path,
    })
}
