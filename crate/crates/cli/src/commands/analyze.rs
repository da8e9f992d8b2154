use std::path::PathBuf;

use gmm_gem::analysis::{
    empirical_rate, estimate_sector_bounds, min_feasible_rate, rate_bound, update_map_jacobian,
    Classification, GridSpec, RateCertificate, SectorBounds, FIRST_ORDER_THRESHOLD,
    NEWTON_LIKE_THRESHOLD,
};
use gmm_gem::dynamics::run_with_stride;
use serde::{Deserialize, Serialize};

use super::{load_dataset, load_truth, read_trace_loglik, to_json, write_file};
use crate::config::{load_params, ExperimentConfig};
use crate::error::{HarnessError, Result};

pub struct AnalyzeRequest {
    /// Parameters to analyze, typically the final parameters of a fit.
    pub params: PathBuf,
    /// Trace CSV used for the empirical rate. Without one, the configured
    /// algorithm is run from the configured initialization.
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub m_lo: f64,
    pub l_hi: f64,
    /// `supplied` or `estimated`.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub newton_like_below: f64,
    pub first_order_above: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobianSummary {
    pub dimension: usize,
    pub fd_step: f64,
    /// Largest first.
    pub eigen_moduli: Vec<f64>,
    pub spectral_radius: f64,
    pub classification: Classification,
    /// Reporting convention only.
    pub classification_thresholds: Thresholds,
}

/// Contents of `analysis.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub params_file: String,
    pub algorithm: String,
    pub bounds: Option<BoundsReport>,
    pub bounds_error: Option<String>,
    pub rate_bound: Option<f64>,
    pub certificate: Option<RateCertificate>,
    pub lmi_grid: GridSpec,
    pub jacobian: JacobianSummary,
    pub empirical_rate: Option<f64>,
    pub empirical_rate_source: String,
    pub empirical_rate_error: Option<String>,
}

/// Rate bound, LMI certificate, update-map spectrum and empirical rate for
/// the parameters in `req.params`; written to `analysis.json`.
pub fn analyze(cfg: &ExperimentConfig, req: &AnalyzeRequest) -> Result<AnalysisReport> {
    cfg.validate()?;
    let params = load_params(&req.params)?;
    let truth = load_truth(cfg)?;
    let data = load_dataset(cfg, &truth)?;
    if params.dim() != data.dim() {
        return Err(HarnessError::Config(format!(
            "parameters have dimension {}, the data has {}",
            params.dim(),
            data.dim()
        )));
    }
    let algorithm = cfg.algorithm(params.k())?;

    let jac = update_map_jacobian(&params, &data, &algorithm, cfg.fd_step)
        .map_err(|e| HarnessError::model("update-map Jacobian", e))?;
    let jacobian = JacobianSummary {
        dimension: jac.jacobian.nrows(),
        fd_step: cfg.fd_step,
        spectral_radius: jac.spectral_radius(),
        classification: jac.classification,
        eigen_moduli: jac.eigen_moduli,
        classification_thresholds: Thresholds {
            newton_like_below: NEWTON_LIKE_THRESHOLD,
            first_order_above: FIRST_ORDER_THRESHOLD,
        },
    };

    let (bounds, bounds_error) = match cfg.bounds {
        Some(b) => {
            let sb = SectorBounds::new(b.m_lo, b.l_hi)
                .map_err(|e| HarnessError::Config(format!("bounds: {e}")))?;
            (Some((sb, "supplied")), None)
        }
        None => match estimate_sector_bounds(
            std::slice::from_ref(&params),
            &data,
            &algorithm,
            cfg.fd_step,
        ) {
            Ok(sb) => (Some((sb, "estimated")), None),
            Err(e) => (None, Some(e.to_string())),
        },
    };
    let grid = GridSpec::default();
    let (rate, certificate) = match &bounds {
        Some((sb, _)) => {
            let cert = min_feasible_rate(sb, &grid)
                .map_err(|e| HarnessError::model("LMI search", e))?;
            (Some(rate_bound(sb)), Some(cert))
        }
        None => (None, None),
    };

    let (lls, source) = match &req.trace {
        Some(p) => (Ok(read_trace_loglik(p)?), p.display().to_string()),
        None => {
            let init = cfg.init.build(&truth)?;
            let run = run_with_stride(&init, &data, &algorithm, &cfg.stop_criteria(), None)
                .map(|t| t.log_likelihoods())
                .map_err(|e| e.to_string());
            (run, format!("fresh {} run", algorithm.name()))
        }
    };
    let (empirical, empirical_error) = match lls {
        Ok(l) => match l.last().copied() {
            Some(terminal) => match empirical_rate(&l, terminal) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            },
            None => (None, Some("empty trace".into())),
        },
        Err(e) => (None, Some(e)),
    };

    let report = AnalysisReport {
        params_file: req.params.display().to_string(),
        algorithm: algorithm.name().to_string(),
        bounds: bounds.map(|(b, source)| BoundsReport {
            m_lo: b.m_lo(),
            l_hi: b.l_hi(),
            source: source.to_string(),
        }),
        bounds_error,
        rate_bound: rate,
        certificate,
        lmi_grid: grid,
        jacobian,
        empirical_rate: empirical,
        empirical_rate_source: source,
        empirical_rate_error: empirical_error,
    };
    write_file(&cfg.out_dir.join("analysis.json"), &to_json(&report))?;
    Ok(report)
}
