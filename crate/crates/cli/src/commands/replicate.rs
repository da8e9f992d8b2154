use std::fmt::Write as _;

use gmm_gem::dynamics::{run_with_stride, Algorithm, RunTrace, Termination};
use gmm_gem::gmm::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{load_truth, to_json, write_file, REPRODUCIBILITY_NOTE};
use crate::config::{AlgorithmKind, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::plot::{Chart, Series};

pub const AGGREGATE_HEADER: &str = "iter,mean_negll_pb,std_negll_pb,mean_negll_wpb,std_negll_wpb";

const PADDING_COMMENT: &str = "# rows run from iteration 1 to the longest run; a run that \
stopped earlier is carried at its terminal value";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmStats {
    pub algorithm: String,
    /// Iteration count per successful instance, in instance order.
    pub iterations: Vec<usize>,
    pub successes: usize,
    pub failures: usize,
    /// Successful runs that stopped at `max_iters`.
    pub reached_max_iters: usize,
    pub mean_iterations: Option<f64>,
    pub std_iterations: Option<f64>,
    pub min_iterations: Option<usize>,
    pub max_iterations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFailure {
    pub instance: usize,
    pub seed: u64,
    pub algorithm: String,
    pub iteration: usize,
    pub message: String,
}

/// Contents of `replicate.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateReport {
    pub instances: usize,
    pub seeds: Vec<u64>,
    pub n_samples: usize,
    pub beta: Vec<f64>,
    pub pb_gem: AlgorithmStats,
    pub w_pb_gem: AlgorithmStats,
    /// Whether the weighted variant needed fewer iterations on average.
    pub w_pb_gem_faster: Option<bool>,
    pub failures: usize,
    pub failed: Vec<InstanceFailure>,
    pub note: String,
}

/// Per-iteration mean and sample standard deviation of the negative
/// log-likelihood for each algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub pb: Vec<(f64, f64)>,
    pub wpb: Vec<(f64, f64)>,
}

impl Aggregate {
    pub fn rows(&self) -> usize {
        self.pb.len().max(self.wpb.len())
    }
}

pub struct ReplicateOutcome {
    pub report: ReplicateReport,
    pub aggregate: Aggregate,
    /// Successful traces per instance: `(pb-gem, w-pb-gem)`.
    pub traces: Vec<(Option<RunTrace>, Option<RunTrace>)>,
}

type RunOutcome = std::result::Result<RunTrace, (usize, String)>;

fn stats(name: &str, runs: &[&RunOutcome]) -> AlgorithmStats {
    let iterations: Vec<usize> = runs
        .iter()
        .filter_map(|r| r.as_ref().ok().map(|t| t.iterations()))
        .collect();
    let reached_max_iters = runs
        .iter()
        .filter(|r| matches!(r, Ok(t) if t.termination == Some(Termination::MaxIterations)))
        .count();
    let n = iterations.len();
    let mean = (n > 0).then(|| iterations.iter().sum::<usize>() as f64 / n as f64);
    let std = mean.filter(|_| n > 1).map(|m| {
        let ss: f64 = iterations.iter().map(|&v| (v as f64 - m).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    });
    AlgorithmStats {
        algorithm: name.to_string(),
        successes: n,
        failures: runs.len() - n,
        reached_max_iters,
        mean_iterations: mean,
        std_iterations: std,
        min_iterations: iterations.iter().copied().min(),
        max_iterations: iterations.iter().copied().max(),
        iterations,
    }
}

/// Mean and sample standard deviation at each iteration, carrying shorter
/// runs at their last value.
fn aggregate_one(traces: &[&RunTrace]) -> Vec<(f64, f64)> {
    let rows = traces.iter().map(|t| t.iterations()).max().unwrap_or(0);
    let n = traces.len() as f64;
    (0..rows)
        .map(|i| {
            let vals: Vec<f64> = traces
                .iter()
                .map(|t| {
                    let r = t.records.get(i).or(t.records.last());
                    -r.map(|r| r.log_likelihood).unwrap_or(t.initial_log_likelihood)
                })
                .collect();
            let mean = vals.iter().sum::<f64>() / n;
            let std = if vals.len() > 1 {
                (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            (mean, std)
        })
        .collect()
}

/// Aggregate table with its padding comment and header. Columns of an
/// algorithm that has no row at some iteration are left empty.
pub fn aggregate_csv(agg: &Aggregate) -> String {
    let mut out = String::new();
    out.push_str(PADDING_COMMENT);
    out.push('\n');
    out.push_str(AGGREGATE_HEADER);
    out.push('\n');
    let cell = |v: Option<&(f64, f64)>| match v {
        Some((m, s)) => format!("{m},{s}"),
        None => ",".to_string(),
    };
    for i in 0..agg.rows() {
        let _ = writeln!(out, "{},{},{}", i + 1, cell(agg.pb.get(i)), cell(agg.wpb.get(i)));
    }
    out
}

fn chart(agg: &Aggregate, inset: Option<(usize, usize)>) -> Chart {
    let series = |label: &str, color: &'static str, rows: &[(f64, f64)]| Series {
        label: label.to_string(),
        color,
        points: rows
            .iter()
            .enumerate()
            .map(|(i, (m, _))| ((i + 1) as f64, *m))
            .collect(),
        band: Some(rows.iter().map(|(_, s)| *s).collect()),
    };
    Chart {
        title: "negative log-likelihood across instances (mean and one std)".into(),
        x_label: "iteration".into(),
        y_label: "negative log-likelihood".into(),
        series: vec![
            series("pb-gem", "#1f4e99", &agg.pb),
            series("w-pb-gem", "#b3261e", &agg.wpb),
        ],
        inset,
    }
}

/// Runs both projected algorithms on `instances` datasets from the same
/// initialization and writes `aggregate.csv`, `aggregate.svg` and
/// `replicate.json`. Instance `i` samples with seed `seed + i`, or with
/// `seed` itself when `same_seed` is set.
pub fn replicate(cfg: &ExperimentConfig) -> Result<ReplicateOutcome> {
    cfg.validate()?;
    if cfg.instances < 2 {
        return Err(HarnessError::Config(format!(
            "replication needs at least 2 instances, got {}",
            cfg.instances
        )));
    }
    let truth = load_truth(cfg)?;
    let init = cfg.init.build(&truth)?;
    if init.dim() != truth.dim() {
        return Err(HarnessError::Config(
            "initial parameters and true model differ in dimension".into(),
        ));
    }
    let pb = cfg.algorithm_for(AlgorithmKind::PbGem, init.k())?;
    let wpb = cfg.algorithm_for(AlgorithmKind::WPbGem, init.k())?;
    let beta = match &wpb {
        Algorithm::WPbGem(d) => d.betas().to_vec(),
        _ => unreachable!(),
    };
    let stop = cfg.stop_criteria();
    let seeds: Vec<u64> = (0..cfg.instances)
        .map(|i| if cfg.same_seed { cfg.seed } else { cfg.seed.wrapping_add(i as u64) })
        .collect();

    let results: Vec<(RunOutcome, RunOutcome)> = seeds
        .par_iter()
        .map(|&seed| {
            let data = match sample(&truth, cfg.n_samples, seed) {
                Ok(d) => d,
                Err(e) => {
                    let msg = (0, format!("sampling: {e}"));
                    return (Err(msg.clone()), Err(msg));
                }
            };
            let go = |algo: &Algorithm| -> RunOutcome {
                run_with_stride(&init, &data, algo, &stop, None)
                    .map_err(|e| (e.iteration, e.source.to_string()))
            };
            (go(&pb), go(&wpb))
        })
        .collect();

    let mut failed = Vec::new();
    for (i, (a, b)) in results.iter().enumerate() {
        for (name, r) in [("pb-gem", a), ("w-pb-gem", b)] {
            if let Err((iteration, message)) = r {
                failed.push(InstanceFailure {
                    instance: i,
                    seed: seeds[i],
                    algorithm: name.to_string(),
                    iteration: *iteration,
                    message: message.clone(),
                });
            }
        }
    }

    let pb_runs: Vec<&RunOutcome> = results.iter().map(|r| &r.0).collect();
    let wpb_runs: Vec<&RunOutcome> = results.iter().map(|r| &r.1).collect();
    let pb_stats = stats("pb-gem", &pb_runs);
    let wpb_stats = stats("w-pb-gem", &wpb_runs);
    if pb_stats.successes == 0 && wpb_stats.successes == 0 {
        let first = &failed[0];
        return Err(HarnessError::Run {
            algorithm: first.algorithm.clone(),
            iteration: first.iteration,
            source: gmm_gem::GemError::InvalidArgument(format!(
                "every instance failed; first failure: {}",
                first.message
            )),
        });
    }

    let ok = |runs: &[&RunOutcome]| -> Vec<RunTrace> {
        runs.iter().filter_map(|r| r.as_ref().ok().cloned()).collect()
    };
    let pb_traces = ok(&pb_runs);
    let wpb_traces = ok(&wpb_runs);
    let aggregate = Aggregate {
        pb: aggregate_one(&pb_traces.iter().collect::<Vec<_>>()),
        wpb: aggregate_one(&wpb_traces.iter().collect::<Vec<_>>()),
    };

    let report = ReplicateReport {
        instances: cfg.instances,
        seeds,
        n_samples: cfg.n_samples,
        beta,
        w_pb_gem_faster: match (wpb_stats.mean_iterations, pb_stats.mean_iterations) {
            (Some(w), Some(p)) => Some(w < p),
            _ => None,
        },
        pb_gem: pb_stats,
        w_pb_gem: wpb_stats,
        failures: failed.len(),
        failed,
        note: REPRODUCIBILITY_NOTE.to_string(),
    };

    write_file(&cfg.out_dir.join("aggregate.csv"), aggregate_csv(&aggregate).as_bytes())?;
    write_file(
        &cfg.out_dir.join("aggregate.svg"),
        chart(&aggregate, cfg.inset).to_svg().as_bytes(),
    )?;
    write_file(&cfg.out_dir.join("replicate.json"), &to_json(&report))?;

    let traces = results
        .into_iter()
        .map(|(a, b)| (a.ok(), b.ok()))
        .collect();
    Ok(ReplicateOutcome {
        report,
        aggregate,
        traces,
    })
}
