use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use gmm_gem_cli::commands::{self, AnalyzeRequest};
use gmm_gem_cli::config::{parse_beta, parse_bounds, parse_inset, BoundsSpec};
use gmm_gem_cli::{exit, AlgorithmKind, ExperimentConfig, HarnessError, Overrides};

#[derive(Parser)]
#[command(name = "gmm-gem", version, about = "Projection-based generalized EM for Gaussian mixtures")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config (JSON); flags override its fields
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// em, shifted-em, pb-gem or w-pb-gem
    #[arg(long, global = true, value_parser = |s: &str| s.parse::<AlgorithmKind>())]
    algo: Option<AlgorithmKind>,
    /// Per-component mean-step scaling for w-pb-gem, comma separated
    #[arg(long, global = true, value_parser = |s: &str| parse_beta(s).map(BetaList))]
    beta: Option<BetaList>,
    /// Relative log-likelihood change that stops a run [default: 1e-10]
    #[arg(long, global = true, allow_negative_numbers = true)]
    tol: Option<f64>,
    /// [default: 10000]
    #[arg(long, global = true)]
    max_iters: Option<usize>,
    /// Output directory [default: out]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write an SVG plot
    #[arg(long, global = true)]
    plot: bool,
    /// Iteration window A:B drawn as an inset in plots
    #[arg(long, global = true, value_parser = parse_inset)]
    inset: Option<(usize, usize)>,
    /// Dataset CSV to use instead of sampling the true model
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// The dataset CSV starts with a header row
    #[arg(long, global = true)]
    header: bool,
    #[arg(long, global = true)]
    n_samples: Option<usize>,
}

// A bare `Vec<f64>` would make clap treat the flag as repeatable.
#[derive(Clone)]
struct BetaList(Vec<f64>);

#[derive(Subcommand)]
enum Command {
    /// Sample a dataset from the true model
    Generate,
    /// Run one algorithm to convergence
    Fit,
    /// Compare pb-gem and w-pb-gem over many sampled datasets
    Replicate {
        /// [default: 30]
        #[arg(long)]
        instances: Option<usize>,
        /// Use the base seed for every instance
        #[arg(long)]
        same_seed: bool,
    },
    /// Rate certificate, Jacobian spectrum and empirical rate at fitted parameters
    Analyze {
        /// Parameter JSON to analyze
        #[arg(long)]
        params: PathBuf,
        /// Sector bounds m:L; estimated from the Jacobian when absent
        #[arg(long, value_parser = parse_bounds)]
        bounds: Option<BoundsSpec>,
        /// Trace CSV for the empirical rate
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Central-difference step [default: 1e-6]
        #[arg(long)]
        fd_step: Option<f64>,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, HarnessError> {
    let c = &cli.common;
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let mut o = Overrides {
        seed: c.seed,
        algorithm: c.algo,
        beta: c.beta.clone().map(|b| b.0),
        tol: c.tol,
        max_iters: c.max_iters,
        out_dir: c.out.clone(),
        plot: c.plot,
        inset: c.inset,
        data: c.data.clone(),
        data_header: c.header,
        n_samples: c.n_samples,
        ..Default::default()
    };
    match &cli.command {
        Command::Replicate {
            instances,
            same_seed,
        } => {
            o.instances = *instances;
            o.same_seed = *same_seed;
        }
        Command::Analyze {
            bounds, fd_step, ..
        } => {
            o.bounds = *bounds;
            o.fd_step = *fd_step;
        }
        _ => {}
    }
    cfg.apply(&o);
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<i32, HarnessError> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Generate => {
            let out = commands::generate(&cfg)?;
            println!(
                "wrote {} samples to {} and the true model to {}",
                out.dataset.len(),
                out.dataset_path.display(),
                out.truth_path.display()
            );
            Ok(exit::SUCCESS)
        }
        Command::Fit => {
            let out = commands::fit(&cfg)?;
            println!(
                "{}: {} iterations ({}), final log-likelihood {}",
                out.summary.algorithm,
                out.summary.iterations,
                out.summary.termination,
                out.summary.final_loglik
            );
            println!("trace: {}", out.trace_path.display());
            println!("summary: {}", out.summary_path.display());
            if let Some(p) = &out.plot_path {
                println!("plot: {}", p.display());
            }
            Ok(out.exit_code())
        }
        Command::Replicate { .. } => {
            let out = commands::replicate(&cfg)?;
            let r = &out.report;
            for s in [&r.pb_gem, &r.w_pb_gem] {
                println!(
                    "{}: mean iterations {} over {} successful instances ({} failed)",
                    s.algorithm,
                    s.mean_iterations.map_or("n/a".into(), |m| format!("{m:.1}")),
                    s.successes,
                    s.failures
                );
            }
            if let Some(faster) = r.w_pb_gem_faster {
                println!("w-pb-gem faster on average: {faster}");
            }
            println!("wrote {}", cfg.out_dir.display());
            Ok(exit::SUCCESS)
        }
        Command::Analyze { params, trace, .. } => {
            let report = commands::analyze(
                &cfg,
                &AnalyzeRequest {
                    params: params.clone(),
                    trace: trace.clone(),
                },
            )?;
            println!(
                "spectral radius {:.6} ({:?}); rate bound {}",
                report.jacobian.spectral_radius,
                report.jacobian.classification,
                report.rate_bound.map_or("n/a".into(), |r| format!("{r}"))
            );
            println!("wrote {}", cfg.out_dir.join("analysis.json").display());
            Ok(exit::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = execute(&cli).with_context(|| "gmm-gem failed");
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            let code = err
                .downcast_ref::<HarnessError>()
                .map_or(exit::OUTPUT, HarnessError::exit_code);
            eprintln!("error: {err:#}");
            ExitCode::from(code as u8)
        }
    }
}
