use std::fs;
use std::path::Path;
use std::process::Command;

use gmm_gem::io::{save_dataset_csv, write_params};
use gmm_gem::{Dataset, GmmParams};
use gmm_gem_cli::commands::{
    analyze, fit, generate, read_trace_loglik, replicate, AnalyzeRequest, AGGREGATE_HEADER,
    TRACE_HEADER,
};
use gmm_gem_cli::config::BoundsSpec;
use gmm_gem_cli::{exit, AlgorithmKind, ExperimentConfig, HarnessError, InitSpec, ModelSource};
use nalgebra::DVector;

fn config_in(dir: &Path) -> ExperimentConfig {
    ExperimentConfig {
        out_dir: dir.to_path_buf(),
        n_samples: 300,
        ..Default::default()
    }
}

fn truth() -> GmmParams {
    GmmParams::from_nested(
        &[0.5, 0.5],
        &[vec![1.0, 1.0], vec![-1.0, -1.0]],
        &[
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        ],
    )
    .unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gmm-gem"))
}

#[test]
fn generate_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut cfg = config_in(a.path());
    cfg.n_samples = 1000;
    let out = generate(&cfg).unwrap();
    assert_eq!(out.dataset.len(), 1000);
    assert_eq!(out.dataset.dim(), 2);
    cfg.out_dir = b.path().to_path_buf();
    generate(&cfg).unwrap();
    let first = fs::read(a.path().join("dataset.csv")).unwrap();
    let second = fs::read(b.path().join("dataset.csv")).unwrap();
    assert_eq!(first, second);
    assert!(b.path().join("truth.json").exists());

    let mean = out
        .dataset
        .rows()
        .fold(DVector::zeros(2), |acc, x| acc + DVector::from_column_slice(x))
        / 1000.0;
    assert!(mean.amax() < 0.15, "{mean}");
}

#[test]
fn generate_rejects_empty_sample() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config_in(dir.path());
    cfg.n_samples = 0;
    let err = generate(&cfg).err().unwrap();
    assert_eq!(err.exit_code(), exit::INVALID);
}

#[test]
fn every_algorithm_traces_a_monotone_likelihood() {
    for kind in [
        AlgorithmKind::Em,
        AlgorithmKind::ShiftedEm,
        AlgorithmKind::PbGem,
        AlgorithmKind::WPbGem,
    ] {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config_in(dir.path());
        cfg.algorithm = kind;
        cfg.max_iters = 300;
        let out = match fit(&cfg) {
            Ok(o) => o,
            Err(e) => panic!("{kind}: {e}"),
        };
        let lls = read_trace_loglik(&out.trace_path).unwrap();
        assert_eq!(lls.len(), out.summary.iterations);
        for w in lls.windows(2) {
            assert!(w[1] >= w[0] - 1e-12 * w[0].abs(), "{kind}: {} -> {}", w[0], w[1]);
        }
        let text = fs::read_to_string(&out.trace_path).unwrap();
        assert_eq!(text.lines().next(), Some(TRACE_HEADER));
        assert!(out.summary_path.exists());
        assert!(dir.path().join("final.json").exists());
    }
}

#[test]
fn fit_from_a_converged_fit_stops_quickly() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config_in(dir.path());
    let first = fit(&cfg).unwrap();
    assert_eq!(first.summary.termination, "tolerance");

    let init_path = dir.path().join("init.json");
    let fitted = GmmParams::try_from(&first.summary.final_params).unwrap();
    write_params(&init_path, &fitted).unwrap();
    cfg.init = InitSpec::Explicit {
        params: ModelSource::File { path: init_path },
    };
    let again = fit(&cfg).unwrap();
    assert!(again.summary.iterations <= 3, "{}", again.summary.iterations);
    assert_eq!(again.summary.termination, "tolerance");
}

#[test]
fn failed_step_still_writes_the_trace() {
    let dir = tempfile::tempdir().unwrap();
    let data_path = dir.path().join("data.csv");
    let data = Dataset::from_rows(&[vec![0.0, 0.1], vec![0.2, -0.1], vec![-0.1, 0.0]]).unwrap();
    save_dataset_csv(&data_path, &data).unwrap();
    // The second component sits far from every point and takes no mass.
    let init = GmmParams::from_nested(
        &[0.5, 0.5],
        &[vec![0.0, 0.0], vec![500.0, 500.0]],
        &[
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0.01, 0.0], vec![0.0, 0.01]],
        ],
    )
    .unwrap();
    let init_path = dir.path().join("init.json");
    write_params(&init_path, &init).unwrap();

    let mut cfg = config_in(dir.path());
    cfg.data = Some(data_path);
    cfg.init = InitSpec::Explicit {
        params: ModelSource::File { path: init_path },
    };
    let err = fit(&cfg).err().unwrap();
    assert!(matches!(err, HarnessError::Run { iteration: 1, .. }), "{err}");
    assert_eq!(err.exit_code(), exit::NUMERICAL);

    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some(TRACE_HEADER));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["termination"], "failed");
    assert_eq!(summary["error"]["iteration"], 1);
}

#[test]
fn binary_exits_4_at_the_iteration_cap() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["fit", "--max-iters", "5", "--n-samples", "200", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(exit::MAX_ITERATIONS), "{status:?}");
    let lls = read_trace_loglik(&dir.path().join("trace.csv")).unwrap();
    assert_eq!(lls.len(), 5);
}

#[test]
fn binary_fit_then_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["fit", "--algo", "w-pb-gem", "--beta", "0.996,0.996", "--n-samples", "300"])
        .args(["--plot", "--inset", "10:40", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(exit::SUCCESS), "{out:?}");
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["algorithm"], "w-pb-gem");
    assert_eq!(summary["beta"], serde_json::json!([0.996, 0.996]));
    assert!(dir.path().join("negll.svg").exists());

    let out = bin()
        .args(["analyze", "--n-samples", "300", "--params"])
        .arg(dir.path().join("final.json"))
        .arg("--trace")
        .arg(dir.path().join("trace.csv"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(exit::SUCCESS), "{out:?}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("analysis.json")).unwrap())
            .unwrap();
    let rate = report["empirical_rate"].as_f64().unwrap();
    assert!(rate > 0.0 && rate < 1.0, "{rate}");

    let out = bin()
        .args(["fit", "--algo", "w-pb-gem", "--beta", "0.9", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(exit::INVALID), "{out:?}");
}

#[test]
fn binary_rejects_bad_input_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["analyze", "--params"])
        .arg(dir.path().join("missing.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(exit::INVALID), "{out:?}");

    let out = bin()
        .args(["generate", "--n-samples", "0", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(exit::INVALID), "{out:?}");
}

#[test]
fn replicate_with_one_seed_has_no_spread() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config_in(dir.path());
    cfg.instances = 2;
    cfg.same_seed = true;
    cfg.max_iters = 200;
    let out = replicate(&cfg).unwrap();
    let longest = out
        .report
        .pb_gem
        .iterations
        .iter()
        .chain(&out.report.w_pb_gem.iterations)
        .copied()
        .max()
        .unwrap();
    assert_eq!(out.aggregate.rows(), longest);

    let csv = fs::read_to_string(dir.path().join("aggregate.csv")).unwrap();
    let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(lines.next(), Some(AGGREGATE_HEADER));
    let mut rows = 0;
    for line in lines {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols[2], 0.0);
        assert_eq!(cols[4], 0.0);
        rows += 1;
    }
    assert_eq!(rows, longest);
    assert!(dir.path().join("aggregate.svg").exists());
    assert!(dir.path().join("replicate.json").exists());
}

#[test]
fn replicate_needs_two_instances() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config_in(dir.path());
    cfg.instances = 1;
    assert_eq!(replicate(&cfg).err().unwrap().exit_code(), exit::INVALID);
}

#[test]
fn analyze_with_supplied_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("params.json");
    write_params(&params, &truth()).unwrap();
    let mut cfg = config_in(dir.path());
    cfg.bounds = Some(BoundsSpec {
        m_lo: 0.5,
        l_hi: 1.5,
    });
    cfg.max_iters = 400;
    let report = analyze(
        &cfg,
        &AnalyzeRequest {
            params,
            trace: None,
        },
    )
    .unwrap();
    assert_eq!(report.rate_bound, Some(0.5));
    let cert = report.certificate.unwrap();
    assert!(cert.feasible);
    assert!((cert.mu_bound.unwrap() - 0.5).abs() < 1e-9);
    assert_eq!(report.bounds.unwrap().source, "supplied");
    assert!(report.jacobian.spectral_radius < 1.0);
    assert!(dir.path().join("analysis.json").exists());
}

#[test]
fn plot_flag_writes_svg_with_inset() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config_in(dir.path());
    cfg.plot = true;
    cfg.inset = Some((5, 20));
    cfg.max_iters = 100;
    let out = fit(&cfg).unwrap();
    let svg = fs::read_to_string(out.plot_path.unwrap()).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    assert!(svg.matches("<polyline").count() >= 2);
}
