//! Acceptance suite. Each test prints one `PASS`/`FAIL` line before asserting.
//!
//! Run with `cargo test -p gmm-gem-cli --test acceptance -- --nocapture` to
//! see the report lines.

use std::f64::consts::PI;
use std::sync::OnceLock;

use gmm_gem::analysis::{
    lmi_check, min_feasible_rate, rate_bound, update_map_jacobian, Classification, GridSpec,
    SectorBounds,
};
use gmm_gem::dynamics::{
    pb_gem_step, run_with_stride, Algorithm, Preconditioner, RunTrace, Termination, WeightDesign,
};
use gmm_gem::em::{grad_log_likelihood, shifted_em_step};
use gmm_gem::gmm::{q_function, sample};
use gmm_gem::{Dataset, GemError, GmmParams};
use gmm_gem_cli::commands::{fit, replicate, ReplicateOutcome};
use gmm_gem_cli::ExperimentConfig;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    println!("criterion {id} [{status}] {name}: {detail}");
}

fn random_params(rng: &mut ChaCha8Rng, k: usize, m: usize) -> GmmParams {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut alpha = DVector::from_iterator(k, raw.iter().map(|a| a / total));
    // Absorb the rounding residual so the weights sum to one.
    let resid = 1.0 - alpha.sum();
    alpha[0] += resid;
    let mu = (0..k)
        .map(|_| DVector::from_fn(m, |_, _| 2.0 * rng.sample::<f64, _>(StandardNormal)))
        .collect();
    let sigma = (0..k)
        .map(|_| {
            let a = DMatrix::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal) * 0.6);
            let s = &a * a.transpose() + DMatrix::identity(m, m) * 0.5;
            (&s + s.transpose()) * 0.5
        })
        .collect();
    GmmParams::new(alpha, mu, sigma).unwrap()
}

fn relative(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

#[test]
fn criterion_1_shifted_em_equals_preconditioned_gradient_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_equiv = 0.0f64;
    let mut worst_pb = 0.0f64;
    let mut tested = 0;
    while tested < 100 {
        let k = rng.random_range(1..=3);
        let m = rng.random_range(1..=3);
        let n = rng.random_range(10..=200);
        let params = random_params(&mut rng, k, m);
        let data = sample(&params, n, rng.random()).unwrap();
        let start = random_params(&mut rng, k, m);

        // A start whose components carry no responsibility mass has no
        // defined step; draw another instance.
        let shifted = match shifted_em_step(&start, &data) {
            Ok(p) => p.flatten(),
            Err(GemError::DegenerateComponent { .. }) => continue,
            Err(e) => panic!("{e}"),
        };
        let theta = start.flatten();
        let grad = grad_log_likelihood(&start, &data).unwrap();
        let dense = Preconditioner::build(&start, &data).unwrap().assemble();
        let predicted = dense * grad.values();
        let moved = shifted.values() - theta.values();
        worst_equiv = worst_equiv.max(relative(&moved, &predicted));

        let pb = pb_gem_step(&start, &data).unwrap().flatten();
        worst_pb = worst_pb.max(relative(pb.values(), shifted.values()));
        tested += 1;
    }
    let pass = worst_equiv < 1e-8 && worst_pb < 1e-8;
    report(
        1,
        "shifted EM step equals the preconditioned gradient step",
        pass,
        &format!(
            "100 instances, worst relative error {worst_equiv:.2e} (P grad), {worst_pb:.2e} (pb-gem)"
        ),
    );
    assert!(pass);
}

/// Log-likelihood for arbitrary weights and (possibly non-symmetric)
/// covariance matrices, via explicit inverses and determinants.
fn brute_log_likelihood(alpha: &[f64], mu: &[DVector<f64>], sigma: &[DMatrix<f64>], data: &Dataset) -> f64 {
    let m = data.dim();
    let inv: Vec<DMatrix<f64>> = sigma.iter().map(|s| s.clone().try_inverse().unwrap()).collect();
    let norm: Vec<f64> = sigma
        .iter()
        .map(|s| ((2.0 * PI).powi(m as i32) * s.determinant()).sqrt().recip())
        .collect();
    let mut total = 0.0;
    for x in data.rows() {
        let x = DVector::from_column_slice(x);
        let mut mix = 0.0;
        for j in 0..alpha.len() {
            let z = &x - &mu[j];
            let quad = (z.transpose() * &inv[j] * &z)[(0, 0)];
            mix += alpha[j] * norm[j] * (-0.5 * quad).exp();
        }
        total += mix.ln();
    }
    total
}

#[test]
fn criterion_2_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let k = rng.random_range(1..=3);
        let m = rng.random_range(1..=2);
        let n = rng.random_range(5..=20);
        let params = random_params(&mut rng, k, m);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..m).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let data = Dataset::from_rows(&rows).unwrap();
        let analytic = grad_log_likelihood(&params, &data).unwrap();
        let layout = params.layout();

        let theta = params.flatten();
        let eval = |v: &DVector<f64>| {
            let alpha: Vec<f64> = v.rows_range(layout.alpha_range()).iter().copied().collect();
            let mu: Vec<DVector<f64>> = (0..k)
                .map(|j| v.rows_range(layout.mu_range(j)).into_owned())
                .collect();
            let sigma: Vec<DMatrix<f64>> = (0..k)
                .map(|j| DMatrix::from_column_slice(m, m, v.rows_range(layout.sigma_range(j)).as_slice()))
                .collect();
            brute_log_likelihood(&alpha, &mu, &sigma, &data)
        };
        let mut fd = DVector::zeros(layout.len());
        for i in 0..layout.len() {
            let mut plus = theta.values().clone();
            let mut minus = theta.values().clone();
            plus[i] += h;
            minus[i] -= h;
            fd[i] = (eval(&plus) - eval(&minus)) / (2.0 * h);
        }
        let mut blocks = vec![layout.alpha_range(), layout.mu_block()];
        blocks.push(layout.sigma_block());
        for block in blocks {
            let a = analytic.values().rows_range(block.clone()).into_owned();
            let f = fd.rows_range(block).into_owned();
            worst = worst.max(relative(&a, &f));
        }
    }
    let pass = worst < 1e-5;
    report(
        2,
        "analytic gradient matches central differences",
        pass,
        &format!("50 instances, worst blockwise relative error {worst:.2e}"),
    );
    assert!(pass);
}

fn base_config() -> ExperimentConfig {
    ExperimentConfig::default()
}

fn base_dataset(cfg: &ExperimentConfig) -> (GmmParams, Dataset, GmmParams) {
    let truth = cfg.true_model.load().unwrap();
    let data = sample(&truth, cfg.n_samples, cfg.seed).unwrap();
    let init = cfg.init.build(&truth).unwrap();
    (truth, data, init)
}

fn snapshot_runs() -> &'static Vec<RunTrace> {
    static RUNS: OnceLock<Vec<RunTrace>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let cfg = base_config();
        let (_, data, init) = base_dataset(&cfg);
        let design = WeightDesign::uniform(2, 0.996).unwrap();
        [Algorithm::PbGem, Algorithm::WPbGem(design)]
            .iter()
            .map(|a| run_with_stride(&init, &data, a, &cfg.stop_criteria(), Some(1)).unwrap())
            .collect()
    })
}

#[test]
fn criterion_3_monotone_ascent_and_q_certificate() {
    let cfg = base_config();
    let (_, data, _) = base_dataset(&cfg);
    let mut worst_drop = f64::INFINITY;
    let mut worst_q_gain = f64::INFINITY;
    let mut steps = 0;
    for trace in snapshot_runs() {
        let mut prev = trace.initial_params.clone();
        let mut prev_ll = trace.initial_log_likelihood;
        for rec in &trace.records {
            let next = GmmParams::unflatten(rec.snapshot.as_ref().unwrap()).unwrap();
            worst_drop = worst_drop.min(rec.log_likelihood - prev_ll);
            let gain = q_function(&next, &prev, &data).unwrap() - q_function(&prev, &prev, &data).unwrap();
            worst_q_gain = worst_q_gain.min(gain);
            prev = next;
            prev_ll = rec.log_likelihood;
            steps += 1;
        }
    }
    let pass = worst_drop >= -1e-10 && worst_q_gain > 0.0;
    report(
        3,
        "monotone ascent with a positive Q gain at every step",
        pass,
        &format!("{steps} steps (pb-gem and w-pb-gem), smallest change in L {worst_drop:.3e}, smallest Q gain {worst_q_gain:.3e}"),
    );
    assert!(pass);
}

fn replication() -> &'static ReplicateOutcome {
    static OUT: OnceLock<ReplicateOutcome> = OnceLock::new();
    OUT.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            out_dir: dir.path().to_path_buf(),
            instances: 30,
            ..base_config()
        };
        replicate(&cfg).unwrap()
    })
}

/// Largest per-coordinate mean error and weight error against the true model,
/// minimized over the two component orderings.
fn recovery_error(fitted: &GmmParams, truth: &GmmParams) -> (f64, f64) {
    [[0usize, 1], [1, 0]]
        .iter()
        .map(|order| {
            let mut mean_err = 0.0f64;
            let mut alpha_err = 0.0f64;
            for (j, &t) in order.iter().enumerate() {
                mean_err = mean_err.max((fitted.mean(j) - truth.mean(t)).amax());
                alpha_err = alpha_err.max((fitted.alpha()[j] - truth.alpha()[t]).abs());
            }
            (mean_err, alpha_err)
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap()
}

#[test]
fn criterion_4_two_component_study() {
    let out = replication();
    let truth = base_config().true_model.load().unwrap();
    let r = &out.report;

    let mut out_of_band = Vec::new();
    let mut not_recovered = Vec::new();
    let mut worst_mean = 0.0f64;
    let mut worst_alpha = 0.0f64;
    for (i, (pb, _)) in out.traces.iter().enumerate() {
        let Some(t) = pb else {
            out_of_band.push(format!("#{i} failed"));
            continue;
        };
        let iters = t.iterations();
        if t.termination != Some(Termination::Tolerance) || !(100..=1000).contains(&iters) {
            out_of_band.push(format!("seed {}: {iters}", r.seeds[i]));
        }
        let (me, ae) = recovery_error(&t.final_params, &truth);
        worst_mean = worst_mean.max(me);
        worst_alpha = worst_alpha.max(ae);
        if me >= 0.15 || ae >= 0.05 {
            not_recovered.push(format!("seed {} (mean {me:.3}, alpha {ae:.3})", r.seeds[i]));
        }
    }
    let pb_mean = r.pb_gem.mean_iterations.unwrap_or(f64::NAN);
    let w_mean = r.w_pb_gem.mean_iterations.unwrap_or(f64::NAN);
    let faster = w_mean < pb_mean;
    let pass = r.failures == 0 && out_of_band.is_empty() && not_recovered.is_empty() && faster;
    report(
        4,
        "30-seed two-component study",
        pass,
        &format!(
            "pb-gem iterations outside [100, 1000]: {}/{} [{}]; recovery misses: {} [{}], worst mean error {worst_mean:.3}, worst weight error {worst_alpha:.3}; mean iterations pb-gem {pb_mean:.1} vs w-pb-gem {w_mean:.1}",
            out_of_band.len(),
            r.instances,
            out_of_band.join(", "),
            not_recovered.len(),
            not_recovered.join(", "),
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_5_lmi_search_agrees_with_closed_form() {
    let grid = GridSpec::default();
    let mut worst = 0.0f64;
    let mut accepted_low_lambda = Vec::new();
    let mut cells = 0;
    for mi in 1..=9 {
        for li in 10..=19 {
            let (m, l) = (mi as f64 / 10.0, li as f64 / 10.0);
            let bounds = SectorBounds::new(m, l).unwrap();
            let closed = rate_bound(&bounds);
            let cert = min_feasible_rate(&bounds, &grid).unwrap();
            let found = cert.mu_bound.unwrap_or(f64::INFINITY);
            worst = worst.max((found - closed).abs());
            for mu in [0.0, closed, 0.5, 0.999] {
                if lmi_check(mu, 0.4, &bounds) {
                    accepted_low_lambda.push(format!("(m={m}, L={l}, mu={mu})"));
                }
            }
            cells += 1;
        }
    }
    let pass = worst <= 1e-3 && accepted_low_lambda.is_empty();
    report(
        5,
        "LMI search matches max(|1-m|, |1-L|)",
        pass,
        &format!(
            "{cells} grid points, worst gap {worst:.2e}, lambda = 0.4 accepted at {} points",
            accepted_low_lambda.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_6_constraints_hold_on_every_iterate() {
    let out = replication();
    let mut worst_alpha = 0.0f64;
    let mut worst_sym = 0.0f64;
    let mut runs = 0;
    for (a, b) in &out.traces {
        for t in [a, b].into_iter().flatten() {
            runs += 1;
            for r in &t.records {
                worst_alpha = worst_alpha.max(r.alpha_residual);
                worst_sym = worst_sym.max(r.sym_residual);
            }
        }
    }
    // Full snapshots: every iterate must rebuild with a successful factorization.
    let mut factorized = 0;
    let mut factor_failures = 0;
    for t in snapshot_runs() {
        runs += 1;
        for r in &t.records {
            worst_alpha = worst_alpha.max(r.alpha_residual);
            worst_sym = worst_sym.max(r.sym_residual);
            match GmmParams::unflatten(r.snapshot.as_ref().unwrap()) {
                Ok(_) => factorized += 1,
                Err(_) => factor_failures += 1,
            }
        }
    }
    let failures = out.report.failures;
    let pass = worst_alpha < 1e-12 && worst_sym < 1e-12 && failures == 0 && factor_failures == 0;
    report(
        6,
        "weights stay on the simplex, covariances symmetric positive definite",
        pass,
        &format!(
            "{runs} runs, max |sum(alpha) - 1| {worst_alpha:.2e}, max asymmetry {worst_sym:.2e}, run failures {failures}, {factorized} snapshots refactorized ({factor_failures} failed)"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_7_fixed_point_spectrum() {
    let cfg = base_config();
    let (_, data, _) = base_dataset(&cfg);
    let converged = &snapshot_runs()[0].final_params;
    let report_2 = update_map_jacobian(converged, &data, &Algorithm::PbGem, 1e-6).unwrap();
    let radius = report_2.spectral_radius();

    let xs = [-1.3, -0.4, 0.2, 0.9, 1.7, 2.4, -2.1, 0.5];
    let single = Dataset::from_rows(&xs.iter().map(|&x| vec![x]).collect::<Vec<_>>()).unwrap();
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
    let stationary = GmmParams::from_nested(&[1.0], &[vec![mean]], &[vec![vec![var]]]).unwrap();
    let report_1 = update_map_jacobian(&stationary, &single, &Algorithm::PbGem, 1e-6).unwrap();

    let pass = radius < 1.0 && report_1.classification == Classification::NewtonLike;
    report(
        7,
        "update-map spectrum at fixed points",
        pass,
        &format!(
            "two components: spectral radius {radius:.6} ({} moduli); one component: spectral radius {:.2e}, {:?}",
            report_2.eigen_moduli.len(),
            report_1.spectral_radius(),
            report_1.classification
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_8_identical_seeds_give_identical_traces() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let run = |dir: &std::path::Path| {
        let cfg = ExperimentConfig {
            out_dir: dir.to_path_buf(),
            seed: 11,
            ..base_config()
        };
        fit(&cfg).unwrap();
        std::fs::read(dir.join("trace.csv")).unwrap()
    };
    let first = run(a.path());
    let second = run(b.path());
    let pass = first == second && !first.is_empty();
    report(
        8,
        "identical config and seed give byte-identical traces",
        pass,
        &format!("{} bytes each, identical: {}", first.len(), first == second),
    );
    assert!(pass);
}
