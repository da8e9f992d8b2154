//! Experiment configuration.
//!
//! A config is one JSON document; every field is optional and falls back to
//! the default two-component experiment:
//!
//! ```json
//! {
//!   "true_model": {"K": 2, "m": 2, "alpha": [0.5, 0.5],
//!                  "mu": [[1, 1], [-1, -1]],
//!                  "sigma": [[[1, 0], [0, 1]], [[1, 0], [0, 1]]]},
//!   "n_samples": 1000,
//!   "data": null,
//!   "data_header": false,
//!   "init": {"kind": "orthogonal_line", "distance": 4.242640687119285},
//!   "algorithm": "pb-gem",
//!   "beta": null,
//!   "tol": 1e-10,
//!   "max_iters": 10000,
//!   "seed": 7,
//!   "out_dir": "out",
//!   "plot": false,
//!   "inset": null,
//!   "instances": 30,
//!   "same_seed": false,
//!   "fd_step": 1e-6,
//!   "bounds": null
//! }
//! ```
//!
//! `true_model` and `init.params` accept either an inline parameter object or
//! `{"path": "model.json"}`. Relative paths are resolved against the
//! directory holding the config file. Command-line flags override config
//! fields, which override the defaults.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gmm_gem::analysis::SectorBounds;
use gmm_gem::dynamics::{Algorithm, StopCriteria, WeightDesign};
use gmm_gem::io::{self, ParamsFile};
use gmm_gem::{GemError, GmmParams};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Mean-step scaling used by `w-pb-gem` when no `beta` is given.
pub const DEFAULT_BETA: f64 = 0.996;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlgorithmKind {
    #[serde(rename = "em")]
    Em,
    #[serde(rename = "shifted-em")]
    ShiftedEm,
    #[serde(rename = "pb-gem")]
    PbGem,
    #[serde(rename = "w-pb-gem")]
    WPbGem,
}

impl AlgorithmKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AlgorithmKind::Em => "em",
            AlgorithmKind::ShiftedEm => "shifted-em",
            AlgorithmKind::PbGem => "pb-gem",
            AlgorithmKind::WPbGem => "w-pb-gem",
        }
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AlgorithmKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "em" => Ok(AlgorithmKind::Em),
            "shifted-em" => Ok(AlgorithmKind::ShiftedEm),
            "pb-gem" => Ok(AlgorithmKind::PbGem),
            "w-pb-gem" => Ok(AlgorithmKind::WPbGem),
            other => Err(format!(
                "unknown algorithm '{other}' (expected em, shifted-em, pb-gem or w-pb-gem)"
            )),
        }
    }
}

/// Parameters given inline or by file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    File { path: PathBuf },
    Inline(ParamsFile),
}

impl ModelSource {
    pub fn load(&self) -> Result<GmmParams> {
        match self {
            ModelSource::File { path } => load_params(path),
            ModelSource::Inline(file) => GmmParams::try_from(file)
                .map_err(|e| HarnessError::Config(format!("inline parameters: {e}"))),
        }
    }

    fn resolve(&mut self, base: &Path) {
        if let ModelSource::File { path } = self {
            *path = resolve(base, path);
        }
    }
}

/// Reads a parameter file, reporting a missing or malformed file as input error.
pub fn load_params(path: &Path) -> Result<GmmParams> {
    io::read_params(path).map_err(|e| match e {
        GemError::Io { reason, .. } => HarnessError::Input {
            path: path.to_path_buf(),
            reason,
        },
        other => HarnessError::Input {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitSpec {
    /// Two means at `c + d v` and `c - d v`, where `c` is the midpoint of
    /// the true means and `v` a unit vector orthogonal to their difference.
    /// Weights default to uniform and covariances to the identity.
    OrthogonalLine {
        distance: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<Vec<Vec<Vec<f64>>>>,
    },
    Explicit { params: ModelSource },
}

impl Default for InitSpec {
    fn default() -> Self {
        InitSpec::OrthogonalLine {
            distance: 3.0 * std::f64::consts::SQRT_2,
            alpha: None,
            sigma: None,
        }
    }
}

impl InitSpec {
    pub fn build(&self, truth: &GmmParams) -> Result<GmmParams> {
        match self {
            InitSpec::Explicit { params } => params.load(),
            InitSpec::OrthogonalLine {
                distance,
                alpha,
                sigma,
            } => {
                if truth.k() != 2 {
                    return Err(HarnessError::Config(format!(
                        "orthogonal-line initialization needs K = 2, the true model has K = {}",
                        truth.k()
                    )));
                }
                if !(distance.is_finite() && *distance >= 0.0) {
                    return Err(HarnessError::Config(format!(
                        "orthogonal-line distance must be finite and non-negative, got {distance}"
                    )));
                }
                let m = truth.dim();
                let dir = orthogonal_direction(&(truth.mean(0) - truth.mean(1)))?;
                let center = (truth.mean(0) + truth.mean(1)) * 0.5;
                let mu = vec![&center + &dir * *distance, &center - &dir * *distance];
                let alpha = match alpha {
                    Some(a) => DVector::from_column_slice(a),
                    None => DVector::from_element(2, 0.5),
                };
                let sigma = match sigma {
                    Some(s) => {
                        let mut out = Vec::with_capacity(s.len());
                        for rows in s {
                            if rows.len() != m || rows.iter().any(|r| r.len() != m) {
                                return Err(HarnessError::Config(format!(
                                    "initial covariances must be {m}x{m}"
                                )));
                            }
                            out.push(DMatrix::from_fn(m, m, |a, b| rows[a][b]));
                        }
                        out
                    }
                    None => vec![DMatrix::identity(m, m); 2],
                };
                GmmParams::new(alpha, mu, sigma)
                    .map_err(|e| HarnessError::Config(format!("initial parameters: {e}")))
            }
        }
    }

    fn resolve(&mut self, base: &Path) {
        if let InitSpec::Explicit { params } = self {
            params.resolve(base);
        }
    }
}

/// Unit vector orthogonal to `diff`. In the plane this is `diff` rotated a
/// quarter turn counter-clockwise.
fn orthogonal_direction(diff: &DVector<f64>) -> Result<DVector<f64>> {
    let m = diff.len();
    let norm = diff.norm();
    if m < 2 || norm == 0.0 {
        return Err(HarnessError::Config(
            "orthogonal-line initialization needs m >= 2 and distinct true means".into(),
        ));
    }
    if m == 2 {
        return Ok(DVector::from_vec(vec![-diff[1], diff[0]]) / norm);
    }
    let unit = diff / norm;
    let axis = (0..m)
        .min_by(|&a, &b| unit[a].abs().total_cmp(&unit[b].abs()))
        .expect("m >= 2");
    let mut v = DVector::zeros(m);
    v[axis] = 1.0;
    v -= &unit * unit[axis];
    let n = v.norm();
    Ok(v / n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsSpec {
    pub m_lo: f64,
    pub l_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub true_model: ModelSource,
    pub n_samples: usize,
    /// Dataset CSV to fit instead of sampling from `true_model`.
    pub data: Option<PathBuf>,
    pub data_header: bool,
    pub init: InitSpec,
    pub algorithm: AlgorithmKind,
    pub beta: Option<Vec<f64>>,
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub plot: bool,
    pub inset: Option<(usize, usize)>,
    pub instances: usize,
    pub same_seed: bool,
    pub fd_step: f64,
    pub bounds: Option<BoundsSpec>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let identity = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        Self {
            true_model: ModelSource::Inline(ParamsFile {
                k: 2,
                m: 2,
                alpha: vec![0.5, 0.5],
                mu: vec![vec![1.0, 1.0], vec![-1.0, -1.0]],
                sigma: vec![identity.clone(), identity],
            }),
            n_samples: 1000,
            data: None,
            data_header: false,
            init: InitSpec::default(),
            algorithm: AlgorithmKind::PbGem,
            beta: None,
            tol: 1e-10,
            max_iters: 10_000,
            seed: 7,
            out_dir: PathBuf::from("out"),
            plot: false,
            inset: None,
            instances: 30,
            same_seed: false,
            fd_step: 1e-6,
            bounds: None,
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub algorithm: Option<AlgorithmKind>,
    pub beta: Option<Vec<f64>>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub plot: bool,
    pub inset: Option<(usize, usize)>,
    pub data: Option<PathBuf>,
    pub data_header: bool,
    pub n_samples: Option<usize>,
    pub instances: Option<usize>,
    pub same_seed: bool,
    pub fd_step: Option<f64>,
    pub bounds: Option<BoundsSpec>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Reads a config file and resolves its relative paths against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Input {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.true_model.resolve(base);
        cfg.init.resolve(base);
        if let Some(d) = &cfg.data {
            cfg.data = Some(resolve(base, d));
        }
        cfg.out_dir = resolve(base, &cfg.out_dir);
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        fn set<T: Clone>(dst: &mut T, src: &Option<T>) {
            if let Some(v) = src {
                *dst = v.clone();
            }
        }
        set(&mut self.seed, &o.seed);
        set(&mut self.algorithm, &o.algorithm);
        set(&mut self.tol, &o.tol);
        set(&mut self.max_iters, &o.max_iters);
        set(&mut self.out_dir, &o.out_dir);
        set(&mut self.n_samples, &o.n_samples);
        set(&mut self.instances, &o.instances);
        set(&mut self.fd_step, &o.fd_step);
        if o.beta.is_some() {
            self.beta = o.beta.clone();
        }
        if o.inset.is_some() {
            self.inset = o.inset;
        }
        if o.data.is_some() {
            self.data = o.data.clone();
        }
        if o.bounds.is_some() {
            self.bounds = o.bounds;
        }
        self.plot |= o.plot;
        self.data_header |= o.data_header;
        self.same_seed |= o.same_seed;
    }

    /// Checks the fields that do not depend on loaded models.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.n_samples == 0 {
            return bad("n_samples must be at least 1".into());
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1".into());
        }
        if !(self.fd_step > 0.0 && self.fd_step.is_finite()) {
            return bad(format!("fd_step must be positive, got {}", self.fd_step));
        }
        if let Some((a, b)) = self.inset {
            if a >= b {
                return bad(format!("inset range {a}:{b} is empty"));
            }
        }
        if let Some(b) = &self.beta {
            if b.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return bad(format!("beta entries must be positive, got {b:?}"));
            }
        }
        if let Some(b) = self.bounds {
            SectorBounds::new(b.m_lo, b.l_hi)
                .map_err(|e| HarnessError::Config(format!("bounds: {e}")))?;
        }
        Ok(())
    }

    pub fn stop_criteria(&self) -> StopCriteria {
        StopCriteria {
            rel_ll_tol: self.tol,
            max_iters: self.max_iters,
        }
    }

    /// Mean-step design for `k` components: `beta` if given, otherwise
    /// [`DEFAULT_BETA`] for every component.
    pub fn weight_design(&self, k: usize) -> Result<WeightDesign> {
        let betas = match &self.beta {
            Some(b) if b.len() != k => {
                return Err(HarnessError::Config(format!(
                    "beta has {} entries but the model has K = {k}",
                    b.len()
                )))
            }
            Some(b) => b.clone(),
            None => vec![DEFAULT_BETA; k],
        };
        WeightDesign::new(betas).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn algorithm_for(&self, kind: AlgorithmKind, k: usize) -> Result<Algorithm> {
        Ok(match kind {
            AlgorithmKind::Em => Algorithm::Em,
            AlgorithmKind::ShiftedEm => Algorithm::ShiftedEm,
            AlgorithmKind::PbGem => Algorithm::PbGem,
            AlgorithmKind::WPbGem => Algorithm::WPbGem(self.weight_design(k)?),
        })
    }

    pub fn algorithm(&self, k: usize) -> Result<Algorithm> {
        self.algorithm_for(self.algorithm, k)
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Parses `"0.996,0.996"`.
pub fn parse_beta(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| format!("bad beta entry '{t}': {e}"))
        })
        .collect()
}

/// Parses an iteration window `"A:B"`.
pub fn parse_inset(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected A:B, got '{s}'"))?;
    let a = a.trim().parse().map_err(|e| format!("bad inset start: {e}"))?;
    let b = b.trim().parse().map_err(|e| format!("bad inset end: {e}"))?;
    if a >= b {
        return Err(format!("inset range {a}:{b} is empty"));
    }
    Ok((a, b))
}

/// Parses sector bounds `"m:L"`.
pub fn parse_bounds(s: &str) -> std::result::Result<BoundsSpec, String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected m:L, got '{s}'"))?;
    let m_lo = a.trim().parse().map_err(|e| format!("bad m: {e}"))?;
    let l_hi = b.trim().parse().map_err(|e| format!("bad L: {e}"))?;
    Ok(BoundsSpec { m_lo, l_hi })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_init_is_the_anti_diagonal_pair() {
        let cfg = ExperimentConfig::default();
        let truth = cfg.true_model.load().unwrap();
        let init = cfg.init.build(&truth).unwrap();
        let m0 = init.mean(0);
        let m1 = init.mean(1);
        assert!((m0[0] + 3.0).abs() < 1e-12 && (m0[1] - 3.0).abs() < 1e-12);
        assert!((m1[0] - 3.0).abs() < 1e-12 && (m1[1] + 3.0).abs() < 1e-12);
        assert_eq!(init.alpha().as_slice(), &[0.5, 0.5]);
        assert_eq!(init.covariance(0), &DMatrix::<f64>::identity(2, 2));
    }

    #[test]
    fn orthogonal_direction_in_three_dimensions() {
        let d = DVector::from_vec(vec![1.0, 2.0, 0.5]);
        let v = orthogonal_direction(&d).unwrap();
        assert!(v.dot(&d).abs() < 1e-14);
        assert!((v.norm() - 1.0).abs() < 1e-14);
        assert!(orthogonal_direction(&DVector::from_vec(vec![1.0])).is_err());
    }

    #[test]
    fn config_round_trips_and_rejects_unknown_fields() {
        let cfg = ExperimentConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
        assert!(ExperimentConfig::from_json(r#"{"n_sample": 10}"#).is_err());
        let partial = ExperimentConfig::from_json(r#"{"seed": 3, "algorithm": "w-pb-gem"}"#).unwrap();
        assert_eq!(partial.seed, 3);
        assert_eq!(partial.algorithm, AlgorithmKind::WPbGem);
        assert_eq!(partial.n_samples, 1000);
    }

    #[test]
    fn model_from_file_reference() {
        let cfg = ExperimentConfig::from_json(
            r#"{"true_model": {"path": "truth.json"},
                "init": {"kind": "explicit", "params": {"path": "init.json"}}}"#,
        )
        .unwrap();
        assert_eq!(
            cfg.true_model,
            ModelSource::File {
                path: "truth.json".into()
            }
        );
        let err = cfg.true_model.load().unwrap_err();
        assert_eq!(err.exit_code(), crate::exit::INVALID);
    }

    #[test]
    fn flags_override_config() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply(&Overrides {
            seed: Some(11),
            tol: Some(1e-6),
            beta: Some(vec![0.5, 1.5]),
            plot: true,
            ..Default::default()
        });
        assert_eq!(cfg.seed, 11);
        assert_eq!(cfg.tol, 1e-6);
        assert_eq!(cfg.beta, Some(vec![0.5, 1.5]));
        assert!(cfg.plot);
        assert_eq!(cfg.max_iters, 10_000);
    }

    #[test]
    fn validation() {
        let ok = ExperimentConfig::default();
        assert!(ok.validate().is_ok());
        let cases = [
            ExperimentConfig { n_samples: 0, ..ok.clone() },
            ExperimentConfig { tol: 0.0, ..ok.clone() },
            ExperimentConfig { max_iters: 0, ..ok.clone() },
            ExperimentConfig { inset: Some((5, 5)), ..ok.clone() },
            ExperimentConfig { beta: Some(vec![1.0, -1.0]), ..ok.clone() },
            ExperimentConfig {
                bounds: Some(BoundsSpec { m_lo: 2.0, l_hi: 1.0 }),
                ..ok.clone()
            },
        ];
        for c in cases {
            assert_eq!(c.validate().unwrap_err().exit_code(), crate::exit::INVALID);
        }
        let wrong_len = ExperimentConfig { beta: Some(vec![1.0]), ..ok.clone() };
        assert!(wrong_len.weight_design(2).is_err());
        assert_eq!(ok.weight_design(2).unwrap().betas(), &[DEFAULT_BETA; 2]);
    }

    #[test]
    fn flag_parsers() {
        assert_eq!(parse_beta("0.996, 1").unwrap(), vec![0.996, 1.0]);
        assert!(parse_beta("a,1").is_err());
        assert_eq!(parse_inset("125:140").unwrap(), (125, 140));
        assert!(parse_inset("140:125").is_err());
        assert!(parse_inset("12").is_err());
        let b = parse_bounds("0.5:1.5").unwrap();
        assert_eq!((b.m_lo, b.l_hi), (0.5, 1.5));
        assert_eq!("w-pb-gem".parse::<AlgorithmKind>().unwrap(), AlgorithmKind::WPbGem);
        assert!("newton".parse::<AlgorithmKind>().is_err());
    }
}
