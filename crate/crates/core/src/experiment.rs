//! Config-driven experiment pipelines with machine-readable reports.
//!
//! A TOML [`ExperimentConfig`] names a catalogue problem, a pipeline, and the
//! run sizes; [`run_experiment`] executes it and returns an
//! [`ExperimentOutput`] holding a JSON-serializable report plus optional CSV
//! tables. Five pipelines exist:
//!
//! * `weak_order` — weak-error ladder against a fine-grid reference (or the
//!   coupled difference estimator) with a fitted convergence slope;
//! * `identity_check` — direct simulation versus the reweighted driftless
//!   estimator of the same expectation;
//! * `reflected_law` — terminal law of driftless reflection from the origin
//!   against the folded normal (mean gate plus a goodness-of-fit test);
//! * `killed_bias` — survival-probability bias ladder against the closed
//!   form, with slope, monotonicity and domination gates;
//! * `weight_diagnostic` — stabilization check of empirical weight moments.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::builtins::{self, BuiltinParams};
use crate::em::{evaluate_functional, simulate_em_path, Grid};
use crate::error::{Error, Result};
use crate::girsanov::{
    coupled_weak_error_estimate, weight_moment_diagnostic, weighted_payoff_estimate,
};
use crate::killed::{driftless_survival_probability, killed_payoff_estimate, BoundedPayoff};
use crate::mc::{
    fit_rate, run_mc, weak_error_vs_reference, LadderPoint, McEstimate, McSettings, RateReport,
    MIN_PATHS,
};
use crate::model::{
    validate_problem, DomainShape, GRegularity, PathFunctional, ProblemKind, RatePrediction,
    SdeProblem,
};
use crate::reflected::simulate_reflected_em_path;
use crate::sampling::RngStream;
use crate::stats::{folded_normal_cdf, folded_normal_unit_mean, ks_test};

/// Which pipeline an experiment runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineKind {
    WeakOrder,
    IdentityCheck,
    ReflectedLaw,
    KilledBias,
    WeightDiagnostic,
}

impl PipelineKind {
    pub fn name(&self) -> &'static str {
        match self {
            PipelineKind::WeakOrder => "weak_order",
            PipelineKind::IdentityCheck => "identity_check",
            PipelineKind::ReflectedLaw => "reflected_law",
            PipelineKind::KilledBias => "killed_bias",
            PipelineKind::WeightDiagnostic => "weight_diagnostic",
        }
    }
}

impl std::str::FromStr for PipelineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weak_order" => Ok(PipelineKind::WeakOrder),
            "identity_check" => Ok(PipelineKind::IdentityCheck),
            "reflected_law" => Ok(PipelineKind::ReflectedLaw),
            "killed_bias" => Ok(PipelineKind::KilledBias),
            "weight_diagnostic" => Ok(PipelineKind::WeightDiagnostic),
            other => Err(Error::Config(format!(
                "unknown pipeline `{other}`; expected weak_order, identity_check, \
                 reflected_law, killed_bias or weight_diagnostic"
            ))),
        }
    }
}

/// Optional problem overrides (see [`BuiltinParams`]).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interval: Option<[f64; 2]>,
}

impl ProblemOverrides {
    fn params(&self) -> BuiltinParams {
        BuiltinParams {
            alpha: self.alpha,
            constant: self.constant,
            x0: self.x0,
            horizon: self.horizon,
            sigma: self.sigma,
            interval: self.interval.map(|[lo, hi]| (lo, hi)),
        }
    }
}

/// Functional kind selector for the config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalKind {
    Terminal,
    Integral,
}

/// Functional description: names resolve through the scalar-function
/// registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FunctionalConfig {
    pub kind: FunctionalKind,
    /// Terminal payoff name.
    pub payoff: String,
    /// Outer function of an integral functional.
    pub outer: String,
    /// Integrand name of an integral functional.
    pub integrand: String,
    /// Holder exponent declared for the integrand (default 1).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub integrand_beta: Option<f64>,
    /// Declare the integrand irregular-but-bounded-variation instead of
    /// Holder.
    pub integrand_class_a: bool,
}

impl Default for FunctionalConfig {
    fn default() -> Self {
        FunctionalConfig {
            kind: FunctionalKind::Terminal,
            payoff: "identity".into(),
            outer: "identity".into(),
            integrand: "identity".into(),
            integrand_beta: None,
            integrand_class_a: false,
        }
    }
}

impl FunctionalConfig {
    /// Build the runtime functional.
    pub fn build(&self) -> Result<PathFunctional> {
        match self.kind {
            FunctionalKind::Terminal => {
                let g = builtins::scalar_function(&self.payoff)?;
                Ok(PathFunctional::terminal_scalar(g))
            }
            FunctionalKind::Integral => {
                let f = builtins::scalar_function(&self.outer)?;
                let g = builtins::scalar_function(&self.integrand)?;
                let reg = if self.integrand_class_a {
                    GRegularity::ClassA
                } else {
                    GRegularity::Holder(self.integrand_beta.unwrap_or(1.0))
                };
                Ok(PathFunctional::integral(f, move |x: &[f64]| g(x[0]), reg))
            }
        }
    }
}

/// Step-size ladder description. Explicit `steps` win over `k_range`
/// (`h = 2^-k` for `k` in the inclusive range); the reference step is `h_ref`,
/// or `2^-k_ref`, or `min(steps)/16`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LadderConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_range: Option<[u32; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_ref: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_ref: Option<u32>,
}

impl LadderConfig {
    /// Ladder steps, largest first.
    pub fn resolve_steps(&self) -> Result<Vec<f64>> {
        if let Some(steps) = &self.steps {
            if steps.is_empty() {
                return Err(Error::Config("ladder.steps must not be empty".into()));
            }
            return Ok(steps.clone());
        }
        let [a, b] = self.k_range.unwrap_or([3, 7]);
        if a > b {
            return Err(Error::Config(format!("ladder.k_range [{a}, {b}] must be increasing")));
        }
        Ok((a..=b).map(|k| 0.5f64.powi(k as i32)).collect())
    }

    /// Reference step for the fine-grid run.
    pub fn resolve_h_ref(&self, steps: &[f64]) -> f64 {
        if let Some(h) = self.h_ref {
            return h;
        }
        if let Some(k) = self.k_ref {
            return 0.5f64.powi(k as i32);
        }
        steps.iter().cloned().fold(f64::INFINITY, f64::min) / 16.0
    }
}

/// Weak-error estimator selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorMethod {
    /// Independent fine-grid reference run.
    Reference,
    /// Per-path coupled difference of change-of-measure weights.
    Coupled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    pub method: EstimatorMethod,
    /// Sub-steps per coarse step for the coupled estimator.
    pub refinement: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig { method: EstimatorMethod::Reference, refinement: 8 }
    }
}

/// Weight-moment diagnostic knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticConfig {
    /// Moment order `p` of the weight.
    pub moment: f64,
    /// Strictly increasing sample-count checkpoints; defaults to a doubling
    /// schedule ending at `paths`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<u64>>,
}

impl Default for DiagnosticConfig {
    fn default() -> Self {
        DiagnosticConfig { moment: 2.0, schedule: None }
    }
}

/// Pass/fail thresholds. Unset slope bounds fall back to pipeline defaults:
/// `0.7 * predicted kappa` as the weak-order floor, and the `[0.35, 0.65]`
/// band for the killed-bias slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GateConfig {
    /// Width, in combined standard errors, of equality gates.
    pub sigma_level: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_slope: Option<f64>,
    /// Goodness-of-fit p-value floor.
    pub ks_min_p: f64,
    /// Absolute tolerance of mean-versus-reference gates.
    pub mean_tol: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig {
            sigma_level: 3.0,
            min_slope: None,
            max_slope: None,
            ks_min_p: 1e-3,
            mean_tol: 0.01,
        }
    }
}

fn default_seed() -> u64 {
    12345
}
fn default_paths() -> u64 {
    100_000
}
fn default_batches() -> u32 {
    64
}
fn default_workers() -> usize {
    1
}
fn default_step() -> f64 {
    0.015625
}

/// A full experiment description, loadable from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pipeline: PipelineKind,
    /// Catalogue problem name.
    pub builtin: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_paths")]
    pub paths: u64,
    #[serde(default = "default_batches")]
    pub batches: u32,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Step size of single-grid pipelines (identity, law, diagnostic).
    #[serde(default = "default_step")]
    pub step: f64,
    /// Output directory; the CLI may override it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    #[serde(default)]
    pub problem: ProblemOverrides,
    #[serde(default)]
    pub functional: FunctionalConfig,
    #[serde(default)]
    pub ladder: LadderConfig,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub diagnostic: DiagnosticConfig,
    #[serde(default)]
    pub gates: GateConfig,
}

impl ExperimentConfig {
    /// Minimal config for a pipeline/builtin pair, everything else default.
    pub fn new(pipeline: PipelineKind, builtin: impl Into<String>) -> Self {
        ExperimentConfig {
            pipeline,
            builtin: builtin.into(),
            seed: default_seed(),
            paths: default_paths(),
            batches: default_batches(),
            workers: default_workers(),
            step: default_step(),
            out_dir: None,
            problem: ProblemOverrides::default(),
            functional: FunctionalConfig::default(),
            ladder: LadderConfig::default(),
            estimator: EstimatorConfig::default(),
            diagnostic: DiagnosticConfig::default(),
            gates: GateConfig::default(),
        }
    }

    /// Parse and validate a TOML document.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Render back to TOML.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Check the run sizes and knobs that serde cannot.
    pub fn validate(&self) -> Result<()> {
        if self.paths < MIN_PATHS {
            return Err(Error::Config(format!(
                "paths = {} is below the minimum of {MIN_PATHS}",
                self.paths
            )));
        }
        if self.batches == 0 || u64::from(self.batches) > self.paths {
            return Err(Error::Config(format!(
                "batches = {} must lie in [1, paths]",
                self.batches
            )));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Config(format!("step = {} must be positive and finite", self.step)));
        }
        if !(self.diagnostic.moment > 0.0 && self.diagnostic.moment.is_finite()) {
            return Err(Error::Config(format!(
                "diagnostic.moment = {} must be positive",
                self.diagnostic.moment
            )));
        }
        if self.estimator.refinement < 2 {
            return Err(Error::Config(format!(
                "estimator.refinement = {} must be at least 2",
                self.estimator.refinement
            )));
        }
        if !(self.gates.sigma_level > 0.0) {
            return Err(Error::Config("gates.sigma_level must be positive".into()));
        }
        if !(self.gates.mean_tol > 0.0) {
            return Err(Error::Config("gates.mean_tol must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.gates.ks_min_p) {
            return Err(Error::Config("gates.ks_min_p must lie in [0, 1]".into()));
        }
        Ok(())
    }

    fn settings(&self) -> McSettings {
        McSettings::new(self.paths, self.seed)
            .with_batches(self.batches)
            .with_workers(self.workers)
    }

    fn build_problem(&self) -> Result<SdeProblem> {
        builtins::problem(&self.builtin, &self.problem.params())
    }
}

/// Load a config file from disk.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)?;
    ExperimentConfig::from_toml_str(&text)
}

/// Flat, serializable result of one experiment run.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub pipeline: String,
    pub builtin: String,
    pub seed: u64,
    pub paths: u64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted: Option<RatePrediction>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fitted_slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_intercept: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_residual_rms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub below_noise_floor: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ladder: Option<Vec<LadderPoint>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direct_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direct_stderr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weighted_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weighted_stderr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_stderr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks_statistic: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks_p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monotone: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dominates: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moment_order: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stabilized: Option<bool>,
    pub messages: Vec<String>,
}

impl ExperimentReport {
    fn new(config: &ExperimentConfig) -> Self {
        ExperimentReport {
            pipeline: config.pipeline.name().into(),
            builtin: config.builtin.clone(),
            seed: config.seed,
            paths: config.paths,
            passed: false,
            predicted: None,
            predicted_kappa: None,
            fitted_slope: None,
            fit_intercept: None,
            fit_residual_rms: None,
            below_noise_floor: None,
            ladder: None,
            direct_mean: None,
            direct_stderr: None,
            weighted_mean: None,
            weighted_stderr: None,
            z_score: None,
            sample_mean: None,
            sample_stderr: None,
            reference_value: None,
            ks_statistic: None,
            ks_p_value: None,
            monotone: None,
            dominates: None,
            moment_order: None,
            stabilized: None,
            messages: Vec::new(),
        }
    }

    fn absorb_fit(&mut self, fit: &RateReport) {
        self.fitted_slope = fit.slope;
        self.fit_intercept = fit.intercept;
        self.fit_residual_rms = fit.residual_rms;
        self.below_noise_floor = Some(fit.below_noise_floor);
        self.ladder = Some(fit.points.clone());
    }

    /// Render as pretty-printed JSON.
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("report serialization failed: {e}")))
    }
}

/// Report plus the CSV tables a pipeline produced.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    /// `h,error,stderr,reference` rows for ladder pipelines.
    pub ladder_csv: Option<String>,
    /// `paths,estimate` rows for the weight diagnostic.
    pub moments_csv: Option<String>,
}

fn ladder_csv(points: &[LadderPoint]) -> String {
    let mut out = String::from("h,error,stderr,reference\n");
    for p in points {
        out.push_str(&format!("{},{},{},{}\n", p.h, p.error, p.stderr, p.reference));
    }
    out
}

fn validate_and_collect_warnings(problem: &SdeProblem, messages: &mut Vec<String>) -> Result<()> {
    let report = validate_problem(problem);
    let warnings = report.into_result()?;
    messages.extend(warnings);
    Ok(())
}

/// Execute one experiment.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    match config.pipeline {
        PipelineKind::WeakOrder => run_weak_order(config),
        PipelineKind::IdentityCheck => run_identity_check(config),
        PipelineKind::ReflectedLaw => run_reflected_law(config),
        PipelineKind::KilledBias => run_killed_bias(config),
        PipelineKind::WeightDiagnostic => run_weight_diagnostic(config),
    }
}

fn run_weak_order(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let problem = config.build_problem()?;
    let mut report = ExperimentReport::new(config);
    validate_and_collect_warnings(&problem, &mut report.messages)?;
    if matches!(problem.kind, ProblemKind::Killed(_)) {
        return Err(Error::Config(
            "the weak_order pipeline has no fine-grid reference for killed problems; \
             use killed_bias, whose reference is the closed-form survival probability"
                .into(),
        ));
    }
    let functional = config.functional.build()?;
    let predicted = crate::model::predicted_weak_order(&problem, &functional)?;
    report.predicted = Some(predicted);
    report.predicted_kappa = predicted.kappa();

    let steps = config.ladder.resolve_steps()?;
    let settings = config.settings();
    let points = match config.estimator.method {
        EstimatorMethod::Reference => {
            let h_ref = config.ladder.resolve_h_ref(&steps);
            let result = weak_error_vs_reference(&problem, &functional, &steps, h_ref, &settings)?;
            report.reference_value = Some(result.reference.mean);
            if result.reference.failed || result.estimates.iter().any(|e| e.failed) {
                report
                    .messages
                    .push("an estimate discarded more than 0.01% of its paths".into());
            }
            result.points
        }
        EstimatorMethod::Coupled => {
            if !matches!(problem.kind, ProblemKind::Plain) {
                return Err(Error::Config(
                    "the coupled estimator reweights driftless paths and covers plain problems only"
                        .into(),
                ));
            }
            let mut points = Vec::with_capacity(steps.len());
            if steps.windows(2).any(|w| w[0] <= w[1]) {
                return Err(Error::Config("ladder steps must be strictly decreasing".into()));
            }
            for (i, &h) in steps.iter().enumerate() {
                let grid = Grid::from_step(problem.horizon, h)?;
                let est = coupled_weak_error_estimate(
                    &problem,
                    &functional,
                    &grid,
                    config.estimator.refinement,
                    &settings.derived(&format!("coupled{i}")),
                )?;
                if est.failed {
                    report
                        .messages
                        .push(format!("coupled estimate at h = {h} discarded over 0.01% of paths"));
                }
                points.push(LadderPoint {
                    h,
                    error: est.mean,
                    stderr: est.stderr,
                    reference: f64::NAN,
                });
            }
            points
        }
    };

    let fit = fit_rate(&points)?;
    report.absorb_fit(&fit);
    let csv = ladder_csv(&points);

    if fit.below_noise_floor {
        report.passed = true;
        report.messages.push(
            "every ladder error is statistically indistinguishable from zero; \
             consistent with an exact-in-law scheme at this sample size"
                .into(),
        );
    } else {
        let slope = fit.slope.expect("fit has a slope when not below the noise floor");
        match predicted.kappa() {
            Some(kappa) => {
                let floor = config.gates.min_slope.unwrap_or(0.7 * kappa);
                let mut ok = slope >= floor;
                if let Some(ceil) = config.gates.max_slope {
                    ok = ok && slope <= ceil;
                }
                report.passed = ok;
                report.messages.push(format!(
                    "fitted slope {slope:.4} vs predicted exponent {kappa} (floor {floor:.4})"
                ));
            }
            None => {
                report.passed = true;
                report.messages.push(format!(
                    "no rate is claimed for this problem; observed slope {slope:.4}"
                ));
            }
        }
    }
    Ok(ExperimentOutput { report, ladder_csv: Some(csv), moments_csv: None })
}

fn run_identity_check(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let problem = config.build_problem()?;
    let mut report = ExperimentReport::new(config);
    validate_and_collect_warnings(&problem, &mut report.messages)?;
    if !matches!(problem.kind, ProblemKind::Plain) {
        return Err(Error::Config(
            "identity_check compares plain simulation against the reweighted estimator; \
             pick a plain builtin"
                .into(),
        ));
    }
    let functional = config.functional.build()?;
    let grid = Grid::from_step(problem.horizon, config.step)?;
    let settings = config.settings();

    let direct = run_mc(
        &|stream: &mut RngStream| {
            let path = simulate_em_path(stream, &problem, &grid)?;
            evaluate_functional(&path, &functional)
        },
        &settings.derived("direct"),
    )?;
    let weighted = weighted_payoff_estimate(&problem, &functional, &grid, &settings.derived("weighted"))?;

    let combined = (direct.stderr * direct.stderr + weighted.stderr * weighted.stderr).sqrt();
    let z = if combined > 0.0 { (direct.mean - weighted.mean) / combined } else { 0.0 };
    report.direct_mean = Some(direct.mean);
    report.direct_stderr = Some(direct.stderr);
    report.weighted_mean = Some(weighted.mean);
    report.weighted_stderr = Some(weighted.stderr);
    report.z_score = Some(z);
    report.passed = z.abs() <= config.gates.sigma_level && !direct.failed && !weighted.failed;
    report.messages.push(format!(
        "direct {:.6} +- {:.6} vs reweighted {:.6} +- {:.6} (z = {:.2})",
        direct.mean, direct.stderr, weighted.mean, weighted.stderr, z
    ));
    if direct.failed || weighted.failed {
        report.messages.push("an estimate discarded more than 0.01% of its paths".into());
    }
    Ok(ExperimentOutput { report, ladder_csv: None, moments_csv: None })
}

fn run_reflected_law(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let problem = config.build_problem()?;
    let mut report = ExperimentReport::new(config);
    validate_and_collect_warnings(&problem, &mut report.messages)?;
    if !matches!(problem.kind, ProblemKind::Reflected) {
        return Err(Error::Config("reflected_law needs a reflected builtin".into()));
    }
    if config.builtin != "reflected_bm" || problem.x0[0] != 0.0 {
        return Err(Error::Config(
            "the folded-normal reference is exact only for `reflected_bm` started at 0; \
             other reflected problems have no closed-form terminal law"
                .into(),
        ));
    }
    let grid = Grid::from_step(problem.horizon, config.step)?;
    let sizes = crate::mc::batch_sizes(config.paths, config.batches);
    let mut samples = Vec::with_capacity(config.paths as usize);
    for (b, &size) in sizes.iter().enumerate() {
        let mut stream = RngStream::new(config.seed, b as u64);
        for _ in 0..size {
            let path = simulate_reflected_em_path(&mut stream, &problem, &grid)
                .map_err(|f| Error::InvalidInput(format!("reflected path failed: {f}")))?;
            samples.push(path.terminal_position());
        }
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    let stderr = (var / n).sqrt();
    let scale = problem.diffusion.scalar_value() * problem.horizon.sqrt();
    let reference = scale * folded_normal_unit_mean();
    let ks = ks_test(&mut samples, |x| folded_normal_cdf(x, scale));

    let mean_ok = (mean - reference).abs() <= config.gates.mean_tol;
    let ks_ok = ks.p_value >= config.gates.ks_min_p;
    report.sample_mean = Some(mean);
    report.sample_stderr = Some(stderr);
    report.reference_value = Some(reference);
    report.ks_statistic = Some(ks.statistic);
    report.ks_p_value = Some(ks.p_value);
    report.passed = mean_ok && ks_ok;
    report.messages.push(format!(
        "terminal mean {:.6} vs folded-normal mean {:.6} (tolerance {}); \
         goodness-of-fit D = {:.5}, p = {:.4}",
        mean, reference, config.gates.mean_tol, ks.statistic, ks.p_value
    ));
    Ok(ExperimentOutput { report, ladder_csv: None, moments_csv: None })
}

fn run_killed_bias(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let problem = config.build_problem()?;
    let mut report = ExperimentReport::new(config);
    validate_and_collect_warnings(&problem, &mut report.messages)?;
    let domain = match &problem.kind {
        ProblemKind::Killed(d) => d,
        _ => return Err(Error::Config("killed_bias needs a killed builtin".into())),
    };
    if config.builtin != "killed_bm_interval" {
        return Err(Error::Config(
            "the closed-form survival reference is exact only for `killed_bm_interval` \
             (driftless motion on an interval)"
                .into(),
        ));
    }
    let (lo, hi) = match &domain.shape {
        DomainShape::Interval { lo, hi } => (*lo, *hi),
        _ => return Err(Error::Config("killed_bias needs an interval domain".into())),
    };
    let exact = driftless_survival_probability(
        problem.x0[0],
        problem.horizon,
        problem.diffusion.scalar_value(),
        lo,
        hi,
    )?;
    report.reference_value = Some(exact);
    report.predicted = Some(crate::model::predicted_weak_order(
        &problem,
        &PathFunctional::terminal_scalar(|x| x),
    )?);
    report.predicted_kappa = report.predicted.as_ref().and_then(|p| p.kappa());

    let steps = config.ladder.resolve_steps()?;
    if steps.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::Config("ladder steps must be strictly decreasing".into()));
    }
    let payoff = BoundedPayoff::one();
    let settings = config.settings();
    let mut points = Vec::with_capacity(steps.len());
    let mut estimates: Vec<McEstimate> = Vec::with_capacity(steps.len());
    for (i, &h) in steps.iter().enumerate() {
        let grid = Grid::from_step(problem.horizon, h)?;
        let est =
            killed_payoff_estimate(&problem, &payoff, &grid, &settings.derived(&format!("ladder{i}")))?;
        points.push(LadderPoint { h, error: est.mean - exact, stderr: est.stderr, reference: exact });
        estimates.push(est);
    }
    let fit = fit_rate(&points)?;
    report.absorb_fit(&fit);
    let csv = ladder_csv(&points);

    let monotone = estimates.windows(2).all(|w| {
        let slack = config.gates.sigma_level
            * (w[0].stderr * w[0].stderr + w[1].stderr * w[1].stderr).sqrt();
        w[1].mean <= w[0].mean + slack
    });
    let dominates = estimates.iter().all(|e| e.mean > exact);
    report.monotone = Some(monotone);
    report.dominates = Some(dominates);

    let floor = config.gates.min_slope.unwrap_or(0.35);
    let ceil = config.gates.max_slope.unwrap_or(0.65);
    let slope_ok = match fit.slope {
        Some(s) if !fit.below_noise_floor => s >= floor && s <= ceil,
        _ => false,
    };
    report.passed = slope_ok && monotone && dominates;
    report.messages.push(format!(
        "survival bias slope {:?} (band [{floor}, {ceil}]); grid-skeleton survival must shrink \
         towards, and stay above, the exact probability {exact:.6}",
        fit.slope
    ));
    if !monotone {
        report.messages.push("survival estimates were not monotone within the noise band".into());
    }
    if !dominates {
        report
            .messages
            .push("a survival estimate fell below the exact probability".into());
    }
    Ok(ExperimentOutput { report, ladder_csv: Some(csv), moments_csv: None })
}

fn default_schedule(paths: u64) -> Vec<u64> {
    let mut schedule = Vec::new();
    let mut n = (paths / 64).max(MIN_PATHS);
    while n < paths {
        schedule.push(n);
        n = n.saturating_mul(2);
    }
    schedule.push(paths);
    schedule.dedup();
    schedule
}

fn run_weight_diagnostic(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let problem = config.build_problem()?;
    let mut report = ExperimentReport::new(config);
    validate_and_collect_warnings(&problem, &mut report.messages)?;
    if !matches!(problem.kind, ProblemKind::Plain) {
        return Err(Error::Config(
            "the weight diagnostic reweights driftless paths and covers plain problems only".into(),
        ));
    }
    let grid = Grid::from_step(problem.horizon, config.step)?;
    let schedule = match &config.diagnostic.schedule {
        Some(s) => s.clone(),
        None => default_schedule(config.paths),
    };
    let diag =
        weight_moment_diagnostic(&problem, &grid, config.diagnostic.moment, &schedule, config.seed)?;

    let mut csv = String::from("paths,estimate\n");
    for (n, est) in &diag.entries {
        csv.push_str(&format!("{n},{est}\n"));
    }
    report.moment_order = Some(diag.p);
    report.stabilized = Some(diag.stabilized);
    report.passed = diag.stabilized;
    if diag.stabilized {
        report.messages.push(format!(
            "empirical weight moment of order {} stabilized over the sample schedule",
            diag.p
        ));
    } else {
        report.messages.push(format!(
            "empirical weight moment of order {} kept drifting between checkpoints; \
             the moment may be infinite and weighted estimators untrustworthy here",
            diag.p
        ));
    }
    Ok(ExperimentOutput { report, ladder_csv: None, moments_csv: Some(csv) })
}

/// Write `report.json` plus any CSV tables into `out_dir`, creating it if
/// needed. Returns the written paths.
pub fn write_outputs(output: &ExperimentOutput, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let report_path = out_dir.join("report.json");
    fs::write(&report_path, output.report.to_json()? + "\n")?;
    written.push(report_path);
    if let Some(csv) = &output.ladder_csv {
        let path = out_dir.join("ladder.csv");
        fs::write(&path, csv)?;
        written.push(path);
    }
    if let Some(csv) = &output.moments_csv {
        let path = out_dir.join("moments.csv");
        fs::write(&path, csv)?;
        written.push(path);
    }
    Ok(written)
}
