//! Euler scheme for diffusions killed at the boundary of a domain.
//!
//! The scheme runs the plain recursion and kills the path at the first grid
//! point outside the open domain. Because excursions between grid points go
//! unseen, the discrete exit time never precedes the true one, so survival
//! functionals are biased upward; the closed-form driftless survival
//! probability below pins that bias down for tests.

use std::f64::consts::PI;

use crate::em::{shifted_bm_path, simulate_bm_path, simulate_em_path, Grid, GridPath};
use crate::error::{Error, Result, SampleFailure};
use crate::girsanov::path_log_weight;
use crate::mc::{run_mc, McEstimate, McSettings};
use crate::model::{DomainSpec, ProblemKind, ScalarFn, SdeProblem};
use crate::sampling::RngStream;
use std::sync::Arc;

/// Outcome of scanning one grid path for its first boundary crossing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExitRecord {
    /// First grid index whose state lies outside the open domain, if any.
    pub exit_step: Option<usize>,
}

impl ExitRecord {
    /// True when the path left the domain at some grid point.
    pub fn exited(&self) -> bool {
        self.exit_step.is_some()
    }

    /// True when every grid point, including the terminal one, stayed inside.
    pub fn alive_at_horizon(&self) -> bool {
        self.exit_step.is_none()
    }
}

/// Scan a grid path for the first state outside the open domain.
///
/// Boundary points count as exits. The start state is checked too, so a path
/// launched outside the domain exits at step 0.
pub fn discrete_exit_time(path: &GridPath, domain: &DomainSpec) -> ExitRecord {
    for k in 0..=path.grid().n_steps() {
        if !domain.contains(path.state(k)) {
            return ExitRecord { exit_step: Some(k) };
        }
    }
    ExitRecord { exit_step: None }
}

/// A bounded measurable terminal payoff with a declared sup-norm.
#[derive(Clone)]
pub struct BoundedPayoff {
    g: ScalarFn,
    sup_norm: f64,
}

impl BoundedPayoff {
    /// Wrap a payoff with its declared bound; the bound must be a finite
    /// positive number.
    pub fn new(g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static, sup_norm: f64) -> Result<Self> {
        if !(sup_norm > 0.0 && sup_norm.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "payoff sup-norm must be finite and positive, got {sup_norm}"
            )));
        }
        Ok(BoundedPayoff { g: Arc::new(g), sup_norm })
    }

    /// The constant payoff 1, whose killed expectation is the survival
    /// probability.
    pub fn one() -> Self {
        BoundedPayoff { g: Arc::new(|_| 1.0), sup_norm: 1.0 }
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    /// Evaluate the payoff, failing the sample on non-finite values.
    pub fn eval(&self, x: &[f64]) -> std::result::Result<f64, SampleFailure> {
        let v = (self.g)(x);
        if !v.is_finite() {
            return Err(SampleFailure::NonFinitePayoff);
        }
        debug_assert!(v.abs() <= self.sup_norm * (1.0 + 1e-9), "payoff exceeds declared bound");
        Ok(v)
    }
}

impl std::fmt::Debug for BoundedPayoff {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BoundedPayoff").field("sup_norm", &self.sup_norm).finish()
    }
}

fn killed_domain(problem: &SdeProblem) -> Result<&DomainSpec> {
    match &problem.kind {
        ProblemKind::Killed(domain) => Ok(domain),
        other => Err(Error::InvalidInput(format!(
            "killed estimators need a killed problem, got kind `{}`",
            other.name()
        ))),
    }
}

/// Estimate `E[g(X^h_T); not yet exited]` by running the Euler recursion and
/// zeroing paths that touch the complement of the domain at a grid point.
pub fn killed_payoff_estimate(
    problem: &SdeProblem,
    payoff: &BoundedPayoff,
    grid: &Grid,
    settings: &McSettings,
) -> Result<McEstimate> {
    let domain = killed_domain(problem)?;
    run_mc(
        &|stream: &mut RngStream| {
            let path = simulate_em_path(stream, problem, grid)?;
            if discrete_exit_time(&path, domain).alive_at_horizon() {
                payoff.eval(path.terminal())
            } else {
                Ok(0.0)
            }
        },
        settings,
    )
}

/// Estimate the same killed expectation by reweighted driftless paths: shift
/// Brownian paths to `x0 + sigma W`, detect the exit there, and weight the
/// surviving payoff with the full-horizon change-of-measure factor.
pub fn killed_weighted_payoff_estimate(
    problem: &SdeProblem,
    payoff: &BoundedPayoff,
    grid: &Grid,
    settings: &McSettings,
) -> Result<McEstimate> {
    let domain = killed_domain(problem)?;
    let dim = problem.dim();
    run_mc(
        &|stream: &mut RngStream| {
            let bm = simulate_bm_path(stream, grid, dim);
            let shifted = shifted_bm_path(problem, &bm);
            let log_w = path_log_weight(problem, &shifted)?;
            let weight = log_w.exp();
            if !weight.is_finite() {
                return Err(SampleFailure::WeightOverflow);
            }
            if discrete_exit_time(&shifted, domain).alive_at_horizon() {
                let v = payoff.eval(shifted.terminal())?;
                let sample = v * weight;
                if !sample.is_finite() {
                    return Err(SampleFailure::NonFinitePayoff);
                }
                Ok(sample)
            } else {
                Ok(0.0)
            }
        },
        settings,
    )
}

/// Closed-form survival probability of driftless scaled Brownian motion on an
/// interval.
///
/// Returns `P(x0 + sigma W_t stays in (lo, hi) for all t <= horizon)` via the
/// Dirichlet eigenfunction expansion, truncated once the term envelope drops
/// below 1e-12. Starting points outside the closed interval, or exactly on
/// the boundary, give 0.
pub fn driftless_survival_probability(
    x0: f64,
    horizon: f64,
    sigma: f64,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidInput(format!("need a finite interval lo < hi, got [{lo}, {hi}]")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidInput(format!("need sigma > 0, got {sigma}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidInput(format!("need horizon > 0, got {horizon}")));
    }
    if !x0.is_finite() {
        return Err(Error::InvalidInput(format!("need a finite start, got {x0}")));
    }
    if x0 <= lo || x0 >= hi {
        return Ok(0.0);
    }
    let length = hi - lo;
    let y0 = x0 - lo;
    let decay = sigma * sigma * PI * PI * horizon / (2.0 * length * length);
    let mut sum = 0.0;
    let mut n = 1u64;
    loop {
        let nf = n as f64;
        let envelope = 4.0 / (nf * PI) * (-decay * nf * nf).exp();
        if envelope < 1e-12 {
            break;
        }
        sum += envelope * (nf * PI * y0 / length).sin();
        n += 2;
        if n > 2_000_001 {
            break;
        }
    }
    Ok(sum.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::em::Grid;
    use crate::model::{ConstantDiffusion, DriftSpec, GrowthClass};
    use approx::assert_relative_eq;

    fn interval_path(states: Vec<f64>) -> GridPath {
        let grid = Grid::uniform(1.0, states.len() - 1).unwrap();
        GridPath::from_states(grid, 1, states).unwrap()
    }

    fn driftless_killed_problem(x0: f64, sigma: f64) -> SdeProblem {
        let drift = DriftSpec::scalar("zero", GrowthClass::Bounded, |_| 0.0).with_holder_alpha(1.0);
        SdeProblem::killed(
            vec![x0],
            1.0,
            drift,
            ConstantDiffusion::scalar(sigma).unwrap(),
            DomainSpec::interval(-1.0, 1.0),
        )
    }

    #[test]
    fn exit_scan_reports_first_point_outside() {
        let domain = DomainSpec::interval(-1.0, 1.0);
        let record = discrete_exit_time(&interval_path(vec![0.0, 0.5, 1.2, 0.3]), &domain);
        assert_eq!(record.exit_step, Some(2));
        assert!(record.exited());
        assert!(!record.alive_at_horizon());
    }

    #[test]
    fn exit_scan_counts_boundary_as_exit_and_checks_the_start() {
        let domain = DomainSpec::interval(-1.0, 1.0);
        assert_eq!(
            discrete_exit_time(&interval_path(vec![0.0, 1.0]), &domain).exit_step,
            Some(1)
        );
        assert_eq!(
            discrete_exit_time(&interval_path(vec![2.0, 0.0]), &domain).exit_step,
            Some(0)
        );
        assert!(discrete_exit_time(&interval_path(vec![0.0, 0.5, -0.5]), &domain)
            .alive_at_horizon());
    }

    #[test]
    fn bounded_payoff_rejects_bad_bounds_and_nan_values() {
        assert!(BoundedPayoff::new(|_| 1.0, f64::INFINITY).is_err());
        assert!(BoundedPayoff::new(|_| 1.0, 0.0).is_err());
        let p = BoundedPayoff::new(|x| x[0], 10.0).unwrap();
        assert_eq!(p.eval(&[0.5]).unwrap(), 0.5);
        let bad = BoundedPayoff::new(|_| f64::NAN, 1.0).unwrap();
        assert!(matches!(bad.eval(&[0.0]), Err(SampleFailure::NonFinitePayoff)));
    }

    #[test]
    fn survival_probability_matches_frozen_reference_value() {
        // Standard Brownian motion on (-1, 1) from 0, horizon 1; value frozen
        // from an independent evaluation of the eigenfunction series,
        // cross-checked against the reflection (method of images) expansion.
        let p = driftless_survival_probability(0.0, 1.0, 1.0, -1.0, 1.0).unwrap();
        assert_relative_eq!(p, 0.37077742979952394, epsilon = 1e-12);
    }

    #[test]
    fn survival_probability_matches_images_expansion_off_center() {
        // Same construction evaluated at an off-center start and at a larger
        // diffusion, both frozen from the independent cross-check.
        let p = driftless_survival_probability(0.5, 1.0, 1.0, -1.0, 1.0).unwrap();
        assert_relative_eq!(p, 0.2621882755749501, epsilon = 1e-12);
        let q = driftless_survival_probability(0.0, 1.0, 2.0, -1.0, 1.0).unwrap();
        assert_relative_eq!(q, 0.009156990289760759, epsilon = 1e-12);
    }

    #[test]
    fn survival_probability_handles_limits_and_translation() {
        // Almost no time to exit: probability ~ 1.
        let p = driftless_survival_probability(0.0, 1e-6, 1.0, -1.0, 1.0).unwrap();
        assert!(p > 1.0 - 1e-9 && p <= 1.0);
        // Start on or outside the boundary: 0.
        assert_eq!(driftless_survival_probability(1.0, 1.0, 1.0, -1.0, 1.0).unwrap(), 0.0);
        assert_eq!(driftless_survival_probability(-3.0, 1.0, 1.0, -1.0, 1.0).unwrap(), 0.0);
        // Translation invariance.
        let a = driftless_survival_probability(0.25, 0.7, 1.3, -1.0, 1.0).unwrap();
        let b = driftless_survival_probability(10.25, 0.7, 1.3, 9.0, 11.0).unwrap();
        assert_relative_eq!(a, b, epsilon = 1e-13);
    }

    #[test]
    fn survival_probability_validates_inputs() {
        assert!(driftless_survival_probability(0.0, 1.0, 1.0, 1.0, -1.0).is_err());
        assert!(driftless_survival_probability(0.0, 1.0, 0.0, -1.0, 1.0).is_err());
        assert!(driftless_survival_probability(0.0, 0.0, 1.0, -1.0, 1.0).is_err());
        assert!(driftless_survival_probability(f64::NAN, 1.0, 1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn killed_estimators_reject_plain_problems() {
        let drift = DriftSpec::scalar("zero", GrowthClass::Bounded, |_| 0.0).with_holder_alpha(1.0);
        let problem = SdeProblem::scalar_plain(0.0, 1.0, drift, 1.0).unwrap();
        let grid = Grid::uniform(1.0, 4).unwrap();
        let payoff = BoundedPayoff::one();
        let settings = McSettings::new(1_000, 1);
        assert!(killed_payoff_estimate(&problem, &payoff, &grid, &settings).is_err());
        assert!(killed_weighted_payoff_estimate(&problem, &payoff, &grid, &settings).is_err());
    }

    #[test]
    fn discrete_survival_dominates_the_closed_form_probability() {
        // The scheme only inspects grid points, so it overestimates survival;
        // with 20k paths the gap at h = 1/16 is far above noise.
        let problem = driftless_killed_problem(0.0, 1.0);
        let grid = Grid::uniform(1.0, 16).unwrap();
        let est = killed_payoff_estimate(
            &problem,
            &BoundedPayoff::one(),
            &grid,
            &McSettings::new(20_000, 314).with_batches(16),
        )
        .unwrap();
        let exact = driftless_survival_probability(0.0, 1.0, 1.0, -1.0, 1.0).unwrap();
        assert!(
            est.mean > exact + 3.0 * est.stderr,
            "survival {} should dominate exact {} (stderr {})",
            est.mean,
            exact,
            est.stderr
        );
        assert!(est.mean < 1.0);
    }

    #[test]
    fn driftless_weighted_and_direct_estimates_agree_exactly() {
        // With zero drift the weight is exactly 1 and both estimators consume
        // the same draws, so the estimates agree bit for bit.
        let problem = driftless_killed_problem(0.0, 1.0);
        let grid = Grid::uniform(1.0, 8).unwrap();
        let settings = McSettings::new(5_000, 2718).with_batches(8);
        let direct =
            killed_payoff_estimate(&problem, &BoundedPayoff::one(), &grid, &settings).unwrap();
        let weighted =
            killed_weighted_payoff_estimate(&problem, &BoundedPayoff::one(), &grid, &settings)
                .unwrap();
        assert_eq!(direct.mean.to_bits(), weighted.mean.to_bits());
    }

    #[test]
    fn payoff_support_gap_travels_with_the_domain() {
        let domain = DomainSpec::interval(-1.0, 1.0).with_support_gap(0.25).with_holder_p(3.0);
        assert_eq!(domain.payoff_support_gap, 0.25);
        assert_eq!(domain.holder_p, 3.0);
        assert!(domain.contains(&[0.5]));
        assert!(!domain.contains(&[1.0]));
    }
}
