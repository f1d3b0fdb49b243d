//! Uniform time grids, grid paths, and Euler-Maruyama simulation.
//!
//! The scheme discretizes `dX = b(X) dt + sigma dW` on the uniform grid
//! `t_k = k h`, `h = T / n`:
//!
//! ```text
//! X_{t_{k+1}} = X_{t_k} + b(X_{t_k}) h + sigma (W_{t_{k+1}} - W_{t_k}).
//! ```
//!
//! [`simulate_bm_path`] and [`simulate_em_path`] consume identical increment
//! sequences when driven by streams in the same state, which is what couples
//! direct and Girsanov-weighted estimators pathwise.

use crate::error::{Error, Result, SampleFailure};
use crate::model::{PathFunctional, SdeProblem};
use crate::sampling::RngStream;

/// Uniform grid on [0, T] with n steps of size h = T/n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n_steps: usize,
    step: f64,
    horizon: f64,
}

impl Grid {
    /// Grid with `n_steps` uniform steps over `[0, horizon]`.
    pub fn uniform(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "grid horizon must be positive and finite, got {horizon}"
            )));
        }
        if n_steps == 0 {
            return Err(Error::InvalidInput("grid needs at least one step".into()));
        }
        Ok(Grid { n_steps, step: horizon / n_steps as f64, horizon })
    }

    /// Grid from a step size, which must equal `horizon / n` for an integer n
    /// (up to 1e-9 relative tolerance).
    pub fn from_step(horizon: f64, h: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "grid horizon must be positive and finite, got {horizon}"
            )));
        }
        if !(h > 0.0 && h <= horizon) {
            return Err(Error::StepNotDivisor { h, horizon });
        }
        let ratio = horizon / h;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::StepNotDivisor { h, horizon });
        }
        Self::uniform(horizon, n as usize)
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Grid time t_k = k h.
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.step
    }

    /// Left grid point of the interval containing `s`: eta(s) = floor(s/h) h,
    /// clamped into [0, T].
    pub fn floor_time(&self, s: f64) -> f64 {
        let k = (s / self.step).floor().clamp(0.0, self.n_steps as f64);
        k * self.step
    }
}

/// States and driving Brownian increments of one simulated path.
///
/// `states` holds `n_steps + 1` states of length `dim` back to back;
/// `increments` holds the `n_steps` raw Brownian increments (before
/// multiplication by sigma), which weight computations need. Synthetic paths
/// built via [`GridPath::from_states`] carry no increments.
#[derive(Debug, Clone)]
pub struct GridPath {
    grid: Grid,
    dim: usize,
    states: Vec<f64>,
    increments: Vec<f64>,
}

impl GridPath {
    /// Wrap explicit states (e.g. for tests or functional evaluation of
    /// externally produced paths). `states.len()` must equal
    /// `(grid.n_steps() + 1) * dim`.
    pub fn from_states(grid: Grid, dim: usize, states: Vec<f64>) -> Result<Self> {
        if states.len() != (grid.n_steps() + 1) * dim {
            return Err(Error::InvalidInput(format!(
                "need {} state entries, got {}",
                (grid.n_steps() + 1) * dim,
                states.len()
            )));
        }
        Ok(GridPath { grid, dim, states, increments: Vec::new() })
    }

    /// Crate-internal constructor for simulators that build states and
    /// increments together.
    pub(crate) fn from_parts(grid: Grid, dim: usize, states: Vec<f64>, increments: Vec<f64>) -> Self {
        debug_assert_eq!(states.len(), (grid.n_steps() + 1) * dim);
        debug_assert_eq!(increments.len(), grid.n_steps() * dim);
        GridPath { grid, dim, states, increments }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// State at grid index k.
    #[inline]
    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    /// Terminal state.
    pub fn terminal(&self) -> &[f64] {
        self.state(self.grid.n_steps())
    }

    /// Raw Brownian increment of step k (empty for synthetic paths).
    #[inline]
    pub fn increment(&self, k: usize) -> &[f64] {
        &self.increments[k * self.dim..(k + 1) * self.dim]
    }

    pub fn has_increments(&self) -> bool {
        !self.increments.is_empty()
    }

    /// Flat state storage (row-major over grid index).
    pub fn flat_states(&self) -> &[f64] {
        &self.states
    }

    /// CSV dump with header `t,x1,..,xd`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for j in 1..=self.dim {
            out.push_str(&format!(",x{j}"));
        }
        out.push('\n');
        for k in 0..=self.grid.n_steps() {
            out.push_str(&format!("{}", self.grid.time(k)));
            for v in self.state(k) {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Simulate a standard Brownian path on the grid (started at zero).
///
/// Draws `dim` Gaussians of variance h per step, in step order — the same
/// order [`simulate_em_path`] uses, so the two consume identical increment
/// sequences from equal stream states.
pub fn simulate_bm_path(stream: &mut RngStream, grid: &Grid, dim: usize) -> GridPath {
    let n = grid.n_steps();
    let sd = grid.step().sqrt();
    let mut states = vec![0.0; (n + 1) * dim];
    let mut increments = vec![0.0; n * dim];
    for k in 0..n {
        for j in 0..dim {
            let dw = sd * stream.standard_normal();
            increments[k * dim + j] = dw;
            states[(k + 1) * dim + j] = states[k * dim + j] + dw;
        }
    }
    GridPath { grid: *grid, dim, states, increments }
}

/// Run the Euler-Maruyama recursion for a plain (unconstrained) problem.
///
/// Stores the driving increments alongside the states. Returns a per-path
/// failure if the drift or a state turns non-finite.
pub fn simulate_em_path(
    stream: &mut RngStream,
    problem: &SdeProblem,
    grid: &Grid,
) -> std::result::Result<GridPath, SampleFailure> {
    let dim = problem.dim();
    let n = grid.n_steps();
    let h = grid.step();
    let sd = h.sqrt();
    let mut states = vec![0.0; (n + 1) * dim];
    states[..dim].copy_from_slice(&problem.x0);
    let mut increments = vec![0.0; n * dim];
    let mut drift = vec![0.0; dim];
    let mut noise = vec![0.0; dim];
    for k in 0..n {
        let (done, rest) = states.split_at_mut((k + 1) * dim);
        let x = &done[k * dim..];
        problem.drift.eval_into(x, &mut drift);
        if drift.iter().any(|v| !v.is_finite()) {
            return Err(SampleFailure::NonFiniteDrift { step: k });
        }
        let dw = &mut increments[k * dim..(k + 1) * dim];
        for w in dw.iter_mut() {
            *w = sd * stream.standard_normal();
        }
        problem.diffusion.apply_into(dw, &mut noise);
        let next = &mut rest[..dim];
        for j in 0..dim {
            next[j] = x[j] + drift[j] * h + noise[j];
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(SampleFailure::NonFiniteState { step: k + 1 });
        }
    }
    Ok(GridPath { grid: *grid, dim, states, increments })
}

/// Shift a Brownian path into `x0 + sigma W`, keeping the raw increments.
///
/// This is the path whose functional values, weighted by the Girsanov factor,
/// reproduce expectations under the Euler scheme.
pub fn shifted_bm_path(problem: &SdeProblem, bm: &GridPath) -> GridPath {
    let dim = problem.dim();
    debug_assert_eq!(bm.dim(), dim);
    let n = bm.grid().n_steps();
    let mut states = vec![0.0; (n + 1) * dim];
    let mut noise = vec![0.0; dim];
    for k in 0..=n {
        problem.diffusion.apply_into(bm.state(k), &mut noise);
        for j in 0..dim {
            states[k * dim + j] = problem.x0[j] + noise[j];
        }
    }
    GridPath { grid: *bm.grid(), dim, states, increments: bm.increments.clone() }
}

/// Evaluate a path functional on a grid path.
///
/// Integral functionals use the left-point rule `h * sum_{k<n} g(X_{t_k})`.
/// Non-finite results are reported as invalid samples.
pub fn evaluate_functional(
    path: &GridPath,
    functional: &PathFunctional,
) -> std::result::Result<f64, SampleFailure> {
    let value = match functional {
        PathFunctional::Terminal { g } => g(path.terminal()),
        PathFunctional::Integral { f, g, g_regularity: _ } => {
            let h = path.grid().step();
            let n = path.grid().n_steps();
            let mut acc = 0.0;
            for k in 0..n {
                acc += g(path.state(k));
            }
            f(h * acc)
        }
        PathFunctional::GridPath { f } => f(path.flat_states(), path.dim()),
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(SampleFailure::NonFinitePayoff)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DriftSpec, GRegularity, GrowthClass, PathFunctional};
    use approx::assert_relative_eq;

    fn zero_problem() -> SdeProblem {
        let drift = DriftSpec::scalar("zero", GrowthClass::Bounded, |_| 0.0)
            .with_holder_alpha(1.0)
            .with_class_a_all();
        SdeProblem::scalar_plain(0.0, 1.0, drift, 1.0).unwrap()
    }

    #[test]
    fn uniform_grid_has_exact_step_arithmetic() {
        let g = Grid::uniform(1.0, 256).unwrap();
        assert_eq!(g.step(), 1.0 / 256.0);
        assert_eq!(g.time(256), 1.0);
        assert_eq!(g.floor_time(0.3), (0.3f64 / g.step()).floor() * g.step());
        assert_eq!(g.floor_time(1.0), 1.0);
    }

    #[test]
    fn from_step_accepts_divisors_and_rejects_others() {
        let g = Grid::from_step(1.0, 0.125).unwrap();
        assert_eq!(g.n_steps(), 8);
        assert!(matches!(
            Grid::from_step(1.0, 0.3),
            Err(Error::StepNotDivisor { .. })
        ));
        assert!(Grid::from_step(1.0, 0.0).is_err());
        assert!(Grid::from_step(1.0, 1.5).is_err());
    }

    #[test]
    fn grid_rejects_bad_horizon_or_steps() {
        assert!(Grid::uniform(0.0, 4).is_err());
        assert!(Grid::uniform(-1.0, 4).is_err());
        assert!(Grid::uniform(1.0, 0).is_err());
    }

    #[test]
    fn bm_and_em_paths_consume_identical_increments() {
        let grid = Grid::uniform(1.0, 32).unwrap();
        let problem = zero_problem();
        let mut s1 = RngStream::new(11, 3);
        let mut s2 = RngStream::new(11, 3);
        let bm = simulate_bm_path(&mut s1, &grid, 1);
        let em = simulate_em_path(&mut s2, &problem, &grid).unwrap();
        for k in 0..grid.n_steps() {
            assert_eq!(bm.increment(k)[0].to_bits(), em.increment(k)[0].to_bits());
        }
        // Zero drift: EM equals x0 + sigma W up to accumulated rounding.
        for k in 0..=grid.n_steps() {
            assert_relative_eq!(bm.state(k)[0], em.state(k)[0], epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn em_reports_non_finite_drift_with_step_index() {
        let drift = DriftSpec::scalar("bad", GrowthClass::Bounded, |_| f64::NAN)
            .with_class_a_all();
        let problem = SdeProblem::scalar_plain(0.0, 1.0, drift, 1.0).unwrap();
        let grid = Grid::uniform(1.0, 4).unwrap();
        let mut s = RngStream::new(0, 0);
        let err = simulate_em_path(&mut s, &problem, &grid).unwrap_err();
        assert_eq!(err, SampleFailure::NonFiniteDrift { step: 0 });
    }

    #[test]
    fn terminal_functional_reads_terminal_state() {
        let grid = Grid::uniform(1.0, 4).unwrap();
        let path = GridPath::from_states(grid, 1, vec![0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
        let f = PathFunctional::terminal_scalar(|x| 2.0 * x);
        assert_eq!(evaluate_functional(&path, &f).unwrap(), 2.0);
    }

    #[test]
    fn integral_functional_uses_left_point_rule() {
        // Deterministic path X_{t_k} = t_k on a 4-step unit grid:
        // h * (0 + 0.25 + 0.5 + 0.75) = 0.375.
        let grid = Grid::uniform(1.0, 4).unwrap();
        let path = GridPath::from_states(grid, 1, vec![0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
        let f = PathFunctional::integral(|v| v, |x: &[f64]| x[0], GRegularity::Holder(1.0));
        assert_eq!(evaluate_functional(&path, &f).unwrap(), 0.375);
    }

    #[test]
    fn grid_path_functional_sees_all_states() {
        let grid = Grid::uniform(1.0, 2).unwrap();
        let path = GridPath::from_states(grid, 1, vec![1.0, -3.0, 2.0]).unwrap();
        let f = PathFunctional::grid_path(|flat, _dim| {
            flat.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        });
        assert_eq!(evaluate_functional(&path, &f).unwrap(), 2.0);
    }

    #[test]
    fn non_finite_payoff_is_an_invalid_sample() {
        let grid = Grid::uniform(1.0, 1).unwrap();
        let path = GridPath::from_states(grid, 1, vec![0.0, 0.0]).unwrap();
        let f = PathFunctional::terminal_scalar(|_| f64::INFINITY);
        assert_eq!(evaluate_functional(&path, &f).unwrap_err(), SampleFailure::NonFinitePayoff);
    }

    #[test]
    fn ou_em_terminal_mean_matches_closed_form() {
        // For b(x) = -x the scheme mean contracts by (1 - h) each step, so
        // E[X^h_T] = x0 (1 - h)^{T/h} exactly.
        let drift = DriftSpec::scalar("ou", GrowthClass::Linear, |x| -x).with_holder_alpha(1.0);
        let problem = SdeProblem::scalar_plain(1.0, 1.0, drift, 1.0).unwrap();
        let grid = Grid::uniform(1.0, 64).unwrap();
        let n_paths = 200_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut stream = RngStream::new(31337, 0);
        for _ in 0..n_paths {
            let x = simulate_em_path(&mut stream, &problem, &grid).unwrap().terminal()[0];
            sum += x;
            sum_sq += x * x;
        }
        let mean = sum / n_paths as f64;
        let var = sum_sq / n_paths as f64 - mean * mean;
        let stderr = (var / n_paths as f64).sqrt();
        let closed_form = (1.0 - grid.step()).powi(64);
        assert!(
            (mean - closed_form).abs() <= 3.0 * stderr,
            "mean {mean} vs closed form {closed_form} (stderr {stderr})"
        );
    }

    #[test]
    fn path_csv_has_fixed_header_and_rows() {
        let grid = Grid::uniform(1.0, 2).unwrap();
        let path = GridPath::from_states(grid, 1, vec![0.0, 0.5, 1.0]).unwrap();
        let csv = path.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,x1");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1], "0,0");
        assert_eq!(lines[2], "0.5,0.5");
    }
}
