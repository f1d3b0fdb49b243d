//! Batch Monte Carlo engine, weak-error ladders, and rate fitting.
//!
//! Estimation is organized in batches: batch `b` draws every path from stream
//! index `b` of the master seed, accumulates Kahan-compensated sufficient
//! statistics, and the per-batch statistics are merged in batch order. The
//! result is a pure function of `(master seed, n_paths, n_batches)` — worker
//! count and scheduling cannot change it, and regrouping merges moves the
//! estimate by no more than floating-point reassociation (~1e-15 relative).

use crate::em::{evaluate_functional, simulate_em_path, Grid};
use crate::error::{Error, Result, SampleFailure};
use crate::model::{PathFunctional, ProblemKind, RatePrediction, SdeProblem};
use crate::reflected::simulate_reflected_em_path;
use crate::sampling::{derive_seed, RngStream};
use crate::stats::log_log_fit;
use serde::Serialize;

/// Minimum run size: below this a standard error is not worth reporting.
pub const MIN_PATHS: u64 = 100;
/// Estimates whose invalid-sample fraction exceeds this are marked failed.
pub const MAX_INVALID_FRACTION: f64 = 1e-4;

/// Engine settings shared by every estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McSettings {
    pub n_paths: u64,
    pub n_batches: u32,
    pub master_seed: u64,
    /// Worker threads; batches are still merged in batch order, so the result
    /// is identical for any worker count.
    pub workers: usize,
}

impl McSettings {
    pub fn new(n_paths: u64, master_seed: u64) -> Self {
        McSettings { n_paths, n_batches: 64, master_seed, workers: 1 }
    }

    pub fn with_batches(mut self, n_batches: u32) -> Self {
        self.n_batches = n_batches;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn with_seed(mut self, master_seed: u64) -> Self {
        self.master_seed = master_seed;
        self
    }

    /// Same settings under a role-derived seed.
    pub fn derived(&self, tag: &str) -> Self {
        self.with_seed(derive_seed(self.master_seed, tag))
    }
}

/// Mergeable sufficient statistics of one batch (or any union of batches).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct BatchStats {
    pub sum: f64,
    pub sum_sq: f64,
    pub count: u64,
    pub invalid: u64,
}

impl BatchStats {
    /// Merge two disjoint sample groups. Commutative and associative up to
    /// floating-point reassociation.
    pub fn merge(self, other: BatchStats) -> BatchStats {
        BatchStats {
            sum: self.sum + other.sum,
            sum_sq: self.sum_sq + other.sum_sq,
            count: self.count + other.count,
            invalid: self.invalid + other.invalid,
        }
    }
}

/// A finished Monte Carlo estimate.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct McEstimate {
    /// Sample mean over valid paths.
    pub mean: f64,
    /// Sample standard deviation / sqrt(n_valid).
    pub stderr: f64,
    /// Number of valid paths.
    pub n_valid: u64,
    /// Number of invalid (discarded) paths.
    pub n_invalid: u64,
    /// True when the invalid fraction exceeded [`MAX_INVALID_FRACTION`].
    pub failed: bool,
}

impl McEstimate {
    /// Finalize merged statistics into an estimate.
    pub fn from_stats(stats: BatchStats) -> Self {
        let n = stats.count;
        let nf = n as f64;
        let mean = stats.sum / nf;
        let var = if n > 1 {
            ((stats.sum_sq - stats.sum * stats.sum / nf) / (nf - 1.0)).max(0.0)
        } else {
            0.0
        };
        let stderr = (var / nf).sqrt();
        let attempted = stats.count + stats.invalid;
        let invalid_fraction = if attempted == 0 { 0.0 } else { stats.invalid as f64 / attempted as f64 };
        McEstimate {
            mean,
            stderr,
            n_valid: n,
            n_invalid: stats.invalid,
            failed: invalid_fraction > MAX_INVALID_FRACTION,
        }
    }
}

pub(crate) fn batch_sizes(n_paths: u64, n_batches: u32) -> Vec<u64> {
    let nb = u64::from(n_batches);
    let base = n_paths / nb;
    let extra = n_paths % nb;
    (0..nb).map(|b| base + u64::from(b < extra)).collect()
}

fn run_batch<F>(sampler: &F, batch: u32, size: u64, master_seed: u64) -> Result<BatchStats>
where
    F: Fn(&mut RngStream) -> std::result::Result<f64, SampleFailure> + Sync + ?Sized,
{
    let mut stream = RngStream::new(master_seed, u64::from(batch));
    let mut sum = 0.0f64;
    let mut c_sum = 0.0f64;
    let mut sum_sq = 0.0f64;
    let mut c_sq = 0.0f64;
    let mut count = 0u64;
    let mut invalid = 0u64;
    let mut first_failure: Option<SampleFailure> = None;
    for _ in 0..size {
        match sampler(&mut stream) {
            Ok(v) => {
                // Kahan-compensated accumulation of sum and sum of squares.
                let y = v - c_sum;
                let t = sum + y;
                c_sum = (t - sum) - y;
                sum = t;
                let y2 = v * v - c_sq;
                let t2 = sum_sq + y2;
                c_sq = (t2 - sum_sq) - y2;
                sum_sq = t2;
                count += 1;
            }
            Err(f) => {
                invalid += 1;
                first_failure.get_or_insert(f);
            }
        }
    }
    if count == 0 && size > 0 {
        return Err(Error::AllInvalidBatch {
            batch,
            size,
            first: first_failure.unwrap_or(SampleFailure::NonFinitePayoff),
        });
    }
    Ok(BatchStats { sum, sum_sq, count, invalid })
}

/// Run a batched Monte Carlo estimation of `E[sampler]`.
///
/// `sampler` produces one payoff per call, drawing only from the provided
/// stream; batch `b` uses stream index `b`. Fails hard when an entire batch
/// is invalid; otherwise invalid paths are counted and the estimate is marked
/// failed if their fraction exceeds 1e-4.
pub fn run_mc<F>(sampler: &F, settings: &McSettings) -> Result<McEstimate>
where
    F: Fn(&mut RngStream) -> std::result::Result<f64, SampleFailure> + Sync + ?Sized,
{
    if settings.n_paths < MIN_PATHS {
        return Err(Error::TooFewPaths { got: settings.n_paths, min: MIN_PATHS });
    }
    if settings.n_batches == 0 {
        return Err(Error::InvalidInput("need at least one batch".into()));
    }
    if u64::from(settings.n_batches) > settings.n_paths {
        return Err(Error::InvalidInput(format!(
            "more batches ({}) than paths ({})",
            settings.n_batches, settings.n_paths
        )));
    }
    let sizes = batch_sizes(settings.n_paths, settings.n_batches);
    let seed = settings.master_seed;
    let workers = settings.workers.max(1).min(sizes.len());

    let results: Vec<Result<BatchStats>> = if workers <= 1 {
        sizes
            .iter()
            .enumerate()
            .map(|(b, &size)| run_batch(sampler, b as u32, size, seed))
            .collect()
    } else {
        // Slot results by batch index so scheduling cannot reorder anything.
        let mut slots: Vec<Option<Result<BatchStats>>> = Vec::new();
        slots.resize_with(sizes.len(), || None);
        let slots_ref = &mut slots;
        std::thread::scope(|scope| {
            let chunk = sizes.len().div_ceil(workers);
            let mut handles = Vec::new();
            for (w, slot_chunk) in slots_ref.chunks_mut(chunk).enumerate() {
                let sizes = &sizes;
                handles.push(scope.spawn(move || {
                    for (i, slot) in slot_chunk.iter_mut().enumerate() {
                        let b = w * chunk + i;
                        *slot = Some(run_batch(sampler, b as u32, sizes[b], seed));
                    }
                }));
            }
            for h in handles {
                h.join().expect("worker thread panicked");
            }
        });
        slots.into_iter().map(|s| s.expect("all slots filled")).collect()
    };

    let mut merged = BatchStats::default();
    for r in results {
        merged = merged.merge(r?);
    }
    Ok(McEstimate::from_stats(merged))
}

/// One row of a weak-error ladder.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LadderPoint {
    pub h: f64,
    /// Signed error estimate (reference minus estimate at h, or the coupled
    /// estimator's direct value).
    pub error: f64,
    /// Standard error of `error` (quadrature-combined where two runs enter).
    pub stderr: f64,
    /// Reference value the errors are measured against (NaN when the
    /// estimator targets the error directly).
    pub reference: f64,
}

/// Ladder of weak errors against a fine-grid reference.
#[derive(Debug, Clone)]
pub struct LadderResult {
    pub points: Vec<LadderPoint>,
    pub reference: McEstimate,
    /// The per-h estimates behind the ladder, in ladder order.
    pub estimates: Vec<McEstimate>,
}

fn path_sampler<'a>(
    problem: &'a SdeProblem,
    functional: &'a PathFunctional,
    grid: Grid,
) -> Result<Box<dyn Fn(&mut RngStream) -> std::result::Result<f64, SampleFailure> + Sync + 'a>> {
    match problem.kind {
        ProblemKind::Plain => Ok(Box::new(move |stream: &mut RngStream| {
            let path = simulate_em_path(stream, problem, &grid)?;
            evaluate_functional(&path, functional)
        })),
        ProblemKind::Reflected => Ok(Box::new(move |stream: &mut RngStream| {
            let path = simulate_reflected_em_path(stream, problem, &grid)?;
            evaluate_functional(&path.path, functional)
        })),
        ProblemKind::Killed(_) => Err(Error::InvalidInput(
            "weak_error_vs_reference covers plain and reflected problems; killed problems use \
             the killed-bias pipeline with its closed-form reference"
                .into(),
        )),
    }
}

/// Measure weak errors over a ladder of step sizes against a fine-grid
/// reference run.
///
/// Requirements: ladder steps strictly decreasing, each of the form `T/n`,
/// and `h_ref <= min(ladder)/8`. Every run (each ladder point and the
/// reference) uses an independently derived seed; `error(h)` is
/// `reference_mean - estimate(h)` with standard errors combined in
/// quadrature.
pub fn weak_error_vs_reference(
    problem: &SdeProblem,
    functional: &PathFunctional,
    h_ladder: &[f64],
    h_ref: f64,
    settings: &McSettings,
) -> Result<LadderResult> {
    if h_ladder.is_empty() {
        return Err(Error::InvalidInput("ladder must not be empty".into()));
    }
    if h_ladder.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::InvalidInput("ladder steps must be strictly decreasing".into()));
    }
    let horizon = problem.horizon;
    let grids: Vec<Grid> = h_ladder
        .iter()
        .map(|&h| Grid::from_step(horizon, h))
        .collect::<Result<_>>()?;
    let h_min = *h_ladder.last().expect("non-empty ladder");
    if h_ref > h_min / 8.0 {
        return Err(Error::ReferenceTooCoarse { h_ref, h_min });
    }
    let ref_grid = Grid::from_step(horizon, h_ref)?;

    let ref_sampler = path_sampler(problem, functional, ref_grid)?;
    let reference = run_mc(ref_sampler.as_ref(), &settings.derived("reference"))?;

    let mut points = Vec::with_capacity(grids.len());
    let mut estimates = Vec::with_capacity(grids.len());
    for (i, grid) in grids.iter().enumerate() {
        let sampler = path_sampler(problem, functional, *grid)?;
        let est = run_mc(sampler.as_ref(), &settings.derived(&format!("ladder{i}")))?;
        points.push(LadderPoint {
            h: grid.step(),
            error: reference.mean - est.mean,
            stderr: (reference.stderr * reference.stderr + est.stderr * est.stderr).sqrt(),
            reference: reference.mean,
        });
        estimates.push(est);
    }
    Ok(LadderResult { points, reference, estimates })
}

/// Fitted weak-convergence report.
#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub points: Vec<LadderPoint>,
    /// Fitted slope of log|error| against log h, when a fit was possible.
    pub slope: Option<f64>,
    /// Fitted intercept (log of the error constant).
    pub intercept: Option<f64>,
    /// RMS residual of the fit.
    pub residual_rms: Option<f64>,
    /// Points with |error| > 3 stderr that entered the fit.
    pub usable: usize,
    /// Points excluded as indistinguishable from zero.
    pub excluded: usize,
    /// True when more than half the ladder drowned in noise; no slope then.
    pub below_noise_floor: bool,
    /// Predicted behaviour, attached by callers that know the problem.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted: Option<RatePrediction>,
}

/// Fit an empirical convergence order to a ladder.
///
/// Points with `|error| <= 3 stderr` are excluded as statistically
/// indistinguishable from zero. If more than half the ladder is excluded the
/// report says "below noise floor" instead of fitting; fewer than two usable
/// points is a hard error.
pub fn fit_rate(points: &[LadderPoint]) -> Result<RateReport> {
    if points.is_empty() {
        return Err(Error::InvalidInput("cannot fit an empty ladder".into()));
    }
    if points.windows(2).any(|w| w[0].h <= w[1].h) {
        return Err(Error::InvalidInput("ladder points must have strictly decreasing h".into()));
    }
    let usable_points: Vec<&LadderPoint> = points
        .iter()
        .filter(|p| p.error.is_finite() && p.error != 0.0 && p.error.abs() > 3.0 * p.stderr)
        .collect();
    let usable = usable_points.len();
    let excluded = points.len() - usable;
    if 2 * excluded > points.len() {
        return Ok(RateReport {
            points: points.to_vec(),
            slope: None,
            intercept: None,
            residual_rms: None,
            usable,
            excluded,
            below_noise_floor: true,
            predicted: None,
        });
    }
    if usable < 2 {
        return Err(Error::DegenerateLadder { usable });
    }
    let hs: Vec<f64> = usable_points.iter().map(|p| p.h).collect();
    let errs: Vec<f64> = usable_points.iter().map(|p| p.error.abs()).collect();
    let (slope, intercept, residual) = log_log_fit(&hs, &errs);
    Ok(RateReport {
        points: points.to_vec(),
        slope: Some(slope),
        intercept: Some(intercept),
        residual_rms: Some(residual),
        usable,
        excluded,
        below_noise_floor: false,
        predicted: None,
    })
}
