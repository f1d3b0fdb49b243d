//! Browser demo bindings: three JSON-in/JSON-out operations for a static
//! page.
//!
//! Every function takes a JSON request string and returns a JSON response
//! string, so the same code runs under wasm-bindgen in the browser and as a
//! plain library in host tests. Errors come back as `{"error": "..."}`
//! rather than exceptions. Request sizes are capped to keep the browser's
//! main thread responsive.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::wasm_bindgen;

use emweak::builtins::{problem, BuiltinParams};
use emweak::em::{simulate_em_path, Grid};
use emweak::experiment::{run_experiment, ExperimentConfig, PipelineKind};
use emweak::killed::discrete_exit_time;
use emweak::model::ProblemKind;
use emweak::reflected::simulate_reflected_em_path;
use emweak::sampling::RngStream;
use emweak::stats::folded_normal_unit_mean;

fn error_json(message: impl std::fmt::Display) -> String {
    serde_json::json!({ "error": message.to_string() }).to_string()
}

fn respond<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).unwrap_or_else(|e| error_json(e))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PathsRequest {
    builtin: String,
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default = "default_path_count")]
    paths: u32,
    #[serde(default = "default_step")]
    step: f64,
}

fn default_seed() -> u64 {
    1
}
fn default_path_count() -> u32 {
    8
}
fn default_step() -> f64 {
    0.015625
}

#[derive(Serialize)]
struct PathsResponse {
    kind: String,
    times: Vec<f64>,
    /// One trajectory per requested path. Killed paths stop at their exit
    /// step, so rows may be shorter than `times`.
    paths: Vec<Vec<f64>>,
}

fn simulate_paths_impl(request: &str) -> Result<PathsResponse, String> {
    let req: PathsRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    if req.paths == 0 || req.paths > 64 {
        return Err("paths must lie in [1, 64] for plotting".into());
    }
    let prob = problem(&req.builtin, &BuiltinParams::default()).map_err(|e| e.to_string())?;
    if prob.dim() != 1 {
        return Err("the path explorer draws one-dimensional problems only".into());
    }
    let grid = Grid::from_step(prob.horizon, req.step).map_err(|e| e.to_string())?;
    let times: Vec<f64> = (0..=grid.n_steps()).map(|k| grid.time(k)).collect();
    let mut paths = Vec::with_capacity(req.paths as usize);
    for i in 0..req.paths {
        let mut stream = RngStream::new(req.seed, u64::from(i));
        let states: Vec<f64> = match &prob.kind {
            ProblemKind::Reflected => {
                let path = simulate_reflected_em_path(&mut stream, &prob, &grid)
                    .map_err(|f| f.to_string())?;
                path.path.flat_states().to_vec()
            }
            ProblemKind::Plain => {
                let path =
                    simulate_em_path(&mut stream, &prob, &grid).map_err(|f| f.to_string())?;
                path.flat_states().to_vec()
            }
            ProblemKind::Killed(domain) => {
                let path =
                    simulate_em_path(&mut stream, &prob, &grid).map_err(|f| f.to_string())?;
                let mut states = path.flat_states().to_vec();
                if let Some(step) = discrete_exit_time(&path, domain).exit_step {
                    states.truncate(step + 1);
                }
                states
            }
        };
        paths.push(states);
    }
    Ok(PathsResponse { kind: prob.kind.name().into(), times, paths })
}

/// Simulate a handful of scheme trajectories for plotting.
#[wasm_bindgen]
pub fn simulate_paths(request: &str) -> String {
    match simulate_paths_impl(request) {
        Ok(resp) => respond(&resp),
        Err(e) => error_json(e),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HistogramRequest {
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default = "default_histogram_paths")]
    paths: u32,
    #[serde(default = "default_step")]
    step: f64,
    #[serde(default = "default_bins")]
    bins: u32,
}

fn default_histogram_paths() -> u32 {
    20_000
}
fn default_bins() -> u32 {
    40
}

#[derive(Serialize)]
struct HistogramResponse {
    /// Bin edges over [0, 3], `bins + 1` entries.
    edges: Vec<f64>,
    /// Empirical density per bin (integrates to at most 1).
    density: Vec<f64>,
    /// Folded-normal density at the bin centers.
    reference_density: Vec<f64>,
    mean: f64,
    reference_mean: f64,
}

fn reflected_histogram_impl(request: &str) -> Result<HistogramResponse, String> {
    let req: HistogramRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    if req.paths == 0 || req.paths > 200_000 {
        return Err("paths must lie in [1, 200000]".into());
    }
    if req.bins < 2 || req.bins > 200 {
        return Err("bins must lie in [2, 200]".into());
    }
    let prob = problem("reflected_bm", &BuiltinParams::default()).map_err(|e| e.to_string())?;
    let grid = Grid::from_step(prob.horizon, req.step).map_err(|e| e.to_string())?;
    let mut stream = RngStream::new(req.seed, 0);
    let hi = 3.0;
    let bins = req.bins as usize;
    let width = hi / bins as f64;
    let mut counts = vec![0u64; bins];
    let mut sum = 0.0;
    for _ in 0..req.paths {
        let x = simulate_reflected_em_path(&mut stream, &prob, &grid)
            .map_err(|f| f.to_string())?
            .terminal_position();
        sum += x;
        let bin = (x / width) as usize;
        if bin < bins {
            counts[bin] += 1;
        }
    }
    let n = f64::from(req.paths);
    let edges: Vec<f64> = (0..=bins).map(|i| i as f64 * width).collect();
    let density: Vec<f64> = counts.iter().map(|&c| c as f64 / (n * width)).collect();
    // |N(0,1)| density: 2 phi(x) for x >= 0.
    let reference_density: Vec<f64> = (0..bins)
        .map(|i| {
            let x = (i as f64 + 0.5) * width;
            (2.0 / (2.0 * std::f64::consts::PI).sqrt()) * (-0.5 * x * x).exp()
        })
        .collect();
    Ok(HistogramResponse {
        edges,
        density,
        reference_density,
        mean: sum / n,
        reference_mean: folded_normal_unit_mean(),
    })
}

/// Histogram of the reflected scheme's terminal values against the folded
/// normal density.
#[wasm_bindgen]
pub fn reflected_histogram(request: &str) -> String {
    match reflected_histogram_impl(request) {
        Ok(resp) => respond(&resp),
        Err(e) => error_json(e),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LadderRequest {
    builtin: String,
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default = "default_ladder_paths")]
    paths: u64,
    #[serde(default = "default_k_min")]
    k_min: u32,
    #[serde(default = "default_k_max")]
    k_max: u32,
    #[serde(default = "default_k_ref")]
    k_ref: u32,
    #[serde(default)]
    payoff: Option<String>,
}

fn default_ladder_paths() -> u64 {
    20_000
}
fn default_k_min() -> u32 {
    2
}
fn default_k_max() -> u32 {
    5
}
fn default_k_ref() -> u32 {
    9
}

fn weak_order_ladder_impl(request: &str) -> Result<String, String> {
    let req: LadderRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    if req.paths > 200_000 {
        return Err("paths must not exceed 200000 in the browser demo".into());
    }
    if req.k_max > 12 || req.k_ref > 14 {
        return Err("grid exponents are capped at 2^-12 (ladder) and 2^-14 (reference)".into());
    }
    let mut config = ExperimentConfig::new(PipelineKind::WeakOrder, &req.builtin);
    config.seed = req.seed;
    config.paths = req.paths;
    config.batches = 32;
    config.ladder.k_range = Some([req.k_min, req.k_max]);
    config.ladder.k_ref = Some(req.k_ref);
    if let Some(p) = &req.payoff {
        config.functional.payoff = p.clone();
    }
    let output = run_experiment(&config).map_err(|e| e.to_string())?;
    output.report.to_json().map_err(|e| e.to_string())
}

/// Run a small weak-order ladder and return the full experiment report.
#[wasm_bindgen]
pub fn weak_order_ladder(request: &str) -> String {
    match weak_order_ladder_impl(request) {
        Ok(json) => json,
        Err(e) => error_json(e),
    }
}
