//! Problem descriptions and static analysis.
//!
//! An [`SdeProblem`] bundles the initial state, horizon, a [`DriftSpec`] with
//! *declared* regularity, and a [`ConstantDiffusion`] matrix, plus the problem
//! kind (plain, reflected on the half-line, or killed on a domain). Regularity
//! declarations are inputs, not something the library tries to infer: the
//! drift is described as a sum of a Holder-continuous part (exponent `alpha`)
//! and an "irregular" part per coordinate — bounded, measurable functions such
//! as signs, indicators and monotone maps whose one-dimensional sections are of
//! locally bounded variation. [`predicted_weak_order`] turns the declarations
//! into the weak-convergence exponent the Euler-Maruyama scheme is expected to
//! exhibit, and [`validate_problem`] reports everything that is inconsistent.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar-valued function of the (vector) state.
pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Real function of one variable.
pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// Vector field evaluated into a caller-provided buffer.
pub type VectorFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// Function of a whole grid path, passed as `(flat_states, dim)` where
/// `flat_states` stores `n_steps + 1` states of length `dim` back to back.
pub type FlatPathFn = Arc<dyn Fn(&[f64], usize) -> f64 + Send + Sync>;

/// Growth class of the drift, ordered from most to least restrictive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthClass {
    /// sup |b| < infinity.
    Bounded,
    /// |b(x)| <= K (1 + |x|^gamma) for some gamma < 1.
    SubLinear,
    /// |b(x)| <= K (1 + |x|).
    Linear,
    /// Anything faster; rejected by validation (the scheme may not converge).
    SuperLinear,
}

impl fmt::Display for GrowthClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GrowthClass::Bounded => "bounded",
            GrowthClass::SubLinear => "sub_linear",
            GrowthClass::Linear => "linear",
            GrowthClass::SuperLinear => "super_linear",
        };
        f.write_str(s)
    }
}

/// Drift coefficient together with its declared regularity.
#[derive(Clone)]
pub struct DriftSpec {
    /// Human-readable name used in reports and diagnostics.
    pub name: String,
    /// State dimension the evaluator expects.
    pub dim: usize,
    /// Holder exponent of the regular part, in (0, 1], if declared.
    pub holder_alpha: Option<f64>,
    /// Per-coordinate flags: `true` marks a coordinate whose drift component
    /// carries an irregular (sign/indicator/monotone-type) part.
    pub class_a: Vec<bool>,
    /// Declared growth class.
    pub growth: GrowthClass,
    eval: VectorFn,
}

impl DriftSpec {
    /// General constructor. Regularity defaults to "nothing declared"; attach
    /// declarations with [`with_holder_alpha`](Self::with_holder_alpha) and
    /// [`with_class_a`](Self::with_class_a). Semantic checks happen in
    /// [`validate_problem`], not here, so invalid declarations can be built
    /// and reported.
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        growth: GrowthClass,
        eval: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        DriftSpec {
            name: name.into(),
            dim,
            holder_alpha: None,
            class_a: vec![false; dim],
            growth,
            eval: Arc::new(eval),
        }
    }

    /// One-dimensional convenience constructor.
    pub fn scalar(
        name: impl Into<String>,
        growth: GrowthClass,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::new(name, 1, growth, move |x, out| out[0] = f(x[0]))
    }

    /// Declare the Holder exponent of the regular part.
    pub fn with_holder_alpha(mut self, alpha: f64) -> Self {
        self.holder_alpha = Some(alpha);
        self
    }

    /// Declare which coordinates carry an irregular part.
    pub fn with_class_a(mut self, flags: Vec<bool>) -> Self {
        self.class_a = flags;
        self
    }

    /// Declare an irregular part in every coordinate.
    pub fn with_class_a_all(mut self) -> Self {
        self.class_a = vec![true; self.dim];
        self
    }

    /// Evaluate the drift into `out` (must have length `dim`).
    #[inline]
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        (self.eval)(x, out);
    }

    /// Evaluate a one-dimensional drift.
    #[inline]
    pub fn eval1(&self, x: f64) -> f64 {
        debug_assert_eq!(self.dim, 1);
        let mut out = [0.0];
        (self.eval)(&[x], &mut out);
        out[0]
    }

    /// Whether any regularity was declared at all.
    pub fn declares_regularity(&self) -> bool {
        self.holder_alpha.is_some() || self.class_a.iter().any(|&f| f)
    }

    /// Effective Holder exponent for rate predictions: the declared `alpha`,
    /// or 1 when the drift is purely irregular (a vanishing regular part is
    /// Lipschitz).
    pub fn effective_alpha(&self) -> Option<f64> {
        match self.holder_alpha {
            Some(a) => Some(a),
            None if self.class_a.iter().any(|&f| f) => Some(1.0),
            None => None,
        }
    }
}

impl fmt::Debug for DriftSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DriftSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("holder_alpha", &self.holder_alpha)
            .field("class_a", &self.class_a)
            .field("growth", &self.growth)
            .finish_non_exhaustive()
    }
}

/// Constant (state-independent) diffusion matrix with a checked inverse.
///
/// Stored row-major. Construction inverts the matrix by Gauss-Jordan
/// elimination with partial pivoting and verifies the residual
/// `||sigma * inv - I||_inf < 1e-10`.
#[derive(Debug, Clone)]
pub struct ConstantDiffusion {
    dim: usize,
    sigma: Vec<f64>,
    inverse: Vec<f64>,
}

/// Pivot threshold factor for singularity detection.
const PIVOT_RELATIVE_THRESHOLD: f64 = 1e-12;
/// Maximum allowed `||sigma * inv - I||_inf`.
const INVERSE_RESIDUAL_LIMIT: f64 = 1e-10;

impl ConstantDiffusion {
    /// Build from a row-major `dim x dim` matrix, computing and checking the
    /// inverse.
    pub fn new(dim: usize, sigma: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("diffusion dimension must be positive".into()));
        }
        if sigma.len() != dim * dim {
            return Err(Error::InvalidInput(format!(
                "diffusion matrix needs {} entries for dim {}, got {}",
                dim * dim,
                dim,
                sigma.len()
            )));
        }
        if sigma.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("diffusion matrix has non-finite entries".into()));
        }
        let inverse = invert_matrix(dim, &sigma)?;
        let residual = identity_residual(dim, &sigma, &inverse);
        if residual >= INVERSE_RESIDUAL_LIMIT {
            return Err(Error::IllConditionedDiffusion { residual });
        }
        Ok(ConstantDiffusion { dim, sigma, inverse })
    }

    /// Scalar (1x1) diffusion.
    pub fn scalar(sigma: f64) -> Result<Self> {
        Self::new(1, vec![sigma])
    }

    /// Identity diffusion in `dim` dimensions.
    pub fn identity(dim: usize) -> Result<Self> {
        let mut m = vec![0.0; dim * dim];
        for i in 0..dim {
            m[i * dim + i] = 1.0;
        }
        Self::new(dim, m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row-major matrix entries.
    pub fn matrix(&self) -> &[f64] {
        &self.sigma
    }

    /// Row-major inverse entries.
    pub fn inverse_matrix(&self) -> &[f64] {
        &self.inverse
    }

    /// The single entry of a 1x1 diffusion.
    pub fn scalar_value(&self) -> f64 {
        debug_assert_eq!(self.dim, 1);
        self.sigma[0]
    }

    /// `out = sigma * x`.
    #[inline]
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        mat_vec(self.dim, &self.sigma, x, out);
    }

    /// `out = sigma^{-1} * x`.
    #[inline]
    pub fn apply_inverse_into(&self, x: &[f64], out: &mut [f64]) {
        mat_vec(self.dim, &self.inverse, x, out);
    }
}

/// Invert a row-major square matrix, or build the [`ConstantDiffusion`] whose
/// matrix is the given one. This is the standalone entry point mirroring the
/// member constructor; the same pivot and residual rules apply.
pub fn inverse_diffusion(dim: usize, sigma: &[f64]) -> Result<ConstantDiffusion> {
    ConstantDiffusion::new(dim, sigma.to_vec())
}

#[inline]
fn mat_vec(dim: usize, m: &[f64], x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(x.len(), dim);
    debug_assert_eq!(out.len(), dim);
    if dim == 1 {
        out[0] = m[0] * x[0];
        return;
    }
    for i in 0..dim {
        let row = &m[i * dim..(i + 1) * dim];
        let mut acc = 0.0;
        for (a, b) in row.iter().zip(x) {
            acc += a * b;
        }
        out[i] = acc;
    }
}

fn invert_matrix(dim: usize, m: &[f64]) -> Result<Vec<f64>> {
    let max_row_norm = (0..dim)
        .map(|i| m[i * dim..(i + 1) * dim].iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let threshold = PIVOT_RELATIVE_THRESHOLD * max_row_norm;

    // Augmented [A | I], Gauss-Jordan with partial pivoting.
    let mut a = m.to_vec();
    let mut inv = vec![0.0; dim * dim];
    for i in 0..dim {
        inv[i * dim + i] = 1.0;
    }
    for col in 0..dim {
        let mut pivot_row = col;
        let mut pivot_val = a[col * dim + col].abs();
        for r in (col + 1)..dim {
            let v = a[r * dim + col].abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = r;
            }
        }
        if pivot_val <= threshold {
            return Err(Error::SingularDiffusion { pivot: pivot_val, threshold });
        }
        if pivot_row != col {
            for j in 0..dim {
                a.swap(col * dim + j, pivot_row * dim + j);
                inv.swap(col * dim + j, pivot_row * dim + j);
            }
        }
        let p = a[col * dim + col];
        for j in 0..dim {
            a[col * dim + j] /= p;
            inv[col * dim + j] /= p;
        }
        for r in 0..dim {
            if r == col {
                continue;
            }
            let factor = a[r * dim + col];
            if factor == 0.0 {
                continue;
            }
            for j in 0..dim {
                a[r * dim + j] -= factor * a[col * dim + j];
                inv[r * dim + j] -= factor * inv[col * dim + j];
            }
        }
    }
    Ok(inv)
}

fn identity_residual(dim: usize, m: &[f64], inv: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..dim {
        let mut row_sum = 0.0;
        for j in 0..dim {
            let mut acc = 0.0;
            for k in 0..dim {
                acc += m[i * dim + k] * inv[k * dim + j];
            }
            let target = if i == j { 1.0 } else { 0.0 };
            row_sum += (acc - target).abs();
        }
        worst = worst.max(row_sum);
    }
    worst
}

/// Open domain for killed diffusions. Points on the boundary count as exited.
#[derive(Debug, Clone, PartialEq)]
pub enum DomainShape {
    /// Open interval (lo, hi) in one dimension.
    Interval { lo: f64, hi: f64 },
    /// Open axis-aligned box: all coordinates strictly between bounds.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Open Euclidean ball.
    Ball { center: Vec<f64>, radius: f64 },
}

impl DomainShape {
    /// Dimension of the ambient space.
    pub fn dim(&self) -> usize {
        match self {
            DomainShape::Interval { .. } => 1,
            DomainShape::Box { lo, .. } => lo.len(),
            DomainShape::Ball { center, .. } => center.len(),
        }
    }

    /// Strict interior membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            DomainShape::Interval { lo, hi } => x[0] > *lo && x[0] < *hi,
            DomainShape::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(xi, (l, h))| xi > l && xi < h),
            DomainShape::Ball { center, radius } => {
                let mut d2 = 0.0;
                for (xi, ci) in x.iter().zip(center) {
                    d2 += (xi - ci) * (xi - ci);
                }
                d2 < radius * radius
            }
        }
    }
}

/// Domain plus the payoff-side parameters of killed problems.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub shape: DomainShape,
    /// Half of the minimum distance required between the payoff support and
    /// the boundary for the two-term bias prediction to apply; zero disables
    /// the gap (e.g. survival probabilities).
    pub payoff_support_gap: f64,
    /// Boundary-term exponent parameter `p > 1`; the boundary contribution to
    /// the killed bias scales like `h^{1/(2p)}`.
    pub holder_p: f64,
}

impl DomainSpec {
    pub fn interval(lo: f64, hi: f64) -> Self {
        DomainSpec {
            shape: DomainShape::Interval { lo, hi },
            payoff_support_gap: 0.0,
            holder_p: 2.0,
        }
    }

    pub fn with_support_gap(mut self, eps: f64) -> Self {
        self.payoff_support_gap = eps;
        self
    }

    pub fn with_holder_p(mut self, p: f64) -> Self {
        self.holder_p = p;
        self
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.shape.contains(x)
    }
}

/// Problem kind: unconstrained, reflected at zero (half-line), or killed on
/// leaving a domain.
#[derive(Debug, Clone)]
pub enum ProblemKind {
    Plain,
    Reflected,
    Killed(DomainSpec),
}

impl ProblemKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemKind::Plain => "plain",
            ProblemKind::Reflected => "reflected",
            ProblemKind::Killed(_) => "killed",
        }
    }
}

/// A complete SDE problem: dX = b(X) dt + sigma dW, X_0 = x0, on [0, T].
#[derive(Debug, Clone)]
pub struct SdeProblem {
    pub x0: Vec<f64>,
    pub horizon: f64,
    pub drift: DriftSpec,
    pub diffusion: ConstantDiffusion,
    pub kind: ProblemKind,
}

impl SdeProblem {
    /// Plain problem constructor.
    pub fn plain(x0: Vec<f64>, horizon: f64, drift: DriftSpec, diffusion: ConstantDiffusion) -> Self {
        SdeProblem { x0, horizon, drift, diffusion, kind: ProblemKind::Plain }
    }

    /// One-dimensional plain problem.
    pub fn scalar_plain(x0: f64, horizon: f64, drift: DriftSpec, sigma: f64) -> Result<Self> {
        Ok(Self::plain(vec![x0], horizon, drift, ConstantDiffusion::scalar(sigma)?))
    }

    /// One-dimensional problem reflected at the origin.
    pub fn scalar_reflected(x0: f64, horizon: f64, drift: DriftSpec, sigma: f64) -> Result<Self> {
        Ok(SdeProblem {
            x0: vec![x0],
            horizon,
            drift,
            diffusion: ConstantDiffusion::scalar(sigma)?,
            kind: ProblemKind::Reflected,
        })
    }

    /// Killed problem constructor.
    pub fn killed(
        x0: Vec<f64>,
        horizon: f64,
        drift: DriftSpec,
        diffusion: ConstantDiffusion,
        domain: DomainSpec,
    ) -> Self {
        SdeProblem { x0, horizon, drift, diffusion, kind: ProblemKind::Killed(domain) }
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn domain(&self) -> Option<&DomainSpec> {
        match &self.kind {
            ProblemKind::Killed(d) => Some(d),
            _ => None,
        }
    }
}

/// Regularity declaration for the integrand of integral functionals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GRegularity {
    /// Holder exponent beta in (0, 1].
    Holder(f64),
    /// Irregular (sign/indicator/monotone-type) integrand.
    ClassA,
}

impl GRegularity {
    /// Effective exponent used in rate predictions.
    pub fn effective_beta(&self) -> f64 {
        match self {
            GRegularity::Holder(b) => *b,
            GRegularity::ClassA => 1.0,
        }
    }
}

/// Path functional whose expectation under the scheme is estimated.
///
/// Continuous-path functionals are evaluated on the available grid values:
/// terminal functionals read the last state, integral functionals use the
/// left-point rule `h * sum_{k<n} g(X_{t_k})`, and grid-path functionals see
/// the whole discrete path.
#[derive(Clone)]
pub enum PathFunctional {
    /// f(path) = g(X_T).
    Terminal { g: ScalarFn },
    /// f(path) = f( integral_0^T g(X_s) ds ), discretized by the left-point
    /// rule on the grid.
    Integral { f: RealFn, g: ScalarFn, g_regularity: GRegularity },
    /// Arbitrary function of the whole grid path.
    GridPath { f: FlatPathFn },
}

impl PathFunctional {
    /// Terminal functional from a scalar payoff of the full state.
    pub fn terminal(g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        PathFunctional::Terminal { g: Arc::new(g) }
    }

    /// Terminal functional reading only the first coordinate.
    pub fn terminal_scalar(g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::terminal(move |x: &[f64]| g(x[0]))
    }

    /// Integral functional with declared integrand regularity.
    pub fn integral(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        g_regularity: GRegularity,
    ) -> Self {
        PathFunctional::Integral { f: Arc::new(f), g: Arc::new(g), g_regularity }
    }

    /// Whole-grid-path functional.
    pub fn grid_path(f: impl Fn(&[f64], usize) -> f64 + Send + Sync + 'static) -> Self {
        PathFunctional::GridPath { f: Arc::new(f) }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            PathFunctional::Terminal { .. } => "terminal",
            PathFunctional::Integral { .. } => "integral",
            PathFunctional::GridPath { .. } => "grid_path",
        }
    }
}

impl fmt::Debug for PathFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PathFunctional::{}", self.kind_name())
    }
}

/// One validation violation: which field broke which rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

/// Outcome of validation: hard violations plus advisory warnings.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn violate(&mut self, field: &str, rule: impl Into<String>) {
        self.violations.push(Violation { field: field.into(), rule: rule.into() });
    }

    /// Convert into a hard error when violations are present.
    pub fn into_result(self) -> Result<Vec<String>> {
        if self.is_ok() {
            Ok(self.warnings)
        } else {
            let msg = self
                .violations
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("; ");
            Err(Error::Validation(msg))
        }
    }
}

/// Check a problem description for internal consistency.
///
/// Violations are collected, not short-circuited, so a report can name every
/// broken rule at once. Linear drift growth is legal but produces a warning:
/// Girsanov-weighted estimators may then have weights with unbounded moments.
pub fn validate_problem(problem: &SdeProblem) -> ValidationReport {
    let mut report = ValidationReport::default();
    let dim = problem.dim();

    if dim == 0 {
        report.violate("x0", "state dimension must be positive");
    }
    if problem.x0.iter().any(|v| !v.is_finite()) {
        report.violate("x0", "initial state must be finite");
    }
    if !(problem.horizon > 0.0 && problem.horizon.is_finite()) {
        report.violate("horizon", "horizon T must be positive and finite");
    }
    if problem.drift.dim != dim {
        report.violate(
            "drift.dim",
            format!("drift dimension {} does not match state dimension {}", problem.drift.dim, dim),
        );
    }
    if problem.diffusion.dim() != dim {
        report.violate(
            "diffusion.dim",
            format!(
                "diffusion dimension {} does not match state dimension {}",
                problem.diffusion.dim(),
                dim
            ),
        );
    }
    if let Some(alpha) = problem.drift.holder_alpha {
        if !(alpha > 0.0 && alpha <= 1.0) {
            report.violate("drift.holder_alpha", format!("alpha = {alpha} must lie in (0, 1]"));
        }
    }
    if !problem.drift.class_a.is_empty() && problem.drift.class_a.len() != problem.drift.dim {
        report.violate(
            "drift.class_a",
            format!(
                "irregular-part flags have length {}, expected {}",
                problem.drift.class_a.len(),
                problem.drift.dim
            ),
        );
    }
    if !problem.drift.declares_regularity() {
        report.violate(
            "drift",
            "at least one regularity declaration is required (Holder exponent or an irregular-part flag)",
        );
    }
    match problem.drift.growth {
        GrowthClass::SuperLinear => {
            report.violate("drift.growth", "super-linear drift growth is not supported");
        }
        GrowthClass::Linear => {
            report.warnings.push(
                "linear drift growth: Girsanov weight moments may be unbounded; \
                 weighted estimators should be cross-checked with the weight-moment diagnostic"
                    .into(),
            );
        }
        _ => {}
    }

    match &problem.kind {
        ProblemKind::Plain => {}
        ProblemKind::Reflected => {
            if dim != 1 {
                report.violate("kind", "reflected problems are one-dimensional");
            } else {
                if problem.x0[0] < 0.0 {
                    report.violate("x0", "reflected problems start in [0, infinity)");
                }
                if problem.diffusion.scalar_value() <= 0.0 {
                    report.violate("diffusion", "reflected problems require scalar sigma > 0");
                }
            }
        }
        ProblemKind::Killed(domain) => {
            if domain.shape.dim() != dim {
                report.violate(
                    "kind.domain",
                    format!(
                        "domain dimension {} does not match state dimension {}",
                        domain.shape.dim(),
                        dim
                    ),
                );
            } else if !domain.contains(&problem.x0) {
                report.violate("x0", "killed problems must start strictly inside the domain");
            }
            if let DomainShape::Interval { lo, hi } = domain.shape {
                if !(lo < hi) {
                    report.violate("kind.domain", "interval must satisfy lo < hi");
                }
            }
            if let DomainShape::Box { lo, hi } = &domain.shape {
                if lo.iter().zip(hi).any(|(l, h)| !(l < h)) {
                    report.violate("kind.domain", "box must satisfy lo < hi coordinate-wise");
                }
            }
            if let DomainShape::Ball { radius, .. } = domain.shape {
                if !(radius > 0.0) {
                    report.violate("kind.domain", "ball radius must be positive");
                }
            }
            if !(domain.payoff_support_gap >= 0.0) {
                report.violate("kind.domain.payoff_support_gap", "support gap must be >= 0");
            }
            if !(domain.holder_p > 1.0) {
                report.violate("kind.domain.holder_p", "boundary exponent parameter p must exceed 1");
            }
        }
    }

    report
}

/// Check a functional's regularity declaration (currently only the integrand
/// exponent of integral functionals carries a constraint).
pub fn validate_functional(functional: &PathFunctional) -> ValidationReport {
    let mut report = ValidationReport::default();
    if let PathFunctional::Integral { g_regularity: GRegularity::Holder(beta), .. } = functional {
        if !(*beta > 0.0 && *beta <= 1.0) {
            report.violate("functional.beta", format!("beta = {beta} must lie in (0, 1]"));
        }
    }
    report
}

/// Predicted weak-convergence behaviour of the Euler-Maruyama scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RatePrediction {
    /// |E f(X) - E f(X^h)| <= K h^kappa.
    Power { kappa: f64 },
    /// Killed problems: interior term h^interior plus boundary term
    /// h^boundary; the observed slope is governed by the smaller exponent.
    KilledTwoTerm { interior: f64, boundary: f64 },
    /// Convergence holds but no rate is claimed (linear drift growth with a
    /// bounded functional).
    NoRate,
}

impl RatePrediction {
    /// Single summarizing exponent, when one exists.
    pub fn kappa(&self) -> Option<f64> {
        match self {
            RatePrediction::Power { kappa } => Some(*kappa),
            RatePrediction::KilledTwoTerm { interior, boundary } => Some(interior.min(*boundary)),
            RatePrediction::NoRate => None,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            RatePrediction::Power { kappa } => format!("O(h^{kappa})"),
            RatePrediction::KilledTwoTerm { interior, boundary } => {
                format!("O(h^{interior}) + O(h^{boundary})")
            }
            RatePrediction::NoRate => "convergence without a claimed rate".into(),
        }
    }
}

/// Predicted weak order for a validated problem/functional pair.
///
/// * plain, bounded or sub-linear drift, terminal or grid-path functional:
///   `kappa = min(alpha/2, 1/4)`;
/// * plain, integral functional with integrand exponent `beta`:
///   `kappa = min(alpha/2, beta/2, 1/4)`;
/// * reflected: `kappa = alpha/2` (a declared Holder exponent is required);
/// * killed: interior exponent `min(alpha/2, 1/4)` plus boundary exponent
///   `1/(2p)`;
/// * linear drift growth: convergence without a claimed rate.
///
/// A drift that declares only an irregular part counts as `alpha = 1`.
pub fn predicted_weak_order(problem: &SdeProblem, functional: &PathFunctional) -> Result<RatePrediction> {
    let alpha = match problem.drift.effective_alpha() {
        Some(a) => a,
        None => {
            return Err(Error::MissingHolderAlpha(format!(
                "drift '{}' declares no regularity",
                problem.drift.name
            )))
        }
    };
    if let Some(a) = problem.drift.holder_alpha {
        if !(a > 0.0 && a <= 1.0) {
            return Err(Error::Validation(format!("alpha = {a} must lie in (0, 1]")));
        }
    }
    if problem.drift.growth >= GrowthClass::Linear {
        if problem.drift.growth == GrowthClass::SuperLinear {
            return Err(Error::Validation("super-linear drift growth is not supported".into()));
        }
        return Ok(RatePrediction::NoRate);
    }

    match &problem.kind {
        ProblemKind::Plain => match functional {
            PathFunctional::Terminal { .. } | PathFunctional::GridPath { .. } => {
                Ok(RatePrediction::Power { kappa: (alpha / 2.0).min(0.25) })
            }
            PathFunctional::Integral { g_regularity, .. } => {
                if let GRegularity::Holder(beta) = g_regularity {
                    if !(*beta > 0.0 && *beta <= 1.0) {
                        return Err(Error::Validation(format!("beta = {beta} must lie in (0, 1]")));
                    }
                }
                let beta = g_regularity.effective_beta();
                Ok(RatePrediction::Power { kappa: (alpha / 2.0).min(beta / 2.0).min(0.25) })
            }
        },
        ProblemKind::Reflected => {
            if problem.drift.holder_alpha.is_none() {
                return Err(Error::MissingHolderAlpha(format!(
                    "reflected problems need a declared Holder exponent; drift '{}' has none",
                    problem.drift.name
                )));
            }
            Ok(RatePrediction::Power { kappa: alpha / 2.0 })
        }
        ProblemKind::Killed(domain) => Ok(RatePrediction::KilledTwoTerm {
            interior: (alpha / 2.0).min(0.25),
            boundary: 1.0 / (2.0 * domain.holder_p),
        }),
    }
}
