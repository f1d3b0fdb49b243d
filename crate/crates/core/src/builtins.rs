//! Catalogue of ready-made test problems and payoff functions.
//!
//! Each builtin fixes a drift with honest regularity declarations plus
//! sensible defaults for the start, horizon and diffusion; [`BuiltinParams`]
//! overrides the defaults. The catalogue spans the regimes the estimators
//! care about: smooth, piecewise-constant and fractional-exponent drifts,
//! linear growth (where weighted estimators lose their moment bounds),
//! reflection at the origin, and killing on an interval.

use crate::error::{Error, Result};
use crate::killed::BoundedPayoff;
use crate::model::{ConstantDiffusion, DomainSpec, DriftSpec, GrowthClass, SdeProblem};

/// Optional overrides applied on top of a builtin's defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BuiltinParams {
    /// Holder exponent of `holder_drift`.
    pub alpha: Option<f64>,
    /// Level of `constant_drift`.
    pub constant: Option<f64>,
    pub x0: Option<f64>,
    pub horizon: Option<f64>,
    pub sigma: Option<f64>,
    /// Killing interval of the killed builtins.
    pub interval: Option<(f64, f64)>,
}

/// Names accepted by [`problem`], in catalogue order.
pub const BUILTIN_NAMES: [&str; 11] = [
    "zero_drift",
    "constant_drift",
    "ou_drift",
    "linear_drift",
    "sign_drift",
    "step_drift",
    "holder_drift",
    "reflected_bm",
    "reflected_pull",
    "killed_bm_interval",
    "killed_sign_interval",
];

/// One-line description per builtin, aligned with [`BUILTIN_NAMES`].
pub fn catalogue() -> Vec<(&'static str, &'static str)> {
    vec![
        ("zero_drift", "b = 0; exact scheme, every weak error is pure noise"),
        ("constant_drift", "b = c (default 0.3); exact scheme for terminal payoffs"),
        ("ou_drift", "b = -x from x0 = 1; linear growth, classical smooth benchmark"),
        ("linear_drift", "b = +x; linear growth with divergent squared weight moments"),
        ("sign_drift", "b = -sign(x); bounded, purely irregular (bang-bang pull to 0)"),
        ("step_drift", "b = indicator of (0, 1); bounded, purely irregular"),
        ("holder_drift", "b = -sign(x) min(|x|, 2)^alpha (default alpha 0.5); fractional exponent"),
        ("reflected_bm", "zero drift reflected at 0; terminal law is exactly folded normal"),
        ("reflected_pull", "b = -clamp(x, 0, 2) reflected at 0 from x0 = 0.5; Lipschitz drift"),
        ("killed_bm_interval", "driftless motion killed on (-1, 1); survival has a closed form"),
        ("killed_sign_interval", "b = -sign(x) killed on (-1, 1); payoff supported away from the boundary"),
    ]
}

fn scalar_problem(
    x0: f64,
    horizon: f64,
    sigma: f64,
    drift: DriftSpec,
) -> Result<SdeProblem> {
    SdeProblem::scalar_plain(x0, horizon, drift, sigma)
}

/// Construct a catalogue problem, applying any overrides.
///
/// Overrides that a builtin does not use (for example `alpha` on
/// `zero_drift`) are ignored.
pub fn problem(name: &str, params: &BuiltinParams) -> Result<SdeProblem> {
    let x0 = params.x0;
    let horizon = params.horizon.unwrap_or(1.0);
    let sigma = params.sigma.unwrap_or(1.0);
    let (lo, hi) = params.interval.unwrap_or((-1.0, 1.0));
    match name {
        "zero_drift" => scalar_problem(
            x0.unwrap_or(0.0),
            horizon,
            sigma,
            DriftSpec::scalar("zero_drift", GrowthClass::Bounded, |_| 0.0).with_holder_alpha(1.0),
        ),
        "constant_drift" => {
            let c = params.constant.unwrap_or(0.3);
            scalar_problem(
                x0.unwrap_or(0.0),
                horizon,
                sigma,
                DriftSpec::scalar("constant_drift", GrowthClass::Bounded, move |_| c)
                    .with_holder_alpha(1.0),
            )
        }
        "ou_drift" => scalar_problem(
            x0.unwrap_or(1.0),
            horizon,
            sigma,
            DriftSpec::scalar("ou_drift", GrowthClass::Linear, |x| -x).with_holder_alpha(1.0),
        ),
        "linear_drift" => scalar_problem(
            x0.unwrap_or(0.0),
            horizon,
            sigma,
            DriftSpec::scalar("linear_drift", GrowthClass::Linear, |x| x).with_holder_alpha(1.0),
        ),
        "sign_drift" => scalar_problem(
            x0.unwrap_or(0.0),
            horizon,
            sigma,
            DriftSpec::scalar("sign_drift", GrowthClass::Bounded, |x| {
                if x == 0.0 {
                    0.0
                } else {
                    -x.signum()
                }
            })
            .with_class_a_all(),
        ),
        "step_drift" => scalar_problem(
            x0.unwrap_or(0.0),
            horizon,
            sigma,
            DriftSpec::scalar("step_drift", GrowthClass::Bounded, |x| {
                if x > 0.0 && x < 1.0 {
                    1.0
                } else {
                    0.0
                }
            })
            .with_class_a_all(),
        ),
        "holder_drift" => {
            let alpha = params.alpha.unwrap_or(0.5);
            scalar_problem(
                x0.unwrap_or(0.0),
                horizon,
                sigma,
                DriftSpec::scalar("holder_drift", GrowthClass::Bounded, move |x| {
                    if x == 0.0 {
                        0.0
                    } else {
                        -x.signum() * x.abs().min(2.0).powf(alpha)
                    }
                })
                .with_holder_alpha(alpha),
            )
        }
        "reflected_bm" => SdeProblem::scalar_reflected(
            x0.unwrap_or(0.0),
            horizon,
            DriftSpec::scalar("reflected_bm", GrowthClass::Bounded, |_| 0.0)
                .with_holder_alpha(1.0),
            sigma,
        ),
        "reflected_pull" => SdeProblem::scalar_reflected(
            x0.unwrap_or(0.5),
            horizon,
            DriftSpec::scalar("reflected_pull", GrowthClass::Bounded, |x| -x.clamp(0.0, 2.0))
                .with_holder_alpha(1.0),
            sigma,
        ),
        "killed_bm_interval" => Ok(SdeProblem::killed(
            vec![x0.unwrap_or(0.0)],
            horizon,
            DriftSpec::scalar("killed_bm_interval", GrowthClass::Bounded, |_| 0.0)
                .with_holder_alpha(1.0),
            ConstantDiffusion::scalar(sigma)?,
            DomainSpec::interval(lo, hi).with_holder_p(2.0),
        )),
        "killed_sign_interval" => Ok(SdeProblem::killed(
            vec![x0.unwrap_or(0.0)],
            horizon,
            DriftSpec::scalar("killed_sign_interval", GrowthClass::Bounded, |x| {
                if x == 0.0 {
                    0.0
                } else {
                    -x.signum()
                }
            })
            .with_class_a_all(),
            ConstantDiffusion::scalar(sigma)?,
            DomainSpec::interval(lo, hi).with_holder_p(2.0).with_support_gap(0.5),
        )),
        other => Err(Error::UnknownBuiltin(format!(
            "`{other}` is not a catalogue problem; known names: {}",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}

/// Default terminal payoff of the killed builtins.
pub fn killed_default_payoff(name: &str) -> Result<BoundedPayoff> {
    match name {
        "killed_bm_interval" => Ok(BoundedPayoff::one()),
        "killed_sign_interval" => {
            BoundedPayoff::new(|x: &[f64]| if x[0].abs() <= 0.5 { 1.0 } else { 0.0 }, 1.0)
        }
        other => Err(Error::UnknownBuiltin(format!(
            "`{other}` has no killed payoff; killed builtins: killed_bm_interval, killed_sign_interval"
        ))),
    }
}

/// Named scalar functions for payoffs and integrands.
pub fn scalar_function(name: &str) -> Result<fn(f64) -> f64> {
    match name {
        "identity" => Ok(|x| x),
        "tanh" => Ok(f64::tanh),
        "sin" => Ok(f64::sin),
        "one" => Ok(|_| 1.0),
        "indicator_center" => Ok(|x| if x.abs() <= 0.5 { 1.0 } else { 0.0 }),
        other => Err(Error::UnknownFunction(format!(
            "`{other}` is not a named function; known names: identity, tanh, sin, one, indicator_center"
        ))),
    }
}
