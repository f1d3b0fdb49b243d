//! Small statistical helpers shared across the crate: normal and folded-normal
//! CDFs, a one-sample Kolmogorov-Smirnov test, and log-log least squares used
//! by the rate fitter.

use std::f64::consts::SQRT_2;

/// CDF of the standard normal distribution.
pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// CDF of N(mean, sd^2).
pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    standard_normal_cdf((x - mean) / sd)
}

/// CDF of |Z| where Z ~ N(0, scale^2) (folded normal centered at zero).
pub fn folded_normal_cdf(x: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        libm::erf(x / (scale * SQRT_2))
    }
}

/// Mean of |Z| for Z ~ N(0,1), i.e. sqrt(2/pi).
pub fn folded_normal_unit_mean() -> f64 {
    (2.0 / std::f64::consts::PI).sqrt()
}

/// Result of a one-sample Kolmogorov-Smirnov test.
#[derive(Debug, Clone, Copy)]
pub struct KsTest {
    /// Supremum distance between the empirical CDF and the reference CDF.
    pub statistic: f64,
    /// Asymptotic p-value (Kolmogorov distribution with the usual small-sample
    /// correction to the effective sample size).
    pub p_value: f64,
    /// Sample size.
    pub n: usize,
}

/// One-sample KS test of `samples` against the continuous CDF `cdf`.
///
/// Sorts the sample buffer in place. Panics on an empty sample.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> KsTest {
    assert!(!samples.is_empty(), "KS test needs at least one sample");
    samples.sort_by(|a, b| a.partial_cmp(b).expect("non-finite sample in KS test"));
    let n = samples.len();
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        let upper = (i as f64 + 1.0) / nf - f;
        let lower = f - i as f64 / nf;
        d = d.max(upper).max(lower);
    }
    let sqrt_n = nf.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    KsTest {
        statistic: d,
        p_value: kolmogorov_sf(lambda),
        n,
    }
}

/// Survival function of the Kolmogorov distribution,
/// Q(lambda) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 lambda^2).
///
/// For small lambda that alternating series converges too slowly, so the
/// complementary theta series (the Jacobi-transformed expansion of the CDF)
/// is used below 1.18; both branches agree to machine precision there.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    use std::f64::consts::PI;
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        let factor = (2.0 * PI).sqrt() / lambda;
        let mut cdf = 0.0;
        for j in 1..=20u32 {
            let m = (2 * j - 1) as f64;
            let term = (-m * m * PI * PI / (8.0 * lambda * lambda)).exp();
            cdf += term;
            if term < 1e-18 {
                break;
            }
        }
        return (1.0 - factor * cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = 2.0 * (-2.0 * jf * jf * lambda * lambda).exp();
        if j % 2 == 1 {
            sum += term;
        } else {
            sum -= term;
        }
        if term < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Least-squares fit of log|error| against log h.
///
/// Returns `(slope, intercept, rms_residual)` for the model
/// `log|e_i| = slope * log h_i + intercept`. Callers must pass strictly
/// positive `errors`; points per position are paired by index.
pub fn log_log_fit(hs: &[f64], errors: &[f64]) -> (f64, f64, f64) {
    assert_eq!(hs.len(), errors.len());
    assert!(hs.len() >= 2, "need at least two points for a fit");
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.abs().ln()).collect();
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - xbar) * (x - xbar);
        sxy += (x - xbar) * (y - ybar);
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let mut ss = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        let r = y - (slope * x + intercept);
        ss += r * r;
    }
    (slope, intercept, (ss / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn standard_normal_cdf_matches_known_values() {
        assert_relative_eq!(standard_normal_cdf(0.0), 0.5, epsilon = 1e-15);
        assert_relative_eq!(standard_normal_cdf(1.0), 0.8413447460685429, epsilon = 1e-12);
        assert_relative_eq!(standard_normal_cdf(-1.96), 0.024997895148220435, epsilon = 1e-12);
    }

    #[test]
    fn folded_normal_cdf_is_zero_below_origin_and_doubles_tail() {
        assert_eq!(folded_normal_cdf(-1.0, 1.0), 0.0);
        assert_eq!(folded_normal_cdf(0.0, 1.0), 0.0);
        // P(|Z| <= x) = 2 Phi(x) - 1.
        let x = 0.7;
        assert_relative_eq!(
            folded_normal_cdf(x, 1.0),
            2.0 * standard_normal_cdf(x) - 1.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn ks_test_accepts_its_own_distribution_quantiles() {
        // Deterministic "perfect" sample: midpoints of uniform quantile cells
        // mapped through the target CDF inverse is equivalent to testing
        // uniforms against the identity CDF.
        let n = 1000;
        let mut u: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let ks = ks_test(&mut u, |x| x.clamp(0.0, 1.0));
        assert!(ks.statistic < 1.0 / n as f64 + 1e-12);
        assert!(ks.p_value > 0.999);
    }

    #[test]
    fn kolmogorov_sf_matches_reference_value_and_is_monotone_at_the_branch() {
        // Q(1) from the defining series, accurate to the shown digits.
        assert_relative_eq!(kolmogorov_sf(1.0), 0.2699996716773089, epsilon = 1e-9);
        // The two series branches must hand over smoothly.
        assert!(kolmogorov_sf(1.17) > kolmogorov_sf(1.18));
        assert!(kolmogorov_sf(1.18) > kolmogorov_sf(1.19));
        assert!(kolmogorov_sf(0.02) > 0.999999);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }

    #[test]
    fn ks_test_rejects_wrong_distribution() {
        let n = 1000;
        let mut u: Vec<f64> = (0..n).map(|i| ((i as f64 + 0.5) / n as f64).powi(2)).collect();
        let ks = ks_test(&mut u, |x| x.clamp(0.0, 1.0));
        assert!(ks.p_value < 1e-3, "p = {}", ks.p_value);
    }

    #[test]
    fn log_log_fit_recovers_exact_power_law() {
        let hs: Vec<f64> = (3..=8).map(|k| 0.5f64.powi(k)).collect();
        let errs: Vec<f64> = hs.iter().map(|h| 0.5 * h.powf(0.25)).collect();
        let (slope, intercept, residual) = log_log_fit(&hs, &errs);
        assert_relative_eq!(slope, 0.25, epsilon = 1e-9);
        assert_relative_eq!(intercept, 0.5f64.ln(), epsilon = 1e-9);
        assert!(residual < 1e-12);
    }
}
