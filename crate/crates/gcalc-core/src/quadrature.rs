//! Gaussian quadrature of catalog payoffs.
//!
//! Reference values must be far more accurate than any PDE tolerance, so we
//! integrate against the normal density with composite 16-point
//! Gauss-Legendre panels on [-12 sigma, 12 sigma], splitting panels at payoff
//! kinks. For piecewise-smooth catalog payoffs this is accurate to roughly
//! machine precision; a crude growth-based tail bound guards the truncation.

use crate::error::{GcalcError, Result};
use crate::payoff::{Growth, Payoff};

/// 16-point Gauss-Legendre nodes on [0, 1] (symmetric pairs stored once).
const GL16_NODES: [f64; 8] = [
    0.9894009349916499,
    0.9445750230732326,
    0.8656312023878318,
    0.7554044083550030,
    0.6178762444026438,
    0.4580167776572274,
    0.2816035507792589,
    0.0950125098376374,
];
const GL16_WEIGHTS: [f64; 8] = [
    0.0271524594117541,
    0.0622535239386479,
    0.0951585116824928,
    0.1246289712555339,
    0.1495959888165767,
    0.1691565193950025,
    0.1826034150449236,
    0.1894506104550685,
];

const TAIL_RADIUS_SIGMAS: f64 = 12.0;
const PANELS_PER_SIGMA: f64 = 4.0;

fn gauss_legendre_panel(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in GL16_NODES.iter().zip(GL16_WEIGHTS.iter()) {
        acc += w * (f(mid + half * x) + f(mid - half * x));
    }
    acc * half
}

/// Integral of `f` over [lo, hi] split at `inner_points`, panel width <= `max_panel`.
fn composite(f: &impl Fn(f64) -> f64, lo: f64, hi: f64, inner: &[f64], max_panel: f64) -> f64 {
    let mut cuts = vec![lo];
    for p in inner {
        if *p > lo && *p < hi {
            cuts.push(*p);
        }
    }
    cuts.push(hi);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();

    let mut total = 0.0;
    for seg in cuts.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let n = (((b - a) / max_panel).ceil() as usize).max(1);
        let step = (b - a) / n as f64;
        for k in 0..n {
            total += gauss_legendre_panel(f, a + k as f64 * step, a + (k + 1) as f64 * step);
        }
    }
    total
}

/// E[phi(X)] for X ~ N(0, variance). `variance = 0` returns phi(0).
pub fn gaussian_value(phi: &Payoff, variance: f64) -> Result<f64> {
    if variance < 0.0 {
        return Err(GcalcError::Parameter(format!(
            "variance must be nonnegative, got {variance}"
        )));
    }
    if variance == 0.0 {
        return Ok(phi.eval(0.0));
    }
    let sigma = variance.sqrt();
    let radius = TAIL_RADIUS_SIGMAS * sigma;
    let density = |x: f64| (-0.5 * x * x / variance).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let integrand = |x: f64| phi.eval(x) * density(x);
    let value = composite(&integrand, -radius, radius, &phi.kinks(), sigma / PANELS_PER_SIGMA);

    // Tail budget. Beyond the truncation radius |phi(x)| <= 2 M (x/R)^d with
    // M the edge bound and d <= 12 the catalog growth degree; the polynomial
    // factor times exp(-x^2/4v) is decreasing there (R = 12 sigma exceeds
    // sqrt(2 d v)), so a Mills-ratio bound on the remaining exp(-x^2/4v)
    // closes the estimate.
    debug_assert!(matches!(phi.growth(), Growth::Bounded | Growth::Linear | Growth::Polynomial(..=12)));
    let edge = 2.0 * phi.abs_bound_on(radius).max(1.0);
    let tail_bound = 2.0 * edge * (2.0 * variance / radius)
        * (-0.5 * radius * radius / variance).exp()
        / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    if tail_bound > 1e-10 * (1.0 + value.abs()) {
        return Err(GcalcError::Numeric(format!(
            "quadrature tail bound {tail_bound} too large for requested accuracy"
        )));
    }
    Ok(value)
}

/// Absolute moment E[|X|^n] of X ~ N(0, variance), in closed form.
pub fn gaussian_abs_moment(n: u32, variance: f64) -> f64 {
    // E|Z|^n = (n-1)!! for even n; sqrt(2/pi) 2^((n-1)/2) ((n-1)/2)! for odd n.
    let std_moment = if n % 2 == 0 {
        double_factorial(n.saturating_sub(1))
    } else {
        let k = (n - 1) / 2;
        (2.0 / std::f64::consts::PI).sqrt() * 2f64.powi(k as i32) * factorial(k)
    };
    std_moment * variance.powf(n as f64 / 2.0)
}

fn double_factorial(n: u32) -> f64 {
    let mut acc = 1.0;
    let mut k = n;
    while k > 1 {
        acc *= k as f64;
        k -= 2;
    }
    acc
}

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_moment_is_variance() {
        for v in [0.25, 1.0, 2.0] {
            let got = gaussian_value(&Payoff::power(2), v).unwrap();
            assert!((got - v).abs() < 1e-10, "variance {v}: got {got}");
        }
    }

    #[test]
    fn closed_form_abs_moments() {
        let pi = std::f64::consts::PI;
        assert!((gaussian_abs_moment(1, 1.0) - (2.0 / pi).sqrt()).abs() < 1e-15);
        assert!((gaussian_abs_moment(2, 1.0) - 1.0).abs() < 1e-15);
        assert!((gaussian_abs_moment(3, 1.0) - 2.0 * 2f64.sqrt() / pi.sqrt()).abs() < 1e-15);
        assert!((gaussian_abs_moment(4, 1.0) - 3.0).abs() < 1e-15);
        assert!((gaussian_abs_moment(5, 1.0) - 8.0 * 2f64.sqrt() / pi.sqrt()).abs() < 1e-14);
        assert!((gaussian_abs_moment(6, 1.0) - 15.0).abs() < 1e-14);
        assert!((gaussian_abs_moment(8, 1.0) - 105.0).abs() < 1e-13);
        // scaling in the variance
        assert!((gaussian_abs_moment(4, 2.0) - 12.0).abs() < 1e-13);
        assert!((gaussian_abs_moment(6, 3.0) - 15.0 * 27.0).abs() < 1e-11);
    }

    #[test]
    fn quadrature_matches_closed_forms() {
        for n in [1u32, 2, 3, 4, 5, 6, 8] {
            for v in [0.25, 1.0, 2.0] {
                let got = gaussian_value(&Payoff::abs_power(n), v).unwrap();
                let want = gaussian_abs_moment(n, v);
                assert!(
                    (got - want).abs() <= 1e-8 * (1.0 + want),
                    "n={n} v={v}: got {got}, want {want}"
                );
            }
        }
    }

    #[test]
    fn kinked_payoffs_are_machine_accurate() {
        // E (Z)^+ = 1/sqrt(2 pi); E (Z - K)^+ has a standard closed form.
        let inv_sqrt_2pi = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let got = gaussian_value(&Payoff::call(0.0), 1.0).unwrap();
        assert!((got - inv_sqrt_2pi).abs() < 1e-12);

        let k = 0.5f64;
        let phi_k = (-0.5 * k * k).exp() * inv_sqrt_2pi;
        let big_phi = 0.5 * (1.0 + erf_series(k / 2f64.sqrt()));
        let want = phi_k - k * (1.0 - big_phi);
        let got = gaussian_value(&Payoff::call(k), 1.0).unwrap();
        assert!((got - want).abs() < 1e-12, "got {got}, want {want}");
    }

    // Maclaurin series for erf; plenty accurate for |x| <= 2.
    fn erf_series(x: f64) -> f64 {
        let mut term = x;
        let mut acc = x;
        for n in 1..40 {
            term *= -x * x / n as f64;
            acc += term / (2 * n + 1) as f64;
        }
        acc * 2.0 / std::f64::consts::PI.sqrt()
    }

    #[test]
    fn zero_variance_returns_point_value() {
        assert_eq!(gaussian_value(&Payoff::call(-1.0), 0.0).unwrap(), 1.0);
    }

    #[test]
    fn sine_value_is_exp_damped() {
        // E sin(wZ) = 0 by symmetry; E cos is not in the catalog, so check odd part.
        let got = gaussian_value(&Payoff::sin(1.7), 1.0).unwrap();
        assert!(got.abs() < 1e-12);
    }
}
