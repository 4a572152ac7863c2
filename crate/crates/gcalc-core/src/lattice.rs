//! Bang-bang lattice oracle for the G-heat equation.
//!
//! Backward dynamic program over the volatility control: one step of size
//! dt = t / n_steps replaces v(x) by the better of the two extremal binomial
//! averages
//!
//! ```text
//!     v'(x) = max over sigma in {sigma0, 1} of
//!             [ v(x + sigma sqrt(dt)) + v(x - sigma sqrt(dt)) ] / 2.
//! ```
//!
//! The sup over sigma in [sigma0, 1] is attained at an endpoint because the
//! objective is affine in sigma^2. Off-grid samples use linear interpolation
//! with linear extrapolation beyond the edges. This is a deliberately
//! separate code path from the finite-difference scheme so the two can
//! cross-validate each other.

use crate::error::{GcalcError, Result};
use crate::heat::{GParams, SpaceGrid, DIFFUSION_RADIUS};
use crate::payoff::Payoff;

/// Linear interpolation in index coordinates with linear extension outside.
fn sample_linear(v: &[f64], pos: f64) -> f64 {
    let n = v.len();
    if pos <= 0.0 {
        return v[0] + pos * (v[1] - v[0]);
    }
    let top = (n - 1) as f64;
    if pos >= top {
        return v[n - 1] + (pos - top) * (v[n - 1] - v[n - 2]);
    }
    let i = pos.floor() as usize;
    let w = pos - i as f64;
    (1.0 - w) * v[i] + w * v[i + 1]
}

/// Value at (t, grid center) of the lattice dynamic program started from `phi`.
pub fn lattice_value(
    phi: &Payoff,
    t: f64,
    params: GParams,
    grid: &SpaceGrid,
    n_steps: usize,
) -> Result<f64> {
    if n_steps == 0 {
        return Err(GcalcError::Parameter("lattice needs n_steps >= 1".into()));
    }
    if !(t > 0.0) {
        return Err(GcalcError::Parameter(format!("horizon must be positive, got {t}")));
    }
    let needed = DIFFUSION_RADIUS * t.sqrt() + phi.domain_margin();
    if grid.half_width() + 1e-9 < needed {
        return Err(GcalcError::Config(format!(
            "domain too narrow: half-width {} < {needed} required for horizon {t}",
            grid.half_width()
        )));
    }

    let dt = t / n_steps as f64;
    let shift_hi = dt.sqrt() / grid.dx();
    let shift_lo = params.sigma0() * dt.sqrt() / grid.dx();
    let degenerate_low = params.sigma0() == 0.0;
    let single_control = params.sigma0() == 1.0;

    let mut v: Vec<f64> = grid.xs().map(|x| phi.eval(x)).collect();
    let mut buf = vec![0.0; v.len()];
    for _ in 0..n_steps {
        for (i, slot) in buf.iter_mut().enumerate() {
            let p = i as f64;
            let hi = 0.5 * (sample_linear(&v, p + shift_hi) + sample_linear(&v, p - shift_hi));
            *slot = if single_control {
                hi
            } else if degenerate_low {
                hi.max(v[i])
            } else {
                let lo =
                    0.5 * (sample_linear(&v, p + shift_lo) + sample_linear(&v, p - shift_lo));
                hi.max(lo)
            };
        }
        std::mem::swap(&mut v, &mut buf);
    }
    Ok(v[grid.center_index()])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn value(phi: &Payoff, t: f64, sigma0: f64, dx: f64, n_steps: usize) -> f64 {
        let params = GParams::new(sigma0).unwrap();
        let grid = SpaceGrid::for_horizon(0.0, t, phi.domain_margin(), dx).unwrap();
        lattice_value(phi, t, params, &grid, n_steps).unwrap()
    }

    #[test]
    fn constant_payoff_is_exact() {
        let v = value(&Payoff::constant(2.5), 1.0, 0.5, 1.0 / 32.0, 64);
        assert_eq!(v, 2.5);
    }

    #[test]
    fn classical_square_matches_heat_moment() {
        let v = value(&Payoff::power(2), 1.0, 1.0, 1.0 / 64.0, 1024);
        assert!((v - 1.0).abs() < 5e-3, "got {v}");
    }

    #[test]
    fn convex_abs_uses_high_volatility() {
        let expected = (2.0 / std::f64::consts::PI).sqrt();
        let v = value(&Payoff::abs_power(1), 1.0, 0.5, 1.0 / 64.0, 1024);
        assert!((v - expected).abs() < 5e-3, "got {v}, want {expected}");
    }

    #[test]
    fn concave_neg_abs_uses_low_volatility() {
        let expected = -0.5 * (2.0 / std::f64::consts::PI).sqrt();
        let v = value(&Payoff::neg(Payoff::abs_power(1)), 1.0, 0.5, 1.0 / 64.0, 1024);
        assert!((v - expected).abs() < 5e-3, "got {v}, want {expected}");
    }

    #[test]
    fn degenerate_sigma0_holds_concave_data() {
        // With sigma0 = 0 a concave payoff never moves at the center.
        let v = value(&Payoff::neg(Payoff::power(2)), 1.0, 0.0, 1.0 / 32.0, 256);
        assert!(v.abs() < 5e-3, "got {v}");
    }

    #[test]
    fn rejects_zero_steps_and_narrow_grids() {
        let phi = Payoff::identity();
        let params = GParams::classical();
        let grid = SpaceGrid::for_horizon(0.0, 1.0, 1.0, 1.0 / 8.0).unwrap();
        assert!(lattice_value(&phi, 1.0, params, &grid, 0).is_err());
        let narrow = SpaceGrid::with_spacing(0.0, 1.0, 1.0 / 8.0).unwrap();
        assert!(matches!(
            lattice_value(&phi, 1.0, params, &narrow, 16),
            Err(GcalcError::Config(_))
        ));
    }
}
