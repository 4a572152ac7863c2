//! The G-normal distribution functional and its closed-form identities.
//!
//! `pg_t` evaluates phi under the G-normal distribution with variance scale t
//! by solving the G-heat equation; the other operations package the
//! closed forms it must reproduce: Gaussian reductions for convex/concave
//! data, the absolute-moment table, the Chapman semigroup rule, central
//! symmetry and sqrt(t) scaling.

use crate::error::Result;
use crate::heat::{solve_gheat_fn, GParams, SpaceGrid};
use crate::payoff::Payoff;
use crate::quadrature;

/// Discretization parameters for one PDE query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolution {
    pub dx: f64,
    pub dt: f64,
    /// Explicit half-width; `None` uses the 6 sqrt(t) + margin rule.
    pub half_width: Option<f64>,
}

impl Resolution {
    /// Desk-scale defaults: dx = 1/128, dt = dx^2 / 2.
    pub fn desk() -> Self {
        let dx = 1.0 / 128.0;
        Resolution { dx, dt: 0.5 * dx * dx, half_width: None }
    }

    /// Coarser resolution for cheap interior checks.
    pub fn coarse() -> Self {
        let dx = 1.0 / 64.0;
        Resolution { dx, dt: 0.5 * dx * dx, half_width: None }
    }

    pub fn with_dx(dx: f64) -> Self {
        Resolution { dx, dt: 0.5 * dx * dx, half_width: None }
    }

    pub fn grid_for(&self, center: f64, t: f64, margin: f64) -> Result<SpaceGrid> {
        match self.half_width {
            Some(hw) => SpaceGrid::with_spacing(center, hw, self.dx),
            None => SpaceGrid::for_horizon(center, t, margin, self.dx),
        }
    }
}

/// One evaluation request: E[phi(x + X_t)] with X_t G-normal at scale t.
#[derive(Debug, Clone)]
pub struct GNormalQuery {
    pub payoff: Payoff,
    pub t: f64,
    pub x: f64,
    pub params: GParams,
    pub resolution: Resolution,
}

/// u(t, x) for the G-heat flow started from the payoff.
pub fn pg_t(q: &GNormalQuery) -> Result<f64> {
    let grid = q.resolution.grid_for(q.x, q.t, q.payoff.domain_margin())?;
    let sol = crate::heat::solve_gheat(&q.payoff, q.t, q.params, &grid, q.resolution.dt)?;
    sol.evaluate(sol.levels() - 1, q.x)
}

/// E[phi(X)] for X ~ N(0, variance), by quadrature.
pub fn gaussian_value(phi: &Payoff, variance: f64) -> Result<f64> {
    quadrature::gaussian_value(phi, variance)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Convex,
    Concave,
}

/// Closed form for payoffs of declared shape: convex data feel the upper
/// volatility (variance t), concave data the lower one (variance sigma0^2 t).
pub fn convex_concave_value(phi: &Payoff, shape: Shape, t: f64, params: GParams) -> Result<f64> {
    match shape {
        Shape::Convex => quadrature::gaussian_value(phi, t),
        Shape::Concave => {
            let s0 = params.sigma0();
            quadrature::gaussian_value(phi, s0 * s0 * t)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentSign {
    Plus,
    Minus,
}

/// Closed-form absolute moments: E[|X|^n] is the Gaussian moment at
/// variance t, and E[-|X|^n] = -sigma0^n E[|X|^n].
pub fn moment(n: u32, sign: MomentSign, t: f64, params: GParams) -> f64 {
    let plus = quadrature::gaussian_abs_moment(n, t);
    match sign {
        MomentSign::Plus => plus,
        MomentSign::Minus => -params.sigma0().powi(n as i32) * plus,
    }
}

/// |P_t(P_s(phi)) - P_{t+s}(phi)| at x = 0.
pub fn check_chapman(
    phi: &Payoff,
    s: f64,
    t: f64,
    params: GParams,
    res: &Resolution,
) -> Result<f64> {
    let margin = phi.domain_margin();
    let grid = res.grid_for(0.0, s + t, margin)?;
    let stage1 = crate::heat::solve_gheat(phi, s, params, &grid, res.dt)?;
    let stage2 = crate::heat::solve_gheat_values(
        stage1.final_values().to_vec(),
        margin,
        t,
        params,
        &grid,
        res.dt,
    )?;
    let direct = crate::heat::solve_gheat(phi, s + t, params, &grid, res.dt)?;
    let lhs = stage2.evaluate(stage2.levels() - 1, 0.0)?;
    let rhs = direct.evaluate(direct.levels() - 1, 0.0)?;
    Ok((lhs - rhs).abs())
}

/// |P_t(phi(.)) - P_t(phi(-.))| at x = 0.
pub fn check_symmetry(phi: &Payoff, t: f64, params: GParams, res: &Resolution) -> Result<f64> {
    let margin = phi.domain_margin();
    let grid = res.grid_for(0.0, t, margin)?;
    let sol = crate::heat::solve_gheat(phi, t, params, &grid, res.dt)?;
    let mirrored = solve_gheat_fn(|x| phi.eval(-x), margin, t, params, &grid, res.dt)?;
    let lhs = sol.evaluate(sol.levels() - 1, 0.0)?;
    let rhs = mirrored.evaluate(mirrored.levels() - 1, 0.0)?;
    Ok((lhs - rhs).abs())
}

/// |u(t, 0) - P_1(phi(sqrt(t) .))(0)|: the sqrt(t) scaling identity.
pub fn check_scaling(phi: &Payoff, t: f64, params: GParams, res: &Resolution) -> Result<f64> {
    let q = GNormalQuery {
        payoff: phi.clone(),
        t,
        x: 0.0,
        params,
        resolution: *res,
    };
    let lhs = pg_t(&q)?;

    let root_t = t.sqrt();
    // Kinks of y -> phi(sqrt(t) y) sit at kink / sqrt(t); at t = 1 this grid
    // is byte-identical to the direct one.
    let kink_reach = phi.kinks().iter().fold(0.0f64, |m, k| m.max(k.abs()));
    let scaled_margin = 1.0 + kink_reach / root_t;
    let grid = res.grid_for(0.0, 1.0, scaled_margin)?;
    let sol = solve_gheat_fn(|y| phi.eval(root_t * y), scaled_margin, 1.0, params, &grid, res.dt)?;
    let rhs = sol.evaluate(sol.levels() - 1, 0.0)?;
    Ok((lhs - rhs).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(payoff: Payoff, t: f64, sigma0: f64) -> GNormalQuery {
        GNormalQuery {
            payoff,
            t,
            x: 0.0,
            params: GParams::new(sigma0).unwrap(),
            resolution: Resolution::coarse(),
        }
    }

    #[test]
    fn variance_scale_moves_with_t() {
        let v = pg_t(&q(Payoff::power(2), 2.0, 0.5)).unwrap();
        assert!((v - 2.0).abs() < 1e-2, "got {v}");
        let v = pg_t(&q(Payoff::neg(Payoff::power(2)), 2.0, 0.5)).unwrap();
        assert!((v + 0.5).abs() < 1e-2, "got {v}");
    }

    #[test]
    fn convex_call_reduces_to_unit_gaussian() {
        let expect = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let v = pg_t(&q(Payoff::call(0.0), 1.0, 0.25)).unwrap();
        assert!((v - expect).abs() < 5e-3, "got {v}, want {expect}");
        let cc = convex_concave_value(
            &Payoff::call(0.0),
            Shape::Convex,
            1.0,
            GParams::new(0.25).unwrap(),
        )
        .unwrap();
        assert!((cc - expect).abs() < 1e-10);
    }

    #[test]
    fn concave_values_use_lower_variance() {
        let params = GParams::new(0.5).unwrap();
        let v = convex_concave_value(&Payoff::neg(Payoff::abs_power(1)), Shape::Concave, 1.0, params)
            .unwrap();
        let expect = -0.5 * (2.0 / std::f64::consts::PI).sqrt();
        assert!((v - expect).abs() < 1e-10, "got {v}, want {expect}");

        let degenerate = GParams::new(0.0).unwrap();
        let v = convex_concave_value(&Payoff::put(0.5), Shape::Concave, 1.0, degenerate).unwrap();
        assert_eq!(v, 0.5); // phi(0)
    }

    #[test]
    fn moment_table() {
        let params = GParams::new(0.5).unwrap();
        assert!((moment(4, MomentSign::Plus, 2.0, params) - 12.0).abs() < 1e-12);
        assert!((moment(6, MomentSign::Plus, 1.0, params) - 15.0).abs() < 1e-12);
        let want = -0.5 * (2.0 / std::f64::consts::PI).sqrt();
        assert!((moment(1, MomentSign::Minus, 1.0, params) - want).abs() < 1e-14);
    }

    #[test]
    fn chapman_rule_holds() {
        let res = Resolution::coarse();
        let r = check_chapman(&Payoff::power(2), 0.5, 0.5, GParams::new(0.5).unwrap(), &res)
            .unwrap();
        assert!(r <= 1e-2, "residual {r}");
        let r = check_chapman(&Payoff::call(0.5), 0.25, 0.75, GParams::classical(), &res).unwrap();
        assert!(r <= 1e-2, "residual {r}");
    }

    #[test]
    fn central_symmetry() {
        let res = Resolution::coarse();
        let params = GParams::new(0.5).unwrap();
        // odd payoff on a symmetric grid: mirror-exact
        let r = check_symmetry(&Payoff::sin(1.0), 1.0, params, &res).unwrap();
        assert!(r <= 1e-10, "residual {r}");
        // kinked pair call(0) vs its reflection
        let r = check_symmetry(&Payoff::call(0.0), 1.0, params, &res).unwrap();
        assert!(r <= 1e-2, "residual {r}");
        // even payoff: identical inputs
        let r = check_symmetry(&Payoff::power(2), 1.0, params, &res).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn sqrt_t_scaling() {
        let res = Resolution::coarse();
        let params = GParams::new(0.5).unwrap();
        let r = check_scaling(&Payoff::power(2), 1.0, params, &res).unwrap();
        assert!(r <= 1e-12, "residual {r}"); // t = 1 compares a solve against itself
        let r = check_scaling(&Payoff::power(2), 4.0, params, &res).unwrap();
        assert!(r <= 2e-2, "residual {r}");
        let r = check_scaling(&Payoff::abs_power(1), 0.25, params, &res).unwrap();
        assert!(r <= 1e-2, "residual {r}");
    }

    #[test]
    fn domination_by_the_linear_expectation() {
        for (_, phi) in Payoff::catalog() {
            let v = pg_t(&q(phi.clone(), 1.0, 0.25)).unwrap();
            let classical = gaussian_value(&phi, 1.0).unwrap();
            assert!(
                v >= classical - 5e-3,
                "{:?}: G-value {v} below classical {classical}",
                phi.kind()
            );
        }
    }
}
