//! Explicit monotone finite-difference solver for the G-heat equation
//!
//! ```text
//!     d_t u - G(d_xx u) = 0,   u(0, x) = phi(x),
//!     G(a) = (a^+ - sigma0^2 a^-) / 2,   sigma0 in [0, 1].
//! ```
//!
//! The update u_i += dt * G((u_{i+1} - 2 u_i + u_{i-1}) / dx^2) is a convex
//! combination of stencil values iff dt <= dx^2 (the worst branch has
//! diffusivity 1), which makes the scheme monotone; monotone schemes converge
//! to the viscosity solution of this equation. Ghost cells extend the
//! solution linearly, i.e. the boundary second difference is taken to be
//! zero, which is exact for the affine far field of Lipschitz data.

use serde::{Deserialize, Serialize};

use crate::error::{GcalcError, Result};
use crate::payoff::Payoff;

/// Domain half-width must cover this many standard deviations of the
/// widest (sigma = 1) diffusion.
pub const DIFFUSION_RADIUS: f64 = 6.0;

/// Maximum number of stored time levels per solution.
const MAX_STORED_LEVELS: usize = 64;

/// The volatility-uncertainty parameter: sigma ranges over [sigma0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GParams {
    sigma0: f64,
}

impl GParams {
    pub fn new(sigma0: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&sigma0) {
            return Err(GcalcError::Parameter(format!(
                "sigma0 must lie in [0, 1], got {sigma0}"
            )));
        }
        Ok(GParams { sigma0 })
    }

    pub fn sigma0(self) -> f64 {
        self.sigma0
    }

    /// Classical case: no volatility uncertainty.
    pub fn classical() -> Self {
        GParams { sigma0: 1.0 }
    }
}

/// G(a) = (a^+ - sigma0^2 a^-) / 2.
pub fn g_of(a: f64, params: GParams) -> f64 {
    0.5 * (a.max(0.0) - params.sigma0 * params.sigma0 * (-a).max(0.0))
}

/// Uniform symmetric spatial grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceGrid {
    center: f64,
    half_width: f64,
    n_points: usize,
    dx: f64,
}

impl SpaceGrid {
    pub fn new(center: f64, half_width: f64, n_points: usize) -> Result<Self> {
        if n_points < 3 || n_points % 2 == 0 {
            return Err(GcalcError::Parameter(format!(
                "grid needs an odd point count >= 3, got {n_points}"
            )));
        }
        if !(half_width > 0.0) {
            return Err(GcalcError::Parameter("grid half-width must be positive".into()));
        }
        let dx = 2.0 * half_width / (n_points - 1) as f64;
        Ok(SpaceGrid { center, half_width, n_points, dx })
    }

    /// Smallest symmetric grid with spacing `dx` covering `min_half_width`.
    pub fn with_spacing(center: f64, min_half_width: f64, dx: f64) -> Result<Self> {
        if !(dx > 0.0) {
            return Err(GcalcError::Parameter("dx must be positive".into()));
        }
        let half_points = ((min_half_width / dx) - 1e-12).ceil().max(1.0) as usize;
        let half_width = half_points as f64 * dx;
        SpaceGrid::new(center, half_width, 2 * half_points + 1)
    }

    /// Grid wide enough for horizon `t` and the payoff's kink margin.
    pub fn for_horizon(center: f64, t: f64, margin: f64, dx: f64) -> Result<Self> {
        SpaceGrid::with_spacing(center, DIFFUSION_RADIUS * t.sqrt() + margin, dx)
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x(&self, i: usize) -> f64 {
        self.center - self.half_width + i as f64 * self.dx
    }

    pub fn center_index(&self) -> usize {
        (self.n_points - 1) / 2
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.x(i))
    }

    pub fn contains(&self, x: f64) -> bool {
        // A hair of slack so the exact endpoints stay evaluable.
        let pad = 1e-9 * (1.0 + self.half_width);
        x >= self.center - self.half_width - pad && x <= self.center + self.half_width + pad
    }

    /// Linear interpolation of nodal `values` at `x`; errors outside the grid.
    pub fn interp(&self, values: &[f64], x: f64) -> Result<f64> {
        if values.len() != self.n_points {
            return Err(GcalcError::Shape(format!(
                "expected {} nodal values, got {}",
                self.n_points,
                values.len()
            )));
        }
        if !self.contains(x) {
            return Err(GcalcError::OutOfDomain(format!(
                "x={x} outside [{}, {}]",
                self.center - self.half_width,
                self.center + self.half_width
            )));
        }
        let pos = ((x - (self.center - self.half_width)) / self.dx)
            .clamp(0.0, (self.n_points - 1) as f64);
        let i = (pos.floor() as usize).min(self.n_points - 2);
        let w = pos - i as f64;
        Ok((1.0 - w) * values[i] + w * values[i + 1])
    }
}

/// Grid-sampled solution of the G-heat equation with stored time levels.
#[derive(Debug, Clone)]
pub struct HeatSolution {
    pub params: GParams,
    pub grid: SpaceGrid,
    /// Stored time levels, always including 0 and the horizon.
    pub times: Vec<f64>,
    /// One row of nodal values per stored time level.
    pub values: Vec<Vec<f64>>,
}

impl HeatSolution {
    pub fn levels(&self) -> usize {
        self.times.len()
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("solution has at least the initial level")
    }

    pub fn final_values(&self) -> &[f64] {
        self.values.last().expect("solution has at least the initial level")
    }

    /// Linear interpolation at stored level `time_index`.
    pub fn evaluate(&self, time_index: usize, x: f64) -> Result<f64> {
        let values = self.values.get(time_index).ok_or_else(|| {
            GcalcError::Parameter(format!(
                "time index {time_index} out of range ({} levels)",
                self.levels()
            ))
        })?;
        self.grid.interp(values, x)
    }
}

/// Free-function form of [`HeatSolution::evaluate`].
pub fn evaluate(sol: &HeatSolution, time_index: usize, x: f64) -> Result<f64> {
    sol.evaluate(time_index, x)
}

fn check_preconditions(t: f64, grid: &SpaceGrid, dt: f64, margin: f64) -> Result<usize> {
    if !(t > 0.0) {
        return Err(GcalcError::Parameter(format!("horizon must be positive, got {t}")));
    }
    if !(dt > 0.0) {
        return Err(GcalcError::Parameter("dt must be positive".into()));
    }
    let dx2 = grid.dx * grid.dx;
    if dt > dx2 * (1.0 + 1e-12) {
        return Err(GcalcError::Parameter(format!(
            "CFL violation: dt={dt} exceeds dx^2={dx2}"
        )));
    }
    let needed = DIFFUSION_RADIUS * t.sqrt() + margin;
    if grid.half_width + 1e-9 < needed {
        return Err(GcalcError::Config(format!(
            "domain too narrow: half-width {} < {needed} required for horizon {t}",
            grid.half_width
        )));
    }
    Ok(((t / dt) - 1e-9).ceil().max(1.0) as usize)
}

fn step_in_place(u: &[f64], params: GParams, dt_over_dx2: f64, dt: f64, out: &mut [f64]) {
    let n = u.len();
    // Zero second difference at the boundary: ghost values extend linearly.
    out[0] = u[0];
    out[n - 1] = u[n - 1];
    let half = 0.5 * dt_over_dx2;
    let half_low = 0.5 * params.sigma0 * params.sigma0 * dt_over_dx2;
    let _ = dt;
    for i in 1..n - 1 {
        let d2 = u[i + 1] - 2.0 * u[i] + u[i - 1];
        // dt * G(d2/dx^2), with the dx^2 folded into the coefficients.
        let incr = if d2 >= 0.0 { half * d2 } else { half_low * d2 };
        out[i] = u[i] + incr;
    }
}

fn run_scheme(
    initial: Vec<f64>,
    t: f64,
    params: GParams,
    grid: &SpaceGrid,
    n_steps: usize,
    mut on_level: impl FnMut(usize, f64, &[f64]),
) -> Vec<f64> {
    let dt = t / n_steps as f64;
    let dt_over_dx2 = dt / (grid.dx * grid.dx);
    let mut u = initial;
    let mut buf = vec![0.0; u.len()];
    on_level(0, 0.0, &u);
    for k in 1..=n_steps {
        step_in_place(&u, params, dt_over_dx2, dt, &mut buf);
        std::mem::swap(&mut u, &mut buf);
        on_level(k, k as f64 * dt, &u);
    }
    u
}

/// Solve from raw nodal initial data. `margin` is the payoff-kink margin the
/// domain-width precondition is checked against.
pub fn solve_gheat_values(
    initial: Vec<f64>,
    margin: f64,
    t: f64,
    params: GParams,
    grid: &SpaceGrid,
    dt: f64,
) -> Result<HeatSolution> {
    if initial.len() != grid.n_points {
        return Err(GcalcError::Shape(format!(
            "initial data has {} values, grid has {} points",
            initial.len(),
            grid.n_points
        )));
    }
    let n_steps = check_preconditions(t, grid, dt, margin)?;
    let store_every = n_steps.div_ceil(MAX_STORED_LEVELS);
    let mut times = Vec::new();
    let mut values = Vec::new();
    run_scheme(initial, t, params, grid, n_steps, |k, time, u| {
        if k % store_every == 0 || k == n_steps {
            times.push(time);
            values.push(u.to_vec());
        }
    });
    Ok(HeatSolution { params, grid: clone_grid(grid), times, values })
}

fn clone_grid(grid: &SpaceGrid) -> SpaceGrid {
    grid.clone()
}

/// Solve with initial data given by a function.
pub fn solve_gheat_fn(
    f: impl Fn(f64) -> f64,
    margin: f64,
    t: f64,
    params: GParams,
    grid: &SpaceGrid,
    dt: f64,
) -> Result<HeatSolution> {
    let initial: Vec<f64> = grid.xs().map(f).collect();
    solve_gheat_values(initial, margin, t, params, grid, dt)
}

/// Solve from a catalog payoff.
pub fn solve_gheat(
    phi: &Payoff,
    t: f64,
    params: GParams,
    grid: &SpaceGrid,
    dt: f64,
) -> Result<HeatSolution> {
    solve_gheat_fn(|x| phi.eval(x), phi.domain_margin(), t, params, grid, dt)
}

/// Fast path used in dynamic-programming inner loops: run the scheme and
/// return only the final value at the grid center, storing nothing.
pub fn solve_center_value(
    f: impl Fn(f64) -> f64,
    margin: f64,
    t: f64,
    params: GParams,
    grid: &SpaceGrid,
    dt: f64,
) -> Result<f64> {
    let n_steps = check_preconditions(t, grid, dt, margin)?;
    let initial: Vec<f64> = grid.xs().map(f).collect();
    let u = run_scheme(initial, t, params, grid, n_steps, |_, _, _| {});
    Ok(u[grid.center_index()])
}
