//! Backward dynamic program over the accumulator state.
//!
//! Level j holds the conditional value v_j as a grid function of the
//! accumulator; one step back solves, per grid point, a one-dimensional
//! G-heat problem in the incoming increment:
//!
//! ```text
//!     v_j(a) = value at (dt_{j+1}, 0) of the G-heat flow started from
//!              y -> v_{j+1}(f_{j+1}(a, y)).
//! ```
//!
//! At the last level the terminal map is evaluated exactly, so a one-step
//! variable collapses to a single PDE solve identical to the distribution
//! functional itself. Accumulator grid bounds come from interval arithmetic
//! over the update maps (a hard cover under increments clipped to the inner
//! solve domain) intersected with a padded reachability ensemble, which
//! keeps grids tight where the interval bound balloons; queries beyond the
//! box use the clamped extension, whose kernel weight at the read-out point
//! is negligible at the stated tolerances.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::util::standard_normal;

use super::{
    combine_sum, AccumulatorSpec, AxisGrid, CylinderRV, Terminal, ValueTable, MAX_ACC_DIM,
};
use crate::error::{GcalcError, Result};
use crate::heat::{solve_center_value, GParams, SpaceGrid};

/// Margin added to the 6 sqrt(dt) half-width of each inner increment solve.
const INNER_MARGIN: f64 = 1.0;
/// Clip (in standard deviations) for reachability-ensemble draws.
const BOX_CLIP: f64 = 6.0;
/// Fixed seed of the reachability ensemble; boxes are part of the scheme.
const BOX_SEED: u64 = 0xACC0;

/// Resolution of one dynamic-programming run.
#[derive(Debug, Clone)]
pub struct DpResolution {
    /// Spatial step of the inner G-heat solves.
    pub inner_dx: f64,
    /// Inner time step as a fraction of inner_dx^2 (CFL needs <= 1).
    pub inner_dt_factor: f64,
    /// Accumulator grid points per axis when one axis is live.
    pub points_1d: usize,
    /// Accumulator grid points per axis when two axes are live.
    pub points_2d: usize,
    /// Size of the reachability ensemble for box estimation.
    pub box_paths: usize,
    /// User-supplied per-coordinate state box; reachability escaping it is a
    /// configuration error.
    pub explicit_box: Option<Vec<(f64, f64)>>,
}

impl DpResolution {
    /// Desk-scale defaults.
    pub fn desk() -> Self {
        DpResolution {
            inner_dx: 1.0 / 24.0,
            inner_dt_factor: 0.5,
            points_1d: 257,
            points_2d: 97,
            box_paths: 2048,
            explicit_box: None,
        }
    }

    /// Cheaper settings for interior checks with 2e-2 style tolerances.
    pub fn coarse() -> Self {
        DpResolution {
            inner_dx: 1.0 / 16.0,
            inner_dt_factor: 0.5,
            points_1d: 129,
            points_2d: 65,
            box_paths: 1024,
            explicit_box: None,
        }
    }

    /// Match the inner solves to a PDE resolution (dx, dt).
    pub fn matching(dx: f64, dt: f64) -> Self {
        DpResolution { inner_dx: dx, inner_dt_factor: dt / (dx * dx), ..DpResolution::desk() }
    }

    fn points_for(&self, live_axes: usize) -> usize {
        if live_axes >= 2 {
            self.points_2d
        } else {
            self.points_1d
        }
    }
}

#[derive(Debug, Clone)]
struct AxisBounds {
    lo: f64,
    hi: f64,
    core_lo: f64,
    core_hi: f64,
}

impl AxisBounds {
    fn is_degenerate(&self) -> bool {
        self.hi - self.lo <= 1e-12 * (1.0 + self.lo.abs().max(self.hi.abs()))
    }
}

/// Per-level accumulator boxes: interval cover intersected with the padded
/// reachability ensemble.
fn compute_boxes(
    rv: &CylinderRV,
    params: GParams,
    res: &DpResolution,
    inner_half_widths: &[f64],
) -> Result<Vec<Vec<AxisBounds>>> {
    let m = rv.steps();
    let dim = rv.acc.dim;

    // Hard cover by interval arithmetic with |dx| bounded by the inner
    // solve half-width of each step.
    let mut hard: Vec<Vec<(f64, f64)>> = Vec::with_capacity(m + 1);
    hard.push(rv.acc.init.iter().map(|v| (*v, *v)).collect());
    for j in 1..=m {
        let prev = &hard[j - 1];
        let img =
            rv.acc.updates[j - 1].interval(prev, inner_half_widths[j - 1], rv.partition.dt(j));
        hard.push(img);
    }

    // Reachability ensemble under mixed extremal/random controls.
    let mut core: Vec<Vec<(f64, f64)>> =
        (0..=m).map(|_| vec![(f64::INFINITY, f64::NEG_INFINITY); dim]).collect();
    let record = |slot: &mut Vec<(f64, f64)>, state: &[f64]| {
        for (s, v) in slot.iter_mut().zip(state) {
            s.0 = s.0.min(*v);
            s.1 = s.1.max(*v);
        }
    };
    let sigma0 = params.sigma0();
    for p in 0..res.box_paths {
        let mut rng = ChaCha8Rng::seed_from_u64(BOX_SEED ^ (p as u64));
        let mut state = rv.acc.init.clone();
        let mut next = vec![0.0; dim];
        record(&mut core[0], &state);
        for j in 1..=m {
            let dt = rv.partition.dt(j);
            let sigma = match p % 4 {
                0 => 1.0,
                1 => sigma0,
                _ => rng.gen_range(sigma0..=1.0),
            };
            let z: f64 = standard_normal(&mut rng).clamp(-BOX_CLIP, BOX_CLIP);
            let y = sigma * dt.sqrt() * z;
            rv.acc.updates[j - 1].apply(&state, y, dt, &mut next);
            std::mem::swap(&mut state, &mut next);
            record(&mut core[j], &state);
        }
    }

    let mut out = Vec::with_capacity(m + 1);
    for j in 0..=m {
        let mut level = Vec::with_capacity(dim);
        for i in 0..dim {
            let (hlo, hhi) = hard[j][i];
            let (clo, chi) = core[j][i];
            let pad = 0.5 * (chi - clo) + 0.25;
            let mut lo = (clo - pad).max(hlo);
            let mut hi = (chi + pad).min(hhi);
            if let Some(explicit) = &res.explicit_box {
                let (elo, ehi) = explicit[i];
                // The reachable core must fit the supplied box.
                if clo < elo - 1e-9 || chi > ehi + 1e-9 {
                    return Err(GcalcError::Config(format!(
                        "grid escape: component {i} reaches [{clo}, {chi}] at level {j}, \
                         outside the supplied box [{elo}, {ehi}]"
                    )));
                }
                lo = lo.max(elo);
                hi = hi.min(ehi);
            }
            level.push(AxisBounds { lo, hi, core_lo: clo.max(lo), core_hi: chi.min(hi) });
        }
        out.push(level);
    }
    Ok(out)
}

fn axes_for_level(bounds: &[AxisBounds], res: &DpResolution) -> Vec<AxisGrid> {
    let live = bounds.iter().filter(|b| !b.is_degenerate()).count();
    let points = res.points_for(live);
    bounds
        .iter()
        .map(|b| {
            if b.is_degenerate() {
                AxisGrid::degenerate(0.5 * (b.lo + b.hi))
            } else {
                AxisGrid { lo: b.lo, hi: b.hi, n: points, core_lo: b.core_lo, core_hi: b.core_hi }
            }
        })
        .collect()
}

fn grid_points(axes: &[AxisGrid]) -> Vec<Vec<f64>> {
    let mut pts: Vec<Vec<f64>> = vec![vec![]];
    for axis in axes {
        let mut next = Vec::with_capacity(pts.len() * axis.n);
        for p in &pts {
            for i in 0..axis.n {
                let mut q = p.clone();
                q.push(axis.point(i));
                next.push(q);
            }
        }
        pts = next;
    }
    pts
}

/// Conditional value table at `level`, computed by the backward DP.
pub fn conditional(
    rv: &CylinderRV,
    level: usize,
    params: GParams,
    res: &DpResolution,
) -> Result<ValueTable> {
    let m = rv.steps();
    if level > m {
        return Err(GcalcError::Parameter(format!(
            "conditioning level {level} beyond the partition's {m} steps"
        )));
    }

    // Inner solve geometry per step.
    let mut inner: Vec<(SpaceGrid, f64)> = Vec::with_capacity(m);
    for j in 1..=m {
        let dt_j = rv.partition.dt(j);
        let grid = SpaceGrid::for_horizon(0.0, dt_j, INNER_MARGIN, res.inner_dx)?;
        let dt_inner = res.inner_dt_factor * res.inner_dx * res.inner_dx;
        inner.push((grid, dt_inner));
    }
    let half_widths: Vec<f64> = inner.iter().map(|(g, _)| g.half_width()).collect();
    let boxes = compute_boxes(rv, params, res, &half_widths)?;

    if level == m {
        // Terminal level: sample g exactly.
        let axes = axes_for_level(&boxes[m], res);
        let values: Vec<f64> =
            grid_points(&axes).iter().map(|a| rv.acc.terminal.eval(a)).collect();
        return Ok(ValueTable { level: m, axes, values });
    }

    let dim = rv.acc.dim;
    let mut table: Option<ValueTable> = None;
    for j in (level..m).rev() {
        let axes = axes_for_level(&boxes[j], res);
        let points = grid_points(&axes);
        let (grid, dt_inner) = &inner[j];
        let dt_step = rv.partition.dt(j + 1);
        let step = &rv.acc.updates[j];
        let next_table = table.as_ref();
        let values: Result<Vec<f64>> = points
            .par_iter()
            .map(|a| {
                let initial = |y: f64| {
                    let mut out = [0.0f64; MAX_ACC_DIM];
                    step.apply(a, y, dt_step, &mut out[..dim]);
                    match next_table {
                        Some(t) => t.eval(&out[..dim]),
                        None => rv.acc.terminal.eval(&out[..dim]),
                    }
                };
                solve_center_value(initial, INNER_MARGIN, dt_step, params, grid, *dt_inner)
            })
            .collect();
        table = Some(ValueTable { level: j, axes, values: values? });
    }
    Ok(table.expect("at least one backward level"))
}

/// G-expectation of a cylinder variable: the level-0 value at the initial
/// accumulator state.
pub fn expect(rv: &CylinderRV, params: GParams, res: &DpResolution) -> Result<f64> {
    let v0 = conditional(rv, 0, params, res)?;
    debug_assert_eq!(v0.len(), 1);
    Ok(v0.values[0])
}

/// Tower-property residual: condition at t_idx, wrap the resulting table as
/// a terminal map, condition again at s_idx, and compare with conditioning
/// directly at s_idx. Sup-norm over the visited grid.
pub fn check_tower(
    rv: &CylinderRV,
    s_idx: usize,
    t_idx: usize,
    params: GParams,
    res: &DpResolution,
) -> Result<f64> {
    if s_idx > t_idx {
        return Err(GcalcError::Parameter("tower check needs s_idx <= t_idx".into()));
    }
    let vt = conditional(rv, t_idx, params, res)?;
    let derived = CylinderRV::new(
        rv.partition.prefix(t_idx)?,
        AccumulatorSpec {
            dim: rv.acc.dim,
            init: rv.acc.init.clone(),
            updates: rv.acc.updates[..t_idx].to_vec(),
            terminal: Terminal::Table { table: vt },
        },
    )?;
    let direct = conditional(rv, s_idx, params, res)?;
    let indirect = conditional(&derived, s_idx, params, res)?;
    Ok(direct.core_sup_distance(&indirect))
}

/// |E[X+Y] - E[X] - E[Y]| for a Y certified to have symmetric mean.
pub fn check_special_additivity(
    x: &CylinderRV,
    y: &CylinderRV,
    params: GParams,
    res: &DpResolution,
) -> Result<f64> {
    let both = combine_sum(x, y)?;
    let exy = expect(&both, params, res)?;
    let ex = expect(x, params, res)?;
    let ey = expect(y, params, res)?;
    Ok((exy - ex - ey).abs())
}

/// Raw-variable oracle for m <= 3: the same backward recursion carried out
/// per increment coordinate on a tensor grid, entirely bypassing the
/// accumulator state space. Exponential in m, hence the cap.
pub fn tensor_expect(
    rv: &CylinderRV,
    params: GParams,
    res: &DpResolution,
    points_per_axis: usize,
) -> Result<f64> {
    let m = rv.steps();
    if m > 3 {
        return Err(GcalcError::Config(format!(
            "tensor oracle supports at most 3 steps, got {m}"
        )));
    }
    if points_per_axis < 2 {
        return Err(GcalcError::Parameter("tensor oracle needs >= 2 points per axis".into()));
    }

    let mut inner: Vec<(SpaceGrid, f64)> = Vec::with_capacity(m);
    for j in 1..=m {
        let dt_j = rv.partition.dt(j);
        let grid = SpaceGrid::for_horizon(0.0, dt_j, INNER_MARGIN, res.inner_dx)?;
        inner.push((grid, res.inner_dt_factor * res.inner_dx * res.inner_dx));
    }

    // Increment axes: the step-j coordinate ranges over the inner domain.
    let axes: Vec<AxisGrid> = inner
        .iter()
        .map(|(g, _)| AxisGrid {
            lo: -g.half_width(),
            hi: g.half_width(),
            n: points_per_axis,
            core_lo: -g.half_width(),
            core_hi: g.half_width(),
        })
        .collect();

    // psi_j lives on the first j increment coordinates.
    let mut psi: Option<ValueTable> = None;
    for j in (0..m).rev() {
        let level_axes: Vec<AxisGrid> = axes[..j].to_vec();
        let points = grid_points(&level_axes);
        let (grid, dt_inner) = &inner[j];
        let dt_step = rv.partition.dt(j + 1);
        let prev = psi.as_ref();
        let values: Result<Vec<f64>> = points
            .par_iter()
            .map(|xs| {
                let initial = |y: f64| -> f64 {
                    match prev {
                        Some(t) => {
                            let mut q = xs.clone();
                            q.push(y);
                            t.eval(&q)
                        }
                        None => {
                            let mut q = xs.clone();
                            q.push(y);
                            rv.value_of_increments(&q).expect("arity checked above")
                        }
                    }
                };
                solve_center_value(initial, INNER_MARGIN, dt_step, params, grid, *dt_inner)
            })
            .collect();
        psi = Some(ValueTable { level: j, axes: level_axes, values: values? });
    }
    Ok(psi.expect("at least one level").values[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expectation::{ComponentUpdate, Partition, StepUpdate};
    use crate::gnormal::{pg_t, GNormalQuery, Resolution};
    use crate::payoff::Payoff;

    fn rv_b1_squared() -> CylinderRV {
        CylinderRV::function_of_terminal_b(
            Partition::uniform(1.0, 1).unwrap(),
            Payoff::power(2),
        )
        .unwrap()
    }

    #[test]
    fn one_step_collapses_to_the_distribution_functional() {
        let params = GParams::new(0.5).unwrap();
        let pde = Resolution::coarse();
        let dp = DpResolution::matching(pde.dx, pde.dt);
        let via_dp = expect(&rv_b1_squared(), params, &dp).unwrap();
        let via_pg = pg_t(&GNormalQuery {
            payoff: Payoff::power(2),
            t: 1.0,
            x: 0.0,
            params,
            resolution: pde,
        })
        .unwrap();
        assert!(
            (via_dp - via_pg).abs() <= 1e-12,
            "dp {via_dp} vs pg {via_pg}: identical code paths must collapse"
        );
    }

    #[test]
    fn squared_terminal_value_is_t() {
        let params = GParams::new(0.5).unwrap();
        let v = expect(&rv_b1_squared(), params, &DpResolution::coarse()).unwrap();
        assert!((v - 1.0).abs() < 5e-3, "got {v}");
        let neg = rv_b1_squared().negated();
        let v = expect(&neg, params, &DpResolution::coarse()).unwrap();
        assert!((v + 0.25).abs() < 5e-3, "got {v}");
    }

    #[test]
    fn sum_of_squared_increments_has_mean_t() {
        let rv = CylinderRV::qv_approximant(1.0, 2, Terminal::Power { index: 0, n: 1 }).unwrap();
        let params = GParams::new(0.5).unwrap();
        let v = expect(&rv, params, &DpResolution::coarse()).unwrap();
        assert!((v - 1.0).abs() < 1e-2, "got {v}");
    }

    #[test]
    fn nonnegative_weight_squares_match_the_conditional_formula() {
        // E[xi(B_s) (B_1 - B_s)^2] = (1 - s) E[xi(B_s)] for xi >= 0.
        let s = 0.5;
        let partition = Partition::new(vec![0.0, s, 1.0]).unwrap();
        let xi = Payoff::call(0.0);
        let rv = CylinderRV::new(
            partition,
            AccumulatorSpec {
                dim: 2,
                init: vec![0.0, 0.0],
                updates: vec![
                    StepUpdate::of(vec![ComponentUpdate::AddIncrement, ComponentUpdate::Hold]),
                    StepUpdate::of(vec![ComponentUpdate::Hold, ComponentUpdate::AddSquare]),
                ],
                terminal: Terminal::Product {
                    factors: vec![
                        super::super::Factor { index: 0, payoff: xi.clone() },
                        super::super::Factor { index: 1, payoff: Payoff::identity() },
                    ],
                },
            },
        )
        .unwrap();
        let params = GParams::new(0.5).unwrap();
        let lhs = expect(&rv, params, &DpResolution::coarse()).unwrap();
        let exi = pg_t(&GNormalQuery {
            payoff: xi,
            t: s,
            x: 0.0,
            params,
            resolution: Resolution::coarse(),
        })
        .unwrap();
        let rhs = (1.0 - s) * exi;
        assert!((lhs - rhs).abs() < 2e-2, "lhs {lhs} rhs {rhs}");
    }

    #[test]
    fn conditional_of_square_difference_is_time_difference() {
        // E[B_1^2 - B_s^2 | F_s] = 1 - s along realized states.
        let s = 0.5;
        let partition = Partition::new(vec![0.0, s, 1.0]).unwrap();
        let rv = CylinderRV::new(
            partition,
            AccumulatorSpec {
                dim: 2,
                init: vec![0.0, 0.0],
                updates: vec![
                    StepUpdate::of(vec![
                        ComponentUpdate::AddIncrement,
                        ComponentUpdate::AddIncrement,
                    ]),
                    StepUpdate::of(vec![ComponentUpdate::AddIncrement, ComponentUpdate::Hold]),
                ],
                terminal: Terminal::LinComb {
                    terms: vec![
                        super::super::WeightedTerminal {
                            coeff: 1.0,
                            term: Terminal::Power { index: 0, n: 2 },
                        },
                        super::super::WeightedTerminal {
                            coeff: -1.0,
                            term: Terminal::Power { index: 1, n: 2 },
                        },
                    ],
                },
            },
        )
        .unwrap();
        let params = GParams::new(0.5).unwrap();
        let table = conditional(&rv, 1, params, &DpResolution::coarse()).unwrap();
        // realized states sit on the diagonal a0 = a1 = B_s
        for b in [-1.5, -0.7, 0.0, 0.4, 1.2] {
            let v = table.eval(&[b, b]);
            assert!((v - 0.5).abs() < 2e-2, "at B_s={b}: {v}");
        }
    }

    #[test]
    fn tower_property_holds() {
        let partition = Partition::uniform(1.0, 2).unwrap();
        let rv =
            CylinderRV::function_of_terminal_b(partition, Payoff::power(4)).unwrap();
        let params = GParams::new(0.5).unwrap();
        let r = check_tower(&rv, 0, 1, params, &DpResolution::coarse()).unwrap();
        assert!(r <= 2e-2, "tower residual {r}");
        // idempotent at s = t
        let r = check_tower(&rv, 1, 1, params, &DpResolution::coarse()).unwrap();
        assert!(r <= 1e-12, "idempotence residual {r}");
    }

    #[test]
    fn refinement_with_increment_updates_is_insensitive() {
        let params = GParams::new(0.25).unwrap();
        let res = DpResolution::coarse();
        let phi = Payoff::call(0.2);
        let coarse =
            CylinderRV::function_of_terminal_b(Partition::uniform(1.0, 1).unwrap(), phi.clone())
                .unwrap();
        let fine = CylinderRV::function_of_terminal_b(
            Partition::new(vec![0.0, 0.4, 1.0]).unwrap(),
            phi,
        )
        .unwrap();
        let a = expect(&coarse, params, &res).unwrap();
        let b = expect(&fine, params, &res).unwrap();
        assert!((a - b).abs() < 1e-2, "split changed the value: {a} vs {b}");
    }

    #[test]
    fn tensor_oracle_agrees_with_accumulator_dp() {
        let rv = CylinderRV::qv_approximant(1.0, 2, Terminal::Power { index: 0, n: 1 }).unwrap();
        let params = GParams::new(0.5).unwrap();
        let res = DpResolution::coarse();
        let dp = expect(&rv, params, &res).unwrap();
        let oracle = tensor_expect(&rv, params, &res, 129).unwrap();
        assert!((dp - oracle).abs() < 2e-2, "dp {dp} vs oracle {oracle}");
    }

    #[test]
    fn explicit_box_escape_is_a_configuration_error() {
        let res = DpResolution {
            explicit_box: Some(vec![(-0.5, 0.5)]),
            ..DpResolution::coarse()
        };
        let err = expect(&rv_b1_squared(), GParams::new(0.5).unwrap(), &res);
        assert!(matches!(err, Err(GcalcError::Config(_))), "got {err:?}");
    }

    #[test]
    fn numerical_axioms_on_cylinder_variables() {
        let params = GParams::new(0.5).unwrap();
        let res = DpResolution::coarse();
        let p = Partition::uniform(1.0, 1).unwrap();
        let x = CylinderRV::function_of_terminal_b(p.clone(), Payoff::abs_power(1)).unwrap();
        let y = CylinderRV::function_of_terminal_b(p, Payoff::sin(1.0)).unwrap();
        let ex = expect(&x, params, &res).unwrap();
        let ey = expect(&y, params, &res).unwrap();
        // (c) sub-additivity
        let exy = expect(&combine_sum(&x, &y).unwrap(), params, &res).unwrap();
        assert!(exy <= ex + ey + 2e-2, "subadditivity: {exy} vs {}", ex + ey);
        // (d) positive homogeneity
        let e2x = expect(&x.scaled(2.0), params, &res).unwrap();
        assert!((e2x - 2.0 * ex).abs() <= 2e-2);
        let e0 = expect(&x.scaled(0.0), params, &res).unwrap();
        assert!(e0.abs() <= 1e-12);
        // (e) translation
        let esh = expect(&x.shifted(0.8), params, &res).unwrap();
        assert!((esh - (ex + 0.8)).abs() <= 2e-2);
        // (a) monotonicity: |B| >= B pointwise
        let eb = expect(
            &CylinderRV::function_of_terminal_b(
                Partition::uniform(1.0, 1).unwrap(),
                Payoff::identity(),
            )
            .unwrap(),
            params,
            &res,
        )
        .unwrap();
        assert!(ex >= eb - 2e-2);
    }
}
