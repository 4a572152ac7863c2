//! Pathwise machinery: volatility-controlled scenario paths, stochastic
//! integrals of simple processes, quadratic variation, and the Ito-formula
//! residual checker.
//!
//! Scenario paths are not the definition of the expectation; they serve as
//! lower bounds and as fixtures for the pathwise algebraic identities. The
//! expectation of path functionals goes through the accumulator dynamic
//! program of the `expectation` module.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{GcalcError, Result};
use crate::expectation::{
    expect, AccumulatorSpec, ComponentUpdate, CylinderRV, DpResolution, Factor, Partition,
    StepUpdate, Terminal, WeightedTerminal,
};
use crate::heat::GParams;
use crate::payoff::Payoff;
use crate::util::standard_normal;

/// Finite-difference step for the bang-bang policy's curvature probe.
const BANGBANG_H: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Driver {
    Gaussian,
    Rademacher,
}

/// Volatility control along a path.
#[derive(Debug, Clone)]
pub enum Policy {
    /// Fixed sigma in [sigma0, 1].
    Constant(f64),
    /// Extremal control: sigma = 1 where the supplied value function has
    /// nonnegative discrete curvature at the current state, sigma0 else.
    BangBang(Payoff),
    /// Fresh uniform draw from [sigma0, 1] each step.
    Random,
}

/// One discretized path of G-Brownian motion with its control and
/// quadratic-variation records.
#[derive(Debug, Clone)]
pub struct ScenarioPath {
    t: f64,
    dt: f64,
    /// sigma_k per step.
    controls: Vec<f64>,
    /// dB_k per step.
    increments: Vec<f64>,
    /// Cumulative B, length steps + 1, starts at 0.
    b: Vec<f64>,
    /// Cumulative sum of sigma_k^2 dt, length steps + 1.
    qv: Vec<f64>,
}

impl ScenarioPath {
    pub fn steps(&self) -> usize {
        self.controls.len()
    }

    pub fn horizon(&self) -> f64 {
        self.t
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn controls(&self) -> &[f64] {
        &self.controls
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn qv(&self) -> &[f64] {
        &self.qv
    }

    /// Merge `factor` consecutive steps into one. B and qv are subsampled;
    /// the coarse control is the root-mean-square of the fine ones, which
    /// stays inside [sigma0, 1].
    pub fn coarsen(&self, factor: usize) -> Result<ScenarioPath> {
        if factor == 0 || self.steps() % factor != 0 {
            return Err(GcalcError::Parameter(format!(
                "coarsening factor {factor} does not divide {} steps",
                self.steps()
            )));
        }
        let steps = self.steps() / factor;
        let dt = self.dt * factor as f64;
        let b: Vec<f64> = (0..=steps).map(|k| self.b[k * factor]).collect();
        let qv: Vec<f64> = (0..=steps).map(|k| self.qv[k * factor]).collect();
        let increments: Vec<f64> = (0..steps).map(|k| b[k + 1] - b[k]).collect();
        let controls: Vec<f64> = (0..steps).map(|k| ((qv[k + 1] - qv[k]) / dt).sqrt()).collect();
        Ok(ScenarioPath { t: self.t, dt, controls, increments, b, qv })
    }

    /// Index of grid time `time`, if it is one.
    fn grid_index(&self, time: f64) -> Result<usize> {
        let pos = time / self.dt;
        let idx = pos.round() as usize;
        if idx > self.steps() || (time - idx as f64 * self.dt).abs() > 1e-9 * (1.0 + self.t) {
            return Err(GcalcError::Shape(format!(
                "time {time} is not a grid point of the path (dt = {})",
                self.dt
            )));
        }
        Ok(idx)
    }
}

/// Simulate one path. Deterministic given the seed.
pub fn simulate_path(
    policy: &Policy,
    params: GParams,
    t: f64,
    steps: usize,
    driver: Driver,
    seed: u64,
) -> Result<ScenarioPath> {
    if steps == 0 {
        return Err(GcalcError::Parameter("need at least one step".into()));
    }
    if !(t > 0.0) {
        return Err(GcalcError::Parameter(format!("horizon must be positive, got {t}")));
    }
    let sigma0 = params.sigma0();
    if let Policy::Constant(s) = policy {
        if *s < sigma0 - 1e-12 || *s > 1.0 + 1e-12 {
            return Err(GcalcError::Parameter(format!(
                "constant control {s} outside [{sigma0}, 1]"
            )));
        }
    }

    let dt = t / steps as f64;
    let sqrt_dt = dt.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut controls = Vec::with_capacity(steps);
    let mut increments = Vec::with_capacity(steps);
    let mut b = Vec::with_capacity(steps + 1);
    let mut qv = Vec::with_capacity(steps + 1);
    b.push(0.0);
    qv.push(0.0);
    for k in 0..steps {
        let sigma = match policy {
            Policy::Constant(s) => *s,
            Policy::Random => rng.gen_range(sigma0..=1.0),
            Policy::BangBang(value_fn) => {
                let x = b[k];
                let d2 = value_fn.eval(x + BANGBANG_H) - 2.0 * value_fn.eval(x)
                    + value_fn.eval(x - BANGBANG_H);
                if d2 >= 0.0 {
                    1.0
                } else {
                    sigma0
                }
            }
        };
        let z = match driver {
            Driver::Gaussian => standard_normal(&mut rng),
            Driver::Rademacher => {
                if rng.gen_bool(0.5) {
                    1.0
                } else {
                    -1.0
                }
            }
        };
        let db = sigma * sqrt_dt * z;
        controls.push(sigma);
        increments.push(db);
        b.push(b[k] + db);
        qv.push(qv[k] + sigma * sigma * dt);
    }
    Ok(ScenarioPath { t, dt, controls, increments, b, qv })
}

/// Step coefficient of a simple process: xi_j as a function of the path
/// state at t_j, so the process is adapted by construction.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficient {
    Const(f64),
    /// phi(B_{t_j})
    OfB(Payoff),
    /// phi(<B>_{t_j})
    OfQv(Payoff),
}

/// Piecewise-constant adapted integrand on a partition of [0, T].
#[derive(Debug, Clone)]
pub struct SimpleProcess {
    pub partition: Partition,
    pub coefficients: Vec<Coefficient>,
}

impl SimpleProcess {
    pub fn new(partition: Partition, coefficients: Vec<Coefficient>) -> Result<Self> {
        if coefficients.len() != partition.steps() {
            return Err(GcalcError::Shape(format!(
                "{} coefficients for {} steps",
                coefficients.len(),
                partition.steps()
            )));
        }
        Ok(SimpleProcess { partition, coefficients })
    }

    pub fn constant(partition: Partition, c: f64) -> Result<Self> {
        let n = partition.steps();
        SimpleProcess::new(partition, vec![Coefficient::Const(c); n])
    }

    /// xi_j = phi(B_{t_j}) on every step.
    pub fn of_b(partition: Partition, phi: Payoff) -> Result<Self> {
        let n = partition.steps();
        SimpleProcess::new(partition, vec![Coefficient::OfB(phi); n])
    }

    /// Path grid indices of the partition times; errors if misaligned.
    fn alignment(&self, path: &ScenarioPath) -> Result<Vec<usize>> {
        self.partition.times().iter().map(|t| path.grid_index(*t)).collect()
    }

    fn xi(&self, j: usize, path: &ScenarioPath, idx: &[usize]) -> f64 {
        match &self.coefficients[j] {
            Coefficient::Const(c) => *c,
            Coefficient::OfB(phi) => phi.eval(path.b[idx[j]]),
            Coefficient::OfQv(phi) => phi.eval(path.qv[idx[j]]),
        }
    }
}

/// Sum of xi_j (t_{j+1} - t_j).
pub fn bochner_integral(eta: &SimpleProcess, path: &ScenarioPath) -> Result<f64> {
    let idx = eta.alignment(path)?;
    Ok((0..eta.coefficients.len())
        .map(|j| eta.xi(j, path, &idx) * eta.partition.dt(j + 1))
        .sum())
}

/// Sum of xi_j (B_{t_{j+1}} - B_{t_j}).
pub fn ito_integral(eta: &SimpleProcess, path: &ScenarioPath) -> Result<f64> {
    let idx = eta.alignment(path)?;
    Ok((0..eta.coefficients.len())
        .map(|j| eta.xi(j, path, &idx) * (path.b[idx[j + 1]] - path.b[idx[j]]))
        .sum())
}

/// Sum of xi_j (<B>_{t_{j+1}} - <B>_{t_j}).
pub fn qv_integral(eta: &SimpleProcess, path: &ScenarioPath) -> Result<f64> {
    let idx = eta.alignment(path)?;
    Ok((0..eta.coefficients.len())
        .map(|j| eta.xi(j, path, &idx) * (path.qv[idx[j + 1]] - path.qv[idx[j]]))
        .sum())
}

/// Expectations of the Ito-integral functionals of a simple process.
#[derive(Debug, Clone, Copy)]
pub struct ItoFunctionals {
    /// E[I] where I is the stochastic integral; zero in theory.
    pub mean: f64,
    /// E[-I].
    pub mean_neg: f64,
    /// E[I^2].
    pub second_moment: f64,
    /// E of the sum of xi_j^2 (dB_j)^2: the d<B> form of the isometry.
    pub qv_second_form: f64,
}

fn integral_updates(eta: &SimpleProcess, squared: bool) -> Result<Vec<ComponentUpdate>> {
    eta.coefficients
        .iter()
        .map(|c| {
            Ok(match (c, squared) {
                (Coefficient::Const(v), false) => ComponentUpdate::AddScaled { c: *v },
                (Coefficient::Const(v), true) => ComponentUpdate::AddWeightedSquare {
                    with: 0,
                    weight: Payoff::constant(*v),
                    squared: true,
                },
                (Coefficient::OfB(phi), false) => {
                    ComponentUpdate::AddWeighted { with: 0, weight: phi.clone() }
                }
                (Coefficient::OfB(phi), true) => ComponentUpdate::AddWeightedSquare {
                    with: 0,
                    weight: phi.clone(),
                    squared: true,
                },
                (Coefficient::OfQv(_), _) => {
                    return Err(GcalcError::Config(
                        "quadratic-variation coefficients need a third accumulator \
                         component; only constants and functions of B are supported here"
                            .into(),
                    ))
                }
            })
        })
        .collect()
}

/// The stochastic integral of `eta` as a cylinder variable, closed by
/// `terminal` acting on the integral component.
fn integral_rv(eta: &SimpleProcess, squared: bool, terminal: Terminal) -> Result<CylinderRV> {
    let updates_integral = integral_updates(eta, squared)?;
    let needs_b = eta.coefficients.iter().any(|c| matches!(c, Coefficient::OfB(_)));
    if needs_b {
        // Component 0 carries B, component 1 the integral.
        let updates: Vec<StepUpdate> = updates_integral
            .into_iter()
            .map(|u| StepUpdate::of(vec![ComponentUpdate::AddIncrement, u]))
            .collect();
        CylinderRV::new(
            eta.partition.clone(),
            AccumulatorSpec {
                dim: 2,
                init: vec![0.0, 0.0],
                updates,
                terminal: shift_terminal(terminal),
            },
        )
    } else {
        let updates: Vec<StepUpdate> =
            updates_integral.into_iter().map(StepUpdate::single).collect();
        CylinderRV::new(
            eta.partition.clone(),
            AccumulatorSpec { dim: 1, init: vec![0.0], updates, terminal },
        )
    }
}

fn shift_terminal(t: Terminal) -> Terminal {
    match t {
        Terminal::Power { index: 0, n } => Terminal::Power { index: 1, n },
        Terminal::Payoff { index: 0, payoff } => Terminal::Payoff { index: 1, payoff },
        Terminal::LinComb { terms } => Terminal::LinComb {
            terms: terms
                .into_iter()
                .map(|w| WeightedTerminal { coeff: w.coeff, term: shift_terminal(w.term) })
                .collect(),
        },
        other => other,
    }
}

/// Mean, negated mean, second moment and the isometry right-hand side of
/// the stochastic integral, all through the accumulator dynamic program.
pub fn expect_ito_functionals(
    eta: &SimpleProcess,
    params: GParams,
    res: &DpResolution,
) -> Result<ItoFunctionals> {
    let mean_rv = integral_rv(eta, false, Terminal::Power { index: 0, n: 1 })?;
    let mean_neg_rv = mean_rv.scaled(-1.0);
    let second_rv = integral_rv(eta, false, Terminal::Power { index: 0, n: 2 })?;
    let qv_form_rv = integral_rv(eta, true, Terminal::Power { index: 0, n: 1 })?;
    Ok(ItoFunctionals {
        mean: expect(&mean_rv, params, res)?,
        mean_neg: expect(&mean_neg_rv, params, res)?,
        second_moment: expect(&second_rv, params, res)?,
        qv_second_form: expect(&qv_form_rv, params, res)?,
    })
}

/// Right side of the moment bound E[I^2] <= sum over j of E[xi_j^2] dt_j.
pub fn e2_bound(eta: &SimpleProcess, params: GParams, res: &DpResolution) -> Result<f64> {
    let mut total = 0.0;
    for j in 0..eta.coefficients.len() {
        let dt = eta.partition.dt(j + 1);
        let sq = match &eta.coefficients[j] {
            Coefficient::Const(c) => c * c,
            Coefficient::OfB(phi) => {
                if j == 0 {
                    let v = phi.eval(0.0);
                    v * v
                } else {
                    let prefix = eta.partition.prefix(j)?;
                    let steps = prefix.steps();
                    let rv = CylinderRV::new(
                        prefix,
                        AccumulatorSpec {
                            dim: 1,
                            init: vec![0.0],
                            updates: vec![
                                StepUpdate::single(ComponentUpdate::AddIncrement);
                                steps
                            ],
                            terminal: Terminal::Product {
                                factors: vec![
                                    Factor { index: 0, payoff: phi.clone() },
                                    Factor { index: 0, payoff: phi.clone() },
                                ],
                            },
                        },
                    )?;
                    expect(&rv, params, res)?
                }
            }
            Coefficient::OfQv(_) => {
                return Err(GcalcError::Config(
                    "quadratic-variation coefficients are not supported in expectations".into(),
                ))
            }
        };
        total += sq * dt;
    }
    Ok(total)
}

/// Moments of the K-refinement quadratic-variation approximant over [0, t].
#[derive(Debug, Clone, Copy)]
pub struct QvMoments {
    /// E[A_K]; equals t in theory.
    pub m1: f64,
    /// E[-A_K]; equals -sigma0^2 t.
    pub m1_neg: f64,
    /// E[A_K^2]; equals t^2 (1 + 2/K) for the approximant.
    pub m2: f64,
}

pub fn qv_moments(t: f64, k: usize, params: GParams, res: &DpResolution) -> Result<QvMoments> {
    let m1_rv = CylinderRV::qv_approximant(t, k, Terminal::Power { index: 0, n: 1 })?;
    let m1_neg_rv = m1_rv.scaled(-1.0);
    let m2_rv = CylinderRV::qv_approximant(t, k, Terminal::Power { index: 0, n: 2 })?;
    Ok(QvMoments {
        m1: expect(&m1_rv, params, res)?,
        m1_neg: expect(&m1_neg_rv, params, res)?,
        m2: expect(&m2_rv, params, res)?,
    })
}

/// Twice-differentiable transform for the Ito formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transform {
    /// x^n, n >= 1
    Power(u32),
    /// sin(omega x)
    Sin(f64),
}

impl Transform {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Transform::Power(n) => x.powi(*n as i32),
            Transform::Sin(w) => (w * x).sin(),
        }
    }

    pub fn d1(&self, x: f64) -> f64 {
        match self {
            Transform::Power(n) => *n as f64 * x.powi(*n as i32 - 1),
            Transform::Sin(w) => w * (w * x).cos(),
        }
    }

    pub fn d2(&self, x: f64) -> f64 {
        match self {
            Transform::Power(n) => {
                if *n < 2 {
                    0.0
                } else {
                    (*n * (*n - 1)) as f64 * x.powi(*n as i32 - 2)
                }
            }
            Transform::Sin(w) => -w * w * (w * x).sin(),
        }
    }
}

/// How the d<B> increments entering the Ito residual are realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QvMode {
    /// Per-step (dB_k)^2: the residual is a pure discretization statement.
    #[default]
    IncrementSquared,
    /// Per-step sigma_k^2 dt: adds a martingale error term of the same order.
    ControlVariance,
}

/// dX = alpha(X) dt + eta(X) d<B> + beta(X) dB transformed through phi.
#[derive(Debug, Clone)]
pub struct ItoProcessSpec {
    pub x0: f64,
    pub alpha: Payoff,
    pub eta: Payoff,
    pub beta: Payoff,
    pub phi: Transform,
    pub qv_mode: QvMode,
}

impl ItoProcessSpec {
    /// The bare transform of B itself: alpha = eta = 0, beta = 1.
    pub fn of_b(phi: Transform) -> Self {
        ItoProcessSpec {
            x0: 0.0,
            alpha: Payoff::constant(0.0),
            eta: Payoff::constant(0.0),
            beta: Payoff::constant(1.0),
            phi,
            qv_mode: QvMode::IncrementSquared,
        }
    }
}

/// |phi(X_T) - phi(X_0) - sum of the three left-point integral terms|:
/// the defect of the Ito formula at this discretization.
pub fn ito_formula_residual(spec: &ItoProcessSpec, path: &ScenarioPath) -> f64 {
    let dt = path.dt();
    let mut x = spec.x0;
    let mut rhs = 0.0;
    for k in 0..path.steps() {
        let db = path.increments[k];
        let dqv = match spec.qv_mode {
            QvMode::IncrementSquared => db * db,
            QvMode::ControlVariance => path.qv[k + 1] - path.qv[k],
        };
        let (a, e, b) = (spec.alpha.eval(x), spec.eta.eval(x), spec.beta.eval(x));
        let d1 = spec.phi.d1(x);
        let d2 = spec.phi.d2(x);
        rhs += d1 * b * db + d1 * a * dt + (d1 * e + 0.5 * d2 * b * b) * dqv;
        x += a * dt + e * dqv + b * db;
    }
    (spec.phi.eval(x) - spec.phi.eval(spec.x0) - rhs).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(s: f64) -> GParams {
        GParams::new(s).unwrap()
    }

    #[test]
    fn constant_controls_pin_the_quadratic_variation() {
        let p = simulate_path(&Policy::Constant(1.0), params(0.5), 1.0, 128, Driver::Gaussian, 7)
            .unwrap();
        assert!((p.qv()[128] - 1.0).abs() < 1e-12);
        let p = simulate_path(&Policy::Constant(0.5), params(0.5), 1.0, 128, Driver::Gaussian, 7)
            .unwrap();
        assert!((p.qv()[128] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn qv_bounds_hold_pathwise() {
        for seed in 0..20 {
            let p = simulate_path(&Policy::Random, params(0.25), 1.0, 64, Driver::Gaussian, seed)
                .unwrap();
            for k in 0..=64 {
                let t = p.time(k);
                assert!(p.qv()[k] >= 0.0625 * t - 1e-12);
                assert!(p.qv()[k] <= t + 1e-12);
            }
            assert_eq!(p.b()[0], 0.0);
        }
    }

    #[test]
    fn bangbang_on_convex_value_function_takes_the_top_branch() {
        let p = simulate_path(
            &Policy::BangBang(Payoff::power(2)),
            params(0.25),
            1.0,
            64,
            Driver::Gaussian,
            3,
        )
        .unwrap();
        assert!(p.controls().iter().all(|s| *s == 1.0));
    }

    #[test]
    fn constant_control_outside_range_is_rejected() {
        assert!(simulate_path(&Policy::Constant(0.1), params(0.5), 1.0, 8, Driver::Gaussian, 0)
            .is_err());
    }

    #[test]
    fn square_identity_holds_at_every_grid_time() {
        for seed in 0..10 {
            let p = simulate_path(&Policy::Random, params(0.5), 1.0, 256, Driver::Gaussian, seed)
                .unwrap();
            let mut riemann = 0.0;
            let mut qv_sum = 0.0;
            for k in 0..p.steps() {
                riemann += p.b()[k] * p.increments()[k];
                qv_sum += p.increments()[k] * p.increments()[k];
                let lhs = p.b()[k + 1] * p.b()[k + 1];
                assert!(
                    (lhs - 2.0 * riemann - qv_sum).abs() <= 1e-12,
                    "seed {seed}, step {k}"
                );
            }
        }
    }

    #[test]
    fn integrals_of_simple_processes() {
        let p = simulate_path(&Policy::Constant(1.0), params(0.5), 1.0, 64, Driver::Gaussian, 11)
            .unwrap();
        let partition = Partition::uniform(1.0, 4).unwrap();

        let ones = SimpleProcess::constant(partition.clone(), 1.0).unwrap();
        assert!((bochner_integral(&ones, &p).unwrap() - 1.0).abs() < 1e-15);
        assert!((ito_integral(&ones, &p).unwrap() - p.b()[64]).abs() < 1e-12);
        assert!((qv_integral(&ones, &p).unwrap() - p.qv()[64]).abs() < 1e-12);

        // left Riemann sum recomputed independently
        let of_b = SimpleProcess::of_b(partition.clone(), Payoff::identity()).unwrap();
        let direct: f64 = (0..4).map(|j| p.b()[j * 16] * 0.25).sum();
        assert!((bochner_integral(&of_b, &p).unwrap() - direct).abs() < 1e-14);

        // constant-sigma path: d<B> = sigma^2 dt
        let qv_form = qv_integral(&of_b, &p).unwrap();
        assert!((qv_form - bochner_integral(&of_b, &p).unwrap()).abs() < 1e-12);

        // additivity over subintervals via zeroed windows
        let first_half = SimpleProcess::new(
            partition.clone(),
            vec![
                Coefficient::OfB(Payoff::identity()),
                Coefficient::OfB(Payoff::identity()),
                Coefficient::Const(0.0),
                Coefficient::Const(0.0),
            ],
        )
        .unwrap();
        let second_half = SimpleProcess::new(
            partition,
            vec![
                Coefficient::Const(0.0),
                Coefficient::Const(0.0),
                Coefficient::OfB(Payoff::identity()),
                Coefficient::OfB(Payoff::identity()),
            ],
        )
        .unwrap();
        let whole = ito_integral(&of_b, &p).unwrap();
        let split =
            ito_integral(&first_half, &p).unwrap() + ito_integral(&second_half, &p).unwrap();
        assert!((whole - split).abs() < 1e-13);
    }

    #[test]
    fn misaligned_partition_is_a_shape_error() {
        let p = simulate_path(&Policy::Constant(1.0), params(0.5), 1.0, 10, Driver::Gaussian, 1)
            .unwrap();
        let partition = Partition::uniform(1.0, 4).unwrap(); // 0.25 not on the 0.1 grid
        let eta = SimpleProcess::constant(partition, 1.0).unwrap();
        assert!(matches!(ito_integral(&eta, &p), Err(GcalcError::Shape(_))));
    }

    #[test]
    fn coarsening_preserves_the_records() {
        let p = simulate_path(&Policy::Random, params(0.5), 1.0, 64, Driver::Gaussian, 5).unwrap();
        let c = p.coarsen(4).unwrap();
        assert_eq!(c.steps(), 16);
        assert_eq!(c.b()[16], p.b()[64]);
        assert_eq!(c.qv()[8], p.qv()[32]);
        for s in c.controls() {
            assert!(*s >= 0.5 - 1e-12 && *s <= 1.0 + 1e-12);
        }
        assert!(p.coarsen(7).is_err());
    }

    #[test]
    fn ito_residual_is_algebraically_zero_for_squares() {
        for seed in 0..5 {
            let p = simulate_path(&Policy::Random, params(0.25), 1.0, 512, Driver::Gaussian, seed)
                .unwrap();
            let spec = ItoProcessSpec::of_b(Transform::Power(2));
            let r = ito_formula_residual(&spec, &p);
            assert!(r <= 1e-10, "seed {seed}: residual {r}");
            // first-order transforms have no second-order defect at all
            let spec = ItoProcessSpec::of_b(Transform::Power(1));
            let r = ito_formula_residual(&spec, &p);
            assert!(r <= 1e-12, "seed {seed}: residual {r}");
        }
    }

    #[test]
    fn ito_residual_shrinks_under_refinement() {
        let fine = simulate_path(&Policy::Random, params(0.5), 1.0, 4096, Driver::Gaussian, 17)
            .unwrap();
        let spec = ItoProcessSpec::of_b(Transform::Power(3));
        let r_fine = ito_formula_residual(&spec, &fine);
        let r_coarse = ito_formula_residual(&spec, &fine.coarsen(16).unwrap());
        assert!(
            r_fine < r_coarse,
            "refinement did not shrink the defect: {r_fine} vs {r_coarse}"
        );
    }

    #[test]
    fn expectation_functionals_of_unit_integrand() {
        let partition = Partition::uniform(1.0, 1).unwrap();
        let eta = SimpleProcess::constant(partition, 1.0).unwrap();
        let f = expect_ito_functionals(&eta, params(0.5), &DpResolution::coarse()).unwrap();
        assert!(f.mean.abs() < 2e-2, "mean {}", f.mean);
        assert!(f.mean_neg.abs() < 2e-2, "mean_neg {}", f.mean_neg);
        assert!((f.second_moment - 1.0).abs() < 2e-2, "second {}", f.second_moment);
        assert!(
            (f.second_moment - f.qv_second_form).abs() < 2e-2,
            "isometry defect: {} vs {}",
            f.second_moment,
            f.qv_second_form
        );
        let bound = e2_bound(&eta, params(0.5), &DpResolution::coarse()).unwrap();
        assert!(f.second_moment <= bound + 2e-2);
    }

    #[test]
    fn qv_moment_trend() {
        let q = qv_moments(1.0, 4, params(0.5), &DpResolution::coarse()).unwrap();
        assert!((q.m1 - 1.0).abs() < 2e-2, "m1 {}", q.m1);
        assert!((q.m1_neg + 0.25).abs() < 2e-2, "m1_neg {}", q.m1_neg);
        assert!((q.m2 - 1.5).abs() < 2e-2, "m2 {}", q.m2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn prop_square_identity(seed in 0u64..500, steps in 1usize..128) {
            let p = simulate_path(&Policy::Random, params(0.5), 1.0, steps, Driver::Gaussian, seed).unwrap();
            let n = p.steps();
            let riemann: f64 = (0..n).map(|k| p.b()[k] * p.increments()[k]).sum();
            let qv_sum: f64 = (0..n).map(|k| p.increments()[k] * p.increments()[k]).sum();
            prop_assert!((p.b()[n].powi(2) - 2.0 * riemann - qv_sum).abs() <= 1e-11);
        }

        #[test]
        fn prop_qv_envelope(seed in 0u64..500, sigma0 in 0.0f64..1.0) {
            let p = simulate_path(&Policy::Random, GParams::new(sigma0).unwrap(), 1.0, 32, Driver::Rademacher, seed).unwrap();
            let t = p.horizon();
            prop_assert!(p.qv()[32] >= sigma0 * sigma0 * t - 1e-12);
            prop_assert!(p.qv()[32] <= t + 1e-12);
        }
    }
}
