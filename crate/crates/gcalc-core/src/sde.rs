//! SDEs driven by G-Brownian motion:
//!
//! ```text
//!     X_t = X_0 + int b(X) ds + int h(X) d<B> + int sigma(X) dB
//! ```
//!
//! solved pathwise by left-point Euler steps, and demonstrated well-posed by
//! Picard iteration of the integral map. The abstract second-moment norm is
//! approximated by the max over a finite scenario ensemble; the contraction
//! argument only needs sub-additivity and the integral inequalities of the
//! chosen functional, so the factor-1/2 decay in the exp(-2Ct)-weighted
//! squared norm, C = 3 K^2, is still the quantity under test.

use serde::{Deserialize, Serialize};

use crate::error::{GcalcError, Result};
use crate::heat::GParams;
use crate::paths::{simulate_path, Driver, Policy, ScenarioPath};
use crate::payoff::Payoff;

/// State dimensions stay small; coefficient maps are catalog-closed.
pub const MAX_STATE_DIM: usize = 4;

/// Minimum Euler grid per the solver contract.
pub const MIN_EULER_STEPS: usize = 64;

/// Catalog Lipschitz coefficient map R^n -> R^n with analytically known
/// Lipschitz bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoeffMap {
    Zero,
    Constant {
        c: Vec<f64>,
    },
    /// A x + c
    Affine {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        c: Vec<f64>,
    },
    /// clamp(A x + c, -bound, bound) componentwise
    ClippedLinear {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        c: Vec<f64>,
        bound: f64,
    },
    /// amp_i sin(freq_i x_i) componentwise
    SinBounded {
        amp: Vec<f64>,
        freq: Vec<f64>,
    },
}

fn frobenius(a: &[Vec<f64>]) -> f64 {
    a.iter().flat_map(|row| row.iter()).map(|v| v * v).sum::<f64>().sqrt()
}

fn mat_vec(a: &[Vec<f64>], x: &[f64], c: &[f64], out: &mut [f64]) {
    for (i, row) in a.iter().enumerate() {
        out[i] = c[i] + row.iter().zip(x).map(|(aij, xj)| aij * xj).sum::<f64>();
    }
}

impl CoeffMap {
    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        match self {
            CoeffMap::Zero => out.fill(0.0),
            CoeffMap::Constant { c } => out.copy_from_slice(c),
            CoeffMap::Affine { a, c } => mat_vec(a, x, c, out),
            CoeffMap::ClippedLinear { a, c, bound } => {
                mat_vec(a, x, c, out);
                for v in out.iter_mut() {
                    *v = v.clamp(-bound, *bound);
                }
            }
            CoeffMap::SinBounded { amp, freq } => {
                for i in 0..out.len() {
                    out[i] = amp[i] * (freq[i] * x[i]).sin();
                }
            }
        }
    }

    /// A valid Lipschitz constant (Frobenius norm dominates the operator norm).
    pub fn lipschitz_bound(&self) -> f64 {
        match self {
            CoeffMap::Zero | CoeffMap::Constant { .. } => 0.0,
            CoeffMap::Affine { a, .. } => frobenius(a),
            CoeffMap::ClippedLinear { a, .. } => frobenius(a),
            CoeffMap::SinBounded { amp, freq } => {
                amp.iter().zip(freq).fold(0.0f64, |m, (a, f)| m.max((a * f).abs()))
            }
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let check_mat = |a: &Vec<Vec<f64>>, c: &Vec<f64>| -> Result<()> {
            if a.len() != dim || a.iter().any(|row| row.len() != dim) || c.len() != dim {
                return Err(GcalcError::Shape(format!(
                    "coefficient map shape does not match state dimension {dim}"
                )));
            }
            Ok(())
        };
        match self {
            CoeffMap::Zero => Ok(()),
            CoeffMap::Constant { c } => {
                if c.len() != dim {
                    return Err(GcalcError::Shape("constant map has wrong dimension".into()));
                }
                Ok(())
            }
            CoeffMap::Affine { a, c } => check_mat(a, c),
            CoeffMap::ClippedLinear { a, c, bound } => {
                if !(*bound > 0.0) {
                    return Err(GcalcError::Parameter("clip bound must be positive".into()));
                }
                check_mat(a, c)
            }
            CoeffMap::SinBounded { amp, freq } => {
                if amp.len() != dim || freq.len() != dim {
                    return Err(GcalcError::Shape("sin map has wrong dimension".into()));
                }
                Ok(())
            }
        }
    }
}

/// Coefficients, declared joint Lipschitz constant, initial state, horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdeSpec {
    pub b: CoeffMap,
    pub h: CoeffMap,
    pub sigma: CoeffMap,
    #[serde(rename = "K")]
    pub lipschitz: f64,
    #[serde(rename = "X0")]
    pub x0: Vec<f64>,
    #[serde(rename = "T")]
    pub horizon: f64,
}

impl SdeSpec {
    pub fn new(
        b: CoeffMap,
        h: CoeffMap,
        sigma: CoeffMap,
        lipschitz: f64,
        x0: Vec<f64>,
        horizon: f64,
    ) -> Result<Self> {
        let spec = SdeSpec { b, h, sigma, lipschitz, x0, horizon };
        spec.validate()?;
        Ok(spec)
    }

    /// Build with K set to the analytic joint bound of the three maps.
    pub fn with_auto_k(
        b: CoeffMap,
        h: CoeffMap,
        sigma: CoeffMap,
        x0: Vec<f64>,
        horizon: f64,
    ) -> Result<Self> {
        let k = b
            .lipschitz_bound()
            .max(h.lipschitz_bound())
            .max(sigma.lipschitz_bound())
            .max(1e-9);
        SdeSpec::new(b, h, sigma, k, x0, horizon)
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    /// C = 3 K^2, the constant of the integral estimate.
    pub fn contraction_const(&self) -> f64 {
        3.0 * self.lipschitz * self.lipschitz
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if dim == 0 || dim > MAX_STATE_DIM {
            return Err(GcalcError::Parameter(format!(
                "state dimension {dim} outside 1..={MAX_STATE_DIM}"
            )));
        }
        if !(self.horizon > 0.0) {
            return Err(GcalcError::Parameter("horizon must be positive".into()));
        }
        self.b.validate(dim)?;
        self.h.validate(dim)?;
        self.sigma.validate(dim)?;
        if !(self.lipschitz > 0.0) {
            return Err(GcalcError::Parameter("Lipschitz constant must be positive".into()));
        }
        // The declared K must dominate sampled difference quotients.
        let mut worst = 0.0f64;
        let mut rng_state = 0x5DEu64;
        let mut next = || {
            // xorshift; plenty for a smoke check
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            (rng_state >> 11) as f64 / (1u64 << 53) as f64 * 8.0 - 4.0
        };
        let mut fx = vec![0.0; dim];
        let mut fy = vec![0.0; dim];
        for _ in 0..200 {
            let x: Vec<f64> = (0..dim).map(|_| next()).collect();
            let y: Vec<f64> = (0..dim).map(|_| next()).collect();
            let dist: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            if dist < 1e-9 {
                continue;
            }
            for map in [&self.b, &self.h, &self.sigma] {
                map.eval(&x, &mut fx);
                map.eval(&y, &mut fy);
                let df: f64 =
                    fx.iter().zip(&fy).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                worst = worst.max(df / dist);
            }
        }
        if worst > self.lipschitz * (1.0 + 1e-9) {
            return Err(GcalcError::Parameter(format!(
                "declared Lipschitz constant {} is below a sampled quotient {worst}",
                self.lipschitz
            )));
        }
        Ok(())
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let spec: SdeSpec = serde_json::from_str(json)
            .map_err(|e| GcalcError::Schema(format!("sde spec json: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("sde spec serialization is infallible")
    }
}

/// State trajectory on the path grid: trajectory[k] is X at time k dt.
pub type Trajectory = Vec<Vec<f64>>;

/// Scenario ensemble sharing one grid, with the max-over-paths second-moment
/// functional and its exp(-2Ct) weighting.
#[derive(Debug, Clone)]
pub struct ProcessEnsemble {
    paths: Vec<ScenarioPath>,
}

impl ProcessEnsemble {
    pub fn new(paths: Vec<ScenarioPath>) -> Result<Self> {
        if paths.is_empty() {
            return Err(GcalcError::Parameter("ensemble needs at least one path".into()));
        }
        let (steps, dt) = (paths[0].steps(), paths[0].dt());
        if paths.iter().any(|p| p.steps() != steps || (p.dt() - dt).abs() > 1e-15) {
            return Err(GcalcError::Shape("ensemble paths live on different grids".into()));
        }
        Ok(ProcessEnsemble { paths })
    }

    /// Default ensemble: constant-low, constant-high, random and bang-bang
    /// policies cycled over consecutive seeds.
    pub fn standard(
        params: GParams,
        t: f64,
        steps: usize,
        n_paths: usize,
        seed0: u64,
    ) -> Result<Self> {
        let policies = [
            Policy::Constant(params.sigma0()),
            Policy::Constant(1.0),
            Policy::Random,
            Policy::BangBang(Payoff::sin(1.0)),
        ];
        let paths: Result<Vec<ScenarioPath>> = (0..n_paths)
            .map(|i| {
                simulate_path(
                    &policies[i % policies.len()],
                    params,
                    t,
                    steps,
                    Driver::Gaussian,
                    seed0 + i as u64,
                )
            })
            .collect();
        ProcessEnsemble::new(paths?)
    }

    pub fn paths(&self) -> &[ScenarioPath] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.paths[0].steps()
    }

    pub fn dt(&self) -> f64 {
        self.paths[0].dt()
    }

    pub fn horizon(&self) -> f64 {
        self.paths[0].horizon()
    }

    /// Max over paths of |y - z|^2 at time index k.
    pub fn sup_sq_at(&self, y: &[Trajectory], z: &[Trajectory], k: usize) -> f64 {
        let mut worst = 0.0f64;
        for (yp, zp) in y.iter().zip(z) {
            let d: f64 = yp[k].iter().zip(&zp[k]).map(|(a, b)| (a - b) * (a - b)).sum();
            worst = worst.max(d);
        }
        worst
    }

    /// Left-point integral of the ensemble second moment of y - z with
    /// weight exp(-2 c t).
    pub fn weighted_distance_sq(&self, y: &[Trajectory], z: &[Trajectory], c: f64) -> f64 {
        let dt = self.dt();
        (0..self.steps())
            .map(|k| self.sup_sq_at(y, z, k) * (-2.0 * c * k as f64 * dt).exp() * dt)
            .sum()
    }

    /// Unweighted version of the same norm.
    pub fn distance_sq(&self, y: &[Trajectory], z: &[Trajectory]) -> f64 {
        self.weighted_distance_sq(y, z, 0.0)
    }

    /// Constant trajectories at the given state.
    pub fn constant_trajectories(&self, x: &[f64]) -> Vec<Trajectory> {
        vec![vec![x.to_vec(); self.steps() + 1]; self.len()]
    }
}

/// Left-point Euler solution of the SDE along one path.
pub fn euler_solve(spec: &SdeSpec, path: &ScenarioPath) -> Result<Trajectory> {
    if path.steps() < MIN_EULER_STEPS {
        return Err(GcalcError::Parameter(format!(
            "path grid too coarse: {} steps < {MIN_EULER_STEPS}",
            path.steps()
        )));
    }
    let dim = spec.dim();
    let dt = path.dt();
    let mut traj = Vec::with_capacity(path.steps() + 1);
    traj.push(spec.x0.clone());
    let mut drift = vec![0.0; dim];
    let mut qv_coeff = vec![0.0; dim];
    let mut vol = vec![0.0; dim];
    for k in 0..path.steps() {
        let x = &traj[k];
        spec.b.eval(x, &mut drift);
        spec.h.eval(x, &mut qv_coeff);
        spec.sigma.eval(x, &mut vol);
        let dqv = path.qv()[k + 1] - path.qv()[k];
        let db = path.increments()[k];
        let next: Vec<f64> =
            (0..dim).map(|i| x[i] + drift[i] * dt + qv_coeff[i] * dqv + vol[i] * db).collect();
        traj.push(next);
    }
    Ok(traj)
}

/// One application of the integral map to ensemble trajectories, by the same
/// running left-point sums as the Euler scheme, so the Euler solution is its
/// exact fixed point on the grid.
pub fn picard_step(
    spec: &SdeSpec,
    ensemble: &ProcessEnsemble,
    y: &[Trajectory],
) -> Result<Vec<Trajectory>> {
    if y.len() != ensemble.len() {
        return Err(GcalcError::Shape(format!(
            "{} trajectories for {} ensemble paths",
            y.len(),
            ensemble.len()
        )));
    }
    let dim = spec.dim();
    let dt = ensemble.dt();
    let mut out = Vec::with_capacity(y.len());
    let mut drift = vec![0.0; dim];
    let mut qv_coeff = vec![0.0; dim];
    let mut vol = vec![0.0; dim];
    for (p, path) in ensemble.paths().iter().enumerate() {
        let yp = &y[p];
        if yp.len() != path.steps() + 1 || yp.iter().any(|s| s.len() != dim) {
            return Err(GcalcError::Shape("trajectory does not match the ensemble grid".into()));
        }
        let mut lambda = Vec::with_capacity(path.steps() + 1);
        lambda.push(spec.x0.clone());
        for k in 0..path.steps() {
            spec.b.eval(&yp[k], &mut drift);
            spec.h.eval(&yp[k], &mut qv_coeff);
            spec.sigma.eval(&yp[k], &mut vol);
            let dqv = path.qv()[k + 1] - path.qv()[k];
            let db = path.increments()[k];
            let prev = &lambda[k];
            let next: Vec<f64> = (0..dim)
                .map(|i| prev[i] + drift[i] * dt + qv_coeff[i] * dqv + vol[i] * db)
                .collect();
            lambda.push(next);
        }
        out.push(lambda);
    }
    Ok(out)
}

/// Result of a Picard iteration run.
#[derive(Debug, Clone)]
pub struct PicardOutcome {
    pub trajectories: Vec<Trajectory>,
    /// Squared weighted norms of successive increments.
    pub increments: Vec<f64>,
    pub iterations: usize,
}

impl PicardOutcome {
    /// Ratios of successive squared-norm increments.
    pub fn decay_ratios(&self) -> Vec<f64> {
        self.increments.windows(2).filter(|w| w[0] > 0.0).map(|w| w[1] / w[0]).collect()
    }
}

/// Iterate the integral map from constant trajectories at X_0 until the
/// weighted increment drops below `tol` (in norm, not squared).
pub fn picard_solve(
    spec: &SdeSpec,
    ensemble: &ProcessEnsemble,
    tol: f64,
    max_iter: usize,
) -> Result<PicardOutcome> {
    let start = ensemble.constant_trajectories(&spec.x0);
    picard_solve_from(spec, ensemble, start, tol, max_iter)
}

/// Same, from arbitrary starting trajectories.
pub fn picard_solve_from(
    spec: &SdeSpec,
    ensemble: &ProcessEnsemble,
    start: Vec<Trajectory>,
    tol: f64,
    max_iter: usize,
) -> Result<PicardOutcome> {
    if !(tol > 0.0) {
        return Err(GcalcError::Parameter("tolerance must be positive".into()));
    }
    let c = spec.contraction_const();
    let mut current = start;
    let mut increments = Vec::new();
    for iter in 1..=max_iter {
        let next = picard_step(spec, ensemble, &current)?;
        let d2 = ensemble.weighted_distance_sq(&next, &current, c);
        increments.push(d2);
        current = next;
        if d2.sqrt() < tol {
            return Ok(PicardOutcome { trajectories: current, increments, iterations: iter });
        }
    }
    Err(GcalcError::Numeric(format!(
        "picard iteration did not reach tol {tol} within {max_iter} steps; \
         last squared increment {:?}",
        increments.last()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::{simulate_path, Driver, Policy};

    fn params() -> GParams {
        GParams::new(0.5).unwrap()
    }

    fn a1(v: f64) -> CoeffMap {
        CoeffMap::Affine { a: vec![vec![v]], c: vec![0.0] }
    }

    #[test]
    fn pure_diffusion_reproduces_the_path() {
        let spec = SdeSpec::with_auto_k(
            CoeffMap::Zero,
            CoeffMap::Zero,
            CoeffMap::Constant { c: vec![1.0] },
            vec![0.5],
            1.0,
        )
        .unwrap();
        let path =
            simulate_path(&Policy::Random, params(), 1.0, 128, Driver::Gaussian, 2).unwrap();
        let traj = euler_solve(&spec, &path).unwrap();
        for k in 0..=128 {
            assert!((traj[k][0] - (0.5 + path.b()[k])).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_decay_matches_the_ode() {
        let spec =
            SdeSpec::with_auto_k(a1(-1.0), CoeffMap::Zero, CoeffMap::Zero, vec![1.0], 1.0)
                .unwrap();
        let path =
            simulate_path(&Policy::Constant(1.0), params(), 1.0, 4096, Driver::Gaussian, 3)
                .unwrap();
        let traj = euler_solve(&spec, &path).unwrap();
        let got = traj[4096][0];
        let want = (-1.0f64).exp();
        assert!((got - want).abs() <= 1e-3, "got {got}, want {want}");
    }

    #[test]
    fn geometric_sde_matches_the_product_form_exactly() {
        let spec = SdeSpec::with_auto_k(CoeffMap::Zero, CoeffMap::Zero, a1(1.0), vec![1.0], 1.0)
            .unwrap();
        let path =
            simulate_path(&Policy::Random, params(), 1.0, 256, Driver::Gaussian, 4).unwrap();
        let traj = euler_solve(&spec, &path).unwrap();
        let mut product = 1.0;
        for k in 0..256 {
            product *= 1.0 + path.increments()[k];
        }
        assert!(
            (traj[256][0] - product).abs() <= 1e-12 * (1.0 + product.abs()),
            "euler {} vs product {product}",
            traj[256][0]
        );
    }

    #[test]
    fn euler_rejects_coarse_grids() {
        let spec = SdeSpec::with_auto_k(CoeffMap::Zero, CoeffMap::Zero, a1(1.0), vec![1.0], 1.0)
            .unwrap();
        let path = simulate_path(&Policy::Random, params(), 1.0, 32, Driver::Gaussian, 0).unwrap();
        assert!(euler_solve(&spec, &path).is_err());
    }

    #[test]
    fn declared_lipschitz_constant_is_checked() {
        let err = SdeSpec::new(
            a1(2.0),
            CoeffMap::Zero,
            CoeffMap::Zero,
            0.5, // too small for slope 2
            vec![0.0],
            1.0,
        );
        assert!(matches!(err, Err(GcalcError::Parameter(_))));
    }

    #[test]
    fn picard_fixed_point_is_the_euler_solution_bitwise() {
        let spec = SdeSpec::with_auto_k(
            a1(-0.5),
            CoeffMap::SinBounded { amp: vec![0.3], freq: vec![2.0] },
            a1(0.8),
            vec![0.7],
            1.0,
        )
        .unwrap();
        let ens = ProcessEnsemble::standard(params(), 1.0, 128, 8, 0).unwrap();
        let euler: Vec<Trajectory> =
            ens.paths().iter().map(|p| euler_solve(&spec, p).unwrap()).collect();
        let stepped = picard_step(&spec, &ens, &euler).unwrap();
        for (a, b) in euler.iter().zip(&stepped) {
            for (xa, xb) in a.iter().zip(b) {
                assert_eq!(xa, xb, "the Euler trajectory must be the exact fixed point");
            }
        }
    }

    #[test]
    fn picard_of_constant_input_is_the_frozen_coefficient_sum() {
        let spec = SdeSpec::with_auto_k(
            CoeffMap::Constant { c: vec![0.25] },
            CoeffMap::Constant { c: vec![0.5] },
            CoeffMap::Constant { c: vec![2.0] },
            vec![1.0],
            1.0,
        )
        .unwrap();
        let ens = ProcessEnsemble::standard(params(), 1.0, 128, 4, 9).unwrap();
        let y0 = ens.constant_trajectories(&spec.x0);
        let y1 = picard_step(&spec, &ens, &y0).unwrap();
        for (p, path) in ens.paths().iter().enumerate() {
            for k in 0..=128 {
                let want = 1.0 + 0.25 * path.time(k) + 0.5 * path.qv()[k] + 2.0 * path.b()[k];
                assert!((y1[p][k][0] - want).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn trivial_sde_converges_immediately() {
        let spec =
            SdeSpec::new(CoeffMap::Zero, CoeffMap::Zero, CoeffMap::Zero, 1.0, vec![2.0], 1.0)
                .unwrap();
        let ens = ProcessEnsemble::standard(params(), 1.0, 128, 4, 1).unwrap();
        let out = picard_solve(&spec, &ens, 1e-12, 10).unwrap();
        assert_eq!(out.iterations, 1);
        assert_eq!(out.trajectories[0][128], vec![2.0]);
    }

    #[test]
    fn picard_contracts_and_both_starts_agree() {
        let spec = SdeSpec::with_auto_k(
            a1(-0.4),
            CoeffMap::SinBounded { amp: vec![0.5], freq: vec![1.0] },
            a1(0.9),
            vec![1.0],
            1.0,
        )
        .unwrap();
        let ens = ProcessEnsemble::standard(params(), 1.0, 256, 16, 5).unwrap();
        let from_x0 = picard_solve(&spec, &ens, 1e-10, 200).unwrap();
        for (i, r) in from_x0.decay_ratios().iter().enumerate().skip(2) {
            assert!(*r <= 0.6, "squared-norm decay ratio {r} at iteration {i}");
        }
        let shifted = ens.constant_trajectories(&[2.0]);
        let from_shifted = picard_solve_from(&spec, &ens, shifted, 1e-10, 200).unwrap();
        let gap = ens.distance_sq(&from_x0.trajectories, &from_shifted.trajectories).sqrt();
        assert!(gap <= 1e-8, "limits from two starts differ by {gap}");
    }

    #[test]
    fn weighted_and_unweighted_norms_are_equivalent() {
        let spec =
            SdeSpec::with_auto_k(a1(-1.0), CoeffMap::Zero, a1(1.0), vec![1.0], 1.0).unwrap();
        let c = spec.contraction_const();
        let ens = ProcessEnsemble::standard(params(), 1.0, 128, 8, 11).unwrap();
        let y = ens.constant_trajectories(&[1.0]);
        let z = ens.constant_trajectories(&[0.0]);
        let unweighted = ens.distance_sq(&y, &z);
        let weighted = ens.weighted_distance_sq(&y, &z, c);
        assert!(weighted <= unweighted * (1.0 + 1e-12));
        assert!(weighted >= unweighted * (-2.0 * c * ens.horizon()).exp() - 1e-12);
    }

    #[test]
    fn integral_estimate_holds_on_the_ensemble() {
        // Ensemble form of the Lipschitz growth bound with C = 3K^2, applied
        // to a pair of successive Picard iterates.
        let spec = SdeSpec::with_auto_k(
            a1(-0.6),
            CoeffMap::ClippedLinear { a: vec![vec![0.4]], c: vec![0.1], bound: 3.0 },
            a1(0.7),
            vec![0.5],
            1.0,
        )
        .unwrap();
        let c = spec.contraction_const();
        let ens = ProcessEnsemble::standard(params(), 1.0, 256, 16, 23).unwrap();
        let y0 = ens.constant_trajectories(&spec.x0);
        let y1 = picard_step(&spec, &ens, &y0).unwrap();
        let y2 = picard_step(&spec, &ens, &y1).unwrap();
        let dt = ens.dt();
        let mut running = 0.0;
        for k in 0..=ens.steps() {
            let lhs = ens.sup_sq_at(&y1, &y2, k);
            assert!(
                lhs <= c * running + 1e-9,
                "integral estimate violated at step {k}: {lhs} vs {}",
                c * running
            );
            if k < ens.steps() {
                running += ens.sup_sq_at(&y0, &y1, k) * dt;
            }
        }
    }

    #[test]
    fn sde_spec_json_round_trip() {
        let spec = SdeSpec::with_auto_k(
            CoeffMap::Affine { a: vec![vec![-1.0]], c: vec![0.0] },
            CoeffMap::Zero,
            CoeffMap::Constant { c: vec![1.0] },
            vec![1.0],
            1.0,
        )
        .unwrap();
        let json = spec.to_json();
        assert!(json.contains("\"K\""));
        assert!(json.contains("\"X0\""));
        assert!(json.contains("\"T\""));
        let back = SdeSpec::from_json(&json).unwrap();
        assert_eq!(back, spec);
        assert!(SdeSpec::from_json("{\"bad\":1}").is_err());
    }
}
