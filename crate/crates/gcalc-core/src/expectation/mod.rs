//! G-expectation of cylinder functionals of the canonical path.
//!
//! A cylinder random variable phi(dB_1, ..., dB_m) is carried in accumulator
//! form: a low-dimensional state a_j updated per increment through a catalog
//! map, with a terminal map g so that X = g(a_m). The backward recursion that
//! defines the G-expectation then becomes a dynamic program over the
//! accumulator state: each level solves one-dimensional G-heat problems in
//! the incoming increment, which keeps the cost polynomial where the raw
//! m-variate recursion would be exponential.

mod dp;
mod props;

pub use dp::{
    check_special_additivity, check_tower, conditional, expect, tensor_expect, DpResolution,
};
pub use props::{
    check_axioms_numeric, check_properties, standard_cylinder_pairs, CylinderPair, EPS_NUM,
};

use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{GcalcError, Result};
use crate::payoff::Payoff;

/// Accumulator states stay low-dimensional by design.
pub const MAX_ACC_DIM: usize = 2;

/// Ordered time points 0 = t_0 < t_1 < ... < t_m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Partition {
    times: Vec<f64>,
}

impl TryFrom<Vec<f64>> for Partition {
    type Error = GcalcError;
    fn try_from(times: Vec<f64>) -> Result<Self> {
        Partition::new(times)
    }
}

impl From<Partition> for Vec<f64> {
    fn from(p: Partition) -> Vec<f64> {
        p.times
    }
}

impl Partition {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(GcalcError::Parameter("partition needs at least one step".into()));
        }
        if times[0] != 0.0 {
            return Err(GcalcError::Parameter("partition must start at 0".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(GcalcError::Parameter("partition times must strictly increase".into()));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(GcalcError::Parameter("partition times must be finite".into()));
        }
        Ok(Partition { times })
    }

    /// Uniform partition of [0, t] into k steps.
    pub fn uniform(t: f64, k: usize) -> Result<Self> {
        if k == 0 || !(t > 0.0) {
            return Err(GcalcError::Parameter("uniform partition needs k >= 1 and t > 0".into()));
        }
        Partition::new((0..=k).map(|i| t * i as f64 / k as f64).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of steps m.
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    /// Width of step j (1-based): t_j - t_{j-1}.
    pub fn dt(&self, j: usize) -> f64 {
        self.times[j] - self.times[j - 1]
    }

    pub fn mesh(&self) -> f64 {
        (1..self.times.len()).fold(0.0, |m, j| m.max(self.dt(j)))
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Partition of the first `j` steps.
    pub fn prefix(&self, j: usize) -> Result<Self> {
        Partition::new(self.times[..=j].to_vec())
    }

    pub fn same_times(&self, other: &Partition) -> bool {
        self.times.len() == other.times.len()
            && self
                .times
                .iter()
                .zip(&other.times)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs()))
    }
}

/// Per-step update of one accumulator component. All components of a step
/// read the pre-step state, so order within a step does not matter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ComponentUpdate {
    /// a_i unchanged
    Hold,
    /// a_i += dx
    AddIncrement,
    /// a_i += dx^2
    AddSquare,
    /// a_i += c dx
    AddScaled { c: f64 },
    /// a_i += w(a_with) dx
    AddWeighted { with: usize, weight: Payoff },
    /// a_i += w(a_with) dx^2, or w(a_with)^2 dx^2 when `squared`
    AddWeightedSquare { with: usize, weight: Payoff, squared: bool },
    /// a_i += w(a_with) dt
    AddWeightedTime { with: usize, weight: Payoff },
    /// a_i = lin . a + dx_coeff dx + dx2_coeff dx^2 + bias
    Affine { lin: Vec<f64>, dx_coeff: f64, dx2_coeff: f64, bias: f64 },
}

impl ComponentUpdate {
    pub fn apply(&self, a: &[f64], y: f64, dt: f64, i: usize) -> f64 {
        match self {
            ComponentUpdate::Hold => a[i],
            ComponentUpdate::AddIncrement => a[i] + y,
            ComponentUpdate::AddSquare => a[i] + y * y,
            ComponentUpdate::AddScaled { c } => a[i] + c * y,
            ComponentUpdate::AddWeighted { with, weight } => a[i] + weight.eval(a[*with]) * y,
            ComponentUpdate::AddWeightedSquare { with, weight, squared } => {
                let w = weight.eval(a[*with]);
                let w = if *squared { w * w } else { w };
                a[i] + w * y * y
            }
            ComponentUpdate::AddWeightedTime { with, weight } => {
                a[i] + weight.eval(a[*with]) * dt
            }
            ComponentUpdate::Affine { lin, dx_coeff, dx2_coeff, bias } => {
                let s: f64 = lin.iter().zip(a).map(|(c, v)| c * v).sum();
                s + dx_coeff * y + dx2_coeff * y * y + bias
            }
        }
    }

    fn references(&self) -> Option<usize> {
        match self {
            ComponentUpdate::AddWeighted { with, .. }
            | ComponentUpdate::AddWeightedSquare { with, .. }
            | ComponentUpdate::AddWeightedTime { with, .. } => Some(*with),
            _ => None,
        }
    }

    /// Interval image [lo_i, hi_i] given per-component state intervals and
    /// |dx| <= h; used to build hard accumulator-grid bounds.
    fn interval(&self, boxes: &[(f64, f64)], h: f64, dt: f64, i: usize) -> (f64, f64) {
        let (lo, hi) = boxes[i];
        match self {
            ComponentUpdate::Hold => (lo, hi),
            ComponentUpdate::AddIncrement => (lo - h, hi + h),
            ComponentUpdate::AddSquare => (lo, hi + h * h),
            ComponentUpdate::AddScaled { c } => (lo - c.abs() * h, hi + c.abs() * h),
            ComponentUpdate::AddWeighted { with, weight } => {
                let w = weight_bound(weight, boxes[*with]);
                (lo - w * h, hi + w * h)
            }
            ComponentUpdate::AddWeightedSquare { with, weight, squared } => {
                let w = weight_bound(weight, boxes[*with]);
                let w = if *squared { w * w } else { w };
                if *squared {
                    (lo, hi + w * h * h)
                } else {
                    (lo - w * h * h, hi + w * h * h)
                }
            }
            ComponentUpdate::AddWeightedTime { with, weight } => {
                let w = weight_bound(weight, boxes[*with]);
                (lo - w * dt, hi + w * dt)
            }
            ComponentUpdate::Affine { lin, dx_coeff, dx2_coeff, bias } => {
                let mut out_lo = *bias;
                let mut out_hi = *bias;
                for (c, (blo, bhi)) in lin.iter().zip(boxes) {
                    if *c >= 0.0 {
                        out_lo += c * blo;
                        out_hi += c * bhi;
                    } else {
                        out_lo += c * bhi;
                        out_hi += c * blo;
                    }
                }
                out_lo -= dx_coeff.abs() * h;
                out_hi += dx_coeff.abs() * h;
                if *dx2_coeff >= 0.0 {
                    out_hi += dx2_coeff * h * h;
                } else {
                    out_lo += dx2_coeff * h * h;
                }
                (out_lo, out_hi)
            }
        }
    }
}

fn weight_bound(weight: &Payoff, (lo, hi): (f64, f64)) -> f64 {
    weight.abs_bound_on(lo.abs().max(hi.abs()).max(1e-9))
}

/// Simultaneous update of the whole accumulator for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepUpdate {
    pub components: Vec<ComponentUpdate>,
}

impl StepUpdate {
    pub fn single(update: ComponentUpdate) -> Self {
        StepUpdate { components: vec![update] }
    }

    pub fn of(components: Vec<ComponentUpdate>) -> Self {
        StepUpdate { components }
    }

    pub fn apply(&self, a: &[f64], y: f64, dt: f64, out: &mut [f64]) {
        for (i, u) in self.components.iter().enumerate() {
            out[i] = u.apply(a, y, dt, i);
        }
    }

    fn interval(&self, boxes: &[(f64, f64)], h: f64, dt: f64) -> Vec<(f64, f64)> {
        self.components
            .iter()
            .enumerate()
            .map(|(i, u)| u.interval(boxes, h, dt, i))
            .collect()
    }
}

// Serialized form: a bare component update for one-dimensional accumulators,
// or {"kind":"multi","components":[...]} otherwise.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum StepUpdateRepr {
    Single(ComponentUpdate),
    Multi { kind: MultiTag, components: Vec<ComponentUpdate> },
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum MultiTag {
    Multi,
}

impl Serialize for StepUpdate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.components.len() == 1 {
            StepUpdateRepr::Single(self.components[0].clone()).serialize(s)
        } else {
            StepUpdateRepr::Multi { kind: MultiTag::Multi, components: self.components.clone() }
                .serialize(s)
        }
    }
}

impl<'de> Deserialize<'de> for StepUpdate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(match StepUpdateRepr::deserialize(d)? {
            StepUpdateRepr::Single(u) => StepUpdate::single(u),
            StepUpdateRepr::Multi { components, .. } => StepUpdate::of(components),
        })
    }
}

/// Terminal map g(a) closing a cylinder random variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Terminal {
    /// a_index^n
    Power {
        #[serde(default)]
        index: usize,
        n: u32,
    },
    /// phi(a_index)
    Payoff {
        #[serde(default)]
        index: usize,
        payoff: Payoff,
    },
    /// product over factors of phi_k(a_{index_k})
    Product { factors: Vec<Factor> },
    /// sum of coeff * term
    LinComb { terms: Vec<WeightedTerminal> },
    Constant { c: f64 },
    /// interpolated grid function, used for conditioned random variables
    Table { table: ValueTable },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    #[serde(default)]
    pub index: usize,
    pub payoff: Payoff,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedTerminal {
    pub coeff: f64,
    pub term: Terminal,
}

impl Terminal {
    pub fn eval(&self, a: &[f64]) -> f64 {
        match self {
            Terminal::Power { index, n } => a[*index].powi(*n as i32),
            Terminal::Payoff { index, payoff } => payoff.eval(a[*index]),
            Terminal::Product { factors } => {
                factors.iter().map(|f| f.payoff.eval(a[f.index])).product()
            }
            Terminal::LinComb { terms } => {
                terms.iter().map(|t| t.coeff * t.term.eval(a)).sum()
            }
            Terminal::Constant { c } => *c,
            Terminal::Table { table } => table.eval(a),
        }
    }

    pub fn payoff_on(index: usize, payoff: Payoff) -> Self {
        Terminal::Payoff { index, payoff }
    }

    fn max_index(&self) -> usize {
        match self {
            Terminal::Power { index, .. } | Terminal::Payoff { index, .. } => *index,
            Terminal::Product { factors } => factors.iter().map(|f| f.index).max().unwrap_or(0),
            Terminal::LinComb { terms } => {
                terms.iter().map(|t| t.term.max_index()).max().unwrap_or(0)
            }
            Terminal::Constant { .. } => 0,
            Terminal::Table { table } => table.axes.len().saturating_sub(1),
        }
    }

    fn remap(&self, map: &[usize]) -> Terminal {
        match self {
            Terminal::Power { index, n } => Terminal::Power { index: map[*index], n: *n },
            Terminal::Payoff { index, payoff } => {
                Terminal::Payoff { index: map[*index], payoff: payoff.clone() }
            }
            Terminal::Product { factors } => Terminal::Product {
                factors: factors
                    .iter()
                    .map(|f| Factor { index: map[f.index], payoff: f.payoff.clone() })
                    .collect(),
            },
            Terminal::LinComb { terms } => Terminal::LinComb {
                terms: terms
                    .iter()
                    .map(|t| WeightedTerminal { coeff: t.coeff, term: t.term.remap(map) })
                    .collect(),
            },
            Terminal::Constant { c } => Terminal::Constant { c: *c },
            Terminal::Table { .. } => panic!("table terminals cannot be remapped"),
        }
    }
}

/// One axis of an accumulator value table. `n == 1` marks a degenerate
/// (deterministic) coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisGrid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    /// Subrange actually visited by the reachability ensemble; comparisons
    /// between tables restrict to it.
    pub core_lo: f64,
    pub core_hi: f64,
}

impl AxisGrid {
    pub fn degenerate(v: f64) -> Self {
        AxisGrid { lo: v, hi: v, n: 1, core_lo: v, core_hi: v }
    }

    pub fn spacing(&self) -> f64 {
        if self.n <= 1 {
            0.0
        } else {
            (self.hi - self.lo) / (self.n - 1) as f64
        }
    }

    pub fn point(&self, i: usize) -> f64 {
        if self.n <= 1 {
            self.lo
        } else {
            self.lo + i as f64 * self.spacing()
        }
    }

    fn locate(&self, x: f64) -> (usize, f64) {
        if self.n <= 1 {
            return (0, 0.0);
        }
        let pos = ((x - self.lo) / self.spacing()).clamp(0.0, (self.n - 1) as f64);
        let i = (pos.floor() as usize).min(self.n - 2);
        (i, pos - i as f64)
    }

    fn in_core(&self, x: f64) -> bool {
        x >= self.core_lo - 1e-12 && x <= self.core_hi + 1e-12
    }
}

/// Grid function of the accumulator at one level, multilinear between nodes
/// and clamped outside the box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    pub level: usize,
    pub axes: Vec<AxisGrid>,
    /// Row-major, axis 0 slowest.
    pub values: Vec<f64>,
}

impl ValueTable {
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for (axis, i) in self.axes.iter().zip(idx) {
            flat = flat * axis.n + i;
        }
        flat
    }

    pub fn point(&self, idx: &[usize]) -> Vec<f64> {
        self.axes.iter().zip(idx).map(|(a, i)| a.point(*i)).collect()
    }

    /// Iterate all multi-indices in row-major order.
    pub fn indices(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        let dims: Vec<usize> = self.axes.iter().map(|a| a.n).collect();
        let total: usize = dims.iter().product();
        (0..total).map(move |mut flat| {
            let mut idx = vec![0; dims.len()];
            for d in (0..dims.len()).rev() {
                idx[d] = flat % dims[d];
                flat /= dims[d];
            }
            idx
        })
    }

    /// Multilinear interpolation, clamped to the box.
    pub fn eval(&self, a: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.axes.len());
        let locs: Vec<(usize, f64)> =
            self.axes.iter().zip(a).map(|(axis, x)| axis.locate(*x)).collect();
        let corners = 1usize << self.axes.len();
        let mut acc = 0.0;
        for mask in 0..corners {
            let mut weight = 1.0;
            let mut idx = Vec::with_capacity(self.axes.len());
            for (d, (i, w)) in locs.iter().enumerate() {
                let hi_corner = (mask >> d) & 1 == 1;
                if hi_corner {
                    if self.axes[d].n <= 1 {
                        weight = 0.0;
                        break;
                    }
                    weight *= w;
                    idx.push(i + 1);
                } else {
                    weight *= 1.0 - w;
                    idx.push(*i);
                }
            }
            if weight != 0.0 {
                acc += weight * self.values[self.flat_index(&idx)];
            }
        }
        acc
    }

    /// Is the point inside the visited (core) region on every axis?
    pub fn in_core(&self, a: &[f64]) -> bool {
        self.axes.iter().zip(a).all(|(axis, x)| axis.in_core(*x))
    }

    /// Sup-norm distance to another table over this table's core grid nodes.
    pub fn core_sup_distance(&self, other: &ValueTable) -> f64 {
        let mut worst = 0.0f64;
        for idx in self.indices() {
            let p = self.point(&idx);
            if self.in_core(&p) {
                let d = (self.values[self.flat_index(&idx)] - other.eval(&p)).abs();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Max over core grid nodes of `f(point, value)`.
    pub fn core_max(&self, f: impl Fn(&[f64], f64) -> f64) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for idx in self.indices() {
            let p = self.point(&idx);
            if self.in_core(&p) {
                worst = worst.max(f(&p, self.values[self.flat_index(&idx)]));
            }
        }
        worst
    }
}

/// The accumulator form of a cylinder random variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccumulatorSpec {
    pub dim: usize,
    pub init: Vec<f64>,
    pub updates: Vec<StepUpdate>,
    pub terminal: Terminal,
}

impl AccumulatorSpec {
    fn validate(&self, steps: usize) -> Result<()> {
        if self.dim == 0 || self.dim > MAX_ACC_DIM {
            return Err(GcalcError::Config(format!(
                "accumulator dimension {} outside 1..={MAX_ACC_DIM}",
                self.dim
            )));
        }
        if self.init.len() != self.dim {
            return Err(GcalcError::Shape(format!(
                "init has {} entries for dimension {}",
                self.init.len(),
                self.dim
            )));
        }
        if self.updates.len() != steps {
            return Err(GcalcError::Shape(format!(
                "{} step updates for a partition with {} steps",
                self.updates.len(),
                steps
            )));
        }
        for (j, u) in self.updates.iter().enumerate() {
            if u.components.len() != self.dim {
                return Err(GcalcError::Shape(format!(
                    "step {} updates {} components, accumulator has {}",
                    j + 1,
                    u.components.len(),
                    self.dim
                )));
            }
            for c in &u.components {
                if let Some(w) = c.references() {
                    if w >= self.dim {
                        return Err(GcalcError::Shape(format!(
                            "step {} references component {w} beyond dimension {}",
                            j + 1,
                            self.dim
                        )));
                    }
                }
                if let ComponentUpdate::Affine { lin, .. } = c {
                    if lin.len() != self.dim {
                        return Err(GcalcError::Shape(
                            "affine update coefficient count != dimension".into(),
                        ));
                    }
                }
            }
        }
        if self.terminal.max_index() >= self.dim {
            return Err(GcalcError::Shape("terminal references a missing component".into()));
        }
        Ok(())
    }
}

/// Raw m-variate payoff override for the tensor-grid fallback.
#[derive(Clone)]
pub struct RawPhi(pub Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>);

impl std::fmt::Debug for RawPhi {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("RawPhi(..)")
    }
}

/// A cylinder random variable X = g(a_m) of the path increments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CylinderRV {
    #[serde(rename = "times")]
    pub partition: Partition,
    pub acc: AccumulatorSpec,
    #[serde(skip)]
    pub raw_phi: Option<RawPhi>,
}

impl PartialEq for CylinderRV {
    fn eq(&self, other: &Self) -> bool {
        self.partition == other.partition && self.acc == other.acc
    }
}

impl CylinderRV {
    pub fn new(partition: Partition, acc: AccumulatorSpec) -> Result<Self> {
        acc.validate(partition.steps())?;
        Ok(CylinderRV { partition, acc, raw_phi: None })
    }

    pub fn with_raw_phi(mut self, phi: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.raw_phi = Some(RawPhi(Arc::new(phi)));
        self
    }

    pub fn steps(&self) -> usize {
        self.partition.steps()
    }

    /// Run the accumulator forward along concrete increments.
    pub fn accumulate(&self, increments: &[f64]) -> Result<Vec<f64>> {
        if increments.len() != self.steps() {
            return Err(GcalcError::Shape(format!(
                "{} increments for {} steps",
                increments.len(),
                self.steps()
            )));
        }
        let mut a = self.acc.init.clone();
        let mut next = vec![0.0; a.len()];
        for (j, y) in increments.iter().enumerate() {
            self.acc.updates[j].apply(&a, *y, self.partition.dt(j + 1), &mut next);
            std::mem::swap(&mut a, &mut next);
        }
        Ok(a)
    }

    /// X as a function of the raw increments.
    pub fn value_of_increments(&self, increments: &[f64]) -> Result<f64> {
        if let Some(raw) = &self.raw_phi {
            if increments.len() != self.steps() {
                return Err(GcalcError::Shape("wrong increment count".into()));
            }
            return Ok((raw.0)(increments));
        }
        Ok(self.acc.terminal.eval(&self.accumulate(increments)?))
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let rv: CylinderRV = serde_json::from_str(json)
            .map_err(|e| GcalcError::Schema(format!("cylinder rv json: {e}")))?;
        rv.acc.validate(rv.partition.steps())?;
        Ok(rv)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("cylinder rv serialization is infallible")
    }

    // ----- builders for the standard functionals -----

    /// X = phi(B_T): one component accumulating every increment.
    pub fn function_of_terminal_b(partition: Partition, phi: Payoff) -> Result<Self> {
        let steps = partition.steps();
        CylinderRV::new(
            partition,
            AccumulatorSpec {
                dim: 1,
                init: vec![0.0],
                updates: vec![StepUpdate::single(ComponentUpdate::AddIncrement); steps],
                terminal: Terminal::payoff_on(0, phi),
            },
        )
    }

    /// The K-refinement quadratic-variation approximant over [0, t]:
    /// running sum of squared increments, closed by `terminal`.
    pub fn qv_approximant(t: f64, k: usize, terminal: Terminal) -> Result<Self> {
        let partition = Partition::uniform(t, k)?;
        CylinderRV::new(
            partition,
            AccumulatorSpec {
                dim: 1,
                init: vec![0.0],
                updates: vec![StepUpdate::single(ComponentUpdate::AddSquare); k],
                terminal,
            },
        )
    }

    /// Rescale: lambda X.
    pub fn scaled(&self, lambda: f64) -> Self {
        let mut rv = self.clone();
        rv.acc.terminal = Terminal::LinComb {
            terms: vec![WeightedTerminal { coeff: lambda, term: rv.acc.terminal }],
        };
        rv.raw_phi = None;
        rv
    }

    /// Translate: X + c.
    pub fn shifted(&self, c: f64) -> Self {
        let mut rv = self.clone();
        rv.acc.terminal = Terminal::LinComb {
            terms: vec![
                WeightedTerminal { coeff: 1.0, term: rv.acc.terminal },
                WeightedTerminal { coeff: c, term: Terminal::Constant { c: 1.0 } },
            ],
        };
        rv.raw_phi = None;
        rv
    }

    pub fn negated(&self) -> Self {
        self.scaled(-1.0)
    }
}

/// X + Y on a shared partition. Components with identical history are
/// shared, so e.g. two functionals of the same running Brownian state fit
/// in a two-dimensional accumulator.
pub fn combine_sum(x: &CylinderRV, y: &CylinderRV) -> Result<CylinderRV> {
    if !x.partition.same_times(&y.partition) {
        return Err(GcalcError::Shape("cylinder variables live on different partitions".into()));
    }
    if matches!(x.acc.terminal, Terminal::Table { .. })
        || matches!(y.acc.terminal, Terminal::Table { .. })
    {
        return Err(GcalcError::Config("table-terminal variables cannot be combined".into()));
    }

    let mut init = x.acc.init.clone();
    let mut columns: Vec<Vec<ComponentUpdate>> = (0..x.acc.dim)
        .map(|i| x.acc.updates.iter().map(|u| u.components[i].clone()).collect())
        .collect();

    // Map y's components onto shared or fresh columns.
    let mut y_map = Vec::with_capacity(y.acc.dim);
    for i in 0..y.acc.dim {
        let col: Vec<ComponentUpdate> =
            y.acc.updates.iter().map(|u| u.components[i].clone()).collect();
        // Sharing is only sound if referenced components match too; restrict
        // sharing to columns without cross-references.
        let self_contained =
            col.iter().all(|c| c.references().is_none() && !matches!(c, ComponentUpdate::Affine { .. }));
        let existing = (0..columns.len()).find(|j| {
            self_contained && columns[*j] == col && (init[*j] - y.acc.init[i]).abs() == 0.0
        });
        match existing {
            Some(j) => y_map.push(j),
            None => {
                columns.push(col);
                init.push(y.acc.init[i]);
                y_map.push(columns.len() - 1);
            }
        }
    }

    let dim = columns.len();
    if dim > MAX_ACC_DIM {
        return Err(GcalcError::Config(format!(
            "combined accumulator needs {dim} components, limit is {MAX_ACC_DIM}"
        )));
    }

    // Remap cross-references in y's fresh columns; shared columns are
    // self-contained by construction.
    for &target in &y_map {
        if target >= x.acc.dim {
            for c in columns[target].iter_mut() {
                remap_refs(c, &y_map);
            }
        }
    }

    let steps = x.acc.updates.len();
    let updates: Vec<StepUpdate> = (0..steps)
        .map(|j| StepUpdate::of(columns.iter().map(|col| col[j].clone()).collect()))
        .collect();

    let x_map: Vec<usize> = (0..x.acc.dim).collect();
    let terminal = Terminal::LinComb {
        terms: vec![
            WeightedTerminal { coeff: 1.0, term: x.acc.terminal.remap(&x_map) },
            WeightedTerminal { coeff: 1.0, term: y.acc.terminal.remap(&y_map) },
        ],
    };

    CylinderRV::new(x.partition.clone(), AccumulatorSpec { dim, init, updates, terminal })
}

fn remap_refs(c: &mut ComponentUpdate, map: &[usize]) {
    match c {
        ComponentUpdate::AddWeighted { with, .. }
        | ComponentUpdate::AddWeightedSquare { with, .. }
        | ComponentUpdate::AddWeightedTime { with, .. } => {
            *with = map[*with];
        }
        ComponentUpdate::Affine { .. } => {
            // Affine columns are never shared or remapped; they are kept
            // whole-dimension and validated against the combined spec.
        }
        _ => {}
    }
}
