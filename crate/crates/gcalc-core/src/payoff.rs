//! Catalog of initial-condition / terminal payoffs.
//!
//! Everything the solvers consume as a function of one real variable is
//! drawn from this closed, serializable catalog so that Lipschitz bounds,
//! growth class, kink locations and convexity declarations are all known
//! analytically rather than estimated from samples.

use serde::{Deserialize, Serialize};

use crate::error::{GcalcError, Result};

/// Clip radius for the bounded-exponential payoff: exp(x) with x clamped.
pub const EXP_CLIP: f64 = 2.0;

/// Default truncation radius the stored Lipschitz bound refers to.
pub const DEFAULT_DOMAIN_RADIUS: f64 = 16.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum PayoffKind {
    /// x
    Identity,
    /// x^n
    Power { n: u32 },
    /// |x|^n
    AbsPower { n: u32 },
    /// -phi(x)
    Neg { of: Box<PayoffKind> },
    /// (x - K)^+
    Call {
        #[serde(rename = "K")]
        strike: f64,
    },
    /// (K - x)^+
    Put {
        #[serde(rename = "K")]
        strike: f64,
    },
    /// sin(omega x)
    Sin { omega: f64 },
    /// exp(x) with the argument clamped to [-EXP_CLIP, EXP_CLIP]
    ExpClip,
    /// a x + b
    Affine { a: f64, b: f64 },
    /// Sum of at most three catalog terms
    Sum { terms: Vec<PayoffKind> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    Bounded,
    Linear,
    Polynomial(u32),
}

impl Growth {
    fn join(self, other: Growth) -> Growth {
        self.degree().max(other.degree()).into()
    }

    fn degree(self) -> u32 {
        match self {
            Growth::Bounded => 0,
            Growth::Linear => 1,
            Growth::Polynomial(n) => n,
        }
    }
}

impl From<u32> for Growth {
    fn from(n: u32) -> Self {
        match n {
            0 => Growth::Bounded,
            1 => Growth::Linear,
            n => Growth::Polynomial(n),
        }
    }
}

impl PayoffKind {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            PayoffKind::Identity => x,
            PayoffKind::Power { n } => x.powi(*n as i32),
            PayoffKind::AbsPower { n } => x.abs().powi(*n as i32),
            PayoffKind::Neg { of } => -of.eval(x),
            PayoffKind::Call { strike } => (x - strike).max(0.0),
            PayoffKind::Put { strike } => (strike - x).max(0.0),
            PayoffKind::Sin { omega } => (omega * x).sin(),
            PayoffKind::ExpClip => x.clamp(-EXP_CLIP, EXP_CLIP).exp(),
            PayoffKind::Affine { a, b } => a * x + b,
            PayoffKind::Sum { terms } => terms.iter().map(|t| t.eval(x)).sum(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            PayoffKind::Power { n } | PayoffKind::AbsPower { n } => {
                if *n == 0 || *n > 12 {
                    return Err(GcalcError::Parameter(format!(
                        "payoff power n={n} outside supported range 1..=12"
                    )));
                }
            }
            PayoffKind::Sin { omega } => {
                if !omega.is_finite() || *omega == 0.0 {
                    return Err(GcalcError::Parameter("sin payoff needs finite omega != 0".into()));
                }
            }
            PayoffKind::Call { strike } | PayoffKind::Put { strike } => {
                if !strike.is_finite() {
                    return Err(GcalcError::Parameter("strike must be finite".into()));
                }
            }
            PayoffKind::Affine { a, b } => {
                if !a.is_finite() || !b.is_finite() {
                    return Err(GcalcError::Parameter("affine coefficients must be finite".into()));
                }
            }
            PayoffKind::Neg { of } => of.validate()?,
            PayoffKind::Sum { terms } => {
                if terms.is_empty() || terms.len() > 3 {
                    return Err(GcalcError::Parameter(
                        "sum payoff takes between 1 and 3 terms".into(),
                    ));
                }
                for t in terms {
                    t.validate()?;
                    if matches!(t, PayoffKind::Sum { .. }) {
                        return Err(GcalcError::Parameter("sum payoffs do not nest".into()));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn lipschitz_on(&self, radius: f64) -> f64 {
        match self {
            PayoffKind::Identity => 1.0,
            PayoffKind::Power { n } | PayoffKind::AbsPower { n } => {
                *n as f64 * radius.powi(*n as i32 - 1)
            }
            PayoffKind::Neg { of } => of.lipschitz_on(radius),
            PayoffKind::Call { .. } | PayoffKind::Put { .. } => 1.0,
            PayoffKind::Sin { omega } => omega.abs(),
            PayoffKind::ExpClip => EXP_CLIP.exp(),
            PayoffKind::Affine { a, .. } => a.abs(),
            PayoffKind::Sum { terms } => terms.iter().map(|t| t.lipschitz_on(radius)).sum(),
        }
    }

    fn growth(&self) -> Growth {
        match self {
            PayoffKind::Identity => Growth::Linear,
            PayoffKind::Power { n } | PayoffKind::AbsPower { n } => Growth::from(*n),
            PayoffKind::Neg { of } => of.growth(),
            PayoffKind::Call { .. } | PayoffKind::Put { .. } => Growth::Linear,
            PayoffKind::Sin { .. } => Growth::Bounded,
            PayoffKind::ExpClip => Growth::Bounded,
            PayoffKind::Affine { a, .. } => {
                if *a == 0.0 {
                    Growth::Bounded
                } else {
                    Growth::Linear
                }
            }
            PayoffKind::Sum { terms } => {
                terms.iter().fold(Growth::Bounded, |g, t| g.join(t.growth()))
            }
        }
    }

    /// Points where the payoff is not C^1; quadrature panels split here.
    fn kinks(&self, out: &mut Vec<f64>) {
        match self {
            PayoffKind::AbsPower { n } if *n % 2 == 1 => out.push(0.0),
            PayoffKind::Call { strike } | PayoffKind::Put { strike } => out.push(*strike),
            PayoffKind::ExpClip => {
                out.push(-EXP_CLIP);
                out.push(EXP_CLIP);
            }
            PayoffKind::Neg { of } => of.kinks(out),
            PayoffKind::Sum { terms } => {
                for t in terms {
                    t.kinks(out);
                }
            }
            _ => {}
        }
    }
}

/// A catalog payoff together with its derived metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PayoffKind", into = "PayoffKind")]
pub struct Payoff {
    kind: PayoffKind,
    lipschitz_bound: f64,
    growth: Growth,
}

impl TryFrom<PayoffKind> for Payoff {
    type Error = GcalcError;

    fn try_from(kind: PayoffKind) -> Result<Self> {
        Payoff::new(kind)
    }
}

impl From<Payoff> for PayoffKind {
    fn from(p: Payoff) -> PayoffKind {
        p.kind
    }
}

impl Payoff {
    pub fn new(kind: PayoffKind) -> Result<Self> {
        kind.validate()?;
        let lipschitz_bound = kind.lipschitz_on(DEFAULT_DOMAIN_RADIUS);
        let growth = kind.growth();
        Ok(Payoff { kind, lipschitz_bound, growth })
    }

    pub fn identity() -> Self {
        Payoff::new(PayoffKind::Identity).unwrap()
    }

    pub fn power(n: u32) -> Self {
        Payoff::new(PayoffKind::Power { n }).unwrap()
    }

    pub fn abs_power(n: u32) -> Self {
        Payoff::new(PayoffKind::AbsPower { n }).unwrap()
    }

    pub fn neg(inner: Payoff) -> Self {
        Payoff::new(PayoffKind::Neg { of: Box::new(inner.kind) }).unwrap()
    }

    pub fn call(strike: f64) -> Self {
        Payoff::new(PayoffKind::Call { strike }).unwrap()
    }

    pub fn put(strike: f64) -> Self {
        Payoff::new(PayoffKind::Put { strike }).unwrap()
    }

    pub fn sin(omega: f64) -> Self {
        Payoff::new(PayoffKind::Sin { omega }).unwrap()
    }

    pub fn exp_clip() -> Self {
        Payoff::new(PayoffKind::ExpClip).unwrap()
    }

    pub fn affine(a: f64, b: f64) -> Self {
        Payoff::new(PayoffKind::Affine { a, b }).unwrap()
    }

    pub fn constant(c: f64) -> Self {
        Payoff::affine(0.0, c)
    }

    pub fn sum(terms: Vec<Payoff>) -> Result<Self> {
        Payoff::new(PayoffKind::Sum { terms: terms.into_iter().map(|p| p.kind).collect() })
    }

    pub fn kind(&self) -> &PayoffKind {
        &self.kind
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.kind.eval(x)
    }

    /// Lipschitz bound on the default truncated domain.
    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz_bound
    }

    /// Lipschitz bound on [-radius, radius].
    pub fn lipschitz_on(&self, radius: f64) -> f64 {
        self.kind.lipschitz_on(radius)
    }

    pub fn growth(&self) -> Growth {
        self.growth
    }

    pub fn kinks(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.kind.kinks(&mut out);
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.dedup();
        out
    }

    /// Extra space-domain width needed beyond the diffusion scale so that
    /// truncation sits in the far field of every kink.
    pub fn domain_margin(&self) -> f64 {
        1.0 + self.kinks().iter().fold(0.0f64, |m, k| m.max(k.abs()))
    }

    /// Crude sup bound of |phi| on [-radius, radius], used for tail budgets.
    pub fn abs_bound_on(&self, radius: f64) -> f64 {
        let at_edges = self.eval(radius).abs().max(self.eval(-radius).abs());
        let via_lipschitz = self.eval(0.0).abs() + self.lipschitz_on(radius) * radius;
        at_edges.max(via_lipschitz)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| GcalcError::Schema(format!("payoff json: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("payoff serialization is infallible")
    }

    /// The standard payoff battery the verification suites sweep over.
    pub fn catalog() -> Vec<(String, Payoff)> {
        let entries = vec![
            ("identity", Payoff::identity()),
            ("square", Payoff::power(2)),
            ("neg_square", Payoff::neg(Payoff::power(2))),
            ("cube", Payoff::power(3)),
            ("quartic", Payoff::power(4)),
            ("abs", Payoff::abs_power(1)),
            ("neg_abs", Payoff::neg(Payoff::abs_power(1))),
            ("abs_cube", Payoff::abs_power(3)),
            ("call_atm", Payoff::call(0.0)),
            ("call_up", Payoff::call(0.5)),
            ("put_atm", Payoff::put(0.0)),
            ("put_down", Payoff::put(-0.5)),
            ("sine", Payoff::sin(1.0)),
            ("exp_clip", Payoff::exp_clip()),
            ("affine", Payoff::affine(0.5, -0.3)),
        ];
        entries.into_iter().map(|(n, p)| (n.to_string(), p)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;

    #[test]
    fn json_schema_round_trip() {
        let call = Payoff::call(0.0);
        assert_eq!(call.to_json(), r#"{"kind":"call","params":{"K":0.0}}"#);
        let back = Payoff::from_json(&call.to_json()).unwrap();
        assert_eq!(back, call);

        let id = Payoff::identity();
        assert_eq!(id.to_json(), r#"{"kind":"identity"}"#);
        assert_eq!(Payoff::from_json(r#"{"kind":"identity"}"#).unwrap(), id);

        let p = Payoff::from_json(r#"{"kind":"power","params":{"n":2}}"#).unwrap();
        assert_eq!(p.eval(3.0), 9.0);

        let s = Payoff::from_json(
            r#"{"kind":"sum","params":{"terms":[{"kind":"identity"},{"kind":"call","params":{"K":1.0}}]}}"#,
        )
        .unwrap();
        assert_eq!(s.eval(2.0), 3.0);
    }

    #[test]
    fn malformed_json_is_a_schema_error() {
        assert!(matches!(
            Payoff::from_json(r#"{"kind":"no_such_payoff"}"#),
            Err(GcalcError::Schema(_))
        ));
        assert!(matches!(
            Payoff::from_json(r#"{"kind":"sum","params":{"terms":[]}}"#),
            Err(GcalcError::Schema(_))
        ));
    }

    #[test]
    fn evaluations() {
        assert_eq!(Payoff::power(2).eval(-3.0), 9.0);
        assert_eq!(Payoff::abs_power(3).eval(-2.0), 8.0);
        assert_eq!(Payoff::call(0.5).eval(0.25), 0.0);
        assert_eq!(Payoff::call(0.5).eval(1.0), 0.5);
        assert_eq!(Payoff::put(0.0).eval(-2.0), 2.0);
        assert_eq!(Payoff::neg(Payoff::power(2)).eval(2.0), -4.0);
        assert!((Payoff::exp_clip().eval(10.0) - EXP_CLIP.exp()).abs() < 1e-15);
    }

    #[test]
    fn lipschitz_bounds_hold_on_samples() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for (_, p) in Payoff::catalog() {
            let bound = p.lipschitz_on(8.0);
            for _ in 0..500 {
                let x: f64 = rng.gen_range(-8.0..8.0);
                let y: f64 = rng.gen_range(-8.0..8.0);
                if (x - y).abs() < 1e-9 {
                    continue;
                }
                let slope = (p.eval(x) - p.eval(y)).abs() / (x - y).abs();
                assert!(
                    slope <= bound * (1.0 + 1e-12),
                    "{:?}: slope {slope} exceeds bound {bound}",
                    p.kind()
                );
            }
        }
    }

    #[test]
    fn kinks_and_margins() {
        assert_eq!(Payoff::call(0.5).kinks(), vec![0.5]);
        assert_eq!(Payoff::abs_power(1).kinks(), vec![0.0]);
        assert!(Payoff::power(2).kinks().is_empty());
        assert_eq!(Payoff::call(0.5).domain_margin(), 1.5);
        assert_eq!(Payoff::power(2).domain_margin(), 1.0);
    }

    #[test]
    fn growth_classes() {
        assert_eq!(Payoff::sin(2.0).growth(), Growth::Bounded);
        assert_eq!(Payoff::identity().growth(), Growth::Linear);
        assert_eq!(Payoff::power(4).growth(), Growth::Polynomial(4));
        let s = Payoff::sum(vec![Payoff::power(2), Payoff::sin(1.0)]).unwrap();
        assert_eq!(s.growth(), Growth::Polynomial(2));
    }
}
