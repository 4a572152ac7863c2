//! Sublinear expectations on finite outcome spaces.
//!
//! A random variable is a vector of values, one per outcome; an upper
//! expectation is the max of linear expectations over a finite set of
//! probability vectors. On this representation every axiom of a sublinear
//! expectation is checkable to floating-point accuracy, which is what the
//! rest of the toolkit leans on as its exact reference model.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{GcalcError, Result};
use crate::report::{AxiomCheck, AxiomReport};

/// Exact-arithmetic tolerance: these checks involve only sums and products.
pub const AXIOM_TOL: f64 = 1e-10;

const PROB_SUM_TOL: f64 = 1e-12;

/// A random variable on a finite outcome space.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteRV {
    values: Vec<f64>,
}

impl DiscreteRV {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(GcalcError::Shape("random variable needs at least one outcome".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GcalcError::Parameter("random variable values must be finite".into()));
        }
        Ok(DiscreteRV { values })
    }

    pub fn constant(c: f64, len: usize) -> Result<Self> {
        DiscreteRV::new(vec![c; len])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn abs(&self) -> Self {
        DiscreteRV { values: self.values.iter().map(|v| v.abs()).collect() }
    }

    pub fn abs_pow(&self, p: f64) -> Self {
        DiscreteRV { values: self.values.iter().map(|v| v.abs().powf(p)).collect() }
    }

    pub fn scale(&self, lambda: f64) -> Self {
        DiscreteRV { values: self.values.iter().map(|v| lambda * v).collect() }
    }

    pub fn shift(&self, c: f64) -> Self {
        DiscreteRV { values: self.values.iter().map(|v| v + c).collect() }
    }

    fn zip(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.len() != other.len() {
            return Err(GcalcError::Shape(format!(
                "outcome spaces differ: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        Ok(DiscreteRV {
            values: self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a * b)
    }

    /// Pointwise `self >= other`.
    pub fn dominates(&self, other: &Self) -> bool {
        self.len() == other.len()
            && self.values.iter().zip(&other.values).all(|(a, b)| a >= b)
    }
}

/// Max-of-linear-expectations over a nonempty finite set of probability vectors.
#[derive(Debug, Clone)]
pub struct UpperExpectation {
    measures: Vec<Vec<f64>>,
}

impl UpperExpectation {
    pub fn new(measures: Vec<Vec<f64>>) -> Result<Self> {
        if measures.is_empty() {
            return Err(GcalcError::Parameter("need at least one measure".into()));
        }
        let n = measures[0].len();
        if n == 0 {
            return Err(GcalcError::Shape("measures over an empty outcome space".into()));
        }
        for m in &measures {
            if m.len() != n {
                return Err(GcalcError::Shape("measures live on different outcome spaces".into()));
            }
            if m.iter().any(|p| *p < 0.0 || !p.is_finite()) {
                return Err(GcalcError::Parameter("probabilities must be nonnegative".into()));
            }
            let sum: f64 = m.iter().sum();
            if (sum - 1.0).abs() > PROB_SUM_TOL {
                return Err(GcalcError::Parameter(format!(
                    "probability vector sums to {sum}, not 1"
                )));
            }
        }
        Ok(UpperExpectation { measures })
    }

    pub fn singleton(measure: Vec<f64>) -> Result<Self> {
        UpperExpectation::new(vec![measure])
    }

    pub fn outcomes(&self) -> usize {
        self.measures[0].len()
    }

    pub fn measures(&self) -> &[Vec<f64>] {
        &self.measures
    }
}

/// `max_P sum_i P_i X_i`.
pub fn upper_expect(x: &DiscreteRV, e: &UpperExpectation) -> Result<f64> {
    if x.len() != e.outcomes() {
        return Err(GcalcError::Shape(format!(
            "random variable has {} outcomes, measures have {}",
            x.len(),
            e.outcomes()
        )));
    }
    let mut best = f64::NEG_INFINITY;
    for m in &e.measures {
        let v: f64 = m.iter().zip(x.values()).map(|(p, x)| p * x).sum();
        if v > best {
            best = v;
        }
    }
    Ok(best)
}

/// `(E[|X|^p])^(1/p)`, defined for p >= 1.
pub fn lp_norm(x: &DiscreteRV, e: &UpperExpectation, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(GcalcError::Parameter(format!("lp norm needs p >= 1, got {p}")));
    }
    Ok(upper_expect(&x.abs_pow(p), e)?.powf(1.0 / p))
}

/// Sampler used by the randomized checks: sizes 2..=8, entries in [-10, 10],
/// 1..=5 measures. Seeded, so reports are reproducible.
pub struct RvSampler {
    rng: ChaCha8Rng,
}

impl RvSampler {
    pub fn new(seed: u64) -> Self {
        RvSampler { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn outcome_count(&mut self) -> usize {
        self.rng.gen_range(2..=8)
    }

    pub fn rv(&mut self, n: usize) -> DiscreteRV {
        let values = (0..n).map(|_| self.rng.gen_range(-10.0..10.0)).collect();
        DiscreteRV::new(values).expect("sampler produces valid RVs")
    }

    /// A random variable dominated by `x` pointwise.
    pub fn rv_below(&mut self, x: &DiscreteRV) -> DiscreteRV {
        let values = x
            .values()
            .iter()
            .map(|v| v - self.rng.gen_range(0.0..5.0))
            .collect();
        DiscreteRV::new(values).expect("sampler produces valid RVs")
    }

    pub fn measure(&mut self, n: usize) -> Vec<f64> {
        // Exact normalization so the sum-to-one invariant holds to 1e-12.
        let raw: Vec<f64> = (0..n).map(|_| self.rng.gen_range(0.01..1.0)).collect();
        let sum: f64 = raw.iter().sum();
        let mut m: Vec<f64> = raw.iter().map(|r| r / sum).collect();
        let s: f64 = m.iter().sum();
        m[0] += 1.0 - s;
        m
    }

    pub fn upper_expectation(&mut self, n: usize) -> UpperExpectation {
        let k = self.rng.gen_range(1..=5);
        let measures = (0..k).map(|_| self.measure(n)).collect();
        UpperExpectation::new(measures).expect("sampler produces valid measure sets")
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.gen_range(lo..hi)
    }
}

fn fmt_rv(x: &DiscreteRV) -> String {
    let vals: Vec<String> = x.values().iter().map(|v| format!("{v:.4}")).collect();
    format!("[{}]", vals.join(","))
}

struct WorstCase {
    violation: f64,
    witness: String,
}

impl WorstCase {
    fn new() -> Self {
        WorstCase { violation: 0.0, witness: String::new() }
    }

    fn observe(&mut self, violation: f64, witness: impl FnOnce() -> String) {
        if violation > self.violation {
            self.violation = violation;
            self.witness = witness();
        }
    }

    fn into_check(self, id: &str, axiom: &str, tol: f64) -> AxiomCheck {
        AxiomCheck::new(id, axiom, self.violation, tol, self.witness)
    }
}

/// Randomized check of the five defining axioms of a sublinear expectation
/// against one finite-scenario upper expectation.
///
/// (a) monotonicity, (b) constant preservation, (c) sub-additivity,
/// (d) positive homogeneity, (e) constant translatability.
pub fn check_axioms(e: &UpperExpectation, trials: usize, seed: u64) -> Result<AxiomReport> {
    if trials == 0 {
        return Err(GcalcError::Parameter("trials must be >= 1".into()));
    }
    let n = e.outcomes();
    let mut s = RvSampler::new(seed);
    let mut mono = WorstCase::new();
    let mut consts = WorstCase::new();
    let mut subadd = WorstCase::new();
    let mut homog = WorstCase::new();
    let mut transl = WorstCase::new();

    for _ in 0..trials {
        let x = s.rv(n);
        let y = s.rv(n);
        let below = s.rv_below(&x);
        let lambda = if s.uniform(0.0, 1.0) < 0.1 { 0.0 } else { s.uniform(0.0, 5.0) };
        let c = s.uniform(-8.0, 8.0);

        let ex = upper_expect(&x, e)?;
        let ey = upper_expect(&y, e)?;

        // (a) X >= below pointwise implies E[X] >= E[below].
        mono.observe(upper_expect(&below, e)? - ex, || {
            format!("X={} Y={}", fmt_rv(&x), fmt_rv(&below))
        });
        // (b) E[c] = c.
        let cv = DiscreteRV::constant(c, n)?;
        consts.observe((upper_expect(&cv, e)? - c).abs(), || format!("c={c:.4}"));
        // (c) E[X] - E[Y] <= E[X - Y].
        subadd.observe(ex - ey - upper_expect(&x.sub(&y)?, e)?, || {
            format!("X={} Y={}", fmt_rv(&x), fmt_rv(&y))
        });
        // (d) E[lambda X] = lambda E[X] for lambda >= 0.
        homog.observe(
            (upper_expect(&x.scale(lambda), e)? - lambda * ex).abs(),
            || format!("lambda={lambda:.4} X={}", fmt_rv(&x)),
        );
        // (e) E[X + c] = E[X] + c.
        transl.observe((upper_expect(&x.shift(c), e)? - (ex + c)).abs(), || {
            format!("c={c:.4} X={}", fmt_rv(&x))
        });
    }

    let mut report = AxiomReport::default();
    report.push(mono.into_check("axiom_a", "monotonicity", AXIOM_TOL));
    report.push(consts.into_check("axiom_b", "constant_preservation", AXIOM_TOL));
    report.push(subadd.into_check("axiom_c", "sub_additivity", AXIOM_TOL));
    report.push(homog.into_check("axiom_d", "positive_homogeneity", AXIOM_TOL));
    report.push(transl.into_check("axiom_e", "constant_translatability", AXIOM_TOL));
    Ok(report)
}

/// Randomized check of the norm inequalities implied by the axioms:
/// the c_r inequality, Holder, Minkowski, and monotonicity of p -> ||X||_p.
pub fn check_inequalities(e: &UpperExpectation, trials: usize, seed: u64) -> Result<AxiomReport> {
    if trials == 0 {
        return Err(GcalcError::Parameter("trials must be >= 1".into()));
    }
    let n = e.outcomes();
    let mut s = RvSampler::new(seed);
    let mut cr = WorstCase::new();
    let mut holder = WorstCase::new();
    let mut minkowski = WorstCase::new();
    let mut norm_mono = WorstCase::new();

    for _ in 0..trials {
        let x = s.rv(n);
        let y = s.rv(n);
        let p = s.uniform(1.0 + 1e-6, 8.0);
        let q = p / (p - 1.0);
        let r = s.uniform(1e-3, 8.0);

        // E[|X+Y|^r] <= C_r (E[|X|^r] + E[|Y|^r]) with C_r = max(1, 2^(r-1)).
        let c_r = 1f64.max(2f64.powf(r - 1.0));
        let lhs = upper_expect(&x.add(&y)?.abs_pow(r), e)?;
        let rhs = c_r * (upper_expect(&x.abs_pow(r), e)? + upper_expect(&y.abs_pow(r), e)?);
        cr.observe(lhs - rhs, || format!("r={r:.4} X={} Y={}", fmt_rv(&x), fmt_rv(&y)));

        // E[|XY|] <= ||X||_p ||Y||_q.
        let lhs = upper_expect(&x.mul(&y)?.abs(), e)?;
        let rhs = lp_norm(&x, e, p)? * lp_norm(&y, e, q)?;
        holder.observe(lhs - rhs, || format!("p={p:.4} X={} Y={}", fmt_rv(&x), fmt_rv(&y)));

        // ||X+Y||_p <= ||X||_p + ||Y||_p.
        let lhs = lp_norm(&x.add(&y)?, e, p)?;
        let rhs = lp_norm(&x, e, p)? + lp_norm(&y, e, p)?;
        minkowski.observe(lhs - rhs, || format!("p={p:.4} X={} Y={}", fmt_rv(&x), fmt_rv(&y)));

        // ||X||_p <= ||X||_p' for p <= p'.
        let p2 = s.uniform(p, 8.0 + 1e-6);
        let lhs = lp_norm(&x, e, p)?;
        let rhs = lp_norm(&x, e, p2)?;
        norm_mono.observe(lhs - rhs, || format!("p={p:.4} p'={p2:.4} X={}", fmt_rv(&x)));
    }

    let mut report = AxiomReport::default();
    report.push(cr.into_check("ineq_cr", "cr_inequality", AXIOM_TOL));
    report.push(holder.into_check("ineq_holder", "holder", AXIOM_TOL));
    report.push(minkowski.into_check("ineq_minkowski", "minkowski", AXIOM_TOL));
    report.push(norm_mono.into_check("ineq_norm_mono", "lp_norm_monotone", AXIOM_TOL));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_point() -> UpperExpectation {
        UpperExpectation::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()
    }

    #[test]
    fn constants_are_preserved() {
        let e = two_point();
        let x = DiscreteRV::new(vec![1.0, 1.0]).unwrap();
        assert_eq!(upper_expect(&x, &e).unwrap(), 1.0);
    }

    #[test]
    fn max_of_linear_expectations() {
        let e = two_point();
        let x = DiscreteRV::new(vec![0.0, 2.0]).unwrap();
        assert_eq!(upper_expect(&x, &e).unwrap(), 2.0);
    }

    #[test]
    fn hand_enumerated_two_measures() {
        // Measures (1/2,1/2) and (3/4,1/4) on X=(-1,3): expectations 1 and 0.
        let e = UpperExpectation::new(vec![vec![0.5, 0.5], vec![0.75, 0.25]]).unwrap();
        let x = DiscreteRV::new(vec![-1.0, 3.0]).unwrap();
        assert!((upper_expect(&x, &e).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn subadditivity_can_be_strict() {
        let e = two_point();
        let x = DiscreteRV::new(vec![1.0, 0.0]).unwrap();
        let y = DiscreteRV::new(vec![0.0, 1.0]).unwrap();
        let exy = upper_expect(&x.add(&y).unwrap(), &e).unwrap();
        let ex = upper_expect(&x, &e).unwrap();
        let ey = upper_expect(&y, &e).unwrap();
        assert_eq!(exy, 1.0);
        assert_eq!(ex + ey, 2.0);
        assert!(exy < ex + ey);
    }

    #[test]
    fn zero_rv_has_zero_expectation_exactly() {
        let mut s = RvSampler::new(7);
        for _ in 0..50 {
            let n = s.outcome_count();
            let e = s.upper_expectation(n);
            let zero = DiscreteRV::constant(0.0, n).unwrap();
            assert_eq!(upper_expect(&zero, &e).unwrap(), 0.0);
        }
    }

    #[test]
    fn singleton_measure_is_linear() {
        let mut s = RvSampler::new(11);
        for _ in 0..100 {
            let n = s.outcome_count();
            let e = UpperExpectation::singleton(s.measure(n)).unwrap();
            let x = s.rv(n);
            let y = s.rv(n);
            let lhs = upper_expect(&x.add(&y).unwrap(), &e).unwrap();
            let rhs = upper_expect(&x, &e).unwrap() + upper_expect(&y, &e).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12, "additivity broke: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn lp_norm_of_constant_is_abs_constant() {
        let e = two_point();
        let x = DiscreteRV::new(vec![-3.0, -3.0]).unwrap();
        for p in [1.0, 1.5, 2.0, 4.0] {
            assert!((lp_norm(&x, &e, p).unwrap() - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lp_norm_hand_value() {
        // X=(1,2), measures {(1/2,1/2),(1,0)}, p=2: max(2.5, 1)^(1/2).
        let e = UpperExpectation::new(vec![vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap();
        let x = DiscreteRV::new(vec![1.0, 2.0]).unwrap();
        assert!((lp_norm(&x, &e, 2.0).unwrap() - 2.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn lp_norm_rejects_p_below_one() {
        let e = two_point();
        let x = DiscreteRV::new(vec![1.0, 2.0]).unwrap();
        assert!(lp_norm(&x, &e, 0.5).is_err());
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let e = two_point();
        let x = DiscreteRV::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(upper_expect(&x, &e), Err(GcalcError::Shape(_))));
    }

    #[test]
    fn axioms_pass_on_sampled_expectations() {
        let mut s = RvSampler::new(3);
        for trial in 0..20 {
            let n = s.outcome_count();
            let e = s.upper_expectation(n);
            let report = check_axioms(&e, 50, 1000 + trial).unwrap();
            assert!(report.all_pass(), "axiom violation: {}", report.to_csv());
        }
    }

    #[test]
    fn inequalities_pass_on_sampled_expectations() {
        let mut s = RvSampler::new(5);
        for trial in 0..20 {
            let n = s.outcome_count();
            let e = s.upper_expectation(n);
            let report = check_inequalities(&e, 50, 2000 + trial).unwrap();
            assert!(report.all_pass(), "inequality violation: {}", report.to_csv());
        }
    }

    #[test]
    fn norm_monotone_on_fixed_grid() {
        let mut s = RvSampler::new(13);
        let ps = [1.0, 1.5, 2.0, 4.0];
        for _ in 0..100 {
            let n = s.outcome_count();
            let e = s.upper_expectation(n);
            let x = s.rv(n);
            let norms: Vec<f64> = ps.iter().map(|p| lp_norm(&x, &e, *p).unwrap()).collect();
            for w in norms.windows(2) {
                assert!(w[0] <= w[1] + 1e-10, "norms not monotone: {norms:?}");
            }
        }
    }

    proptest! {
        #[test]
        fn prop_subadditivity(
            xs in prop::collection::vec(-10.0..10.0f64, 2..6),
            ys in prop::collection::vec(-10.0..10.0f64, 2..6),
            seed in 0u64..1000,
        ) {
            let n = xs.len().min(ys.len());
            let x = DiscreteRV::new(xs[..n].to_vec()).unwrap();
            let y = DiscreteRV::new(ys[..n].to_vec()).unwrap();
            let mut s = RvSampler::new(seed);
            let e = s.upper_expectation(n);
            let exy = upper_expect(&x.add(&y).unwrap(), &e).unwrap();
            let ex = upper_expect(&x, &e).unwrap();
            let ey = upper_expect(&y, &e).unwrap();
            prop_assert!(exy <= ex + ey + 1e-10);
        }

        #[test]
        fn prop_translation(
            xs in prop::collection::vec(-10.0..10.0f64, 2..6),
            c in -5.0..5.0f64,
            seed in 0u64..1000,
        ) {
            let x = DiscreteRV::new(xs).unwrap();
            let mut s = RvSampler::new(seed);
            let e = s.upper_expectation(x.len());
            let lhs = upper_expect(&x.shift(c), &e).unwrap();
            let rhs = upper_expect(&x, &e).unwrap() + c;
            prop_assert!((lhs - rhs).abs() <= 1e-10);
        }
    }
}
