//! Property checks for the G-expectation and its conditionals on a curated
//! battery of cylinder variables: monotonicity, sub-additivity, translation
//! by adapted bounded factors, the positive/negative-part split of adapted
//! multipliers, and independence of post-conditioning increments.

use super::{
    combine_sum, conditional, expect, AccumulatorSpec, ComponentUpdate, CylinderRV,
    DpResolution, Factor, Partition, StepUpdate, Terminal, WeightedTerminal,
};
use crate::error::Result;
use crate::heat::GParams;
use crate::payoff::Payoff;
use crate::report::{AxiomCheck, AxiomReport};

/// Numerical tolerance for multi-level dynamic-program identities: each
/// inner solve carries a few 1e-3, and levels compound.
pub const EPS_NUM: f64 = 2e-2;

/// A pair of cylinder variables on a shared partition, conditioned at
/// `t_idx`. `ordered` certifies x >= y pointwise by construction.
#[derive(Debug, Clone)]
pub struct CylinderPair {
    pub label: String,
    pub x: CylinderRV,
    pub y: CylinderRV,
    pub t_idx: usize,
    pub ordered: bool,
}

fn of_b(partition: &Partition, phi: Payoff) -> CylinderRV {
    CylinderRV::function_of_terminal_b(partition.clone(), phi)
        .expect("battery variables are well-formed")
}

/// The standard sample battery on the partition {0, 1/2, 1}.
pub fn standard_cylinder_pairs() -> Vec<CylinderPair> {
    let partition = Partition::new(vec![0.0, 0.5, 1.0]).unwrap();
    let mk = |label: &str, x: Payoff, y: Payoff, ordered: bool| CylinderPair {
        label: label.to_string(),
        x: of_b(&partition, x),
        y: of_b(&partition, y),
        t_idx: 1,
        ordered,
    };
    vec![
        mk("abs_vs_identity", Payoff::abs_power(1), Payoff::identity(), true),
        mk("call_vs_identity", Payoff::call(0.0), Payoff::identity(), true),
        mk("square_vs_floor", Payoff::power(2), Payoff::constant(-1.0), true),
        mk("sine_vs_square", Payoff::sin(1.0), Payoff::power(2), false),
        mk("call_vs_put", Payoff::call(0.3), Payoff::put(-0.2), false),
    ]
}

/// Two-component variable: component 0 follows B to the end, component 1
/// freezes at the conditioning time.
fn with_frozen_state(
    partition: &Partition,
    t_idx: usize,
    terminal: Terminal,
) -> Result<CylinderRV> {
    let m = partition.steps();
    let updates: Vec<StepUpdate> = (0..m)
        .map(|j| {
            let frozen = if j < t_idx {
                ComponentUpdate::AddIncrement
            } else {
                ComponentUpdate::Hold
            };
            StepUpdate::of(vec![ComponentUpdate::AddIncrement, frozen])
        })
        .collect();
    CylinderRV::new(
        partition.clone(),
        AccumulatorSpec { dim: 2, init: vec![0.0, 0.0], updates, terminal },
    )
}

/// Two-component variable: component 0 collects squared post-t increments,
/// component 1 freezes B at the conditioning time.
fn post_t_square(partition: &Partition, t_idx: usize, terminal: Terminal) -> Result<CylinderRV> {
    let m = partition.steps();
    let updates: Vec<StepUpdate> = (0..m)
        .map(|j| {
            let collect =
                if j >= t_idx { ComponentUpdate::AddSquare } else { ComponentUpdate::Hold };
            let frozen =
                if j < t_idx { ComponentUpdate::AddIncrement } else { ComponentUpdate::Hold };
            StepUpdate::of(vec![collect, frozen])
        })
        .collect();
    CylinderRV::new(
        partition.clone(),
        AccumulatorSpec { dim: 2, init: vec![0.0, 0.0], updates, terminal },
    )
}

/// Conditional-expectation properties over the sample battery. All checks
/// compare value tables over the visited accumulator region.
pub fn check_properties(
    samples: &[CylinderPair],
    params: GParams,
    res: &DpResolution,
    tol: f64,
) -> Result<AxiomReport> {
    let mut report = AxiomReport::default();

    // (ii) monotonicity and (iii) sub-additivity of conditionals.
    let mut mono_worst = 0.0f64;
    let mut mono_witness = String::new();
    let mut subadd_worst = 0.0f64;
    let mut subadd_witness = String::new();
    for pair in samples {
        let tx = conditional(&pair.x, pair.t_idx, params, res)?;
        let ty = conditional(&pair.y, pair.t_idx, params, res)?;
        if pair.ordered {
            let violation = tx.core_max(|p, vx| ty.eval(p) - vx);
            if violation > mono_worst {
                mono_worst = violation;
                mono_witness = pair.label.clone();
            }
        }
        let diff = combine_sum(&pair.x, &pair.y.negated())?;
        let tdiff = conditional(&diff, pair.t_idx, params, res)?;
        let violation = tx.core_max(|p, vx| vx - ty.eval(p) - tdiff.eval(p));
        if violation > subadd_worst {
            subadd_worst = violation;
            subadd_witness = pair.label.clone();
        }
    }
    report.push(AxiomCheck::new(
        "cond_ii",
        "conditional_monotonicity",
        mono_worst.max(0.0),
        tol,
        mono_witness,
    ));
    report.push(AxiomCheck::new(
        "cond_iii",
        "conditional_sub_additivity",
        subadd_worst.max(0.0),
        tol,
        subadd_witness,
    ));

    // (v) translation by an adapted bounded factor: E[X + eta | F_t] =
    // E[X | F_t] + eta with eta = sin(B_t).
    let partition = Partition::new(vec![0.0, 0.5, 1.0]).unwrap();
    let t_idx = 1;
    let x = with_frozen_state(&partition, t_idx, Terminal::Power { index: 0, n: 2 })?;
    let x_plus_eta = with_frozen_state(
        &partition,
        t_idx,
        Terminal::LinComb {
            terms: vec![
                WeightedTerminal { coeff: 1.0, term: Terminal::Power { index: 0, n: 2 } },
                WeightedTerminal {
                    coeff: 1.0,
                    term: Terminal::Payoff { index: 1, payoff: Payoff::sin(1.0) },
                },
            ],
        },
    )?;
    let tx = conditional(&x, t_idx, params, res)?;
    let tz = conditional(&x_plus_eta, t_idx, params, res)?;
    let violation = tz.core_max(|p, vz| (vz - tx.eval(p) - p[1].sin()).abs());
    report.push(AxiomCheck::new("cond_v", "conditional_translation", violation, tol, "eta=sin(B_t)"));

    // (vi) adapted multiplier split: E[eta X | F_t] = eta^+ E[X | F_t] +
    // eta^- E[-X | F_t] with eta = sin(B_t), X = (B_1 - B_t)^2.
    let ex = post_t_square(&partition, t_idx, Terminal::Power { index: 0, n: 1 })?;
    let ex_neg = ex.negated();
    let eta_x = post_t_square(
        &partition,
        t_idx,
        Terminal::Product {
            factors: vec![
                Factor { index: 1, payoff: Payoff::sin(1.0) },
                Factor { index: 0, payoff: Payoff::identity() },
            ],
        },
    )?;
    let t_ex = conditional(&ex, t_idx, params, res)?;
    let t_ex_neg = conditional(&ex_neg, t_idx, params, res)?;
    let t_eta_x = conditional(&eta_x, t_idx, params, res)?;
    let violation = t_eta_x.core_max(|p, v| {
        let eta = p[1].sin();
        let split = eta.max(0.0) * t_ex.eval(p) + (-eta).max(0.0) * t_ex_neg.eval(p);
        (v - split).abs()
    });
    report.push(AxiomCheck::new(
        "cond_vi",
        "multiplier_sign_split",
        violation,
        tol,
        "eta=sin(B_t), X=(B_1-B_t)^2",
    ));

    // (vii) independence: a variable of post-t increments has a conditional
    // table constant in the frozen state, equal to its expectation.
    let post = post_t_square(&partition, t_idx, Terminal::Power { index: 0, n: 2 })?;
    let t_post = conditional(&post, t_idx, params, res)?;
    let e_post = expect(&post, params, res)?;
    let violation = t_post.core_max(|_, v| (v - e_post).abs());
    report.push(AxiomCheck::new(
        "cond_vii",
        "post_conditioning_independence",
        violation,
        tol,
        "X=(B_1-B_t)^4",
    ));

    Ok(report)
}

/// The unconditional sublinear-expectation axioms evaluated numerically on
/// the battery: the dynamic program must reproduce them within `tol`.
pub fn check_axioms_numeric(
    samples: &[CylinderPair],
    params: GParams,
    res: &DpResolution,
    tol: f64,
) -> Result<AxiomReport> {
    let mut report = AxiomReport::default();
    let mut mono = 0.0f64;
    let mut subadd = 0.0f64;
    let mut homog = 0.0f64;
    let mut transl = 0.0f64;
    let mut witness_mono = String::new();
    let mut witness_sub = String::new();

    for pair in samples {
        let ex = expect(&pair.x, params, res)?;
        let ey = expect(&pair.y, params, res)?;
        if pair.ordered && ey - ex > mono {
            mono = ey - ex;
            witness_mono = pair.label.clone();
        }
        let exy = expect(&combine_sum(&pair.x, &pair.y)?, params, res)?;
        if exy - ex - ey > subadd {
            subadd = exy - ex - ey;
            witness_sub = pair.label.clone();
        }
        for lambda in [0.0, 0.5, 2.0] {
            let el = expect(&pair.x.scaled(lambda), params, res)?;
            homog = homog.max((el - lambda * ex).abs());
        }
        let c = 0.8;
        let esh = expect(&pair.x.shifted(c), params, res)?;
        transl = transl.max((esh - ex - c).abs());
    }

    // constants are preserved exactly by the scheme
    let partition = Partition::new(vec![0.0, 0.5, 1.0]).unwrap();
    let const_rv = of_b(&partition, Payoff::constant(2.5));
    let ec = expect(&const_rv, params, res)?;
    report.push(AxiomCheck::new("gexp_a", "monotonicity", mono, tol, witness_mono));
    report.push(AxiomCheck::new(
        "gexp_b",
        "constant_preservation",
        (ec - 2.5).abs(),
        1e-9,
        "c=2.5",
    ));
    report.push(AxiomCheck::new("gexp_c", "sub_additivity", subadd, tol, witness_sub));
    report.push(AxiomCheck::new("gexp_d", "positive_homogeneity", homog, tol, ""));
    report.push(AxiomCheck::new("gexp_e", "constant_translatability", transl, tol, ""));
    Ok(report)
}
