//! Second-order optimism and its contagion: when every type expects its
//! neighbours to be more optimistic than itself, the consensus expectation is
//! pushed up, by at least `f̄/(1 + ε/δ)`.

use nalgebra::DMatrix;

use crate::consensus;
use crate::error::{Error, Result};
use crate::fixtures;
use crate::interaction::{self, InteractionStructure};
use crate::linalg;
use crate::model::{BasicVariable, ModelSpec};
use crate::spectral;

/// Slack allowed when comparing a consensus to its lower bound.
pub const BOUND_TOL: f64 = 1e-9;

/// `x(2) = B F y`: each type's network average of its counterparties' first-order expectations.
pub fn second_order_expectations(spec: &ModelSpec, y: &[f64]) -> Result<Vec<f64>> {
    consensus::hoae(spec, consensus::Target::State(y), 2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimismReport {
    pub fbar: f64,
    /// Smallest `x(2) − x(1)` over types with `x(1) < f̄`; infinite when there are none.
    pub delta: f64,
    /// Largest `x(1) − x(2)` over types with `x(1) ≥ f̄`, floored at zero.
    pub epsilon: f64,
    pub hypotheses_hold: bool,
    /// `f̄/(1 + ε/δ)` when the hypotheses hold.
    pub bound: Option<f64>,
    /// The lowest Abel limit of `x(n)` over starting types (the consensus when `B` has one closed class).
    pub consensus: f64,
    /// Whether `consensus ≥ bound − 1e-9` (vacuously true when the hypotheses fail).
    pub bound_satisfied: bool,
}

/// `(δ, ε)` for first- and second-order expectations at threshold `f̄`.
pub fn drift_parameters(x1: &[f64], x2: &[f64], fbar: f64) -> (f64, f64) {
    let mut delta = f64::INFINITY;
    let mut epsilon = 0.0_f64;
    for (a, b) in x1.iter().zip(x2) {
        if *a < fbar {
            delta = delta.min(b - a);
        } else {
            epsilon = epsilon.max(a - b);
        }
    }
    (delta, epsilon)
}

pub fn contagion_bound(fbar: f64, delta: f64, epsilon: f64) -> Option<f64> {
    if !(delta > 0.0) {
        None
    } else if delta.is_infinite() {
        Some(fbar)
    } else {
        Some(fbar / (1.0 + epsilon / delta))
    }
}

pub fn optimism_hypotheses(spec: &ModelSpec, y: &[f64], fbar: f64) -> Result<OptimismReport> {
    let b = interaction::build_b(spec)?;
    let x1 = interaction::build_f(spec)?.apply(y)?;
    report_with(spec, &b, &x1, fbar)
}

fn report_with(spec: &ModelSpec, b: &InteractionStructure, x1: &[f64], fbar: f64) -> Result<OptimismReport> {
    let x2 = linalg::mat_vec(&b.b, x1);
    let (delta, epsilon) = drift_parameters(x1, &x2, fbar);
    let bound = contagion_bound(fbar, delta, epsilon);
    let result = consensus::consensus_with(spec, b, x1.to_vec())?;
    let consensus = result
        .limit_by_signal()
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok(OptimismReport {
        fbar,
        delta,
        epsilon,
        hypotheses_hold: bound.is_some(),
        bound,
        consensus,
        bound_satisfied: bound.is_none_or(|v| consensus >= v - BOUND_TOL),
    })
}

/// The mirror statement for pessimism, obtained from `y ↦ M − y`: the returned
/// report is about `M − y` at threshold `M − f̲`, so its bound caps the
/// consensus of `y` from above at `M − bound`.
pub fn pessimism_hypotheses(spec: &ModelSpec, y: &BasicVariable, f_low: f64) -> Result<OptimismReport> {
    let reflected = crate::generate::reflect(y);
    optimism_hypotheses(spec, &reflected.values, y.bound - f_low)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovOptimismReport {
    /// Ergodic distribution reached from the start state.
    pub ergodic: Vec<f64>,
    /// Its mass on `{s : f(s) ≥ f̄}`.
    pub mass_above: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Checks the drift conditions `(Qf)(s) ≥ f(s) + δ` below `f̄` and
/// `(Qf)(s) ≥ f(s) − ε` at or above it, then verifies that the chain started
/// at `start` spends at least `1/(1 + ε/δ)` of its time at or above `f̄`.
pub fn markov_optimism_check(
    q: &DMatrix<f64>,
    f: &[f64],
    fbar: f64,
    delta: f64,
    epsilon: f64,
    start: usize,
) -> Result<MarkovOptimismReport> {
    let n = linalg::require_square(q, "transition matrix")?;
    if f.len() != n {
        return Err(Error::Dimension {
            what: "function f".into(),
            expected: n,
            found: f.len(),
        });
    }
    if start >= n {
        return Err(Error::InvalidParameter(format!("start state {start} out of range")));
    }
    if !(delta > 0.0) || !(epsilon >= 0.0) {
        return Err(Error::InvalidParameter("need δ > 0 and ε ≥ 0".into()));
    }
    let qf = linalg::mat_vec(q, f);
    let mut violations = Vec::new();
    for s in 0..n {
        if f[s] < fbar && qf[s] < f[s] + delta - 1e-12 {
            violations.push(format!("state {s}: drift {} below δ (condition 1)", qf[s] - f[s]));
        } else if f[s] >= fbar && qf[s] < f[s] - epsilon - 1e-12 {
            violations.push(format!("state {s}: shortfall {} above ε (condition 2)", f[s] - qf[s]));
        }
    }
    if !violations.is_empty() {
        return Err(Error::Precondition(violations.join("; ")));
    }
    let ergodic = spectral::ergodic_distribution_from(q, start)?;
    let mass_above = ergodic
        .iter()
        .zip(f)
        .filter(|(_, v)| **v >= fbar)
        .map(|(p, _)| p)
        .sum();
    let bound = 1.0 / (1.0 + epsilon / delta);
    Ok(MarkovOptimismReport {
        ergodic,
        mass_above,
        bound,
        holds: mass_above >= bound - BOUND_TOL,
    })
}

/// The two-agent chain on levels `0..=m` that attains the bound, realized as
/// an interaction structure; `perturbation` mixes each row with the uniform
/// distribution over the other agent's levels.
pub fn tightness_chain(m: usize, delta: f64, epsilon: f64, perturbation: f64) -> Result<InteractionStructure> {
    interaction::build_b(&fixtures::tightness_model(m, delta, epsilon, perturbation)?)
}

/// Stationary mass on the top level `S_m` of the tightness chain (the chain has
/// a single closed class, so this is well defined even without perturbation).
pub fn tightness_top_mass(m: usize, delta: f64, epsilon: f64, perturbation: f64) -> Result<f64> {
    let chain = tightness_chain(m, delta, epsilon, perturbation)?;
    let p = spectral::ergodic_distribution_from(&chain.b, 0)?;
    let top_1 = chain.index.global(0, m);
    let top_2 = chain.index.global(1, m);
    Ok(p[top_1] + p[top_2])
}
