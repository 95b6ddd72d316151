//! Primitive objects of an incomplete-information network model: states,
//! agents, signals, interim beliefs, priors, the network and basic random
//! variables.
//!
//! Labels are opaque. Every numeric routine works on dense indices fixed by
//! declaration order: states in `states` order, agents in `agents` order and
//! each agent's signals in the order listed for that agent.

use std::collections::HashSet;

use nalgebra::DMatrix;

use crate::error::{Error, Result, Violation};

/// Absolute tolerance used when checking that probability vectors sum to one.
pub const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeliefMode {
    /// The belief is a full joint distribution over states and others' signals.
    Full,
    /// Only the state marginal and the pairwise signal marginals are known.
    Marginal,
}

/// Shape of a full interim belief of one agent: a distribution over
/// `Θ × T^{-i}`, flattened state-major with the other agents' signals
/// following in agent order as a mixed-radix number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointLayout {
    pub n_states: usize,
    /// Indices of the other agents, in declaration order.
    pub others: Vec<usize>,
    /// Number of signals of each agent in `others`.
    pub dims: Vec<usize>,
}

impl JointLayout {
    pub fn profiles(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn len(&self) -> usize {
        self.n_states * self.profiles()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index of `(state, signals of the other agents)`.
    pub fn index(&self, state: usize, other_signals: &[usize]) -> usize {
        let mut idx = 0;
        for (&s, &d) in other_signals.iter().zip(&self.dims) {
            idx = idx * d + s;
        }
        state * self.profiles() + idx
    }

    /// Inverse of [`JointLayout::index`].
    pub fn decode(&self, mut idx: usize) -> (usize, Vec<usize>) {
        let profiles = self.profiles();
        let state = idx / profiles;
        idx %= profiles;
        let mut out = vec![0; self.dims.len()];
        for k in (0..self.dims.len()).rev() {
            out[k] = idx % self.dims[k];
            idx /= self.dims[k];
        }
        (state, out)
    }
}

/// Interim belief `π^i(·|t^i)` of one agent at one of its signals.
///
/// In full mode `joint` holds the whole distribution and the marginals are
/// derived from it. In marginal mode only the marginals are stored; that is
/// all the interaction structure and the first-order map need.
#[derive(Debug, Clone, PartialEq)]
pub struct InterimBelief {
    pub joint: Option<Vec<f64>>,
    /// `π^i(θ | t^i)` over states.
    pub state: Option<Vec<f64>>,
    /// Indexed by agent: `π^i(t^j | t^i)` over `T^j`. The owner's own slot is `None`.
    pub signals: Vec<Option<Vec<f64>>>,
}

impl InterimBelief {
    pub fn marginal(state: Option<Vec<f64>>, signals: Vec<Option<Vec<f64>>>) -> Self {
        Self {
            joint: None,
            state,
            signals,
        }
    }

    /// Builds a full-mode belief and derives its marginals.
    pub fn full(layout: &JointLayout, n_agents: usize, joint: Vec<f64>) -> Result<Self> {
        if joint.len() != layout.len() {
            return Err(Error::Dimension {
                what: "full interim belief".into(),
                expected: layout.len(),
                found: joint.len(),
            });
        }
        let (state, signals) = marginals_of(layout, n_agents, &joint);
        Ok(Self {
            joint: Some(joint),
            state: Some(state),
            signals,
        })
    }

    pub fn mode(&self) -> BeliefMode {
        if self.joint.is_some() {
            BeliefMode::Full
        } else {
            BeliefMode::Marginal
        }
    }
}

/// State marginal and per-agent signal marginals of a flattened joint.
pub fn marginals_of(
    layout: &JointLayout,
    n_agents: usize,
    joint: &[f64],
) -> (Vec<f64>, Vec<Option<Vec<f64>>>) {
    let mut state = vec![0.0; layout.n_states];
    let mut signals: Vec<Option<Vec<f64>>> = vec![None; n_agents];
    for (k, &j) in layout.others.iter().enumerate() {
        signals[j] = Some(vec![0.0; layout.dims[k]]);
    }
    for (idx, &p) in joint.iter().enumerate() {
        let (theta, profile) = layout.decode(idx);
        state[theta] += p;
        for (k, &j) in layout.others.iter().enumerate() {
            if let Some(v) = signals[j].as_mut() {
                v[profile[k]] += p;
            }
        }
    }
    (state, signals)
}

/// Row-stochastic matrix `Γ` of network weights between agents.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub weights: DMatrix<f64>,
    /// Whether `γ^{ii} > 0` is permitted (continuum-of-traders reading).
    pub diagonal_allowed: bool,
    /// Optional signal-dependent rows `γ^{ij}(t^i)`, indexed by global signal index.
    pub type_weights: Option<Vec<Vec<f64>>>,
}

impl Network {
    pub fn new(weights: DMatrix<f64>) -> Self {
        Self {
            weights,
            diagonal_allowed: false,
            type_weights: None,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        Self::new(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
    }

    pub fn with_diagonal(mut self, allowed: bool) -> Self {
        self.diagonal_allowed = allowed;
        self
    }

    pub fn len(&self) -> usize {
        self.weights.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `γ^{ij} > 0` for every `i ≠ j`.
    pub fn is_complete(&self) -> bool {
        let n = self.len();
        (0..n).all(|i| (0..n).all(|j| i == j || self.weights[(i, j)] > 0.0))
    }

    /// Smallest off-diagonal weight.
    pub fn min_off_diagonal(&self) -> f64 {
        let n = self.len();
        let mut m = f64::INFINITY;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    m = m.min(self.weights[(i, j)]);
                }
            }
        }
        m
    }

    pub fn has_self_weight(&self) -> bool {
        (0..self.len()).any(|i| self.weights[(i, i)] != 0.0)
    }
}

/// A state-measurable random variable with support in `[0, bound]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasicVariable {
    pub values: Vec<f64>,
    pub bound: f64,
}

impl BasicVariable {
    /// Uses the largest value as the bound (or 1 when every value is zero).
    pub fn new(values: Vec<f64>) -> Self {
        let max = values.iter().cloned().fold(0.0_f64, f64::max);
        let bound = if max > 0.0 { max } else { 1.0 };
        Self { values, bound }
    }

    pub fn with_bound(values: Vec<f64>, bound: f64) -> Self {
        Self { values, bound }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// A probability vector over one agent's signals: a prior `μ^i` or a pseudoprior `λ^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prior {
    pub weights: Vec<f64>,
}

impl Prior {
    pub fn new(weights: Vec<f64>) -> Self {
        Self { weights }
    }

    pub fn uniform(n: usize) -> Self {
        Self::new(vec![1.0 / n as f64; n])
    }
}

/// A full model description.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub states: Vec<String>,
    pub agents: Vec<String>,
    /// Per agent, that agent's signal labels.
    pub signals: Vec<Vec<String>>,
    /// Per agent, per signal.
    pub beliefs: Vec<Vec<InterimBelief>>,
    pub network: Network,
    pub priors: Option<Vec<Prior>>,
    pub y: Option<BasicVariable>,
}

/// A random variable handed to an expectation operator.
#[derive(Debug, Clone, Copy)]
pub enum RandomVariable<'a> {
    /// Values over the states `Θ`.
    State(&'a [f64]),
    /// Values over one agent's own signals.
    Signal(&'a [f64]),
}

impl ModelSpec {
    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn n_signals(&self) -> usize {
        self.signals.iter().map(Vec::len).sum()
    }

    pub fn joint_layout(&self, agent: usize) -> JointLayout {
        let others: Vec<usize> = (0..self.n_agents()).filter(|&j| j != agent).collect();
        let dims = others.iter().map(|&j| self.signals[j].len()).collect();
        JointLayout {
            n_states: self.n_states(),
            others,
            dims,
        }
    }

    pub fn has_full_beliefs(&self) -> bool {
        self.beliefs
            .iter()
            .flatten()
            .all(|b| b.mode() == BeliefMode::Full)
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate_model(self, PROB_TOL)
    }

    /// Interim expectation `(E^i y)(t^i) = Σ_θ π^i(θ|t^i) y(θ)` for every signal of `agent`.
    pub fn conditional_expectation(&self, agent: usize, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.n_states() {
            return Err(Error::Dimension {
                what: "basic random variable".into(),
                expected: self.n_states(),
                found: y.len(),
            });
        }
        self.beliefs[agent]
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let pi = b.state.as_ref().ok_or_else(|| Error::MissingStateMarginal {
                    signal: self.signals[agent][k].clone(),
                })?;
                Ok(pi.iter().zip(y).map(|(p, v)| p * v).sum())
            })
            .collect()
    }

    /// Ex ante expectation `𝐄^{prior} z = Σ_{t^i} prior(t^i) (E^i z)(t^i)`.
    pub fn ex_ante_expectation(
        &self,
        agent: usize,
        prior: &[f64],
        z: RandomVariable<'_>,
    ) -> Result<f64> {
        let n = self.signals[agent].len();
        if prior.len() != n {
            return Err(Error::Dimension {
                what: format!("prior of agent `{}`", self.agents[agent]),
                expected: n,
                found: prior.len(),
            });
        }
        let interim = match z {
            RandomVariable::State(y) => self.conditional_expectation(agent, y)?,
            RandomVariable::Signal(v) => {
                if v.len() != n {
                    return Err(Error::Dimension {
                        what: format!("signal variable of agent `{}`", self.agents[agent]),
                        expected: n,
                        found: v.len(),
                    });
                }
                v.to_vec()
            }
        };
        Ok(prior.iter().zip(&interim).map(|(p, x)| p * x).sum())
    }
}

pub(crate) fn check_probability(
    out: &mut Vec<Violation>,
    location: &str,
    v: &[f64],
    expected_len: usize,
    tol: f64,
) {
    if v.len() != expected_len {
        out.push(Violation::new(
            location,
            format!("expected {expected_len} entries, found {}", v.len()),
        ));
        return;
    }
    if let Some(x) = v.iter().find(|x| !x.is_finite() || **x < 0.0) {
        out.push(Violation::new(location, format!("entry {x} is negative or not finite")));
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > tol {
        out.push(Violation::new(location, format!("entries sum to {sum}, not 1")));
    }
}

/// Returns every invariant violation of `spec`; an empty list means the model is valid.
pub fn validate_model(spec: &ModelSpec, tol: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    let n_states = spec.n_states();
    let n_agents = spec.n_agents();

    if n_states == 0 {
        out.push(Violation::new("states", "at least one state is required"));
    }
    if n_agents < 2 {
        out.push(Violation::new("agents", "at least two agents are required"));
    }
    for (what, labels) in [("states", &spec.states), ("agents", &spec.agents)] {
        let mut seen = HashSet::new();
        for l in labels.iter() {
            if !seen.insert(l) {
                out.push(Violation::new(what, format!("duplicate label `{l}`")));
            }
        }
    }
    if spec.signals.len() != n_agents {
        out.push(Violation::new(
            "signals",
            format!("expected signal lists for {n_agents} agents, found {}", spec.signals.len()),
        ));
        return out;
    }
    let mut seen = HashSet::new();
    for (i, sigs) in spec.signals.iter().enumerate() {
        if sigs.is_empty() {
            out.push(Violation::new(
                format!("signals.{}", spec.agents[i]),
                "each agent needs at least one signal",
            ));
        }
        for s in sigs {
            if !seen.insert(s) {
                out.push(Violation::new(
                    format!("signals.{}", spec.agents[i]),
                    format!("signal label `{s}` is not unique across agents"),
                ));
            }
        }
    }

    let w = &spec.network.weights;
    if w.nrows() != n_agents || w.ncols() != n_agents {
        out.push(Violation::new(
            "network",
            format!("expected a {n_agents}x{n_agents} matrix, found {}x{}", w.nrows(), w.ncols()),
        ));
    } else {
        for i in 0..n_agents {
            let row: Vec<f64> = w.row(i).iter().cloned().collect();
            check_probability(&mut out, &format!("network row {}", spec.agents[i]), &row, n_agents, tol);
            if !spec.network.diagonal_allowed && w[(i, i)] != 0.0 {
                out.push(Violation::new(
                    format!("network row {}", spec.agents[i]),
                    "self-weight is nonzero but diagonal weights are not allowed",
                ));
            }
        }
    }
    if let Some(tw) = &spec.network.type_weights {
        if tw.len() != spec.n_signals() {
            out.push(Violation::new(
                "network.type_weights",
                format!("expected {} rows, found {}", spec.n_signals(), tw.len()),
            ));
        } else {
            let mut g = 0;
            for (i, sigs) in spec.signals.iter().enumerate() {
                for s in sigs {
                    let loc = format!("network.type_weights.{s}");
                    check_probability(&mut out, &loc, &tw[g], n_agents, tol);
                    if !spec.network.diagonal_allowed && tw[g].get(i).is_some_and(|&x| x != 0.0) {
                        out.push(Violation::new(loc, "self-weight is nonzero but diagonal weights are not allowed"));
                    }
                    g += 1;
                }
            }
        }
    }

    if spec.beliefs.len() != n_agents {
        out.push(Violation::new(
            "beliefs",
            format!("expected beliefs for {n_agents} agents, found {}", spec.beliefs.len()),
        ));
    } else {
        for i in 0..n_agents {
            let sigs = &spec.signals[i];
            if spec.beliefs[i].len() != sigs.len() {
                out.push(Violation::new(
                    format!("beliefs.{}", spec.agents[i]),
                    format!("expected {} beliefs, found {}", sigs.len(), spec.beliefs[i].len()),
                ));
                continue;
            }
            let layout = spec.joint_layout(i);
            for (k, b) in spec.beliefs[i].iter().enumerate() {
                let base = format!("beliefs.{}.{}", spec.agents[i], sigs[k]);
                if let Some(state) = &b.state {
                    check_probability(&mut out, &format!("{base}.state"), state, n_states, tol);
                }
                if b.signals.len() != n_agents {
                    out.push(Violation::new(
                        format!("{base}.signals"),
                        format!("expected {n_agents} slots, found {}", b.signals.len()),
                    ));
                    continue;
                }
                for (j, m) in b.signals.iter().enumerate() {
                    match (j == i, m) {
                        (true, Some(_)) => out.push(Violation::new(
                            format!("{base}.signals.{}", spec.agents[j]),
                            "an agent holds no belief about its own signal",
                        )),
                        (false, Some(v)) => check_probability(
                            &mut out,
                            &format!("{base}.signals.{}", spec.agents[j]),
                            v,
                            spec.signals[j].len(),
                            tol,
                        ),
                        _ => {}
                    }
                }
                if let Some(joint) = &b.joint {
                    check_probability(&mut out, &format!("{base}.full"), joint, layout.len(), tol);
                    if joint.len() == layout.len() {
                        let (state, signals) = marginals_of(&layout, n_agents, joint);
                        let close = |a: &[f64], b: &[f64]| {
                            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
                        };
                        if !b.state.as_deref().is_some_and(|s| close(s, &state)) {
                            out.push(Violation::new(format!("{base}.state"), "does not match the full belief"));
                        }
                        for j in layout.others.iter().copied() {
                            let derived = signals[j].as_deref().unwrap_or(&[]);
                            if !b.signals[j].as_deref().is_some_and(|s| close(s, derived)) {
                                out.push(Violation::new(
                                    format!("{base}.signals.{}", spec.agents[j]),
                                    "does not match the full belief",
                                ));
                            }
                        }
                    }
                }
            }
        }
    }

    if let Some(priors) = &spec.priors {
        if priors.len() != n_agents {
            out.push(Violation::new(
                "priors",
                format!("expected {n_agents} priors, found {}", priors.len()),
            ));
        } else {
            for (i, p) in priors.iter().enumerate() {
                check_probability(
                    &mut out,
                    &format!("priors.{}", spec.agents[i]),
                    &p.weights,
                    spec.signals[i].len(),
                    tol,
                );
            }
        }
    }

    if let Some(y) = &spec.y {
        if y.values.len() != n_states {
            out.push(Violation::new(
                "y",
                format!("expected {n_states} values, found {}", y.values.len()),
            ));
        }
        if !(y.bound > 0.0) {
            out.push(Violation::new("y.bound", "bound must be positive"));
        }
        for (k, v) in y.values.iter().enumerate() {
            if !(*v >= 0.0 && *v <= y.bound) {
                let label = spec.states.get(k).map_or("?", String::as_str);
                out.push(Violation::new(
                    format!("y.{label}"),
                    format!("value {v} outside [0, {}]", y.bound),
                ));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two() -> ModelSpec {
        let belief = |s: f64, o: f64| {
            InterimBelief::marginal(Some(vec![1.0 - s, s]), vec![None, Some(vec![1.0 - o, o])])
        };
        let belief2 = |s: f64, o: f64| {
            InterimBelief::marginal(Some(vec![1.0 - s, s]), vec![Some(vec![1.0 - o, o]), None])
        };
        ModelSpec {
            states: vec!["lo".into(), "hi".into()],
            agents: vec!["a".into(), "b".into()],
            signals: vec![vec!["a0".into(), "a1".into()], vec!["b0".into(), "b1".into()]],
            beliefs: vec![
                vec![belief(0.3, 0.4), belief(0.7, 0.6)],
                vec![belief2(0.2, 0.5), belief2(0.9, 0.5)],
            ],
            network: Network::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]),
            priors: Some(vec![Prior::uniform(2), Prior::uniform(2)]),
            y: Some(BasicVariable::new(vec![0.0, 1.0])),
        }
    }

    #[test]
    fn well_formed_model_has_no_violations() {
        assert!(two_by_two().validate().is_empty());
    }

    #[test]
    fn bad_network_row_is_reported() {
        let mut spec = two_by_two();
        spec.network.weights[(0, 1)] = 0.9;
        let v = spec.validate();
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].location.contains("network row a"));
    }

    #[test]
    fn duplicate_signal_label_is_reported() {
        let mut spec = two_by_two();
        spec.signals[1][0] = "a0".into();
        let v = spec.validate();
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].message.contains("a0"));
    }

    #[test]
    fn self_weight_requires_flag() {
        let mut spec = two_by_two();
        spec.network = Network::from_rows(&[vec![0.5, 0.5], vec![1.0, 0.0]]);
        assert_eq!(spec.validate().len(), 1);
        spec.network.diagonal_allowed = true;
        assert!(spec.validate().is_empty());
    }

    #[test]
    fn ex_ante_expectations() {
        let spec = two_by_two();
        // constant over signals
        let e = spec
            .ex_ante_expectation(0, &[0.5, 0.5], RandomVariable::Signal(&[5.0, 5.0]))
            .unwrap();
        assert_eq!(e, 5.0);
        // point-mass prior picks out z(t¹)
        let e = spec
            .ex_ante_expectation(0, &[1.0, 0.0], RandomVariable::Signal(&[2.5, 7.0]))
            .unwrap();
        assert_eq!(e, 2.5);
        // 0.5·0.3 + 0.5·0.7
        let e = spec
            .ex_ante_expectation(0, &[0.5, 0.5], RandomVariable::State(&[0.0, 1.0]))
            .unwrap();
        assert!((e - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ex_ante_dimension_mismatch_names_vector() {
        let spec = two_by_two();
        let err = spec
            .ex_ante_expectation(0, &[1.0], RandomVariable::State(&[0.0, 1.0]))
            .unwrap_err();
        assert!(err.to_string().contains("prior of agent `a`"));
    }

    #[test]
    fn full_belief_marginals_match_joint() {
        let layout = JointLayout {
            n_states: 2,
            others: vec![1, 2],
            dims: vec![2, 3],
        };
        let joint: Vec<f64> = (1..=12).map(|k| k as f64 / 78.0).collect();
        let b = InterimBelief::full(&layout, 3, joint.clone()).unwrap();
        let s: f64 = b.state.as_ref().unwrap().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        let (state, signals) = marginals_of(&layout, 3, &joint);
        assert_eq!(b.state.unwrap(), state);
        assert_eq!(b.signals, signals);
        for idx in 0..layout.len() {
            let (t, prof) = layout.decode(idx);
            assert_eq!(layout.index(t, &prof), idx);
        }
    }
}
