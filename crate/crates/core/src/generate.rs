//! Random and hand-built instances used by tests, benchmarks and the acceptance suite.

use nalgebra::DMatrix;
use rand::Rng;

use crate::model::{BasicVariable, InterimBelief, JointLayout, ModelSpec, Network, Prior};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetworkKind {
    /// Each off-diagonal link present with probability ½ (at least one per row).
    Sparse,
    /// Every off-diagonal link positive.
    Complete,
    /// The cycle `i → i+1` plus random extra links: always connected.
    Cycle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeliefSupport {
    /// Each entry zero with probability ½ (at least one positive).
    Sparse,
    Full,
}

#[derive(Debug, Clone, Copy)]
pub struct ModelShape {
    pub agents: usize,
    pub states: usize,
    /// Each agent gets between 1 and this many signals.
    pub max_signals: usize,
    pub network: NetworkKind,
    pub beliefs: BeliefSupport,
}

impl ModelShape {
    pub fn sparse(agents: usize, states: usize, max_signals: usize) -> Self {
        Self {
            agents,
            states,
            max_signals,
            network: NetworkKind::Sparse,
            beliefs: BeliefSupport::Sparse,
        }
    }

    pub fn complete_sparse_beliefs(agents: usize, states: usize, max_signals: usize) -> Self {
        Self {
            network: NetworkKind::Complete,
            ..Self::sparse(agents, states, max_signals)
        }
    }

    pub fn cycle_full_support(agents: usize, states: usize, max_signals: usize) -> Self {
        Self {
            network: NetworkKind::Cycle,
            beliefs: BeliefSupport::Full,
            ..Self::sparse(agents, states, max_signals)
        }
    }

    pub fn dense(agents: usize, states: usize, max_signals: usize) -> Self {
        Self {
            network: NetworkKind::Sparse,
            beliefs: BeliefSupport::Full,
            ..Self::sparse(agents, states, max_signals)
        }
    }
}

/// A random probability vector; with `sparse`, entries are zeroed at random
/// but at least one stays positive.
pub fn random_simplex<R: Rng + ?Sized>(rng: &mut R, n: usize, sparse: bool) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            if sparse && rng.random_bool(0.5) {
                0.0
            } else {
                rng.random_range(0.05..1.0)
            }
        })
        .collect();
    if v.iter().all(|x| *x == 0.0) {
        let k = rng.random_range(0..n);
        v[k] = 1.0;
    }
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// A random irreducible row-stochastic matrix: a Hamiltonian cycle plus extra
/// edges present with probability `density`.
pub fn random_stochastic<R: Rng + ?Sized>(rng: &mut R, n: usize, density: f64) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(n, n);
    for i in 0..n {
        q[(i, (i + 1) % n)] = rng.random_range(0.1..1.0);
        for j in 0..n {
            if q[(i, j)] == 0.0 && rng.random_bool(density) {
                q[(i, j)] = rng.random_range(0.1..1.0);
            }
        }
        let s: f64 = q.row(i).sum();
        for j in 0..n {
            q[(i, j)] /= s;
        }
    }
    q
}

pub fn random_network<R: Rng + ?Sized>(rng: &mut R, n: usize, kind: NetworkKind) -> Network {
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut row = vec![0.0; n];
        for (j, x) in row.iter_mut().enumerate() {
            if j == i {
                continue;
            }
            let present = match kind {
                NetworkKind::Complete => true,
                NetworkKind::Sparse => rng.random_bool(0.5),
                NetworkKind::Cycle => j == (i + 1) % n || rng.random_bool(0.3),
            };
            if present {
                *x = rng.random_range(0.05..1.0);
            }
        }
        if row.iter().all(|x| *x == 0.0) {
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            row[j] = 1.0;
        }
        let s: f64 = row.iter().sum();
        for j in 0..n {
            w[(i, j)] = row[j] / s;
        }
    }
    Network::new(w)
}

pub(crate) fn labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|k| format!("{prefix}{k}")).collect()
}

pub(crate) fn agent_signal_labels(counts: &[usize]) -> Vec<Vec<String>> {
    counts
        .iter()
        .enumerate()
        .map(|(i, &c)| labels(&format!("t{i}_"), c))
        .collect()
}

/// A random model with marginal-mode beliefs.
pub fn random_model<R: Rng + ?Sized>(rng: &mut R, shape: &ModelShape) -> ModelSpec {
    let counts: Vec<usize> = (0..shape.agents)
        .map(|_| rng.random_range(1..=shape.max_signals))
        .collect();
    let sparse = shape.beliefs == BeliefSupport::Sparse;
    let beliefs = (0..shape.agents)
        .map(|i| {
            (0..counts[i])
                .map(|_| {
                    let state = random_simplex(rng, shape.states, sparse);
                    let signals = (0..shape.agents)
                        .map(|j| (j != i).then(|| random_simplex(rng, counts[j], sparse)))
                        .collect();
                    InterimBelief::marginal(Some(state), signals)
                })
                .collect()
        })
        .collect();
    let priors = counts.iter().map(|&c| Prior::new(random_simplex(rng, c, false))).collect();
    ModelSpec {
        states: labels("s", shape.states),
        agents: labels("agent", shape.agents),
        signals: agent_signal_labels(&counts),
        beliefs,
        network: random_network(rng, shape.agents, shape.network),
        priors: Some(priors),
        y: Some(random_y(rng, shape.states)),
    }
}

/// Rejection-samples [`random_model`] until the interaction structure is irreducible.
pub fn random_irreducible_model<R: Rng + ?Sized>(rng: &mut R, shape: &ModelShape) -> ModelSpec {
    loop {
        let spec = random_model(rng, shape);
        if crate::interaction::build_b(&spec).is_ok_and(|b| b.irreducible) {
            return spec;
        }
    }
}

/// A random model whose types all expect their neighbours to hold higher
/// first-order expectations, together with a threshold `f̄` at which the
/// optimism hypotheses hold (`δ > 0`). Rejection-sampled.
pub fn random_optimistic_model<R: Rng + ?Sized>(rng: &mut R, shape: &ModelShape) -> (ModelSpec, f64) {
    loop {
        let mut spec = random_model(rng, shape);
        let y = spec.y.clone().unwrap_or_else(|| random_y(rng, shape.states));
        let x1: Vec<Vec<f64>> = spec
            .beliefs
            .iter()
            .map(|bs| {
                bs.iter()
                    .map(|b| b.state.as_ref().map_or(0.0, |p| p.iter().zip(&y.values).map(|(a, v)| a * v).sum()))
                    .collect()
            })
            .collect();
        for i in 0..spec.agents.len() {
            for k in 0..spec.signals[i].len() {
                let own = x1[i][k];
                for j in 0..spec.agents.len() {
                    if j == i {
                        continue;
                    }
                    let top = x1[j].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let mut w: Vec<f64> = x1[j]
                        .iter()
                        .map(|&v| if v > own || v == top { rng.random::<f64>() + 1e-3 } else { 0.0 })
                        .collect();
                    let total: f64 = w.iter().sum();
                    w.iter_mut().for_each(|v| *v /= total);
                    spec.beliefs[i][k].signals[j] = Some(w);
                }
            }
        }
        let all: Vec<f64> = x1.iter().flatten().cloned().collect();
        let lo = all.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = all.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo < 1e-6 {
            continue;
        }
        let fbar = lo + (hi - lo) * rng.random_range(0.2..=1.0);
        let Ok(report) = crate::optimism::optimism_hypotheses(&spec, &y.values, fbar) else {
            continue;
        };
        if report.hypotheses_hold {
            return (spec, fbar);
        }
    }
}

/// A random common-interpretation model: agent 0 is uniformly `delta`-noisy
/// (its smallest likelihood is exactly `delta`), every other agent has one
/// signal per state received with probability `1 − epsilon`, the others share
/// `epsilon`. Priors differ across agents; the network is complete.
pub fn random_cis<R: Rng + ?Sized>(
    rng: &mut R,
    n_states: usize,
    n_agents: usize,
    delta: f64,
    epsilon: f64,
) -> crate::tyranny::CisSpec {
    let k0 = n_states.max(2);
    assert!(k0 as f64 * delta <= 1.0, "delta too large for {k0} signals");
    let ignorant: Vec<Vec<f64>> = (0..n_states)
        .map(|_| {
            let mut w = random_simplex(rng, k0, false);
            let z = rng.random_range(0..k0);
            let rest = 1.0 - w[z];
            w[z] = 0.0;
            w.iter_mut().for_each(|x| *x /= rest);
            w.iter().map(|x| delta + (1.0 - k0 as f64 * delta) * x).collect()
        })
        .collect();
    let mut eta = vec![ignorant];
    for _ in 1..n_agents {
        eta.push(
            (0..n_states)
                .map(|theta| {
                    let spread = if n_states > 1 { random_simplex(rng, n_states - 1, false) } else { vec![] };
                    let mut it = spread.into_iter();
                    (0..n_states)
                        .map(|t| if t == theta { 1.0 - epsilon } else { epsilon * it.next().unwrap_or(0.0) })
                        .collect()
                })
                .collect(),
        );
    }
    let mut counts = vec![k0];
    counts.extend(std::iter::repeat_n(n_states, n_agents - 1));
    crate::tyranny::CisSpec {
        states: labels("s", n_states),
        agents: labels("agent", n_agents),
        signals: agent_signal_labels(&counts),
        rho: (0..n_agents).map(|_| random_simplex(rng, n_states, false)).collect(),
        eta,
        network: random_network(rng, n_agents, NetworkKind::Complete),
        y: Some(random_y(rng, n_states)),
    }
}

/// A random basic variable in `[0, 1]` with bound 1.
pub fn random_y<R: Rng + ?Sized>(rng: &mut R, n_states: usize) -> BasicVariable {
    BasicVariable::with_bound((0..n_states).map(|_| rng.random::<f64>()).collect(), 1.0)
}

/// A full-mode model satisfying a common prior over signals. A random
/// distribution over signal profiles is shared by all agents. With
/// `common_state_prior` the state is drawn jointly with it too (a common prior
/// on all of `Θ × T`); otherwise each agent has its own conditional state
/// distribution per profile, so ex ante state expectations differ.
pub fn cps_model<R: Rng + ?Sized>(
    rng: &mut R,
    states: usize,
    counts: &[usize],
    network: Network,
    common_state_prior: bool,
) -> ModelSpec {
    let profiles: usize = counts.iter().product();
    let p_t = random_simplex(rng, profiles, false);
    let common_q: Vec<Vec<f64>> = (0..profiles).map(|_| random_simplex(rng, states, false)).collect();
    let q: Vec<Vec<Vec<f64>>> = (0..counts.len())
        .map(|_| {
            if common_state_prior {
                common_q.clone()
            } else {
                (0..profiles).map(|_| random_simplex(rng, states, false)).collect()
            }
        })
        .collect();
    let mut spec = from_profile_distribution(states, counts, &p_t, &q, network);
    spec.y = Some(random_y(rng, states));
    spec
}

/// Builds full-mode beliefs from a common distribution `p_t` over signal
/// profiles (mixed radix in agent order) and per-agent state conditionals
/// `q[i][profile]`. Priors are the marginals of `p_t`; every signal needs
/// positive marginal probability. `y` is left unset.
pub fn from_profile_distribution(
    states: usize,
    counts: &[usize],
    p_t: &[f64],
    q: &[Vec<Vec<f64>>],
    network: Network,
) -> ModelSpec {
    let agents = counts.len();
    let decode = |mut idx: usize| -> Vec<usize> {
        let mut out = vec![0; agents];
        for k in (0..agents).rev() {
            out[k] = idx % counts[k];
            idx /= counts[k];
        }
        out
    };
    let mut beliefs = Vec::with_capacity(agents);
    let mut priors = Vec::with_capacity(agents);
    for i in 0..agents {
        let others: Vec<usize> = (0..agents).filter(|&j| j != i).collect();
        let layout = JointLayout {
            n_states: states,
            dims: others.iter().map(|&j| counts[j]).collect(),
            others: others.clone(),
        };
        let mut mu = vec![0.0; counts[i]];
        let mut joints = vec![vec![0.0; layout.len()]; counts[i]];
        for (idx, &pt) in p_t.iter().enumerate() {
            let t = decode(idx);
            mu[t[i]] += pt;
            let other_sigs: Vec<usize> = others.iter().map(|&j| t[j]).collect();
            for (theta, &qv) in q[i][idx].iter().enumerate() {
                joints[t[i]][layout.index(theta, &other_sigs)] += pt * qv;
            }
        }
        let bs = joints
            .into_iter()
            .zip(&mu)
            .map(|(mut joint, &m)| {
                joint.iter_mut().for_each(|x| *x /= m);
                InterimBelief::full(&layout, agents, joint).expect("layout length matches")
            })
            .collect();
        beliefs.push(bs);
        priors.push(Prior::new(mu));
    }
    ModelSpec {
        states: labels("s", states),
        agents: labels("agent", agents),
        signals: agent_signal_labels(counts),
        beliefs,
        network,
        priors: Some(priors),
        y: None,
    }
}

/// Two agents over states `{lo, hi}`; agent `a` has one signal per entry of
/// `hi_probs` with `π(hi | signal) = hi_probs[k]`, agent `b` has a single
/// uninformative signal. The network is the swap.
pub fn two_signal_marginal(hi_probs: &[f64]) -> ModelSpec {
    let n = hi_probs.len();
    let a_beliefs = hi_probs
        .iter()
        .map(|&h| InterimBelief::marginal(Some(vec![1.0 - h, h]), vec![None, Some(vec![1.0])]))
        .collect();
    let b_beliefs = vec![InterimBelief::marginal(
        Some(vec![0.5, 0.5]),
        vec![Some(vec![1.0 / n as f64; n]), None],
    )];
    ModelSpec {
        states: vec!["lo".into(), "hi".into()],
        agents: vec!["a".into(), "b".into()],
        signals: vec![labels("a", n), vec!["b0".into()]],
        beliefs: vec![a_beliefs, b_beliefs],
        network: Network::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]),
        priors: None,
        y: Some(BasicVariable::new(vec![0.0, 1.0])),
    }
}

/// One state; every agent has a single signal and a cyclic network.
pub fn single_state(agents: usize) -> ModelSpec {
    let mut rows = vec![vec![0.0; agents]; agents];
    for (i, row) in rows.iter_mut().enumerate() {
        row[(i + 1) % agents] = 1.0;
    }
    complete_information(&rows, &vec![vec![1.0]; agents])
}

/// One signal per agent: `Tⁱ = {tⁱ}`; `state_beliefs[i]` is agent `i`'s belief about the state.
pub fn complete_information(network: &[Vec<f64>], state_beliefs: &[Vec<f64>]) -> ModelSpec {
    let n = network.len();
    let n_states = state_beliefs[0].len();
    let beliefs = (0..n)
        .map(|i| {
            let signals = (0..n).map(|j| (j != i).then(|| vec![1.0])).collect();
            vec![InterimBelief::marginal(Some(state_beliefs[i].clone()), signals)]
        })
        .collect();
    ModelSpec {
        states: labels("s", n_states),
        agents: labels("agent", n),
        signals: (0..n).map(|i| vec![format!("t{i}")]).collect(),
        beliefs,
        network: Network::from_rows(network),
        priors: Some(vec![Prior::new(vec![1.0]); n]),
        y: Some(BasicVariable::with_bound(
            (0..n_states).map(|k| k as f64).collect(),
            (n_states.max(2) - 1) as f64,
        )),
    }
}

/// `y ↦ bound − y`.
pub fn reflect(y: &BasicVariable) -> BasicVariable {
    BasicVariable::with_bound(y.values.iter().map(|v| y.bound - v).collect(), y.bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_models_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for shape in [
            ModelShape::sparse(3, 2, 3),
            ModelShape::dense(4, 3, 3),
            ModelShape::cycle_full_support(2, 2, 4),
        ] {
            for _ in 0..20 {
                let spec = random_model(&mut rng, &shape);
                assert!(spec.validate().is_empty(), "{:?}", spec.validate());
            }
        }
        let net = random_network(&mut rng, 3, NetworkKind::Complete);
        for common in [true, false] {
            let spec = cps_model(&mut rng, 2, &[2, 3, 2], net.clone(), common);
            assert!(spec.validate().is_empty(), "{:?}", spec.validate());
            assert!(spec.has_full_beliefs());
        }
        assert!(single_state(3).validate().is_empty());
        assert!(two_signal_marginal(&[0.3, 0.8]).validate().is_empty());
    }
}
