//! Worked examples, built in code. The JSON files under
//! `fixtures/` at the repository root are serialized copies of these.

use crate::error::{Error, Result};
use crate::tyranny::CisSpec;
use crate::model::{BasicVariable, InterimBelief, JointLayout, ModelSpec, Network, Prior};

fn two_states() -> Vec<String> {
    vec!["lo".into(), "hi".into()]
}

fn point(n: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[k] = 1.0;
    v
}

/// Three agents on the cycle `γ^{i,i+1} = 1`, three signals each, all beliefs
/// deterministic. Agent `i`'s `k`-th signal pins state `(k + i) mod 3` and
/// makes the agent certain that agent `i+1` holds [`cycle_next_signal`].
pub fn certainty_cycle() -> ModelSpec {
    let n = 3;
    let mut beliefs = Vec::new();
    for i in 0..n {
        let next = (i + 1) % n;
        let prev = (i + n - 1) % n;
        beliefs.push(
            (0..3)
                .map(|k| {
                    let mut signals = vec![None; n];
                    signals[next] = Some(point(3, cycle_next_signal(i, k)));
                    signals[prev] = Some(vec![1.0 / 3.0; 3]);
                    InterimBelief::marginal(Some(point(3, (k + i) % 3)), signals)
                })
                .collect(),
        );
    }
    let mut rows = vec![vec![0.0; n]; n];
    for (i, row) in rows.iter_mut().enumerate() {
        row[(i + 1) % n] = 1.0;
    }
    ModelSpec {
        states: vec!["s0".into(), "s1".into(), "s2".into()],
        agents: vec!["1".into(), "2".into(), "3".into()],
        signals: (1..=n)
            .map(|i| (0..3).map(|k| format!("t{i}_{k}")).collect())
            .collect(),
        beliefs,
        network: Network::from_rows(&rows),
        priors: Some(vec![Prior::uniform(3); 3]),
        y: Some(BasicVariable::with_bound(vec![0.0, 1.0, 2.0], 2.0)),
    }
}

/// The signal of agent `i+1` that agent `i` is certain of at its `k`-th signal.
/// The shift on the last agent threads all nine signals into one cycle.
pub fn cycle_next_signal(agent: usize, k: usize) -> usize {
    if agent == 2 {
        (k + 1) % 3
    } else {
        k
    }
}

/// Three agents on the cycle `γ^{12} = γ^{23} = γ^{31} = 1`, signals
/// `{aⁱ, bⁱ}`. Each agent is sure agent `i+1` saw the same letter and agent
/// `i−1` saw the other one. Network and beliefs are each connected, yet
/// `{a¹, a², a³}` is closed under `B`.
pub fn counterexample() -> ModelSpec {
    let n = 3;
    let beliefs = (0..n)
        .map(|i| {
            (0..2)
                .map(|letter| {
                    let mut signals = vec![None; n];
                    signals[(i + 1) % n] = Some(point(2, letter));
                    signals[(i + n - 1) % n] = Some(point(2, 1 - letter));
                    let hi = if letter == 0 { 0.75 } else { 0.25 };
                    InterimBelief::marginal(Some(vec![1.0 - hi, hi]), signals)
                })
                .collect()
        })
        .collect();
    ModelSpec {
        states: two_states(),
        agents: vec!["1".into(), "2".into(), "3".into()],
        signals: (1..=n).map(|i| vec![format!("a{i}"), format!("b{i}")]).collect(),
        beliefs,
        network: Network::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
        ]),
        priors: Some(vec![Prior::uniform(2); 3]),
        y: Some(BasicVariable::new(vec![0.0, 1.0])),
    }
}

fn level_belief(levels: usize, k: usize) -> Vec<f64> {
    let hi = k as f64 / (levels - 1) as f64;
    vec![1.0 - hi, hi]
}

/// Two agents with `levels` signals each; signal `k` has `π(hi|t_k) = k/(K−1)`
/// and makes its holder certain the other agent holds `t_{k+1}` (or `t_K` at
/// the top). Each considers the other over-optimistic.
pub fn optimism_case_one(levels: usize) -> ModelSpec {
    assert!(levels >= 2);
    let beliefs = (0..2)
        .map(|i| {
            (0..levels)
                .map(|k| {
                    let mut signals = vec![None; 2];
                    signals[1 - i] = Some(point(levels, (k + 1).min(levels - 1)));
                    InterimBelief::marginal(Some(level_belief(levels, k)), signals)
                })
                .collect()
        })
        .collect();
    ModelSpec {
        states: two_states(),
        agents: vec!["1".into(), "2".into()],
        signals: (1..=2)
            .map(|i| (1..=levels).map(|k| format!("t{i}_{k}")).collect())
            .collect(),
        beliefs,
        network: Network::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]),
        priors: Some(vec![Prior::uniform(levels); 2]),
        y: Some(BasicVariable::new(vec![0.0, 1.0])),
    }
}

/// Three agents with `levels` signals each and full-mode beliefs. At `t_k`
/// agent `i` is certain that agent `i−1` holds `t_{k+1}` and agent `i+1` holds
/// `t_{k−1}` (clamped at the ends), with `π(hi|t_k) = k/(K−1)`.
/// `counterclockwise` selects `γ^{i,i−1} = 1`; otherwise `γ^{i,i+1} = 1`.
pub fn optimism_case_two(levels: usize, counterclockwise: bool) -> ModelSpec {
    assert!(levels >= 2);
    let n = 3;
    let beliefs = (0..n)
        .map(|i| {
            let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let layout = JointLayout {
                n_states: 2,
                dims: vec![levels; 2],
                others: others.clone(),
            };
            (0..levels)
                .map(|k| {
                    let profile: Vec<usize> = others
                        .iter()
                        .map(|&j| {
                            if j == (i + n - 1) % n {
                                (k + 1).min(levels - 1)
                            } else {
                                k.saturating_sub(1)
                            }
                        })
                        .collect();
                    let mut joint = vec![0.0; layout.len()];
                    for (theta, p) in level_belief(levels, k).into_iter().enumerate() {
                        joint[layout.index(theta, &profile)] = p;
                    }
                    InterimBelief::full(&layout, n, joint).expect("layout length matches")
                })
                .collect()
        })
        .collect();
    let mut rows = vec![vec![0.0; n]; n];
    for (i, row) in rows.iter_mut().enumerate() {
        let target = if counterclockwise { (i + n - 1) % n } else { (i + 1) % n };
        row[target] = 1.0;
    }
    ModelSpec {
        states: two_states(),
        agents: vec!["1".into(), "2".into(), "3".into()],
        signals: (1..=n)
            .map(|i| (1..=levels).map(|k| format!("t{i}_{k}")).collect())
            .collect(),
        beliefs,
        network: Network::from_rows(&rows),
        priors: Some(vec![Prior::uniform(levels); n]),
        y: Some(BasicVariable::new(vec![0.0, 1.0])),
    }
}

/// Transition row of the two-agent tightness chain from level `k`, over the
/// other agent's levels `0..=m`, mixed with the uniform row by `perturbation`.
pub fn tightness_row(m: usize, delta: f64, epsilon: f64, perturbation: f64, k: usize) -> Vec<f64> {
    let mut row = vec![0.0; m + 1];
    if k < m {
        row[k + 1] += delta;
        row[k] += 1.0 - delta;
    } else {
        row[m - 1] += epsilon;
        row[m] += 1.0 - epsilon;
    }
    let u = 1.0 / (m + 1) as f64;
    row.iter_mut().for_each(|x| *x = (1.0 - perturbation) * *x + perturbation * u);
    row
}

/// The tightness chain as a model: two agents with levels `0..=m`, the swap
/// network, states `θ_0..θ_m` with `y(θ_k) = k`, and each type certain of its
/// own level's state, so `Fy(t_k) = k`.
pub fn tightness_model(m: usize, delta: f64, epsilon: f64, perturbation: f64) -> Result<ModelSpec> {
    if m < 1 {
        return Err(Error::InvalidParameter("tightness chain needs m ≥ 1".into()));
    }
    for (name, v) in [("δ", delta), ("ε", epsilon)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::InvalidParameter(format!("{name} must lie in (0, 1), got {v}")));
        }
    }
    if !(0.0..1.0).contains(&perturbation) {
        return Err(Error::InvalidParameter(format!(
            "perturbation must lie in [0, 1), got {perturbation}"
        )));
    }
    let beliefs = (0..2)
        .map(|i| {
            (0..=m)
                .map(|k| {
                    let mut signals = vec![None; 2];
                    signals[1 - i] = Some(tightness_row(m, delta, epsilon, perturbation, k));
                    InterimBelief::marginal(Some(point(m + 1, k)), signals)
                })
                .collect()
        })
        .collect();
    Ok(ModelSpec {
        states: (0..=m).map(|k| format!("level{k}")).collect(),
        agents: vec!["1".into(), "2".into()],
        signals: (1..=2)
            .map(|i| (0..=m).map(|k| format!("t{i}_{k}")).collect())
            .collect(),
        beliefs,
        network: Network::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]),
        priors: None,
        y: Some(BasicVariable::with_bound((0..=m).map(|k| k as f64).collect(), m as f64)),
    })
}

/// Two agents with binary signals of accuracy `accuracy` about a binary state,
/// conditionally independent given a uniform state: a common prior on `Θ × T`.
pub fn common_prior_pair(accuracy: f64, network: Network) -> ModelSpec {
    let q = accuracy;
    let mut p_t = vec![0.0; 4];
    let mut post = vec![vec![0.0; 2]; 4];
    for (idx, (pt, post)) in p_t.iter_mut().zip(post.iter_mut()).enumerate() {
        let (ta, tb) = (idx / 2, idx % 2);
        for (theta, slot) in post.iter_mut().enumerate() {
            let la = if ta == theta { q } else { 1.0 - q };
            let lb = if tb == theta { q } else { 1.0 - q };
            *slot = 0.5 * la * lb;
        }
        *pt = post.iter().sum();
        let s = *pt;
        post.iter_mut().for_each(|x| *x /= s);
    }
    let mut spec =
        crate::generate::from_profile_distribution(2, &[2, 2], &p_t, &[post.clone(), post], network);
    spec.states = two_states();
    spec.agents = vec!["a".into(), "b".into()];
    spec.signals = vec![
        vec!["a_lo".into(), "a_hi".into()],
        vec!["b_lo".into(), "b_hi".into()],
    ];
    spec.y = Some(BasicVariable::new(vec![0.0, 1.0]));
    spec
}


/// Agent `ignorant` learns nothing (flat likelihoods); the two others observe
/// the state perfectly. Priors differ; the consensus is the ignorant agent's
/// prior expectation.
pub fn tyranny_extreme() -> CisSpec {
    CisSpec {
        states: two_states(),
        agents: vec!["ignorant".into(), "informed1".into(), "informed2".into()],
        signals: vec![
            vec!["u0".into(), "u1".into()],
            vec!["p1_lo".into(), "p1_hi".into()],
            vec!["p2_lo".into(), "p2_hi".into()],
        ],
        rho: vec![vec![0.3, 0.7], vec![0.6, 0.4], vec![0.9, 0.1]],
        eta: vec![
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            vec![point(2, 0), point(2, 1)],
            vec![point(2, 0), point(2, 1)],
        ],
        network: Network::from_rows(&[vec![0.0, 0.5, 0.5], vec![0.5, 0.0, 0.5], vec![0.25, 0.75, 0.0]]),
        y: Some(BasicVariable::with_bound(vec![1.0, 3.0], 3.0)),
    }
}
