//! Common interpretation of signals: agents share the signal technologies
//! `η^i(·|θ)` but hold different priors `ρ^i` over the state. When one agent is
//! uniformly noisy and everyone else nearly certain, the consensus tracks that
//! one agent's prior expectation.

use std::collections::HashSet;

use nalgebra::DMatrix;

use crate::consensus::{self, Target};
use crate::error::{Error, Result, Violation};
use crate::graph;
use crate::interaction::{self, FirstOrderMap, InteractionStructure};
use crate::linalg;
use crate::model::{check_probability, BasicVariable, InterimBelief, ModelSpec, Network, Prior, PROB_TOL};
use crate::spectral::{self, StationaryMethod};

/// Agent whose prior the consensus is compared with.
pub const IGNORANT: usize = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct CisSpec {
    pub states: Vec<String>,
    pub agents: Vec<String>,
    pub signals: Vec<Vec<String>>,
    /// `rho[i][θ]`, strictly positive.
    pub rho: Vec<Vec<f64>>,
    /// `eta[i][θ][t]` is `η^i(t|θ)`.
    pub eta: Vec<Vec<Vec<f64>>>,
    pub network: Network,
    pub y: Option<BasicVariable>,
}

impl CisSpec {
    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn n_signals(&self) -> usize {
        self.signals.iter().map(Vec::len).sum()
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let (ns, na) = (self.n_states(), self.n_agents());
        if ns == 0 {
            out.push(Violation::new("states", "at least one state is required"));
        }
        if na < 2 {
            out.push(Violation::new("agents", "at least two agents are required"));
        }
        for (what, len) in [("signals", self.signals.len()), ("rho", self.rho.len()), ("eta", self.eta.len())] {
            if len != na {
                out.push(Violation::new(what, format!("expected {na} agents, found {len}")));
            }
        }
        if !out.is_empty() {
            return out;
        }
        let mut seen = HashSet::new();
        for (i, agent) in self.agents.iter().enumerate() {
            if self.signals[i].is_empty() {
                out.push(Violation::new(format!("signals.{agent}"), "each agent needs at least one signal"));
            }
            for s in &self.signals[i] {
                if !seen.insert(s) {
                    out.push(Violation::new(format!("signals.{agent}"), format!("signal label `{s}` is not unique")));
                }
            }
            check_probability(&mut out, &format!("rho.{agent}"), &self.rho[i], ns, PROB_TOL);
            if self.rho[i].iter().any(|&r| r <= 0.0) {
                out.push(Violation::new(format!("rho.{agent}"), "prior must have full support"));
            }
            if self.eta[i].len() != ns {
                out.push(Violation::new(
                    format!("eta.{agent}"),
                    format!("expected {ns} rows, found {}", self.eta[i].len()),
                ));
                continue;
            }
            for (t, row) in self.eta[i].iter().enumerate() {
                let loc = format!("eta.{agent}.{}", self.states[t]);
                check_probability(&mut out, &loc, row, self.signals[i].len(), PROB_TOL);
            }
        }
        let w = &self.network.weights;
        if w.nrows() != na || w.ncols() != na {
            out.push(Violation::new("network", format!("expected a {na}x{na} matrix")));
        } else {
            for i in 0..na {
                let row: Vec<f64> = w.row(i).iter().cloned().collect();
                check_probability(&mut out, &format!("network row {}", self.agents[i]), &row, na, PROB_TOL);
                if !self.network.diagonal_allowed && w[(i, i)] != 0.0 {
                    out.push(Violation::new(
                        format!("network row {}", self.agents[i]),
                        "self-weight is nonzero but diagonal weights are not allowed",
                    ));
                }
            }
        }
        if let Some(y) = &self.y {
            if y.values.len() != ns {
                out.push(Violation::new("y", format!("expected {ns} values, found {}", y.values.len())));
            }
        }
        out
    }

    /// `μ^i(t) = Σ_θ η^i(t|θ) ρ^i(θ)`.
    pub fn signal_prior(&self, agent: usize) -> Vec<f64> {
        signal_prior(&self.rho[agent], &self.eta[agent])
    }

    /// `𝐄^{ρ^i} y`.
    pub fn prior_expectation(&self, agent: usize, y: &[f64]) -> f64 {
        linalg::dot(&self.rho[agent], y)
    }
}

fn signal_prior(rho: &[f64], eta: &[Vec<f64>]) -> Vec<f64> {
    let k = eta.first().map_or(0, Vec::len);
    (0..k).map(|t| rho.iter().zip(eta).map(|(r, row)| r * row[t]).sum()).collect()
}

fn posterior(rho: &[f64], eta: &[Vec<f64>], t: usize, mu: f64) -> Vec<f64> {
    rho.iter().zip(eta).map(|(r, row)| row[t] * r / mu).collect()
}

/// Beliefs by Bayes' rule with conditionally independent signals, in marginal
/// form, with priors `μ^i` over each agent's signals.
pub fn build_pi_from_cis(cis: &CisSpec) -> Result<ModelSpec> {
    let violations = cis.validate();
    if !violations.is_empty() {
        return Err(Error::Invalid(violations));
    }
    let na = cis.n_agents();
    let mut beliefs = Vec::with_capacity(na);
    let mut priors = Vec::with_capacity(na);
    for i in 0..na {
        let mu = cis.signal_prior(i);
        let mut row = Vec::with_capacity(mu.len());
        for (t, &m) in mu.iter().enumerate() {
            if m <= 0.0 {
                return Err(Error::Precondition(format!(
                    "signal `{}` of agent `{}` has zero prior probability",
                    cis.signals[i][t], cis.agents[i]
                )));
            }
            let post = posterior(&cis.rho[i], &cis.eta[i], t, m);
            let signals = (0..na)
                .map(|j| {
                    (j != i).then(|| {
                        (0..cis.signals[j].len())
                            .map(|u| post.iter().zip(&cis.eta[j]).map(|(p, row)| p * row[u]).sum())
                            .collect()
                    })
                })
                .collect();
            row.push(InterimBelief::marginal(Some(post), signals));
        }
        beliefs.push(row);
        priors.push(Prior::new(mu));
    }
    Ok(ModelSpec {
        states: cis.states.clone(),
        agents: cis.agents.clone(),
        signals: cis.signals.clone(),
        beliefs,
        network: cis.network.clone(),
        priors: Some(priors),
        y: cis.y.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseProfile {
    /// Smallest `ε` for which `η^i` is at most `ε`-noisy; infinite when no such `ε` exists.
    pub epsilon: Vec<f64>,
    /// `min_{θ,t} η^i(t|θ)`.
    pub delta: Vec<f64>,
    /// The near-certain signal `t^i_θ` for each state, when `ε_i` is finite.
    pub near_certain: Vec<Option<Vec<usize>>>,
}

pub fn classify_noise(cis: &CisSpec) -> NoiseProfile {
    let mut epsilon = Vec::new();
    let mut delta = Vec::new();
    let mut near_certain = Vec::new();
    for eta in &cis.eta {
        delta.push(eta.iter().flatten().cloned().fold(f64::INFINITY, f64::min));
        match at_most_noisy(eta) {
            Some((e, picks)) => {
                epsilon.push(e);
                near_certain.push(Some(picks));
            }
            None => {
                epsilon.push(f64::INFINITY);
                near_certain.push(None);
            }
        }
    }
    NoiseProfile {
        epsilon,
        delta,
        near_certain,
    }
}

fn at_most_noisy(eta: &[Vec<f64>]) -> Option<(f64, Vec<usize>)> {
    let picks: Vec<usize> = eta
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (t, &v)| if v > best.1 { (t, v) } else { best })
                .0
        })
        .collect();
    let mut eps = 0.0_f64;
    for (theta, &t) in picks.iter().enumerate() {
        eps = eps.max(1.0 - eta[theta][t]);
        for (other, row) in eta.iter().enumerate() {
            if other != theta {
                eps = eps.max(row[t]);
            }
        }
    }
    let distinct = picks.iter().collect::<HashSet<_>>().len() == picks.len();
    let unique = eta
        .iter()
        .all(|row| row.iter().filter(|&&v| v >= 1.0 - eps - 1e-15).count() == 1);
    (eps < 1.0 && distinct && unique).then_some((eps, picks))
}

/// The rounded model: informed agents' technologies are replaced by
/// `η̂^i(t^i_θ|θ) = 1`; everything else is unchanged.
#[derive(Debug, Clone)]
pub struct HattedStructure {
    pub cis: CisSpec,
    pub model: ModelSpec,
    pub b: InteractionStructure,
    pub f: FirstOrderMap,
}

pub fn hatted_structure(cis: &CisSpec, informed: &[usize]) -> Result<HattedStructure> {
    let noise = classify_noise(cis);
    let mut rounded = cis.clone();
    for &i in informed {
        let name = cis.agents.get(i).ok_or_else(|| Error::InvalidParameter(format!("no agent {i}")))?;
        let picks = match (&noise.near_certain[i], noise.epsilon[i] < 0.5) {
            (Some(p), true) => p,
            _ => {
                return Err(Error::Precondition(format!(
                    "agent `{name}` has no unique near-certain signal per state (ε = {})",
                    noise.epsilon[i]
                )))
            }
        };
        let k = cis.signals[i].len();
        if let Some(t) = (0..k).find(|t| !picks.contains(t)) {
            return Err(Error::Precondition(format!(
                "signal `{}` of agent `{name}` is not near-certain in any state and vanishes after rounding",
                cis.signals[i][t]
            )));
        }
        rounded.eta[i] = picks
            .iter()
            .map(|&t| (0..k).map(|u| if u == t { 1.0 } else { 0.0 }).collect())
            .collect();
    }
    let model = build_pi_from_cis(&rounded)?;
    let b = interaction::build_b(&model)?;
    let f = interaction::build_f(&model)?;
    Ok(HattedStructure {
        cis: rounded,
        model,
        b,
        f,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChoMeyerReport {
    /// `‖B − B̂‖_∞`.
    pub norm_diff: f64,
    /// `max_{z≠z′} M_{B̂}(z, z′)`.
    pub mmfpt: f64,
    /// `½ ‖B − B̂‖_∞ · mmfpt`.
    pub bound: f64,
    /// `max_s |p(s) − p̂(s)| / p̂(s)`, when `B` is irreducible too.
    pub max_relative_error: Option<f64>,
    pub holds: Option<bool>,
}

/// Relative perturbation bound on stationary vectors via mean first passage times of `B̂`.
pub fn cho_meyer_bound(b: &DMatrix<f64>, b_hat: &DMatrix<f64>) -> Result<ChoMeyerReport> {
    let n = linalg::require_square(b_hat, "perturbed chain")?;
    if b.shape() != b_hat.shape() {
        return Err(Error::Dimension {
            what: "chains".into(),
            expected: n,
            found: b.nrows(),
        });
    }
    let m = spectral::mfpt(b_hat)?;
    let norm_diff = linalg::inf_norm(&(b - b_hat));
    let mmfpt = m.max_off_diagonal();
    let bound = 0.5 * norm_diff * mmfpt;
    let p_hat = spectral::stationary_distribution(b_hat, StationaryMethod::Direct)?.p;
    let max_relative_error = spectral::stationary_distribution(b, StationaryMethod::Direct)
        .ok()
        .map(|p| {
            p.p.iter()
                .zip(&p_hat)
                .map(|(a, h)| (a - h).abs() / h)
                .fold(0.0, f64::max)
        });
    Ok(ChoMeyerReport {
        norm_diff,
        mmfpt,
        bound,
        max_relative_error,
        holds: max_relative_error.map(|e| e <= bound * (1.0 + 1e-9) + 1e-12),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TyrannyReport {
    pub noise: NoiseProfile,
    /// `δ_1`.
    pub delta: f64,
    /// `max_{i≠1} ε_i`.
    pub epsilon: f64,
    pub consensus: f64,
    pub prior_expectation: f64,
    pub gap: f64,
    /// `4|Θ||S|² / (γ_min ρ_min)² · y_max · ε/δ`.
    pub rhs: f64,
    pub bound_holds: bool,
    pub hatted_consensus: f64,
    /// Largest `|π^i(t^j|t^i) − π̂^i(t^j|t^i)| / (4|Θ||S|ε/ρ^i_min)`; at most 1 when the lemma holds.
    pub bij_ratio: f64,
    pub bij_holds: bool,
    pub mmfpt: f64,
    /// `2 / (δ ρ^1_min γ_min²)`.
    pub mmfpt_bound: f64,
    pub first_passage_holds: bool,
    /// `‖B − B̂‖_∞` against `|S| · 4|Θ||S|ε/ρ_min`.
    pub norm_bound: f64,
    pub norm_holds: bool,
    /// `μ^i(t) ≥ (1 − ε) ρ^i_min` for every informed agent.
    pub prior_floor_holds: bool,
    pub cho_meyer: ChoMeyerReport,
    /// Longest shortest path in `B̂`.
    pub max_path_length: Option<usize>,
}

impl TyrannyReport {
    pub fn passed(&self) -> bool {
        self.bound_holds && self.bij_holds && self.first_passage_holds
    }
}

/// Checks the hypotheses (agent 0 uniformly noisy, all others nearly certain,
/// complete network) and compares the consensus with agent 0's prior expectation.
pub fn verify_tyranny(cis: &CisSpec, y: &[f64]) -> Result<TyrannyReport> {
    verify_tyranny_with(cis, y, IGNORANT)
}

pub fn verify_tyranny_with(cis: &CisSpec, y: &[f64], ignorant: usize) -> Result<TyrannyReport> {
    let violations = cis.validate();
    if !violations.is_empty() {
        return Err(Error::Invalid(violations));
    }
    if y.len() != cis.n_states() {
        return Err(Error::Dimension {
            what: "y".into(),
            expected: cis.n_states(),
            found: y.len(),
        });
    }
    if ignorant >= cis.n_agents() {
        return Err(Error::InvalidParameter(format!("no agent {ignorant}")));
    }
    let noise = classify_noise(cis);
    let informed: Vec<usize> = (0..cis.n_agents()).filter(|&i| i != ignorant).collect();
    let delta = noise.delta[ignorant];
    let epsilon = informed.iter().map(|&i| noise.epsilon[i]).fold(0.0, f64::max);

    let mut failures = Vec::new();
    if !(delta > 0.0) {
        failures.push(format!(
            "agent `{}` is not uniformly at least δ-noisy for any δ > 0",
            cis.agents[ignorant]
        ));
    }
    for &i in &informed {
        if !(noise.epsilon[i] < 0.5) {
            failures.push(format!(
                "agent `{}` is not at most ε-noisy for any ε < 1/2 (ε = {})",
                cis.agents[i], noise.epsilon[i]
            ));
        }
    }
    if !cis.network.is_complete() {
        failures.push("network is not complete".into());
    }
    if !failures.is_empty() {
        return Err(Error::Precondition(failures.join("; ")));
    }

    let model = build_pi_from_cis(cis)?;
    let hat = hatted_structure(cis, &informed)?;
    let b = interaction::build_b(&model)?;

    let result = consensus::consensus_expectation(&model, Target::State(y))?;
    let consensus = result.single().ok_or_else(|| Error::Reducible {
        closed_set: b.components().terminal_components()[0].clone(),
    })?;
    let hatted = consensus::consensus_with(&hat.model, &hat.b, hat.f.apply(y)?)?;
    let hatted_consensus = hatted.single().unwrap_or(f64::NAN);

    let prior_expectation = cis.prior_expectation(ignorant, y);
    let gap = (consensus - prior_expectation).abs();
    let n_theta = cis.n_states() as f64;
    let n_s = cis.n_signals() as f64;
    let gamma_min = cis.network.min_off_diagonal();
    let rho_min_of = |i: usize| cis.rho[i].iter().cloned().fold(f64::INFINITY, f64::min);
    let rho_min = (0..cis.n_agents()).map(rho_min_of).fold(f64::INFINITY, f64::min);
    let y_max = y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let rhs = 4.0 * n_theta * n_s * n_s / (gamma_min * rho_min).powi(2) * y_max * epsilon / delta;
    let bound_holds = gap <= rhs + 1e-12;

    let mut bij_ratio = 0.0_f64;
    let mut bij_holds = true;
    for i in 0..cis.n_agents() {
        let limit = 4.0 * n_theta * n_s * epsilon / rho_min_of(i);
        for (bel, bel_hat) in model.beliefs[i].iter().zip(&hat.model.beliefs[i]) {
            for j in (0..cis.n_agents()).filter(|&j| j != i) {
                let (Some(a), Some(h)) = (&bel.signals[j], &bel_hat.signals[j]) else {
                    continue;
                };
                for (u, v) in a.iter().zip(h) {
                    let d = (u - v).abs();
                    if d > limit + 1e-12 {
                        bij_holds = false;
                    }
                    if limit > 0.0 {
                        bij_ratio = bij_ratio.max(d / limit);
                    } else if d > 0.0 {
                        bij_ratio = f64::INFINITY;
                    }
                }
            }
        }
    }

    let cho_meyer = cho_meyer_bound(&b.b, &hat.b.b)?;
    let mmfpt_bound = 2.0 / (delta * rho_min_of(ignorant) * gamma_min * gamma_min);
    let norm_bound = n_s * 4.0 * n_theta * n_s * epsilon / rho_min;
    let prior_floor_holds = informed.iter().all(|&i| {
        let floor = (1.0 - epsilon) * rho_min_of(i);
        cis.signal_prior(i).iter().all(|&m| m >= floor - 1e-15)
    });

    Ok(TyrannyReport {
        delta,
        epsilon,
        consensus,
        prior_expectation,
        gap,
        rhs,
        bound_holds,
        hatted_consensus,
        bij_ratio,
        bij_holds,
        mmfpt: cho_meyer.mmfpt,
        mmfpt_bound,
        first_passage_holds: cho_meyer.mmfpt <= mmfpt_bound * (1.0 + 1e-12),
        norm_bound,
        norm_holds: cho_meyer.norm_diff <= norm_bound + 1e-15,
        prior_floor_holds,
        max_path_length: graph::diameter(&graph::support(&hat.b.b)),
        cho_meyer,
        noise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate;
    use crate::fixtures;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_state(eta: Vec<Vec<Vec<f64>>>, rho: Vec<Vec<f64>>) -> CisSpec {
        let signals = eta
            .iter()
            .enumerate()
            .map(|(i, e)| (0..e[0].len()).map(|k| format!("t{i}_{k}")).collect())
            .collect();
        let n = eta.len();
        CisSpec {
            states: vec!["lo".into(), "hi".into()],
            agents: (0..n).map(|i| format!("agent{i}")).collect(),
            signals,
            rho,
            eta,
            network: Network::from_rows(
                &(0..n)
                    .map(|i| (0..n).map(|j| if i == j { 0.0 } else { 1.0 / (n - 1) as f64 }).collect())
                    .collect::<Vec<_>>(),
            ),
            y: Some(BasicVariable::with_bound(vec![0.0, 1.0], 1.0)),
        }
    }

    #[test]
    fn bayes_examples() {
        let cis = two_state(
            vec![vec![vec![0.9, 0.1], vec![0.2, 0.8]], vec![vec![0.5, 0.5], vec![0.5, 0.5]]],
            vec![vec![0.5, 0.5], vec![0.3, 0.7]],
        );
        let m = build_pi_from_cis(&cis).unwrap();
        let post = m.beliefs[0][0].state.as_ref().unwrap();
        assert!((post[0] - 9.0 / 11.0).abs() <= 1e-15);
        // flat likelihood leaves the prior untouched
        for b in &m.beliefs[1] {
            assert_eq!(b.state.as_ref().unwrap(), &vec![0.3, 0.7]);
        }
        let perfect = two_state(
            vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![vec![0.5, 0.5], vec![0.5, 0.5]]],
            vec![vec![0.4, 0.6], vec![0.5, 0.5]],
        );
        let m = build_pi_from_cis(&perfect).unwrap();
        assert_eq!(m.beliefs[0][1].state.as_ref().unwrap(), &vec![0.0, 1.0]);
    }

    #[test]
    fn zero_probability_signal_is_named() {
        let cis = two_state(
            vec![vec![vec![1.0, 0.0], vec![1.0, 0.0]], vec![vec![0.5, 0.5], vec![0.5, 0.5]]],
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
        );
        let err = build_pi_from_cis(&cis).unwrap_err();
        assert!(err.to_string().contains("t0_1"), "{err}");
    }

    #[test]
    fn noise_examples() {
        let cis = two_state(
            vec![
                vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                vec![vec![0.5, 0.5], vec![0.5, 0.5]],
                vec![vec![0.98, 0.02], vec![0.02, 0.98]],
            ],
            vec![vec![0.5, 0.5]; 3],
        );
        let n = classify_noise(&cis);
        assert_eq!((n.epsilon[0], n.delta[0]), (0.0, 0.0));
        assert_eq!(n.delta[1], 0.5);
        assert!(n.epsilon[1].is_infinite());
        assert!((n.epsilon[2] - 0.02).abs() <= 1e-15);
        assert_eq!(n.near_certain[2], Some(vec![0, 1]));
        let three = CisSpec {
            eta: vec![vec![vec![1.0 / 3.0; 3]; 2], vec![vec![1.0 / 3.0; 3]; 2]],
            signals: vec![vec!["a".into(), "b".into(), "c".into()], vec!["d".into(), "e".into(), "f".into()]],
            rho: vec![vec![0.5, 0.5]; 2],
            ..two_state(vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]; 2], vec![vec![0.5, 0.5]; 2])
        };
        let n = classify_noise(&three);
        assert!((n.delta[0] - 1.0 / 3.0).abs() <= 1e-15 && n.epsilon[0].is_infinite());
    }

    #[test]
    fn rounding_deterministic_agents_is_identity() {
        let cis = fixtures::tyranny_extreme();
        let hat = hatted_structure(&cis, &[1, 2]).unwrap();
        let b = interaction::build_b(&build_pi_from_cis(&cis).unwrap()).unwrap();
        assert_eq!(hat.b.b, b.b);
    }

    #[test]
    fn extreme_case_is_exact() {
        let cis = fixtures::tyranny_extreme();
        let y = cis.y.clone().unwrap().values;
        let r = verify_tyranny(&cis, &y).unwrap();
        assert_eq!(r.epsilon, 0.0);
        assert_eq!(r.rhs, 0.0);
        assert!(r.gap <= 1e-9, "{r:?}");
        assert!(r.passed());
        assert_eq!(r.cho_meyer.bound, 0.0);
    }

    #[test]
    fn preconditions_name_agent() {
        let mut cis = fixtures::tyranny_extreme();
        cis.eta[0] = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        cis.eta[2] = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        let y = cis.y.clone().unwrap().values;
        let msg = verify_tyranny(&cis, &y).unwrap_err().to_string();
        assert!(msg.contains("agent `ignorant` is not uniformly"), "{msg}");
        assert!(msg.contains("agent `informed2` is not at most"), "{msg}");
    }

    #[test]
    fn hatted_consensus_is_ignorant_prior() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let cis = generate::random_cis(&mut rng, 3, 3, 0.2, 1e-3);
        let hat = hatted_structure(&cis, &[1, 2]).unwrap();
        let y = cis.y.clone().unwrap().values;
        let c = consensus::consensus_with(&hat.model, &hat.b, hat.f.apply(&y).unwrap()).unwrap();
        assert!((c.single().unwrap() - cis.prior_expectation(0, &y)).abs() <= 1e-12);
    }

    #[test]
    fn cho_meyer_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(72);
        let q = generate::random_stochastic(&mut rng, 6, 0.6);
        assert_eq!(cho_meyer_bound(&q, &q).unwrap().bound, 0.0);
        let noise = generate::random_stochastic(&mut rng, 6, 1.0);
        let q2 = &q * 0.99 + noise * 0.01;
        let r = cho_meyer_bound(&q2, &q).unwrap();
        assert_eq!(r.holds, Some(true), "{r:?}");
        let reducible = DMatrix::identity(2, 2);
        assert!(cho_meyer_bound(&reducible, &reducible).is_err());
    }

    #[test]
    fn stated_instance_is_within_one_percent() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let cis = generate::random_cis(&mut rng, 2, 3, 0.3, 1e-4);
        let y = cis.y.clone().unwrap();
        let r = verify_tyranny(&cis, &y.values).unwrap();
        assert!(r.passed() && r.gap <= 0.01 * y.max_abs(), "{r:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn bayes_consistency(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cis = generate::random_cis(&mut rng, 3, 3, 0.2, 1e-2);
            let m = build_pi_from_cis(&cis).unwrap();
            for i in 0..3 {
                let mu = cis.signal_prior(i);
                for (t, b) in m.beliefs[i].iter().enumerate() {
                    for (th, p) in b.state.as_ref().unwrap().iter().enumerate() {
                        prop_assert!((mu[t] * p - cis.rho[i][th] * cis.eta[i][th][t]).abs() <= 1e-12);
                    }
                }
            }
        }

        #[test]
        fn lemmas_hold(seed in any::<u64>(), states in 2usize..=3, eps_exp in 2i32..=5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cis = generate::random_cis(&mut rng, states, 3, 0.2, 10f64.powi(-eps_exp));
            let r = verify_tyranny(&cis, &cis.y.clone().unwrap().values).unwrap();
            prop_assert!(r.passed() && r.norm_holds && r.prior_floor_holds, "{:?}", r);
            prop_assert_eq!(r.cho_meyer.holds, Some(true));
        }
    }
}
