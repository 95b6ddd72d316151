//! Higher-order average expectations, the consensus expectation, agent-type
//! weights, pseudopriors and common-prior-over-signals checks.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::ComponentAnalysis;
use crate::interaction::{self, InteractionStructure, SignalIndex};
use crate::linalg::{self, Operator};
use crate::model::ModelSpec;
use crate::spectral;

/// Absolute tolerance of the common-prior-over-signals check.
pub const CPS_TOL: f64 = 1e-10;

/// What is being averaged: a state variable `y` (mapped through `F`) or a
/// per-signal variable `f` given directly, indexed by global signal.
#[derive(Debug, Clone, Copy)]
pub enum Target<'a> {
    State(&'a [f64]),
    Signal(&'a [f64]),
}

/// `x(1)`: `Fy` for a state variable, or `f` itself.
pub fn first_order(spec: &ModelSpec, target: Target<'_>) -> Result<Vec<f64>> {
    match target {
        Target::State(y) => interaction::build_f(spec)?.apply(y),
        Target::Signal(f) => {
            let n = spec.n_signals();
            if f.len() != n {
                return Err(Error::Dimension {
                    what: "per-signal variable".into(),
                    expected: n,
                    found: f.len(),
                });
            }
            Ok(f.to_vec())
        }
    }
}

/// `x(n) = Bⁿ⁻¹ x(1)`.
pub fn hoae(spec: &ModelSpec, target: Target<'_>, n: usize) -> Result<Vec<f64>> {
    let b = interaction::build_b(spec)?;
    hoae_with(&b, &first_order(spec, target)?, n)
}

pub fn hoae_with(b: &InteractionStructure, x1: &[f64], n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "higher-order expectations start at order 1".into(),
        ));
    }
    let op = Operator::new(&b.b);
    let mut x = x1.to_vec();
    for _ in 1..n {
        x = op.apply(&x);
    }
    Ok(x)
}

/// `x(n)` by the defining recursion `xⁱ(n+1) = Σⱼ γⁱʲ Eⁱ xʲ(n)`, evaluated
/// from the beliefs directly without forming `B`.
pub fn hoae_recursive(spec: &ModelSpec, target: Target<'_>, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "higher-order expectations start at order 1".into(),
        ));
    }
    let index = SignalIndex::of(spec);
    let x1 = first_order(spec, target)?;
    let mut per_agent: Vec<Vec<f64>> = index.ranges.iter().map(|r| x1[r.clone()].to_vec()).collect();
    for _ in 1..n {
        let mut next = Vec::with_capacity(spec.n_agents());
        for i in 0..spec.n_agents() {
            let mut xi = Vec::with_capacity(spec.signals[i].len());
            for (k, belief) in spec.beliefs[i].iter().enumerate() {
                let g = index.global(i, k);
                let mut acc = 0.0;
                for (j, xj) in per_agent.iter().enumerate() {
                    let w = match &spec.network.type_weights {
                        Some(tw) => tw[g][j],
                        None => spec.network.weights[(i, j)],
                    };
                    if w == 0.0 {
                        continue;
                    }
                    let e = if j == i {
                        xj[k]
                    } else {
                        let m = belief.signals[j].as_ref().ok_or_else(|| Error::MissingSignalMarginal {
                            signal: spec.signals[i][k].clone(),
                            agent: spec.agents[j].clone(),
                        })?;
                        m.iter().zip(xj).map(|(p, v)| p * v).sum()
                    };
                    acc += w * e;
                }
                xi.push(acc);
            }
            next.push(xi);
        }
        per_agent = next;
    }
    Ok(per_agent.concat())
}

/// Consensus of one closed class of `B`.
#[derive(Debug, Clone)]
pub struct ComponentConsensus {
    pub signals: Vec<usize>,
    pub value: f64,
    /// Stationary distribution of `B` on this class, over all of `S`.
    pub p: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum ConsensusValue {
    /// `B` has a single closed class (irreducible or not).
    Single(f64),
    /// Several closed classes: one value per class, plus each signal's
    /// probability of being absorbed into each class (`signals × classes`).
    PerComponent {
        components: Vec<ComponentConsensus>,
        absorption: DMatrix<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct ConsensusResult {
    pub value: ConsensusValue,
    pub index: SignalIndex,
    /// Agent-type weights. With several closed classes this is the uniform
    /// mixture of the classes' stationary distributions.
    pub p: Vec<f64>,
    /// Eigenvector centrality of `Γ`, when `Γ` is irreducible.
    pub e: Option<Vec<f64>>,
    /// `λⁱ = p|_{Tⁱ} / eⁱ`, when `B` is irreducible and weights are not type-dependent.
    pub pseudopriors: Option<Vec<Vec<f64>>>,
    pub x1: Vec<f64>,
    pub irreducible: bool,
}

impl ConsensusResult {
    pub fn single(&self) -> Option<f64> {
        match self.value {
            ConsensusValue::Single(c) => Some(c),
            ConsensusValue::PerComponent { .. } => None,
        }
    }

    /// `lim x(n)` in the Abel sense, per signal: the consensus of the class a
    /// signal's chain ends up in, averaged by absorption probability.
    pub fn limit_by_signal(&self) -> Vec<f64> {
        match &self.value {
            ConsensusValue::Single(c) => vec![*c; self.index.len()],
            ConsensusValue::PerComponent {
                components,
                absorption,
            } => (0..self.index.len())
                .map(|s| {
                    components
                        .iter()
                        .enumerate()
                        .map(|(k, c)| absorption[(s, k)] * c.value)
                        .sum()
                })
                .collect(),
        }
    }
}

pub fn consensus_expectation(spec: &ModelSpec, target: Target<'_>) -> Result<ConsensusResult> {
    let b = interaction::build_b(spec)?;
    let x1 = first_order(spec, target)?;
    consensus_with(spec, &b, x1)
}

pub fn consensus_with(spec: &ModelSpec, b: &InteractionStructure, x1: Vec<f64>) -> Result<ConsensusResult> {
    let ca = ComponentAnalysis::of_matrix(&b.b);
    let terminal = ca.terminal_components();
    let e = spectral::eigenvector_centrality(&spec.network).ok();
    let (value, p) = if terminal.len() == 1 {
        let p = spectral::component_stationary(&b.b, &terminal[0])?;
        (ConsensusValue::Single(linalg::dot(&p, &x1)), p)
    } else {
        let mut components = Vec::with_capacity(terminal.len());
        let mut mix = vec![0.0; b.index.len()];
        for comp in &terminal {
            let p = spectral::component_stationary(&b.b, comp)?;
            mix.iter_mut()
                .zip(&p)
                .for_each(|(m, v)| *m += v / terminal.len() as f64);
            components.push(ComponentConsensus {
                signals: comp.clone(),
                value: linalg::dot(&p, &x1),
                p,
            });
        }
        let absorption = spectral::absorption_probabilities(&b.b, &ca)?;
        (
            ConsensusValue::PerComponent {
                components,
                absorption,
            },
            mix,
        )
    };
    let pseudopriors = match (&e, b.irreducible && spec.network.type_weights.is_none()) {
        (Some(e), true) => Some(pseudopriors_from(&b.index, &p, e)),
        _ => None,
    };
    Ok(ConsensusResult {
        value,
        index: b.index.clone(),
        p,
        e,
        pseudopriors,
        x1,
        irreducible: b.irreducible,
    })
}

fn pseudopriors_from(index: &SignalIndex, p: &[f64], e: &[f64]) -> Vec<Vec<f64>> {
    index
        .ranges
        .iter()
        .zip(e)
        .map(|(r, &ei)| p[r.clone()].iter().map(|v| v / ei).collect())
        .collect()
}

/// `λⁱ(tⁱ) = p(tⁱ)/eⁱ`; requires an irreducible `B`.
pub fn pseudopriors(spec: &ModelSpec) -> Result<Vec<Vec<f64>>> {
    let b = interaction::build_b(spec)?;
    let p = spectral::stationary_distribution(&b.b, spectral::StationaryMethod::Direct)?.p;
    let e = spectral::eigenvector_centrality(&spec.network)?;
    Ok(pseudopriors_from(&b.index, &p, &e))
}

/// `Σᵢ eⁱ 𝐄^{weights[i]} y`: the centrality-weighted average of ex ante
/// expectations under the given per-agent priors.
pub fn centrality_weighted(spec: &ModelSpec, e: &[f64], weights: &[Vec<f64>], y: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (i, w) in weights.iter().enumerate() {
        total += e[i] * spec.ex_ante_expectation(i, w, crate::model::RandomVariable::State(y))?;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpsCheck {
    pub holds: bool,
    /// Largest `|μⁱ(tⁱ)πⁱ(t⁻ⁱ|tⁱ) − μʲ(tʲ)πʲ(t⁻ʲ|tʲ)|` over profiles and agent pairs.
    pub max_violation: f64,
}

/// Whether the priors and full interim beliefs agree on one distribution over signal profiles.
pub fn cps_check(spec: &ModelSpec) -> Result<CpsCheck> {
    if !spec.has_full_beliefs() {
        return Err(Error::Capability(
            "the common-prior check needs full-mode beliefs".into(),
        ));
    }
    let priors = spec
        .priors
        .as_ref()
        .ok_or_else(|| Error::Capability("the common-prior check needs priors for every agent".into()))?;
    let counts: Vec<usize> = spec.signals.iter().map(Vec::len).collect();
    let n = counts.len();
    let profiles: usize = counts.iter().product();
    // per agent, the implied distribution over full signal profiles
    let mut implied = vec![vec![0.0; profiles]; n];
    for i in 0..n {
        let layout = spec.joint_layout(i);
        for (k, belief) in spec.beliefs[i].iter().enumerate() {
            let joint = belief.joint.as_ref().expect("checked full mode");
            let mu = priors[i].weights[k];
            for (idx, &pr) in joint.iter().enumerate() {
                let (_, other) = layout.decode(idx);
                let mut t = vec![0; n];
                t[i] = k;
                for (slot, &j) in layout.others.iter().enumerate() {
                    t[j] = other[slot];
                }
                let flat = t.iter().zip(&counts).fold(0, |acc, (&s, &d)| acc * d + s);
                implied[i][flat] += mu * pr;
            }
        }
    }
    let mut max_violation = 0.0_f64;
    for t in 0..profiles {
        let (lo, hi) = implied
            .iter()
            .map(|v| v[t])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(x), h.max(x)));
        max_violation = max_violation.max(hi - lo);
    }
    Ok(CpsCheck {
        holds: max_violation <= CPS_TOL,
        max_violation,
    })
}

#[derive(Debug, Clone)]
pub struct CpsReport {
    pub consensus: f64,
    pub centralities: Vec<f64>,
    /// `𝐄^{μⁱ} y` per agent.
    pub ex_ante: Vec<f64>,
    /// `Σᵢ eⁱ 𝐄^{μⁱ} y`.
    pub weighted: f64,
    pub decomposition_error: f64,
    /// The shared ex ante expectation `ȳ`, when all agents agree within the tolerance.
    pub common: Option<f64>,
    pub passed: bool,
}

pub const CPS_DECOMPOSITION_TOL: f64 = 1e-9;

/// Checks `c = Σᵢ eⁱ 𝐄^{μⁱ} y` (and `c = ȳ` when ex ante expectations coincide).
pub fn verify_cps_decomposition(spec: &ModelSpec, y: &[f64]) -> Result<CpsReport> {
    let check = cps_check(spec)?;
    if !check.holds {
        return Err(Error::Precondition(format!(
            "beliefs do not admit a common prior over signals (max violation {:e})",
            check.max_violation
        )));
    }
    let priors = spec.priors.as_ref().expect("cps_check requires priors");
    let result = consensus_expectation(spec, Target::State(y))?;
    let consensus = result.single().ok_or_else(|| {
        Error::Precondition("interaction structure has several closed classes".into())
    })?;
    let e = spectral::eigenvector_centrality(&spec.network)?;
    let ex_ante = priors
        .iter()
        .enumerate()
        .map(|(i, p)| spec.ex_ante_expectation(i, &p.weights, crate::model::RandomVariable::State(y)))
        .collect::<Result<Vec<f64>>>()?;
    let weighted = linalg::dot(&e, &ex_ante);
    let decomposition_error = (consensus - weighted).abs();
    let spread = ex_ante.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - ex_ante.iter().cloned().fold(f64::INFINITY, f64::min);
    let common = (spread <= CPS_DECOMPOSITION_TOL).then(|| ex_ante[0]);
    let passed = decomposition_error <= CPS_DECOMPOSITION_TOL
        && common.is_none_or(|yb| (consensus - yb).abs() <= CPS_DECOMPOSITION_TOL);
    Ok(CpsReport {
        consensus,
        centralities: e,
        ex_ante,
        weighted,
        decomposition_error,
        common,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::game;
    use crate::generate::{self, ModelShape, NetworkKind};
    use crate::model::Network;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn y_of(spec: &ModelSpec) -> Vec<f64> {
        spec.y.as_ref().unwrap().values.clone()
    }

    #[test]
    fn first_order_is_fy() {
        let spec = generate::two_signal_marginal(&[0.3, 0.8]);
        let x = hoae(&spec, Target::State(&[0.0, 1.0]), 1).unwrap();
        assert_eq!(x, interaction::build_f(&spec).unwrap().apply(&[0.0, 1.0]).unwrap());
        assert!(hoae(&spec, Target::State(&[0.0, 1.0]), 0).is_err());
    }

    #[test]
    fn certainty_cycle_composes_expectations() {
        let spec = fixtures::certainty_cycle();
        let y = y_of(&spec);
        let x3 = hoae(&spec, Target::State(&y), 3).unwrap();
        // E¹E²E³y at agent 1's signal k: follow the certainty maps 1 → 2 → 3
        for k in 0..3 {
            let t2 = fixtures::cycle_next_signal(0, k);
            let t3 = fixtures::cycle_next_signal(1, t2);
            let state = (t3 + 2) % 3;
            assert_eq!(x3[k], y[state]);
        }
    }

    #[test]
    fn matrix_power_matches_recursion() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let spec = generate::random_model(&mut rng, &ModelShape::sparse(3, 3, 4));
            let y = y_of(&spec);
            for n in 1..=8 {
                let a = hoae(&spec, Target::State(&y), n).unwrap();
                let b = hoae_recursive(&spec, Target::State(&y), n).unwrap();
                assert!(linalg::sup_distance(&a, &b) <= 1e-12, "n={n}");
            }
        }
    }

    #[test]
    fn complete_information_weights_are_centralities() {
        let spec = generate::complete_information(
            &[vec![0.0, 0.6, 0.4], vec![0.5, 0.0, 0.5], vec![0.9, 0.1, 0.0]],
            &[vec![0.2, 0.8], vec![0.5, 0.5], vec![1.0, 0.0]],
        );
        let r = consensus_expectation(&spec, Target::State(&[0.0, 1.0])).unwrap();
        let e = r.e.clone().unwrap();
        assert!(linalg::sup_distance(&r.p, &e) <= 1e-10);
        let expected: f64 = e.iter().zip([0.8, 0.5, 0.0]).map(|(w, v)| w * v).sum();
        assert!((r.single().unwrap() - expected).abs() <= 1e-12);
        for l in r.pseudopriors.unwrap() {
            assert_eq!(l.len(), 1);
            assert!((l[0] - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn constant_y_has_constant_consensus() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..20 {
            let spec = generate::random_model(&mut rng, &ModelShape::sparse(3, 3, 3));
            let r = consensus_expectation(&spec, Target::State(&[0.4; 3])).unwrap();
            assert!(r.limit_by_signal().iter().all(|v| (v - 0.4).abs() <= 1e-12));
        }
    }

    #[test]
    fn consensus_matches_patient_game() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..20 {
            let spec = generate::random_irreducible_model(&mut rng, &ModelShape::dense(3, 2, 3));
            let y = y_of(&spec);
            let c = consensus_expectation(&spec, Target::State(&y)).unwrap().single().unwrap();
            let s = game::solve_beta_game(&spec, &y, 0.9999).unwrap();
            assert!(s.actions.iter().all(|a| (a - c).abs() <= 1e-3));
        }
    }

    #[test]
    fn counterexample_reports_two_classes() {
        let spec = fixtures::counterexample();
        let r = consensus_expectation(&spec, Target::State(&[0.0, 1.0])).unwrap();
        match &r.value {
            ConsensusValue::PerComponent { components, .. } => {
                assert_eq!(components.len(), 2);
                assert!((components[0].value - 0.75).abs() <= 1e-12);
                assert!((components[1].value - 0.25).abs() <= 1e-12);
            }
            other => panic!("{other:?}"),
        }
        let limit = r.limit_by_signal();
        assert!((limit[0] - 0.75).abs() <= 1e-12 && (limit[1] - 0.25).abs() <= 1e-12);
        assert!(pseudopriors(&spec).is_err());
    }

    #[test]
    fn representation_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        for _ in 0..20 {
            let spec = generate::random_irreducible_model(&mut rng, &ModelShape::dense(3, 3, 3));
            let lambda = pseudopriors(&spec).unwrap();
            for l in &lambda {
                assert!((l.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
            }
            let e = spectral::eigenvector_centrality(&spec.network).unwrap();
            for _ in 0..5 {
                let y: Vec<f64> = (0..3).map(|_| rng.random()).collect();
                let c = consensus_expectation(&spec, Target::State(&y)).unwrap().single().unwrap();
                let rep = centrality_weighted(&spec, &e, &lambda, &y).unwrap();
                assert!((c - rep).abs() <= 1e-10);
            }
        }
    }

    fn swap() -> Network {
        Network::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]])
    }

    #[test]
    fn cps_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let net = generate::random_network(&mut rng, 3, NetworkKind::Complete);
        let spec = generate::cps_model(&mut rng, 2, &[2, 2, 3], net, false);
        let check = cps_check(&spec).unwrap();
        assert!(check.holds && check.max_violation <= 1e-15, "{check:?}");

        // perturb one belief entry by 1e-3 (moving mass between two profiles)
        let mut bad = spec.clone();
        let b = &mut bad.beliefs[0][0];
        let joint = b.joint.as_mut().unwrap();
        joint[0] += 1e-3;
        joint[1] -= 1e-3;
        let check = cps_check(&bad).unwrap();
        let mu = spec.priors.as_ref().unwrap()[0].weights[0];
        assert!(!check.holds);
        assert!((check.max_violation - mu * 1e-3).abs() <= 1e-12, "{check:?}");

        let case_two = fixtures::optimism_case_two(4, true);
        assert!(!cps_check(&case_two).unwrap().holds);

        let marginal = generate::two_signal_marginal(&[0.3, 0.8]);
        assert!(matches!(cps_check(&marginal), Err(Error::Capability(_))));
    }

    #[test]
    fn pseudopriors_equal_priors_under_cps() {
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let net = generate::random_network(&mut rng, 3, NetworkKind::Complete);
        let spec = generate::cps_model(&mut rng, 2, &[2, 3, 2], net, false);
        let lambda = pseudopriors(&spec).unwrap();
        for (l, mu) in lambda.iter().zip(spec.priors.as_ref().unwrap()) {
            assert!(linalg::sup_distance(l, &mu.weights) <= 1e-9);
        }
    }

    #[test]
    fn common_prior_gives_ex_ante_expectation() {
        let spec = fixtures::common_prior_pair(0.8, swap());
        let r = verify_cps_decomposition(&spec, &[0.0, 1.0]).unwrap();
        assert!(r.passed);
        assert!((r.common.unwrap() - 0.5).abs() <= 1e-12);
        assert!((r.consensus - 0.5).abs() <= 1e-9);
    }

    #[test]
    fn decomposition_holds_under_two_networks() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let net = generate::random_network(&mut rng, 3, NetworkKind::Complete);
        let spec = generate::cps_model(&mut rng, 3, &[2, 2, 2], net, false);
        let y = y_of(&spec);
        let mut results = Vec::new();
        for net in [
            generate::random_network(&mut rng, 3, NetworkKind::Complete),
            Network::from_rows(&[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.5, 0.5, 0.0]]),
        ] {
            let mut s = spec.clone();
            s.network = net;
            let r = verify_cps_decomposition(&s, &y).unwrap();
            assert!(r.passed, "{r:?}");
            assert!(r.common.is_none());
            results.push(r);
        }
        assert!(linalg::sup_distance(&results[0].centralities, &results[1].centralities) > 1e-3);
    }

    #[test]
    fn relabeling_signals_and_states_preserves_consensus() {
        let mut rng = ChaCha8Rng::seed_from_u64(38);
        for _ in 0..10 {
            let spec = generate::random_irreducible_model(&mut rng, &ModelShape::dense(3, 3, 3));
            let y = y_of(&spec);
            let c = consensus_expectation(&spec, Target::State(&y)).unwrap().single().unwrap();
            let mut perm = spec.clone();
            // reverse the state order and agent 0's signal order
            perm.states.reverse();
            let y_rev: Vec<f64> = y.iter().rev().cloned().collect();
            for bs in perm.beliefs.iter_mut() {
                for b in bs.iter_mut() {
                    b.state.as_mut().unwrap().reverse();
                    if let Some(m) = b.signals[0].as_mut() {
                        m.reverse();
                    }
                }
            }
            perm.signals[0].reverse();
            perm.beliefs[0].reverse();
            let c2 = consensus_expectation(&perm, Target::State(&y_rev)).unwrap().single().unwrap();
            assert!((c - c2).abs() <= 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn hoae_stays_in_hull(seed in any::<u64>(), n in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = generate::random_model(&mut rng, &ModelShape::sparse(3, 3, 4));
            let y = y_of(&spec);
            let x1 = hoae(&spec, Target::State(&y), 1).unwrap();
            let lo = x1.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = x1.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for v in hoae(&spec, Target::State(&y), n).unwrap() {
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
        }

        #[test]
        fn centrality_sum_and_pfy(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = generate::random_irreducible_model(&mut rng, &ModelShape::dense(3, 2, 4));
            let y = y_of(&spec);
            let r = consensus_expectation(&spec, Target::State(&y)).unwrap();
            let e = r.e.as_ref().unwrap();
            for (i, range) in r.index.ranges.iter().enumerate() {
                let mass: f64 = r.p[range.clone()].iter().sum();
                prop_assert!((mass - e[i]).abs() <= 1e-10);
            }
            prop_assert!((r.single().unwrap() - linalg::dot(&r.p, &r.x1)).abs() <= 1e-10);
        }
    }
}
