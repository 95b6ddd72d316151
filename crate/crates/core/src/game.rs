//! The β-coordination game: equilibrium actions, iterated-dominance bounds
//! and the transform that reduces heterogeneous coordination weights to a
//! common one.

use nalgebra::{DMatrix, DVector};

use crate::consensus::{self, ConsensusResult, Target};
use crate::error::{Error, Result};
use crate::interaction::{self, InteractionStructure};
use crate::linalg::{self, Operator};
use crate::model::{ModelSpec, Network};

/// Betas used to fit the convergence rate of `s*(β)` to the consensus.
pub const RATE_BETAS: [f64; 3] = [0.9, 0.99, 0.999];

#[derive(Debug, Clone)]
pub struct BoundHistory {
    /// `lower[k-1] = (1−β) Σ_{n≤k} βⁿ⁻¹ x(n)` for `k = 1..=k_max`.
    pub lower: Vec<Vec<f64>>,
    pub upper: Vec<Vec<f64>>,
    /// `βᵏ M`.
    pub widths: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GameSolution {
    pub beta: f64,
    /// `s*(t)` for every signal, in signal-index order.
    pub actions: Vec<f64>,
    /// `‖s* − (1−β)Fy − βBs*‖∞`.
    pub residual: f64,
    pub bounds: Option<BoundHistory>,
}

fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::InvalidParameter(format!(
            "β must lie in [0, 1), got {beta}; the β → 1 limit is given by convention_limit"
        )));
    }
    Ok(())
}

fn check_self_weights(spec: &ModelSpec) -> Result<()> {
    let tw_diag = spec.network.type_weights.as_ref().is_some_and(|tw| {
        let index = interaction::SignalIndex::of(spec);
        tw.iter().enumerate().any(|(s, row)| row[index.agent_of[s]] != 0.0)
    });
    if !spec.network.diagonal_allowed && (spec.network.has_self_weight() || tw_diag) {
        return Err(Error::InvalidParameter(
            "network has self-weights but diagonal weights are not enabled".into(),
        ));
    }
    Ok(())
}

fn basic_values<'a>(spec: &ModelSpec, y: &'a [f64]) -> Result<&'a [f64]> {
    if y.len() != spec.n_states() {
        return Err(Error::Dimension {
            what: "basic random variable".into(),
            expected: spec.n_states(),
            found: y.len(),
        });
    }
    Ok(y)
}

/// `s* = (1−β)(I − βB)⁻¹ F y`.
pub fn solve_beta_game(spec: &ModelSpec, y: &[f64], beta: f64) -> Result<GameSolution> {
    check_beta(beta)?;
    check_self_weights(spec)?;
    let b = interaction::build_b(spec)?;
    let x1 = interaction::build_f(spec)?.apply(basic_values(spec, y)?)?;
    solve_with(&b.b, &x1, beta)
}

/// Solves the game for a given `B` and `x(1)`.
pub fn solve_with(b: &DMatrix<f64>, x1: &[f64], beta: f64) -> Result<GameSolution> {
    check_beta(beta)?;
    let actions = crate::spectral::finite_beta(b, x1, beta)?;
    let residual = fixed_point_residual(b, x1, beta, &actions);
    Ok(GameSolution {
        beta,
        actions,
        residual,
        bounds: None,
    })
}

pub fn fixed_point_residual(b: &DMatrix<f64>, x1: &[f64], beta: f64, s: &[f64]) -> f64 {
    let bs = linalg::mat_vec(b, s);
    s.iter()
        .zip(x1)
        .zip(&bs)
        .map(|((s, x), bs)| (s - (1.0 - beta) * x - beta * bs).abs())
        .fold(0.0, f64::max)
}

/// Best-response iterates `s_{k+1} = (1−β)x(1) + βB s_k` from `start`.
pub fn contraction_iterates(
    b: &DMatrix<f64>,
    x1: &[f64],
    beta: f64,
    start: &[f64],
    steps: usize,
) -> Vec<Vec<f64>> {
    let op = Operator::new(b);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(start.to_vec());
    for k in 0..steps {
        let bs = op.apply(&out[k]);
        let next = x1
            .iter()
            .zip(&bs)
            .map(|(x, v)| (1.0 - beta) * x + beta * v)
            .collect();
        out.push(next);
    }
    out
}

/// Actions surviving `k` rounds of iterated deletion of dominated strategies.
pub fn rationalizable_bounds(spec: &ModelSpec, y: &[f64], beta: f64, k_max: usize) -> Result<BoundHistory> {
    check_beta(beta)?;
    let bound = spec.y.as_ref().map_or_else(
        || y.iter().cloned().fold(0.0, f64::max),
        |v| v.bound,
    );
    let b = interaction::build_b(spec)?;
    let x1 = interaction::build_f(spec)?.apply(basic_values(spec, y)?)?;
    Ok(bounds_with(&b, &x1, beta, bound, k_max))
}

pub fn bounds_with(b: &InteractionStructure, x1: &[f64], beta: f64, bound: f64, k_max: usize) -> BoundHistory {
    let op = Operator::new(&b.b);
    let mut x = x1.to_vec();
    let mut acc = vec![0.0; x.len()];
    let mut weight = 1.0 - beta;
    let mut lower = Vec::with_capacity(k_max);
    let mut upper = Vec::with_capacity(k_max);
    let mut widths = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        acc.iter_mut().zip(&x).for_each(|(a, v)| *a += weight * v);
        let width = beta.powi(k as i32) * bound;
        lower.push(acc.clone());
        upper.push(acc.iter().map(|a| a + width).collect());
        widths.push(width);
        x = op.apply(&x);
        weight *= beta;
    }
    BoundHistory {
        lower,
        upper,
        widths,
    }
}

/// Replaces per-agent coordination weights `βⁱ` by a common `β̂ = max βⁱ`
/// and a reweighted network `Γ̂` with the same equilibrium:
/// `γ̂ⁱⁱ = gᵢ + (1−gᵢ)γⁱⁱ`, `γ̂ⁱʲ = (1−gᵢ)γⁱʲ`, `gᵢ = (β̂−βⁱ)/(β̂(1−βⁱ))`.
pub fn heterogeneous_transform(network: &Network, betas: &[f64]) -> Result<(Network, f64)> {
    let n = network.len();
    if betas.len() != n {
        return Err(Error::Dimension {
            what: "per-agent β vector".into(),
            expected: n,
            found: betas.len(),
        });
    }
    let at_one = betas.iter().filter(|b| **b >= 1.0).count();
    if at_one > 0 && at_one < n {
        return Err(Error::InvalidParameter(
            "some βⁱ equal 1 while others are below 1; the limit depends on the order in which β's approach 1"
                .into(),
        ));
    }
    if let Some(b) = betas.iter().find(|b| !(0.0..1.0).contains(*b)) {
        return Err(Error::InvalidParameter(format!("each βⁱ must lie in [0, 1), got {b}")));
    }
    let beta_hat = betas.iter().cloned().fold(0.0, f64::max);
    let mut w = network.weights.clone();
    for i in 0..n {
        let g = if beta_hat == 0.0 {
            0.0
        } else {
            (beta_hat - betas[i]) / (beta_hat * (1.0 - betas[i]))
        };
        for j in 0..n {
            w[(i, j)] *= 1.0 - g;
        }
        w[(i, i)] += g;
    }
    let diagonal_allowed = network.diagonal_allowed || (0..n).any(|i| w[(i, i)] != 0.0);
    Ok((
        Network {
            weights: w,
            diagonal_allowed,
            type_weights: None,
        },
        beta_hat,
    ))
}

/// The heterogeneous game through the transform: solve `(Γ̂, β̂)`.
pub fn solve_heterogeneous(spec: &ModelSpec, y: &[f64], betas: &[f64]) -> Result<GameSolution> {
    if spec.network.type_weights.is_some() {
        return Err(Error::Capability(
            "per-agent β is not supported together with type-dependent weights".into(),
        ));
    }
    let (network, beta_hat) = heterogeneous_transform(&spec.network, betas)?;
    let mut transformed = spec.clone();
    transformed.network = network;
    solve_beta_game(&transformed, y, beta_hat)
}

/// Direct solve of `(I − D_β B) s = (I − D_β) F y` with `D_β` the per-signal diagonal of `βⁱ`.
pub fn solve_heterogeneous_direct(spec: &ModelSpec, y: &[f64], betas: &[f64]) -> Result<Vec<f64>> {
    let b = interaction::build_b(spec)?;
    let x1 = interaction::build_f(spec)?.apply(basic_values(spec, y)?)?;
    let n = b.index.len();
    let d: Vec<f64> = b.index.agent_of.iter().map(|&i| betas[i]).collect();
    let a = DMatrix::from_fn(n, n, |r, c| {
        let id = if r == c { 1.0 } else { 0.0 };
        id - d[r] * b.b[(r, c)]
    });
    let rhs = DVector::from_fn(n, |r, _| (1.0 - d[r]) * x1[r]);
    Ok(linalg::solve(a, &rhs, "solving the heterogeneous best-response system")?
        .as_slice()
        .to_vec())
}

#[derive(Debug, Clone)]
pub struct ConventionReport {
    pub consensus: ConsensusResult,
    /// `(β, ‖s*(β) − lim‖∞)` for each β in [`RATE_BETAS`].
    pub gaps: Vec<(f64, f64)>,
    /// Fitted `C` in `gap ≈ C(1−β)`: the largest `gap/(1−β)` observed.
    pub rate_constant: f64,
}

/// The β → 1 limit of equilibrium play, i.e. the consensus expectation.
pub fn convention_limit(spec: &ModelSpec, y: &[f64]) -> Result<ConventionReport> {
    let b = interaction::build_b(spec)?;
    let x1 = interaction::build_f(spec)?.apply(basic_values(spec, y)?)?;
    let consensus = consensus::consensus_with(spec, &b, x1.clone())?;
    let limit = consensus.limit_by_signal();
    let mut gaps = Vec::with_capacity(RATE_BETAS.len());
    for beta in RATE_BETAS {
        let s = solve_with(&b.b, &x1, beta)?;
        gaps.push((beta, linalg::sup_distance(&s.actions, &limit)));
    }
    let rate_constant = gaps.iter().map(|(b, g)| g / (1.0 - b)).fold(0.0, f64::max);
    Ok(ConventionReport {
        consensus,
        gaps,
        rate_constant,
    })
}

/// Convenience wrapper: consensus for a state variable.
pub fn convention_value(spec: &ModelSpec, y: &[f64]) -> Result<ConsensusResult> {
    consensus::consensus_expectation(spec, Target::State(y))
}
