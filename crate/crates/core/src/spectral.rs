//! Markov-chain numerics: stationary distributions, eigenvector centrality,
//! Abel limits, mean first passage times and power trajectories.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{self, ComponentAnalysis};
use crate::linalg::{self, Operator};
use crate::model::Network;

/// Largest acceptable `‖pQ − p‖₁` for a returned stationary distribution.
pub const STATIONARY_RESIDUAL: f64 = 1e-10;
/// Power iteration stops once successive iterates are this close in L1.
pub const POWER_TOL: f64 = 1e-12;
pub const POWER_MAX_ITER: usize = 1_000_000;
/// Two trajectory vectors closer than this in sup norm count as repeats.
pub const CYCLE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StationaryMethod {
    /// Damped iteration on the lazy chain `(I + Q)/2`.
    Power,
    /// Linear solve of `(Qᵀ − I)p = 0` with the last equation replaced by `Σp = 1`.
    Direct,
}

#[derive(Debug, Clone)]
pub struct StationaryDistribution {
    pub p: Vec<f64>,
    /// `‖pQ − p‖₁`.
    pub residual: f64,
    /// The method that produced `p`; power iteration may fall back to the direct solve.
    pub method: StationaryMethod,
    pub iterations: usize,
}

fn reducible_error(ca: &ComponentAnalysis) -> Error {
    Error::Reducible {
        closed_set: ca.terminal_components().into_iter().next().unwrap_or_default(),
    }
}

/// Unique stationary distribution of an irreducible row-stochastic matrix.
pub fn stationary_distribution(
    q: &DMatrix<f64>,
    method: StationaryMethod,
) -> Result<StationaryDistribution> {
    linalg::require_square(q, "transition matrix")?;
    let ca = ComponentAnalysis::of_matrix(q);
    if !ca.is_irreducible() {
        return Err(reducible_error(&ca));
    }
    stationary_unchecked(q, method)
}

/// Stationary distribution without the irreducibility check. For a reducible
/// input the result is one of many stationary vectors.
pub(crate) fn stationary_unchecked(
    q: &DMatrix<f64>,
    method: StationaryMethod,
) -> Result<StationaryDistribution> {
    match method {
        StationaryMethod::Direct => direct(q),
        StationaryMethod::Power => {
            let (p, iterations, converged) = power(q);
            let residual = residual(q, &p);
            if converged && residual <= STATIONARY_RESIDUAL {
                Ok(StationaryDistribution {
                    p,
                    residual,
                    method: StationaryMethod::Power,
                    iterations,
                })
            } else {
                let mut d = direct(q)?;
                d.iterations = iterations;
                Ok(d)
            }
        }
    }
}

fn residual(q: &DMatrix<f64>, p: &[f64]) -> f64 {
    linalg::l1_distance(&linalg::vec_mat(p, q), p)
}

fn direct(q: &DMatrix<f64>) -> Result<StationaryDistribution> {
    let n = q.nrows();
    let mut a = q.transpose() - DMatrix::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let x = linalg::solve(a, &b, "solving for the stationary distribution")?;
    let mut p: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
    let residual = residual(q, &p);
    Ok(StationaryDistribution {
        p,
        residual,
        method: StationaryMethod::Direct,
        iterations: 0,
    })
}

fn power(q: &DMatrix<f64>) -> (Vec<f64>, usize, bool) {
    let n = q.nrows();
    let op = Operator::new(q);
    let mut p = vec![1.0 / n as f64; n];
    for it in 1..=POWER_MAX_ITER {
        let pq = op.apply_left(&p);
        let next: Vec<f64> = p.iter().zip(&pq).map(|(a, b)| 0.5 * (a + b)).collect();
        let d = linalg::l1_distance(&next, &p);
        p = next;
        if d < POWER_TOL {
            let s: f64 = p.iter().sum();
            p.iter_mut().for_each(|v| *v /= s);
            return (p, it, true);
        }
    }
    (p, POWER_MAX_ITER, false)
}

/// `(I + Q)/2`: same stationary vectors as `Q`, always aperiodic.
pub fn lazy(q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = q.nrows();
    (q + DMatrix::<f64>::identity(n, n)) * 0.5
}

/// Eigenvector centrality: the positive left unit eigenvector of `Γ` summing to one.
pub fn eigenvector_centrality(network: &Network) -> Result<Vec<f64>> {
    Ok(stationary_distribution(&network.weights, StationaryMethod::Direct)?.p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AbelMode {
    /// `lim_{β↑1} (1−β) Σ βⁿ Qⁿ z = (p z) 𝟏`.
    ExactLimit,
    /// `(1−β)(I − βQ)⁻¹ z` for a fixed `β ∈ [0, 1)`.
    FiniteBeta(f64),
}

/// Abel average of the sequence `Qⁿ z`.
pub fn abel_limit(q: &DMatrix<f64>, z: &[f64], mode: AbelMode) -> Result<Vec<f64>> {
    let n = linalg::require_square(q, "transition matrix")?;
    if z.len() != n {
        return Err(Error::Dimension {
            what: "vector z".into(),
            expected: n,
            found: z.len(),
        });
    }
    match mode {
        AbelMode::ExactLimit => {
            let p = stationary_distribution(q, StationaryMethod::Direct)?.p;
            Ok(vec![linalg::dot(&p, z); n])
        }
        AbelMode::FiniteBeta(beta) => {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::InvalidParameter(format!(
                    "finite-β Abel average needs β in [0, 1), got {beta}"
                )));
            }
            finite_beta(q, z, beta)
        }
    }
}

pub(crate) fn finite_beta(q: &DMatrix<f64>, z: &[f64], beta: f64) -> Result<Vec<f64>> {
    let n = q.nrows();
    let a = DMatrix::identity(n, n) - q * beta;
    let b = DVector::from_iterator(n, z.iter().map(|v| (1.0 - beta) * v));
    Ok(linalg::solve(a, &b, "solving (I - βQ)x = (1-β)z")?
        .as_slice()
        .to_vec())
}

/// Mean first passage times. `M(z, z′)` counts the steps from `z` up to and
/// including the first visit to `z′`; the diagonal holds mean return times.
#[derive(Debug, Clone)]
pub struct MfptMatrix {
    pub m: DMatrix<f64>,
}

impl MfptMatrix {
    /// `max_{z ≠ z′} M(z, z′)`.
    pub fn max_off_diagonal(&self) -> f64 {
        let n = self.m.nrows();
        let mut best = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    best = best.max(self.m[(i, j)]);
                }
            }
        }
        best
    }

    /// Largest violation of `M(z,z′) = 1 + Σ_{w≠z′} Q(z,w) M(w,z′)`.
    pub fn residual(&self, q: &DMatrix<f64>) -> f64 {
        let n = q.nrows();
        let mut worst = 0.0_f64;
        for z in 0..n {
            for t in 0..n {
                let rhs = 1.0
                    + (0..n)
                        .filter(|&w| w != t)
                        .map(|w| q[(z, w)] * self.m[(w, t)])
                        .sum::<f64>();
                worst = worst.max((self.m[(z, t)] - rhs).abs());
            }
        }
        worst
    }
}

/// Mean first passage times of an irreducible chain, one linear solve per target.
pub fn mfpt(q: &DMatrix<f64>) -> Result<MfptMatrix> {
    let n = linalg::require_square(q, "transition matrix")?;
    let ca = ComponentAnalysis::of_matrix(q);
    if !ca.is_irreducible() {
        return Err(reducible_error(&ca));
    }
    let columns: Result<Vec<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|target| first_passage_column(q, target))
        .collect();
    let columns = columns?;
    Ok(MfptMatrix {
        m: DMatrix::from_fn(n, n, |i, j| columns[j][i]),
    })
}

fn first_passage_column(q: &DMatrix<f64>, target: usize) -> Result<Vec<f64>> {
    let n = q.nrows();
    let others: Vec<usize> = (0..n).filter(|&v| v != target).collect();
    let k = others.len();
    let mut col = vec![0.0; n];
    if k > 0 {
        let a = DMatrix::from_fn(k, k, |r, c| {
            let id = if r == c { 1.0 } else { 0.0 };
            id - q[(others[r], others[c])]
        });
        let b = DVector::from_element(k, 1.0);
        let m = linalg::solve(a, &b, "solving for mean first passage times")?;
        for (r, &v) in others.iter().enumerate() {
            col[v] = m[r];
        }
    }
    col[target] = 1.0 + others.iter().map(|&w| q[(target, w)] * col[w]).sum::<f64>();
    Ok(col)
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// `Qⁿ z` for `n = 0..=n_max`.
    pub vectors: Vec<Vec<f64>>,
    /// Length of the limit cycle reached after the transient, if one was detected.
    pub cycle_length: Option<usize>,
}

impl Trajectory {
    /// Average of the final detected cycle.
    pub fn cycle_average(&self) -> Option<Vec<f64>> {
        let len = self.cycle_length?;
        let tail = &self.vectors[self.vectors.len() - len..];
        let n = tail[0].len();
        Some(
            (0..n)
                .map(|i| tail.iter().map(|v| v[i]).sum::<f64>() / len as f64)
                .collect(),
        )
    }
}

/// Iterates `z, Qz, Q²z, …` and looks for the shortest cycle in the tail.
pub fn power_trajectory(q: &DMatrix<f64>, z: &[f64], n_max: usize) -> Result<Trajectory> {
    let n = linalg::require_square(q, "transition matrix")?;
    if z.len() != n {
        return Err(Error::Dimension {
            what: "vector z".into(),
            expected: n,
            found: z.len(),
        });
    }
    let op = Operator::new(q);
    let mut vectors = Vec::with_capacity(n_max + 1);
    vectors.push(z.to_vec());
    for k in 0..n_max {
        let next = op.apply(&vectors[k]);
        vectors.push(next);
    }
    let last = vectors.len() - 1;
    let cycle_length = (1..=last / 2).find(|&len| {
        (last + 1 - len..=last).all(|k| linalg::sup_distance(&vectors[k], &vectors[k - len]) <= CYCLE_TOL)
    });
    Ok(Trajectory {
        vectors,
        cycle_length,
    })
}

/// Probability of ending in each closed class, per starting state. Rows of
/// states inside a closed class are indicators.
pub fn absorption_probabilities(q: &DMatrix<f64>, ca: &ComponentAnalysis) -> Result<DMatrix<f64>> {
    let n = q.nrows();
    let terminal = ca.terminal_components();
    let transient = ca.transient_states();
    let mut h = DMatrix::zeros(n, terminal.len());
    for (k, comp) in terminal.iter().enumerate() {
        for &v in comp {
            h[(v, k)] = 1.0;
        }
    }
    if transient.is_empty() {
        return Ok(h);
    }
    let t = transient.len();
    let a = DMatrix::from_fn(t, t, |r, c| {
        let id = if r == c { 1.0 } else { 0.0 };
        id - q[(transient[r], transient[c])]
    });
    let lu = a.lu();
    for (k, comp) in terminal.iter().enumerate() {
        let b = DVector::from_fn(t, |r, _| comp.iter().map(|&c| q[(transient[r], c)]).sum::<f64>());
        let x = lu
            .solve(&b)
            .ok_or_else(|| Error::Singular("solving for absorption probabilities".into()))?;
        for (r, &v) in transient.iter().enumerate() {
            h[(v, k)] = x[r];
        }
    }
    Ok(h)
}

/// Stationary distribution of `Q` restricted to a closed class, extended by zeros.
pub fn component_stationary(q: &DMatrix<f64>, component: &[usize]) -> Result<Vec<f64>> {
    let sub = DMatrix::from_fn(component.len(), component.len(), |r, c| q[(component[r], component[c])]);
    let p = stationary_unchecked(&sub, StationaryMethod::Direct)?.p;
    let mut out = vec![0.0; q.nrows()];
    for (r, &v) in component.iter().enumerate() {
        out[v] = p[r];
    }
    Ok(out)
}

/// The ergodic distribution reached from `start`: the absorption-weighted
/// mixture of the closed classes' stationary distributions.
pub fn ergodic_distribution_from(q: &DMatrix<f64>, start: usize) -> Result<Vec<f64>> {
    let ca = ComponentAnalysis::of_matrix(q);
    let h = absorption_probabilities(q, &ca)?;
    let mut out = vec![0.0; q.nrows()];
    for (k, comp) in ca.terminal_components().iter().enumerate() {
        let w = h[(start, k)];
        if w == 0.0 {
            continue;
        }
        let pk = component_stationary(q, comp)?;
        out.iter_mut().zip(&pk).for_each(|(o, p)| *o += w * p);
    }
    Ok(out)
}

/// Period of every closed class, in the order of `terminal_components`.
pub fn terminal_periods(q: &DMatrix<f64>) -> Vec<usize> {
    let adj = graph::support(q);
    let ca = ComponentAnalysis::new(&adj);
    ca.terminal_components()
        .iter()
        .map(|c| graph::period(&adj, c))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn swap() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])
    }

    #[test]
    fn swap_chain_is_uniform() {
        for m in [StationaryMethod::Power, StationaryMethod::Direct] {
            let s = stationary_distribution(&swap(), m).unwrap();
            assert!((s.p[0] - 0.5).abs() < 1e-12 && (s.p[1] - 0.5).abs() < 1e-12);
            assert!(s.residual <= STATIONARY_RESIDUAL);
        }
    }

    #[test]
    fn reducible_input_is_rejected_with_certificate() {
        let q = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.5, 0.5, 0.0, 0.0, 0.0, 1.0]);
        match stationary_distribution(&q, StationaryMethod::Direct) {
            Err(Error::Reducible { closed_set }) => assert_eq!(closed_set, vec![0]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn power_and_direct_agree_on_random_chains() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let q = generate::random_stochastic(&mut rng, 8, 0.6);
            let a = stationary_distribution(&q, StationaryMethod::Power).unwrap();
            let b = stationary_distribution(&q, StationaryMethod::Direct).unwrap();
            assert!(linalg::sup_distance(&a.p, &b.p) < 1e-9);
            assert!(a.residual <= STATIONARY_RESIDUAL && b.residual <= STATIONARY_RESIDUAL);
        }
    }

    #[test]
    fn centralities() {
        let cycle = Network::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
        ]);
        for v in eigenvector_centrality(&cycle).unwrap() {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
        let ds = Network::from_rows(&[vec![0.0, 0.3, 0.7], vec![0.7, 0.0, 0.3], vec![0.3, 0.7, 0.0]]);
        for v in eigenvector_centrality(&ds).unwrap() {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
        // e = (2/3, 1/3) solves e·[[.5,.5],[1,0]] = e
        let asym = Network::from_rows(&[vec![0.5, 0.5], vec![1.0, 0.0]]).with_diagonal(true);
        let e = eigenvector_centrality(&asym).unwrap();
        assert!((e[0] - 2.0 / 3.0).abs() < 1e-12 && (e[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    /// Σ_{n<N} (1−β)βⁿ Qⁿ z, truncated once the tail bound β^N‖z‖∞ drops below 1e-10.
    fn truncated_series(q: &DMatrix<f64>, z: &[f64], beta: f64) -> Vec<f64> {
        let mut term = z.to_vec();
        let mut acc = vec![0.0; z.len()];
        let mut weight = 1.0 - beta;
        let mut tail = linalg::sup_norm(z);
        while tail >= 1e-10 {
            acc.iter_mut().zip(&term).for_each(|(a, t)| *a += weight * t);
            term = linalg::mat_vec(q, &term);
            weight *= beta;
            tail *= beta;
        }
        acc
    }

    #[test]
    fn abel_finite_beta_matches_truncated_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let q = generate::random_stochastic(&mut rng, 7, 0.5);
            let z: Vec<f64> = (0..7).map(|_| rng.random::<f64>()).collect();
            for beta in [0.5, 0.9, 0.99] {
                let a = abel_limit(&q, &z, AbelMode::FiniteBeta(beta)).unwrap();
                let b = truncated_series(&q, &z, beta);
                assert!(linalg::sup_distance(&a, &b) < 1e-8, "β={beta}");
            }
        }
    }

    #[test]
    fn abel_degenerate_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let q = generate::random_stochastic(&mut rng, 5, 1.0);
        let c = vec![3.0; 5];
        for mode in [AbelMode::FiniteBeta(0.3), AbelMode::FiniteBeta(0.99), AbelMode::ExactLimit] {
            let v = abel_limit(&q, &c, mode).unwrap();
            assert!(linalg::sup_distance(&v, &c) < 1e-12);
        }
        let z = [0.1, 0.5, 0.2, 0.9, 0.0];
        let v = abel_limit(&q, &z, AbelMode::FiniteBeta(0.0)).unwrap();
        assert!(linalg::sup_distance(&v, &z) < 1e-15);
        assert!(abel_limit(&q, &z, AbelMode::FiniteBeta(1.0)).is_err());
    }

    #[test]
    fn abel_near_one_approaches_exact_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let q = generate::random_stochastic(&mut rng, 6, 0.7);
        let z: Vec<f64> = (0..6).map(|_| rng.random::<f64>()).collect();
        let exact = abel_limit(&q, &z, AbelMode::ExactLimit).unwrap();
        let near = abel_limit(&q, &z, AbelMode::FiniteBeta(0.999)).unwrap();
        assert!(linalg::sup_distance(&exact, &near) <= 0.01 * linalg::sup_norm(&z));
        let oracle = truncated_series(&q, &z, 0.999);
        assert!(linalg::sup_distance(&near, &oracle) < 1e-8);
    }

    #[test]
    fn mfpt_closed_forms() {
        let m = mfpt(&swap()).unwrap();
        assert!((m.m[(0, 1)] - 1.0).abs() < 1e-12 && (m.m[(1, 0)] - 1.0).abs() < 1e-12);
        let q = 0.25;
        let lazy = DMatrix::from_row_slice(2, 2, &[1.0 - q, q, q, 1.0 - q]);
        let m = mfpt(&lazy).unwrap();
        assert!((m.m[(0, 1)] - 1.0 / q).abs() < 1e-12);
        // Kac: return time = 1/p
        assert!((m.m[(0, 0)] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn mfpt_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let q = generate::random_stochastic(&mut rng, 6, 0.6);
        let m = mfpt(&q).unwrap();
        assert!(m.residual(&q) <= 1e-9);
        let walks = 200_000;
        for (from, to) in [(0usize, 5usize), (3, 1)] {
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..walks {
                let mut s = from;
                let mut steps = 0u64;
                loop {
                    steps += 1;
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut next = 5;
                    for j in 0..6 {
                        acc += q[(s, j)];
                        if u < acc {
                            next = j;
                            break;
                        }
                    }
                    s = next;
                    if s == to {
                        break;
                    }
                }
                sum += steps as f64;
                sum_sq += (steps * steps) as f64;
            }
            let mean = sum / walks as f64;
            let se = ((sum_sq / walks as f64 - mean * mean) / walks as f64).sqrt();
            assert!((mean - m.m[(from, to)]).abs() <= 3.0 * se, "{mean} vs {}", m.m[(from, to)]);
        }
    }

    #[test]
    fn trajectory_detects_cycles() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let q = generate::random_stochastic(&mut rng, 5, 1.0);
        let z = [1.0, 0.0, 0.5, 0.2, 0.7];
        let t = power_trajectory(&q, &z, 400).unwrap();
        assert_eq!(t.cycle_length, Some(1));
        let exact = abel_limit(&q, &z, AbelMode::ExactLimit).unwrap();
        assert!(linalg::sup_distance(t.vectors.last().unwrap(), &exact) < 1e-9);

        let t = power_trajectory(&swap(), &[0.2, 0.8], 10).unwrap();
        assert_eq!(t.cycle_length, Some(2));
        let avg = t.cycle_average().unwrap();
        let exact = abel_limit(&swap(), &[0.2, 0.8], AbelMode::ExactLimit).unwrap();
        assert!(linalg::sup_distance(&avg, &exact) < 1e-12);
    }

    #[test]
    fn absorption_into_two_classes() {
        // 0 absorbing, 2 absorbing, 1 splits 30/70
        let q = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.3, 0.0, 0.7, 0.0, 0.0, 1.0]);
        let ca = ComponentAnalysis::of_matrix(&q);
        let h = absorption_probabilities(&q, &ca).unwrap();
        assert!((h[(1, 0)] - 0.3).abs() < 1e-12 && (h[(1, 1)] - 0.7).abs() < 1e-12);
        let e = ergodic_distribution_from(&q, 1).unwrap();
        assert!((e[0] - 0.3).abs() < 1e-12 && (e[2] - 0.7).abs() < 1e-12);
    }
}
