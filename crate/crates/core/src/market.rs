//! Monte Carlo simulation of the over-the-counter asset market.
//!
//! One asset is passed between classes of traders. Each period the game
//! continues with probability `β`; if it stops, the current holder consumes
//! `y(θ)`. Otherwise a buyer class `j` is drawn from the holder's row of `Γ`
//! and the asset changes hands at `s*(tʲ)`, the equilibrium action of the
//! β-game at the buying class's signal.
//!
//! All randomness comes from `ChaCha8Rng`: run `r` of seed `s` uses
//! `seed_from_u64(s)` on stream `r`, so every run is reproducible on its own.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::game;
use crate::interaction::SignalIndex;
use crate::model::ModelSpec;
use crate::spectral;

/// A distribution over `Θ × T`, flattened state-major with signal profiles
/// as a mixed-radix number in agent order.
#[derive(Debug, Clone)]
pub struct GeneratingDistribution {
    pub n_states: usize,
    pub counts: Vec<usize>,
    pub weights: Vec<f64>,
}

impl GeneratingDistribution {
    pub fn new(n_states: usize, counts: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        let expected = n_states * counts.iter().product::<usize>();
        if weights.len() != expected {
            return Err(Error::Dimension {
                what: "generating distribution".into(),
                expected,
                found: weights.len(),
            });
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(
                "generating distribution must be a probability vector".into(),
            ));
        }
        Ok(Self {
            n_states,
            counts,
            weights,
        })
    }

    /// The joint `μⁱ(tⁱ) πⁱ(θ, t⁻ⁱ | tⁱ)` implied by one agent's prior and full beliefs.
    pub fn from_agent_view(spec: &ModelSpec, agent: usize) -> Result<Self> {
        let priors = spec
            .priors
            .as_ref()
            .ok_or_else(|| Error::Capability("a generating distribution needs priors".into()))?;
        let counts: Vec<usize> = spec.signals.iter().map(Vec::len).collect();
        let profiles: usize = counts.iter().product();
        let layout = spec.joint_layout(agent);
        let mut weights = vec![0.0; spec.n_states() * profiles];
        for (k, belief) in spec.beliefs[agent].iter().enumerate() {
            let joint = belief.joint.as_ref().ok_or_else(|| {
                Error::Capability("a generating distribution needs full-mode beliefs".into())
            })?;
            for (idx, &p) in joint.iter().enumerate() {
                let (theta, other) = layout.decode(idx);
                let mut t = vec![0; counts.len()];
                t[agent] = k;
                for (slot, &j) in layout.others.iter().enumerate() {
                    t[j] = other[slot];
                }
                let flat = t.iter().zip(&counts).fold(0, |acc, (&s, &d)| acc * d + s);
                weights[theta * profiles + flat] += priors[agent].weights[k] * p;
            }
        }
        Self::new(spec.n_states(), counts, weights)
    }

    fn decode(&self, idx: usize) -> (usize, Vec<usize>) {
        let profiles: usize = self.counts.iter().product();
        let theta = idx / profiles;
        let mut rest = idx % profiles;
        let mut t = vec![0; self.counts.len()];
        for k in (0..self.counts.len()).rev() {
            t[k] = rest % self.counts[k];
            rest /= self.counts[k];
        }
        (theta, t)
    }
}

#[derive(Debug, Clone)]
pub enum DrawMode {
    /// Draw `(θ, t)` afresh for every run.
    Nature(GeneratingDistribution),
    /// Use the same state and signal profile (local indices per agent) in every run.
    Fixed { state: usize, signals: Vec<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialClass {
    Fixed(usize),
    /// Draw the first holder from the eigenvector centrality of `Γ`.
    Centrality,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketConfig {
    /// Continuation probability.
    pub beta: f64,
    pub initial: InitialClass,
    /// Permit sales into the holder's own class (`γⁱⁱ > 0`).
    pub allow_own_market: bool,
}

impl MarketConfig {
    pub fn new(beta: f64) -> Self {
        Self {
            beta,
            initial: InitialClass::Centrality,
            allow_own_market: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeEvent {
    pub period: u64,
    pub seller: usize,
    pub buyer: usize,
    pub price: f64,
    /// Global signal index of the buying class's realized signal.
    pub buyer_signal: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketRun {
    pub beta: f64,
    pub seed: u64,
    pub run: u64,
    pub state: usize,
    /// Local signal index per agent.
    pub signals: Vec<usize>,
    pub events: Vec<TradeEvent>,
    pub payoff: f64,
    /// Holder classes in order; one more entry than there are events.
    pub holders: Vec<usize>,
}

impl MarketRun {
    /// Periods the asset existed: trades plus the final consumption period.
    pub fn duration(&self) -> u64 {
        self.events.len() as u64 + 1
    }
}

/// A prepared market: equilibrium prices and sampling tables.
#[derive(Debug, Clone)]
pub struct Market {
    pub config: MarketConfig,
    pub index: SignalIndex,
    /// `s*(β)` per global signal.
    pub prices: Vec<f64>,
    pub y: Vec<f64>,
    draw: DrawMode,
    nature: Option<WeightedIndex<f64>>,
    rows: Vec<WeightedIndex<f64>>,
    initial: Option<WeightedIndex<f64>>,
}

impl Market {
    pub fn new(spec: &ModelSpec, y: &[f64], config: MarketConfig, draw: DrawMode) -> Result<Self> {
        let n = spec.n_agents();
        let w = &spec.network.weights;
        if !config.allow_own_market && spec.network.has_self_weight() {
            return Err(Error::InvalidParameter(
                "network has self-weights but selling into one's own market is disabled".into(),
            ));
        }
        let mut game_spec = spec.clone();
        game_spec.network.diagonal_allowed |= config.allow_own_market;
        let prices = game::solve_beta_game(&game_spec, y, config.beta)?.actions;
        let rows = (0..n)
            .map(|i| {
                WeightedIndex::new(w.row(i).iter().cloned())
                    .map_err(|e| Error::InvalidParameter(format!("network row {i}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let initial = match config.initial {
            InitialClass::Fixed(i) if i >= n => {
                return Err(Error::InvalidParameter(format!("initial class {i} out of range")))
            }
            InitialClass::Fixed(_) => None,
            InitialClass::Centrality => {
                let e = spectral::eigenvector_centrality(&spec.network)?;
                Some(WeightedIndex::new(e).map_err(|e| Error::InvalidParameter(e.to_string()))?)
            }
        };
        let counts: Vec<usize> = spec.signals.iter().map(Vec::len).collect();
        let nature = match &draw {
            DrawMode::Nature(g) => {
                if g.counts != counts || g.n_states != spec.n_states() {
                    return Err(Error::InvalidParameter(
                        "generating distribution does not match the model's states and signals".into(),
                    ));
                }
                Some(WeightedIndex::new(g.weights.iter().cloned()).map_err(|e| Error::InvalidParameter(e.to_string()))?)
            }
            DrawMode::Fixed { state, signals } => {
                if *state >= spec.n_states()
                    || signals.len() != n
                    || signals.iter().zip(&counts).any(|(s, c)| s >= c)
                {
                    return Err(Error::InvalidParameter("fixed draw is out of range".into()));
                }
                None
            }
        };
        Ok(Self {
            config,
            index: SignalIndex::of(spec),
            prices,
            y: y.to_vec(),
            draw,
            nature,
            rows,
            initial,
        })
    }

    fn rng(seed: u64, run: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(run);
        rng
    }

    fn draw_world(&self, rng: &mut ChaCha8Rng) -> (usize, Vec<usize>) {
        match (&self.draw, &self.nature) {
            (DrawMode::Nature(g), Some(d)) => g.decode(d.sample(rng)),
            (DrawMode::Fixed { state, signals }, _) => (*state, signals.clone()),
            _ => unreachable!("nature sampler exists in nature mode"),
        }
    }

    fn first_holder(&self, rng: &mut ChaCha8Rng) -> usize {
        match (&self.config.initial, &self.initial) {
            (InitialClass::Fixed(i), _) => *i,
            (_, Some(d)) => d.sample(rng),
            _ => unreachable!("centrality sampler exists"),
        }
    }

    /// One full run with every trade recorded.
    pub fn simulate(&self, seed: u64, run: u64) -> MarketRun {
        let mut rng = Self::rng(seed, run);
        let (state, signals) = self.draw_world(&mut rng);
        let mut holder = self.first_holder(&mut rng);
        let mut holders = vec![holder];
        let mut events = Vec::new();
        let mut period = 0u64;
        while rng.random_bool(self.config.beta) {
            let buyer = self.rows[holder].sample(&mut rng);
            let buyer_signal = self.index.global(buyer, signals[buyer]);
            events.push(TradeEvent {
                period,
                seller: holder,
                buyer,
                price: self.prices[buyer_signal],
                buyer_signal,
            });
            holder = buyer;
            holders.push(holder);
            period += 1;
        }
        MarketRun {
            beta: self.config.beta,
            seed,
            run,
            state,
            signals,
            events,
            payoff: self.y[state],
            holders,
        }
    }

    /// Per-run summary without storing events.
    fn summarize(&self, seed: u64, run: u64) -> RunSummary {
        let mut rng = Self::rng(seed, run);
        let (state, signals) = self.draw_world(&mut rng);
        let mut holder = self.first_holder(&mut rng);
        let mut bought = vec![0u64; self.index.len()];
        let mut trades = 0u64;
        let mut price_sum = 0.0;
        while rng.random_bool(self.config.beta) {
            let buyer = self.rows[holder].sample(&mut rng);
            let s = self.index.global(buyer, signals[buyer]);
            bought[s] += 1;
            price_sum += self.prices[s];
            trades += 1;
            holder = buyer;
        }
        RunSummary {
            trades,
            price_sum,
            bought,
            payoff: self.y[state],
        }
    }

    /// Runs `0..runs` of `seed` in parallel and aggregates them in run order.
    pub fn simulate_batch(&self, seed: u64, runs: u64) -> PriceStats {
        let summaries: Vec<RunSummary> = (0..runs)
            .into_par_iter()
            .map(|r| self.summarize(seed, r))
            .collect();
        let mut acc = Accumulator::new(self.index.len());
        for s in &summaries {
            acc.push(s);
        }
        acc.finish(&self.prices, &self.index)
    }
}

struct RunSummary {
    trades: u64,
    price_sum: f64,
    bought: Vec<u64>,
    payoff: f64,
}

struct Accumulator {
    runs: u64,
    run_means: Vec<f64>,
    bought: Vec<u64>,
    durations: BTreeMap<u64, u64>,
    payoff_sum: f64,
}

impl Accumulator {
    fn new(n_signals: usize) -> Self {
        Self {
            runs: 0,
            run_means: Vec::new(),
            bought: vec![0; n_signals],
            durations: BTreeMap::new(),
            payoff_sum: 0.0,
        }
    }

    fn push(&mut self, s: &RunSummary) {
        self.runs += 1;
        if s.trades > 0 {
            self.run_means.push(s.price_sum / s.trades as f64);
        }
        for (a, b) in self.bought.iter_mut().zip(&s.bought) {
            *a += b;
        }
        *self.durations.entry(s.trades + 1).or_insert(0) += 1;
        self.payoff_sum += s.payoff;
    }

    fn finish(self, prices: &[f64], index: &SignalIndex) -> PriceStats {
        let m = self.run_means.len();
        let (mean_run_price, run_price_se) = if m == 0 {
            (f64::NAN, f64::NAN)
        } else {
            let mean = self.run_means.iter().sum::<f64>() / m as f64;
            let var = if m > 1 {
                self.run_means.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64
            } else {
                0.0
            };
            (mean, (var / m as f64).sqrt())
        };
        let total: u64 = self.bought.iter().sum();
        let pooled_mean = if total == 0 {
            f64::NAN
        } else {
            self.bought
                .iter()
                .zip(prices)
                .map(|(&c, p)| c as f64 * p)
                .sum::<f64>()
                / total as f64
        };
        let by_class = index
            .ranges
            .iter()
            .map(|r| ClassStats::from_counts(&self.bought[r.clone()], &prices[r.clone()]))
            .collect();
        PriceStats {
            runs: self.runs,
            runs_with_trades: m as u64,
            trades: total,
            mean_run_price,
            run_price_se,
            pooled_mean,
            by_class,
            durations: self.durations,
            mean_payoff: self.payoff_sum / self.runs.max(1) as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassStats {
    pub trades: u64,
    pub mean: f64,
    pub variance: f64,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

impl ClassStats {
    /// Statistics of a price distribution given as counts per distinct price.
    fn from_counts(counts: &[u64], prices: &[f64]) -> Self {
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return Self {
                trades: 0,
                mean: f64::NAN,
                variance: f64::NAN,
                min: f64::NAN,
                median: f64::NAN,
                max: f64::NAN,
            };
        }
        let mut pairs: Vec<(f64, u64)> = prices
            .iter()
            .cloned()
            .zip(counts.iter().cloned())
            .filter(|(_, c)| *c > 0)
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mean = pairs.iter().map(|(p, c)| p * *c as f64).sum::<f64>() / n as f64;
        let variance = pairs.iter().map(|(p, c)| (p - mean).powi(2) * *c as f64).sum::<f64>() / n as f64;
        let half = n.div_ceil(2);
        let mut seen = 0;
        let mut median = pairs[0].0;
        for (p, c) in &pairs {
            seen += c;
            if seen >= half {
                median = *p;
                break;
            }
        }
        Self {
            trades: n,
            mean,
            variance,
            min: pairs[0].0,
            median,
            max: pairs[pairs.len() - 1].0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceStats {
    pub runs: u64,
    pub runs_with_trades: u64,
    pub trades: u64,
    /// Mean over runs (with at least one trade) of the run's average price.
    pub mean_run_price: f64,
    /// Standard error of `mean_run_price`.
    pub run_price_se: f64,
    /// Mean over all trades pooled.
    pub pooled_mean: f64,
    /// Prices paid by each buying class.
    pub by_class: Vec<ClassStats>,
    /// Asset lifetime in periods (trades + 1) → number of runs.
    pub durations: BTreeMap<u64, u64>,
    pub mean_payoff: f64,
}

/// Aggregates recorded runs. Runs are processed in the order given.
pub fn empirical_price_stats(runs: &[MarketRun], market: &Market) -> Result<PriceStats> {
    if runs.is_empty() {
        return Err(Error::InvalidParameter("no runs to summarize".into()));
    }
    let mut acc = Accumulator::new(market.index.len());
    for r in runs {
        let mut bought = vec![0; market.index.len()];
        for e in &r.events {
            bought[e.buyer_signal] += 1;
        }
        acc.push(&RunSummary {
            trades: r.events.len() as u64,
            price_sum: r.events.iter().map(|e| e.price).sum(),
            bought,
            payoff: r.payoff,
        });
    }
    Ok(acc.finish(&market.prices, &market.index))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub df: usize,
    /// Upper critical value at the requested level.
    pub critical: f64,
    pub p_value: f64,
    pub passed: bool,
}

/// Pearson test of lifetimes against `P(D = d) = β^{d−1}(1−β)`, `d ≥ 1`, using
/// up to `bins` cells of roughly equal expected mass (the last cell is open-ended).
pub fn geometric_chi_square(durations: &BTreeMap<u64, u64>, beta: f64, bins: usize, level: f64) -> ChiSquareTest {
    let n: u64 = durations.values().sum();
    // cell b covers lifetimes in [edges[b], edges[b+1]); survival P(D ≥ k) = β^{k−1}
    let mut edges = vec![1u64];
    for b in 1..bins {
        let target = 1.0 - b as f64 / bins as f64;
        // smallest k with β^{k−1} ≤ target
        let k = if beta <= 0.0 {
            2
        } else {
            (target.ln() / beta.ln()).ceil() as u64 + 1
        };
        if k > *edges.last().expect("nonempty") {
            edges.push(k);
        }
    }
    let survival = |k: u64| beta.powf((k - 1) as f64);
    let cells = edges.len();
    let mut statistic = 0.0;
    for c in 0..cells {
        let lo = edges[c];
        let hi = edges.get(c + 1).copied();
        let prob = survival(lo) - hi.map_or(0.0, survival);
        let observed: u64 = durations
            .range(lo..hi.unwrap_or(u64::MAX))
            .map(|(_, v)| *v)
            .sum();
        let expected = prob * n as f64;
        if expected > 0.0 {
            statistic += (observed as f64 - expected).powi(2) / expected;
        } else if observed > 0 {
            statistic = f64::INFINITY;
        }
    }
    let df = cells.saturating_sub(1);
    if df == 0 {
        return ChiSquareTest {
            statistic,
            df,
            critical: 0.0,
            p_value: 1.0,
            passed: statistic == 0.0,
        };
    }
    let dist = ChiSquared::new(df as f64).expect("positive degrees of freedom");
    let critical = dist.inverse_cdf(1.0 - level);
    let p_value = 1.0 - dist.cdf(statistic);
    ChiSquareTest {
        statistic,
        df,
        critical,
        p_value,
        passed: statistic <= critical,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consensus::{self, Target};
    use crate::fixtures;
    use crate::model::Network;

    fn cps_market(beta: f64) -> (ModelSpec, Market) {
        let spec = fixtures::common_prior_pair(
            0.8,
            Network::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]),
        );
        let g = GeneratingDistribution::from_agent_view(&spec, 0).unwrap();
        let m = Market::new(&spec, &[0.0, 1.0], MarketConfig::new(beta), DrawMode::Nature(g)).unwrap();
        (spec, m)
    }

    #[test]
    fn zero_beta_never_trades() {
        let (_, m) = cps_market(0.0);
        for r in 0..50 {
            let run = m.simulate(3, r);
            assert!(run.events.is_empty());
            assert_eq!(run.holders.len(), 1);
            assert_eq!(run.payoff, m.y[run.state]);
        }
    }

    #[test]
    fn prices_are_equilibrium_actions() {
        let (spec, m) = cps_market(0.9);
        let s = game::solve_beta_game(&spec, &[0.0, 1.0], 0.9).unwrap().actions;
        for r in 0..100 {
            let run = m.simulate(17, r);
            for (k, e) in run.events.iter().enumerate() {
                assert_eq!(e.price.to_bits(), s[e.buyer_signal].to_bits());
                assert_eq!(m.index.agent_of[e.buyer_signal], e.buyer);
                assert_eq!(e.buyer_signal, m.index.global(e.buyer, run.signals[e.buyer]));
                assert_eq!(run.holders[k], e.seller);
                assert_eq!(run.holders[k + 1], e.buyer);
            }
        }
    }

    #[test]
    fn runs_are_reproducible() {
        let (_, m) = cps_market(0.95);
        assert_eq!(m.simulate(99, 4), m.simulate(99, 4));
        assert_ne!(m.simulate(99, 4), m.simulate(99, 5));
        assert_eq!(m.simulate_batch(7, 200), m.simulate_batch(7, 200));
    }

    #[test]
    fn stats_examples() {
        let (spec, _) = cps_market(0.9);
        let fixed = Market::new(
            &spec,
            &[0.0, 1.0],
            MarketConfig {
                initial: InitialClass::Fixed(0),
                ..MarketConfig::new(0.9)
            },
            DrawMode::Fixed {
                state: 1,
                signals: vec![1, 0],
            },
        )
        .unwrap();
        let runs: Vec<MarketRun> = (0..300).map(|r| fixed.simulate(5, r)).collect();
        let stats = empirical_price_stats(&runs, &fixed).unwrap();
        for c in &stats.by_class {
            assert!(c.trades > 0);
            assert_eq!(c.variance, 0.0);
        }
        let one = runs.iter().find(|r| r.events.len() == 1).unwrap();
        let stats = empirical_price_stats(std::slice::from_ref(one), &fixed).unwrap();
        assert_eq!(stats.mean_run_price, one.events[0].price);
        assert!(empirical_price_stats(&[], &fixed).is_err());
    }

    #[test]
    fn batch_agrees_with_recorded_runs() {
        let (_, m) = cps_market(0.8);
        let runs: Vec<MarketRun> = (0..500).map(|r| m.simulate(11, r)).collect();
        assert_eq!(empirical_price_stats(&runs, &m).unwrap(), m.simulate_batch(11, 500));
    }

    #[test]
    fn mean_price_tracks_consensus() {
        let (spec, m) = cps_market(0.99);
        let c = consensus::consensus_expectation(&spec, Target::State(&[0.0, 1.0]))
            .unwrap()
            .single()
            .unwrap();
        let stats = m.simulate_batch(2024, 4000);
        assert!((stats.mean_run_price - c).abs() <= 3.0 * stats.run_price_se, "{stats:?}");
    }

    #[test]
    fn lifetimes_are_geometric() {
        let (_, m) = cps_market(0.95);
        let stats = m.simulate_batch(8, 20_000);
        let t = geometric_chi_square(&stats.durations, 0.95, 20, 0.01);
        assert!(t.passed, "{t:?}");
        // a wrong continuation probability is rejected
        let wrong = geometric_chi_square(&stats.durations, 0.9, 20, 0.01);
        assert!(!wrong.passed);
    }

    #[test]
    fn own_market_needs_flag() {
        let mut spec = fixtures::common_prior_pair(0.8, Network::from_rows(&[vec![0.5, 0.5], vec![1.0, 0.0]]));
        spec.network.diagonal_allowed = true;
        let draw = DrawMode::Fixed {
            state: 0,
            signals: vec![0, 0],
        };
        assert!(Market::new(&spec, &[0.0, 1.0], MarketConfig::new(0.5), draw.clone()).is_err());
        let cfg = MarketConfig {
            allow_own_market: true,
            ..MarketConfig::new(0.5)
        };
        let m = Market::new(&spec, &[0.0, 1.0], cfg, draw).unwrap();
        assert!((0..200).any(|r| m.simulate(1, r).events.iter().any(|e| e.seller == e.buyer)));
    }
}
