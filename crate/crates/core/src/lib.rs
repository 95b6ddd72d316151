//! Higher-order average expectations and consensus expectations in networks
//! of agents with incomplete information.
//!
//! A model assigns each agent a set of signals and, for every signal, an
//! interim belief over states and the other agents' signals. Together with a
//! row-stochastic network `Γ` these define the interaction structure `B`, a
//! Markov matrix on the set of all signals. Iterated network-weighted
//! expectations are powers of `B`; their Abel limit is the consensus
//! expectation `c = p F y` with `p` the stationary distribution of `B`.

pub mod consensus;
pub mod error;
pub mod fixtures;
pub mod game;
pub mod generate;
pub mod graph;
pub mod interaction;
pub mod linalg;
pub mod market;
pub mod model;
pub mod optimism;
pub mod scenario;
pub mod spectral;
pub mod trade;
pub mod tyranny;

pub use consensus::{consensus_expectation, ConsensusResult, ConsensusValue, Target};
pub use error::{Error, Result, Violation};
pub use game::{solve_beta_game, GameSolution};
pub use interaction::{build_b, build_f, FirstOrderMap, InteractionStructure, SignalIndex};
pub use model::{BasicVariable, BeliefMode, InterimBelief, ModelSpec, Network, Prior};
pub use spectral::{StationaryDistribution, StationaryMethod};
