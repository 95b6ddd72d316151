//! The first-order map `F` and the interaction structure `B` on the set of
//! all signals, plus the connectivity structure of `B`.

use std::ops::Range;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::{self, ComponentAnalysis};
use crate::model::ModelSpec;

/// All signals `S = ∪ Tⁱ` in one index space, agent blocks contiguous in declaration order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignalIndex {
    pub labels: Vec<String>,
    /// `ι(s)`: the agent owning signal `s`.
    pub agent_of: Vec<usize>,
    pub ranges: Vec<Range<usize>>,
}

impl SignalIndex {
    pub fn new(signals: &[Vec<String>]) -> Self {
        let mut labels = Vec::new();
        let mut agent_of = Vec::new();
        let mut ranges = Vec::with_capacity(signals.len());
        for (i, sigs) in signals.iter().enumerate() {
            let start = labels.len();
            labels.extend(sigs.iter().cloned());
            agent_of.extend(std::iter::repeat_n(i, sigs.len()));
            ranges.push(start..labels.len());
        }
        Self {
            labels,
            agent_of,
            ranges,
        }
    }

    pub fn of(spec: &ModelSpec) -> Self {
        Self::new(&spec.signals)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_agents(&self) -> usize {
        self.ranges.len()
    }

    /// Global index of agent `i`'s `k`-th signal.
    pub fn global(&self, agent: usize, k: usize) -> usize {
        self.ranges[agent].start + k
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// `F(tⁱ, θ) = πⁱ(θ | tⁱ)`.
#[derive(Debug, Clone)]
pub struct FirstOrderMap {
    pub f: DMatrix<f64>,
    pub index: SignalIndex,
}

impl FirstOrderMap {
    /// `x(1) = F y`.
    pub fn apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.f.ncols() {
            return Err(Error::Dimension {
                what: "basic random variable".into(),
                expected: self.f.ncols(),
                found: y.len(),
            });
        }
        Ok(crate::linalg::mat_vec(&self.f, y))
    }
}

pub fn build_f(spec: &ModelSpec) -> Result<FirstOrderMap> {
    let index = SignalIndex::of(spec);
    let mut f = DMatrix::zeros(index.len(), spec.n_states());
    for (i, beliefs) in spec.beliefs.iter().enumerate() {
        for (k, b) in beliefs.iter().enumerate() {
            let state = b.state.as_ref().ok_or_else(|| Error::MissingStateMarginal {
                signal: spec.signals[i][k].clone(),
            })?;
            if state.len() != spec.n_states() {
                return Err(Error::Dimension {
                    what: format!("state belief of signal `{}`", spec.signals[i][k]),
                    expected: spec.n_states(),
                    found: state.len(),
                });
            }
            let row = index.global(i, k);
            for (t, &p) in state.iter().enumerate() {
                f[(row, t)] = p;
            }
        }
    }
    Ok(FirstOrderMap { f, index })
}

#[derive(Debug, Clone)]
pub struct InteractionStructure {
    pub b: DMatrix<f64>,
    pub index: SignalIndex,
    pub irreducible: bool,
    pub aperiodic: bool,
}

impl InteractionStructure {
    pub fn components(&self) -> ComponentAnalysis {
        ComponentAnalysis::of_matrix(&self.b)
    }
}

/// Builds `B` from the network's weights, or its per-signal rows when present.
pub fn build_b(spec: &ModelSpec) -> Result<InteractionStructure> {
    build_b_with(spec, spec.network.type_weights.as_deref())
}

/// Builds `B` with explicit per-signal weight rows `γⁱʲ(tⁱ)` (indexed by global signal).
pub fn build_b_with(spec: &ModelSpec, type_weights: Option<&[Vec<f64>]>) -> Result<InteractionStructure> {
    let index = SignalIndex::of(spec);
    let n_agents = spec.n_agents();
    if let Some(tw) = type_weights {
        if tw.len() != index.len() {
            return Err(Error::Dimension {
                what: "type-dependent weight rows".into(),
                expected: index.len(),
                found: tw.len(),
            });
        }
        for (s, row) in tw.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.len() != n_agents || row.iter().any(|x| *x < 0.0) || (sum - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "weight row of signal `{}` is not a probability vector over agents",
                    index.labels[s]
                )));
            }
        }
    }
    let w = &spec.network.weights;
    let mut b = DMatrix::zeros(index.len(), index.len());
    for i in 0..n_agents {
        for (k, belief) in spec.beliefs[i].iter().enumerate() {
            let row = index.global(i, k);
            let gamma = |j: usize| match type_weights {
                Some(tw) => tw[row][j],
                None => w[(i, j)],
            };
            for j in 0..n_agents {
                let g = gamma(j);
                if g == 0.0 {
                    continue;
                }
                if j == i {
                    // one's own signal is known
                    b[(row, row)] += g;
                    continue;
                }
                let m = belief
                    .signals
                    .get(j)
                    .and_then(Option::as_ref)
                    .ok_or_else(|| Error::MissingSignalMarginal {
                        signal: spec.signals[i][k].clone(),
                        agent: spec.agents[j].clone(),
                    })?;
                for (l, &p) in m.iter().enumerate() {
                    b[(row, index.global(j, l))] += g * p;
                }
            }
        }
    }
    let adj = graph::support(&b);
    let ca = ComponentAnalysis::new(&adj);
    let irreducible = ca.is_irreducible();
    let aperiodic = ca
        .components
        .iter()
        .all(|c| graph::period(&adj, c) <= 1);
    Ok(InteractionStructure {
        b,
        index,
        irreducible,
        aperiodic,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Connectedness {
    pub connected: bool,
    /// A nonempty proper closed set when not connected: the first closed class in index order.
    pub certificate: Option<Vec<usize>>,
}

pub fn joint_connectedness(b: &DMatrix<f64>) -> Connectedness {
    let ca = ComponentAnalysis::of_matrix(b);
    if ca.is_irreducible() {
        Connectedness {
            connected: true,
            certificate: None,
        }
    } else {
        Connectedness {
            connected: false,
            certificate: ca.terminal_components().into_iter().next(),
        }
    }
}

/// Period of each strongly connected component of `B`, in component order.
pub fn periods(b: &DMatrix<f64>) -> Vec<usize> {
    let adj = graph::support(b);
    ComponentAnalysis::new(&adj)
        .components
        .iter()
        .map(|c| graph::period(&adj, c))
        .collect()
}

/// True when every component containing a cycle has period one.
pub fn aperiodicity(b: &DMatrix<f64>) -> bool {
    periods(b).into_iter().all(|p| p <= 1)
}

/// The closed classes `S_A` of `B`.
pub fn absorbing_components(b: &DMatrix<f64>) -> Vec<Vec<usize>> {
    ComponentAnalysis::of_matrix(b).terminal_components()
}
