//! JSON scenario files. A top-level `kind` of `"model"` or `"cis"` selects the
//! schema; unknown keys are rejected and every label is resolved against the
//! declared states, agents and signals.
//!
//! ```json
//! {
//!   "kind": "model",
//!   "states": ["lo", "hi"],
//!   "agents": ["a", "b"],
//!   "signals": {"a": ["a0", "a1"], "b": ["b0"]},
//!   "beliefs": {
//!     "a": {"a0": {"marginals": {"state": [0.7, 0.3], "signals": {"b": [1.0]}}}, ...},
//!     "b": {"b0": {"full": {"lo": {"a0": 0.25, "a1": 0.25}, "hi": {"a0": 0.25, "a1": 0.25}}}}
//!   },
//!   "network": {"weights": [[0, 1], [1, 0]], "diagonal_allowed": false},
//!   "priors": {"a": [0.5, 0.5], "b": [1.0]},
//!   "y": {"values": {"lo": 0, "hi": 1}, "bound": 1}
//! }
//! ```
//!
//! Full beliefs are keyed by state, then by the other agents' signals joined
//! with `|` in agent order; absent entries are zero. An optional `market` key
//! gives the draw for market simulation: `{"nature": {"from_agent": "a"}}`,
//! `{"nature": {"joint": {state: {"a0|b0": p}}}}` (all agents' signals) or
//! `{"fixed": {"state": "lo", "signals": {"a": "a0", "b": "b0"}}}`.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};
use crate::market::{DrawMode, GeneratingDistribution};
use crate::model::{BasicVariable, InterimBelief, ModelSpec, Network, Prior};
use crate::tyranny::CisSpec;

type Labelled<T> = BTreeMap<String, T>;

#[derive(Debug, Clone)]
pub enum Scenario {
    Model(ModelScenario),
    Cis(CisScenario),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Model,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CisKind {
    #[default]
    Cis,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelScenario {
    pub kind: ModelKind,
    pub states: Vec<String>,
    pub agents: Vec<String>,
    pub signals: Labelled<Vec<String>>,
    pub beliefs: Labelled<Labelled<BeliefEntry>>,
    pub network: NetworkEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priors: Option<Labelled<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<YEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub market: Option<MarketEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum BeliefEntry {
    Marginals(MarginalEntry),
    Full(Labelled<Labelled<f64>>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginalEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<Vec<f64>>,
    #[serde(default)]
    pub signals: Labelled<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkEntry {
    pub weights: Vec<Vec<f64>>,
    #[serde(default)]
    pub diagonal_allowed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub type_weights: Option<Labelled<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YEntry {
    pub values: Labelled<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum MarketEntry {
    Nature(NatureEntry),
    Fixed(FixedEntry),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NatureEntry {
    FromAgent(String),
    Joint(Labelled<Labelled<f64>>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedEntry {
    pub state: String,
    pub signals: Labelled<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CisScenario {
    pub kind: CisKind,
    pub states: Vec<String>,
    pub agents: Vec<String>,
    pub signals: Labelled<Vec<String>>,
    pub rho: Labelled<Vec<f64>>,
    /// Per agent, per state, the likelihoods of that agent's signals.
    pub eta: Labelled<Labelled<Vec<f64>>>,
    pub network: NetworkEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<YEntry>,
}

/// A resolved scenario.
#[derive(Debug, Clone)]
pub enum Loaded {
    Model { spec: ModelSpec, market: Option<DrawMode> },
    Cis(CisSpec),
}

#[derive(Deserialize)]
struct Peek {
    kind: Option<String>,
}

pub fn parse_scenario(text: &str, context: &str) -> Result<Loaded> {
    let parse_error = |e: serde_json::Error| Error::Parse {
        context: context.to_string(),
        message: e.to_string(),
    };
    let peek: Peek = serde_json::from_str(text).map_err(parse_error)?;
    let scenario = match peek.kind.as_deref() {
        Some("model") => Scenario::Model(serde_json::from_str(text).map_err(parse_error)?),
        Some("cis") => Scenario::Cis(serde_json::from_str(text).map_err(parse_error)?),
        other => {
            return Err(Error::Parse {
                context: context.to_string(),
                message: format!("top-level `kind` must be \"model\" or \"cis\", found {other:?}"),
            })
        }
    };
    scenario.resolve()
}

pub fn load_scenario(path: &Path) -> Result<Loaded> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
        context: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_scenario(&text, &path.display().to_string())
}

impl Scenario {
    pub fn resolve(self) -> Result<Loaded> {
        match self {
            Scenario::Model(m) => m.resolve(),
            Scenario::Cis(c) => c.resolve().map(Loaded::Cis),
        }
    }

    pub fn to_json(&self) -> String {
        match self {
            Scenario::Model(m) => serde_json::to_string_pretty(m),
            Scenario::Cis(c) => serde_json::to_string_pretty(c),
        }
        .expect("scenario serializes")
    }
}

struct Labels<'a> {
    states: HashMap<&'a str, usize>,
    agents: HashMap<&'a str, usize>,
    signals: Vec<Vec<String>>,
    violations: Vec<Violation>,
}

impl<'a> Labels<'a> {
    fn new(states: &'a [String], agents: &'a [String], signals: &Labelled<Vec<String>>) -> Self {
        let mut violations = Vec::new();
        let mut ordered = Vec::with_capacity(agents.len());
        for a in agents {
            match signals.get(a) {
                Some(s) => ordered.push(s.clone()),
                None => {
                    violations.push(Violation::new(format!("signals.{a}"), "missing signal list"));
                    ordered.push(Vec::new());
                }
            }
        }
        for key in signals.keys() {
            if !agents.contains(key) {
                violations.push(Violation::new(format!("signals.{key}"), "unknown agent"));
            }
        }
        Self {
            states: states.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect(),
            agents: agents.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect(),
            signals: ordered,
            violations,
        }
    }

    fn state(&mut self, loc: &str, label: &str) -> Option<usize> {
        let found = self.states.get(label).copied();
        if found.is_none() {
            self.violations.push(Violation::new(loc, format!("unknown state `{label}`")));
        }
        found
    }

    fn agent(&mut self, loc: &str, label: &str) -> Option<usize> {
        let found = self.agents.get(label).copied();
        if found.is_none() {
            self.violations.push(Violation::new(loc, format!("unknown agent `{label}`")));
        }
        found
    }

    fn signal(&mut self, loc: &str, agent: usize, label: &str) -> Option<usize> {
        let found = self.signals[agent].iter().position(|s| s == label);
        if found.is_none() {
            self.violations.push(Violation::new(loc, format!("unknown signal `{label}` for this agent")));
        }
        found
    }

    /// Resolves `"s1|s2|…"` against the given agents.
    fn profile(&mut self, loc: &str, agents: &[usize], key: &str) -> Option<Vec<usize>> {
        let parts: Vec<&str> = if key.is_empty() { Vec::new() } else { key.split('|').collect() };
        if parts.len() != agents.len() {
            self.violations.push(Violation::new(
                loc,
                format!("signal profile `{key}` should name {} signals", agents.len()),
            ));
            return None;
        }
        let mut out = Vec::with_capacity(parts.len());
        for (&j, part) in agents.iter().zip(parts) {
            out.push(self.signal(loc, j, part)?);
        }
        Some(out)
    }

    fn finish<T>(self, value: T) -> Result<T> {
        if self.violations.is_empty() {
            Ok(value)
        } else {
            Err(Error::Invalid(self.violations))
        }
    }
}

fn matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != m) {
        return Err(Error::Dimension {
            what: "network.weights row".into(),
            expected: m,
            found: bad.len(),
        });
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

fn network(entry: &NetworkEntry, labels: &mut Labels<'_>) -> Result<Network> {
    let mut net = Network::new(matrix(&entry.weights)?).with_diagonal(entry.diagonal_allowed);
    if let Some(tw) = &entry.type_weights {
        let mut rows = Vec::new();
        for sigs in labels.signals.clone() {
            for s in sigs {
                match tw.get(&s) {
                    Some(r) => rows.push(r.clone()),
                    None => labels
                        .violations
                        .push(Violation::new(format!("network.type_weights.{s}"), "missing row")),
                }
            }
        }
        let known: Vec<&String> = labels.signals.iter().flatten().collect();
        for key in tw.keys() {
            if !known.contains(&key) {
                labels
                    .violations
                    .push(Violation::new(format!("network.type_weights.{key}"), "unknown signal"));
            }
        }
        net.type_weights = Some(rows);
    }
    Ok(net)
}

fn basic_variable(entry: &YEntry, labels: &mut Labels<'_>, n_states: usize) -> BasicVariable {
    let mut values = vec![0.0; n_states];
    let mut seen = vec![false; n_states];
    for (k, v) in &entry.values {
        if let Some(s) = labels.state(&format!("y.values.{k}"), k) {
            values[s] = *v;
            seen[s] = true;
        }
    }
    for (s, ok) in seen.iter().enumerate() {
        if !ok {
            labels.violations.push(Violation::new("y.values", format!("missing value for state {s}")));
        }
    }
    let y = match entry.bound {
        Some(b) => BasicVariable::with_bound(values, b),
        None => BasicVariable::new(values),
    };
    if y.values.iter().any(|v| !(*v >= 0.0 && *v <= y.bound)) || !(y.bound > 0.0) {
        labels
            .violations
            .push(Violation::new("y", format!("values must lie in [0, M] with M = {} > 0", y.bound)));
    }
    y
}

impl ModelScenario {
    pub fn resolve(self) -> Result<Loaded> {
        let mut labels = Labels::new(&self.states, &self.agents, &self.signals);
        let n_states = self.states.len();
        let n_agents = self.agents.len();
        let signals = labels.signals.clone();
        let skeleton = ModelSpec {
            states: self.states.clone(),
            agents: self.agents.clone(),
            signals: signals.clone(),
            beliefs: Vec::new(),
            network: Network::new(DMatrix::zeros(0, 0)),
            priors: None,
            y: None,
        };

        for key in self.beliefs.keys() {
            if !self.agents.contains(key) {
                labels.violations.push(Violation::new(format!("beliefs.{key}"), "unknown agent"));
            }
        }
        let mut beliefs = Vec::with_capacity(n_agents);
        for (i, agent) in self.agents.iter().enumerate() {
            let empty = Labelled::new();
            let given = self.beliefs.get(agent).unwrap_or(&empty);
            for key in given.keys() {
                if !signals[i].contains(key) {
                    labels
                        .violations
                        .push(Violation::new(format!("beliefs.{agent}.{key}"), "unknown signal"));
                }
            }
            let layout = skeleton.joint_layout(i);
            let mut row = Vec::with_capacity(signals[i].len());
            for sig in &signals[i] {
                let loc = format!("beliefs.{agent}.{sig}");
                let belief = match given.get(sig) {
                    None => {
                        labels.violations.push(Violation::new(&loc, "missing belief"));
                        InterimBelief::marginal(None, vec![None; n_agents])
                    }
                    Some(BeliefEntry::Marginals(m)) => {
                        let mut sig_marginals = vec![None; n_agents];
                        for (other, v) in &m.signals {
                            if let Some(j) = labels.agent(&format!("{loc}.signals.{other}"), other) {
                                if j == i {
                                    labels.violations.push(Violation::new(
                                        format!("{loc}.signals.{other}"),
                                        "an agent holds no belief about its own signal",
                                    ));
                                } else {
                                    sig_marginals[j] = Some(v.clone());
                                }
                            }
                        }
                        InterimBelief::marginal(m.state.clone(), sig_marginals)
                    }
                    Some(BeliefEntry::Full(map)) => {
                        let mut joint = vec![0.0; layout.len()];
                        for (state, profiles) in map {
                            let Some(theta) = labels.state(&format!("{loc}.full"), state) else {
                                continue;
                            };
                            for (key, &p) in profiles {
                                let ploc = format!("{loc}.full.{state}");
                                if let Some(t) = labels.profile(&ploc, &layout.others, key) {
                                    joint[layout.index(theta, &t)] += p;
                                }
                            }
                        }
                        InterimBelief::full(&layout, n_agents, joint)?
                    }
                };
                row.push(belief);
            }
            beliefs.push(row);
        }

        let net = network(&self.network, &mut labels)?;
        let priors = match &self.priors {
            None => None,
            Some(map) => {
                for key in map.keys() {
                    if !self.agents.contains(key) {
                        labels.violations.push(Violation::new(format!("priors.{key}"), "unknown agent"));
                    }
                }
                let mut out = Vec::with_capacity(n_agents);
                for agent in &self.agents {
                    match map.get(agent) {
                        Some(w) => out.push(Prior::new(w.clone())),
                        None => {
                            labels.violations.push(Violation::new(format!("priors.{agent}"), "missing prior"));
                            out.push(Prior::new(Vec::new()));
                        }
                    }
                }
                Some(out)
            }
        };
        let y = self.y.as_ref().map(|e| basic_variable(e, &mut labels, n_states));
        let spec = ModelSpec {
            beliefs,
            network: net,
            priors,
            y,
            ..skeleton
        };

        let market = match &self.market {
            None => None,
            Some(MarketEntry::Fixed(f)) => {
                let state = labels.state("market.fixed.state", &f.state).unwrap_or(0);
                let mut sigs = vec![0; n_agents];
                for (a, s) in &f.signals {
                    if let Some(i) = labels.agent("market.fixed.signals", a) {
                        sigs[i] = labels.signal(&format!("market.fixed.signals.{a}"), i, s).unwrap_or(0);
                    }
                }
                if f.signals.len() != n_agents {
                    labels
                        .violations
                        .push(Violation::new("market.fixed.signals", "every agent needs a signal"));
                }
                Some(DrawMode::Fixed { state, signals: sigs })
            }
            Some(MarketEntry::Nature(NatureEntry::FromAgent(a))) => {
                match labels.agent("market.nature.from_agent", a) {
                    Some(i) if labels.violations.is_empty() => {
                        Some(DrawMode::Nature(GeneratingDistribution::from_agent_view(&spec, i)?))
                    }
                    _ => None,
                }
            }
            Some(MarketEntry::Nature(NatureEntry::Joint(map))) => {
                let counts: Vec<usize> = signals.iter().map(Vec::len).collect();
                let profiles: usize = counts.iter().product();
                let mut weights = vec![0.0; n_states * profiles];
                let all: Vec<usize> = (0..n_agents).collect();
                for (state, entries) in map {
                    let Some(theta) = labels.state("market.nature.joint", state) else {
                        continue;
                    };
                    for (key, &p) in entries {
                        if let Some(t) = labels.profile(&format!("market.nature.joint.{state}"), &all, key) {
                            let flat = t.iter().zip(&counts).fold(0, |acc, (&s, &d)| acc * d + s);
                            weights[theta * profiles + flat] += p;
                        }
                    }
                }
                Some(DrawMode::Nature(GeneratingDistribution::new(n_states, counts, weights)?))
            }
        };
        labels.finish(Loaded::Model { spec, market })
    }

    /// Serializes a model (and optional draw) back into scenario form.
    pub fn from_spec(spec: &ModelSpec, market: Option<MarketEntry>) -> Self {
        let n_agents = spec.n_agents();
        let mut beliefs = Labelled::new();
        for (i, agent) in spec.agents.iter().enumerate() {
            let layout = spec.joint_layout(i);
            let mut row = Labelled::new();
            for (k, sig) in spec.signals[i].iter().enumerate() {
                let b = &spec.beliefs[i][k];
                let entry = match &b.joint {
                    Some(joint) => {
                        let mut map: Labelled<Labelled<f64>> = Labelled::new();
                        for (idx, &p) in joint.iter().enumerate() {
                            if p == 0.0 {
                                continue;
                            }
                            let (theta, t) = layout.decode(idx);
                            let key = layout
                                .others
                                .iter()
                                .zip(&t)
                                .map(|(&j, &s)| spec.signals[j][s].as_str())
                                .collect::<Vec<_>>()
                                .join("|");
                            map.entry(spec.states[theta].clone()).or_default().insert(key, p);
                        }
                        BeliefEntry::Full(map)
                    }
                    None => BeliefEntry::Marginals(MarginalEntry {
                        state: b.state.clone(),
                        signals: (0..n_agents)
                            .filter_map(|j| b.signals[j].clone().map(|v| (spec.agents[j].clone(), v)))
                            .collect(),
                    }),
                };
                row.insert(sig.clone(), entry);
            }
            beliefs.insert(agent.clone(), row);
        }
        let flat: Vec<&String> = spec.signals.iter().flatten().collect();
        Self {
            kind: ModelKind::Model,
            states: spec.states.clone(),
            agents: spec.agents.clone(),
            signals: spec.agents.iter().cloned().zip(spec.signals.iter().cloned()).collect(),
            beliefs,
            network: network_entry(&spec.network, |g| flat[g].clone()),
            priors: spec.priors.as_ref().map(|ps| {
                spec.agents
                    .iter()
                    .cloned()
                    .zip(ps.iter().map(|p| p.weights.clone()))
                    .collect()
            }),
            y: spec.y.as_ref().map(|y| y_entry(y, &spec.states)),
            market,
        }
    }
}

fn network_entry(net: &Network, label: impl Fn(usize) -> String) -> NetworkEntry {
    let w = &net.weights;
    NetworkEntry {
        weights: (0..w.nrows()).map(|i| w.row(i).iter().cloned().collect()).collect(),
        diagonal_allowed: net.diagonal_allowed,
        type_weights: net
            .type_weights
            .as_ref()
            .map(|rows| rows.iter().enumerate().map(|(g, r)| (label(g), r.clone())).collect()),
    }
}

fn y_entry(y: &BasicVariable, states: &[String]) -> YEntry {
    YEntry {
        values: states.iter().cloned().zip(y.values.iter().cloned()).collect(),
        bound: Some(y.bound),
    }
}

impl CisScenario {
    pub fn resolve(self) -> Result<CisSpec> {
        let mut labels = Labels::new(&self.states, &self.agents, &self.signals);
        let n_states = self.states.len();
        let mut rho = Vec::new();
        let mut eta = Vec::new();
        for key in self.rho.keys().chain(self.eta.keys()) {
            if !self.agents.contains(key) {
                labels.violations.push(Violation::new(key.as_str(), "unknown agent"));
            }
        }
        for agent in &self.agents {
            match self.rho.get(agent) {
                Some(r) => rho.push(r.clone()),
                None => {
                    labels.violations.push(Violation::new(format!("rho.{agent}"), "missing prior"));
                    rho.push(Vec::new());
                }
            }
            let mut rows = vec![Vec::new(); n_states];
            match self.eta.get(agent) {
                Some(map) => {
                    for (state, row) in map {
                        if let Some(t) = labels.state(&format!("eta.{agent}"), state) {
                            rows[t] = row.clone();
                        }
                    }
                }
                None => labels.violations.push(Violation::new(format!("eta.{agent}"), "missing likelihoods")),
            }
            eta.push(rows);
        }
        let net = network(&self.network, &mut labels)?;
        let y = self.y.as_ref().map(|e| basic_variable(e, &mut labels, n_states));
        let cis = CisSpec {
            states: self.states.clone(),
            agents: self.agents.clone(),
            signals: labels.signals.clone(),
            rho,
            eta,
            network: net,
            y,
        };
        labels.finish(cis)
    }

    pub fn from_cis(cis: &CisSpec) -> Self {
        Self {
            kind: CisKind::Cis,
            states: cis.states.clone(),
            agents: cis.agents.clone(),
            signals: cis.agents.iter().cloned().zip(cis.signals.iter().cloned()).collect(),
            rho: cis.agents.iter().cloned().zip(cis.rho.iter().cloned()).collect(),
            eta: cis
                .agents
                .iter()
                .zip(&cis.eta)
                .map(|(a, rows)| (a.clone(), cis.states.iter().cloned().zip(rows.iter().cloned()).collect()))
                .collect(),
            network: network_entry(&cis.network, |g| g.to_string()),
            y: cis.y.as_ref().map(|y| y_entry(y, &cis.states)),
        }
    }
}

/// The worked examples as scenario files, keyed by file name. The copies under
/// `fixtures/` are written from this list by `cargo run --example write_fixtures`.
pub fn fixture_corpus() -> Vec<(&'static str, Scenario)> {
    use crate::fixtures;
    let model = |spec: ModelSpec| Scenario::Model(ModelScenario::from_spec(&spec, None));
    let swap = Network::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
    vec![
        ("certainty_cycle.json", model(fixtures::certainty_cycle())),
        ("optimism_case_one.json", model(fixtures::optimism_case_one(5))),
        ("optimism_case_two.json", model(fixtures::optimism_case_two(5, true))),
        ("counterexample.json", model(fixtures::counterexample())),
        (
            "tightness.json",
            model(fixtures::tightness_model(5, 0.2, 0.05, 0.0).expect("valid parameters")),
        ),
        (
            "common_prior.json",
            Scenario::Model(ModelScenario::from_spec(
                &fixtures::common_prior_pair(0.8, swap),
                Some(MarketEntry::Nature(NatureEntry::FromAgent("a".into()))),
            )),
        ),
        ("tyranny_extreme.json", Scenario::Cis(CisScenario::from_cis(&fixtures::tyranny_extreme()))),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::generate::{self, ModelShape};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn round_trip(spec: &ModelSpec) -> ModelSpec {
        let json = Scenario::Model(ModelScenario::from_spec(spec, None)).to_json();
        match parse_scenario(&json, "test").unwrap() {
            Loaded::Model { spec, .. } => spec,
            Loaded::Cis(_) => unreachable!(),
        }
    }

    #[test]
    fn models_round_trip() {
        for spec in [fixtures::certainty_cycle(), fixtures::counterexample(), fixtures::optimism_case_two(4, true)] {
            assert_eq!(round_trip(&spec), spec);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(91);
        let spec = generate::random_model(&mut rng, &ModelShape::sparse(3, 2, 3));
        assert_eq!(round_trip(&spec), spec);
    }

    #[test]
    fn fixture_files_are_current() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
        for (name, scenario) in fixture_corpus() {
            let on_disk = std::fs::read_to_string(dir.join(name)).unwrap();
            assert_eq!(on_disk.trim_end(), scenario.to_json(), "{name} is stale");
            load_scenario(&dir.join(name)).unwrap();
        }
    }

    #[test]
    fn cis_round_trips() {
        let cis = fixtures::tyranny_extreme();
        let json = Scenario::Cis(CisScenario::from_cis(&cis)).to_json();
        match parse_scenario(&json, "test").unwrap() {
            Loaded::Cis(back) => assert_eq!(back, cis),
            _ => unreachable!(),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let json = Scenario::Model(ModelScenario::from_spec(&fixtures::certainty_cycle(), None)).to_json();
        let bad = json.replacen("\"states\"", "\"colour\": 1, \"states\"", 1);
        let err = parse_scenario(&bad, "cycle.json").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        assert!(err.to_string().contains("line"), "{err}");
    }

    #[test]
    fn unknown_labels_are_violations() {
        let json = Scenario::Model(ModelScenario::from_spec(&fixtures::certainty_cycle(), None)).to_json();
        let bad = json.replace("\"s2\": 2.0", "\"s9\": 2.0");
        match parse_scenario(&bad, "x").unwrap_err() {
            Error::Invalid(v) => assert!(v.iter().any(|v| v.message.contains("unknown state `s9`"))),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn market_entries_resolve() {
        let spec = generate::two_signal_marginal(&[0.2, 0.9]);
        let fixed = MarketEntry::Fixed(FixedEntry {
            state: "hi".into(),
            signals: [("a".to_string(), "a1".to_string()), ("b".to_string(), "b0".to_string())].into(),
        });
        let json = Scenario::Model(ModelScenario::from_spec(&spec, Some(fixed))).to_json();
        match parse_scenario(&json, "x").unwrap() {
            Loaded::Model { market: Some(DrawMode::Fixed { state, signals }), .. } => {
                assert_eq!((state, signals), (1, vec![1, 0]));
            }
            other => panic!("{other:?}"),
        }
    }
}
