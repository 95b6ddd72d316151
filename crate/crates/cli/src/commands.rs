use std::fmt::Write as _;
use std::path::Path;

use consensus_lab::consensus::{self, Target};
use consensus_lab::game;
use consensus_lab::interaction::{self, InteractionStructure};
use consensus_lab::market::{self, DrawMode, Market, MarketConfig};
use consensus_lab::optimism;
use consensus_lab::scenario::{self, Loaded};
use consensus_lab::trade;
use consensus_lab::tyranny::{self, CisSpec};
use consensus_lab::{ConsensusValue, Error, ModelSpec};

use crate::table::{num, Table};
use crate::{Command, Flags, EXIT_CHECK_FAILED, EXIT_OK};

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

/// What a command produced: the text report, named CSV tables (the first is
/// what `--format csv` prints) and the exit status.
#[derive(Debug, Clone)]
pub struct Output {
    pub text: String,
    pub tables: Vec<(String, String)>,
    pub status: i32,
}

impl Output {
    fn new() -> Self {
        Self {
            text: String::new(),
            tables: Vec::new(),
            status: EXIT_OK,
        }
    }

    fn table(&mut self, name: &str, t: Table) {
        self.tables.push((name.to_string(), t.to_csv()));
    }

    fn check(&mut self, passed: bool) {
        if !passed {
            self.status = EXIT_CHECK_FAILED;
        }
    }

    fn append(&mut self, heading: &str, other: Output) {
        let _ = writeln!(self.text, "== {heading} ==");
        self.text.push_str(&other.text);
        self.text.push('\n');
        self.tables.extend(other.tables);
        self.status = self.status.max(other.status);
    }

    /// Writes every table plus `report.txt` into `dir`, creating it if needed.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, csv) in &self.tables {
            std::fs::write(dir.join(name), csv)?;
        }
        std::fs::write(dir.join("report.txt"), &self.text)
    }
}

fn verdict(passed: bool) -> &'static str {
    if passed {
        "PASS"
    } else {
        "FAIL"
    }
}

struct Scenario {
    spec: ModelSpec,
    market: Option<DrawMode>,
    cis: Option<CisSpec>,
}

fn load(path: &Path) -> Outcome<Scenario> {
    match scenario::load_scenario(path)? {
        Loaded::Model { spec, market } => {
            let violations = spec.validate();
            if !violations.is_empty() {
                return Err(Error::Invalid(violations).into());
            }
            Ok(Scenario {
                spec,
                market,
                cis: None,
            })
        }
        Loaded::Cis(cis) => {
            let violations = cis.validate();
            if !violations.is_empty() {
                return Err(Error::Invalid(violations).into());
            }
            let mut spec = tyranny::build_pi_from_cis(&cis)?;
            spec.y = cis.y.clone();
            Ok(Scenario {
                spec,
                market: None,
                cis: Some(cis),
            })
        }
    }
}

fn y_of(spec: &ModelSpec) -> Outcome<Vec<f64>> {
    spec.y
        .as_ref()
        .map(|y| y.values.clone())
        .ok_or_else(|| Error::Precondition("scenario has no basic random variable `y`".into()).into())
}

fn require<T: Copy>(v: Option<T>, flag: &str, command: &str) -> Outcome<T> {
    v.ok_or_else(|| Failure::Usage(format!("{command} needs --{flag}")))
}

pub fn execute(cmd: &Command, flags: &Flags) -> Outcome<Output> {
    let sc = load(cmd.scenario())?;
    match cmd {
        Command::Validate { .. } => Ok(validate(&sc)),
        Command::Build { .. } => build(&sc),
        Command::Consensus { .. } => consensus_cmd(&sc),
        Command::GameSolve { .. } => game_solve(&sc, flags),
        Command::SimulateMarket { .. } => simulate_market(&sc, flags),
        Command::VerifyOptimism { .. } => {
            let fbar = require(flags.fbar, "fbar", "verify-optimism")?;
            verify_optimism(&sc, fbar)
        }
        Command::VerifyTyranny { .. } => verify_tyranny(&sc),
        Command::NoTrade { .. } => no_trade(&sc),
        Command::Report { .. } => report(&sc, flags),
    }
}

fn validate(sc: &Scenario) -> Output {
    let spec = &sc.spec;
    let mut out = Output::new();
    let kind = if sc.cis.is_some() { "common-interpretation" } else { "model" };
    let _ = writeln!(
        out.text,
        "valid {kind} scenario: {} states, {} agents, {} signals",
        spec.n_states(),
        spec.n_agents(),
        spec.n_signals()
    );
    let _ = writeln!(out.text, "beliefs: {}", if spec.has_full_beliefs() { "full" } else { "marginal" });
    let _ = writeln!(out.text, "priors: {}", if spec.priors.is_some() { "yes" } else { "no" });
    let _ = writeln!(out.text, "y: {}", if spec.y.is_some() { "yes" } else { "no" });
    let mut t = Table::new(["key", "value"]);
    t.push(["kind".to_string(), kind.to_string()]);
    t.push(["states".to_string(), spec.n_states().to_string()]);
    t.push(["agents".to_string(), spec.n_agents().to_string()]);
    t.push(["signals".to_string(), spec.n_signals().to_string()]);
    out.table("validate.csv", t);
    out
}

/// Long form: one `(row, column, value)` record per entry.
fn matrix_table(rows: &[String], cols: &[String], at: impl Fn(usize, usize) -> f64) -> Table {
    let mut t = Table::new(["row", "column", "value"]);
    for (r, rl) in rows.iter().enumerate() {
        for (c, cl) in cols.iter().enumerate() {
            t.push([rl.clone(), cl.clone(), num(at(r, c))]);
        }
    }
    t
}

fn structure_summary(b: &InteractionStructure) -> String {
    let ca = b.components();
    let label = |set: &[usize]| -> String {
        set.iter().map(|&s| b.index.labels[s].as_str()).collect::<Vec<_>>().join(", ")
    };
    let mut text = String::new();
    let _ = writeln!(text, "types: {}", b.index.len());
    let _ = writeln!(text, "jointly connected: {}", yes_no(b.irreducible));
    let _ = writeln!(text, "aperiodic: {}", yes_no(b.aperiodic));
    for (k, comp) in ca.terminal_components().iter().enumerate() {
        let _ = writeln!(text, "closed class {k}: {{{}}}", label(comp));
    }
    let transient = ca.transient_states();
    if !transient.is_empty() {
        let _ = writeln!(text, "transient types: {{{}}}", label(&transient));
    }
    text
}

fn yes_no(v: bool) -> &'static str {
    if v {
        "yes"
    } else {
        "no"
    }
}

fn build(sc: &Scenario) -> Outcome<Output> {
    let b = interaction::build_b(&sc.spec)?;
    let f = interaction::build_f(&sc.spec)?;
    let mut out = Output::new();
    out.text.push_str(&structure_summary(&b));
    let labels = &b.index.labels;
    out.table("B.csv", matrix_table(labels, labels, |r, c| b.b[(r, c)]));
    out.table("F.csv", matrix_table(labels, &sc.spec.states, |r, c| f.f[(r, c)]));
    Ok(out)
}

fn consensus_cmd(sc: &Scenario) -> Outcome<Output> {
    let spec = &sc.spec;
    let y = y_of(spec)?;
    let r = consensus::consensus_expectation(spec, Target::State(&y))?;
    let mut out = Output::new();
    match &r.value {
        ConsensusValue::Single(c) => {
            let _ = writeln!(out.text, "consensus expectation c = {c}");
        }
        ConsensusValue::PerComponent { components, .. } => {
            let _ = writeln!(out.text, "{} closed classes; one consensus per class:", components.len());
            for (k, comp) in components.iter().enumerate() {
                let members: Vec<&str> = comp.signals.iter().map(|&s| r.index.labels[s].as_str()).collect();
                let _ = writeln!(out.text, "  class {k} {{{}}}: c = {}", members.join(", "), comp.value);
            }
        }
    }
    if let Some(e) = &r.e {
        let _ = writeln!(out.text, "centralities e:");
        for (name, v) in spec.agents.iter().zip(e) {
            let _ = writeln!(out.text, "  {name}: {v}");
        }
    } else {
        let _ = writeln!(out.text, "network is not irreducible: no eigenvector centrality");
    }

    let limits = r.limit_by_signal();
    let mut header = vec!["signal", "agent", "p", "x1", "limit"];
    if r.pseudopriors.is_some() {
        header.push("lambda");
    }
    let mut t = Table::new(header);
    let _ = writeln!(out.text, "signal  agent  p  lambda");
    for s in 0..r.index.len() {
        let agent = r.index.agent_of[s];
        let lambda = r
            .pseudopriors
            .as_ref()
            .map(|l| l[agent][s - r.index.ranges[agent].start]);
        let mut row = vec![
            r.index.labels[s].clone(),
            spec.agents[agent].clone(),
            num(r.p[s]),
            num(r.x1[s]),
            num(limits[s]),
        ];
        if let Some(l) = lambda {
            row.push(num(l));
        }
        t.push(row);
        let lambda_text = lambda.map_or("-".to_string(), |l| l.to_string());
        let _ = writeln!(
            out.text,
            "  {}  {}  {}  {}",
            r.index.labels[s], spec.agents[agent], r.p[s], lambda_text
        );
    }
    out.table("consensus.csv", t);

    if spec.has_full_beliefs() && spec.priors.is_some() {
        let check = consensus::cps_check(spec)?;
        if check.holds {
            let rep = consensus::verify_cps_decomposition(spec, &y)?;
            let _ = writeln!(out.text, "common prior over signals: yes");
            for (name, v) in spec.agents.iter().zip(&rep.ex_ante) {
                let _ = writeln!(out.text, "  ex ante expectation of {name}: {v}");
            }
            let _ = writeln!(
                out.text,
                "decomposition: sum_i e_i E[y] = {}, |c - sum| = {:e}: {}",
                rep.weighted,
                rep.decomposition_error,
                verdict(rep.passed)
            );
            out.check(rep.passed);
        } else {
            let _ = writeln!(
                out.text,
                "common prior over signals: no (max violation {:e})",
                check.max_violation
            );
        }
    }
    Ok(out)
}

fn game_solve(sc: &Scenario, flags: &Flags) -> Outcome<Output> {
    let spec = &sc.spec;
    let y = y_of(spec)?;
    let mut out = Output::new();
    let actions = if let Some(betas) = &flags.beta_per_agent {
        if betas.len() != spec.n_agents() {
            return Err(Error::Dimension {
                what: "--beta-per-agent".into(),
                expected: spec.n_agents(),
                found: betas.len(),
            }
            .into());
        }
        let sol = game::solve_heterogeneous(spec, &y, betas)?;
        let direct = game::solve_heterogeneous_direct(spec, &y, betas)?;
        let gap = sol
            .actions
            .iter()
            .zip(&direct)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let _ = writeln!(out.text, "per-agent β, transformed common β̂ = {}", sol.beta);
        let _ = writeln!(out.text, "residual {:e}; gap to direct solve {:e}", sol.residual, gap);
        sol.actions
    } else {
        let beta = require(flags.beta, "beta", "game-solve (or --beta-per-agent)")?;
        let sol = game::solve_beta_game(spec, &y, beta)?;
        let _ = writeln!(out.text, "β = {beta}; residual {:e}", sol.residual);
        sol.actions
    };
    let index = interaction::SignalIndex::of(spec);
    let mut t = Table::new(["signal", "agent", "action"]);
    let _ = writeln!(out.text, "equilibrium actions:");
    for (s, a) in actions.iter().enumerate() {
        let agent = &spec.agents[index.agent_of[s]];
        let _ = writeln!(out.text, "  {} ({agent}): {a}", index.labels[s]);
        t.push([index.labels[s].clone(), agent.clone(), num(*a)]);
    }
    out.table("actions.csv", t);
    Ok(out)
}

fn simulate_market(sc: &Scenario, flags: &Flags) -> Outcome<Output> {
    let spec = &sc.spec;
    let y = y_of(spec)?;
    let beta = require(flags.beta, "beta", "simulate-market")?;
    let draw = sc.market.clone().ok_or_else(|| {
        Error::Precondition("missing generating distribution: add a `market` entry to the scenario".into())
    })?;
    let m = Market::new(spec, &y, MarketConfig::new(beta), draw)?;
    let stats = m.simulate_batch(flags.seed, flags.runs);
    let chi = market::geometric_chi_square(&stats.durations, beta, 20, 0.001);

    let mut out = Output::new();
    let _ = writeln!(out.text, "β = {beta}, runs = {}, seed = {}", stats.runs, flags.seed);
    let _ = writeln!(out.text, "trades: {} in {} runs", stats.trades, stats.runs_with_trades);
    let _ = writeln!(
        out.text,
        "mean run price: {} (standard error {})",
        stats.mean_run_price, stats.run_price_se
    );
    let _ = writeln!(out.text, "pooled mean price: {}", stats.pooled_mean);
    let _ = writeln!(out.text, "mean payoff: {}", stats.mean_payoff);
    let _ = writeln!(
        out.text,
        "holding durations vs geometric: chi-square {} on {} df (critical {}, p = {})",
        chi.statistic, chi.df, chi.critical, chi.p_value
    );
    if let Ok(r) = consensus::consensus_expectation(spec, Target::State(&y)) {
        if let Some(c) = r.single() {
            let _ = writeln!(out.text, "consensus expectation: {c}");
        }
    }

    let mut t = Table::new(["buyer", "trades", "mean", "variance", "min", "median", "max"]);
    for (name, c) in spec.agents.iter().zip(&stats.by_class) {
        t.push([
            name.clone(),
            c.trades.to_string(),
            num(c.mean),
            num(c.variance),
            num(c.min),
            num(c.median),
            num(c.max),
        ]);
    }
    out.table("market_summary.csv", t);
    let mut d = Table::new(["duration", "runs"]);
    for (k, v) in &stats.durations {
        d.push([k.to_string(), v.to_string()]);
    }
    out.table("durations.csv", d);

    if flags.out.is_some() {
        let mut e = Table::new(["run", "period", "seller", "buyer", "buyer_signal", "price"]);
        for run in 0..flags.runs {
            for ev in m.simulate(flags.seed, run).events {
                e.push([
                    run.to_string(),
                    ev.period.to_string(),
                    spec.agents[ev.seller].clone(),
                    spec.agents[ev.buyer].clone(),
                    m.index.labels[ev.buyer_signal].clone(),
                    num(ev.price),
                ]);
            }
        }
        out.table("events.csv", e);
    }
    Ok(out)
}

fn verify_optimism(sc: &Scenario, fbar: f64) -> Outcome<Output> {
    let spec = &sc.spec;
    let y = y_of(spec)?;
    let r = optimism::optimism_hypotheses(spec, &y, fbar)?;
    let x1 = interaction::build_f(spec)?.apply(&y)?;
    let x2 = optimism::second_order_expectations(spec, &y)?;
    let index = interaction::SignalIndex::of(spec);

    let mut out = Output::new();
    let _ = writeln!(out.text, "f̄ = {fbar}");
    let _ = writeln!(out.text, "δ = {}", r.delta);
    let _ = writeln!(out.text, "ε = {}", r.epsilon);
    let mut t = Table::new(["signal", "agent", "x1", "x2", "below_fbar"]);
    for s in 0..index.len() {
        t.push([
            index.labels[s].clone(),
            spec.agents[index.agent_of[s]].clone(),
            num(x1[s]),
            num(x2[s]),
            (x1[s] < fbar).to_string(),
        ]);
    }
    out.table("optimism.csv", t);
    match r.bound {
        Some(bound) => {
            let _ = writeln!(out.text, "bound = {bound}");
            let _ = writeln!(out.text, "consensus = {}", r.consensus);
            let _ = writeln!(out.text, "consensus ≥ bound: {}", verdict(r.bound_satisfied));
            out.check(r.bound_satisfied);
            Ok(out)
        }
        None => Err(Error::Precondition(format!(
            "optimism hypotheses fail at f̄ = {fbar}: δ = {}, ε = {} (need δ > 0 and ε ≥ 0 finite)",
            r.delta, r.epsilon
        ))
        .into()),
    }
}

fn verify_tyranny(sc: &Scenario) -> Outcome<Output> {
    let cis = sc.cis.as_ref().ok_or_else(|| {
        Error::Capability("verify-tyranny needs a common-interpretation (`cis`) scenario".into())
    })?;
    let y = y_of(&sc.spec)?;
    let r = tyranny::verify_tyranny(cis, &y)?;
    let mut out = Output::new();
    let ignorant = &cis.agents[tyranny::IGNORANT];
    let _ = writeln!(out.text, "least-informed agent: {ignorant}");
    let _ = writeln!(out.text, "δ = {}, ε = {}", r.delta, r.epsilon);
    let _ = writeln!(out.text, "consensus c = {}", r.consensus);
    let _ = writeln!(out.text, "prior expectation of {ignorant} = {}", r.prior_expectation);
    let _ = writeln!(out.text, "gap = {:e}, bound = {:e}: {}", r.gap, r.rhs, verdict(r.bound_holds));
    let _ = writeln!(out.text, "consensus of the rounded structure = {}", r.hatted_consensus);
    let _ = writeln!(out.text, "B ratio bound: {:e}: {}", r.bij_ratio, verdict(r.bij_holds));
    let _ = writeln!(
        out.text,
        "max mean first-passage time {} ≤ {}: {}",
        r.mmfpt,
        r.mmfpt_bound,
        verdict(r.first_passage_holds)
    );
    let _ = writeln!(out.text, "norm bound {:e}: {}", r.norm_bound, verdict(r.norm_holds));
    let _ = writeln!(
        out.text,
        "perturbation bound {:e} on ‖B − B̂‖ = {:e}",
        r.cho_meyer.bound, r.cho_meyer.norm_diff
    );
    let _ = writeln!(out.text, "overall: {}", verdict(r.passed()));
    out.check(r.passed());

    let mut t = Table::new(["agent", "epsilon", "delta"]);
    for (i, name) in cis.agents.iter().enumerate() {
        t.push([name.clone(), num(r.noise.epsilon[i]), num(r.noise.delta[i])]);
    }
    out.table("tyranny.csv", t);
    Ok(out)
}

fn no_trade(sc: &Scenario) -> Outcome<Output> {
    let b = interaction::build_b(&sc.spec)?;
    let r = trade::no_trade_test(&b.b)?;
    let mut out = Output::new();
    out.text.push_str(&structure_summary(&b));
    let _ = writeln!(out.text, "some type is transient: {}", yes_no(r.has_transient));
    let _ = writeln!(out.text, "optimal total gain: {:e}", r.gain + 0.0);
    let mut t = Table::new(["signal", "x", "gain"]);
    match &r.trade {
        Some(x) => {
            let _ = writeln!(out.text, "verdict: a separable trade exists (largest strict gain {:e})", r.strict_margin);
            let bx = consensus_lab::linalg::mat_vec(&b.b, x);
            for (s, v) in x.iter().enumerate() {
                t.push([b.index.labels[s].clone(), num(*v), num(bx[s] - v)]);
            }
        }
        None => {
            let _ = writeln!(out.text, "verdict: no separable trade");
        }
    }
    out.table("trade.csv", t);
    Ok(out)
}

fn report(sc: &Scenario, flags: &Flags) -> Outcome<Output> {
    let mut out = Output::new();
    out.append("scenario", validate(sc));
    out.append("interaction structure", build(sc)?);
    let has_y = sc.spec.y.is_some();
    if has_y {
        out.append("consensus", consensus_cmd(sc)?);
    }
    let skipped = |out: &mut Output, heading: &str, e: Failure| {
        let msg = match e {
            Failure::Usage(m) => m,
            Failure::Lib(e) => e.to_string(),
        };
        let _ = writeln!(out.text, "== {heading} ==\nnot applicable: {msg}\n");
    };
    if has_y && (flags.beta.is_some() || flags.beta_per_agent.is_some()) {
        match game_solve(sc, flags) {
            Ok(o) => out.append("game", o),
            Err(e) => skipped(&mut out, "game", e),
        }
    }
    if has_y && flags.beta.is_some() && sc.market.is_some() {
        match simulate_market(sc, flags) {
            Ok(o) => out.append("market", o),
            Err(e) => skipped(&mut out, "market", e),
        }
    }
    if let (true, Some(fbar)) = (has_y, flags.fbar) {
        match verify_optimism(sc, fbar) {
            Ok(o) => out.append("optimism", o),
            Err(e) => skipped(&mut out, "optimism", e),
        }
    }
    if sc.cis.is_some() && has_y {
        match verify_tyranny(sc) {
            Ok(o) => out.append("least-informed bound", o),
            Err(e) => skipped(&mut out, "least-informed bound", e),
        }
    }
    out.append("no trade", no_trade(sc)?);
    Ok(out)
}
