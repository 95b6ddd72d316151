use std::path::PathBuf;

use consensus_lab_cli::{run, EXIT_CHECK_FAILED, EXIT_INVALID, EXIT_OK, EXIT_PRECONDITION, EXIT_USAGE};

fn fixture(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "fixtures", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn invoke(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("consensus-lab").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write_temp(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn validate_accepts_the_cycle_fixture() {
    let (code, out, _) = invoke(&["validate", &fixture("certainty_cycle.json")]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("3 states, 3 agents, 9 signals"));
}

#[test]
fn consensus_reports_the_common_prior_decomposition() {
    let (code, out, _) = invoke(&["consensus", &fixture("common_prior.json")]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("consensus expectation c = 0.5"));
    assert!(out.contains("centralities e:"));
    assert!(out.contains("lambda"));
    assert!(out.contains("decomposition:") && out.contains("PASS"));
}

#[test]
fn optimism_bound_on_the_first_example() {
    let (code, out, _) = invoke(&["verify-optimism", &fixture("optimism_case_one.json"), "--fbar", "1.0"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("bound = 1\n"));
    assert!(out.contains("consensus = 1\n"));
    assert!(out.contains("PASS"));
}

#[test]
fn tyranny_check_passes_on_the_extreme_fixture() {
    let (code, out, _) = invoke(&["verify-tyranny", &fixture("tyranny_extreme.json")]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("overall: PASS"));
}

#[test]
fn tyranny_on_a_model_scenario_is_a_precondition_failure() {
    let (code, _, err) = invoke(&["verify-tyranny", &fixture("certainty_cycle.json")]);
    assert_eq!(code, EXIT_PRECONDITION);
    assert!(err.contains("cis"));
}

#[test]
fn no_trade_verdicts() {
    let (code, out, _) = invoke(&["no-trade", &fixture("counterexample.json")]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("jointly connected: no"));
    assert!(out.contains("verdict: no separable trade"));
    let (_, out, _) = invoke(&["no-trade", &fixture("optimism_case_one.json")]);
    assert!(out.contains("verdict: a separable trade exists"));
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(invoke(&["frobnicate"]).0, EXIT_USAGE);
    assert_eq!(invoke(&["validate", &fixture("certainty_cycle.json"), "--bogus"]).0, EXIT_USAGE);
    assert_eq!(invoke(&["game-solve", &fixture("certainty_cycle.json")]).0, EXIT_USAGE);
    assert_eq!(invoke(&["verify-optimism", &fixture("certainty_cycle.json")]).0, EXIT_USAGE);
    assert_eq!(invoke(&["--help"]).0, EXIT_OK);
}

#[test]
fn malformed_and_invalid_scenarios_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_temp(&dir, "bad.json", "{\"kind\": \"model\",\n \"states\": [}");
    let (code, _, err) = invoke(&["validate", &bad]);
    assert_eq!(code, EXIT_INVALID);
    assert!(err.contains("line 2"));

    let text = std::fs::read_to_string(fixture("certainty_cycle.json")).unwrap();
    // break row-stochasticity of the network
    let broken = text.replacen("1.0", "0.7", 1);
    assert_ne!(broken, text);
    let path = write_temp(&dir, "broken.json", &broken);
    let (code, _, err) = invoke(&["validate", &path]);
    assert_eq!(code, EXIT_INVALID, "{err}");

    assert_eq!(invoke(&["validate", "/nonexistent/scenario.json"]).0, EXIT_INVALID);
}

#[test]
fn market_without_a_generating_distribution_exits_3() {
    let (code, _, err) = invoke(&["simulate-market", &fixture("certainty_cycle.json"), "--beta", "0.9"]);
    assert_eq!(code, EXIT_PRECONDITION);
    assert!(err.contains("generating distribution"));
}

#[test]
fn failed_optimism_hypotheses_exit_3() {
    let (code, _, _) = invoke(&["verify-optimism", &fixture("counterexample.json"), "--fbar", "1.0"]);
    assert_eq!(code, EXIT_PRECONDITION);
}

#[test]
fn game_bad_beta_exits_3() {
    let (code, _, _) = invoke(&["game-solve", &fixture("certainty_cycle.json"), "--beta", "1.0"]);
    assert_eq!(code, EXIT_PRECONDITION);
}

#[test]
fn heterogeneous_game_matches_direct_solve() {
    let (code, out, _) = invoke(&["game-solve", &fixture("certainty_cycle.json"), "--beta-per-agent", "0.5,0.7,0.9"]);
    assert_eq!(code, EXIT_OK);
    let gap: f64 = out
        .split("gap to direct solve ")
        .nth(1)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(gap < 1e-12);
}

#[test]
fn market_output_is_reproducible() {
    let args = ["simulate-market", &fixture("common_prior.json"), "--beta", "0.8", "--runs", "300", "--seed", "7"];
    let (code, first, _) = invoke(&args);
    assert_eq!(code, EXIT_OK);
    let (_, second, _) = invoke(&args);
    assert_eq!(first, second);
    let mut csv = args.to_vec();
    csv.extend(["--format", "csv"]);
    let (_, a, _) = invoke(&csv);
    let (_, b, _) = invoke(&csv);
    assert_eq!(a, b);
    assert!(a.starts_with("buyer,trades,mean"));
}

#[test]
fn out_directory_receives_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let out_s = out.to_string_lossy().into_owned();
    let args = [
        "simulate-market",
        &fixture("common_prior.json"),
        "--beta",
        "0.5",
        "--runs",
        "50",
        "--out",
        &out_s,
    ];
    assert_eq!(invoke(&args).0, EXIT_OK);
    for f in ["market_summary.csv", "durations.csv", "events.csv", "report.txt"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let events = std::fs::read_to_string(out.join("events.csv")).unwrap();
    assert!(events.starts_with("run,period,seller,buyer,buyer_signal,price\n"));

    let build_dir = dir.path().join("build");
    let b = build_dir.to_string_lossy().into_owned();
    assert_eq!(invoke(&["build", &fixture("certainty_cycle.json"), "--out", &b]).0, EXIT_OK);
    let bcsv = std::fs::read_to_string(build_dir.join("B.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(bcsv.as_bytes());
    assert_eq!(rdr.headers().unwrap(), vec!["row", "column", "value"]);
    let mut sums = std::collections::BTreeMap::<String, f64>::new();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        *sums.entry(rec[0].to_string()).or_default() += rec[2].parse::<f64>().unwrap();
    }
    assert_eq!(sums.len(), 9);
    assert!(sums.values().all(|s| (s - 1.0).abs() < 1e-12));
}

#[test]
fn report_succeeds_on_every_fixture() {
    let dir: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "fixtures"].iter().collect();
    let mut names: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    names.sort();
    assert!(names.len() >= 7);
    for p in names {
        let p = p.to_string_lossy().into_owned();
        let (code, out, err) = invoke(&["report", &p, "--beta", "0.9", "--fbar", "1.0", "--runs", "100"]);
        assert!(code == EXIT_OK || code == EXIT_CHECK_FAILED, "{p}: {code} {err}");
        assert_eq!(code, EXIT_OK, "{p}: {out}");
        assert!(out.contains("== no trade =="));
    }
}
