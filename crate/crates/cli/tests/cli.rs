use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

const X: &str = "1f3c5a7e9b2d4f6081a3c5e7092b4d6f8091a2b3c4d5e6f708192a3b4c5d6e7f";
const H: &str = "03d8250b8ad60806e0b30603bbd558b414d064b0e56971e9e7b6d6e287ebc05014";

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_statechan"));
    c.env_remove("STATECHAN_SEED");
    c
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/scenarios").join(format!("{name}.json"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn lottery_summary_shows_conservation() {
    let o = run(&["run", "--scenario", scenario("lottery_honest").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("conservation: deposits 22 = payouts 22 + escrow 0: ok"), "{}", stdout(&o));
}

#[test]
fn withheld_share_pays_q_to_each_honest_party() {
    let o = run(&["run", "--scenario", scenario("msfe_withhold_share").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    for p in ["P1", "P2"] {
        let line = out.lines().find(|l| l.starts_with(p)).unwrap();
        assert!(line.contains("+6") && line.contains("compensated"), "{line}");
    }
    assert!(out.lines().find(|l| l.starts_with("P3")).unwrap().contains("penalised"));
}

#[test]
fn malformed_scenario_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"format_version": 1, "protocol": "msfe", "n": 3"#).unwrap();
    assert_eq!(run(&["run", "--scenario", path.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(run(&["run", "--scenario", "/nonexistent.json"]).status.code(), Some(1));
    assert_eq!(run(&["run"]).status.code(), Some(1));
}

#[test]
fn injected_fault_exits_with_violation() {
    let o = run(&["run", "--scenario", scenario("msfe_honest").to_str().unwrap(), "--inject-fault"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn json_trace_rechecks_after_reload() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trace.json");
    let o = run(&[
        "run",
        "--scenario",
        scenario("lottery_aborted").to_str().unwrap(),
        "--format",
        "json",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let trace = statechan::sim::Trace::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(statechan::sim::check_invariants(&trace).passed());
    assert_eq!(run(&["check", "--trace", out.to_str().unwrap()]).status.code(), Some(0));
}

#[test]
fn same_seed_gives_identical_json() {
    let path = scenario("duplex_stale_attack");
    let a = run(&["run", "--scenario", path.to_str().unwrap(), "--format", "json"]);
    let b = run(&["run", "--scenario", path.to_str().unwrap(), "--format", "json"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn seed_falls_back_to_environment() {
    let path = scenario("lottery_honest");
    let json = |seed: Option<&str>| {
        let mut c = bin();
        c.args(["run", "--scenario", path.to_str().unwrap(), "--format", "json"]);
        if let Some(s) = seed {
            c.env("STATECHAN_SEED", s);
        }
        let t = statechan::sim::Trace::from_json(&stdout(&c.output().unwrap())).unwrap();
        t.seed
    };
    assert_eq!(json(None), 130);
    assert_eq!(json(Some("77")), 77);
}

#[test]
fn sweep_passes_and_mutation_fails() {
    let o = run(&["sweep", "--protocol", "msfe", "--n", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("0 failed"));
    let o = run(&["sweep", "--protocol", "duplex", "--n", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["sweep", "--protocol", "mscd", "--n", "2", "--inject-fault"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("first failure: Mscd n=2"), "{}", stdout(&o));
}

#[test]
fn nizk_prove_pipes_into_verify() {
    let public = stdout(&run(&["nizk", "public", "--x", X, "--h", H]));
    let (px, py) = public.trim().split_once(' ').unwrap();
    let proof = stdout(&run(&["nizk", "prove", "--x", X, "--h", H, "--seed", "5"]));
    let mut verify = bin()
        .args(["nizk", "verify", "--h", H, "--public-x", px, "--public-y", py])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    verify.stdin.take().unwrap().write_all(proof.as_bytes()).unwrap();
    let o = verify.wait_with_output().unwrap();
    assert_eq!(stdout(&o).trim(), "1");

    // flip one bit of s
    let mut parts: Vec<String> = proof.split_whitespace().map(str::to_owned).collect();
    let last = parts[2].pop().unwrap();
    parts[2].push(if last == '0' { '1' } else { '0' });
    let mut args = vec!["nizk", "verify", "--h", H, "--public-x", px, "--public-y", py];
    args.extend(parts.iter().map(String::as_str));
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "0");
}

#[test]
fn nizk_golden_proof() {
    let k = "2468ace02468ace02468ace02468ace02468ace02468ace02468ace02468ace0";
    let o = run(&["nizk", "prove", "--x", X, "--h", H, "--k", k]);
    assert_eq!(
        stdout(&o).trim(),
        "02188fe8b9149fe9113a13ee52320063101450758c7dd2a8f5ea4e1a3b89e0183c \
         02fce6220f76249d5e88248d39f8312ec064d10edc2a7d786d2b40752e8375d914 \
         bc86606068e9dfbd82597db1429f46948a1e5d05754b966939c0b4d963cd18c1"
    );
}

#[test]
fn nizk_bad_hex_is_a_usage_error() {
    assert_eq!(run(&["nizk", "prove", "--x", "xyz", "--h", H]).status.code(), Some(1));
    assert_eq!(run(&["nizk", "public", "--x", X, "--h", "02ff"]).status.code(), Some(1));
}
