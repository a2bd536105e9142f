use std::path::PathBuf;

use statechan::sim::{check_invariants, ideal_outcome, run_scenario, IdealOutcome, Outcome, RunOptions, Scenario, Settlement, Trace};

fn load(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.json"));
    Scenario::from_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn run(name: &str) -> Trace {
    let s = load(name);
    let t = run_scenario(&s, &RunOptions::default()).unwrap();
    let report = check_invariants(&t);
    assert!(report.passed(), "{name}: {:?}", report.violations);
    if let ideal @ IdealOutcome::Mapped { .. } = ideal_outcome(&s) {
        ideal.matches(&t).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    t
}

fn deltas(t: &Trace) -> Vec<i64> {
    (1..=t.n as u32).map(|p| t.delta(p)).collect()
}

#[test]
fn honest_msfe_pays_back_every_deposit() {
    let t = run("msfe_honest");
    assert_eq!(t.settlement, Settlement::Payout);
    assert_eq!(deltas(&t), vec![0, 0, 0]);
    assert_eq!(t.accepted_triggers(), 4);
    assert!(t.outputs.values().all(|o| o.len() == 5));
}

#[test]
fn fair_exchange_swaps_inputs() {
    let t = run("fair_exchange");
    assert_eq!(t.settlement, Settlement::Payout);
    assert_eq!(t.outputs[&1], t.outputs[&2]);
}

#[test]
fn withheld_share_compensates_each_honest_party() {
    let t = run("msfe_withhold_share");
    assert_eq!(t.settlement, Settlement::Abort);
    assert_eq!(deltas(&t), vec![6, 6, -12]);
    assert_eq!(t.outputs[&1].len(), 1);
}

#[test]
fn early_aborts_refund_and_late_abort_penalises() {
    for name in ["msfe_abort_step1", "msfe_abort_step2"] {
        let t = run(name);
        assert!(deltas(&t).iter().all(|&d| d == 0), "{name}");
    }
    let t = run("msfe_abort_step3");
    assert_eq!(t.settlement, Settlement::Abort);
    assert_eq!(deltas(&t), vec![6, -12, 6]);
}

#[test]
fn withheld_signature_is_opened_on_chain() {
    let t = run("msfe_open_next_on_chain");
    assert!(t.actions().any(|a| a.accepted && a.dispute));
    assert!(t.honest().all(|h| t.delta(h) >= 0));
}

#[test]
fn stale_replay_is_overruled() {
    let t = run("msfe_replay_stale");
    assert!(t.honest().all(|h| t.delta(h) >= 0));
    assert_eq!(t.outcome, Outcome::Terminated);
}

#[test]
fn silent_party_gets_everyone_refunded() {
    let t = run("msfe_silent_refund");
    assert_eq!(t.settlement, Settlement::Refund);
    assert!(t.honest().all(|h| t.delta(h) == 0));
}

#[test]
fn lottery_runs_every_execution() {
    let t = run("lottery_honest");
    assert_eq!(t.settlement, Settlement::Payout);
    assert_eq!(t.outputs[&1].len(), 10);
    assert_eq!(deltas(&t).iter().sum::<i64>(), 0);
}

#[test]
fn lottery_abort_names_the_aborter() {
    let t = run("lottery_aborted");
    assert_eq!(t.settlement, Settlement::Abort);
    assert_eq!(t.aborter, Some(2));
    assert_eq!(deltas(&t), vec![3, -6, 3]);
    let t = run("lottery_params_withheld");
    assert_eq!(t.aborter, Some(3));
}

#[test]
fn duplex_settles_on_latest_state() {
    let t = run("duplex_payments");
    assert_eq!(t.settlement, Settlement::FinalSplit);
    // net after the list is 30 - 5 + 20 - 40 + 1 = 6 in favour of party 2
    assert_eq!(deltas(&t), vec![-6, 6]);
    let t = run("duplex_stale_attack");
    assert_eq!(t.settlement, Settlement::FinalSplit);
}

#[test]
fn saved_traces_recheck_clean() {
    let t = run("lottery_aborted");
    let back = Trace::from_json(&t.to_json()).unwrap();
    assert_eq!(back, t);
    assert!(check_invariants(&back).passed());
}

#[test]
fn bundled_scenarios_round_trip() {
    for name in ["msfe_honest", "lottery_honest", "duplex_payments"] {
        let s = load(name);
        assert_eq!(Scenario::from_json(&s.to_json()).unwrap(), s);
    }
}
