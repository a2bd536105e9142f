use proptest::prelude::*;

use statechan::sim::{check_invariants, ideal_outcome, run_scenario, sweep_cases, IdealOutcome, Protocol, RunOptions, Scenario, Settlement};

fn protocol() -> impl Strategy<Value = Protocol> {
    prop_oneof![Just(Protocol::Msfe), Just(Protocol::Mscd), Just(Protocol::Duplex)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Any grid case under any seed keeps every invariant.
    #[test]
    fn invariants_hold_for_any_seed(protocol in protocol(), n in 2usize..=3, pick in any::<prop::sample::Index>(), seed in any::<u64>()) {
        let n = if protocol == Protocol::Duplex { 2 } else { n };
        let cases = sweep_cases(protocol, n, 2, seed);
        let case = &cases[pick.index(cases.len())];
        let t = run_scenario(&case.scenario, &RunOptions::default()).unwrap();
        let report = check_invariants(&t);
        prop_assert!(report.passed(), "{}: {:?}", case.name, report.violations);
        if let ideal @ IdealOutcome::Mapped { .. } = ideal_outcome(&case.scenario) {
            prop_assert!(ideal.matches(&t).is_ok(), "{}: {:?}", case.name, ideal.matches(&t));
        }
    }

    /// Duplex channels conserve coins and settle on the last agreed balance.
    #[test]
    fn duplex_payments_conserve(
        deposits in (1u64..500, 1u64..500),
        payments in prop::collection::vec((1u32..=2, 1u64..200), 0..25),
        seed in any::<u64>(),
    ) {
        let list: Vec<_> = payments.iter().map(|&(payer, amount)| serde_json::json!({"payer": payer, "amount": amount})).collect();
        let s = Scenario::from_json(&serde_json::json!({
            "format_version": 1, "protocol": "duplex", "n": 2, "seed": seed,
            "plan": {"duplex": {"deposits": [deposits.0, deposits.1], "payments": {"list": list}}}
        }).to_string()).unwrap();
        let t = run_scenario(&s, &RunOptions::default()).unwrap();
        prop_assert!(check_invariants(&t).passed());
        prop_assert_eq!(t.settlement, Settlement::FinalSplit);
        prop_assert_eq!(t.delta(1) + t.delta(2), 0);
        prop_assert_eq!(t.final_escrow, 0);
    }
}
