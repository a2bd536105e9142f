//! Human-readable settlement report.

use std::fmt::Write;

use statechan::sim::{Report, Settlement, Trace};

/// Coins each party moved in and out of the contract.
struct Flows {
    deposits: Vec<u64>,
    payouts: Vec<u64>,
}

fn flows(t: &Trace) -> Flows {
    let mut f = Flows {
        deposits: vec![0; t.n],
        payouts: vec![0; t.n],
    };
    for (&p, &amount) in &t.funding {
        f.deposits[p as usize - 1] += amount;
    }
    for tick in &t.ticks {
        for a in tick.actions.iter().filter(|a| a.accepted) {
            f.deposits[a.party as usize - 1] += a.absorbed;
            f.payouts[a.party as usize - 1] += a.payout;
        }
        for r in &tick.refunds {
            f.payouts[r.party as usize - 1] += r.amount;
        }
    }
    f
}

fn flags(t: &Trace, p: u32) -> String {
    let mut out = Vec::new();
    if t.corrupt.contains(&p) {
        out.push("corrupt");
    }
    if t.deviating.contains(&p) {
        out.push("deviated");
    }
    if t.aborter == Some(p) {
        out.push("aborter");
    }
    if t.settlement == Settlement::Abort {
        out.push(if t.deviating.contains(&p) { "penalised" } else { "compensated" });
    }
    if out.is_empty() {
        "-".into()
    } else {
        out.join(",")
    }
}

pub fn render(t: &Trace, report: &Report) -> String {
    let f = flows(t);
    let mut s = String::new();
    let name = if t.scenario.is_empty() { "(unnamed)" } else { &t.scenario };
    let _ = writeln!(s, "scenario {name}: {:?} n={} q={} seed={}", t.protocol, t.n, t.q, t.seed);
    let _ = writeln!(s, "outcome {:?}, settlement {:?}, final tick {}", t.outcome, t.settlement, t.final_tick);
    let _ = writeln!(
        s,
        "{:<6} {:>12} {:>12} {:>12} {:>12} {:>10}  flags",
        "party", "initial", "deposits", "payouts", "final", "delta"
    );
    for p in 1..=t.n as u32 {
        let k = p as usize - 1;
        let _ = writeln!(
            s,
            "P{:<5} {:>12} {:>12} {:>12} {:>12} {:>+10}  {}",
            p,
            t.initial_wallets[k],
            f.deposits[k],
            f.payouts[k],
            t.final_wallets[k],
            t.delta(p),
            flags(t, p)
        );
    }
    let (dep, pay): (u64, u64) = (f.deposits.iter().sum(), f.payouts.iter().sum());
    let balanced = dep == pay + t.final_escrow;
    let _ = writeln!(
        s,
        "conservation: deposits {dep} = payouts {pay} + escrow {}: {}",
        t.final_escrow,
        if balanced { "ok" } else { "MISMATCH" }
    );
    for (check, ok) in report.summary() {
        let _ = writeln!(s, "check {check}: {}", if ok { "ok" } else { "FAIL" });
    }
    let _ = writeln!(s, "{}", if report.passed() { "all checks pass" } else { "invariant violated" });
    s
}
