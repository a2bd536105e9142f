//! Trace checker. Works from the trace alone, so saved traces can be re-checked.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::scenario::Protocol;
use super::trace::{Outcome, Settlement, Trace};

pub const CHECKS: [&str; 9] = [
    "wallet_replay",
    "escrow_replay",
    "conservation",
    "exact_drain",
    "honest_no_loss",
    "compensation",
    "single_aborter",
    "turn_soundness",
    "final_split",
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub check: String,
    pub tick: u64,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] tick {}: {}", self.check, self.tick, self.detail)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub violations: Vec<Violation>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn failed(&self, check: &str) -> bool {
        self.violations.iter().any(|v| v.check == check)
    }

    /// Pass/fail per named check.
    pub fn summary(&self) -> BTreeMap<&'static str, bool> {
        CHECKS.iter().map(|&c| (c, !self.failed(c))).collect()
    }

    fn fail(&mut self, check: &str, tick: u64, detail: impl Into<String>) {
        self.violations.push(Violation {
            check: check.to_owned(),
            tick,
            detail: detail.into(),
        });
    }
}

/// Replays the trace's coin movements and checks the settlement guarantees.
pub fn check_invariants(t: &Trace) -> Report {
    let mut r = Report::default();
    let n = t.n;
    if t.initial_wallets.len() != n || t.final_wallets.len() != n {
        r.fail("wallet_replay", 0, "wallet vectors do not match the party count");
        return r;
    }
    let total: i128 = t.initial_wallets.iter().map(|&w| w as i128).sum();
    let mut wallets: Vec<i128> = t.initial_wallets.iter().map(|&w| w as i128).collect();
    let mut escrow: i128 = 0;
    for (&p, &amount) in &t.funding {
        wallets[p as usize - 1] -= amount as i128;
        escrow += amount as i128;
    }

    for tick in &t.ticks {
        for a in tick.actions.iter().filter(|a| a.accepted) {
            let k = a.party as usize - 1;
            wallets[k] -= a.absorbed as i128;
            escrow += a.absorbed as i128;
            if a.payout as i128 > escrow {
                r.fail(
                    "conservation",
                    tick.tick,
                    format!("payout {} to party {} exceeds escrow {}", a.payout, a.party, escrow),
                );
            }
            escrow -= a.payout as i128;
            wallets[k] += a.payout as i128;
            if let Some(after) = a.escrow_after {
                if after as i128 != escrow {
                    r.fail(
                        "escrow_replay",
                        tick.tick,
                        format!("action {} leaves escrow {after}, replay gives {escrow}", a.seq),
                    );
                }
            }
        }
        for refund in &tick.refunds {
            wallets[refund.party as usize - 1] += refund.amount as i128;
            escrow -= refund.amount as i128;
        }
        let recorded: Vec<i128> = tick.wallets.iter().map(|&w| w as i128).collect();
        if recorded != wallets {
            r.fail("wallet_replay", tick.tick, format!("recorded {:?}, replay gives {:?}", tick.wallets, wallets));
            wallets = recorded;
        }
        if tick.escrow as i128 != escrow {
            r.fail("escrow_replay", tick.tick, format!("recorded {}, replay gives {escrow}", tick.escrow));
            escrow = tick.escrow as i128;
        }
        if wallets.iter().sum::<i128>() + escrow != total {
            r.fail("conservation", tick.tick, "wallets plus escrow differ from the initial total");
        }
    }
    let finals: Vec<i128> = t.final_wallets.iter().map(|&w| w as i128).collect();
    if finals != wallets {
        r.fail("wallet_replay", t.final_tick, "final wallets differ from the replay");
    }
    if t.final_escrow as i128 != escrow {
        r.fail("escrow_replay", t.final_tick, "final escrow differs from the replay");
    }

    match t.outcome {
        Outcome::Terminated | Outcome::Refunded => {
            if t.final_escrow != 0 {
                r.fail("exact_drain", t.final_tick, format!("{} coins left in escrow", t.final_escrow));
            }
            let settled_mode = matches!(t.final_mode.as_deref(), None | Some("inactive"));
            if t.outcome == Outcome::Terminated && t.protocol != Protocol::Duplex && !settled_mode {
                r.fail("exact_drain", t.final_tick, format!("terminated in mode {:?}", t.final_mode));
            }
        }
        Outcome::BudgetExhausted => r.fail("exact_drain", t.final_tick, "tick budget exhausted before settlement"),
    }

    let entitled = |p: u32| t.expected.get(&p).map_or(0, |e| e.entitled_delta);
    for h in t.honest() {
        if t.delta(h) < entitled(h) {
            r.fail(
                "honest_no_loss",
                t.final_tick,
                format!("party {h} ends at {:+}, entitled to {:+}", t.delta(h), entitled(h)),
            );
        }
    }

    if t.settlement == Settlement::Abort {
        // A coalition splits its forfeited deposits over fewer honest parties.
        let exact = t.protocol == Protocol::Mscd || t.deviating.len() <= 1;
        for h in t.honest() {
            let want = t.q as i64 + entitled(h);
            let got = t.delta(h);
            if (exact && got != want) || got < want {
                r.fail("compensation", t.final_tick, format!("party {h} got {got:+}, compensation is {want:+}"));
            }
        }
        if t.protocol == Protocol::Mscd {
            match t.aborter {
                Some(a) if t.deviating.contains(&a) => {}
                other => r.fail("single_aborter", t.final_tick, format!("aborter {other:?} is not a deviating party")),
            }
        }
    }

    if t.protocol == Protocol::Mscd {
        for tick in &t.ticks {
            for a in tick.actions.iter().filter(|a| a.accepted && a.kind == "message") {
                let Some(round) = a.round else {
                    r.fail("turn_soundness", tick.tick, "message without a round");
                    continue;
                };
                let turn = 1 + (round.saturating_sub(1) as usize % n) as u32;
                if a.party != turn {
                    r.fail(
                        "turn_soundness",
                        tick.tick,
                        format!("party {} sent round {round}, party {turn}'s turn", a.party),
                    );
                }
            }
        }
    }

    if t.protocol == Protocol::Duplex && t.settlement == Settlement::FinalSplit {
        for p in 1..=n as u32 {
            if t.delta(p) != entitled(p) {
                r.fail(
                    "final_split",
                    t.final_tick,
                    format!("party {p} ends at {:+}, latest state gives {:+}", t.delta(p), entitled(p)),
                );
            }
        }
    }
    r
}
