//! Systematic sweep over deviation strategies and abort points.

use std::collections::BTreeSet;

use crate::msfe::{lcm_upto, SfeFunction};
use crate::types::PartyId;

use super::ideal::{ideal_outcome, IdealOutcome};
use super::invariants::check_invariants;
use super::runner::{run_scenario, RunOptions, SimError};
use super::scenario::{Payments, Plan, Protocol, Scenario, Strategy, TopUp, FORMAT_VERSION};

#[derive(Clone, Debug)]
pub struct SweepCase {
    pub name: String,
    pub scenario: Scenario,
}

#[derive(Clone, Debug)]
pub struct CaseResult {
    pub name: String,
    /// Invariant violations, rendered.
    pub violations: Vec<String>,
    /// `None` when the case has no ideal counterpart.
    pub ideal: Option<Result<(), String>>,
}

impl CaseResult {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && !matches!(self.ideal, Some(Err(_)))
    }
}

#[derive(Clone, Debug, Default)]
pub struct SweepSummary {
    pub results: Vec<CaseResult>,
}

impl SweepSummary {
    pub fn cases(&self) -> usize {
        self.results.len()
    }

    pub fn failures(&self) -> impl Iterator<Item = &CaseResult> {
        self.results.iter().filter(|r| !r.passed())
    }

    pub fn passed(&self) -> bool {
        self.failures().next().is_none()
    }

    pub fn ideal_checked(&self) -> usize {
        self.results.iter().filter(|r| r.ideal.is_some()).count()
    }
}

fn base(protocol: Protocol, n: usize, executions: u32, seed: u64) -> Scenario {
    let (q, plan) = match protocol {
        Protocol::Msfe => (
            lcm_upto(n),
            Plan::Msfe {
                function: SfeFunction::Xor { width: 8 },
                executions,
            },
        ),
        Protocol::Mscd => (
            n as u64 - 1,
            Plan::Mscd {
                executions,
                stages: 1,
                topups: (1..=n as u32)
                    .map(|party| TopUp {
                        before_exec: 1,
                        party,
                        amount: executions as u64 + 1,
                    })
                    .collect(),
            },
        ),
        Protocol::Duplex => (
            0,
            Plan::Duplex {
                deposits: [50, 50],
                payments: Payments::Random {
                    count: executions.max(1) * 5,
                    max_amount: 20,
                },
                topups: Vec::new(),
                withdrawals: Vec::new(),
            },
        ),
    };
    Scenario {
        format_version: FORMAT_VERSION,
        name: String::new(),
        protocol,
        n,
        q,
        window: 3,
        offchain_window: 1,
        duplex_window: 4,
        aggregate_signatures: false,
        seed,
        max_ticks: 2000,
        initial_wallet: 1000,
        corrupt: BTreeSet::new(),
        strategies: Default::default(),
        plan,
    }
}

/// Every single-deviator strategy for `p`.
fn strategies_for(protocol: Protocol, n: usize, p: PartyId, executions: u32, payments: u32) -> Vec<Strategy> {
    let mut out = vec![Strategy::SilentForever];
    if protocol == Protocol::Duplex {
        out.extend((0..=payments as i64).map(|round| Strategy::StaleDuplexSubmit { round }));
        return out;
    }
    for exec in 1..=executions {
        let max_step = match protocol {
            Protocol::Msfe => 3,
            _ => 2 + 2 * n as u32,
        };
        for step in 1..=max_step {
            let own_turn = step <= 2 || protocol == Protocol::Msfe || (step - 3) % n as u32 == p.0 - 1;
            if own_turn {
                out.push(Strategy::AbortAtStep { exec, step });
            }
        }
        out.push(Strategy::WithholdShare { exec });
        out.push(Strategy::WithholdSignature { exec });
        out.push(Strategy::PrematureExit { exec });
    }
    out.extend((1..executions).map(|old| Strategy::ReplayStale { old }));
    out
}

fn label(s: &Strategy) -> String {
    serde_json::to_string(s).expect("strategies serialise")
}

/// The grid: an honest baseline, every strategy for every single corrupt party
/// and, for three or more parties, coalitions of all but one party sharing one
/// strategy. Duplex channels only exist for two parties.
pub fn sweep_cases(protocol: Protocol, n: usize, executions: u32, seed: u64) -> Vec<SweepCase> {
    if protocol == Protocol::Duplex && n != 2 {
        return Vec::new();
    }
    let template = base(protocol, n, executions, seed);
    let payments = match &template.plan {
        Plan::Duplex {
            payments: Payments::Random { count, .. },
            ..
        } => *count,
        _ => 0,
    };
    let mut cases = vec![SweepCase {
        name: format!("{protocol:?} n={n} honest"),
        scenario: template.clone(),
    }];
    for p in PartyId::all(n) {
        for st in strategies_for(protocol, n, p, executions, payments) {
            let mut s = template.clone();
            s.corrupt.insert(p.0);
            s.strategies.insert(p.0, st.clone());
            cases.push(SweepCase {
                name: format!("{protocol:?} n={n} P{} {}", p.0, label(&st)),
                scenario: s,
            });
        }
    }
    if n >= 3 && protocol == Protocol::Msfe {
        for exec in 1..=executions {
            for st in [
                Strategy::AbortAtStep { exec, step: 1 },
                Strategy::AbortAtStep { exec, step: 2 },
                Strategy::WithholdShare { exec },
                Strategy::PrematureExit { exec },
            ] {
                for honest in PartyId::all(n) {
                    let mut s = template.clone();
                    for p in PartyId::all(n).filter(|&p| p != honest) {
                        s.corrupt.insert(p.0);
                        s.strategies.insert(p.0, st.clone());
                    }
                    cases.push(SweepCase {
                        name: format!("{protocol:?} n={n} all but P{} {}", honest.0, label(&st)),
                        scenario: s,
                    });
                }
            }
        }
    }
    if n >= 3 && protocol == Protocol::Mscd {
        for exec in 1..=executions {
            for honest in PartyId::all(n) {
                let mut s = template.clone();
                for p in PartyId::all(n).filter(|&p| p != honest) {
                    s.corrupt.insert(p.0);
                    s.strategies.insert(p.0, Strategy::WithholdShare { exec });
                }
                cases.push(SweepCase {
                    name: format!("{protocol:?} n={n} all but P{} withhold_share {exec}", honest.0),
                    scenario: s,
                });
            }
        }
    }
    cases
}

/// Runs one case, checks its invariants and, if asked, ideal equivalence.
pub fn run_case(case: &SweepCase, check_ideal: bool) -> Result<CaseResult, SimError> {
    let trace = run_scenario(&case.scenario, &RunOptions::default())?;
    let report = check_invariants(&trace);
    let ideal = if check_ideal {
        match ideal_outcome(&case.scenario) {
            IdealOutcome::Unmappable(_) => None,
            mapped => Some(mapped.matches(&trace)),
        }
    } else {
        None
    };
    Ok(CaseResult {
        name: case.name.clone(),
        violations: report.violations.iter().map(|v| v.to_string()).collect(),
        ideal,
    })
}

/// Sweeps `protocol` for each `n`, checking ideal equivalence for `n` in `ideal_ns`.
pub fn sweep(protocol: Protocol, ns: &[usize], ideal_ns: &[usize], executions: u32, seed: u64) -> Result<SweepSummary, SimError> {
    let mut summary = SweepSummary::default();
    for &n in ns {
        for case in sweep_cases(protocol, n, executions, seed) {
            summary.results.push(run_case(&case, ideal_ns.contains(&n))?);
        }
    }
    Ok(summary)
}
