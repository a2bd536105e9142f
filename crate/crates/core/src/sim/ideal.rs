//! What the ideal functionality hands honest parties for a scenario.
//!
//! The ideal world is computed without any cryptography or ledger: outputs come
//! straight from the function (or the lottery rule), and an abort maps to either
//! "stop" (nobody pays) or "penalty" (the deviators' deposits go to the honest
//! parties). A real run is ideal-equivalent when every honest party ends with the
//! same coins and the same outputs.

use std::collections::BTreeMap;

use crate::games::lottery::lottery_stage;
use crate::mscd::stage_input;
use crate::types::{CoinAmount, PartyId};

use super::scenario::{msfe_input, party_seed, Plan, Protocol, Scenario, Strategy};
use super::trace::{Settlement, Trace};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum IdealOutcome {
    Mapped {
        settlement: Settlement,
        /// Wallet change of each honest party.
        deltas: BTreeMap<u32, i64>,
        /// Outputs of each honest party, by execution.
        outputs: BTreeMap<u32, BTreeMap<u32, String>>,
    },
    /// The scenario has no ideal counterpart in this model.
    Unmappable(String),
}

impl IdealOutcome {
    /// Compares a real trace against this outcome.
    pub fn matches(&self, t: &Trace) -> Result<(), String> {
        let IdealOutcome::Mapped {
            settlement,
            deltas,
            outputs,
        } = self
        else {
            return Ok(());
        };
        if t.settlement != *settlement {
            return Err(format!("settled as {:?}, ideal is {:?}", t.settlement, settlement));
        }
        for (&p, &want) in deltas {
            if t.delta(p) != want {
                return Err(format!("party {p} ends at {:+}, ideal is {want:+}", t.delta(p)));
            }
        }
        for (p, want) in outputs {
            let got = t.outputs.get(p).cloned().unwrap_or_default();
            if got != *want {
                return Err(format!("party {p} has outputs {got:?}, ideal is {want:?}"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Fate {
    Stop,
    Penalty,
    /// Output of the aborted execution still reaches the honest parties.
    Deliver,
}

/// The first execution anyone deviates in and what that deviation amounts to.
fn first_deviation(s: &Scenario, classify: impl Fn(&Strategy) -> Option<(u32, Fate)>) -> Result<Option<(u32, Fate)>, String> {
    let mut first: Option<(u32, Fate)> = None;
    for p in PartyId::all(s.n).filter(|&p| s.deviates(p)) {
        let Some((e, fate)) = classify(s.strategy(p)) else {
            continue;
        };
        first = match first {
            Some((e0, f0)) if e0 < e => Some((e0, f0)),
            Some((e0, f0)) if e0 == e && f0 != fate => {
                return Err(format!("mixed deviations in execution {e}"));
            }
            _ => Some((e, fate)),
        };
    }
    Ok(first)
}

pub fn ideal_outcome(s: &Scenario) -> IdealOutcome {
    let honest = s.honest();
    if PartyId::all(s.n).any(|p| s.deviates(p) && matches!(s.strategy(p), Strategy::ReplayStale { .. })) {
        // The real protocol recovers from a replay and carries on; there is no
        // single ideal action it corresponds to.
        return IdealOutcome::Unmappable("replay of a stale transcript".into());
    }
    if PartyId::all(s.n).any(|p| s.deviates(p) && *s.strategy(p) == Strategy::SilentForever) {
        return IdealOutcome::Mapped {
            settlement: Settlement::Refund,
            deltas: honest.iter().map(|p| (p.0, 0)).collect(),
            outputs: BTreeMap::new(),
        };
    }
    match s.protocol {
        Protocol::Msfe => ideal_msfe(s, &honest),
        Protocol::Mscd => ideal_mscd(s, &honest),
        Protocol::Duplex => IdealOutcome::Unmappable("payment channels have no ideal functionality here".into()),
    }
}

fn ideal_msfe(s: &Scenario, honest: &[PartyId]) -> IdealOutcome {
    let Plan::Msfe { function, executions } = &s.plan else {
        return IdealOutcome::Unmappable("plan does not match protocol".into());
    };
    let classify = |st: &Strategy| match *st {
        Strategy::AbortAtStep { exec, step } if step < 3 => Some((exec, Fate::Stop)),
        Strategy::PrematureExit { exec } => Some((exec, Fate::Stop)),
        Strategy::AbortAtStep { exec, .. } | Strategy::WithholdShare { exec } => Some((exec, Fate::Penalty)),
        Strategy::WithholdSignature { exec } => Some((exec, Fate::Deliver)),
        _ => None,
    };
    let first = match first_deviation(s, classify) {
        Ok(f) => f,
        Err(why) => return IdealOutcome::Unmappable(why),
    };
    let d = PartyId::all(s.n).filter(|&p| s.deviates(p)).count() as u64;
    let n = s.n as u64;
    if matches!(first, Some((_, Fate::Deliver))) && d > 1 {
        return IdealOutcome::Unmappable("a coalition opening a half-signed execution".into());
    }
    let (delivered, settlement, delta) = match first {
        None => (*executions, Settlement::Payout, 0),
        Some((e, Fate::Stop)) => (e - 1, Settlement::Payout, 0),
        Some((e, Fate::Deliver)) => (e, Settlement::Payout, 0),
        Some((e, Fate::Penalty)) => (e - 1, Settlement::Abort, (d * (n - 1) * s.q / (n - d)) as i64),
    };
    let out: BTreeMap<u32, String> = (1..=delivered)
        .map(|e| {
            let inputs: Vec<Vec<u8>> = PartyId::all(s.n)
                .map(|p| msfe_input(s.seed, e, p, function.output_len()))
                .collect();
            (e, hex::encode(function.eval(&inputs)))
        })
        .collect();
    IdealOutcome::Mapped {
        settlement,
        deltas: honest.iter().map(|p| (p.0, delta)).collect(),
        outputs: honest.iter().map(|p| (p.0, out.clone())).collect(),
    }
}

fn ideal_mscd(s: &Scenario, honest: &[PartyId]) -> IdealOutcome {
    let Plan::Mscd {
        executions,
        stages,
        topups,
    } = &s.plan
    else {
        return IdealOutcome::Unmappable("plan does not match protocol".into());
    };
    let classify = |st: &Strategy| match *st {
        Strategy::AbortAtStep { exec, step: 1 } | Strategy::PrematureExit { exec } => Some((exec, Fate::Stop)),
        Strategy::AbortAtStep { exec, .. } | Strategy::WithholdShare { exec } | Strategy::WithholdSignature { exec } => {
            Some((exec, Fate::Penalty))
        }
        _ => None,
    };
    let first = match first_deviation(s, classify) {
        Ok(f) => f,
        Err(why) => return IdealOutcome::Unmappable(why),
    };
    let n = s.n;
    let mut b = vec![CoinAmount::ZERO; n];
    let mut put_in = vec![0i64; n];
    let mut out = BTreeMap::new();
    let mut settlement = Settlement::Payout;
    let mut penalty = 0i64;
    for e in 1..=*executions {
        let stop_here = first.filter(|&(fe, _)| fe == e).map(|(_, f)| f);
        let premature = PartyId::all(n).any(|p| s.deviates(p) && *s.strategy(p) == Strategy::PrematureExit { exec: e });
        if stop_here == Some(Fate::Stop) && !premature {
            break;
        }
        for t in topups.iter().filter(|t| t.before_exec == e) {
            let k = t.party as usize - 1;
            b[k] = CoinAmount(b[k].0 + t.amount);
            put_in[k] += t.amount as i64;
        }
        if premature || b.iter().any(|c| c.0 < *stages as u64) {
            break;
        }
        if stop_here == Some(Fate::Penalty) {
            settlement = Settlement::Abort;
            penalty = s.q as i64;
            break;
        }
        let mut winners = Vec::new();
        for stage in 0..*stages as usize {
            let inputs: Vec<Vec<u8>> = PartyId::all(n)
                .map(|p| stage_input(party_seed(s.seed, p), e as i64, stage, p.slot()).0.to_vec())
                .collect();
            let (w, next) = lottery_stage(&inputs, &b).expect("balances cover every stage");
            winners.push((w + 1).to_string());
            b = next;
        }
        out.insert(e, winners.join(","));
    }
    IdealOutcome::Mapped {
        settlement,
        deltas: honest
            .iter()
            .map(|p| (p.0, b[p.slot()].0 as i64 - put_in[p.slot()] + penalty))
            .collect(),
        outputs: honest.iter().map(|p| (p.0, out.clone())).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{run_scenario, RunOptions};

    fn msfe(strategies: serde_json::Value, corrupt: serde_json::Value) -> Scenario {
        Scenario::from_json(
            &serde_json::json!({
                "format_version": 1, "protocol": "msfe", "n": 3, "q": 6, "seed": 4,
                "corrupt": corrupt, "strategies": strategies,
                "plan": {"msfe": {"function": {"kind": "max", "width": 3}, "executions": 2}}
            })
            .to_string(),
        )
        .unwrap()
    }

    #[test]
    fn honest_msfe_delivers_every_output() {
        let s = msfe(serde_json::json!({}), serde_json::json!([]));
        let ideal = ideal_outcome(&s);
        let IdealOutcome::Mapped { outputs, .. } = &ideal else { panic!() };
        assert_eq!(outputs[&1].len(), 2);
        ideal.matches(&run_scenario(&s, &RunOptions::default()).unwrap()).unwrap();
    }

    #[test]
    fn coalition_penalty_is_split_evenly() {
        let s = msfe(
            serde_json::json!({"1": {"withhold_share": {"exec": 2}}, "2": {"withhold_share": {"exec": 2}}}),
            serde_json::json!([1, 2]),
        );
        let IdealOutcome::Mapped { deltas, .. } = ideal_outcome(&s) else { panic!() };
        assert_eq!(deltas[&3], 2 * 2 * 6);
    }

    #[test]
    fn duplex_is_unmappable() {
        let s = Scenario::from_json(
            &serde_json::json!({
                "format_version": 1, "protocol": "duplex", "n": 2, "seed": 1,
                "plan": {"duplex": {"deposits": [1, 1], "payments": {"list": []}}}
            })
            .to_string(),
        )
        .unwrap();
        assert!(matches!(ideal_outcome(&s), IdealOutcome::Unmappable(_)));
    }
}
