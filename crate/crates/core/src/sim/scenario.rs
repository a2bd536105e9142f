//! Scenario documents: which protocol to run, who is corrupt and how they deviate.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::sha256;
use crate::msfe::{lcm_upto, SfeFunction};
use crate::types::PartyId;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Msfe,
    Mscd,
    Duplex,
}

/// How a corrupt party deviates. Execution numbers start at 1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Strategy {
    Honest,
    /// MSFE steps: 1 input, 2 signatures, 3 share broadcast. MSCD steps: 1 top-up,
    /// 2 parameter agreement, `2 + r` message round `r`.
    AbortAtStep { exec: u32, step: u32 },
    WithholdShare { exec: u32 },
    WithholdSignature { exec: u32 },
    ReplayStale { old: u32 },
    PrematureExit { exec: u32 },
    StaleDuplexSubmit { round: i64 },
    SilentForever,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopUp {
    pub before_exec: u32,
    pub party: u32,
    pub amount: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Payment {
    pub payer: u32,
    pub amount: u64,
}

/// An on-chain deposit or an incremental withdrawal approval, after payment `after_payment`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelStep {
    pub after_payment: u32,
    pub party: u32,
    pub amount: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Payments {
    List(Vec<Payment>),
    Random { count: u32, max_amount: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Plan {
    Msfe {
        function: SfeFunction,
        executions: u32,
    },
    Mscd {
        executions: u32,
        #[serde(default = "one")]
        stages: u32,
        #[serde(default)]
        topups: Vec<TopUp>,
    },
    Duplex {
        deposits: [u64; 2],
        payments: Payments,
        #[serde(default)]
        topups: Vec<ChannelStep>,
        #[serde(default)]
        withdrawals: Vec<ChannelStep>,
    },
}

fn one() -> u32 {
    1
}
fn default_window() -> u64 {
    3
}
fn default_offchain() -> u64 {
    1
}
fn default_duplex_window() -> u64 {
    10
}
fn default_max_ticks() -> u64 {
    500
}
fn default_wallet() -> u64 {
    1000
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub format_version: u32,
    #[serde(default)]
    pub name: String,
    pub protocol: Protocol,
    pub n: usize,
    #[serde(default)]
    pub q: u64,
    /// Δ, the on-chain response window.
    #[serde(default = "default_window")]
    pub window: u64,
    /// δ, the off-chain response window.
    #[serde(default = "default_offchain")]
    pub offchain_window: u64,
    /// Δ_dx, the duplex dispute window.
    #[serde(default = "default_duplex_window")]
    pub duplex_window: u64,
    #[serde(default)]
    pub aggregate_signatures: bool,
    pub seed: u64,
    #[serde(default = "default_max_ticks")]
    pub max_ticks: u64,
    #[serde(default = "default_wallet")]
    pub initial_wallet: u64,
    #[serde(default)]
    pub corrupt: BTreeSet<u32>,
    #[serde(default)]
    pub strategies: BTreeMap<u32, Strategy>,
    pub plan: Plan,
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenarios always serialise")
    }

    pub fn strategy(&self, p: PartyId) -> &Strategy {
        static HONEST: Strategy = Strategy::Honest;
        self.strategies.get(&p.0).unwrap_or(&HONEST)
    }

    /// Corrupt and actually deviating.
    pub fn deviates(&self, p: PartyId) -> bool {
        self.corrupt.contains(&p.0) && *self.strategy(p) != Strategy::Honest
    }

    pub fn honest(&self) -> Vec<PartyId> {
        PartyId::all(self.n).filter(|p| !self.corrupt.contains(&p.0)).collect()
    }

    pub fn executions(&self) -> u32 {
        match &self.plan {
            Plan::Msfe { executions, .. } | Plan::Mscd { executions, .. } => *executions,
            Plan::Duplex { .. } => 0,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.format_version != FORMAT_VERSION {
            return Err(invalid(format!(
                "format_version {} is not supported (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        if self.n < 2 {
            return Err(invalid("need at least two parties"));
        }
        if self.max_ticks == 0 {
            return Err(invalid("max_ticks must be positive"));
        }
        if self.corrupt.len() >= self.n {
            return Err(invalid("at least one party must be honest"));
        }
        if let Some(p) = self.corrupt.iter().find(|&&p| p == 0 || p as usize > self.n) {
            return Err(invalid(format!("corrupt party {p} does not exist")));
        }
        for (p, s) in &self.strategies {
            if *s != Strategy::Honest && !self.corrupt.contains(p) {
                return Err(invalid(format!("party {p} has a strategy but is not corrupt")));
            }
        }
        let plan_matches = matches!(
            (&self.plan, self.protocol),
            (Plan::Msfe { .. }, Protocol::Msfe) | (Plan::Mscd { .. }, Protocol::Mscd) | (Plan::Duplex { .. }, Protocol::Duplex)
        );
        if !plan_matches {
            return Err(invalid("plan does not match protocol"));
        }
        match &self.plan {
            Plan::Msfe { function, executions } => {
                let lcm = lcm_upto(self.n);
                if self.q == 0 || self.q % lcm != 0 {
                    return Err(invalid(format!("q must be a positive multiple of {lcm}")));
                }
                if function.output_len() == 0 || function.output_len() > 32 {
                    return Err(invalid("function output must be 1 to 32 bytes"));
                }
                self.check_windows()?;
                self.check_strategies(*executions, 3)?;
            }
            Plan::Mscd { executions, stages, topups } => {
                if self.q == 0 {
                    return Err(invalid("q must be positive"));
                }
                if *stages == 0 {
                    return Err(invalid("stages must be positive"));
                }
                self.check_windows()?;
                for t in topups {
                    if t.party == 0 || t.party as usize > self.n || t.amount == 0 {
                        return Err(invalid("top-up needs an existing party and a positive amount"));
                    }
                    if t.before_exec == 0 || t.before_exec > *executions {
                        return Err(invalid("top-up scheduled outside the executions"));
                    }
                }
                let rounds = 2 * self.n as u32 * stages;
                self.check_strategies(*executions, 2 + rounds)?;
                for (p, s) in &self.strategies {
                    if let Strategy::AbortAtStep { step, .. } = s {
                        if *step > 2 && (step - 3) % self.n as u32 != p - 1 {
                            return Err(invalid(format!("round {} is not party {p}'s turn", step - 2)));
                        }
                    }
                }
            }
            Plan::Duplex { payments, topups, withdrawals, .. } => {
                if self.n != 2 {
                    return Err(invalid("a duplex channel has exactly two parties"));
                }
                if self.duplex_window == 0 {
                    return Err(invalid("duplex_window must be positive"));
                }
                let count = match payments {
                    Payments::List(v) => {
                        if v.iter().any(|p| p.payer == 0 || p.payer > 2 || p.amount == 0) {
                            return Err(invalid("payments need payer 1 or 2 and a positive amount"));
                        }
                        v.len() as u32
                    }
                    Payments::Random { count, max_amount } => {
                        if *max_amount == 0 {
                            return Err(invalid("max_amount must be positive"));
                        }
                        *count
                    }
                };
                for s in topups.iter().chain(withdrawals) {
                    if s.party == 0 || s.party > 2 || s.after_payment > count {
                        return Err(invalid("channel step refers to a missing party or payment"));
                    }
                }
                for s in self.strategies.values() {
                    match s {
                        Strategy::Honest | Strategy::SilentForever => {}
                        Strategy::StaleDuplexSubmit { round } if *round >= 0 && *round <= count as i64 => {}
                        other => return Err(invalid(format!("strategy {other:?} does not apply to duplex"))),
                    }
                }
            }
        }
        Ok(())
    }

    fn check_windows(&self) -> Result<(), ScenarioError> {
        if self.window < 2 {
            return Err(invalid("window must be at least 2 ticks"));
        }
        if self.offchain_window == 0 {
            return Err(invalid("offchain_window must be positive"));
        }
        Ok(())
    }

    fn check_strategies(&self, executions: u32, max_step: u32) -> Result<(), ScenarioError> {
        for s in self.strategies.values() {
            let exec = match s {
                Strategy::Honest | Strategy::SilentForever => continue,
                Strategy::StaleDuplexSubmit { .. } => return Err(invalid("stale_duplex_submit needs a duplex scenario")),
                Strategy::AbortAtStep { exec, step } => {
                    if *step == 0 || *step > max_step {
                        return Err(invalid(format!("step {step} outside 1..={max_step}")));
                    }
                    *exec
                }
                Strategy::WithholdShare { exec } | Strategy::WithholdSignature { exec } | Strategy::PrematureExit { exec } => *exec,
                Strategy::ReplayStale { old } => {
                    if *old >= executions {
                        return Err(invalid("replay_stale needs a newer execution to exist"));
                    }
                    *old
                }
            };
            if exec == 0 || exec > executions {
                return Err(invalid(format!("execution {exec} outside 1..={executions}")));
            }
        }
        Ok(())
    }
}

/// Per-party randomness seed derived from the scenario seed.
pub fn party_seed(seed: u64, p: PartyId) -> u64 {
    let h = sha256(&[b"party-seed", &seed.to_be_bytes(), &p.0.to_be_bytes()]);
    u64::from_be_bytes(h[..8].try_into().expect("8 bytes"))
}

/// Party `p`'s input to MSFE execution `exec`.
pub fn msfe_input(seed: u64, exec: u32, p: PartyId, len: usize) -> Vec<u8> {
    sha256(&[b"msfe-input", &seed.to_be_bytes(), &exec.to_be_bytes(), &p.0.to_be_bytes()])[..len].to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> serde_json::Value {
        serde_json::json!({
            "format_version": 1,
            "protocol": "msfe",
            "n": 3,
            "q": 6,
            "seed": 1,
            "corrupt": [2],
            "strategies": {"2": {"withhold_share": {"exec": 1}}},
            "plan": {"msfe": {"function": {"kind": "xor", "width": 4}, "executions": 2}}
        })
    }

    #[test]
    fn parses_and_applies_defaults() {
        let s = Scenario::from_json(&base().to_string()).unwrap();
        assert_eq!(s.window, 3);
        assert_eq!(s.strategy(PartyId(2)), &Strategy::WithholdShare { exec: 1 });
        assert_eq!(s.strategy(PartyId(1)), &Strategy::Honest);
        assert_eq!(s.honest(), vec![PartyId(1), PartyId(3)]);
        let again = Scenario::from_json(&s.to_json()).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn rejects_unknown_fields_and_bad_values() {
        let mut v = base();
        v["colour"] = "red".into();
        assert!(matches!(Scenario::from_json(&v.to_string()), Err(ScenarioError::Parse(_))));
        let mut v = base();
        v["q"] = 4.into();
        assert!(matches!(Scenario::from_json(&v.to_string()), Err(ScenarioError::Invalid(_))));
        let mut v = base();
        v["corrupt"] = serde_json::json!([1, 2, 3]);
        assert!(Scenario::from_json(&v.to_string()).is_err());
        let mut v = base();
        v["format_version"] = 2.into();
        assert!(Scenario::from_json(&v.to_string()).is_err());
        let mut v = base();
        v["strategies"] = serde_json::json!({"2": {"withhold_share": {"exec": 3}}});
        assert!(Scenario::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn mscd_round_must_be_the_corrupt_turn() {
        let v = serde_json::json!({
            "format_version": 1, "protocol": "mscd", "n": 2, "q": 1, "seed": 1,
            "corrupt": [2],
            "strategies": {"2": {"abort_at_step": {"exec": 1, "step": 3}}},
            "plan": {"mscd": {"executions": 1, "topups": [{"before_exec": 1, "party": 1, "amount": 2}]}}
        });
        assert!(Scenario::from_json(&v.to_string()).is_err());
        let v2 = v.to_string().replace("\"step\":3", "\"step\":4");
        assert!(Scenario::from_json(&v2).is_ok());
    }
}
