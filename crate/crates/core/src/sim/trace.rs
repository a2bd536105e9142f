//! The trace format: everything the invariant checker needs to replay a run.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::scenario::Protocol;

pub const TRACE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionRecord {
    pub seq: u64,
    pub party: u32,
    /// The tick the action was submitted in.
    pub time: u64,
    pub kind: String,
    pub dispute: bool,
    pub accepted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub payout: u64,
    pub absorbed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub escrow_after: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    /// Message round, for MSCD message witnesses.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub round: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefundRecord {
    pub party: u32,
    pub amount: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TickRecord {
    pub tick: u64,
    pub actions: Vec<ActionRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub refunds: Vec<RefundRecord>,
    pub wallets: Vec<u64>,
    pub escrow: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OffchainRecord {
    pub tick: u64,
    pub kind: String,
    pub id: i64,
    pub detail: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Terminated,
    Refunded,
    BudgetExhausted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Settlement {
    Payout,
    Abort,
    Refund,
    FinalSplit,
    Open,
}

/// What a party is owed according to its own off-chain view, relative to the
/// coins it put in.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub entitled_delta: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trace {
    pub format_version: u32,
    pub scenario: String,
    pub protocol: Protocol,
    pub n: usize,
    pub seed: u64,
    pub q: u64,
    pub corrupt: Vec<u32>,
    /// Corrupt parties that actually deviate.
    pub deviating: Vec<u32>,
    pub initial_wallets: Vec<u64>,
    pub funding: BTreeMap<u32, u64>,
    pub offchain: Vec<OffchainRecord>,
    pub ticks: Vec<TickRecord>,
    pub outcome: Outcome,
    pub settlement: Settlement,
    pub final_tick: u64,
    pub final_wallets: Vec<u64>,
    pub final_escrow: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_mode: Option<String>,
    /// The penalised party of an MSCD abort.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aborter: Option<u32>,
    pub expected: BTreeMap<u32, Expectation>,
    /// Outputs each honest party obtained, by execution number.
    pub outputs: BTreeMap<u32, BTreeMap<u32, String>>,
}

impl Trace {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("traces always serialise")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn actions(&self) -> impl Iterator<Item = &ActionRecord> {
        self.ticks.iter().flat_map(|t| t.actions.iter())
    }

    pub fn accepted_triggers(&self) -> usize {
        self.actions().filter(|a| a.accepted && a.kind != "update").count()
    }

    pub fn accepted_disputes(&self) -> usize {
        self.actions().filter(|a| a.accepted && a.dispute).count()
    }

    pub fn honest(&self) -> impl Iterator<Item = u32> + '_ {
        (1..=self.n as u32).filter(|p| !self.corrupt.contains(p))
    }

    pub fn delta(&self, party: u32) -> i64 {
        let k = party as usize - 1;
        self.final_wallets[k] as i64 - self.initial_wallets[k] as i64
    }
}
