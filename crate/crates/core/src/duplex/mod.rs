//! Two-party duplex micropayment channel with incremental deposits and withdrawals.
//!
//! The channel state is `(r, net, withdrawals)`: `net > 0` means party 0 is owed
//! coins by party 1. Both parties sign every state; the contract keeps the signed
//! state with the highest round and, once the dispute window after a trigger has
//! closed, pays out `deposits[i] ± net` minus what was already withdrawn.

pub mod channel;
pub mod contract;

use serde::{Deserialize, Serialize};

use crate::crypto::{codec, PublicKey, Signature};
use crate::types::CoinAmount;

pub use channel::{channel_pay, resolve_concurrent, ChannelError, DuplexParty, Proposal};
pub use contract::{duplex_prog, DuplexProgram};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplexConfig {
    pub keys: [PublicKey; 2],
    /// Opening deposits, required when the instance is created.
    pub deposits: [CoinAmount; 2],
    /// Δ_dx: ticks between trigger and finalisation.
    pub window: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelStateMsg {
    pub r: i64,
    pub net: i64,
    pub withdrawals: [CoinAmount; 2],
}

impl ChannelStateMsg {
    pub fn encode(&self) -> Vec<u8> {
        codec::duplex_state(self.r, self.net, &self.withdrawals)
    }

    /// `deposits[i] ± net`, the coins party `i` is owed before withdrawals.
    pub fn entitlement(&self, deposits: &[CoinAmount; 2], i: usize) -> i128 {
        let signed = if i == 0 { self.net } else { -self.net };
        deposits[i].0 as i128 + signed as i128
    }
}

/// A state signed by both parties, indexed by party.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedState {
    pub msg: ChannelStateMsg,
    pub sigs: [Signature; 2],
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplexState {
    pub deposits: [CoinAmount; 2],
    pub net: i64,
    pub best_round: i64,
    pub withdrawals: [CoinAmount; 2],
    pub withdrawn: [CoinAmount; 2],
    pub t1: Option<i64>,
    pub t2: Option<i64>,
}

impl DuplexState {
    pub fn initial(deposits: [CoinAmount; 2]) -> Self {
        DuplexState {
            deposits,
            net: 0,
            best_round: -1,
            withdrawals: [CoinAmount::ZERO; 2],
            withdrawn: [CoinAmount::ZERO; 2],
            t1: None,
            t2: None,
        }
    }

    pub fn final_entitlement(&self, i: usize) -> i128 {
        let signed = if i == 0 { self.net } else { -self.net };
        self.deposits[i].0 as i128 + signed as i128
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DuplexWitness {
    Deposit { amount: CoinAmount },
    Trigger,
    Update(SignedState),
    Withdraw,
}
