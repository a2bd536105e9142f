//! Amortized multiparty fair function evaluation with penalties.
//!
//! [`contract`] holds the on-ledger program (`pred` and `Prog`), [`dealer`] the
//! trusted dealer that stands in for the MPC step of each execution, and
//! [`party`] the per-party state: `best_j`, the local execution rounds and the
//! reactions to ledger events.

pub mod contract;
pub mod dealer;
pub mod party;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{Commitment, KeyRing, Opening, SigBundle};
use crate::types::CoinAmount;

pub use contract::{pred, prog, MsfeProgram};
pub use dealer::{dealer_execute, DealerOutput, SfeFunction};
pub use party::{run_local_execution, ExecutionHooks, LocalExecution, LocalOutcome, MsfeParty};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MsfeConfigError {
    #[error("need at least two parties, got {0}")]
    TooFewParties(usize),
    #[error("q = {q} must be a positive multiple of lcm(1..={n}) = {lcm}")]
    Indivisible { q: u64, n: usize, lcm: u64 },
    #[error("on-chain window must be at least 2 ticks, got {0}")]
    WindowTooShort(u64),
    #[error("off-chain window must be at least 1 tick")]
    ZeroOffchainWindow,
    #[error("expected {expected} public keys, got {got}")]
    KeyCount { expected: usize, got: usize },
    #[error("coin amounts overflow for n = {0}")]
    Overflow(usize),
}

pub fn lcm_upto(n: usize) -> u64 {
    fn gcd(a: u64, b: u64) -> u64 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    (1..=n as u64).fold(1, |acc, k| acc / gcd(acc, k) * k)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MsfeConfig {
    pub n: usize,
    pub q: CoinAmount,
    /// On-chain response window Δ, in ticks.
    pub window: u64,
    /// Off-chain response window δ, in ticks.
    pub offchain_window: u64,
    pub keys: KeyRing,
}

impl MsfeConfig {
    pub fn new(
        q: CoinAmount,
        window: u64,
        offchain_window: u64,
        keys: KeyRing,
    ) -> Result<Self, MsfeConfigError> {
        let n = keys.n();
        if n < 2 {
            return Err(MsfeConfigError::TooFewParties(n));
        }
        let lcm = lcm_upto(n);
        if q.0 == 0 || q.0 % lcm != 0 {
            return Err(MsfeConfigError::Indivisible { q: q.0, n, lcm });
        }
        if window < 2 {
            return Err(MsfeConfigError::WindowTooShort(window));
        }
        if offchain_window < 1 {
            return Err(MsfeConfigError::ZeroOffchainWindow);
        }
        // The largest single payout is n(n-1)q.
        q.checked_mul(n as u64 * (n as u64 - 1))
            .map_err(|_| MsfeConfigError::Overflow(n))?;
        Ok(MsfeConfig {
            n,
            q,
            window,
            offchain_window,
            keys,
        })
    }

    /// `d_j = (n-1)q`.
    pub fn deposit(&self) -> CoinAmount {
        CoinAmount(self.q.0 * (self.n as u64 - 1))
    }
}

/// `TT = (X, h, σ)`: openings revealed so far, the commitments and everyone's
/// signature on `(id, h)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MsfeTranscript {
    pub x: Vec<Option<Opening>>,
    pub h: Vec<Commitment>,
    pub sigma: SigBundle,
}

impl MsfeTranscript {
    pub fn opened(&self) -> usize {
        self.x.iter().filter(|o| o.is_some()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.opened() == self.h.len()
    }

    /// Reconstructs `z = z_1 ⊕ … ⊕ z_n` once every share is present.
    pub fn output(&self) -> Option<Vec<u8>> {
        if !self.is_complete() {
            return None;
        }
        let mut z: Vec<u8> = Vec::new();
        for o in self.x.iter().flatten() {
            if z.len() < o.message.len() {
                z.resize(o.message.len(), 0);
            }
            for (a, b) in z.iter_mut().zip(&o.message) {
                *a ^= b;
            }
        }
        Some(z)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Init,
    Exec,
    Exit,
    Payout,
    Abort,
    Inactive,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MsfeState {
    pub mode: Mode,
    pub id: i64,
    pub tt: Option<MsfeTranscript>,
    pub t: i64,
    pub l: Vec<bool>,
}

impl MsfeState {
    /// `("init", -1, ⊥, -1, 1)`.
    pub fn initial(n: usize) -> Self {
        MsfeState {
            mode: Mode::Init,
            id: -1,
            tt: None,
            t: -1,
            l: vec![true; n],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MsfeWitness {
    Transcript { id: i64, tt: MsfeTranscript },
    Exit,
}

impl MsfeWitness {
    pub fn is_transcript(&self) -> bool {
        matches!(self, MsfeWitness::Transcript { .. })
    }
}
