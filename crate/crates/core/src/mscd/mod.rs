//! Amortized secure cash distribution: reactive executions whose stages move
//! coin balances, settled through a contract that also accepts top-ups.
//!
//! Every stage is an `n`-commit / `n`-reveal round robin, so the transcript
//! validator and the cash function are plain deterministic checks.

pub mod contract;
pub mod party;
pub mod validator;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{KeyRing, SigBundle};
use crate::types::CoinAmount;

pub use contract::{mscd_pred, mscd_prog, mscd_update, MscdProgram};
pub use party::{apply_topup, propose_topup, run_reactive_execution, stage_input, AbortPoint, MscdBest, MscdParty, ReactiveHooks, ReactiveOutcome};
pub use validator::{MscdMessage, TranscriptValidator, ValidatorError};

pub use crate::msfe::Mode;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MscdConfigError {
    #[error("need at least two parties, got {0}")]
    TooFewParties(usize),
    #[error("penalty unit must be positive")]
    ZeroPenalty,
    #[error("on-chain window must be at least 2 ticks, got {0}")]
    WindowTooShort(u64),
    #[error("off-chain window must be at least 1 tick")]
    ZeroOffchainWindow,
    #[error("coin amounts overflow for n = {0}")]
    Overflow(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MscdConfig {
    pub n: usize,
    pub q: CoinAmount,
    pub window: u64,
    pub offchain_window: u64,
    pub keys: KeyRing,
}

impl MscdConfig {
    pub fn new(
        q: CoinAmount,
        window: u64,
        offchain_window: u64,
        keys: KeyRing,
    ) -> Result<Self, MscdConfigError> {
        let n = keys.n();
        if n < 2 {
            return Err(MscdConfigError::TooFewParties(n));
        }
        if q.is_zero() {
            return Err(MscdConfigError::ZeroPenalty);
        }
        if window < 2 {
            return Err(MscdConfigError::WindowTooShort(window));
        }
        if offchain_window < 1 {
            return Err(MscdConfigError::ZeroOffchainWindow);
        }
        q.checked_mul(n as u64 * n as u64)
            .map_err(|_| MscdConfigError::Overflow(n))?;
        Ok(MscdConfig {
            n,
            q,
            window,
            offchain_window,
            keys,
        })
    }

    pub fn deposit(&self) -> CoinAmount {
        CoinAmount(self.q.0 * (self.n as u64 - 1))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MscdState {
    pub mode: Mode,
    pub id: i64,
    pub tt: Vec<MscdMessage>,
    pub t: i64,
    pub l: Vec<bool>,
    pub tv: Option<TranscriptValidator>,
    /// Balances agreed before execution `id` started.
    pub b: Vec<CoinAmount>,
    /// Cumulative top-ups per party.
    pub deposits: Vec<CoinAmount>,
    /// Everyone's signature on `(id, tv, b)`.
    pub sigma: Option<SigBundle>,
    /// Set once an abort is settled and the aborter's last agreed balance is still owed.
    pub residual_due: bool,
}

impl MscdState {
    pub fn initial(n: usize) -> Self {
        MscdState {
            mode: Mode::Init,
            id: -1,
            tt: Vec::new(),
            t: -1,
            l: vec![true; n],
            tv: None,
            b: vec![CoinAmount::ZERO; n],
            deposits: vec![CoinAmount::ZERO; n],
            sigma: None,
            residual_due: false,
        }
    }

    /// `|TT| = |tv|`. False when no execution is on chain.
    pub fn is_complete(&self) -> bool {
        self.tv.as_ref().is_some_and(|tv| self.tt.len() == tv.len())
    }

    /// `j_a = 1 + |TT| mod n`, as a zero-based slot.
    pub fn aborter_slot(&self) -> usize {
        self.tt.len() % self.l.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MscdWitness {
    Message {
        id: i64,
        msg: MscdMessage,
    },
    Transcript {
        id: i64,
        tt: Vec<MscdMessage>,
        tv: TranscriptValidator,
        b: Vec<CoinAmount>,
        sigma: SigBundle,
    },
    Exit,
}

impl MscdWitness {
    pub fn is_dispute(&self) -> bool {
        !matches!(self, MscdWitness::Exit)
    }
}

/// `u = (b', ψ)`; the coins travel with the ledger update.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalanceUpdate {
    pub balances: Vec<CoinAmount>,
    pub psi: SigBundle,
}
