//! Transcript validation, next-message function and cash extraction for the
//! commit-reveal reactive protocol.
//!
//! Message `r` (1-based) belongs to stage `(r-1) / 2n`. Within a stage the first
//! `n` messages are commitments to `(y_j; ω_j)` and the next `n` are the openings,
//! party `1 + ((r-1) mod n)` sending message `r`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{codec, commit, hexser, verify_open, Commitment, Encoder, Opening, PublicKey, SigKeyPair, Signature};
use crate::games::lottery::lottery_stage;
use crate::types::CoinAmount;

pub const INPUT_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidatorError {
    #[error("need at least two parties")]
    TooFewParties,
    #[error("an execution needs at least one stage")]
    NoStages,
    #[error("{stages} stages cannot be played from a balance of {min}")]
    StagesExceedBalance { stages: u32, min: u64 },
    #[error("balances sum to {balances} but deposits to {deposits}")]
    Unbalanced { balances: u64, deposits: u64 },
    #[error("stage function does not conserve coins")]
    NonConserving,
    #[error("message {round} is not party {slot}'s to send")]
    NotYourTurn { round: usize, slot: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageGame {
    Lottery,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MscdMessage {
    pub id: i64,
    pub round: u32,
    #[serde(with = "hexser")]
    pub payload: Vec<u8>,
    pub sig: Signature,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Commit,
    Reveal,
}

/// Where message number `index` (0-based) sits in the protocol.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Position {
    pub stage: usize,
    pub phase: Phase,
    pub slot: usize,
}

/// `tv^(id)`: everything needed to check a transcript of execution `id`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptValidator {
    pub id: i64,
    pub stages: u32,
    pub game: StageGame,
    pub pks: Vec<PublicKey>,
    /// Balances the execution starts from.
    pub balances: Vec<CoinAmount>,
    /// Cumulative top-ups when the execution was agreed.
    pub deposits: Vec<CoinAmount>,
}

impl TranscriptValidator {
    pub fn new(
        id: i64,
        stages: u32,
        pks: Vec<PublicKey>,
        balances: Vec<CoinAmount>,
        deposits: Vec<CoinAmount>,
    ) -> Result<Self, ValidatorError> {
        let n = pks.len();
        if n < 2 || balances.len() != n || deposits.len() != n {
            return Err(ValidatorError::TooFewParties);
        }
        if stages == 0 {
            return Err(ValidatorError::NoStages);
        }
        let min = balances.iter().map(|c| c.0).min().unwrap_or(0);
        if u64::from(stages) > min {
            return Err(ValidatorError::StagesExceedBalance { stages, min });
        }
        let sb: u64 = balances.iter().map(|c| c.0).sum();
        let sd: u64 = deposits.iter().map(|c| c.0).sum();
        if sb != sd {
            return Err(ValidatorError::Unbalanced {
                balances: sb,
                deposits: sd,
            });
        }
        let probe = vec![vec![0u8; INPUT_LEN]; n];
        let (_, after) = lottery_stage(&probe, &balances).map_err(|_| ValidatorError::NonConserving)?;
        if after.iter().map(|c| c.0).sum::<u64>() != sb {
            return Err(ValidatorError::NonConserving);
        }
        Ok(TranscriptValidator {
            id,
            stages,
            game: StageGame::Lottery,
            pks,
            balances,
            deposits,
        })
    }

    pub fn n(&self) -> usize {
        self.pks.len()
    }

    /// `|tv|`, the number of messages in a complete transcript.
    pub fn len(&self) -> usize {
        2 * self.n() * self.stages as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn digest(&self) -> [u8; 32] {
        let game = match self.game {
            StageGame::Lottery => "lottery",
        };
        let mut e = Encoder::new("statechan/mscd/tv")
            .i64(self.id)
            .u32(self.stages)
            .var(game.as_bytes())
            .u32(self.pks.len() as u32);
        for pk in &self.pks {
            e = e.fixed(&pk.0);
        }
        let bytes = e.coin_vec(&self.balances).coin_vec(&self.deposits).finish();
        crate::crypto::sha256(&[&bytes])
    }

    pub fn position(&self, index: usize) -> Position {
        let n = self.n();
        let stage = index / (2 * n);
        let p = index % (2 * n);
        Position {
            stage,
            phase: if p < n { Phase::Commit } else { Phase::Reveal },
            slot: p % n,
        }
    }

    /// Checks `msg` as the next message after the (already valid) prefix `tt`.
    pub fn accepts_next(&self, tt: &[MscdMessage], msg: &MscdMessage) -> bool {
        let index = tt.len();
        if index >= self.len() || msg.id != self.id || msg.round as usize != index + 1 {
            return false;
        }
        let pos = self.position(index);
        let signed = codec::mscd_message(msg.id, msg.round, &msg.payload);
        if !crate::crypto::verify(&self.pks[pos.slot], &signed, &msg.sig) {
            return false;
        }
        match pos.phase {
            Phase::Commit => msg.payload.len() == 32,
            Phase::Reveal => {
                let Some(opening) = decode_reveal(&msg.payload) else {
                    return false;
                };
                let commit_msg = &tt[index - self.n()];
                let Ok(c) = <[u8; 32]>::try_from(commit_msg.payload.as_slice()) else {
                    return false;
                };
                verify_open(&opening, &Commitment(c))
            }
        }
    }

    /// `tv(TT) = 1`.
    pub fn validate(&self, tt: &[MscdMessage]) -> bool {
        tt.len() <= self.len() && (0..tt.len()).all(|i| self.accepts_next(&tt[..i], &tt[i]))
    }

    /// Replays every completed stage of `tt`; returns the balances and each stage's winner slot.
    pub fn replay(&self, tt: &[MscdMessage]) -> (Vec<CoinAmount>, Vec<usize>) {
        let n = self.n();
        let mut b = self.balances.clone();
        let mut winners = Vec::new();
        for stage in tt.chunks_exact(2 * n) {
            let inputs: Vec<Vec<u8>> = stage[n..]
                .iter()
                .map(|m| decode_reveal(&m.payload).map(|o| o.message).unwrap_or_default())
                .collect();
            match lottery_stage(&inputs, &b) {
                Ok((w, next)) => {
                    winners.push(w);
                    b = next;
                }
                Err(_) => break,
            }
        }
        (b, winners)
    }

    /// Party `slot`'s share of the replayed balances.
    pub fn cash(&self, slot: usize, tt: &[MscdMessage]) -> CoinAmount {
        self.replay(tt).0[slot]
    }

    /// `nmf`: the next message for party `slot`, given its stage input and randomness.
    pub fn next_message(
        &self,
        tt: &[MscdMessage],
        slot: usize,
        y: &[u8; INPUT_LEN],
        omega: &[u8; 32],
        key: &SigKeyPair,
    ) -> Result<MscdMessage, ValidatorError> {
        let index = tt.len();
        if index >= self.len() || self.position(index).slot != slot {
            return Err(ValidatorError::NotYourTurn { round: index + 1, slot });
        }
        let opening = Opening::new(y.to_vec(), *omega);
        let payload = match self.position(index).phase {
            Phase::Commit => commit(&opening).0.to_vec(),
            Phase::Reveal => [y.as_slice(), omega.as_slice()].concat(),
        };
        let round = index as u32 + 1;
        let sig = key.sign(&codec::mscd_message(self.id, round, &payload));
        Ok(MscdMessage {
            id: self.id,
            round,
            payload,
            sig,
        })
    }
}

fn decode_reveal(payload: &[u8]) -> Option<Opening> {
    if payload.len() != INPUT_LEN + 32 {
        return None;
    }
    let omega: [u8; 32] = payload[INPUT_LEN..].try_into().ok()?;
    Some(Opening::new(payload[..INPUT_LEN].to_vec(), omega))
}
