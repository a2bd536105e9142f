//! The on-ledger duplex channel contract.

use crate::crypto::verify;
use crate::ledger::{ContractProgram, ProgramKind, Rejection, Transition};
use crate::types::{CoinAmount, PartyId, TimePoint};

use super::{DuplexConfig, DuplexState, DuplexWitness};

#[derive(Clone, Debug)]
pub struct DuplexProgram {
    pub cfg: DuplexConfig,
}

impl DuplexProgram {
    pub fn new(cfg: DuplexConfig) -> Self {
        DuplexProgram { cfg }
    }
}

pub fn duplex_prog(
    cfg: &DuplexConfig,
    party: PartyId,
    w: &DuplexWitness,
    t: TimePoint,
    st: &DuplexState,
) -> Result<(DuplexState, CoinAmount), Rejection> {
    let i = party.slot();
    if i >= 2 {
        return Err(Rejection::new("not a channel player"));
    }
    let t = t.signed();
    let mut next = st.clone();
    let mut paid = CoinAmount::ZERO;
    match w {
        DuplexWitness::Deposit { amount } => {
            if st.t1.is_some() {
                return Err(Rejection::new("AfterTrigger"));
            }
            next.deposits[i] = st.deposits[i]
                .checked_add(*amount)
                .map_err(|_| Rejection::new("deposit overflow"))?;
        }
        DuplexWitness::Trigger => {
            if st.t1.is_some() {
                return Err(Rejection::new("AlreadyTriggered"));
            }
            next.t1 = Some(t);
            next.t2 = Some(t + cfg.window as i64);
        }
        DuplexWitness::Update(s) => {
            if st.t2.is_some_and(|t2| t >= t2) {
                return Err(Rejection::new("dispute window closed"));
            }
            if s.msg.r <= st.best_round {
                return Err(Rejection::new("stale round"));
            }
            let m = s.msg.encode();
            if !(verify(&cfg.keys[0], &m, &s.sigs[0]) && verify(&cfg.keys[1], &m, &s.sigs[1])) {
                return Err(Rejection::new("state not signed by both players"));
            }
            next.best_round = s.msg.r;
            next.net = s.msg.net;
            next.withdrawals = s.msg.withdrawals;
        }
        DuplexWitness::Withdraw => {
            let finalised = st.t2.is_some_and(|t2| t >= t2);
            let target = if finalised {
                let total = st.final_entitlement(i);
                if total < st.withdrawn[i].0 as i128 {
                    return Err(Rejection::new("insolvent co-signed state"));
                }
                CoinAmount(total as u64)
            } else {
                st.withdrawals[i].max(st.withdrawn[i])
            };
            paid = target
                .checked_sub(st.withdrawn[i])
                .map_err(|_| Rejection::new("withdrawal underflow"))?;
            next.withdrawn[i] = target;
        }
    }
    Ok((next, paid))
}

impl ContractProgram for DuplexProgram {
    type State = DuplexState;
    type Witness = DuplexWitness;
    type Update = ();

    fn kind(&self) -> ProgramKind {
        ProgramKind::Duplex
    }

    fn parties(&self) -> usize {
        2
    }

    fn required_deposit(&self, party: PartyId) -> CoinAmount {
        self.cfg.deposits[party.slot()]
    }

    fn transition(
        &self,
        party: PartyId,
        witness: &DuplexWitness,
        t: TimePoint,
        state: &DuplexState,
    ) -> Result<Transition<DuplexState>, Rejection> {
        duplex_prog(&self.cfg, party, witness, t, state).map(|(state, payout)| Transition { state, payout })
    }

    fn attached_coins(&self, witness: &DuplexWitness) -> CoinAmount {
        match witness {
            DuplexWitness::Deposit { amount } => *amount,
            _ => CoinAmount::ZERO,
        }
    }
}
