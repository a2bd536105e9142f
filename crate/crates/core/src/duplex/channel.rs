//! Party-side channel logic: signing policy, payments and stale-state override.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{verify, PublicKey, SigKeyPair, Signature};
use crate::types::{CoinAmount, TimePoint};

use super::{ChannelStateMsg, DuplexState, DuplexWitness, SignedState};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChannelError {
    #[error("party {0} cannot cover this state")]
    Insolvent(usize),
    #[error("round {got} does not exceed last signed round {last}")]
    StaleRound { got: i64, last: i64 },
    #[error("signature does not verify")]
    BadSignature,
    #[error("proposal lowers the counter-signer's entitlement")]
    Unfavourable,
    #[error("no proposal pending for round {0}")]
    NotPending(i64),
    #[error("amount must be positive")]
    ZeroAmount,
}

/// A state signed by its proposer only.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proposal {
    pub from: usize,
    pub msg: ChannelStateMsg,
    pub sig: Signature,
}

#[derive(Clone, Debug)]
pub struct DuplexParty {
    /// 0 for the party credited by positive `net`, 1 for the other.
    pub i: usize,
    pub key: SigKeyPair,
    pub peer: PublicKey,
    pub deposits: [CoinAmount; 2],
    /// Every co-signed state, oldest first.
    pub history: Vec<SignedState>,
    pub last_signed: i64,
    pending: Option<ChannelStateMsg>,
}

impl DuplexParty {
    pub fn new(i: usize, key: SigKeyPair, peer: PublicKey, deposits: [CoinAmount; 2]) -> Self {
        DuplexParty {
            i,
            key,
            peer,
            deposits,
            history: Vec::new(),
            last_signed: 0,
            pending: None,
        }
    }

    pub fn latest(&self) -> Option<&SignedState> {
        self.history.last()
    }

    pub fn current(&self) -> ChannelStateMsg {
        self.latest().map_or(
            ChannelStateMsg {
                r: 0,
                net: 0,
                withdrawals: [CoinAmount::ZERO; 2],
            },
            |s| s.msg.clone(),
        )
    }

    /// What this party is owed under its latest co-signed state.
    pub fn entitlement(&self) -> i128 {
        self.current().entitlement(&self.deposits, self.i)
    }

    fn solvent(&self, msg: &ChannelStateMsg) -> Result<(), ChannelError> {
        for k in 0..2 {
            if msg.entitlement(&self.deposits, k) < msg.withdrawals[k].0 as i128 {
                return Err(ChannelError::Insolvent(k));
            }
        }
        Ok(())
    }

    fn propose(&mut self, net: i64, withdrawals: [CoinAmount; 2]) -> Result<Proposal, ChannelError> {
        let msg = ChannelStateMsg {
            r: self.last_signed.max(self.current().r) + 1,
            net,
            withdrawals,
        };
        self.solvent(&msg)?;
        let sig = self.key.sign(&msg.encode());
        self.last_signed = msg.r;
        self.pending = Some(msg.clone());
        Ok(Proposal { from: self.i, msg, sig })
    }

    /// Signs a payment of `amount` to the peer.
    pub fn pay(&mut self, amount: CoinAmount) -> Result<Proposal, ChannelError> {
        if amount.is_zero() {
            return Err(ChannelError::ZeroAmount);
        }
        let cur = self.current();
        let delta = amount.0 as i64;
        let net = if self.i == 0 { cur.net - delta } else { cur.net + delta };
        self.propose(net, cur.withdrawals).map_err(|e| match e {
            ChannelError::Insolvent(_) => ChannelError::Insolvent(self.i),
            e => e,
        })
    }

    /// Asks the peer to approve taking `amount` more coins out before the channel closes.
    pub fn request_withdrawal(&mut self, amount: CoinAmount) -> Result<Proposal, ChannelError> {
        let cur = self.current();
        let mut w = cur.withdrawals;
        w[self.i] = CoinAmount(w[self.i].0 + amount.0);
        self.propose(cur.net, w)
    }

    /// Re-signs `msg`'s balances at the next free round.
    pub fn reissue(&mut self, msg: &ChannelStateMsg) -> Result<Proposal, ChannelError> {
        self.propose(msg.net, msg.withdrawals)
    }

    /// Counter-signs a peer proposal if it never lowers this party's position.
    pub fn countersign(&mut self, p: &Proposal) -> Result<SignedState, ChannelError> {
        if p.from == self.i || !verify(&self.peer, &p.msg.encode(), &p.sig) {
            return Err(ChannelError::BadSignature);
        }
        let cur = self.current();
        let last = self.last_signed.max(cur.r);
        if p.msg.r <= last {
            return Err(ChannelError::StaleRound { got: p.msg.r, last });
        }
        self.solvent(&p.msg)?;
        let me = self.i;
        if p.msg.entitlement(&self.deposits, me) < cur.entitlement(&self.deposits, me)
            || p.msg.withdrawals[me] != cur.withdrawals[me]
        {
            return Err(ChannelError::Unfavourable);
        }
        let mine = self.key.sign(&p.msg.encode());
        let mut sigs = [p.sig; 2];
        sigs[me] = mine;
        let s = SignedState {
            msg: p.msg.clone(),
            sigs,
        };
        self.last_signed = p.msg.r;
        self.pending = None;
        self.history.push(s.clone());
        Ok(s)
    }

    /// Stores the peer's counter-signature on this party's pending proposal.
    pub fn accept(&mut self, s: &SignedState) -> Result<(), ChannelError> {
        if self.pending.as_ref() != Some(&s.msg) {
            return Err(ChannelError::NotPending(s.msg.r));
        }
        let m = s.msg.encode();
        let peer = 1 - self.i;
        if !verify(&self.peer, &m, &s.sigs[peer]) || !verify(&self.key.pk, &m, &s.sigs[self.i]) {
            return Err(ChannelError::BadSignature);
        }
        self.pending = None;
        self.history.push(s.clone());
        Ok(())
    }

    pub fn observe_chain(&mut self, st: &DuplexState) {
        self.deposits = st.deposits;
    }

    /// Pushes the latest co-signed state during the dispute window and collects after it.
    pub fn handle_ledger_event(&self, st: &DuplexState, now: TimePoint) -> Option<DuplexWitness> {
        let now = now.signed();
        let t2 = st.t2?;
        if now < t2 {
            return self
                .latest()
                .filter(|s| s.msg.r > st.best_round)
                .map(|s| DuplexWitness::Update(s.clone()));
        }
        (st.final_entitlement(self.i) > st.withdrawn[self.i].0 as i128).then_some(DuplexWitness::Withdraw)
    }
}

/// One payment: the payer proposes, the payee counter-signs, the payer stores the result.
pub fn channel_pay(
    parties: &mut [DuplexParty; 2],
    payer: usize,
    amount: CoinAmount,
) -> Result<SignedState, ChannelError> {
    let p = parties[payer].pay(amount)?;
    let s = parties[1 - payer].countersign(&p)?;
    parties[payer].accept(&s)?;
    Ok(s)
}

/// Both parties proposed at the same round: party 0 re-issues its state one round
/// higher and party 1 counter-signs it.
pub fn resolve_concurrent(
    parties: &mut [DuplexParty; 2],
    a: &Proposal,
    b: &Proposal,
) -> Result<SignedState, ChannelError> {
    let mine = if a.from == 0 { a } else { b };
    let p = parties[0].reissue(&mine.msg)?;
    let s = parties[1].countersign(&p)?;
    parties[0].accept(&s)?;
    Ok(s)
}
