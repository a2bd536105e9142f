//! The on-ledger MSCD program: transcript continuation, settlement and top-ups.

use crate::crypto::codec;
use crate::ledger::{ContractProgram, ProgramKind, Rejection, Transition};
use crate::types::{CoinAmount, PartyId, TimePoint};

use super::validator::{MscdMessage, TranscriptValidator};
use super::{BalanceUpdate, Mode, MscdConfig, MscdState, MscdWitness};

#[derive(Clone, Debug)]
pub struct MscdProgram {
    pub cfg: MscdConfig,
}

impl MscdProgram {
    pub fn new(cfg: MscdConfig) -> Self {
        MscdProgram { cfg }
    }
}

/// Top-ups that arrived after `tv` was agreed and are therefore missing from its balances.
fn late_deposits(st: &MscdState, tv: &TranscriptValidator, slot: usize) -> u64 {
    st.deposits[slot].0 - tv.deposits[slot].0
}

/// `cash(j, TT)`: what party `slot` is owed besides its deposit.
pub fn cash(st: &MscdState, slot: usize) -> CoinAmount {
    match &st.tv {
        None => st.deposits[slot],
        Some(tv) => CoinAmount(tv.cash(slot, &st.tt).0 + late_deposits(st, tv, slot)),
    }
}

fn transcript_ok(
    cfg: &MscdConfig,
    id: i64,
    tt: &[MscdMessage],
    tv: &TranscriptValidator,
    b: &[crate::types::CoinAmount],
    sigma: &crate::crypto::SigBundle,
    st: &MscdState,
) -> bool {
    tv.id == id
        && tv.pks == cfg.keys.pks
        && tv.balances == b
        && tv.deposits.iter().zip(&st.deposits).all(|(old, now)| old <= now)
        && cfg
            .keys
            .verify_all(&codec::mscd_params(id, &tv.digest(), b), sigma)
        && tv.validate(tt)
}

pub fn mscd_pred(cfg: &MscdConfig, w: &MscdWitness, t: TimePoint, st: &MscdState) -> bool {
    match w {
        MscdWitness::Message { id, msg } => {
            st.mode == Mode::Exec
                && *id == st.id
                && st.tv.as_ref().is_some_and(|tv| tv.accepts_next(&st.tt, msg))
        }
        MscdWitness::Transcript {
            id,
            tt,
            tv,
            b,
            sigma,
        } => {
            if !transcript_ok(cfg, *id, tt, tv, b, sigma, st) {
                return false;
            }
            match st.mode {
                Mode::Init => true,
                Mode::Exec | Mode::Exit => {
                    t.signed() < st.t + cfg.window as i64
                        && (*id > st.id || (*id == st.id && tt.len() > st.tt.len()))
                }
                Mode::Payout | Mode::Abort | Mode::Inactive => false,
            }
        }
        MscdWitness::Exit => false,
    }
}

pub fn mscd_prog(
    cfg: &MscdConfig,
    j: PartyId,
    w: &MscdWitness,
    t: TimePoint,
    st: &MscdState,
) -> Result<(MscdState, CoinAmount), Rejection> {
    let slot = j.slot();
    if slot >= cfg.n {
        return Err(Rejection::new("unknown party"));
    }
    let mut next = st.clone();
    let mut e = CoinAmount::ZERO;
    let deadline_passed = t.signed() > st.t + cfg.window as i64;

    match w {
        MscdWitness::Message { msg, .. } => {
            if !mscd_pred(cfg, w, t, st) {
                return Err(Rejection::new("message does not extend the transcript"));
            }
            next.tt.push(msg.clone());
            next.t = t.signed();
        }
        MscdWitness::Transcript {
            id,
            tt,
            tv,
            b,
            sigma,
        } => {
            if !mscd_pred(cfg, w, t, st) {
                return Err(Rejection::new("transcript does not continue the contract"));
            }
            next.mode = Mode::Exec;
            next.id = *id;
            next.tt = tt.clone();
            next.t = t.signed();
            next.tv = Some(tv.clone());
            next.b = b.clone();
            next.sigma = Some(sigma.clone());
        }
        MscdWitness::Exit => {
            let complete = st.is_complete();
            let ja = st.aborter_slot();
            match st.mode {
                Mode::Init => {
                    next.mode = Mode::Exit;
                    next.t = t.signed();
                }
                Mode::Exec if complete => {
                    next.mode = Mode::Exit;
                    next.t = t.signed();
                }
                Mode::Exec | Mode::Abort if deadline_passed && st.l[slot] && !complete && slot != ja => {
                    let tv = st.tv.as_ref().ok_or_else(|| Rejection::new("no execution on chain"))?;
                    next.mode = Mode::Abort;
                    next.l[slot] = false;
                    if next.l[ja] {
                        next.l[ja] = false;
                        next.residual_due = true;
                    }
                    let n = cfg.n as u64;
                    e = CoinAmount(n * cfg.q.0 + st.b[slot].0 + late_deposits(st, tv, slot));
                }
                Mode::Abort if slot == ja && st.residual_due => {
                    // The aborter forfeits its deposit but keeps its last agreed balance.
                    let tv = st.tv.as_ref().ok_or_else(|| Rejection::new("no execution on chain"))?;
                    next.residual_due = false;
                    e = CoinAmount(st.b[slot].0 + late_deposits(st, tv, slot));
                }
                Mode::Exit | Mode::Payout if deadline_passed && st.l[slot] => {
                    e = CoinAmount(cfg.deposit().0 + cash(st, slot).0);
                    next.mode = Mode::Payout;
                    next.l[slot] = false;
                }
                _ => return Err(Rejection::new("exit not allowed in this state")),
            }
        }
    }
    if next.l.iter().all(|l| !l) && !next.residual_due {
        next.mode = Mode::Inactive;
    }
    Ok((next, e))
}

/// `Update(j, u, t)`: a fully signed balance vector that accounts for `amount` new coins.
pub fn mscd_update(
    cfg: &MscdConfig,
    j: PartyId,
    u: &BalanceUpdate,
    amount: CoinAmount,
    st: &MscdState,
) -> Result<MscdState, Rejection> {
    let slot = j.slot();
    if slot >= cfg.n {
        return Err(Rejection::new("unknown party"));
    }
    if amount.is_zero() {
        return Err(Rejection::new("top-up of zero coins"));
    }
    if matches!(st.mode, Mode::Exit | Mode::Abort | Mode::Payout | Mode::Inactive) {
        return Err(Rejection::new("top-ups closed in this mode"));
    }
    if u.balances.len() != cfg.n {
        return Err(Rejection::new("balance vector has wrong length"));
    }
    let proposed: u128 = u.balances.iter().map(|c| c.0 as u128).sum();
    let held: u128 = st.deposits.iter().map(|c| c.0 as u128).sum();
    if proposed != held + amount.0 as u128 {
        return Err(Rejection::new("balances do not account for the deposits"));
    }
    if !cfg
        .keys
        .verify_all(&codec::mscd_update(j.0, &u.balances), &u.psi)
    {
        return Err(Rejection::new("update not signed by every party"));
    }
    let mut next = st.clone();
    next.deposits[slot] = st.deposits[slot]
        .checked_add(amount)
        .map_err(|_| Rejection::new("deposit overflow"))?;
    Ok(next)
}

impl ContractProgram for MscdProgram {
    type State = MscdState;
    type Witness = MscdWitness;
    type Update = BalanceUpdate;

    fn kind(&self) -> ProgramKind {
        ProgramKind::Mscd
    }

    fn parties(&self) -> usize {
        self.cfg.n
    }

    fn required_deposit(&self, _party: PartyId) -> CoinAmount {
        self.cfg.deposit()
    }

    fn transition(
        &self,
        party: PartyId,
        witness: &MscdWitness,
        t: TimePoint,
        state: &MscdState,
    ) -> Result<Transition<MscdState>, Rejection> {
        mscd_prog(&self.cfg, party, witness, t, state).map(|(state, payout)| Transition { state, payout })
    }

    fn supports_updates(&self) -> bool {
        true
    }

    fn update(
        &self,
        party: PartyId,
        update: &BalanceUpdate,
        amount: CoinAmount,
        _t: TimePoint,
        state: &MscdState,
    ) -> Result<MscdState, Rejection> {
        mscd_update(&self.cfg, party, update, amount, state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{joint_sign, keygen_session, PartySigner, SigBundle};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    struct Fixture {
        cfg: MscdConfig,
        signers: Vec<PartySigner>,
        rng: ChaCha20Rng,
    }

    fn fixture(n: usize, q: u64) -> Fixture {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let (ring, signers) = keygen_session(n, false, &mut rng);
        let cfg = MscdConfig::new(CoinAmount(q), 3, 1, ring).unwrap();
        Fixture { cfg, signers, rng }
    }

    fn coins(v: &[u64]) -> Vec<CoinAmount> {
        v.iter().copied().map(CoinAmount).collect()
    }

    impl Fixture {
        fn sign(&mut self, m: &[u8]) -> SigBundle {
            joint_sign(&self.cfg.keys, &self.signers, m, &mut self.rng).unwrap()
        }

        fn tv(&self, id: i64, stages: u32, b: &[u64]) -> TranscriptValidator {
            TranscriptValidator::new(id, stages, self.cfg.keys.pks.clone(), coins(b), coins(b)).unwrap()
        }

        fn messages(&self, tv: &TranscriptValidator, count: usize) -> Vec<MscdMessage> {
            let mut tt = Vec::new();
            for i in 0..count {
                let s = tv.position(i).slot;
                let m = tv
                    .next_message(&tt, s, &[s as u8; 32], &[9; 32], &self.signers[s].key)
                    .unwrap();
                tt.push(m);
            }
            tt
        }

        fn witness(&mut self, tv: &TranscriptValidator, count: usize) -> MscdWitness {
            let sigma = self.sign(&codec::mscd_params(tv.id, &tv.digest(), &tv.balances));
            MscdWitness::Transcript {
                id: tv.id,
                tt: self.messages(tv, count),
                tv: tv.clone(),
                b: tv.balances.clone(),
                sigma,
            }
        }

        fn funded(&self, b: &[u64]) -> MscdState {
            let mut st = MscdState::initial(self.cfg.n);
            st.deposits = coins(b);
            st
        }
    }

    fn run(cfg: &MscdConfig, st: &mut MscdState, j: u32, w: &MscdWitness, t: u64) -> Result<CoinAmount, Rejection> {
        let (next, e) = mscd_prog(cfg, PartyId(j), w, TimePoint(t), st)?;
        *st = next;
        Ok(e)
    }

    #[test]
    fn abort_pays_compensation_plus_frozen_balance() {
        let mut f = fixture(3, 6);
        let tv = f.tv(0, 1, &[10, 4, 4]);
        // One message on chain: it is P2's turn, so P2 is the aborter.
        let w = f.witness(&tv, 1);
        let mut st = f.funded(&[10, 4, 4]);
        run(&f.cfg, &mut st, 1, &w, 1).unwrap();
        assert_eq!(st.aborter_slot(), 1);
        assert!(run(&f.cfg, &mut st, 1, &MscdWitness::Exit, 4).is_err());
        assert_eq!(run(&f.cfg, &mut st, 1, &MscdWitness::Exit, 5).unwrap(), CoinAmount(28));
        assert_eq!(st.mode, Mode::Abort);
        assert!(run(&f.cfg, &mut st, 1, &MscdWitness::Exit, 6).is_err());
        assert_eq!(run(&f.cfg, &mut st, 3, &MscdWitness::Exit, 6).unwrap(), CoinAmount(22));
        assert!(st.l.iter().all(|l| !l));
        assert_eq!(st.mode, Mode::Abort);
        // P2 collects its last agreed balance, which drains the escrow.
        assert_eq!(run(&f.cfg, &mut st, 2, &MscdWitness::Exit, 7).unwrap(), CoinAmount(4));
        assert_eq!(st.mode, Mode::Inactive);
        assert_eq!(28 + 22 + 4, 3 * 12 + 18);
    }

    #[test]
    fn completed_execution_pays_deposit_plus_cash() {
        let mut f = fixture(3, 6);
        let tv = f.tv(0, 1, &[5, 5, 5]);
        let w = f.witness(&tv, 6);
        let mut st = f.funded(&[5, 5, 5]);
        run(&f.cfg, &mut st, 1, &w, 1).unwrap();
        assert!(st.is_complete());
        run(&f.cfg, &mut st, 1, &MscdWitness::Exit, 2).unwrap();
        assert_eq!(st.mode, Mode::Exit);
        // Inputs XOR to 0^1^2 = 3 in the last byte, 3 mod 3 = 0: P1 wins.
        assert_eq!(cash(&st, 0), CoinAmount(7));
        assert!(run(&f.cfg, &mut st, 1, &MscdWitness::Exit, 5).is_err());
        assert_eq!(run(&f.cfg, &mut st, 1, &MscdWitness::Exit, 6).unwrap(), CoinAmount(19));
        assert_eq!(run(&f.cfg, &mut st, 2, &MscdWitness::Exit, 6).unwrap(), CoinAmount(16));
        assert_eq!(run(&f.cfg, &mut st, 3, &MscdWitness::Exit, 6).unwrap(), CoinAmount(16));
        assert_eq!(st.mode, Mode::Inactive);
    }

    #[test]
    fn transcript_pred_rules() {
        let mut f = fixture(3, 6);
        let tv = f.tv(0, 1, &[5, 5, 5]);
        let w = f.witness(&tv, 2);
        let mut st = f.funded(&[5, 5, 5]);
        run(&f.cfg, &mut st, 1, &w, 1).unwrap();
        // Equal id and equal length is not progress.
        assert!(!mscd_pred(&f.cfg, &w, TimePoint(2), &st));
        let longer = f.witness(&tv, 3);
        assert!(mscd_pred(&f.cfg, &longer, TimePoint(3), &st));
        // Strictly inside the window only.
        assert!(!mscd_pred(&f.cfg, &longer, TimePoint(4), &st));
        // A missing signature on (id, tv, b).
        if let MscdWitness::Transcript { id, tt, tv, b, sigma: SigBundle::Individual(mut sigs) } = longer {
            sigs[2] = sigs[0];
            let bad = MscdWitness::Transcript { id, tt, tv, b, sigma: SigBundle::Individual(sigs) };
            assert!(!mscd_pred(&f.cfg, &bad, TimePoint(2), &st));
        } else {
            panic!("individual signatures expected");
        }
    }

    #[test]
    fn message_form_extends_and_restarts_clock() {
        let mut f = fixture(2, 1);
        let tv = f.tv(4, 1, &[1, 1]);
        let w = f.witness(&tv, 0);
        let mut st = f.funded(&[1, 1]);
        run(&f.cfg, &mut st, 2, &w, 1).unwrap();
        let msgs = f.messages(&tv, 2);
        let m1 = MscdWitness::Message { id: 4, msg: msgs[0].clone() };
        let m2 = MscdWitness::Message { id: 4, msg: msgs[1].clone() };
        assert!(run(&f.cfg, &mut st, 1, &m2, 2).is_err());
        run(&f.cfg, &mut st, 1, &m1, 2).unwrap();
        assert_eq!(st.t, 2);
        assert!(run(&f.cfg, &mut st, 1, &m1, 3).is_err());
        run(&f.cfg, &mut st, 2, &m2, 3).unwrap();
        assert_eq!(st.tt.len(), 2);
    }

    #[test]
    fn update_rules() {
        let mut f = fixture(3, 6);
        let st = MscdState::initial(3);
        let b = coins(&[0, 10, 0]);
        let psi = f.sign(&codec::mscd_update(2, &b));
        let u = BalanceUpdate { balances: b, psi };
        let st2 = mscd_update(&f.cfg, PartyId(2), &u, CoinAmount(10), &st).unwrap();
        assert_eq!(st2.deposits, coins(&[0, 10, 0]));
        // Replay fails the sum check.
        assert!(mscd_update(&f.cfg, PartyId(2), &u, CoinAmount(10), &st2).is_err());
        assert!(mscd_update(&f.cfg, PartyId(2), &u, CoinAmount(0), &st).is_err());
        // Signed for P2, submitted by P1.
        assert!(mscd_update(&f.cfg, PartyId(1), &u, CoinAmount(10), &st).is_err());
        let mut paying = st.clone();
        paying.mode = Mode::Payout;
        assert!(mscd_update(&f.cfg, PartyId(2), &u, CoinAmount(10), &paying).is_err());
    }

    #[test]
    fn late_top_up_is_returned_with_cash() {
        let mut f = fixture(2, 1);
        let tv = f.tv(0, 1, &[3, 3]);
        let w = f.witness(&tv, 4);
        let mut st = f.funded(&[3, 3]);
        run(&f.cfg, &mut st, 1, &w, 1).unwrap();
        let b = coins(&[3, 3 + 2]);
        let psi = f.sign(&codec::mscd_update(2, &b));
        st = mscd_update(&f.cfg, PartyId(2), &BalanceUpdate { balances: b, psi }, CoinAmount(2), &st).unwrap();
        let total: u64 = (0..2).map(|k| cash(&st, k).0).sum();
        assert_eq!(total, 8);
    }

    #[test]
    fn exit_from_init_returns_deposits() {
        let f = fixture(2, 1);
        let mut st = f.funded(&[4, 0]);
        run(&f.cfg, &mut st, 2, &MscdWitness::Exit, 1).unwrap();
        assert_eq!(run(&f.cfg, &mut st, 1, &MscdWitness::Exit, 5).unwrap(), CoinAmount(5));
        assert_eq!(run(&f.cfg, &mut st, 2, &MscdWitness::Exit, 5).unwrap(), CoinAmount(1));
        assert_eq!(st.mode, Mode::Inactive);
    }
}
