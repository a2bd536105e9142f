//! The on-ledger MSFE program.

use crate::crypto::{codec, verify_open};
use crate::ledger::{ContractProgram, ProgramKind, Rejection, Transition};
use crate::types::{CoinAmount, PartyId, TimePoint};

use super::{Mode, MsfeConfig, MsfeState, MsfeTranscript, MsfeWitness};

#[derive(Clone, Debug)]
pub struct MsfeProgram {
    pub cfg: MsfeConfig,
}

impl MsfeProgram {
    pub fn new(cfg: MsfeConfig) -> Self {
        MsfeProgram { cfg }
    }
}

fn well_formed(cfg: &MsfeConfig, id: i64, tt: &MsfeTranscript) -> bool {
    let n = cfg.n;
    tt.x.len() == n
        && tt.h.len() == n
        && cfg.keys.verify_all(&codec::msfe_round(id, &tt.h), &tt.sigma)
        && tt
            .x
            .iter()
            .zip(&tt.h)
            .all(|(x, h)| x.as_ref().is_none_or(|o| verify_open(o, h)))
}

/// Whether a transcript witness is a valid continuation of `st`.
pub fn pred(cfg: &MsfeConfig, id: i64, tt: &MsfeTranscript, t: TimePoint, st: &MsfeState) -> bool {
    if !well_formed(cfg, id, tt) {
        return false;
    }
    match st.mode {
        Mode::Init => true,
        Mode::Exec | Mode::Exit => {
            if t.signed() > st.t + cfg.window as i64 {
                return false;
            }
            if id > st.id {
                return true;
            }
            if id < st.id {
                return false;
            }
            let Some(cur) = &st.tt else {
                return true;
            };
            // Same execution: the commitments must match and something new must be opened.
            cur.h == tt.h
                && tt
                    .x
                    .iter()
                    .zip(&cur.x)
                    .any(|(new, old)| new.is_some() && old.is_none())
        }
        Mode::Payout | Mode::Abort | Mode::Inactive => false,
    }
}

/// One step of the contract. `Err` is ⊥.
pub fn prog(
    cfg: &MsfeConfig,
    j: PartyId,
    w: &MsfeWitness,
    t: TimePoint,
    st: &MsfeState,
) -> Result<(MsfeState, CoinAmount), Rejection> {
    let n = cfg.n as u64;
    let slot = j.slot();
    if slot >= cfg.n {
        return Err(Rejection::new("unknown party"));
    }
    let mut next = st.clone();
    let mut e = CoinAmount::ZERO;
    let deadline_passed = t.signed() > st.t + cfg.window as i64;

    match w {
        MsfeWitness::Transcript { id, tt } => {
            if !pred(cfg, *id, tt, t, st) {
                return Err(Rejection::new("transcript does not continue the contract"));
            }
            match (&mut next.tt, st.id == *id) {
                (Some(cur), true) => {
                    for (mine, theirs) in cur.x.iter_mut().zip(&tt.x) {
                        if mine.is_none() {
                            mine.clone_from(theirs);
                        }
                    }
                }
                _ => next.tt = Some(tt.clone()),
            }
            next.mode = Mode::Exec;
            next.id = *id;
            next.t = t.signed();
        }
        MsfeWitness::Exit => {
            let complete = st.tt.as_ref().is_some_and(MsfeTranscript::is_complete);
            match st.mode {
                Mode::Init => {
                    next.mode = Mode::Exit;
                    next.t = t.signed();
                }
                Mode::Exec if complete => {
                    next.mode = Mode::Exit;
                    next.t = t.signed();
                }
                Mode::Exec | Mode::Abort if deadline_passed && st.l[slot] && !complete => {
                    let tt = st.tt.as_ref().ok_or_else(|| Rejection::new("no transcript"))?;
                    next.mode = Mode::Abort;
                    next.l[slot] = false;
                    for (k, x) in tt.x.iter().enumerate() {
                        if x.is_none() {
                            next.l[k] = false;
                        }
                    }
                    if tt.x[slot].is_some() {
                        // q is a multiple of lcm(1..=n), so this division is exact.
                        e = CoinAmount(n * (n - 1) * cfg.q.0 / tt.opened() as u64);
                    }
                }
                Mode::Exit | Mode::Payout if deadline_passed && st.l[slot] => {
                    e = cfg.deposit();
                    next.mode = Mode::Payout;
                    next.l[slot] = false;
                }
                _ => return Err(Rejection::new("exit not allowed in this state")),
            }
        }
    }
    if next.l.iter().all(|l| !l) {
        next.mode = Mode::Inactive;
    }
    Ok((next, e))
}

impl ContractProgram for MsfeProgram {
    type State = MsfeState;
    type Witness = MsfeWitness;
    type Update = ();

    fn kind(&self) -> ProgramKind {
        ProgramKind::Msfe
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
        witness: &MsfeWitness,
        t: TimePoint,
        state: &MsfeState,
    ) -> Result<Transition<MsfeState>, Rejection> {
        prog(&self.cfg, party, witness, t, state).map(|(state, payout)| Transition { state, payout })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{commit, joint_sign, keygen_session, Opening, PartySigner};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    struct Fixture {
        cfg: MsfeConfig,
        signers: Vec<PartySigner>,
        rng: ChaCha20Rng,
    }

    fn fixture(n: usize, q: u64) -> Fixture {
        let mut rng = ChaCha20Rng::seed_from_u64(n as u64);
        let (ring, signers) = keygen_session(n, false, &mut rng);
        let cfg = MsfeConfig::new(CoinAmount(q), 3, 1, ring).unwrap();
        Fixture { cfg, signers, rng }
    }

    impl Fixture {
        /// A signed transcript for execution `id` with the openings of `open` revealed.
        fn transcript(&mut self, id: i64, open: &[usize]) -> (MsfeTranscript, Vec<Opening>) {
            let openings: Vec<Opening> = (0..self.cfg.n)
                .map(|k| Opening::new(vec![k as u8, id as u8], [id as u8; 32]))
                .collect();
            let h: Vec<_> = openings.iter().map(commit).collect();
            let sigma = joint_sign(&self.cfg.keys, &self.signers, &codec::msfe_round(id, &h), &mut self.rng)
                .unwrap();
            let x = (0..self.cfg.n)
                .map(|k| open.contains(&k).then(|| openings[k].clone()))
                .collect();
            (MsfeTranscript { x, h, sigma }, openings)
        }
    }

    fn step(f: &Fixture, j: u32, w: &MsfeWitness, t: u64, st: &MsfeState) -> (MsfeState, CoinAmount) {
        prog(&f.cfg, PartyId(j), w, TimePoint(t), st).unwrap()
    }

    #[test]
    fn exit_from_init() {
        let f = fixture(3, 6);
        let (st, e) = step(&f, 1, &MsfeWitness::Exit, 4, &MsfeState::initial(3));
        assert_eq!(st.mode, Mode::Exit);
        assert_eq!(st.t, 4);
        assert_eq!(e, CoinAmount::ZERO);
    }

    #[test]
    fn pred_accepts_fresh_signed_transcript_in_init() {
        let mut f = fixture(3, 6);
        let (tt, _) = f.transcript(1, &[0]);
        assert!(pred(&f.cfg, 1, &tt, TimePoint(0), &MsfeState::initial(3)));
    }

    #[test]
    fn pred_rejects_older_id_and_nothing_new() {
        let mut f = fixture(3, 6);
        let (tt5, _) = f.transcript(5, &[0]);
        let (st, _) = step(&f, 1, &MsfeWitness::Transcript { id: 5, tt: tt5.clone() }, 1, &MsfeState::initial(3));
        let (tt4, _) = f.transcript(4, &[0, 1, 2]);
        assert!(!pred(&f.cfg, 4, &tt4, TimePoint(2), &st));
        assert!(!pred(&f.cfg, 5, &tt5, TimePoint(2), &st));
        let (more, _) = f.transcript(5, &[1]);
        assert!(pred(&f.cfg, 5, &more, TimePoint(2), &st));
        // Too late.
        assert!(!pred(&f.cfg, 5, &more, TimePoint(5), &st));
    }

    #[test]
    fn missing_signature_fails_pred() {
        let mut f = fixture(3, 6);
        let (mut tt, _) = f.transcript(1, &[0]);
        if let crate::crypto::SigBundle::Individual(s) = &mut tt.sigma {
            s[2] = s[1];
        }
        assert!(!pred(&f.cfg, 1, &tt, TimePoint(0), &MsfeState::initial(3)));
    }

    #[test]
    fn abort_pays_deposit_plus_compensation_and_drains() {
        let mut f = fixture(3, 6);
        let (tt, _) = f.transcript(1, &[0, 1]);
        let w = MsfeWitness::Transcript { id: 1, tt };
        let (st, _) = step(&f, 1, &w, 10, &MsfeState::initial(3));
        // Too early to abort.
        assert!(prog(&f.cfg, PartyId(1), &MsfeWitness::Exit, TimePoint(13), &st).is_err());

        let (st, e1) = step(&f, 1, &MsfeWitness::Exit, 14, &st);
        assert_eq!(st.mode, Mode::Abort);
        assert_eq!(e1, CoinAmount(18));
        assert_eq!(st.l, vec![false, true, false]);

        // The frozen transcript can no longer be extended.
        let (full, _) = f.transcript(1, &[2]);
        assert!(prog(&f.cfg, PartyId(3), &MsfeWitness::Transcript { id: 1, tt: full }, TimePoint(14), &st).is_err());
        assert!(prog(&f.cfg, PartyId(3), &MsfeWitness::Exit, TimePoint(15), &st).is_err());

        let (st, e2) = step(&f, 2, &MsfeWitness::Exit, 15, &st);
        assert_eq!(e2, CoinAmount(18));
        assert_eq!(st.mode, Mode::Inactive);
        assert_eq!(e1.0 + e2.0, 36);
    }

    #[test]
    fn non_opener_forfeits() {
        let mut f = fixture(3, 6);
        let (tt, _) = f.transcript(1, &[0, 1]);
        let (st, _) = step(&f, 1, &MsfeWitness::Transcript { id: 1, tt }, 0, &MsfeState::initial(3));
        let (st, e) = step(&f, 3, &MsfeWitness::Exit, 4, &st);
        assert_eq!(e, CoinAmount::ZERO);
        assert_eq!(st.mode, Mode::Abort);
        assert_eq!(st.l, vec![true, true, false]);
    }

    #[test]
    fn payout_after_complete_exec() {
        let mut f = fixture(3, 6);
        let (tt, _) = f.transcript(2, &[0, 1, 2]);
        let (st, _) = step(&f, 1, &MsfeWitness::Transcript { id: 2, tt }, 0, &MsfeState::initial(3));
        let (st, _) = step(&f, 2, &MsfeWitness::Exit, 1, &st);
        assert_eq!(st.mode, Mode::Exit);
        assert!(prog(&f.cfg, PartyId(2), &MsfeWitness::Exit, TimePoint(4), &st).is_err());
        let (st, e) = step(&f, 2, &MsfeWitness::Exit, 5, &st);
        assert_eq!((st.mode, e), (Mode::Payout, CoinAmount(12)));
        assert!(prog(&f.cfg, PartyId(2), &MsfeWitness::Exit, TimePoint(6), &st).is_err());
    }

    #[test]
    fn exit_during_incomplete_exec_waits_for_deadline() {
        let mut f = fixture(2, 2);
        let (tt, _) = f.transcript(1, &[0]);
        let (st, _) = step(&f, 1, &MsfeWitness::Transcript { id: 1, tt }, 0, &MsfeState::initial(2));
        assert!(prog(&f.cfg, PartyId(1), &MsfeWitness::Exit, TimePoint(3), &st).is_err());
        let (_, e) = step(&f, 1, &MsfeWitness::Exit, 4, &st);
        assert_eq!(e, CoinAmount(4));
    }
}
