//! Party-side MSCD logic: top-ups, local reactive executions and reactions to
//! contract events.

use std::collections::{BTreeMap, BTreeSet};

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{codec, joint_sign, sha256, PartySigner, SigBundle};
use crate::types::{CoinAmount, PartyId, TimePoint};

use super::validator::{MscdMessage, TranscriptValidator, ValidatorError, INPUT_LEN};
use super::{BalanceUpdate, Mode, MscdConfig, MscdState, MscdWitness};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PartyError {
    #[error("{party} cannot continue: {source}")]
    Continue { party: PartyId, source: ValidatorError },
    #[error("{party} would extend an invalid transcript of execution {id}")]
    InvalidTranscript { party: PartyId, id: i64 },
}

/// `best_j`: the longest fully signed transcript this party can put on chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MscdBest {
    pub id: i64,
    pub tt: Vec<MscdMessage>,
    pub tv: TranscriptValidator,
    pub b: Vec<CoinAmount>,
    pub sigma: SigBundle,
}

impl MscdBest {
    pub fn witness(&self) -> MscdWitness {
        MscdWitness::Transcript {
            id: self.id,
            tt: self.tt.clone(),
            tv: self.tv.clone(),
            b: self.b.clone(),
            sigma: self.sigma.clone(),
        }
    }
}

/// Stage input `y` and commitment randomness `ω` of one party, derived from its seed.
pub fn stage_input(seed: u64, id: i64, stage: usize, slot: usize) -> ([u8; INPUT_LEN], [u8; 32]) {
    let parts = |tag: &[u8]| {
        sha256(&[
            tag,
            &seed.to_be_bytes(),
            &id.to_be_bytes(),
            &(stage as u64).to_be_bytes(),
            &(slot as u64 + 1).to_be_bytes(),
        ])
    };
    (parts(b"lottery-input"), parts(b"lottery-rand"))
}

#[derive(Clone, Debug)]
pub struct MscdParty {
    pub j: PartyId,
    pub signer: PartySigner,
    /// Source of this party's stage inputs.
    pub seed: u64,
    pub best: Option<MscdBest>,
    /// Balances agreed off chain, including accepted top-ups.
    pub balances: Vec<CoinAmount>,
    /// Parameter agreements this party holds every signature for.
    pub agreed: BTreeMap<i64, MscdBest>,
    /// Stage winners of each execution, as far as this party has seen them.
    pub outputs: BTreeMap<i64, Vec<usize>>,
    /// Every complete transcript this party holds.
    pub history: BTreeMap<i64, MscdBest>,
}

impl MscdParty {
    pub fn new(j: PartyId, signer: PartySigner, seed: u64, n: usize) -> Self {
        MscdParty {
            j,
            signer,
            seed,
            best: None,
            balances: vec![CoinAmount::ZERO; n],
            agreed: BTreeMap::new(),
            outputs: BTreeMap::new(),
            history: BTreeMap::new(),
        }
    }

    fn best_id(&self) -> i64 {
        self.best.as_ref().map_or(-1, |b| b.id)
    }

    /// Adopts a longer or newer fully signed transcript from the chain.
    pub fn observe_chain(&mut self, st: &MscdState) {
        let (Some(tv), Some(sigma)) = (&st.tv, &st.sigma) else {
            return;
        };
        let newer = match &self.best {
            None => true,
            Some(b) => st.id > b.id || (st.id == b.id && st.tt.len() > b.tt.len()),
        };
        if newer {
            self.set_best(MscdBest {
                id: st.id,
                tt: st.tt.clone(),
                tv: tv.clone(),
                b: st.b.clone(),
                sigma: sigma.clone(),
            });
        }
    }

    fn set_best(&mut self, best: MscdBest) {
        let (b, winners) = best.tv.replay(&best.tt);
        if best.tt.len() == best.tv.len() {
            self.balances = b;
            self.history.insert(best.id, best.clone());
        }
        self.outputs.insert(best.id, winners);
        self.best = Some(best);
    }

    fn next_message(
        &self,
        tv: &TranscriptValidator,
        tt: &[MscdMessage],
    ) -> Result<MscdMessage, PartyError> {
        let slot = self.j.slot();
        let stage = tv.position(tt.len()).stage;
        let (y, omega) = stage_input(self.seed, tv.id, stage, slot);
        tv.next_message(tt, slot, &y, &omega, &self.signer.key)
            .map_err(|source| PartyError::Continue { party: self.j, source })
    }

    /// The reaction prescribed by the main protocol to contract state `st` at time `now`.
    ///
    /// Also used in `Exit` mode: a newer `best_j` is pushed so that settlement
    /// reflects the latest agreed balances.
    pub fn handle_ledger_event(
        &mut self,
        cfg: &MscdConfig,
        st: &MscdState,
        now: TimePoint,
    ) -> Result<Option<MscdWitness>, PartyError> {
        let slot = self.j.slot();
        match st.mode {
            Mode::Payout | Mode::Abort => {
                let residual = st.mode == Mode::Abort && st.residual_due && st.aborter_slot() == slot;
                return Ok((st.l[slot] || residual).then_some(MscdWitness::Exit));
            }
            Mode::Init | Mode::Inactive => return Ok(None),
            Mode::Exec | Mode::Exit => {}
        }
        let window = cfg.window as i64;
        let open = now.signed() < st.t + window;
        let expired = now.signed() > st.t + window;

        if open {
            if let Some(best) = &self.best {
                if st.id < best.id || (st.id == best.id && best.tt.len() > st.tt.len()) {
                    return Ok(Some(best.witness()));
                }
            }
        }
        if st.mode == Mode::Exec && !st.is_complete() && st.aborter_slot() == slot {
            let tv = st.tv.as_ref().expect("exec mode carries a validator");
            if !tv.validate(&st.tt) {
                return Err(PartyError::InvalidTranscript { party: self.j, id: st.id });
            }
            if st.id == self.best_id() + 1 || st.id == self.best_id() {
                let msg = self.next_message(tv, &st.tt)?;
                let mut tt = st.tt.clone();
                tt.push(msg.clone());
                self.set_best(MscdBest {
                    id: st.id,
                    tt,
                    tv: tv.clone(),
                    b: st.b.clone(),
                    sigma: st.sigma.clone().expect("exec mode carries signatures"),
                });
                return Ok(Some(MscdWitness::Message { id: st.id, msg }));
            }
        }
        if (st.mode == Mode::Exec && st.is_complete()) || expired {
            return Ok(Some(MscdWitness::Exit));
        }
        Ok(None)
    }
}

/// Step 1: party `j` proposes adding `amount` coins; everyone signs `(j, b′)`.
pub fn propose_topup<R: RngCore + CryptoRng>(
    cfg: &MscdConfig,
    parties: &[MscdParty],
    j: PartyId,
    amount: CoinAmount,
    rng: &mut R,
) -> BalanceUpdate {
    let mut balances = parties[j.slot()].balances.clone();
    balances[j.slot()] = CoinAmount(balances[j.slot()].0 + amount.0);
    let signers: Vec<PartySigner> = parties.iter().map(|p| p.signer.clone()).collect();
    let psi = joint_sign(&cfg.keys, &signers, &codec::mscd_update(j.0, &balances), rng)
        .expect("every party holds its signing material");
    BalanceUpdate { balances, psi }
}

/// Records an accepted top-up in every party's agreed balances.
pub fn apply_topup(parties: &mut [MscdParty], u: &BalanceUpdate) {
    for p in parties {
        p.balances = u.balances.clone();
    }
}

/// Which corrupt parties stop cooperating where in one execution.
#[derive(Clone, Debug, Default)]
pub struct ReactiveHooks {
    pub withhold_topup: BTreeSet<PartyId>,
    pub withhold_params: BTreeSet<PartyId>,
    /// Round (1-based) at which a party stays silent instead of sending.
    pub silent_at_round: BTreeMap<PartyId, usize>,
    pub corrupt: BTreeSet<PartyId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbortPoint {
    TopUp,
    ParamAgreement,
    Round(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReactiveOutcome {
    Completed { balances: Vec<CoinAmount>, winners: Vec<usize> },
    AbortedAt(AbortPoint),
}

/// Steps 2 and 3 of execution `id`: parameter agreement on `stages` lottery stages
/// over the parties' agreed balances, then the round-robin message exchange.
/// `deposits` is the contract's current `B`.
pub fn run_reactive_execution<R: RngCore + CryptoRng>(
    cfg: &MscdConfig,
    id: i64,
    stages: u32,
    deposits: &[CoinAmount],
    parties: &mut [MscdParty],
    hooks: &ReactiveHooks,
    rng: &mut R,
) -> Result<ReactiveOutcome, ValidatorError> {
    let b = parties[0].balances.clone();
    let tv = TranscriptValidator::new(id, stages, cfg.keys.pks.clone(), b.clone(), deposits.to_vec())?;
    let signers: Vec<PartySigner> = parties.iter().map(|p| p.signer.clone()).collect();
    let sigma = joint_sign(&cfg.keys, &signers, &codec::mscd_params(id, &tv.digest(), &b), rng)
        .expect("every party holds its signing material");
    let agreed = MscdBest {
        id,
        tt: Vec::new(),
        tv: tv.clone(),
        b,
        sigma,
    };
    if !hooks.withhold_params.is_empty() {
        // Rushing corrupt parties still collect every honest signature.
        for p in parties.iter_mut().filter(|p| hooks.corrupt.contains(&p.j)) {
            p.agreed.insert(id, agreed.clone());
        }
        return Ok(ReactiveOutcome::AbortedAt(AbortPoint::ParamAgreement));
    }
    for p in parties.iter_mut() {
        p.agreed.insert(id, agreed.clone());
        p.set_best(agreed.clone());
    }

    let mut tt: Vec<MscdMessage> = Vec::new();
    for r in 1..=tv.len() {
        let slot = tv.position(r - 1).slot;
        let sender = PartyId::from_slot(slot);
        if hooks.silent_at_round.get(&sender) == Some(&r) {
            return Ok(ReactiveOutcome::AbortedAt(AbortPoint::Round(r)));
        }
        let msg = parties[slot]
            .next_message(&tv, &tt)
            .expect("round robin hands every party its own turn");
        tt.push(msg);
        for p in parties.iter_mut() {
            let mut best = p.best.clone().expect("set at parameter agreement");
            best.tt = tt.clone();
            p.set_best(best);
        }
    }
    let (balances, winners) = tv.replay(&tt);
    Ok(ReactiveOutcome::Completed { balances, winners })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::keygen_session;
    use crate::mscd::contract::mscd_prog;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn setup(n: usize, start: u64) -> (MscdConfig, Vec<MscdParty>, ChaCha20Rng) {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let (ring, signers) = keygen_session(n, false, &mut rng);
        let cfg = MscdConfig::new(CoinAmount(n as u64 - 1), 2, 1, ring).unwrap();
        let parties = signers
            .into_iter()
            .enumerate()
            .map(|(k, s)| {
                let mut p = MscdParty::new(PartyId::from_slot(k), s, 5, n);
                p.balances = vec![CoinAmount(start); n];
                p
            })
            .collect();
        (cfg, parties, rng)
    }

    #[test]
    fn honest_execution_moves_balances() {
        let (cfg, mut parties, mut rng) = setup(3, 4);
        let deposits = vec![CoinAmount(4); 3];
        let out = run_reactive_execution(&cfg, 0, 2, &deposits, &mut parties, &ReactiveHooks::default(), &mut rng)
            .unwrap();
        let ReactiveOutcome::Completed { balances, winners } = out else {
            panic!("expected completion");
        };
        assert_eq!(winners.len(), 2);
        assert_eq!(balances.iter().map(|c| c.0).sum::<u64>(), 12);
        for p in &parties {
            assert_eq!(p.balances, balances);
            assert_eq!(p.best.as_ref().unwrap().tt.len(), 12);
        }
    }

    #[test]
    fn withheld_params_keep_previous_best() {
        let (cfg, mut parties, mut rng) = setup(2, 2);
        let hooks = ReactiveHooks {
            withhold_params: [PartyId(2)].into(),
            corrupt: [PartyId(2)].into(),
            ..Default::default()
        };
        let out = run_reactive_execution(&cfg, 0, 1, &[CoinAmount(2); 2], &mut parties, &hooks, &mut rng).unwrap();
        assert_eq!(out, ReactiveOutcome::AbortedAt(AbortPoint::ParamAgreement));
        assert!(parties[0].best.is_none());
        assert!(parties[1].agreed.contains_key(&0));
    }

    #[test]
    fn silent_party_leaves_longest_prefix() {
        let (cfg, mut parties, mut rng) = setup(3, 2);
        let hooks = ReactiveHooks {
            silent_at_round: [(PartyId(2), 5)].into(),
            corrupt: [PartyId(2)].into(),
            ..Default::default()
        };
        let out = run_reactive_execution(&cfg, 0, 1, &[CoinAmount(2); 3], &mut parties, &hooks, &mut rng).unwrap();
        assert_eq!(out, ReactiveOutcome::AbortedAt(AbortPoint::Round(5)));
        assert_eq!(parties[0].best.as_ref().unwrap().tt.len(), 4);
    }

    #[test]
    fn honest_answers_opened_execution_on_its_turn() {
        let (cfg, mut parties, mut rng) = setup(2, 1);
        let hooks = ReactiveHooks {
            withhold_params: [PartyId(2)].into(),
            corrupt: [PartyId(2)].into(),
            ..Default::default()
        };
        run_reactive_execution(&cfg, 0, 1, &[CoinAmount(1); 2], &mut parties, &hooks, &mut rng).unwrap();
        // The adversary opens execution 0 on chain with the honest signature.
        let opened = parties[1].agreed[&0].witness();
        let mut st = MscdState::initial(2);
        st.deposits = vec![CoinAmount(1); 2];
        let (st, _) = mscd_prog(&cfg, PartyId(2), &opened, TimePoint(0), &st).unwrap();
        let w = parties[0].handle_ledger_event(&cfg, &st, TimePoint(1)).unwrap();
        assert!(matches!(w, Some(MscdWitness::Message { id: 0, .. })));
        let (st, _) = mscd_prog(&cfg, PartyId(1), &w.unwrap(), TimePoint(1), &st).unwrap();
        assert_eq!(st.tt.len(), 1);
        // Not P1's turn any more and nothing newer to push.
        assert_eq!(parties[0].handle_ledger_event(&cfg, &st, TimePoint(2)).unwrap(), None);
        assert_eq!(
            parties[0].handle_ledger_event(&cfg, &st, TimePoint(4)).unwrap(),
            Some(MscdWitness::Exit)
        );
    }

    #[test]
    fn stale_transcript_is_overridden() {
        let (cfg, mut parties, mut rng) = setup(2, 2);
        run_reactive_execution(&cfg, 0, 1, &[CoinAmount(2); 2], &mut parties, &ReactiveHooks::default(), &mut rng)
            .unwrap();
        let mut stale = parties[1].best.clone().unwrap();
        stale.tt.truncate(1);
        let mut st = MscdState::initial(2);
        st.deposits = vec![CoinAmount(2); 2];
        let (st, _) = mscd_prog(&cfg, PartyId(2), &stale.witness(), TimePoint(0), &st).unwrap();
        let w = parties[0].handle_ledger_event(&cfg, &st, TimePoint(1)).unwrap().unwrap();
        let MscdWitness::Transcript { tt, .. } = &w else {
            panic!("expected the longer transcript");
        };
        assert_eq!(tt.len(), 4);
    }

    #[test]
    fn topup_is_signed_for_proposer() {
        let (cfg, mut parties, mut rng) = setup(2, 0);
        let u = propose_topup(&cfg, &parties, PartyId(1), CoinAmount(3), &mut rng);
        assert_eq!(u.balances, vec![CoinAmount(3), CoinAmount(0)]);
        apply_topup(&mut parties, &u);
        assert_eq!(parties[1].balances[0], CoinAmount(3));
    }

    #[test]
    fn stage_inputs_are_seed_dependent() {
        assert_ne!(stage_input(1, 0, 0, 0), stage_input(2, 0, 0, 0));
        assert_ne!(stage_input(1, 0, 0, 0).0, stage_input(1, 0, 0, 0).1);
    }
}
