//! Party-side MSFE logic: local executions and reactions to contract events.

use std::collections::{BTreeMap, BTreeSet};

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{codec, joint_sign, verify_open, Commitment, Opening, PartySigner, SigBundle};
use crate::types::{PartyId, TimePoint};

use super::dealer::{dealer_execute, SfeFunction};
use super::{Mode, MsfeConfig, MsfeState, MsfeTranscript, MsfeWitness};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PartyError {
    #[error("{party} holds no opening for execution {id}")]
    MissingOpening { party: PartyId, id: i64 },
}

/// `best_j`: the latest execution this party can prove on chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MsfeBest {
    pub id: i64,
    pub tt: MsfeTranscript,
}

#[derive(Clone, Debug)]
pub struct MsfeParty {
    pub j: PartyId,
    pub signer: PartySigner,
    pub best: Option<MsfeBest>,
    /// `x_j` of every execution this party received from the dealer.
    pub openings: BTreeMap<i64, Opening>,
    /// Every fully signed transcript this party has seen, with the openings it knows.
    pub views: BTreeMap<i64, MsfeTranscript>,
    pub outputs: BTreeMap<i64, Vec<u8>>,
}

impl MsfeParty {
    pub fn new(j: PartyId, signer: PartySigner) -> Self {
        MsfeParty {
            j,
            signer,
            best: None,
            openings: BTreeMap::new(),
            views: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    fn set_best(&mut self, id: i64, tt: MsfeTranscript) {
        if self.best.as_ref().is_some_and(|b| b.id > id) {
            return;
        }
        self.best = Some(MsfeBest { id, tt });
    }

    /// The reaction prescribed by the main protocol to contract state `st` at time `now`.
    ///
    /// A complete `best_j` is only pushed on chain while the contract is in `Exec`:
    /// once an execution finished off chain its output is already delivered, so an
    /// `Exit` from `Init` needs no answer.
    pub fn handle_ledger_event(
        &self,
        cfg: &MsfeConfig,
        st: &MsfeState,
        now: TimePoint,
    ) -> Result<Option<MsfeWitness>, PartyError> {
        let slot = self.j.slot();
        let expired = now.signed() > st.t + cfg.window as i64;
        match st.mode {
            Mode::Payout | Mode::Abort => {
                return Ok(st.l[slot].then_some(MsfeWitness::Exit));
            }
            Mode::Init | Mode::Inactive => return Ok(None),
            Mode::Exec | Mode::Exit => {}
        }
        if !expired {
            let on_chain_has_mine = st
                .tt
                .as_ref()
                .is_some_and(|tt| tt.x.get(slot).is_some_and(Option::is_some));
            if let Some(best) = &self.best {
                let behind = st.id < best.id || (st.id == best.id && !on_chain_has_mine);
                if behind && (!best.tt.is_complete() || st.mode == Mode::Exec) {
                    return Ok(Some(MsfeWitness::Transcript {
                        id: best.id,
                        tt: best.tt.clone(),
                    }));
                }
            }
            let best_id = self.best.as_ref().map_or(-1, |b| b.id);
            if st.id > best_id && !on_chain_has_mine {
                let tt = st.tt.as_ref().expect("exec ids above -1 carry a transcript");
                let opening = self.openings.get(&st.id).ok_or(PartyError::MissingOpening {
                    party: self.j,
                    id: st.id,
                })?;
                let mut x = vec![None; cfg.n];
                x[slot] = Some(opening.clone());
                return Ok(Some(MsfeWitness::Transcript {
                    id: st.id,
                    tt: MsfeTranscript {
                        x,
                        h: tt.h.clone(),
                        sigma: tt.sigma.clone(),
                    },
                }));
            }
        }
        let complete = st.tt.as_ref().is_some_and(MsfeTranscript::is_complete);
        if (st.mode == Mode::Exec && complete) || expired {
            return Ok(Some(MsfeWitness::Exit));
        }
        Ok(None)
    }

    /// Records an on-chain transcript that completes an execution this party follows.
    pub fn observe_chain(&mut self, st: &MsfeState) {
        if let Some(tt) = &st.tt {
            if let Some(z) = tt.output() {
                self.outputs.entry(st.id).or_insert(z);
            }
            if tt.x.get(self.j.slot()).is_some_and(Option::is_some) {
                let keep = self
                    .best
                    .as_ref()
                    .map_or(true, |b| b.id < st.id || (b.id == st.id && tt.opened() > b.tt.opened()));
                if keep {
                    self.set_best(st.id, tt.clone());
                }
            }
        }
    }
}

/// Which corrupt parties misbehave at which step of one execution.
#[derive(Clone, Debug, Default)]
pub struct ExecutionHooks {
    pub withhold_input: BTreeSet<PartyId>,
    pub withhold_signature: BTreeSet<PartyId>,
    pub withhold_share: BTreeSet<PartyId>,
    /// Parties under adversarial control; they see honest messages of a round before
    /// choosing their own.
    pub corrupt: BTreeSet<PartyId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalOutcome {
    Completed { z: Vec<u8> },
    AbortedAtStep(u8),
}

#[derive(Clone, Debug, Serialize)]
pub struct LocalExecution {
    pub id: i64,
    pub outcome: LocalOutcome,
    /// Off-chain rounds that were started (1 to 3).
    pub rounds: u8,
    pub z: Option<Vec<u8>>,
    pub h: Option<Vec<Commitment>>,
    pub adversary_learned_output: bool,
}

/// Runs the three rounds of one off-chain execution among `parties`.
pub fn run_local_execution<R: RngCore + CryptoRng>(
    cfg: &MsfeConfig,
    id: i64,
    g: &SfeFunction,
    inputs: &[Vec<u8>],
    parties: &mut [MsfeParty],
    hooks: &ExecutionHooks,
    rng: &mut R,
) -> LocalExecution {
    let n = cfg.n;
    let aborted = |step: u8, h: Option<Vec<Commitment>>, learned: bool, z: Option<Vec<u8>>| LocalExecution {
        id,
        outcome: LocalOutcome::AbortedAtStep(step),
        rounds: step,
        z,
        h,
        adversary_learned_output: learned,
    };

    // Step 1: the dealer computes and shares the output.
    if !hooks.withhold_input.is_empty() {
        return aborted(1, None, false, None);
    }
    let dealt = dealer_execute(g, inputs, rng);
    for p in parties.iter_mut() {
        p.openings.insert(id, dealt.openings[p.j.slot()].clone());
    }

    // Step 2: everyone signs (id, h).
    let msg = codec::msfe_round(id, &dealt.h);
    let signers: Vec<PartySigner> = parties.iter().map(|p| p.signer.clone()).collect();
    let sigma: SigBundle = joint_sign(&cfg.keys, &signers, &msg, rng)
        .expect("every party holds its signing material");
    let own_only = |slot: usize| {
        let mut x = vec![None; n];
        x[slot] = Some(dealt.openings[slot].clone());
        MsfeTranscript {
            x,
            h: dealt.h.clone(),
            sigma: sigma.clone(),
        }
    };
    if !hooks.withhold_signature.is_empty() {
        // Rushing corrupt parties still hold every honest signature plus their own.
        for p in parties.iter_mut().filter(|p| hooks.corrupt.contains(&p.j)) {
            let tt = own_only(p.j.slot());
            p.views.insert(id, tt);
        }
        return aborted(2, Some(dealt.h), false, None);
    }
    for p in parties.iter_mut() {
        let tt = own_only(p.j.slot());
        p.views.insert(id, tt.clone());
        p.set_best(id, tt);
    }

    // Step 3: share broadcast.
    let broadcast: Vec<Option<Opening>> = (0..n)
        .map(|k| {
            let who = PartyId::from_slot(k);
            (!hooks.withhold_share.contains(&who)).then(|| dealt.openings[k].clone())
        })
        .collect();
    debug_assert!(broadcast
        .iter()
        .zip(&dealt.h)
        .all(|(o, h)| o.as_ref().is_none_or(|o| verify_open(o, h))));
    let adversary_learned = !hooks.corrupt.is_empty();
    for p in parties.iter_mut() {
        let mut x = broadcast.clone();
        let slot = p.j.slot();
        x[slot] = Some(dealt.openings[slot].clone());
        if hooks.corrupt.contains(&p.j) {
            // The coalition pools its own openings.
            for c in &hooks.corrupt {
                x[c.slot()] = Some(dealt.openings[c.slot()].clone());
            }
        }
        let tt = MsfeTranscript {
            x,
            h: dealt.h.clone(),
            sigma: sigma.clone(),
        };
        if let Some(z) = tt.output() {
            p.outputs.insert(id, z);
        }
        p.views.insert(id, tt.clone());
        p.set_best(id, tt);
    }
    if hooks.withhold_share.is_empty() {
        LocalExecution {
            id,
            outcome: LocalOutcome::Completed { z: dealt.z.clone() },
            rounds: 3,
            z: Some(dealt.z),
            h: Some(dealt.h),
            adversary_learned_output: adversary_learned,
        }
    } else {
        aborted(3, Some(dealt.h), adversary_learned, Some(dealt.z))
    }
}
