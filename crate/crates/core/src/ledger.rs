//! Deterministic simulated ledger hosting stateful contract instances.
//!
//! Parties hold wallets; contract instances hold escrow. Triggers submitted during
//! tick `t` carry time `t` and are processed when the ledger advances to `t + 1`,
//! round-robin over the submitting parties so that no party gets two triggers in
//! before another party's first one. Every accepted trigger yields exactly one
//! [`LedgerEvent`], visible to all subscribers in the tick it was processed.
//! Rejected triggers are reported in the [`TickReport`] but produce no event.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{CoinAmount, CoinError, PartyId, TimePoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContractId(pub u64);

impl fmt::Display for ContractId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "contract#{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProgramKind {
    Msfe,
    Mscd,
    Duplex,
}

/// Why a contract program refused a trigger (the program returned ⊥).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rejection(pub String);

impl Rejection {
    pub fn new(reason: impl Into<String>) -> Self {
        Rejection(reason.into())
    }
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Result of a successful program step: the next state and the payout to the trigger's sender.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transition<S> {
    pub state: S,
    pub payout: CoinAmount,
}

/// A contract program: the `Prog` (and optionally `Update`) of a stateful contract.
pub trait ContractProgram {
    type State: Clone + fmt::Debug + Serialize;
    type Witness: Clone + fmt::Debug + Serialize;
    type Update: Clone + fmt::Debug + Serialize;

    fn kind(&self) -> ProgramKind;

    fn parties(&self) -> usize;

    /// The exact deposit party `party` must provide to fund a new instance.
    fn required_deposit(&self, party: PartyId) -> CoinAmount;

    fn transition(
        &self,
        party: PartyId,
        witness: &Self::Witness,
        t: TimePoint,
        state: &Self::State,
    ) -> Result<Transition<Self::State>, Rejection>;

    /// Coins that travel with a trigger and are absorbed into escrow if it is accepted.
    fn attached_coins(&self, _witness: &Self::Witness) -> CoinAmount {
        CoinAmount::ZERO
    }

    fn supports_updates(&self) -> bool {
        false
    }

    fn update(
        &self,
        _party: PartyId,
        _update: &Self::Update,
        _amount: CoinAmount,
        _t: TimePoint,
        _state: &Self::State,
    ) -> Result<Self::State, Rejection> {
        Err(Rejection::new("program does not accept updates"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("ledger needs at least two parties, got {0}")]
    TooFewParties(usize),
    #[error("unknown party {0}")]
    UnknownParty(PartyId),
    #[error("unknown contract instance {0}")]
    UnknownInstance(ContractId),
    #[error("{party} deposited {got}, program requires exactly {expected}")]
    WrongDepositAmount {
        party: PartyId,
        expected: CoinAmount,
        got: CoinAmount,
    },
    #[error("{0} already deposited into this instance")]
    DuplicateDeposit(PartyId),
    #[error("{party} holds {available}, cannot move {requested}")]
    InsufficientFunds {
        party: PartyId,
        available: CoinAmount,
        requested: CoinAmount,
    },
    #[error("funding deadline {0} has passed")]
    DeadlinePassed(TimePoint),
    #[error("instance {0} has terminated")]
    InstanceTerminated(ContractId),
    #[error("instance {0} is not funded yet")]
    NotFunded(ContractId),
    #[error("trigger time {got} does not match the current tick {expected}")]
    WrongTick { expected: TimePoint, got: TimePoint },
    #[error("program of instance {0} does not accept updates")]
    UpdatesNotSupported(ContractId),
    #[error("payout {payout} exceeds escrow {escrow} of {instance}")]
    PayoutExceedsEscrow {
        instance: ContractId,
        payout: CoinAmount,
        escrow: CoinAmount,
    },
    #[error(transparent)]
    Coins(#[from] CoinError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceStatus {
    Funding,
    Live,
    Terminated,
    Refunded,
}

#[derive(Clone, Debug)]
pub struct ContractInstance<P: ContractProgram> {
    pub id: ContractId,
    pub program: P,
    pub state: P::State,
    pub escrow: CoinAmount,
    pub created_at: TimePoint,
    pub deadline: TimePoint,
    pub status: InstanceStatus,
    deposits: Vec<Option<CoinAmount>>,
}

impl<P: ContractProgram> ContractInstance<P> {
    pub fn deposit_of(&self, party: PartyId) -> Option<CoinAmount> {
        self.deposits.get(party.slot()).copied().flatten()
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "value")]
pub enum Action<W, U> {
    Trigger(W),
    Update { update: U, amount: CoinAmount },
}

/// Broadcast to every subscriber for each accepted trigger or update.
#[derive(Clone, Debug, Serialize)]
pub struct LedgerEvent<S> {
    pub instance: ContractId,
    pub origin: PartyId,
    pub time: TimePoint,
    pub processed_at: TimePoint,
    pub new_state: S,
    pub payout: CoinAmount,
    pub payee: PartyId,
    pub absorbed: CoinAmount,
    pub escrow_after: CoinAmount,
    pub terminated: bool,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "snake_case", tag = "result")]
pub enum ActionResult<S> {
    Accepted { event: LedgerEvent<S> },
    Rejected { reason: String },
}

#[derive(Clone, Debug, Serialize)]
pub struct ProcessedAction<P: ContractProgram> {
    pub seq: u64,
    pub instance: ContractId,
    pub party: PartyId,
    pub time: TimePoint,
    pub action: Action<P::Witness, P::Update>,
    pub result: ActionResult<P::State>,
}

impl<P: ContractProgram> ProcessedAction<P> {
    pub fn event(&self) -> Option<&LedgerEvent<P::State>> {
        match &self.result {
            ActionResult::Accepted { event } => Some(event),
            ActionResult::Rejected { .. } => None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Refund {
    pub instance: ContractId,
    pub party: PartyId,
    pub amount: CoinAmount,
}

#[derive(Clone, Debug)]
pub struct TickReport<P: ContractProgram> {
    pub tick: TimePoint,
    pub processed: Vec<ProcessedAction<P>>,
    pub refunds: Vec<Refund>,
}

impl<P: ContractProgram> TickReport<P> {
    pub fn events(&self) -> impl Iterator<Item = &LedgerEvent<P::State>> {
        self.processed.iter().filter_map(|p| p.event())
    }
}

#[derive(Clone, Debug)]
struct Queued<P: ContractProgram> {
    seq: u64,
    instance: ContractId,
    party: PartyId,
    time: TimePoint,
    action: Action<P::Witness, P::Update>,
}

/// Order in which queued items are processed at `tick`: round-robin over parties
/// starting at slot `tick mod n`, FIFO within a party. Returns indices into `parties`.
pub fn fair_order(parties: &[PartyId], n: usize, tick: TimePoint) -> Vec<usize> {
    let mut per_party: Vec<VecDeque<usize>> = vec![VecDeque::new(); n];
    for (i, p) in parties.iter().enumerate() {
        per_party[p.slot()].push_back(i);
    }
    let start = (tick.0 % n as u64) as usize;
    let mut order = Vec::with_capacity(parties.len());
    while order.len() < parties.len() {
        for k in 0..n {
            if let Some(i) = per_party[(start + k) % n].pop_front() {
                order.push(i);
            }
        }
    }
    order
}

/// A single-program ledger with `n` parties.
#[derive(Clone, Debug)]
pub struct Ledger<P: ContractProgram> {
    tick: TimePoint,
    wallets: Vec<CoinAmount>,
    instances: Vec<ContractInstance<P>>,
    queue: Vec<Queued<P>>,
    next_seq: u64,
}

impl<P: ContractProgram + Clone> Ledger<P> {
    pub fn new(wallets: Vec<CoinAmount>) -> Result<Self, LedgerError> {
        if wallets.len() < 2 {
            return Err(LedgerError::TooFewParties(wallets.len()));
        }
        Ok(Ledger {
            tick: TimePoint::ZERO,
            wallets,
            instances: Vec::new(),
            queue: Vec::new(),
            next_seq: 0,
        })
    }

    pub fn tick(&self) -> TimePoint {
        self.tick
    }

    pub fn parties(&self) -> usize {
        self.wallets.len()
    }

    pub fn wallet(&self, party: PartyId) -> CoinAmount {
        self.wallets[party.slot()]
    }

    pub fn wallets(&self) -> &[CoinAmount] {
        &self.wallets
    }

    pub fn instance(&self, id: ContractId) -> Result<&ContractInstance<P>, LedgerError> {
        self.instances
            .get(id.0 as usize)
            .ok_or(LedgerError::UnknownInstance(id))
    }

    pub fn state(&self, id: ContractId) -> Result<&P::State, LedgerError> {
        Ok(&self.instance(id)?.state)
    }

    pub fn escrow(&self, id: ContractId) -> Result<CoinAmount, LedgerError> {
        Ok(self.instance(id)?.escrow)
    }

    /// Wallets plus every escrow. Constant across a run.
    pub fn total_coins(&self) -> Result<CoinAmount, LedgerError> {
        let wallets = CoinAmount::sum(self.wallets.iter().copied())?;
        let escrow = CoinAmount::sum(self.instances.iter().map(|i| i.escrow))?;
        Ok(wallets.checked_add(escrow)?)
    }

    fn check_party(&self, party: PartyId) -> Result<(), LedgerError> {
        if party.0 == 0 || party.slot() >= self.wallets.len() {
            return Err(LedgerError::UnknownParty(party));
        }
        Ok(())
    }

    fn take_from_wallet(&mut self, party: PartyId, amount: CoinAmount) -> Result<(), LedgerError> {
        let available = self.wallets[party.slot()];
        self.wallets[party.slot()] =
            available
                .checked_sub(amount)
                .map_err(|_| LedgerError::InsufficientFunds {
                    party,
                    available,
                    requested: amount,
                })?;
        Ok(())
    }

    /// Opens a contract instance. Deposits already present in `deposits` are moved
    /// into escrow; the instance goes live once all `n` parties have funded it, and
    /// is refunded if the deadline passes first.
    pub fn create_contract(
        &mut self,
        program: P,
        initial_state: P::State,
        deposits: &BTreeMap<PartyId, CoinAmount>,
        deadline: TimePoint,
    ) -> Result<ContractId, LedgerError> {
        for (&party, &amount) in deposits {
            self.check_party(party)?;
            let expected = program.required_deposit(party);
            if amount != expected {
                return Err(LedgerError::WrongDepositAmount {
                    party,
                    expected,
                    got: amount,
                });
            }
            if self.wallets[party.slot()] < amount {
                return Err(LedgerError::InsufficientFunds {
                    party,
                    available: self.wallets[party.slot()],
                    requested: amount,
                });
            }
        }
        let id = ContractId(self.instances.len() as u64);
        let n = self.wallets.len();
        self.instances.push(ContractInstance {
            id,
            program,
            state: initial_state,
            escrow: CoinAmount::ZERO,
            created_at: self.tick,
            deadline,
            status: InstanceStatus::Funding,
            deposits: vec![None; n],
        });
        for (&party, &amount) in deposits {
            self.deposit(id, party, amount)?;
        }
        Ok(id)
    }

    /// Funds a pending instance on behalf of `party`.
    pub fn deposit(
        &mut self,
        id: ContractId,
        party: PartyId,
        amount: CoinAmount,
    ) -> Result<InstanceStatus, LedgerError> {
        self.check_party(party)?;
        let tick = self.tick;
        let inst = self.instance(id)?;
        if inst.status != InstanceStatus::Funding || inst.deposit_of(party).is_some() {
            return Err(LedgerError::DuplicateDeposit(party));
        }
        if tick > inst.deadline {
            return Err(LedgerError::DeadlinePassed(inst.deadline));
        }
        let expected = inst.program.required_deposit(party);
        if amount != expected {
            return Err(LedgerError::WrongDepositAmount {
                party,
                expected,
                got: amount,
            });
        }
        self.take_from_wallet(party, amount)?;
        let inst = &mut self.instances[id.0 as usize];
        inst.escrow = inst.escrow.checked_add(amount)?;
        inst.deposits[party.slot()] = Some(amount);
        if inst.deposits.iter().all(Option::is_some) {
            inst.status = InstanceStatus::Live;
        }
        Ok(inst.status)
    }

    fn check_live(&self, id: ContractId) -> Result<&ContractInstance<P>, LedgerError> {
        let inst = self.instance(id)?;
        match inst.status {
            InstanceStatus::Live => Ok(inst),
            InstanceStatus::Funding => Err(LedgerError::NotFunded(id)),
            InstanceStatus::Terminated | InstanceStatus::Refunded => {
                Err(LedgerError::InstanceTerminated(id))
            }
        }
    }

    fn enqueue(
        &mut self,
        id: ContractId,
        party: PartyId,
        t: TimePoint,
        action: Action<P::Witness, P::Update>,
    ) -> Result<u64, LedgerError> {
        if t != self.tick {
            return Err(LedgerError::WrongTick {
                expected: self.tick,
                got: t,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Queued {
            seq,
            instance: id,
            party,
            time: t,
            action,
        });
        Ok(seq)
    }

    /// Queues `witness` for processing at the next tick. Returns a sequence number
    /// that identifies the trigger in the resulting [`TickReport`].
    pub fn submit_trigger(
        &mut self,
        id: ContractId,
        party: PartyId,
        witness: P::Witness,
        t: TimePoint,
    ) -> Result<u64, LedgerError> {
        self.check_party(party)?;
        self.check_live(id)?;
        self.enqueue(id, party, t, Action::Trigger(witness))
    }

    /// Queues a coin-carrying update; the coins only leave the wallet if it is accepted.
    pub fn submit_update(
        &mut self,
        id: ContractId,
        party: PartyId,
        update: P::Update,
        amount: CoinAmount,
        t: TimePoint,
    ) -> Result<u64, LedgerError> {
        self.check_party(party)?;
        let inst = self.check_live(id)?;
        if !inst.program.supports_updates() {
            return Err(LedgerError::UpdatesNotSupported(id));
        }
        self.enqueue(id, party, t, Action::Update { update, amount })
    }

    /// Advances time by one tick, processing everything queued during the previous one.
    pub fn advance_tick(&mut self) -> Result<TickReport<P>, LedgerError> {
        self.tick = self.tick.next();
        let queued = std::mem::take(&mut self.queue);
        let parties: Vec<PartyId> = queued.iter().map(|q| q.party).collect();
        let order = fair_order(&parties, self.wallets.len(), self.tick);
        let mut slots: Vec<Option<Queued<P>>> = queued.into_iter().map(Some).collect();

        let mut processed = Vec::with_capacity(order.len());
        for i in order {
            let item = slots[i].take().expect("each queued item is processed once");
            let result = self.process(&item)?;
            processed.push(ProcessedAction {
                seq: item.seq,
                instance: item.instance,
                party: item.party,
                time: item.time,
                action: item.action,
                result,
            });
        }

        let refunds = self.expire_funding()?;
        Ok(TickReport {
            tick: self.tick,
            processed,
            refunds,
        })
    }

    fn process(&mut self, item: &Queued<P>) -> Result<ActionResult<P::State>, LedgerError> {
        let tick = self.tick;
        let inst = &self.instances[item.instance.0 as usize];
        if inst.status != InstanceStatus::Live {
            return Ok(ActionResult::Rejected {
                reason: "instance terminated".into(),
            });
        }
        let (attached, outcome) = match &item.action {
            Action::Trigger(w) => {
                let attached = inst.program.attached_coins(w);
                (
                    attached,
                    inst.program.transition(item.party, w, item.time, &inst.state),
                )
            }
            Action::Update { update, amount } => (
                *amount,
                inst.program
                    .update(item.party, update, *amount, item.time, &inst.state)
                    .map(|state| Transition {
                        state,
                        payout: CoinAmount::ZERO,
                    }),
            ),
        };
        let transition = match outcome {
            Ok(tr) => tr,
            Err(rejection) => {
                return Ok(ActionResult::Rejected {
                    reason: rejection.0,
                })
            }
        };
        if self.wallets[item.party.slot()] < attached {
            return Ok(ActionResult::Rejected {
                reason: format!("{} cannot cover attached {}", item.party, attached),
            });
        }
        let available = inst.escrow.checked_add(attached)?;
        if transition.payout > available {
            return Err(LedgerError::PayoutExceedsEscrow {
                instance: item.instance,
                payout: transition.payout,
                escrow: available,
            });
        }

        self.take_from_wallet(item.party, attached)?;
        let slot = item.party.slot();
        self.wallets[slot] = self.wallets[slot].checked_add(transition.payout)?;
        let inst = &mut self.instances[item.instance.0 as usize];
        inst.escrow = available.checked_sub(transition.payout)?;
        inst.state = transition.state;
        let terminated = inst.escrow.is_zero();
        if terminated {
            inst.status = InstanceStatus::Terminated;
        }
        Ok(ActionResult::Accepted {
            event: LedgerEvent {
                instance: item.instance,
                origin: item.party,
                time: item.time,
                processed_at: tick,
                new_state: inst.state.clone(),
                payout: transition.payout,
                payee: item.party,
                absorbed: attached,
                escrow_after: inst.escrow,
                terminated,
            },
        })
    }

    fn expire_funding(&mut self) -> Result<Vec<Refund>, LedgerError> {
        let mut refunds = Vec::new();
        let tick = self.tick;
        for inst in &mut self.instances {
            if inst.status != InstanceStatus::Funding || tick <= inst.deadline {
                continue;
            }
            for (slot, dep) in inst.deposits.iter_mut().enumerate() {
                if let Some(amount) = dep.take() {
                    self.wallets[slot] = self.wallets[slot].checked_add(amount)?;
                    inst.escrow = inst.escrow.checked_sub(amount)?;
                    refunds.push(Refund {
                        instance: inst.id,
                        party: PartyId::from_slot(slot),
                        amount,
                    });
                }
            }
            inst.status = InstanceStatus::Refunded;
        }
        Ok(refunds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// A counter contract: each trigger pays its witness value to the sender.
    #[derive(Clone, Debug)]
    struct Payer {
        n: usize,
        deposit: u64,
    }

    impl ContractProgram for Payer {
        type State = u64;
        type Witness = u64;
        type Update = ();

        fn kind(&self) -> ProgramKind {
            ProgramKind::Msfe
        }

        fn parties(&self) -> usize {
            self.n
        }

        fn required_deposit(&self, _party: PartyId) -> CoinAmount {
            CoinAmount(self.deposit)
        }

        fn transition(
            &self,
            _party: PartyId,
            witness: &u64,
            _t: TimePoint,
            state: &u64,
        ) -> Result<Transition<u64>, Rejection> {
            if *witness == 999 {
                return Err(Rejection::new("malformed"));
            }
            Ok(Transition {
                state: state + 1,
                payout: CoinAmount(*witness),
            })
        }
    }

    fn funded(n: usize) -> (Ledger<Payer>, ContractId) {
        let mut ledger = Ledger::new(vec![CoinAmount(100); n]).unwrap();
        let deposits = PartyId::all(n).map(|p| (p, CoinAmount(12))).collect();
        let id = ledger
            .create_contract(Payer { n, deposit: 12 }, 0, &deposits, TimePoint(5))
            .unwrap();
        (ledger, id)
    }

    #[test]
    fn full_funding_goes_live() {
        let (ledger, id) = funded(3);
        assert_eq!(ledger.escrow(id).unwrap(), CoinAmount(36));
        assert_eq!(ledger.instance(id).unwrap().status, InstanceStatus::Live);
    }

    #[test]
    fn underfunded_contract_is_refunded_after_deadline() {
        let mut ledger: Ledger<Payer> = Ledger::new(vec![CoinAmount(100); 2]).unwrap();
        let deposits = [(PartyId(1), CoinAmount(12))].into_iter().collect();
        let id = ledger
            .create_contract(Payer { n: 2, deposit: 12 }, 0, &deposits, TimePoint(1))
            .unwrap();
        assert_eq!(ledger.wallet(PartyId(1)), CoinAmount(88));
        ledger.advance_tick().unwrap();
        let report = ledger.advance_tick().unwrap();
        assert_eq!(report.refunds.len(), 1);
        assert_eq!(report.refunds[0].amount, CoinAmount(12));
        assert_eq!(ledger.wallet(PartyId(1)), CoinAmount(100));
        assert_eq!(ledger.instance(id).unwrap().status, InstanceStatus::Refunded);
        assert!(matches!(
            ledger.submit_trigger(id, PartyId(1), 0, ledger.tick()),
            Err(LedgerError::InstanceTerminated(_))
        ));
    }

    #[test]
    fn wrong_and_duplicate_deposits_are_refused() {
        let mut ledger: Ledger<Payer> = Ledger::new(vec![CoinAmount(100); 3]).unwrap();
        let deposits = [(PartyId(2), CoinAmount(11))].into_iter().collect();
        assert_eq!(
            ledger.create_contract(Payer { n: 3, deposit: 12 }, 0, &deposits, TimePoint(5)),
            Err(LedgerError::WrongDepositAmount {
                party: PartyId(2),
                expected: CoinAmount(12),
                got: CoinAmount(11)
            })
        );
        let deposits = [(PartyId(2), CoinAmount(12))].into_iter().collect();
        let id = ledger
            .create_contract(Payer { n: 3, deposit: 12 }, 0, &deposits, TimePoint(5))
            .unwrap();
        assert_eq!(
            ledger.deposit(id, PartyId(2), CoinAmount(12)),
            Err(LedgerError::DuplicateDeposit(PartyId(2)))
        );
    }

    #[test]
    fn rejected_trigger_leaves_state_and_emits_no_event() {
        let (mut ledger, id) = funded(2);
        ledger.submit_trigger(id, PartyId(1), 999, TimePoint(0)).unwrap();
        let report = ledger.advance_tick().unwrap();
        assert_eq!(report.events().count(), 0);
        assert!(matches!(
            report.processed[0].result,
            ActionResult::Rejected { .. }
        ));
        assert_eq!(*ledger.state(id).unwrap(), 0);
    }

    #[test]
    fn draining_escrow_terminates_the_instance() {
        let (mut ledger, id) = funded(2);
        ledger.submit_trigger(id, PartyId(1), 24, TimePoint(0)).unwrap();
        let report = ledger.advance_tick().unwrap();
        let ev = report.events().next().unwrap();
        assert!(ev.terminated);
        assert_eq!(ledger.wallet(PartyId(1)), CoinAmount(112));
        assert!(matches!(
            ledger.submit_trigger(id, PartyId(2), 0, ledger.tick()),
            Err(LedgerError::InstanceTerminated(_))
        ));
    }

    #[test]
    fn overpaying_program_aborts_the_run() {
        let (mut ledger, id) = funded(2);
        ledger.submit_trigger(id, PartyId(1), 25, TimePoint(0)).unwrap();
        assert!(matches!(
            ledger.advance_tick(),
            Err(LedgerError::PayoutExceedsEscrow { .. })
        ));
    }

    #[test]
    fn trigger_time_must_match_current_tick() {
        let (mut ledger, id) = funded(2);
        assert!(matches!(
            ledger.submit_trigger(id, PartyId(1), 0, TimePoint(3)),
            Err(LedgerError::WrongTick { .. })
        ));
    }

    #[test]
    fn updates_refused_by_programs_without_update() {
        let (mut ledger, id) = funded(2);
        assert_eq!(
            ledger.submit_update(id, PartyId(1), (), CoinAmount(1), TimePoint(0)),
            Err(LedgerError::UpdatesNotSupported(id))
        );
    }

    #[test]
    fn same_tick_triggers_processed_round_robin() {
        let p = |i| PartyId(i);
        // n = 3, processing tick 3: rotation offset 0, so P1 is visited first.
        assert_eq!(fair_order(&[p(2), p(2), p(3)], 3, TimePoint(3)), vec![0, 2, 1]);
        // P1 and P2 queue in tick 7 and are processed at tick 8 (n = 2, offset 0).
        assert_eq!(fair_order(&[p(2), p(1)], 2, TimePoint(8)), vec![1, 0]);
        // Rotation moves the start each tick.
        assert_eq!(fair_order(&[p(1), p(2)], 2, TimePoint(9)), vec![1, 0]);
        assert!(fair_order(&[], 3, TimePoint(1)).is_empty());
    }

    #[test]
    fn idle_tick_just_advances_time() {
        let (mut ledger, _) = funded(2);
        let report = ledger.advance_tick().unwrap();
        assert_eq!(report.tick, TimePoint(1));
        assert!(report.processed.is_empty());
    }
}
