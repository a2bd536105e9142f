//! Plays a [`Scenario`] on a fresh ledger and records the resulting [`Trace`].
//!
//! Honest parties follow the main protocols exactly. Corrupt parties deviate as
//! their [`Strategy`] says off chain and on chain only ever claim what the
//! contract lets them claim, so that every run reaches a settled state.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::crypto::{keygen_session, SigKeyPair};
use crate::duplex::{channel_pay, DuplexConfig, DuplexParty, DuplexProgram, DuplexState, DuplexWitness};
use crate::ledger::{Action, ActionResult, ContractId, ContractProgram, InstanceStatus, Ledger, LedgerError, ProgramKind};
use crate::mscd::{
    apply_topup, propose_topup, run_reactive_execution, AbortPoint, MscdConfig, MscdParty, MscdProgram, MscdState,
    MscdWitness, ReactiveHooks, ReactiveOutcome,
};
use crate::msfe::{
    run_local_execution, ExecutionHooks, LocalOutcome, Mode, MsfeConfig, MsfeParty, MsfeProgram, MsfeState, MsfeWitness,
};
use crate::types::{CoinAmount, PartyId, TimePoint};

use super::scenario::{msfe_input, party_seed, Payments, Plan, Protocol, Scenario, ScenarioError, Strategy};
use super::trace::{
    ActionRecord, Expectation, OffchainRecord, Outcome, RefundRecord, Settlement, TickRecord, Trace, TRACE_VERSION,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("ledger refused a harness action: {0}")]
    Ledger(#[from] LedgerError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("honest party failed: {0}")]
    HonestAssertion(String),
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Adds one coin to the first positive payout in the recorded trace, so the
    /// checker has something to catch.
    pub inject_fault: bool,
}

/// How a program's witnesses and states appear in a trace.
pub trait TraceInfo: ContractProgram + Clone {
    fn witness_kind(w: &Self::Witness) -> &'static str;
    fn is_dispute(w: &Self::Witness) -> bool;
    fn round(_w: &Self::Witness) -> Option<u32> {
        None
    }
    fn mode(st: &Self::State) -> Option<String>;
    /// Whether the step from `prev` to `next` settles an aborted execution.
    fn is_abort(_prev: &Self::State, _next: &Self::State) -> bool {
        false
    }
}

fn abort_step(prev: Mode, next: Mode) -> bool {
    next == Mode::Abort || (prev == Mode::Exec && next == Mode::Inactive)
}

fn mode_name(m: Mode) -> Option<String> {
    serde_json::to_value(m).ok().and_then(|v| v.as_str().map(str::to_owned))
}

impl TraceInfo for MsfeProgram {
    fn witness_kind(w: &MsfeWitness) -> &'static str {
        match w {
            MsfeWitness::Transcript { .. } => "transcript",
            MsfeWitness::Exit => "exit",
        }
    }
    fn is_dispute(w: &MsfeWitness) -> bool {
        w.is_transcript()
    }
    fn mode(st: &MsfeState) -> Option<String> {
        mode_name(st.mode)
    }
    fn is_abort(prev: &MsfeState, next: &MsfeState) -> bool {
        abort_step(prev.mode, next.mode)
    }
}

impl TraceInfo for MscdProgram {
    fn witness_kind(w: &MscdWitness) -> &'static str {
        match w {
            MscdWitness::Message { .. } => "message",
            MscdWitness::Transcript { .. } => "transcript",
            MscdWitness::Exit => "exit",
        }
    }
    fn is_dispute(w: &MscdWitness) -> bool {
        w.is_dispute()
    }
    fn round(w: &MscdWitness) -> Option<u32> {
        match w {
            MscdWitness::Message { msg, .. } => Some(msg.round),
            _ => None,
        }
    }
    fn mode(st: &MscdState) -> Option<String> {
        mode_name(st.mode)
    }
    fn is_abort(prev: &MscdState, next: &MscdState) -> bool {
        abort_step(prev.mode, next.mode)
    }
}

impl TraceInfo for DuplexProgram {
    fn witness_kind(w: &DuplexWitness) -> &'static str {
        match w {
            DuplexWitness::Deposit { .. } => "deposit",
            DuplexWitness::Trigger => "trigger",
            DuplexWitness::Update(_) => "state",
            DuplexWitness::Withdraw => "withdraw",
        }
    }
    fn is_dispute(w: &DuplexWitness) -> bool {
        matches!(w, DuplexWitness::Update(_))
    }
    fn mode(_st: &DuplexState) -> Option<String> {
        None
    }
}

/// Owns the ledger and turns tick reports into trace records.
struct Driver<P: TraceInfo> {
    ledger: Ledger<P>,
    id: ContractId,
    trace: Trace,
    /// Bumped on every accepted action.
    version: u64,
    /// Last witness each party sent, and the version it reacted to.
    sent: BTreeMap<PartyId, (u64, String)>,
    inject_fault: bool,
    saw_abort: bool,
}

impl<P: TraceInfo> Driver<P> {
    fn new(s: &Scenario, program: P, init: P::State, opts: &RunOptions) -> Result<Self, SimError> {
        let mut ledger = Ledger::new(vec![CoinAmount(s.initial_wallet); s.n])?;
        let funding: BTreeMap<PartyId, CoinAmount> = PartyId::all(s.n)
            .filter(|&p| !(s.corrupt.contains(&p.0) && *s.strategy(p) == Strategy::SilentForever))
            .map(|p| (p, program.required_deposit(p)))
            .collect();
        let id = ledger.create_contract(program, init, &funding, TimePoint(1))?;
        let trace = Trace {
            format_version: TRACE_VERSION,
            scenario: s.name.clone(),
            protocol: s.protocol,
            n: s.n,
            seed: s.seed,
            q: s.q,
            corrupt: s.corrupt.iter().copied().collect(),
            deviating: PartyId::all(s.n).filter(|&p| s.deviates(p)).map(|p| p.0).collect(),
            initial_wallets: vec![s.initial_wallet; s.n],
            funding: funding.iter().map(|(p, a)| (p.0, a.0)).collect(),
            offchain: Vec::new(),
            ticks: Vec::new(),
            outcome: Outcome::BudgetExhausted,
            settlement: Settlement::Open,
            final_tick: 0,
            final_wallets: Vec::new(),
            final_escrow: 0,
            final_mode: None,
            aborter: None,
            expected: BTreeMap::new(),
            outputs: BTreeMap::new(),
        };
        Ok(Driver {
            ledger,
            id,
            trace,
            version: 0,
            sent: BTreeMap::new(),
            inject_fault: opts.inject_fault,
            saw_abort: false,
        })
    }

    fn now(&self) -> TimePoint {
        self.ledger.tick()
    }

    fn status(&self) -> InstanceStatus {
        self.ledger.instance(self.id).expect("the driver's own instance").status
    }

    fn live(&self) -> bool {
        self.status() == InstanceStatus::Live
    }

    fn state(&self) -> P::State {
        self.ledger.state(self.id).expect("the driver's own instance").clone()
    }

    fn offchain(&mut self, kind: &str, id: i64, detail: String) {
        self.trace.offchain.push(OffchainRecord {
            tick: self.now().0,
            kind: kind.to_owned(),
            id,
            detail,
        });
    }

    /// Queues `w` unless `p` already sent the same witness since the last accepted action.
    fn submit(&mut self, p: PartyId, w: P::Witness) -> Result<(), SimError> {
        let key = serde_json::to_string(&w).expect("witnesses serialise");
        if self.sent.get(&p).is_some_and(|(v, k)| *v == self.version && *k == key) {
            return Ok(());
        }
        self.ledger.submit_trigger(self.id, p, w, self.now())?;
        self.sent.insert(p, (self.version, key));
        Ok(())
    }

    fn submit_update(&mut self, p: PartyId, u: P::Update, amount: CoinAmount) -> Result<(), SimError> {
        self.ledger.submit_update(self.id, p, u, amount, self.now())?;
        Ok(())
    }

    /// Advances one tick. Returns the states produced by accepted actions, in order.
    fn step(&mut self) -> Result<Vec<P::State>, SimError> {
        let mut prev = self.state();
        let report = self.ledger.advance_tick()?;
        let mut states = Vec::new();
        let mut actions = Vec::with_capacity(report.processed.len());
        for pa in &report.processed {
            let (kind, dispute, round) = match &pa.action {
                Action::Trigger(w) => (P::witness_kind(w), P::is_dispute(w), P::round(w)),
                Action::Update { .. } => ("update", false, None),
            };
            let mut rec = ActionRecord {
                seq: pa.seq,
                party: pa.party.0,
                time: pa.time.0,
                kind: kind.to_owned(),
                dispute,
                accepted: false,
                reason: None,
                payout: 0,
                absorbed: 0,
                escrow_after: None,
                mode: None,
                round,
                state: None,
            };
            match &pa.result {
                ActionResult::Accepted { event } => {
                    rec.accepted = true;
                    rec.payout = event.payout.0;
                    if self.inject_fault && rec.payout > 0 {
                        rec.payout += 1;
                        self.inject_fault = false;
                    }
                    rec.absorbed = event.absorbed.0;
                    rec.escrow_after = Some(event.escrow_after.0);
                    rec.mode = P::mode(&event.new_state);
                    self.saw_abort |= P::is_abort(&prev, &event.new_state);
                    prev = event.new_state.clone();
                    rec.state = serde_json::to_value(&event.new_state).ok();
                    states.push(event.new_state.clone());
                    self.version += 1;
                }
                ActionResult::Rejected { reason } => rec.reason = Some(reason.clone()),
            }
            actions.push(rec);
        }
        if !actions.is_empty() || !report.refunds.is_empty() {
            self.trace.ticks.push(TickRecord {
                tick: report.tick.0,
                actions,
                refunds: report
                    .refunds
                    .iter()
                    .map(|r| RefundRecord {
                        party: r.party.0,
                        amount: r.amount.0,
                    })
                    .collect(),
                wallets: self.ledger.wallets().iter().map(|c| c.0).collect(),
                escrow: self.ledger.escrow(self.id)?.0,
            });
        }
        Ok(states)
    }

    fn idle(&mut self, ticks: u64) -> Result<(), SimError> {
        for _ in 0..ticks {
            self.step()?;
        }
        Ok(())
    }

    /// Waits out the funding phase. False if the instance was refunded.
    fn fund(&mut self) -> Result<bool, SimError> {
        while self.status() == InstanceStatus::Funding {
            self.step()?;
        }
        Ok(self.live())
    }

    fn finish(mut self) -> Trace {
        let status = self.status();
        let kind = self.ledger.instance(self.id).expect("own instance").program.kind();
        let t = &mut self.trace;
        t.outcome = match status {
            InstanceStatus::Terminated => Outcome::Terminated,
            InstanceStatus::Refunded => Outcome::Refunded,
            InstanceStatus::Funding | InstanceStatus::Live => Outcome::BudgetExhausted,
        };
        t.settlement = match (status, kind) {
            (InstanceStatus::Refunded, _) => Settlement::Refund,
            (InstanceStatus::Terminated, ProgramKind::Duplex) => Settlement::FinalSplit,
            (_, ProgramKind::Duplex) => Settlement::Open,
            _ if self.saw_abort => Settlement::Abort,
            (InstanceStatus::Terminated, _) => Settlement::Payout,
            _ => Settlement::Open,
        };
        t.final_tick = self.ledger.tick().0;
        t.final_wallets = self.ledger.wallets().iter().map(|c| c.0).collect();
        t.final_escrow = self.ledger.escrow(self.id).expect("own instance").0;
        if status != InstanceStatus::Refunded {
            t.final_mode = P::mode(self.ledger.state(self.id).expect("own instance"));
        }
        self.trace
    }
}

/// The parties' side of the settlement loop.
trait Actors<P: TraceInfo> {
    fn react(&mut self, st: &P::State, now: TimePoint) -> Result<Vec<(PartyId, P::Witness)>, SimError>;
    fn observe(&mut self, st: &P::State);
}

/// Lets every party react to the current state each tick until the instance
/// terminates or the tick budget runs out.
fn settle<P: TraceInfo, A: Actors<P>>(d: &mut Driver<P>, actors: &mut A, max_ticks: u64) -> Result<(), SimError> {
    while d.live() && d.now().0 < max_ticks {
        let st = d.state();
        for (p, w) in actors.react(&st, d.now())? {
            d.submit(p, w)?;
        }
        for st in d.step()? {
            actors.observe(&st);
        }
    }
    Ok(())
}

/// Plays `s` to the end. Deterministic in the scenario.
pub fn run_scenario(s: &Scenario, opts: &RunOptions) -> Result<Trace, SimError> {
    s.validate()?;
    match s.protocol {
        Protocol::Msfe => run_msfe(s, opts),
        Protocol::Mscd => run_mscd(s, opts),
        Protocol::Duplex => run_duplex(s, opts),
    }
}

fn deviating(s: &Scenario) -> BTreeSet<PartyId> {
    PartyId::all(s.n).filter(|&p| s.deviates(p)).collect()
}

// ---------------------------------------------------------------------------
// MSFE

struct MsfeActors<'a> {
    cfg: &'a MsfeConfig,
    parties: &'a mut [MsfeParty],
    deviating: BTreeSet<PartyId>,
}

impl Actors<MsfeProgram> for MsfeActors<'_> {
    fn react(&mut self, st: &MsfeState, now: TimePoint) -> Result<Vec<(PartyId, MsfeWitness)>, SimError> {
        let mut out = Vec::new();
        for p in self.parties.iter() {
            let w = if self.deviating.contains(&p.j) {
                claim_only(st.mode, &st.l, st.t, self.cfg.window, p.j, now, false)
            } else {
                p.handle_ledger_event(self.cfg, st, now)
                    .map_err(|e| SimError::HonestAssertion(e.to_string()))?
            };
            if let Some(w) = w {
                out.push((p.j, w));
            }
        }
        Ok(out)
    }

    fn observe(&mut self, st: &MsfeState) {
        for p in self.parties.iter_mut() {
            p.observe_chain(st);
        }
    }
}

/// A deviating party on chain: exits whenever an exit would pay it or unblock it.
fn claim_only<W: ExitWitness>(
    mode: Mode,
    l: &[bool],
    t: i64,
    window: u64,
    p: PartyId,
    now: TimePoint,
    residual: bool,
) -> Option<W> {
    let slot = p.slot();
    let expired = now.signed() > t + window as i64;
    let claim = match mode {
        Mode::Payout | Mode::Abort => l[slot] || residual,
        Mode::Exec | Mode::Exit => expired && l[slot],
        Mode::Init | Mode::Inactive => false,
    };
    claim.then(W::exit)
}

trait ExitWitness {
    fn exit() -> Self;
}

impl ExitWitness for MsfeWitness {
    fn exit() -> Self {
        MsfeWitness::Exit
    }
}

impl ExitWitness for MscdWitness {
    fn exit() -> Self {
        MscdWitness::Exit
    }
}

fn run_msfe(s: &Scenario, opts: &RunOptions) -> Result<Trace, SimError> {
    let Plan::Msfe { function, executions } = &s.plan else {
        return Err(SimError::Config("plan does not match protocol".into()));
    };
    let n = s.n;
    let mut rng = ChaCha20Rng::seed_from_u64(s.seed);
    let (ring, signers) = keygen_session(n, s.aggregate_signatures, &mut rng);
    let cfg = MsfeConfig::new(CoinAmount(s.q), s.window, s.offchain_window, ring)
        .map_err(|e| SimError::Config(e.to_string()))?;
    let mut parties: Vec<MsfeParty> = signers
        .into_iter()
        .enumerate()
        .map(|(k, sg)| MsfeParty::new(PartyId::from_slot(k), sg))
        .collect();
    let dev = deviating(s);
    let mut d = Driver::new(s, MsfeProgram::new(cfg.clone()), MsfeState::initial(n), opts)?;
    if !d.fund()? {
        return Ok(d.finish());
    }

    let mut corrupt_posts: Vec<(PartyId, MsfeWitness)> = Vec::new();
    let mut aborted = false;
    let mut exited_early = false;
    for e in 1..=*executions {
        let exiting: Vec<PartyId> = dev
            .iter()
            .copied()
            .filter(|&p| *s.strategy(p) == Strategy::PrematureExit { exec: e })
            .collect();
        if !exiting.is_empty() {
            corrupt_posts.extend(exiting.into_iter().map(|p| (p, MsfeWitness::Exit)));
            exited_early = true;
            break;
        }
        let mut hooks = ExecutionHooks {
            corrupt: dev.clone(),
            ..ExecutionHooks::default()
        };
        let mut shows_transcript = Vec::new();
        for &p in &dev {
            match *s.strategy(p) {
                Strategy::AbortAtStep { exec, step } if exec == e => {
                    match step {
                        1 => hooks.withhold_input.insert(p),
                        2 => hooks.withhold_signature.insert(p),
                        _ => hooks.withhold_share.insert(p),
                    };
                }
                Strategy::WithholdShare { exec } if exec == e => {
                    hooks.withhold_share.insert(p);
                }
                Strategy::WithholdSignature { exec } if exec == e => {
                    hooks.withhold_signature.insert(p);
                    shows_transcript.push(p);
                }
                _ => {}
            }
        }
        let inputs: Vec<Vec<u8>> = PartyId::all(n)
            .map(|p| msfe_input(s.seed, e, p, function.output_len()))
            .collect();
        let ex = run_local_execution(&cfg, e as i64, function, &inputs, &mut parties, &hooks, &mut rng);
        let detail = match &ex.outcome {
            LocalOutcome::Completed { z } => format!("completed z={}", hex::encode(z)),
            LocalOutcome::AbortedAtStep(k) => format!("aborted at step {k}"),
        };
        d.offchain("execution", e as i64, detail);
        d.idle(ex.rounds as u64 * s.offchain_window)?;
        if let LocalOutcome::AbortedAtStep(_) = ex.outcome {
            for p in shows_transcript {
                // A corrupt party holding every signature can still open the
                // execution on chain.
                if let Some(tt) = parties[p.slot()].views.get(&(e as i64)) {
                    corrupt_posts.push((p, MsfeWitness::Transcript { id: e as i64, tt: tt.clone() }));
                }
            }
            aborted = true;
            break;
        }
    }

    let honest: Vec<PartyId> = PartyId::all(n).filter(|p| !dev.contains(p)).collect();
    if aborted {
        for &p in &honest {
            let w = match &parties[p.slot()].best {
                Some(b) if !b.tt.is_complete() => MsfeWitness::Transcript { id: b.id, tt: b.tt.clone() },
                _ => MsfeWitness::Exit,
            };
            d.submit(p, w)?;
        }
    } else {
        for &p in &dev {
            if let Strategy::ReplayStale { old } = *s.strategy(p) {
                if let Some(tt) = parties[p.slot()].views.get(&(old as i64)) {
                    corrupt_posts.push((p, MsfeWitness::Transcript { id: old as i64, tt: tt.clone() }));
                }
            }
        }
        if !exited_early {
            d.submit(honest[0], MsfeWitness::Exit)?;
        }
    }
    for (p, w) in corrupt_posts {
        d.submit(p, w)?;
    }

    let mut actors = MsfeActors {
        cfg: &cfg,
        parties: &mut parties,
        deviating: dev.clone(),
    };
    settle(&mut d, &mut actors, s.max_ticks)?;

    let mut trace = d.finish();
    for &p in &honest {
        trace.expected.insert(p.0, Expectation { entitled_delta: 0 });
        let outs = parties[p.slot()]
            .outputs
            .iter()
            .map(|(id, z)| (*id as u32, hex::encode(z)))
            .collect();
        trace.outputs.insert(p.0, outs);
    }
    Ok(trace)
}

// ---------------------------------------------------------------------------
// MSCD

struct MscdActors<'a> {
    cfg: &'a MscdConfig,
    parties: &'a mut [MscdParty],
    deviating: BTreeSet<PartyId>,
    aborter: Option<u32>,
}

impl Actors<MscdProgram> for MscdActors<'_> {
    fn react(&mut self, st: &MscdState, now: TimePoint) -> Result<Vec<(PartyId, MscdWitness)>, SimError> {
        let mut out = Vec::new();
        for p in self.parties.iter_mut() {
            let w = if self.deviating.contains(&p.j) {
                let residual = st.mode == Mode::Abort && st.residual_due && st.aborter_slot() == p.j.slot();
                claim_only(st.mode, &st.l, st.t, self.cfg.window, p.j, now, residual)
            } else {
                p.handle_ledger_event(self.cfg, st, now)
                    .map_err(|e| SimError::HonestAssertion(e.to_string()))?
            };
            if let Some(w) = w {
                out.push((p.j, w));
            }
        }
        Ok(out)
    }

    fn observe(&mut self, st: &MscdState) {
        if st.mode == Mode::Abort && self.aborter.is_none() {
            self.aborter = Some(st.aborter_slot() as u32 + 1);
        }
        for p in self.parties.iter_mut() {
            p.observe_chain(st);
        }
    }
}

fn run_mscd(s: &Scenario, opts: &RunOptions) -> Result<Trace, SimError> {
    let Plan::Mscd {
        executions,
        stages,
        topups,
    } = &s.plan
    else {
        return Err(SimError::Config("plan does not match protocol".into()));
    };
    let n = s.n;
    let mut rng = ChaCha20Rng::seed_from_u64(s.seed);
    let (ring, signers) = keygen_session(n, s.aggregate_signatures, &mut rng);
    let cfg = MscdConfig::new(CoinAmount(s.q), s.window, s.offchain_window, ring)
        .map_err(|e| SimError::Config(e.to_string()))?;
    let mut parties: Vec<MscdParty> = signers
        .into_iter()
        .enumerate()
        .map(|(k, sg)| {
            let p = PartyId::from_slot(k);
            MscdParty::new(p, sg, party_seed(s.seed, p), n)
        })
        .collect();
    let dev = deviating(s);
    let mut d = Driver::new(s, MscdProgram::new(cfg.clone()), MscdState::initial(n), opts)?;
    if !d.fund()? {
        return Ok(d.finish());
    }

    let mut corrupt_posts: Vec<(PartyId, MscdWitness)> = Vec::new();
    let mut aborted = false;
    let mut exited_early = false;
    for e in 1..=*executions {
        let strategies: Vec<(PartyId, Strategy)> = dev.iter().map(|&p| (p, s.strategy(p).clone())).collect();
        if strategies
            .iter()
            .any(|(_, st)| *st == Strategy::AbortAtStep { exec: e, step: 1 })
        {
            d.offchain("topup", e as i64, "corrupt party withholds its signature".into());
            aborted = true;
            break;
        }
        for t in topups.iter().filter(|t| t.before_exec == e) {
            let p = PartyId(t.party);
            let u = propose_topup(&cfg, &parties, p, CoinAmount(t.amount), &mut rng);
            d.submit_update(p, u.clone(), CoinAmount(t.amount))?;
            if d.step()?.is_empty() {
                d.offchain("topup", e as i64, format!("party {} top-up of {} refused", p.0, t.amount));
            } else {
                apply_topup(&mut parties, &u);
                d.offchain("topup", e as i64, format!("party {} adds {}", p.0, t.amount));
            }
        }
        let exiting: Vec<PartyId> = strategies
            .iter()
            .filter(|(_, st)| *st == Strategy::PrematureExit { exec: e })
            .map(|(p, _)| *p)
            .collect();
        if !exiting.is_empty() {
            corrupt_posts.extend(exiting.into_iter().map(|p| (p, MscdWitness::Exit)));
            exited_early = true;
            break;
        }
        if parties[0].balances.iter().any(|b| b.0 < *stages as u64) {
            d.offchain("execution", e as i64, "a balance cannot cover the stages".into());
            break;
        }
        let mut hooks = ReactiveHooks {
            corrupt: dev.clone(),
            ..ReactiveHooks::default()
        };
        let mut opens = Vec::new();
        for (p, st) in &strategies {
            match *st {
                Strategy::AbortAtStep { exec, step: 2 } | Strategy::WithholdSignature { exec } if exec == e => {
                    hooks.withhold_params.insert(*p);
                    opens.push(*p);
                }
                Strategy::AbortAtStep { exec, step } if exec == e && step > 2 => {
                    hooks.silent_at_round.insert(*p, step as usize - 2);
                }
                Strategy::WithholdShare { exec } if exec == e => {
                    hooks.silent_at_round.insert(*p, n + p.slot() + 1);
                }
                _ => {}
            }
        }
        let out = run_reactive_execution(&cfg, e as i64, *stages, &d.state().deposits, &mut parties, &hooks, &mut rng)
            .map_err(|err| SimError::Config(err.to_string()))?;
        let rounds = match &out {
            ReactiveOutcome::Completed { .. } => 2 * n * *stages as usize,
            ReactiveOutcome::AbortedAt(AbortPoint::Round(r)) => *r,
            ReactiveOutcome::AbortedAt(_) => 0,
        };
        d.offchain("execution", e as i64, serde_json::to_string(&out).expect("outcomes serialise"));
        d.idle((2 + rounds as u64) * s.offchain_window)?;
        if let ReactiveOutcome::AbortedAt(_) = out {
            for p in opens {
                if let Some(a) = parties[p.slot()].agreed.get(&(e as i64)) {
                    corrupt_posts.push((p, a.witness()));
                }
            }
            aborted = true;
            break;
        }
    }

    let honest: Vec<PartyId> = PartyId::all(n).filter(|p| !dev.contains(p)).collect();
    let settle_with = |p: &MscdParty| p.best.as_ref().map_or(MscdWitness::Exit, |b| b.witness());
    if aborted {
        for &p in &honest {
            d.submit(p, settle_with(&parties[p.slot()]))?;
        }
    } else {
        for &p in &dev {
            if let Strategy::ReplayStale { old } = *s.strategy(p) {
                if let Some(b) = parties[p.slot()].history.get(&(old as i64)) {
                    corrupt_posts.push((p, b.witness()));
                }
            }
        }
        if !exited_early {
            d.submit(honest[0], settle_with(&parties[honest[0].slot()]))?;
        }
    }
    for (p, w) in corrupt_posts {
        d.submit(p, w)?;
    }

    let mut actors = MscdActors {
        cfg: &cfg,
        parties: &mut parties,
        deviating: dev.clone(),
        aborter: None,
    };
    settle(&mut d, &mut actors, s.max_ticks)?;
    let aborter = actors.aborter;

    let mut trace = d.finish();
    if trace.settlement == Settlement::Abort {
        trace.aborter = aborter;
    }
    for &p in &honest {
        let me = &parties[p.slot()];
        let j = p.slot();
        let entitled = match &me.best {
            None => 0,
            Some(b) if trace.settlement == Settlement::Abort => b.b[j].0 as i64 - b.tv.deposits[j].0 as i64,
            Some(b) => b.tv.replay(&b.tt).0[j].0 as i64 - b.tv.deposits[j].0 as i64,
        };
        trace.expected.insert(p.0, Expectation { entitled_delta: entitled });
        let outs = me
            .history
            .keys()
            .map(|id| {
                let winners: Vec<String> = me.outputs[id].iter().map(|w| (w + 1).to_string()).collect();
                (*id as u32, winners.join(","))
            })
            .collect();
        trace.outputs.insert(p.0, outs);
    }
    Ok(trace)
}

// ---------------------------------------------------------------------------
// Duplex

struct DuplexActors<'a> {
    parties: &'a mut [DuplexParty; 2],
    deviating: BTreeSet<PartyId>,
}

impl Actors<DuplexProgram> for DuplexActors<'_> {
    fn react(&mut self, st: &DuplexState, now: TimePoint) -> Result<Vec<(PartyId, DuplexWitness)>, SimError> {
        let mut out = Vec::new();
        for p in self.parties.iter() {
            let pid = PartyId::from_slot(p.i);
            let w = if self.deviating.contains(&pid) {
                // A cheater still collects whatever the final state gives it.
                let owed = st.final_entitlement(p.i) > st.withdrawn[p.i].0 as i128;
                (st.t2.is_some_and(|t2| now.signed() >= t2) && owed).then_some(DuplexWitness::Withdraw)
            } else {
                p.handle_ledger_event(st, now)
            };
            if let Some(w) = w {
                out.push((pid, w));
            }
        }
        Ok(out)
    }

    fn observe(&mut self, st: &DuplexState) {
        for p in self.parties.iter_mut() {
            p.observe_chain(st);
        }
    }
}

/// Picks a payer with room to pay and an amount it can cover.
fn random_payment(view: &DuplexParty, max_amount: u64, rng: &mut ChaCha20Rng) -> Option<(usize, u64)> {
    let cur = view.current();
    let room = |i: usize| cur.entitlement(&view.deposits, i) - cur.withdrawals[i].0 as i128;
    let mut payer = rng.gen_range(0..2usize);
    if room(payer) <= 0 {
        payer = 1 - payer;
    }
    let room = room(payer);
    if room <= 0 {
        return None;
    }
    let cap = (max_amount as i128).min(room) as u64;
    Some((payer, rng.gen_range(1..=cap)))
}

fn run_duplex(s: &Scenario, opts: &RunOptions) -> Result<Trace, SimError> {
    let Plan::Duplex {
        deposits,
        payments,
        topups,
        withdrawals,
    } = &s.plan
    else {
        return Err(SimError::Config("plan does not match protocol".into()));
    };
    let mut rng = ChaCha20Rng::seed_from_u64(s.seed);
    let keys = [SigKeyPair::generate(&mut rng), SigKeyPair::generate(&mut rng)];
    let deps = [CoinAmount(deposits[0]), CoinAmount(deposits[1])];
    let cfg = DuplexConfig {
        keys: [keys[0].pk, keys[1].pk],
        deposits: deps,
        window: s.duplex_window,
    };
    let mut parties = [
        DuplexParty::new(0, keys[0].clone(), keys[1].pk, deps),
        DuplexParty::new(1, keys[1].clone(), keys[0].pk, deps),
    ];
    let dev = deviating(s);
    let mut d = Driver::new(s, DuplexProgram::new(cfg), DuplexState::initial(deps), opts)?;
    if !d.fund()? {
        return Ok(d.finish());
    }

    let mut put_in = [deposits[0] as i128, deposits[1] as i128];
    let count = match payments {
        Payments::List(v) => v.len() as u32,
        Payments::Random { count, .. } => *count,
    };
    let mut pay_rng = ChaCha20Rng::seed_from_u64(s.seed ^ 0x7061_796d_656e_7473);
    for k in 0..=count {
        if k > 0 {
            let next = match payments {
                Payments::List(v) => Some(((v[k as usize - 1].payer - 1) as usize, v[k as usize - 1].amount)),
                Payments::Random { max_amount, .. } => random_payment(&parties[0], *max_amount, &mut pay_rng),
            };
            match next {
                None => d.offchain("payment", k as i64, "skipped: no party can pay".into()),
                Some((payer, amount)) => match channel_pay(&mut parties, payer, CoinAmount(amount)) {
                    Ok(st) => d.offchain(
                        "payment",
                        st.msg.r,
                        format!("party {} pays {amount}, net {}", payer + 1, st.msg.net),
                    ),
                    Err(err) => d.offchain("payment", k as i64, format!("refused: {err}")),
                },
            }
        }
        for t in topups.iter().filter(|t| t.after_payment == k) {
            let p = PartyId(t.party);
            d.submit(p, DuplexWitness::Deposit { amount: CoinAmount(t.amount) })?;
            let states = d.step()?;
            if !states.is_empty() {
                put_in[p.slot()] += t.amount as i128;
            }
            for st in &states {
                parties.iter_mut().for_each(|q| q.observe_chain(st));
            }
        }
        for w in withdrawals.iter().filter(|w| w.after_payment == k) {
            let i = w.party as usize - 1;
            let signed = parties[i]
                .request_withdrawal(CoinAmount(w.amount))
                .and_then(|prop| parties[1 - i].countersign(&prop))
                .and_then(|ss| parties[i].accept(&ss).map(|_| ss));
            match signed {
                Ok(ss) => {
                    d.offchain("withdrawal", ss.msg.r, format!("party {} approved for {}", i + 1, w.amount));
                    let p = PartyId::from_slot(i);
                    d.submit(p, DuplexWitness::Update(ss))?;
                    for st in d.step()? {
                        parties.iter_mut().for_each(|q| q.observe_chain(&st));
                    }
                    d.submit(p, DuplexWitness::Withdraw)?;
                    for st in d.step()? {
                        parties.iter_mut().for_each(|q| q.observe_chain(&st));
                    }
                }
                Err(err) => d.offchain("withdrawal", k as i64, format!("refused: {err}")),
            }
        }
    }

    let mut attacked = false;
    for &p in &dev {
        if let Strategy::StaleDuplexSubmit { round } = *s.strategy(p) {
            d.submit(p, DuplexWitness::Trigger)?;
            if let Some(old) = parties[p.slot()].history.iter().find(|h| h.msg.r == round) {
                d.submit(p, DuplexWitness::Update(old.clone()))?;
            }
            attacked = true;
        }
    }
    let honest: Vec<PartyId> = PartyId::all(2).filter(|p| !dev.contains(p)).collect();
    if !attacked {
        d.submit(honest[0], DuplexWitness::Trigger)?;
    }

    let mut actors = DuplexActors {
        parties: &mut parties,
        deviating: dev.clone(),
    };
    settle(&mut d, &mut actors, s.max_ticks)?;

    let mut trace = d.finish();
    let view = &parties[honest[0].slot()];
    for i in 0..2 {
        let owed = view.current().entitlement(&view.deposits, i) - put_in[i];
        trace.expected.insert(i as u32 + 1, Expectation { entitled_delta: owed as i64 });
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(v: serde_json::Value) -> Scenario {
        Scenario::from_json(&v.to_string()).unwrap()
    }

    fn msfe(n: usize, corrupt: serde_json::Value, strategies: serde_json::Value) -> Scenario {
        scenario(serde_json::json!({
            "format_version": 1, "protocol": "msfe", "n": n, "q": crate::msfe::lcm_upto(n), "seed": 7,
            "corrupt": corrupt, "strategies": strategies,
            "plan": {"msfe": {"function": {"kind": "xor", "width": 4}, "executions": 2}}
        }))
    }

    #[test]
    fn honest_msfe_settles_with_n_plus_one_triggers() {
        let t = run_scenario(&msfe(3, serde_json::json!([]), serde_json::json!({})), &RunOptions::default()).unwrap();
        assert_eq!(t.outcome, Outcome::Terminated);
        assert_eq!(t.settlement, Settlement::Payout);
        assert_eq!(t.accepted_triggers(), 4);
        assert_eq!(t.accepted_disputes(), 0);
        assert_eq!(t.final_wallets, t.initial_wallets);
        assert_eq!(t.outputs[&1].len(), 2);
    }

    #[test]
    fn withheld_share_pays_the_honest_parties() {
        let s = msfe(3, serde_json::json!([2]), serde_json::json!({"2": {"withhold_share": {"exec": 2}}}));
        let t = run_scenario(&s, &RunOptions::default()).unwrap();
        assert_eq!(t.settlement, Settlement::Abort);
        assert_eq!(t.delta(1), s.q as i64);
        assert_eq!(t.delta(3), s.q as i64);
        assert_eq!(t.delta(2), -2 * s.q as i64);
    }

    #[test]
    fn silent_party_gets_everyone_refunded() {
        let s = msfe(2, serde_json::json!([2]), serde_json::json!({"2": "silent_forever"}));
        let t = run_scenario(&s, &RunOptions::default()).unwrap();
        assert_eq!(t.outcome, Outcome::Refunded);
        assert_eq!(t.final_wallets, t.initial_wallets);
    }

    #[test]
    fn runs_are_reproducible() {
        let s = msfe(3, serde_json::json!([1]), serde_json::json!({"1": {"abort_at_step": {"exec": 1, "step": 3}}}));
        let a = run_scenario(&s, &RunOptions::default()).unwrap().to_json();
        let b = run_scenario(&s, &RunOptions::default()).unwrap().to_json();
        assert_eq!(a, b);
    }

    #[test]
    fn mscd_lottery_pays_out_the_replayed_balances() {
        let s = scenario(serde_json::json!({
            "format_version": 1, "protocol": "mscd", "n": 2, "q": 1, "seed": 3,
            "plan": {"mscd": {"executions": 2, "topups": [
                {"before_exec": 1, "party": 1, "amount": 3},
                {"before_exec": 1, "party": 2, "amount": 3}
            ]}}
        }));
        let t = run_scenario(&s, &RunOptions::default()).unwrap();
        assert_eq!(t.outcome, Outcome::Terminated);
        assert_eq!(t.settlement, Settlement::Payout);
        assert_eq!(t.delta(1) + t.delta(2), 0);
        assert_eq!(t.delta(1), t.expected[&1].entitled_delta);
        assert_eq!(t.outputs[&1].len(), 2);
    }

    #[test]
    fn mscd_silent_round_penalises_the_aborter() {
        let s = scenario(serde_json::json!({
            "format_version": 1, "protocol": "mscd", "n": 3, "q": 2, "seed": 3,
            "corrupt": [2],
            "strategies": {"2": {"abort_at_step": {"exec": 1, "step": 4}}},
            "plan": {"mscd": {"executions": 2, "topups": [
                {"before_exec": 1, "party": 1, "amount": 3},
                {"before_exec": 1, "party": 2, "amount": 3},
                {"before_exec": 1, "party": 3, "amount": 3}
            ]}}
        }));
        let t = run_scenario(&s, &RunOptions::default()).unwrap();
        assert_eq!(t.settlement, Settlement::Abort);
        assert_eq!(t.aborter, Some(2));
        for h in [1, 3] {
            assert_eq!(t.delta(h), s.q as i64 + t.expected[&h].entitled_delta);
        }
    }

    #[test]
    fn duplex_final_split_matches_the_latest_state() {
        let s = scenario(serde_json::json!({
            "format_version": 1, "protocol": "duplex", "n": 2, "seed": 5,
            "plan": {"duplex": {"deposits": [10, 10], "payments": {"list": [
                {"payer": 1, "amount": 4}, {"payer": 2, "amount": 1}
            ]}}}
        }));
        let t = run_scenario(&s, &RunOptions::default()).unwrap();
        assert_eq!(t.settlement, Settlement::FinalSplit);
        assert_eq!(t.delta(1), -3);
        assert_eq!(t.delta(2), 3);
    }
}
