//! Discrete-event engine.
//!
//! [`World`] holds every piece of simulated state: hosts, the pending
//! ledger (one FIFO queue per ordered pair), the signature registry and the
//! trace. [`Engine`] adds the scheduler, the random stream and the adversary
//! and runs the step loop. The explorer drives a `World` directly, choosing
//! pairs itself.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Debug;
use std::hash::{Hash, Hasher};

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::crypto::{RegistrySigner, SignatureRegistry, SignedValue, Signer};
use crate::error::{ConfigError, CryptoError, SimError};
use crate::scheduler::{Pair, Scheduler, SchedulerPolicy};
use crate::trace::{payload_digest, EventKind, Trace, TraceMode, TRACE_FORMAT};
use crate::types::{Bit, LogicalTime, ProcessId, SystemConfig};
use crate::{Rng, RNG_ID};

/// One in-flight message.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Envelope<M> {
    pub src: ProcessId,
    pub dst: ProcessId,
    pub seq: u64,
    pub send_step: LogicalTime,
    pub digest: u64,
    pub payload: M,
}

/// A deterministic protocol state machine.
pub trait Process: Clone {
    type Msg: Clone + Debug;

    fn init(&mut self, ctx: &mut Context<'_, Self::Msg>);

    fn deliver(&mut self, from: ProcessId, msg: Self::Msg, ctx: &mut Context<'_, Self::Msg>);

    /// True once the process needs nothing more from the run (decided, or
    /// completed its fixed number of rounds).
    fn finished(&self) -> bool;

    /// Stop starting new protocol steps; keep answering what is in flight.
    /// Used to drain reliable-broadcast traffic after a run ends.
    fn freeze(&mut self) {}
}

/// Effects a host may produce during one callback.
pub struct Context<'a, M> {
    me: ProcessId,
    n: usize,
    f: usize,
    step: u64,
    out: &'a mut Vec<(ProcessId, M)>,
    decisions: &'a mut Vec<Bit>,
    registry: &'a mut SignatureRegistry,
}

impl<'a, M: Clone> Context<'a, M> {
    pub fn new(
        me: ProcessId,
        n: usize,
        f: usize,
        step: u64,
        out: &'a mut Vec<(ProcessId, M)>,
        decisions: &'a mut Vec<Bit>,
        registry: &'a mut SignatureRegistry,
    ) -> Self {
        Context {
            me,
            n,
            f,
            step,
            out,
            decisions,
            registry,
        }
    }

    pub fn me(&self) -> ProcessId {
        self.me
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn f(&self) -> usize {
        self.f
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn send(&mut self, dst: ProcessId, msg: M) {
        self.out.push((dst, msg));
    }

    /// Send to every process, including self, in id order.
    pub fn broadcast(&mut self, msg: M) {
        for q in 0..self.n {
            self.out.push((ProcessId(q), msg.clone()));
        }
    }

    pub fn decide(&mut self, v: Bit) {
        self.decisions.push(v);
    }
}

impl<M> Signer for Context<'_, M> {
    fn signer_id(&self) -> ProcessId {
        self.me
    }

    fn sign_value(&mut self, value: Bit) -> SignedValue {
        self.registry.sign_raw(self.me, value)
    }

    fn sign(&mut self, sv: &SignedValue) -> Result<SignedValue, CryptoError> {
        self.registry.sign_chain(self.me, sv)
    }

    fn sign_statement(&mut self, statement: &[u64]) {
        self.registry.sign_statement(self.me, statement)
    }

    fn verify(&self, sv: &SignedValue) -> bool {
        self.registry.verify(sv)
    }

    fn verify_statement(&self, signer: ProcessId, statement: &[u64]) -> bool {
        self.registry.verify_statement(signer, statement)
    }
}

/// Capabilities handed to an adversary. Only controlled ids can send or
/// sign.
pub struct AdversaryContext<'a, M> {
    n: usize,
    f: usize,
    step: u64,
    controlled: &'a BTreeSet<ProcessId>,
    correct: &'a BTreeSet<ProcessId>,
    registry: &'a mut SignatureRegistry,
    out: &'a mut Vec<(ProcessId, ProcessId, M)>,
}

impl<'a, M: Clone> AdversaryContext<'a, M> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn f(&self) -> usize {
        self.f
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn controlled(&self) -> &BTreeSet<ProcessId> {
        self.controlled
    }

    pub fn correct(&self) -> &BTreeSet<ProcessId> {
        self.correct
    }

    pub fn inject(&mut self, src: ProcessId, dst: ProcessId, msg: M) -> Result<(), SimError> {
        if dst.0 >= self.n {
            return Err(SimError::UnknownProcess(dst));
        }
        if !self.controlled.contains(&src) {
            return Err(if self.correct.contains(&src) {
                SimError::CorrectInjection(src)
            } else {
                SimError::NotControlled(src)
            });
        }
        if src == dst {
            return Err(SimError::SelfInjection(src));
        }
        self.out.push((src, dst, msg));
        Ok(())
    }

    /// A signer for a controlled id. Any other id is a forgery attempt.
    pub fn signer(&mut self, id: ProcessId) -> Result<RegistrySigner<'_>, CryptoError> {
        if !self.controlled.contains(&id) {
            return Err(CryptoError::Forgery { signer: id });
        }
        Ok(RegistrySigner::new(id, self.registry))
    }

    pub fn verify(&self, sv: &SignedValue) -> bool {
        self.registry.verify(sv)
    }

    pub fn verify_statement(&self, signer: ProcessId, statement: &[u64]) -> bool {
        self.registry.verify_statement(signer, statement)
    }

    /// Run honest protocol code as controlled process `id`. Sends are
    /// returned to the caller instead of entering the network; decisions
    /// are discarded.
    pub fn run_as<R>(
        &mut self,
        id: ProcessId,
        body: impl FnOnce(&mut Context<'_, M>) -> R,
    ) -> Result<(R, Vec<(ProcessId, M)>), CryptoError> {
        if !self.controlled.contains(&id) {
            return Err(CryptoError::Forgery { signer: id });
        }
        let mut out = Vec::new();
        let mut decisions = Vec::new();
        let mut ctx = Context::new(
            id,
            self.n,
            self.f,
            self.step,
            &mut out,
            &mut decisions,
            self.registry,
        );
        let r = body(&mut ctx);
        Ok((r, out))
    }
}

/// Strategy for the processes the adversary controls.
pub trait Adversary<M> {
    fn on_start(&mut self, _ctx: &mut AdversaryContext<'_, M>) {}

    /// A message addressed to controlled process `to` was delivered.
    fn on_deliver(
        &mut self,
        _to: ProcessId,
        _from: ProcessId,
        _msg: M,
        _ctx: &mut AdversaryContext<'_, M>,
    ) {
    }

    /// Called at every step boundary before the draw.
    fn on_step(&mut self, _ctx: &mut AdversaryContext<'_, M>) {}
}

/// An adversary that never acts.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoAdversary;

impl<M> Adversary<M> for NoAdversary {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Correct,
    /// Faulty, but running the honest protocol until `crash_at` (if any).
    Hosted {
        crash_at: Option<u64>,
    },
    /// Faulty and driven by the adversary.
    Controlled,
}

/// Registration of one process slot.
#[derive(Debug, Clone)]
pub struct Host<P> {
    pub role: Role,
    pub process: Option<P>,
    pub input: Option<Bit>,
}

impl<P> Host<P> {
    pub fn correct(process: P, input: Option<Bit>) -> Self {
        Host {
            role: Role::Correct,
            process: Some(process),
            input,
        }
    }

    pub fn hosted(process: P, input: Option<Bit>, crash_at: Option<u64>) -> Self {
        Host {
            role: Role::Hosted { crash_at },
            process: Some(process),
            input,
        }
    }

    pub fn controlled() -> Self {
        Host {
            role: Role::Controlled,
            process: None,
            input: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Slot<P> {
    pub role: Role,
    pub process: Option<P>,
    pub input: Option<Bit>,
    pub crashed: bool,
    pub crashed_at: Option<u64>,
    pub decision: Option<Bit>,
    pub decided_at: Option<u64>,
    pub extra_decisions: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunOutcome {
    /// Every correct process finished.
    Finished,
    /// No message pending and not everyone finished.
    Quiescent,
    /// Step horizon reached.
    Horizon,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub outcome: RunOutcome,
    pub steps: u64,
    pub decisions: Vec<Option<Bit>>,
    pub decided_at: Vec<Option<u64>>,
    /// Processes whose protocol called decide more than once.
    pub double_decides: Vec<ProcessId>,
    pub trace_hash: String,
}

impl RunReport {
    pub fn terminated(&self) -> bool {
        self.outcome == RunOutcome::Finished
    }
}

/// All simulated state of one run.
#[derive(Debug, Clone)]
pub struct World<P: Process> {
    n: usize,
    f: usize,
    correct: BTreeSet<ProcessId>,
    controlled: BTreeSet<ProcessId>,
    slots: Vec<Slot<P>>,
    queues: Vec<VecDeque<Envelope<P::Msg>>>,
    next_seq: Vec<u64>,
    self_queue: VecDeque<Envelope<P::Msg>>,
    registry: SignatureRegistry,
    step: u64,
    started: bool,
    trace: Trace,
}

impl<P: Process> World<P> {
    pub fn new(
        config: &SystemConfig,
        hosts: Vec<Host<P>>,
        trace: Trace,
    ) -> Result<Self, ConfigError> {
        config.validate()?;
        if hosts.len() != config.n {
            return Err(ConfigError::Invalid(format!(
                "{} hosts registered for n={}",
                hosts.len(),
                config.n
            )));
        }
        let mut controlled = BTreeSet::new();
        let mut slots = Vec::with_capacity(config.n);
        for (i, h) in hosts.into_iter().enumerate() {
            let id = ProcessId(i);
            let is_correct = config.is_correct(id);
            match (&h.role, is_correct) {
                (Role::Correct, true) => {}
                (Role::Correct, false) | (_, true) => {
                    return Err(ConfigError::Invalid(format!(
                        "role {:?} of {id} disagrees with the correct set",
                        h.role
                    )))
                }
                _ => {}
            }
            if h.role == Role::Controlled {
                controlled.insert(id);
            } else if h.process.is_none() {
                return Err(ConfigError::Invalid(format!("{id} has no process")));
            }
            slots.push(Slot {
                role: h.role,
                process: if h.role == Role::Controlled {
                    None
                } else {
                    h.process
                },
                input: h.input,
                crashed: false,
                crashed_at: None,
                decision: None,
                decided_at: None,
                extra_decisions: 0,
            });
        }
        let n = config.n;
        Ok(World {
            n,
            f: config.f,
            correct: config.correct.clone(),
            controlled,
            slots,
            queues: (0..n * n).map(|_| VecDeque::new()).collect(),
            next_seq: vec![0; n * n],
            self_queue: VecDeque::new(),
            registry: SignatureRegistry::new(),
            step: 0,
            started: false,
            trace,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn f(&self) -> usize {
        self.f
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn correct(&self) -> &BTreeSet<ProcessId> {
        &self.correct
    }

    pub fn controlled(&self) -> &BTreeSet<ProcessId> {
        &self.controlled
    }

    pub fn slots(&self) -> &[Slot<P>] {
        &self.slots
    }

    pub fn slot(&self, p: ProcessId) -> &Slot<P> {
        &self.slots[p.0]
    }

    pub fn process(&self, p: ProcessId) -> Option<&P> {
        self.slots[p.0].process.as_ref()
    }

    pub fn registry(&self) -> &SignatureRegistry {
        &self.registry
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn queue(&self, src: ProcessId, dst: ProcessId) -> &VecDeque<Envelope<P::Msg>> {
        &self.queues[src.0 * self.n + dst.0]
    }

    /// `P(t)`: ordered pairs with a nonempty queue, sorted.
    pub fn pending_pairs(&self) -> Vec<Pair> {
        let mut v = Vec::new();
        self.pending_into(&mut v);
        v
    }

    fn pending_into(&self, v: &mut Vec<Pair>) {
        v.clear();
        for (i, q) in self.queues.iter().enumerate() {
            if !q.is_empty() {
                v.push((ProcessId(i / self.n), ProcessId(i % self.n)));
            }
        }
    }

    pub fn pending_messages(&self) -> usize {
        self.queues.iter().map(VecDeque::len).sum()
    }

    pub fn is_quiescent(&self) -> bool {
        self.queues.iter().all(VecDeque::is_empty)
    }

    /// Live, non-crashed host able to take steps.
    fn live_host(&self, p: ProcessId) -> bool {
        let s = &self.slots[p.0];
        s.process.is_some() && !s.crashed
    }

    pub fn all_correct_finished(&self) -> bool {
        self.correct.iter().all(|p| {
            self.slots[p.0]
                .process
                .as_ref()
                .is_some_and(|proc_| proc_.finished())
        })
    }

    /// Initialize hosts in id order and start the adversary.
    pub fn start(&mut self, adversary: &mut dyn Adversary<P::Msg>) {
        if self.started {
            return;
        }
        self.started = true;
        self.apply_crashes();
        for i in 0..self.n {
            let id = ProcessId(i);
            let digest = match self.slots[i].input {
                Some(b) => b.to_string(),
                None => "-".to_string(),
            };
            self.trace.record(0, EventKind::Init, id, id, 0, &digest);
            if self.live_host(id) {
                let mut proc_ = self.slots[i].process.take().expect("host present");
                let mut out = Vec::new();
                let mut decisions = Vec::new();
                {
                    let mut ctx = Context::new(
                        id,
                        self.n,
                        self.f,
                        self.step,
                        &mut out,
                        &mut decisions,
                        &mut self.registry,
                    );
                    proc_.init(&mut ctx);
                }
                self.slots[i].process = Some(proc_);
                self.apply_effects(id, out, decisions);
            }
        }
        let mut injections = Vec::new();
        {
            let mut actx = AdversaryContext {
                n: self.n,
                f: self.f,
                step: self.step,
                controlled: &self.controlled,
                correct: &self.correct,
                registry: &mut self.registry,
                out: &mut injections,
            };
            adversary.on_start(&mut actx);
        }
        self.apply_injections(injections);
        self.flush_self_queue();
    }

    /// Crash hosted processes whose scripted crash step has been reached.
    pub fn apply_crashes(&mut self) {
        for i in 0..self.n {
            if let Role::Hosted { crash_at: Some(k) } = self.slots[i].role {
                if !self.slots[i].crashed && k <= self.step {
                    self.crash(ProcessId(i));
                }
            }
        }
    }

    /// Turn a hosted process into a sink now. Its already-sent messages
    /// stay deliverable.
    pub fn crash(&mut self, p: ProcessId) {
        let s = &mut self.slots[p.0];
        if s.crashed || s.role == Role::Correct {
            return;
        }
        s.crashed = true;
        s.crashed_at = Some(self.step);
        self.trace
            .record(self.step, EventKind::Crash, p, p, 0, &"-");
        // Self-addressed messages of a crashed process are never consumed.
        self.self_queue.retain(|e| e.dst != p);
    }

    pub fn adversary_tick(&mut self, adversary: &mut dyn Adversary<P::Msg>) {
        if self.controlled.is_empty() {
            return;
        }
        let mut injections = Vec::new();
        {
            let mut actx = AdversaryContext {
                n: self.n,
                f: self.f,
                step: self.step,
                controlled: &self.controlled,
                correct: &self.correct,
                registry: &mut self.registry,
                out: &mut injections,
            };
            adversary.on_step(&mut actx);
        }
        self.apply_injections(injections);
    }

    /// Deliver the head of the `(src,dst)` queue as the next step.
    pub fn deliver_pair(
        &mut self,
        (src, dst): Pair,
        adversary: &mut dyn Adversary<P::Msg>,
    ) -> Option<Envelope<P::Msg>> {
        let env = self.queues[src.0 * self.n + dst.0].pop_front()?;
        self.step += 1;
        self.trace.record(
            self.step,
            EventKind::Deliver,
            src,
            dst,
            env.seq,
            &format_args!("{:016x}", env.digest),
        );
        let record = env.clone();
        self.dispatch(env, adversary);
        self.flush_self_queue();
        Some(record)
    }

    fn dispatch(&mut self, env: Envelope<P::Msg>, adversary: &mut dyn Adversary<P::Msg>) {
        let dst = env.dst;
        if self.live_host(dst) {
            let mut proc_ = self.slots[dst.0].process.take().expect("host present");
            let mut out = Vec::new();
            let mut decisions = Vec::new();
            {
                let mut ctx = Context::new(
                    dst,
                    self.n,
                    self.f,
                    self.step,
                    &mut out,
                    &mut decisions,
                    &mut self.registry,
                );
                proc_.deliver(env.src, env.payload, &mut ctx);
            }
            self.slots[dst.0].process = Some(proc_);
            self.apply_effects(dst, out, decisions);
        } else if self.controlled.contains(&dst) {
            let mut injections = Vec::new();
            {
                let mut actx = AdversaryContext {
                    n: self.n,
                    f: self.f,
                    step: self.step,
                    controlled: &self.controlled,
                    correct: &self.correct,
                    registry: &mut self.registry,
                    out: &mut injections,
                };
                adversary.on_deliver(dst, env.src, env.payload, &mut actx);
            }
            self.apply_injections(injections);
        }
    }

    fn flush_self_queue(&mut self) {
        while let Some(env) = self.self_queue.pop_front() {
            let p = env.dst;
            if !self.live_host(p) {
                continue;
            }
            self.trace.record(
                self.step,
                EventKind::SelfDeliver,
                p,
                p,
                env.seq,
                &format_args!("{:016x}", env.digest),
            );
            let mut proc_ = self.slots[p.0].process.take().expect("host present");
            let mut out = Vec::new();
            let mut decisions = Vec::new();
            {
                let mut ctx = Context::new(
                    p,
                    self.n,
                    self.f,
                    self.step,
                    &mut out,
                    &mut decisions,
                    &mut self.registry,
                );
                proc_.deliver(p, env.payload, &mut ctx);
            }
            self.slots[p.0].process = Some(proc_);
            self.apply_effects(p, out, decisions);
        }
    }

    fn enqueue(&mut self, src: ProcessId, dst: ProcessId, msg: P::Msg, kind: EventKind) {
        let idx = src.0 * self.n + dst.0;
        self.next_seq[idx] += 1;
        let seq = self.next_seq[idx];
        let digest = payload_digest(&msg);
        self.trace.record(
            self.step,
            kind,
            src,
            dst,
            seq,
            &format_args!("{digest:016x}"),
        );
        let env = Envelope {
            src,
            dst,
            seq,
            send_step: LogicalTime(self.step),
            digest,
            payload: msg,
        };
        if src == dst {
            self.self_queue.push_back(env);
        } else {
            self.queues[idx].push_back(env);
        }
    }

    fn apply_effects(&mut self, p: ProcessId, out: Vec<(ProcessId, P::Msg)>, decisions: Vec<Bit>) {
        for (dst, msg) in out {
            if dst.0 < self.n {
                self.enqueue(p, dst, msg, EventKind::Send);
            }
        }
        for v in decisions {
            self.trace.record(self.step, EventKind::Decide, p, p, 0, &v);
            let s = &mut self.slots[p.0];
            if s.decision.is_some() {
                s.extra_decisions += 1;
            } else {
                s.decision = Some(v);
                s.decided_at = Some(self.step);
            }
        }
    }

    fn apply_injections(&mut self, injections: Vec<(ProcessId, ProcessId, P::Msg)>) {
        for (src, dst, msg) in injections {
            self.enqueue(src, dst, msg, EventKind::Inject);
        }
    }

    /// Inject a message on behalf of a faulty process.
    pub fn inject(&mut self, src: ProcessId, dst: ProcessId, msg: P::Msg) -> Result<(), SimError> {
        if src.0 >= self.n {
            return Err(SimError::UnknownProcess(src));
        }
        if dst.0 >= self.n {
            return Err(SimError::UnknownProcess(dst));
        }
        if self.correct.contains(&src) {
            return Err(SimError::CorrectInjection(src));
        }
        if src == dst {
            return Err(SimError::SelfInjection(src));
        }
        self.enqueue(src, dst, msg, EventKind::Inject);
        Ok(())
    }

    pub fn freeze_all(&mut self) {
        for s in &mut self.slots {
            if let Some(p) = s.process.as_mut() {
                p.freeze();
            }
        }
    }

    pub fn report(&self, outcome: RunOutcome) -> RunReport {
        RunReport {
            outcome,
            steps: self.step,
            decisions: self.slots.iter().map(|s| s.decision).collect(),
            decided_at: self.slots.iter().map(|s| s.decided_at).collect(),
            double_decides: self
                .slots
                .iter()
                .enumerate()
                .filter(|(_, s)| s.extra_decisions > 0)
                .map(|(i, _)| ProcessId(i))
                .collect(),
            trace_hash: self.trace.hash(),
        }
    }
}

impl<P: Process + Hash> World<P>
where
    P::Msg: Hash,
{
    /// Hash of process states and in-flight payloads; used to merge
    /// equivalent states during exhaustive exploration.
    pub fn state_fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for s in &self.slots {
            s.process.hash(&mut h);
            s.crashed.hash(&mut h);
            s.decision.hash(&mut h);
        }
        for q in &self.queues {
            q.len().hash(&mut h);
            for e in q {
                e.payload.hash(&mut h);
            }
        }
        h.finish()
    }
}

/// World plus scheduler, random stream and adversary.
pub struct Engine<P: Process> {
    world: World<P>,
    scheduler: Scheduler,
    rng: Rng,
    adversary: Box<dyn Adversary<P::Msg>>,
    max_steps: u64,
    pending: Vec<Pair>,
}

pub fn trace_header(config: &SystemConfig, policy: &SchedulerPolicy) -> String {
    let correct: Vec<String> = config.correct.iter().map(|p| p.0.to_string()).collect();
    format!(
        "{TRACE_FORMAT} rng={RNG_ID} seed={} n={} f={} correct={} scheduler={}",
        config.seed,
        config.n,
        config.f,
        correct.join(":"),
        policy
    )
}

impl<P: Process> Engine<P> {
    pub fn new(
        config: &SystemConfig,
        policy: SchedulerPolicy,
        hosts: Vec<Host<P>>,
        adversary: Box<dyn Adversary<P::Msg>>,
        trace_mode: TraceMode,
    ) -> Result<Self, ConfigError> {
        if let SchedulerPolicy::WeightedMin { eps: Some(e) } = policy {
            if !(e > 0.0 && e.is_finite()) {
                return Err(ConfigError::Invalid(format!(
                    "weighted eps {e} must be positive"
                )));
            }
        }
        let trace = Trace::new(trace_mode, trace_header(config, &policy));
        let world = World::new(config, hosts, trace)?;
        Ok(Engine {
            scheduler: Scheduler::new(policy, config.n),
            world,
            rng: Rng::seed_from_u64(config.seed),
            adversary,
            max_steps: config.max_steps,
            pending: Vec::new(),
        })
    }

    pub fn world(&self) -> &World<P> {
        &self.world
    }

    pub fn world_mut(&mut self) -> &mut World<P> {
        &mut self.world
    }

    pub fn into_world(self) -> World<P> {
        self.world
    }

    pub fn inject(&mut self, src: ProcessId, dst: ProcessId, msg: P::Msg) -> Result<(), SimError> {
        self.world.inject(src, dst, msg)
    }

    pub fn start(&mut self) {
        self.world.start(self.adversary.as_mut());
    }

    /// Perform one step. Returns `None` when nothing is pending.
    pub fn step(&mut self) -> Option<Pair> {
        self.start();
        self.world.apply_crashes();
        self.world.adversary_tick(self.adversary.as_mut());
        self.world.pending_into(&mut self.pending);
        if self.pending.is_empty() {
            return None;
        }
        let i = self.scheduler.draw(&self.pending, &mut self.rng);
        let pair = self.pending[i];
        self.world.deliver_pair(pair, self.adversary.as_mut());
        Some(pair)
    }

    /// Step until every correct process finishes, the ledger empties, or
    /// the horizon is reached.
    pub fn run(&mut self) -> RunReport {
        self.start();
        let outcome = loop {
            if self.world.all_correct_finished() {
                break RunOutcome::Finished;
            }
            if self.world.step >= self.max_steps {
                break RunOutcome::Horizon;
            }
            if self.step().is_none() {
                break RunOutcome::Quiescent;
            }
        };
        self.world.report(outcome)
    }

    /// Freeze every host and deliver what is in flight, up to `cap` more
    /// steps. Returns true if the ledger emptied.
    pub fn drain(&mut self, cap: u64) -> bool {
        self.start();
        self.world.freeze_all();
        let limit = self.world.step.saturating_add(cap);
        while self.world.step < limit {
            if self.step().is_none() {
                return true;
            }
        }
        self.world.is_quiescent()
    }
}
