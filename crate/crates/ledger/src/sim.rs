//! Deterministic in-process network for consensus groups.
//!
//! Messages sit in a delivery queue keyed by `(tick, sequence)`; delays and
//! drops come from one seeded generator, Byzantine behaviour from another.
//! The whole trace is a function of the configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{verify_chain, LedgerEntry};
use crate::consensus::{
    leader_of, quorum, sign_header, sign_vote, Block, Command, Dest, Message, Outgoing, Phase, Replica, ReplicaConfig,
};
use crate::crypto::{KeyedHashScheme, NodeId, SignatureScheme};

/// Scripted misbehaviour of one node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fault {
    /// Stops at tick `at`; honest until then.
    Crash { node: NodeId, at: u64 },
    /// As leader, sends conflicting proposals to different replicas and votes
    /// for both.
    Equivocate { node: NodeId },
    /// Re-broadcasts messages it received earlier.
    StaleReplay { node: NodeId },
    /// Never sends a vote.
    WithholdVotes { node: NodeId },
}

impl Fault {
    pub fn node(&self) -> NodeId {
        match self {
            Fault::Crash { node, .. }
            | Fault::Equivocate { node }
            | Fault::StaleReplay { node }
            | Fault::WithholdVotes { node } => *node,
        }
    }

    /// Crashes are benign; everything else counts against `f`.
    pub fn is_byzantine(&self) -> bool {
        !matches!(self, Fault::Crash { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimNetConfig {
    pub n_nodes: usize,
    pub f_byzantine: usize,
    pub seed: u64,
    pub drop_rate: f64,
    /// Delivery delay in ticks, uniform over `[min_delay, max_delay]`.
    pub min_delay: u64,
    pub max_delay: u64,
    pub faults: Vec<Fault>,
    pub max_batch: usize,
    pub base_timeout: u64,
    pub resend_interval: u64,
}

impl Default for SimNetConfig {
    fn default() -> Self {
        let r = ReplicaConfig::default();
        SimNetConfig {
            n_nodes: 4,
            f_byzantine: 1,
            seed: 0,
            drop_rate: 0.0,
            min_delay: 1,
            max_delay: 3,
            faults: Vec::new(),
            max_batch: r.max_batch,
            base_timeout: r.base_timeout,
            resend_interval: r.resend_interval,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("{n} nodes cannot tolerate {f} Byzantine faults; need at least {}", 3 * f + 1)]
    TooFewNodes { n: usize, f: usize },
    #[error("{scripted} Byzantine faults scripted but f = {f}")]
    TooManyByzantine { scripted: usize, f: usize },
    #[error("fault names node {0}, which does not exist")]
    UnknownNode(NodeId),
    #[error("node {0} has more than one fault")]
    DuplicateFault(NodeId),
    #[error("invalid network parameter: {0}")]
    InvalidNetwork(&'static str),
    #[error("invalid scenario file: {0}")]
    Parse(String),
}

impl SimNetConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let (n, f) = (self.n_nodes, self.f_byzantine);
        if n == 0 || n < 3 * f + 1 {
            return Err(ScenarioError::TooFewNodes { n, f });
        }
        let mut seen = vec![false; n];
        for fault in &self.faults {
            let node = fault.node();
            if node >= n {
                return Err(ScenarioError::UnknownNode(node));
            }
            if std::mem::replace(&mut seen[node], true) {
                return Err(ScenarioError::DuplicateFault(node));
            }
        }
        let scripted = self.faults.iter().filter(|f| f.is_byzantine()).count();
        if scripted > f {
            return Err(ScenarioError::TooManyByzantine { scripted, f });
        }
        if !(0.0..1.0).contains(&self.drop_rate) {
            return Err(ScenarioError::InvalidNetwork("drop_rate must lie in [0, 1)"));
        }
        if self.min_delay == 0 || self.min_delay > self.max_delay {
            return Err(ScenarioError::InvalidNetwork("delays need 1 <= min_delay <= max_delay"));
        }
        if self.max_batch == 0 || self.base_timeout == 0 || self.resend_interval == 0 {
            return Err(ScenarioError::InvalidNetwork("max_batch, base_timeout and resend_interval must be positive"));
        }
        Ok(())
    }

    fn replica_config(&self) -> ReplicaConfig {
        ReplicaConfig {
            n: self.n_nodes,
            f: self.f_byzantine,
            max_batch: self.max_batch,
            base_timeout: self.base_timeout,
            resend_interval: self.resend_interval,
        }
    }
}

/// Two honest logs disagreeing, or one honest log failing verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Divergence {
    pub index: usize,
    pub a: NodeId,
    pub b: NodeId,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.a == self.b {
            write!(f, "node {} has a broken chain at index {}", self.a, self.index)
        } else {
            write!(f, "nodes {} and {} differ at index {}", self.a, self.b, self.index)
        }
    }
}

const REPLAY_MEMORY: usize = 256;
const REPLAY_RATE: f64 = 0.25;

struct Envelope {
    from: NodeId,
    to: NodeId,
    msg: Message,
}

pub struct Simulation {
    cfg: SimNetConfig,
    replicas: Vec<Replica>,
    faults: Vec<Option<Fault>>,
    scheme: Arc<dyn SignatureScheme>,
    queue: BTreeMap<(u64, u64), Envelope>,
    seq: u64,
    now: u64,
    net_rng: ChaCha8Rng,
    fault_rng: ChaCha8Rng,
    replay: Vec<Vec<Message>>,
    next_request: u64,
    sent: u64,
    dropped: u64,
    trace: Option<Vec<String>>,
}

impl Simulation {
    pub fn new(cfg: SimNetConfig) -> Result<Self, ScenarioError> {
        cfg.validate()?;
        let scheme: Arc<dyn SignatureScheme> = Arc::new(KeyedHashScheme::new(cfg.n_nodes, cfg.seed));
        let rc = cfg.replica_config();
        let replicas = (0..cfg.n_nodes).map(|i| Replica::new(i, rc, scheme.clone())).collect();
        let mut faults = vec![None; cfg.n_nodes];
        for fault in &cfg.faults {
            faults[fault.node()] = Some(fault.clone());
        }
        let net_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut fault_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        fault_rng.set_stream(1);
        Ok(Simulation {
            replay: vec![Vec::new(); cfg.n_nodes],
            cfg,
            replicas,
            faults,
            scheme,
            queue: BTreeMap::new(),
            seq: 0,
            now: 0,
            net_rng,
            fault_rng,
            next_request: 0,
            sent: 0,
            dropped: 0,
            trace: None,
        })
    }

    /// Records one line per message from now on.
    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn trace(&self) -> &[String] {
        self.trace.as_deref().unwrap_or(&[])
    }

    pub fn config(&self) -> &SimNetConfig {
        &self.cfg
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn replica(&self, id: NodeId) -> &Replica {
        &self.replicas[id]
    }

    pub fn is_byzantine(&self, id: NodeId) -> bool {
        self.faults[id].as_ref().is_some_and(Fault::is_byzantine)
    }

    pub fn is_alive(&self, id: NodeId) -> bool {
        !matches!(self.faults[id], Some(Fault::Crash { at, .. }) if self.now >= at)
    }

    /// Replicas running the protocol faithfully, crashed or not.
    pub fn honest(&self) -> Vec<NodeId> {
        (0..self.cfg.n_nodes).filter(|i| !self.is_byzantine(*i)).collect()
    }

    pub fn live_honest(&self) -> Vec<NodeId> {
        self.honest().into_iter().filter(|i| self.is_alive(*i)).collect()
    }

    /// Whether enough honest replicas are up to form a quorum.
    pub fn has_quorum(&self) -> bool {
        self.live_honest().len() >= quorum(self.cfg.n_nodes, self.cfg.f_byzantine)
    }

    pub fn messages_sent(&self) -> u64 {
        self.sent
    }

    pub fn messages_dropped(&self) -> u64 {
        self.dropped
    }

    /// Hands a client command to every live replica; returns its request id.
    pub fn submit(&mut self, payload: Vec<u8>) -> u64 {
        let id = self.next_request;
        self.next_request += 1;
        let client = self.cfg.n_nodes;
        for to in 0..self.cfg.n_nodes {
            if self.is_alive(to) {
                let cmd = Command { id, payload: payload.clone() };
                self.enqueue(client, to, Message::Request(cmd), self.now + 1);
            }
        }
        id
    }

    pub fn submitted(&self) -> u64 {
        self.next_request
    }

    fn enqueue(&mut self, from: NodeId, to: NodeId, msg: Message, at: u64) {
        self.queue.insert((at, self.seq), Envelope { from, to, msg });
        self.seq += 1;
    }

    fn send(&mut self, from: NodeId, to: NodeId, msg: Message) {
        if from == to {
            return;
        }
        self.sent += 1;
        let dropped = self.net_rng.random::<f64>() < self.cfg.drop_rate;
        let delay = self.net_rng.random_range(self.cfg.min_delay..=self.cfg.max_delay);
        if let Some(trace) = &mut self.trace {
            let fate = if dropped { "DROP".to_owned() } else { format!("@{}", self.now + delay) };
            trace.push(format!("t={} {from}->{to} {fate} {}", self.now, msg.describe()));
        }
        if dropped {
            self.dropped += 1;
        } else {
            self.enqueue(from, to, msg, self.now + delay);
        }
    }

    fn others(&self, of: NodeId) -> Vec<NodeId> {
        (0..self.cfg.n_nodes).filter(|j| *j != of).collect()
    }

    fn route(&mut self, from: NodeId) {
        let outbox = self.replicas[from].take_outbox();
        for Outgoing { to, msg } in outbox {
            let targets = match to {
                Dest::Others => self.others(from),
                Dest::To(j) => vec![j],
            };
            match self.faults[from].clone() {
                Some(Fault::WithholdVotes { .. }) if matches!(msg, Message::Vote(_)) => {}
                Some(Fault::Equivocate { .. }) if matches!(msg, Message::Propose { .. }) && to == Dest::Others => {
                    self.equivocate(from, msg, targets);
                }
                _ => {
                    for j in targets {
                        self.send(from, j, msg.clone());
                    }
                }
            }
        }
    }

    /// Sends the real proposal to the first recipient and a conflicting one to
    /// the rest, then votes for the conflicting block everywhere.
    fn equivocate(&mut self, from: NodeId, msg: Message, targets: Vec<NodeId>) {
        let Message::Propose { block, header } = msg else { unreachable!() };
        let alt = conflicting(&block);
        let alt_header = sign_header(&*self.scheme, from, header.view, &alt);
        let (first, rest) = targets.split_at(1.min(targets.len()));
        for &j in first {
            self.send(from, j, Message::Propose { block: block.clone(), header });
        }
        for &j in rest {
            self.send(from, j, Message::Propose { block: alt.clone(), header: alt_header });
        }
        for phase in [Phase::Prepare, Phase::Commit] {
            let vote = sign_vote(&*self.scheme, from, phase, &alt_header);
            for &j in &targets {
                self.send(from, j, Message::Vote(vote.clone()));
            }
        }
    }

    /// Advances one tick: delivers due messages, then runs every timer.
    pub fn step(&mut self) {
        self.now += 1;
        while let Some(entry) = self.queue.first_entry() {
            if entry.key().0 > self.now {
                break;
            }
            let Envelope { from, to, msg } = entry.remove();
            if !self.is_alive(to) {
                continue;
            }
            if matches!(self.faults[to], Some(Fault::StaleReplay { .. })) && !matches!(msg, Message::Request(_)) {
                let memory = &mut self.replay[to];
                if memory.len() == REPLAY_MEMORY {
                    memory.remove(0);
                }
                memory.push(msg.clone());
            }
            self.replicas[to].handle(from, msg, self.now);
            self.route(to);
        }
        for i in 0..self.cfg.n_nodes {
            if !self.is_alive(i) {
                continue;
            }
            self.replicas[i].tick(self.now);
            self.route(i);
            if matches!(self.faults[i], Some(Fault::StaleReplay { .. }))
                && !self.replay[i].is_empty()
                && self.fault_rng.random::<f64>() < REPLAY_RATE
            {
                let k = self.fault_rng.random_range(0..self.replay[i].len());
                let msg = self.replay[i][k].clone();
                for j in self.others(i) {
                    self.send(i, j, msg.clone());
                }
            }
        }
    }

    /// Index at which every live honest replica committed `request`.
    pub fn committed_index(&self, request: u64) -> Option<u64> {
        let mut index = None;
        for i in self.live_honest() {
            let at = self.replicas[i].index_of(request)?;
            if *index.get_or_insert(at) != at {
                return None;
            }
        }
        index
    }

    /// Whether every live honest replica has committed every submitted request.
    pub fn all_committed(&self) -> bool {
        self.live_honest().into_iter().all(|i| {
            let r = &self.replicas[i];
            r.commit_index() as u64 >= self.next_request && (0..self.next_request).all(|id| r.index_of(id).is_some())
        })
    }

    /// Steps until `done` holds or `max_ticks` more ticks have passed.
    pub fn run_until(&mut self, max_ticks: u64, mut done: impl FnMut(&Simulation) -> bool) -> bool {
        let deadline = self.now + max_ticks;
        while !done(self) {
            if self.now >= deadline {
                return false;
            }
            self.step();
        }
        true
    }

    /// Longest committed log among honest replicas.
    pub fn committed_log(&self) -> &[LedgerEntry] {
        self.honest().into_iter().map(|i| self.replicas[i].log()).max_by_key(|log| log.len()).unwrap_or(&[])
    }

    /// Honest logs must be prefixes of one another and verify from genesis.
    pub fn check_safety(&self) -> Result<(), Divergence> {
        let honest = self.honest();
        for &a in &honest {
            if let Err(b) = verify_chain(self.replicas[a].log()) {
                return Err(Divergence { index: b.index, a, b: a });
            }
        }
        for (k, &a) in honest.iter().enumerate() {
            for &b in &honest[k + 1..] {
                let (la, lb) = (self.replicas[a].log(), self.replicas[b].log());
                if let Some(index) = la.iter().zip(lb).position(|(x, y)| x != y) {
                    return Err(Divergence { index, a, b });
                }
            }
        }
        Ok(())
    }

    /// `(tick, view, leader)` of each view installed by any honest replica,
    /// first installation only.
    pub fn leader_changes(&self) -> Vec<(u64, u64, NodeId)> {
        let mut first: BTreeMap<u64, u64> = BTreeMap::new();
        for i in self.honest() {
            for &(tick, view) in self.replicas[i].view_history() {
                let t = first.entry(view).or_insert(tick);
                *t = (*t).min(tick);
            }
        }
        let mut out: Vec<_> = first.into_iter().map(|(v, t)| (t, v, leader_of(v, self.cfg.n_nodes))).collect();
        out.sort();
        out
    }
}

/// A different but well-formed block at the same height.
fn conflicting(block: &Block) -> Block {
    let mut entries = block.entries.clone();
    if entries.len() >= 2 {
        entries.pop();
    } else if let Some(e) = entries.first_mut() {
        e.payload.push(0xff);
    }
    let mut prev = block.parent;
    for e in &mut entries {
        *e = LedgerEntry::new(e.index, e.request, prev, std::mem::take(&mut e.payload));
        prev = e.digest;
    }
    Block { height: block.height, parent: block.parent, entries }
}

/// A simulation run described declaratively.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    #[serde(flatten)]
    pub net: SimNetConfig,
    pub commands: usize,
    /// Commands submitted per tick until all are in.
    pub commands_per_tick: usize,
    pub max_ticks: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario { net: SimNetConfig::default(), commands: 1000, commands_per_tick: 20, max_ticks: 20_000 }
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        s.net.validate()?;
        if s.commands_per_tick == 0 {
            return Err(ScenarioError::InvalidNetwork("commands_per_tick must be positive"));
        }
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serialises")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub ticks: u64,
    /// Committed entries per node.
    pub committed: Vec<usize>,
    pub all_committed: bool,
    pub safety: Result<(), Divergence>,
    /// `(tick, view, leader)` per installed view.
    pub leaders: Vec<(u64, u64, NodeId)>,
    pub messages: u64,
    pub dropped: u64,
}

impl SimReport {
    pub fn verdict(&self) -> String {
        match &self.safety {
            Ok(()) => "safety held".to_owned(),
            Err(d) => format!("safety violated: {d}"),
        }
    }
}

/// Runs a scenario to completion or `max_ticks`; returns the report and the
/// trace if requested.
pub fn run_scenario(s: &Scenario, trace: bool) -> Result<(SimReport, Vec<String>), ScenarioError> {
    if s.commands_per_tick == 0 {
        return Err(ScenarioError::InvalidNetwork("commands_per_tick must be positive"));
    }
    let mut sim = Simulation::new(s.net.clone())?;
    if trace {
        sim.enable_trace();
    }
    let mut submitted = 0usize;
    while sim.now() < s.max_ticks {
        while submitted < s.commands && submitted < (sim.now() as usize + 1) * s.commands_per_tick {
            sim.submit(format!("cmd-{submitted}").into_bytes());
            submitted += 1;
        }
        if submitted == s.commands && sim.all_committed() {
            break;
        }
        sim.step();
    }
    let report = SimReport {
        ticks: sim.now(),
        committed: (0..s.net.n_nodes).map(|i| sim.replica(i).commit_index()).collect(),
        all_committed: submitted == s.commands && sim.all_committed(),
        safety: sim.check_safety(),
        leaders: sim.leader_changes(),
        messages: sim.messages_sent(),
        dropped: sim.messages_dropped(),
    };
    let lines = sim.trace.take().unwrap_or_default();
    Ok((report, lines))
}
