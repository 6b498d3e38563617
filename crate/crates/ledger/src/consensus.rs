//! Byzantine-hardened leader-based replication.
//!
//! Views have a fixed leader (`view mod n`). The leader proposes one block at
//! a time on top of the committed chain. Replicas broadcast signed prepare
//! votes; a quorum of prepares locks the block and triggers a signed commit
//! vote; a quorum of commits commits it. A quorum is `⌊(n+f)/2⌋ + 1` so any two
//! quorums share an honest replica.
//!
//! Prepare votes carry the leader's signed proposal header, so two headers for
//! one `(view, height)` are a transferable equivocation proof that deposes the
//! leader. View changes report each replica's commit certificate and lock; the
//! next leader must re-propose the highest lock above the highest commit.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::chain::{tip, verify_extension, LedgerEntry};
use crate::crypto::{short, Digest, NodeId, Signature, SignatureScheme};

pub fn quorum(n: usize, f: usize) -> usize {
    (n + f) / 2 + 1
}

pub fn leader_of(view: u64, n: usize) -> NodeId {
    (view % n as u64) as NodeId
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Command {
    pub id: u64,
    pub payload: Vec<u8>,
}

/// A batch of entries extending the chain whose tip is `parent`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    /// 1-based position in the sequence of committed blocks.
    pub height: u64,
    pub parent: Digest,
    pub entries: Vec<LedgerEntry>,
}

impl Block {
    pub fn build(height: u64, log: &[LedgerEntry], commands: &[Command]) -> Self {
        let parent = tip(log);
        let mut prev = parent;
        let mut entries = Vec::with_capacity(commands.len());
        for (i, c) in commands.iter().enumerate() {
            let e = LedgerEntry::new(log.len() as u64 + i as u64, c.id, prev, c.payload.clone());
            prev = e.digest;
            entries.push(e);
        }
        Block { height, parent, entries }
    }

    /// Tail entry digest; it certifies the whole prefix.
    pub fn digest(&self) -> Digest {
        self.entries.last().map_or(self.parent, |e| e.digest)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    Prepare,
    Commit,
}

fn statement(tag: u8, view: u64, height: u64, digest: &Digest) -> Vec<u8> {
    let mut m = Vec::with_capacity(49);
    m.push(tag);
    m.extend_from_slice(&view.to_be_bytes());
    m.extend_from_slice(&height.to_be_bytes());
    m.extend_from_slice(digest);
    m
}

fn proposal_statement(view: u64, height: u64, digest: &Digest) -> Vec<u8> {
    statement(0, view, height, digest)
}

fn vote_statement(phase: Phase, view: u64, height: u64, digest: &Digest) -> Vec<u8> {
    statement(if phase == Phase::Prepare { 1 } else { 2 }, view, height, digest)
}

/// Signs a proposal header as `signer`.
pub fn sign_header(scheme: &dyn SignatureScheme, signer: NodeId, view: u64, block: &Block) -> Header {
    let digest = block.digest();
    let sig = scheme.sign(signer, &proposal_statement(view, block.height, &digest));
    Header { view, height: block.height, digest, sig }
}

/// Signs a vote as `voter`.
pub fn sign_vote(scheme: &dyn SignatureScheme, voter: NodeId, phase: Phase, header: &Header) -> Vote {
    let sig = scheme.sign(voter, &vote_statement(phase, header.view, header.height, &header.digest));
    Vote {
        phase,
        view: header.view,
        height: header.height,
        digest: header.digest,
        voter,
        sig,
        header: (phase == Phase::Prepare).then_some(*header),
    }
}

/// Leader-signed `(view, height, digest)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub view: u64,
    pub height: u64,
    pub digest: Digest,
    pub sig: Signature,
}

impl Header {
    fn valid(&self, scheme: &dyn SignatureScheme, n: usize) -> bool {
        scheme.verify(leader_of(self.view, n), &proposal_statement(self.view, self.height, &self.digest), &self.sig)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub phase: Phase,
    pub view: u64,
    pub height: u64,
    pub digest: Digest,
    pub voter: NodeId,
    pub sig: Signature,
    /// The proposal header a prepare vote answers.
    pub header: Option<Header>,
}

/// Quorum certificate: signed votes of one phase on one `(view, height, digest)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Qc {
    pub phase: Phase,
    pub view: u64,
    pub height: u64,
    pub digest: Digest,
    pub votes: Vec<(NodeId, Signature)>,
}

impl Qc {
    pub fn valid(&self, scheme: &dyn SignatureScheme, quorum: usize) -> bool {
        let msg = vote_statement(self.phase, self.view, self.height, &self.digest);
        let mut voters = BTreeSet::new();
        for (voter, sig) in &self.votes {
            if !voters.insert(*voter) || !scheme.verify(*voter, &msg, sig) {
                return false;
            }
        }
        voters.len() >= quorum
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewChange {
    pub new_view: u64,
    pub sender: NodeId,
    /// Commit certificate of the sender's last committed block.
    pub committed: Option<Qc>,
    /// Highest prepare certificate above the committed height, with its block.
    pub lock: Option<(Qc, Block)>,
    pub sig: Signature,
}

impl ViewChange {
    fn statement(new_view: u64, committed: &Option<Qc>, lock: &Option<(Qc, Block)>) -> Vec<u8> {
        let mut m = statement(3, new_view, 0, &[0; 32]);
        if let Some(qc) = committed {
            m.extend(statement(4, qc.view, qc.height, &qc.digest));
        }
        if let Some((qc, _)) = lock {
            m.extend(statement(5, qc.view, qc.height, &qc.digest));
        }
        m
    }

    pub fn committed_height(&self) -> u64 {
        self.committed.as_ref().map_or(0, |qc| qc.height)
    }

    fn valid(&self, scheme: &dyn SignatureScheme, quorum: usize) -> bool {
        let msg = Self::statement(self.new_view, &self.committed, &self.lock);
        if !scheme.verify(self.sender, &msg, &self.sig) {
            return false;
        }
        if let Some(qc) = &self.committed {
            if qc.phase != Phase::Commit || !qc.valid(scheme, quorum) {
                return false;
            }
        }
        if let Some((qc, block)) = &self.lock {
            if qc.phase != Phase::Prepare
                || qc.height != block.height
                || qc.digest != block.digest()
                || block.height <= self.committed_height()
                || !qc.valid(scheme, quorum)
            {
                return false;
            }
        }
        true
    }
}

/// What a valid set of view changes obliges the new leader to do.
#[derive(Clone, Debug, PartialEq)]
struct Selection {
    /// Highest proven committed height, and who proved it.
    committed: u64,
    source: NodeId,
    /// Block the leader must re-propose at `committed + 1`.
    required: Option<Block>,
}

fn select(vcs: &[ViewChange]) -> Selection {
    let mut committed = 0;
    let mut source = vcs.first().map_or(0, |vc| vc.sender);
    for vc in vcs {
        if vc.committed_height() > committed {
            committed = vc.committed_height();
            source = vc.sender;
        }
    }
    let required = vcs
        .iter()
        .filter_map(|vc| vc.lock.as_ref())
        .filter(|(qc, _)| qc.height == committed + 1)
        .max_by_key(|(qc, _)| qc.view)
        .map(|(_, block)| block.clone());
    Selection { committed, source, required }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewView {
    pub view: u64,
    pub proof: Vec<ViewChange>,
    pub proposal: Option<(Block, Header)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Message {
    Request(Command),
    Propose { block: Block, header: Header },
    Vote(Vote),
    ViewChange(ViewChange),
    NewView(NewView),
    Evidence { a: Header, b: Header },
    Fetch { from_height: u64 },
    Blocks(Vec<(Block, Qc)>),
}

impl Message {
    /// One-line summary for traces.
    pub fn describe(&self) -> String {
        match self {
            Message::Request(c) => format!("request id={}", c.id),
            Message::Propose { block, header } => format!(
                "propose v={} h={} d={} n={}",
                header.view,
                header.height,
                short(&header.digest),
                block.entries.len()
            ),
            Message::Vote(v) => format!(
                "{} v={} h={} d={} voter={}",
                if v.phase == Phase::Prepare { "prepare" } else { "commit" },
                v.view,
                v.height,
                short(&v.digest),
                v.voter
            ),
            Message::ViewChange(vc) => format!(
                "view-change to={} from={} committed={} lock={}",
                vc.new_view,
                vc.sender,
                vc.committed_height(),
                vc.lock.as_ref().map_or("none".to_owned(), |(qc, _)| format!("v{}h{}", qc.view, qc.height))
            ),
            Message::NewView(nv) => format!(
                "new-view v={} proof={} proposal={}",
                nv.view,
                nv.proof.len(),
                nv.proposal.as_ref().map_or("none".to_owned(), |(_, h)| format!("h{}", h.height))
            ),
            Message::Evidence { a, .. } => format!("evidence v={} h={}", a.view, a.height),
            Message::Fetch { from_height } => format!("fetch from={from_height}"),
            Message::Blocks(b) => format!("blocks n={}", b.len()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dest {
    /// Every other replica.
    Others,
    To(NodeId),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outgoing {
    pub to: Dest,
    pub msg: Message,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Leader,
    Follower,
    /// Waiting for a new view to be installed.
    Candidate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicaConfig {
    pub n: usize,
    pub f: usize,
    /// Most commands per block.
    pub max_batch: usize,
    /// Ticks without progress before a view change; doubles per failed view.
    pub base_timeout: u64,
    /// Ticks between retransmissions.
    pub resend_interval: u64,
}

impl Default for ReplicaConfig {
    fn default() -> Self {
        ReplicaConfig { n: 4, f: 1, max_batch: 100, base_timeout: 40, resend_interval: 8 }
    }
}

const FETCH_LIMIT: usize = 64;

/// One replica's state machine. It owns its log; it talks to the world only
/// through the messages it is handed and the [`Outgoing`] messages it emits.
pub struct Replica {
    id: NodeId,
    cfg: ReplicaConfig,
    scheme: Arc<dyn SignatureScheme>,
    view: u64,
    normal: bool,
    log: Vec<LedgerEntry>,
    certificates: Vec<Qc>,
    /// Log length after each committed block.
    block_ends: Vec<usize>,
    committed_ids: HashMap<u64, u64>,
    pending: BTreeMap<u64, Vec<u8>>,
    headers: BTreeMap<(u64, u64), Header>,
    bodies: HashMap<Digest, Block>,
    buffered: BTreeMap<u64, Vec<(Block, Header)>>,
    voted: BTreeSet<(Phase, u64, u64)>,
    votes: BTreeMap<(Phase, u64, u64, Digest), BTreeMap<NodeId, Signature>>,
    my_votes: Vec<Vote>,
    own_proposal: Option<(Block, Header)>,
    lock: Option<(Qc, Block)>,
    required: Option<(u64, Digest)>,
    view_changes: BTreeMap<u64, BTreeMap<NodeId, ViewChange>>,
    new_view: Option<NewView>,
    heard_in_view: BTreeSet<NodeId>,
    last_progress: u64,
    attempts: u32,
    last_resend: u64,
    last_fetch: Option<u64>,
    view_history: Vec<(u64, u64)>,
    outbox: Vec<Outgoing>,
    now: u64,
}

impl Replica {
    pub fn new(id: NodeId, cfg: ReplicaConfig, scheme: Arc<dyn SignatureScheme>) -> Self {
        Replica {
            id,
            cfg,
            scheme,
            view: 0,
            normal: true,
            log: Vec::new(),
            certificates: Vec::new(),
            block_ends: Vec::new(),
            committed_ids: HashMap::new(),
            pending: BTreeMap::new(),
            headers: BTreeMap::new(),
            bodies: HashMap::new(),
            buffered: BTreeMap::new(),
            voted: BTreeSet::new(),
            votes: BTreeMap::new(),
            my_votes: Vec::new(),
            own_proposal: None,
            lock: None,
            required: None,
            view_changes: BTreeMap::new(),
            new_view: None,
            heard_in_view: BTreeSet::new(),
            last_progress: 0,
            attempts: 0,
            last_resend: 0,
            last_fetch: None,
            view_history: vec![(0, 0)],
            outbox: Vec::new(),
            now: 0,
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn view(&self) -> u64 {
        self.view
    }

    pub fn role(&self) -> Role {
        if !self.normal {
            Role::Candidate
        } else if leader_of(self.view, self.cfg.n) == self.id {
            Role::Leader
        } else {
            Role::Follower
        }
    }

    /// Committed entries; never rewritten.
    pub fn log(&self) -> &[LedgerEntry] {
        &self.log
    }

    pub fn commit_index(&self) -> usize {
        self.log.len()
    }

    pub fn committed_height(&self) -> u64 {
        self.certificates.len() as u64
    }

    /// Log index of a committed request.
    pub fn index_of(&self, request: u64) -> Option<u64> {
        self.committed_ids.get(&request).copied()
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    /// `(tick, view)` of every installed view, starting with view 0.
    pub fn view_history(&self) -> &[(u64, u64)] {
        &self.view_history
    }

    pub fn take_outbox(&mut self) -> Vec<Outgoing> {
        std::mem::take(&mut self.outbox)
    }

    pub fn scheme(&self) -> &Arc<dyn SignatureScheme> {
        &self.scheme
    }

    fn quorum(&self) -> usize {
        quorum(self.cfg.n, self.cfg.f)
    }

    fn leader(&self) -> NodeId {
        leader_of(self.view, self.cfg.n)
    }

    fn send(&mut self, to: Dest, msg: Message) {
        self.outbox.push(Outgoing { to, msg });
    }

    pub fn handle(&mut self, from: NodeId, msg: Message, now: u64) {
        self.now = now;
        if from != self.id && self.normal {
            if let Message::Vote(v) = &msg {
                if v.view == self.view {
                    self.heard_in_view.insert(from);
                }
            }
        }
        match msg {
            Message::Request(c) => self.on_request(c, now),
            Message::Propose { block, header } => self.on_propose(from, block, header, now),
            Message::Vote(v) => self.on_vote(v, now),
            Message::ViewChange(vc) => self.on_view_change(vc, now),
            Message::NewView(nv) => self.on_new_view(from, nv, now),
            Message::Evidence { a, b } => self.on_evidence(a, b, now),
            Message::Fetch { from_height } => self.on_fetch(from, from_height),
            Message::Blocks(blocks) => self.on_blocks(blocks),
        }
    }

    fn on_request(&mut self, c: Command, now: u64) {
        if self.committed_ids.contains_key(&c.id) {
            return;
        }
        if self.pending.is_empty() {
            self.last_progress = now;
        }
        self.pending.insert(c.id, c.payload);
        self.try_propose();
    }

    fn try_propose(&mut self) {
        if !self.normal || self.leader() != self.id || self.pending.is_empty() {
            return;
        }
        let height = self.committed_height() + 1;
        if self.headers.contains_key(&(self.view, height)) {
            return;
        }
        if matches!(self.required, Some((h, _)) if h == height) {
            return;
        }
        let commands: Vec<Command> = self
            .pending
            .iter()
            .take(self.cfg.max_batch)
            .map(|(id, payload)| Command { id: *id, payload: payload.clone() })
            .collect();
        let block = Block::build(height, &self.log, &commands);
        let header = self.sign_header(height, block.digest());
        self.own_proposal = Some((block.clone(), header));
        self.send(Dest::Others, Message::Propose { block: block.clone(), header });
        self.record_header(header);
        self.accept_proposal(block, header);
    }

    fn sign_header(&self, height: u64, digest: Digest) -> Header {
        let sig = self.scheme.sign(self.id, &proposal_statement(self.view, height, &digest));
        Header { view: self.view, height, digest, sig }
    }

    fn on_propose(&mut self, from: NodeId, block: Block, header: Header, now: u64) {
        if header.view != self.view
            || !self.normal
            || from != self.leader()
            || header.height != block.height
            || header.digest != block.digest()
            || !header.valid(&*self.scheme, self.cfg.n)
        {
            return;
        }
        if !self.record_header(header) {
            return;
        }
        if header.height > self.committed_height() + 1 {
            self.buffered.entry(header.height).or_default().push((block, header));
            self.fetch(from, now);
            return;
        }
        self.accept_proposal(block, header);
    }

    /// Remembers the first header per `(view, height)`; a conflicting second
    /// one is equivocation.
    fn record_header(&mut self, header: Header) -> bool {
        match self.headers.get(&(header.view, header.height)) {
            Some(known) if known.digest != header.digest => {
                let known = *known;
                self.send(Dest::Others, Message::Evidence { a: known, b: header });
                if header.view == self.view {
                    self.start_view_change(self.view + 1, self.now);
                }
                false
            }
            Some(_) => true,
            None => {
                self.headers.insert((header.view, header.height), header);
                true
            }
        }
    }

    fn block_extends_log(&self, block: &Block) -> bool {
        if block.height != self.committed_height() + 1 || block.parent != tip(&self.log) || block.entries.is_empty() {
            return false;
        }
        let mut seen = BTreeSet::new();
        if !block.entries.iter().all(|e| !self.committed_ids.contains_key(&e.request) && seen.insert(e.request)) {
            return false;
        }
        verify_extension(&block.entries, self.log.len() as u64, block.parent).is_ok()
    }

    fn accept_proposal(&mut self, block: Block, header: Header) {
        let height = header.height;
        if height != self.committed_height() + 1 || header.view != self.view || !self.normal {
            return;
        }
        if let Some((h, d)) = self.required {
            if h == height && d != header.digest {
                return;
            }
        }
        if !self.block_extends_log(&block) || self.voted.contains(&(Phase::Prepare, self.view, height)) {
            return;
        }
        self.bodies.insert(header.digest, block);
        self.cast(Phase::Prepare, height, header.digest, Some(header));
    }

    fn cast(&mut self, phase: Phase, height: u64, digest: Digest, header: Option<Header>) {
        self.voted.insert((phase, self.view, height));
        let sig = self.scheme.sign(self.id, &vote_statement(phase, self.view, height, &digest));
        let vote = Vote { phase, view: self.view, height, digest, voter: self.id, sig, header };
        self.my_votes.retain(|v| v.phase != phase);
        self.my_votes.push(vote.clone());
        self.send(Dest::Others, Message::Vote(vote.clone()));
        self.count_vote(vote);
    }

    fn on_vote(&mut self, vote: Vote, now: u64) {
        if vote.height <= self.committed_height()
            || !self.scheme.verify(
                vote.voter,
                &vote_statement(vote.phase, vote.view, vote.height, &vote.digest),
                &vote.sig,
            )
        {
            return;
        }
        if let Some(header) = vote.header {
            if header.view == vote.view && header.height == vote.height && header.valid(&*self.scheme, self.cfg.n) {
                self.record_header(header);
            }
        }
        let (phase, view, height, digest) = (vote.phase, vote.view, vote.height, vote.digest);
        self.count_vote(vote);
        if phase == Phase::Commit
            && self.votes.get(&(phase, view, height, digest)).is_some_and(|v| v.len() >= self.quorum())
            && (height > self.committed_height() + 1 || !self.bodies.contains_key(&digest))
        {
            let voters: Vec<NodeId> = self.votes[&(phase, view, height, digest)].keys().copied().collect();
            let peer = voters[(now as usize) % voters.len()];
            self.fetch(peer, now);
        }
    }

    fn count_vote(&mut self, vote: Vote) {
        let key = (vote.phase, vote.view, vote.height, vote.digest);
        self.votes.entry(key).or_default().insert(vote.voter, vote.sig);
        self.advance(key);
    }

    fn certificate(&self, key: (Phase, u64, u64, Digest)) -> Option<Qc> {
        let votes = self.votes.get(&key)?;
        if votes.len() < self.quorum() {
            return None;
        }
        Some(Qc {
            phase: key.0,
            view: key.1,
            height: key.2,
            digest: key.3,
            votes: votes.iter().map(|(n, s)| (*n, *s)).collect(),
        })
    }

    /// Locks or commits if `key` has just reached a quorum.
    fn advance(&mut self, key: (Phase, u64, u64, Digest)) {
        let (phase, view, height, digest) = key;
        if height != self.committed_height() + 1 {
            return;
        }
        let Some(qc) = self.certificate(key) else { return };
        let Some(block) = self.bodies.get(&digest).cloned() else { return };
        match phase {
            Phase::Prepare => {
                if !self.normal || view != self.view || self.voted.contains(&(Phase::Commit, view, height)) {
                    return;
                }
                if !self.block_extends_log(&block) {
                    return;
                }
                if self.lock.as_ref().is_none_or(|(l, _)| l.height < height || l.view <= view) {
                    self.lock = Some((qc, block));
                }
                self.cast(Phase::Commit, height, digest, None);
            }
            Phase::Commit => {
                if self.block_extends_log(&block) {
                    self.commit(block, qc);
                }
            }
        }
    }

    fn commit(&mut self, block: Block, qc: Qc) {
        let now = self.now;
        for e in &block.entries {
            self.pending.remove(&e.request);
            self.committed_ids.insert(e.request, e.index);
        }
        self.log.extend(block.entries);
        self.certificates.push(qc);
        self.block_ends.push(self.log.len());
        let height = self.committed_height();
        self.attempts = 0;
        if self.lock.as_ref().is_some_and(|(l, _)| l.height <= height) {
            self.lock = None;
        }
        if self.required.is_some_and(|(h, _)| h <= height) {
            self.required = None;
        }
        if self.own_proposal.as_ref().is_some_and(|(b, _)| b.height <= height) {
            self.own_proposal = None;
        }
        self.my_votes.retain(|v| v.height > height);
        self.headers.retain(|(_, h), _| *h > height);
        self.votes.retain(|(_, _, h, _), _| *h > height);
        self.voted.retain(|(_, _, h)| *h > height);
        self.bodies.retain(|_, b| b.height > height);
        self.buffered.retain(|h, _| *h > height);
        self.view_changes.retain(|v, _| *v >= self.view);
        self.progress(now);

        let next = height + 1;
        if let Some(list) = self.buffered.remove(&next) {
            for (block, header) in list {
                self.accept_proposal(block, header);
            }
        }
        let keys: Vec<_> = self.votes.keys().filter(|k| k.2 == next).copied().collect();
        for key in keys {
            self.advance(key);
        }
        self.try_propose();
        if !self.normal && leader_of(self.view, self.cfg.n) == self.id {
            self.try_new_view(now);
        }
    }

    fn progress(&mut self, now: u64) {
        self.last_progress = self.last_progress.max(now);
    }

    fn fetch(&mut self, peer: NodeId, now: u64) {
        if peer == self.id || self.last_fetch.is_some_and(|t| now < t + self.cfg.resend_interval) {
            return;
        }
        self.last_fetch = Some(now);
        self.send(Dest::To(peer), Message::Fetch { from_height: self.committed_height() + 1 });
    }

    fn on_fetch(&mut self, from: NodeId, from_height: u64) {
        if from_height == 0 || from_height > self.committed_height() {
            return;
        }
        let first = from_height as usize - 1;
        let last = (first + FETCH_LIMIT).min(self.certificates.len());
        let blocks = (first..last)
            .map(|h| {
                let start = if h == 0 { 0 } else { self.block_ends[h - 1] };
                let parent = tip(&self.log[..start]);
                let entries = self.log[start..self.block_ends[h]].to_vec();
                (Block { height: h as u64 + 1, parent, entries }, self.certificates[h].clone())
            })
            .collect();
        self.send(Dest::To(from), Message::Blocks(blocks));
    }

    fn on_blocks(&mut self, blocks: Vec<(Block, Qc)>) {
        for (block, qc) in blocks {
            if block.height != self.committed_height() + 1 {
                continue;
            }
            if qc.phase != Phase::Commit
                || qc.height != block.height
                || qc.digest != block.digest()
                || !self.block_extends_log(&block)
                || !qc.valid(&*self.scheme, self.quorum())
            {
                break;
            }
            self.commit(block, qc);
        }
        self.last_fetch = None;
    }

    fn own_view_change(&self, new_view: u64) -> ViewChange {
        let committed = self.certificates.last().cloned();
        let lock = self.lock.clone().filter(|(qc, _)| qc.height > self.committed_height());
        let sig = self.scheme.sign(self.id, &ViewChange::statement(new_view, &committed, &lock));
        ViewChange { new_view, sender: self.id, committed, lock, sig }
    }

    fn start_view_change(&mut self, new_view: u64, now: u64) {
        if new_view < self.view || (new_view == self.view && !self.normal) {
            return;
        }
        self.view = new_view;
        self.normal = false;
        self.attempts = self.attempts.saturating_add(1);
        self.last_progress = now;
        self.own_proposal = None;
        self.new_view = None;
        self.heard_in_view.clear();
        let vc = self.own_view_change(new_view);
        self.send(Dest::Others, Message::ViewChange(vc.clone()));
        self.view_changes.entry(new_view).or_default().insert(self.id, vc);
        self.try_new_view(now);
    }

    fn on_view_change(&mut self, vc: ViewChange, now: u64) {
        if !vc.valid(&*self.scheme, self.quorum()) {
            return;
        }
        // Push missing blocks to a lagging sender; fetch from a leading one.
        if vc.committed_height() < self.committed_height() {
            self.on_fetch(vc.sender, vc.committed_height() + 1);
        } else if vc.committed_height() > self.committed_height() {
            self.fetch(vc.sender, now);
        }
        if vc.new_view < self.view {
            return;
        }
        self.view_changes.entry(vc.new_view).or_default().insert(vc.sender, vc);

        // Join the smallest higher view once f+1 others have moved past ours.
        let mut senders: BTreeMap<NodeId, u64> = BTreeMap::new();
        for (v, by) in self.view_changes.range(self.view + 1..) {
            for s in by.keys().filter(|s| **s != self.id) {
                senders.entry(*s).or_insert(*v);
            }
        }
        if senders.len() > self.cfg.f {
            let target = *senders.values().min().expect("non-empty");
            self.start_view_change(target, now);
        }
        if !self.normal && leader_of(self.view, self.cfg.n) == self.id {
            self.try_new_view(now);
        }
    }

    fn try_new_view(&mut self, now: u64) {
        if self.normal || leader_of(self.view, self.cfg.n) != self.id || self.new_view.is_some() {
            return;
        }
        let Some(by) = self.view_changes.get(&self.view) else { return };
        if by.len() < self.quorum() {
            return;
        }
        let mut proof: Vec<ViewChange> = by.values().cloned().collect();
        // Fresh own report: commits may have happened since it was sent.
        let own = self.own_view_change(self.view);
        proof.retain(|vc| vc.sender != self.id);
        proof.push(own);
        let sel = select(&proof);
        if self.committed_height() < sel.committed {
            self.fetch(sel.source, now);
            return;
        }
        let height = self.committed_height() + 1;
        let proposal = match &sel.required {
            Some(block) => Some(block.clone()),
            None if !self.pending.is_empty() => {
                let commands: Vec<Command> = self
                    .pending
                    .iter()
                    .take(self.cfg.max_batch)
                    .map(|(id, payload)| Command { id: *id, payload: payload.clone() })
                    .collect();
                Some(Block::build(height, &self.log, &commands))
            }
            None => None,
        }
        .map(|block| {
            let header = self.sign_header(block.height, block.digest());
            (block, header)
        });
        let nv = NewView { view: self.view, proof, proposal };
        self.send(Dest::Others, Message::NewView(nv.clone()));
        self.install(nv, sel, now);
    }

    fn on_new_view(&mut self, from: NodeId, nv: NewView, now: u64) {
        if nv.view < self.view || (nv.view == self.view && self.normal) || from != leader_of(nv.view, self.cfg.n) {
            return;
        }
        let mut senders = BTreeSet::new();
        let quorum = self.quorum();
        for vc in &nv.proof {
            if vc.new_view != nv.view || !senders.insert(vc.sender) || !vc.valid(&*self.scheme, quorum) {
                return;
            }
        }
        if senders.len() < quorum {
            return;
        }
        let sel = select(&nv.proof);
        if let Some((block, header)) = &nv.proposal {
            if header.view != nv.view
                || header.height != sel.committed + 1
                || block.height != header.height
                || block.digest() != header.digest
                || !header.valid(&*self.scheme, self.cfg.n)
            {
                return;
            }
        }
        match (&sel.required, &nv.proposal) {
            (Some(required), Some((block, _))) if required.digest() == block.digest() => {}
            (Some(_), _) => return,
            _ => {}
        }
        self.install(nv, sel, now);
    }

    fn install(&mut self, nv: NewView, sel: Selection, now: u64) {
        self.view = nv.view;
        self.normal = true;
        self.last_progress = now;
        self.heard_in_view.clear();
        self.view_history.push((now, nv.view));
        self.required = sel.required.as_ref().map(|b| (b.height, b.digest()));
        self.view_changes.retain(|v, _| *v > nv.view);
        if self.leader() == self.id {
            if let Some((block, header)) = &nv.proposal {
                self.own_proposal = Some((block.clone(), *header));
            }
            self.new_view = Some(nv.clone());
        }
        if self.committed_height() < sel.committed {
            self.fetch(sel.source, now);
        }
        if let Some((block, header)) = nv.proposal {
            if self.record_header(header) {
                if header.height > self.committed_height() + 1 {
                    self.buffered.entry(header.height).or_default().push((block, header));
                } else {
                    self.accept_proposal(block, header);
                }
            }
        }
        let keys: Vec<_> =
            self.votes.keys().filter(|k| k.1 == self.view && k.2 == self.committed_height() + 1).copied().collect();
        for key in keys {
            self.advance(key);
        }
        self.try_propose();
    }

    fn on_evidence(&mut self, a: Header, b: Header, now: u64) {
        if a.view != b.view
            || a.height != b.height
            || a.digest == b.digest
            || !a.valid(&*self.scheme, self.cfg.n)
            || !b.valid(&*self.scheme, self.cfg.n)
        {
            return;
        }
        if a.view == self.view && self.normal {
            self.start_view_change(self.view + 1, now);
        }
    }

    fn timeout(&self) -> u64 {
        self.cfg.base_timeout << self.attempts.min(6)
    }

    /// Advances timers; call once per tick.
    pub fn tick(&mut self, now: u64) {
        self.now = now;
        let stalled = now.saturating_sub(self.last_progress) > self.timeout();
        if self.normal {
            if stalled && !self.pending.is_empty() {
                self.start_view_change(self.view + 1, now);
                return;
            }
        } else {
            // Escalate only once the current view change has quorum support.
            let support = self.view_changes.get(&self.view).map_or(0, |by| by.len());
            if stalled && support >= self.quorum() {
                self.start_view_change(self.view + 1, now);
                return;
            }
        }
        if now >= self.last_resend + self.cfg.resend_interval {
            self.last_resend = now;
            self.resend(now);
        }
    }

    fn resend(&mut self, now: u64) {
        if !self.normal {
            let vc = self.own_view_change(self.view);
            self.view_changes.entry(self.view).or_default().insert(self.id, vc.clone());
            self.send(Dest::Others, Message::ViewChange(vc));
            self.try_new_view(now);
            return;
        }
        if let Some(nv) = self.new_view.clone() {
            for peer in 0..self.cfg.n {
                if peer != self.id && !self.heard_in_view.contains(&peer) {
                    self.send(Dest::To(peer), Message::NewView(nv.clone()));
                }
            }
        }
        if let Some((block, header)) = self.own_proposal.clone() {
            if header.view == self.view {
                self.send(Dest::Others, Message::Propose { block, header });
            }
        }
        for vote in self.my_votes.clone() {
            if vote.view == self.view {
                self.send(Dest::Others, Message::Vote(vote));
            }
        }
        self.try_propose();
    }
}
