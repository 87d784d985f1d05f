//! Two-phase commit across replicated partition groups. The entry server
//! coordinates; each touched home server locks its keys, replicates the
//! prepare record to a majority of its group and votes. Conflicts are
//! resolved by wound-wait on transaction age, so commits can fail.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::rc::Rc;

use super::registry::ProtocolEnv;
use super::{AbortReason, CommitPosition, ProtocolModel, Store, Verdict};
use crate::error::Result;
use crate::model::{Key, PartitionId, PlacementMap, ServerId, Topology, Transaction, TxnId, Value};
use crate::netsim::{message_bytes, Context, Message};
use crate::time::{millis, SimTime};

const PREPARE: u32 = 1;
const VOTE: u32 = 2;
const DECISION: u32 = 3;
const REPL_PREPARE: u32 = 4;
const REPL_ACK: u32 = 5;
const REPL_COMMIT: u32 = 6;
const REPL_ABORT: u32 = 7;
const STATUS_QUERY: u32 = 8;
const SYNC_REQ: u32 = 9;
const SYNC_RESP: u32 = 10;

const KIND_SHIFT: u32 = 62;
const SERVICE: u64 = 1 << KIND_SHIFT;
const VOTE_TIMER: u64 = 2 << KIND_SHIFT;
const STATUS_TIMER: u64 = 3 << KIND_SHIFT;
const ID_MASK: u64 = SERVICE - 1;

struct Prepare {
    txn: Rc<Transaction>,
    coord: ServerId,
}

struct Vote {
    txn: TxnId,
    yes: bool,
}

struct Decision {
    txn: TxnId,
    commit: Option<CommitPosition>,
}

struct ReplPrepare {
    txn: TxnId,
    writes: Vec<(Key, Value)>,
}

struct ReplAck {
    txn: TxnId,
}

struct ReplCommit {
    txn: TxnId,
    pos: CommitPosition,
    partitions: Vec<PartitionId>,
}

struct TxnRef {
    txn: TxnId,
}

struct SyncReq {
    partitions: Vec<PartitionId>,
}

struct SyncResp {
    data: Vec<(Key, Value, CommitPosition)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Waiting,
    Executing,
    Replicating,
    Prepared,
}

struct Participation {
    txn: Rc<Transaction>,
    coord: ServerId,
    phase: Phase,
    reads: Vec<Key>,
    writes: Vec<(Key, Value)>,
    acked: BTreeSet<ServerId>,
}

#[derive(Default)]
struct Lock {
    readers: BTreeSet<TxnId>,
    writer: Option<TxnId>,
}

struct Coordination {
    txn: Rc<Transaction>,
    participants: BTreeSet<ServerId>,
    yes: BTreeSet<ServerId>,
}

#[derive(Default)]
struct Node {
    // durable
    store: Store,
    decisions: HashMap<TxnId, Option<CommitPosition>>,
    staged: HashMap<(TxnId, ServerId), Vec<(Key, Value)>>,
    // prepared entries survive a crash together with their locks
    active: HashMap<TxnId, Participation>,
    locks: HashMap<Key, Lock>,
    // volatile
    waiters: Vec<TxnId>,
    coordinating: HashMap<TxnId, Coordination>,
}

enum Acquire {
    Granted,
    Wait,
    Abort,
}

pub struct QuorumCommit {
    topology: Topology,
    placement: PlacementMap,
    vote_timeout: SimTime,
    status_retry: SimTime,
    nodes: Vec<Node>,
}

fn older(a: &Transaction, b: &Transaction) -> bool {
    (a.submit_time, a.id) < (b.submit_time, b.id)
}

impl QuorumCommit {
    pub fn new(env: &ProtocolEnv) -> Result<Self> {
        Ok(QuorumCommit {
            topology: env.topology.clone(),
            placement: env.placement.clone(),
            vote_timeout: millis(env.params.vote_timeout_ms),
            status_retry: millis(env.params.status_retry_ms),
            nodes: (0..env.topology.server_count())
                .map(|_| Node::default())
                .collect(),
        })
    }

    fn home_of(&self, k: &Key) -> ServerId {
        self.topology
            .home_server(k.partition, &self.placement)
            .expect("validated partition")
    }

    fn replica_servers(&self, p: PartitionId) -> Vec<ServerId> {
        self.placement
            .replicas(p)
            .expect("validated partition")
            .iter()
            .map(|r| self.topology.server_for(p, *r))
            .collect()
    }

    fn node(&mut self, s: ServerId) -> &mut Node {
        let f = self.topology.flat(s);
        &mut self.nodes[f]
    }

    // ---- participant side ----

    fn on_prepare(&mut self, ctx: &mut Context, me: ServerId, p: &Prepare) {
        if self.node(me).active.contains_key(&p.txn.id) {
            return;
        }
        let mine = |k: &Key| self.home_of(k) == me;
        let writes: Vec<(Key, Value)> = p
            .txn
            .write_set
            .iter()
            .filter(|(k, _)| mine(k))
            .map(|(k, v)| (*k, *v))
            .collect();
        let reads: Vec<Key> = p
            .txn
            .read_set
            .iter()
            .filter(|k| mine(k) && !p.txn.write_set.contains_key(k))
            .copied()
            .collect();
        let part = Participation {
            txn: p.txn.clone(),
            coord: p.coord,
            phase: Phase::Waiting,
            reads,
            writes,
            acked: BTreeSet::new(),
        };
        let id = p.txn.id;
        self.node(me).active.insert(id, part);
        match self.try_acquire(ctx, me, id) {
            Acquire::Granted => self.execute(ctx, me, id),
            Acquire::Wait => self.node(me).waiters.push(id),
            Acquire::Abort => self.abort_local(ctx, me, id, true, false),
        }
        self.wake(ctx, me);
    }

    fn try_acquire(&mut self, ctx: &mut Context, me: ServerId, id: TxnId) -> Acquire {
        let node = self.node(me);
        let part = &node.active[&id];
        let mut conflicts = BTreeSet::new();
        for k in &part.reads {
            if let Some(l) = node.locks.get(k) {
                conflicts.extend(l.writer.filter(|w| *w != id));
            }
        }
        for (k, _) in &part.writes {
            if let Some(l) = node.locks.get(k) {
                conflicts.extend(l.writer.filter(|w| *w != id));
                conflicts.extend(l.readers.iter().filter(|r| **r != id));
            }
        }
        let me_txn = part.txn.clone();
        if conflicts
            .iter()
            .any(|h| older(&node.active[h].txn, &me_txn))
        {
            return Acquire::Abort;
        }
        let mut blocked = false;
        for h in conflicts {
            if self.node(me).active[&h].phase == Phase::Prepared {
                blocked = true;
            } else {
                self.abort_local(ctx, me, h, true, false);
            }
        }
        if blocked {
            return Acquire::Wait;
        }
        let node = self.node(me);
        let part = &node.active[&id];
        for k in &part.reads {
            node.locks.entry(*k).or_default().readers.insert(id);
        }
        for (k, _) in &part.writes {
            node.locks.entry(*k).or_default().writer = Some(id);
        }
        Acquire::Granted
    }

    fn release(&mut self, me: ServerId, id: TxnId, part: &Participation) {
        let node = self.node(me);
        for k in part.reads.iter().chain(part.writes.iter().map(|(k, _)| k)) {
            if let Some(l) = node.locks.get_mut(k) {
                l.readers.remove(&id);
                if l.writer == Some(id) {
                    l.writer = None;
                }
                if l.writer.is_none() && l.readers.is_empty() {
                    node.locks.remove(k);
                }
            }
        }
    }

    fn execute(&mut self, ctx: &mut Context, me: ServerId, id: TxnId) {
        let part = self.node(me).active.get_mut(&id).expect("active txn");
        part.phase = Phase::Executing;
        let ops = (part.reads.len() + part.writes.len()).max(1) as u64;
        if ctx.service(me, ops, SERVICE | id).is_err() {
            self.abort_local(ctx, me, id, true, false);
        }
    }

    fn after_service(&mut self, ctx: &mut Context, me: ServerId, id: TxnId) {
        let Some(part) = self.node(me).active.get_mut(&id) else {
            return;
        };
        if part.phase != Phase::Executing {
            return;
        }
        part.phase = Phase::Replicating;
        let writes = part.writes.clone();
        let mut per_server: BTreeMap<ServerId, Vec<(Key, Value)>> = BTreeMap::new();
        for (k, v) in &writes {
            for s in self.replica_servers(k.partition) {
                per_server.entry(s).or_default().push((*k, *v));
            }
        }
        for (dst, w) in per_server {
            let bytes = message_bytes(w.len(), w.iter().map(|(_, v)| v.len as u64).sum());
            ctx.send(
                me,
                dst,
                bytes,
                REPL_PREPARE,
                Rc::new(ReplPrepare { txn: id, writes: w }),
            );
        }
        self.check_prepared(ctx, me, id);
    }

    fn check_prepared(&mut self, ctx: &mut Context, me: ServerId, id: TxnId) {
        let Some(part) = self.node(me).active.get(&id) else {
            return;
        };
        if part.phase != Phase::Replicating {
            return;
        }
        let partitions: BTreeSet<PartitionId> =
            part.writes.iter().map(|(k, _)| k.partition).collect();
        let acked = part.acked.clone();
        let quorum = partitions.into_iter().all(|p| {
            let group = self.replica_servers(p);
            // majority of the group; the home counts itself
            let need = group.len().div_ceil(2);
            group.iter().filter(|s| acked.contains(s)).count() >= need
        });
        if !quorum {
            return;
        }
        let part = self.node(me).active.get_mut(&id).expect("active txn");
        part.phase = Phase::Prepared;
        let coord = part.coord;
        ctx.send(
            me,
            coord,
            message_bytes(0, 0),
            VOTE,
            Rc::new(Vote { txn: id, yes: true }),
        );
        ctx.set_timer(me, self.status_retry, STATUS_TIMER | id);
    }

    /// Drops a participation that has not voted yes, optionally telling the
    /// coordinator.
    fn abort_local(
        &mut self,
        ctx: &mut Context,
        me: ServerId,
        id: TxnId,
        vote_no: bool,
        wake: bool,
    ) {
        let Some(part) = self.node(me).active.remove(&id) else {
            return;
        };
        self.release(me, id, &part);
        self.node(me).waiters.retain(|w| *w != id);
        if vote_no {
            ctx.send(
                me,
                part.coord,
                message_bytes(0, 0),
                VOTE,
                Rc::new(Vote {
                    txn: id,
                    yes: false,
                }),
            );
        }
        if part.phase == Phase::Replicating || part.phase == Phase::Prepared {
            self.notify_replicas(ctx, me, &part, None);
        }
        if wake {
            self.wake(ctx, me);
        }
    }

    fn notify_replicas(
        &mut self,
        ctx: &mut Context,
        me: ServerId,
        part: &Participation,
        pos: Option<CommitPosition>,
    ) {
        let mut per_server: BTreeMap<ServerId, BTreeSet<PartitionId>> = BTreeMap::new();
        for (k, _) in &part.writes {
            for s in self.replica_servers(k.partition) {
                per_server.entry(s).or_default().insert(k.partition);
            }
        }
        let id = part.txn.id;
        for (dst, ps) in per_server {
            match pos {
                Some(pos) => {
                    let body = ReplCommit {
                        txn: id,
                        pos,
                        partitions: ps.into_iter().collect(),
                    };
                    ctx.send(me, dst, message_bytes(0, 0), REPL_COMMIT, Rc::new(body));
                }
                None => ctx.send(
                    me,
                    dst,
                    message_bytes(0, 0),
                    REPL_ABORT,
                    Rc::new(TxnRef { txn: id }),
                ),
            }
        }
    }

    fn wake(&mut self, ctx: &mut Context, me: ServerId) {
        let waiters = std::mem::take(&mut self.node(me).waiters);
        for id in waiters {
            if !self.node(me).active.contains_key(&id) {
                continue;
            }
            match self.try_acquire(ctx, me, id) {
                Acquire::Granted => self.execute(ctx, me, id),
                Acquire::Wait => self.node(me).waiters.push(id),
                Acquire::Abort => self.abort_local(ctx, me, id, true, false),
            }
        }
    }

    fn on_decision(
        &mut self,
        ctx: &mut Context,
        me: ServerId,
        id: TxnId,
        commit: Option<CommitPosition>,
    ) {
        let Some(part) = self.node(me).active.get(&id) else {
            return;
        };
        match commit {
            Some(pos) => {
                if part.phase != Phase::Prepared {
                    // a commit needs every yes vote, so this cannot happen
                    ctx.fail(format!(
                        "quorum_commit: commit of unprepared txn {id} at {me}"
                    ));
                    return;
                }
                let part = self.node(me).active.remove(&id).expect("active txn");
                for (k, v) in &part.writes {
                    self.node(me).store.apply(*k, *v, pos);
                }
                self.release(me, id, &part);
                self.notify_replicas(ctx, me, &part, Some(pos));
                self.wake(ctx, me);
            }
            None => self.abort_local(ctx, me, id, false, true),
        }
    }

    // ---- coordinator side ----

    fn decide(&mut self, ctx: &mut Context, me: ServerId, id: TxnId, verdict: Verdict) {
        let Some(c) = self.node(me).coordinating.remove(&id) else {
            return;
        };
        let commit = match verdict {
            Verdict::Committed => {
                let pos = CommitPosition::new(ctx.now(), id);
                ctx.decide_commit(&c.txn, pos);
                Some(pos)
            }
            _ => None,
        };
        self.node(me).decisions.insert(id, commit);
        for p in c.participants {
            ctx.send(
                me,
                p,
                message_bytes(0, 0),
                DECISION,
                Rc::new(Decision { txn: id, commit }),
            );
        }
        ctx.respond(id, verdict);
    }
}

impl ProtocolModel for QuorumCommit {
    fn name(&self) -> &str {
        "quorum_commit"
    }

    fn on_submit(&mut self, ctx: &mut Context, entry: ServerId, txn: Rc<Transaction>) {
        let participants: BTreeSet<ServerId> = txn.keys().iter().map(|k| self.home_of(k)).collect();
        let id = txn.id;
        for &p in &participants {
            let keys = txn.keys().iter().filter(|k| self.home_of(k) == p).count();
            let wb: u64 = txn
                .write_set
                .iter()
                .filter(|(k, _)| self.home_of(k) == p)
                .map(|(_, v)| v.len as u64)
                .sum();
            let body = Prepare {
                txn: txn.clone(),
                coord: entry,
            };
            ctx.send(entry, p, message_bytes(keys, wb), PREPARE, Rc::new(body));
        }
        self.node(entry).coordinating.insert(
            id,
            Coordination {
                txn: txn.clone(),
                participants,
                yes: BTreeSet::new(),
            },
        );
        ctx.set_timer(entry, self.vote_timeout, VOTE_TIMER | id);
    }

    fn on_message(&mut self, ctx: &mut Context, msg: Message) {
        let me = msg.dst;
        match msg.tag {
            PREPARE => {
                let p = msg.body::<Prepare>().expect("prepare body");
                self.on_prepare(ctx, me, p);
            }
            VOTE => {
                let v = msg.body::<Vote>().expect("vote body");
                let Some(c) = self.node(me).coordinating.get_mut(&v.txn) else {
                    return;
                };
                if !v.yes {
                    self.decide(ctx, me, v.txn, Verdict::Aborted(AbortReason::Conflict));
                    return;
                }
                c.yes.insert(msg.src);
                if c.yes.len() == c.participants.len() {
                    self.decide(ctx, me, v.txn, Verdict::Committed);
                }
            }
            DECISION => {
                let d = msg.body::<Decision>().expect("decision body");
                self.on_decision(ctx, me, d.txn, d.commit);
            }
            REPL_PREPARE => {
                let r = msg.body::<ReplPrepare>().expect("replicate body");
                self.node(me)
                    .staged
                    .insert((r.txn, msg.src), r.writes.clone());
                ctx.send(
                    me,
                    msg.src,
                    message_bytes(0, 0),
                    REPL_ACK,
                    Rc::new(ReplAck { txn: r.txn }),
                );
            }
            REPL_ACK => {
                let a = msg.body::<ReplAck>().expect("ack body");
                if let Some(part) = self.node(me).active.get_mut(&a.txn) {
                    part.acked.insert(msg.src);
                    self.check_prepared(ctx, me, a.txn);
                }
            }
            REPL_COMMIT => {
                let c = msg.body::<ReplCommit>().expect("commit body");
                match self.node(me).staged.remove(&(c.txn, msg.src)) {
                    Some(writes) => {
                        let node = self.node(me);
                        for (k, v) in writes {
                            node.store.apply(k, v, c.pos);
                        }
                    }
                    // missed the prepare while down: copy the partitions instead
                    None => {
                        let body = SyncReq {
                            partitions: c.partitions.clone(),
                        };
                        ctx.send(me, msg.src, message_bytes(0, 0), SYNC_REQ, Rc::new(body));
                    }
                }
            }
            REPL_ABORT => {
                let t = msg.body::<TxnRef>().expect("abort body");
                self.node(me).staged.remove(&(t.txn, msg.src));
            }
            STATUS_QUERY => {
                let t = msg.body::<TxnRef>().expect("status body");
                let node = self.node(me);
                let commit = match node.decisions.get(&t.txn) {
                    Some(d) => *d,
                    None if node.coordinating.contains_key(&t.txn) => return,
                    None => {
                        // no record and no live coordination: presumed abort
                        node.decisions.insert(t.txn, None);
                        None
                    }
                };
                ctx.send(
                    me,
                    msg.src,
                    message_bytes(0, 0),
                    DECISION,
                    Rc::new(Decision { txn: t.txn, commit }),
                );
            }
            SYNC_REQ => {
                let r = msg.body::<SyncReq>().expect("sync body");
                let store = &self.node(me).store;
                let data: Vec<_> = r
                    .partitions
                    .iter()
                    .flat_map(|p| store.partition(*p))
                    .collect();
                let bytes =
                    message_bytes(data.len(), data.iter().map(|(_, v, _)| v.len as u64).sum());
                ctx.send(me, msg.src, bytes, SYNC_RESP, Rc::new(SyncResp { data }));
            }
            SYNC_RESP => {
                let r = msg.body::<SyncResp>().expect("sync body");
                let node = self.node(me);
                for (k, v, p) in &r.data {
                    node.store.apply(*k, *v, *p);
                }
            }
            _ => ctx.fail(format!("quorum_commit: unknown message tag {}", msg.tag)),
        }
    }

    fn on_timer(&mut self, ctx: &mut Context, server: ServerId, tag: u64) {
        let id = tag & ID_MASK;
        match tag & !ID_MASK {
            SERVICE => self.after_service(ctx, server, id),
            VOTE_TIMER => {
                if self.node(server).coordinating.contains_key(&id) {
                    self.decide(ctx, server, id, Verdict::Aborted(AbortReason::VoteTimeout));
                }
            }
            STATUS_TIMER => {
                let Some(part) = self.node(server).active.get(&id) else {
                    return;
                };
                if part.phase == Phase::Prepared {
                    let coord = part.coord;
                    ctx.send(
                        server,
                        coord,
                        message_bytes(0, 0),
                        STATUS_QUERY,
                        Rc::new(TxnRef { txn: id }),
                    );
                    ctx.set_timer(server, self.status_retry, STATUS_TIMER | id);
                }
            }
            _ => ctx.fail(format!("quorum_commit: unknown timer tag {tag:#x}")),
        }
    }

    fn on_crash(&mut self, _ctx: &mut Context, server: ServerId) {
        let node = self.node(server);
        node.waiters.clear();
        node.coordinating.clear();
        let lost: Vec<TxnId> = node
            .active
            .iter()
            .filter(|(_, p)| p.phase != Phase::Prepared)
            .map(|(id, _)| *id)
            .collect();
        for id in lost {
            let part = self.node(server).active.remove(&id).expect("active txn");
            self.release(server, id, &part);
        }
    }

    fn on_recover(&mut self, ctx: &mut Context, server: ServerId) {
        let prepared: Vec<TxnId> = self.node(server).active.keys().copied().collect();
        for id in prepared {
            ctx.set_timer(server, self.status_retry, STATUS_TIMER | id);
        }
        // refresh every partition this server holds a replica of
        let mut by_home: BTreeMap<ServerId, Vec<PartitionId>> = BTreeMap::new();
        for p in 0..self.placement.partitions() {
            let p = PartitionId(p);
            if self.replica_servers(p).contains(&server) {
                let home = self
                    .topology
                    .home_server(p, &self.placement)
                    .expect("validated partition");
                by_home.entry(home).or_default().push(p);
            }
        }
        for (home, partitions) in by_home {
            ctx.send(
                server,
                home,
                message_bytes(0, 0),
                SYNC_REQ,
                Rc::new(SyncReq { partitions }),
            );
        }
    }

    fn store(&self, server: ServerId) -> Option<&Store> {
        self.topology
            .contains(server)
            .then(|| &self.nodes[self.topology.flat(server)].store)
    }
}
