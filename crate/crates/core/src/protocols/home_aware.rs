//! Deterministic ordering with per-region logs. Single-home transactions
//! are ordered by the log of their home region; only multi-home
//! transactions pass through the global orderer, whose batches every
//! region merges into its own log.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::rc::Rc;

use super::registry::ProtocolEnv;
use super::{CommitPosition, ProtocolModel, Store, Verdict};
use crate::error::Result;
use crate::model::{
    Key, PlacementMap, RegionId, ServerId, Topology, Transaction, TxnId, Value, MAX_REGIONS,
};
use crate::netsim::{message_bytes, Context, Message};
use crate::time::{millis, SimTime};

const LOCAL_SUBMIT: u32 = 1;
const GLOBAL_SUBMIT: u32 = 2;
const GLOBAL_BATCH: u32 = 3;
const LOG_APPEND: u32 = 4;
const DONE: u32 = 5;
const LOG_CATCHUP: u32 = 6;
const GLOBAL_CATCHUP: u32 = 7;
const REPLICATE: u32 = 8;

const TAG_LOCAL_EPOCH: u64 = u64::MAX;
const TAG_GLOBAL_EPOCH: u64 = u64::MAX - 1;
const TAG_LOG_RETRY: u64 = u64::MAX - 2;
const TAG_GLOBAL_RETRY: u64 = u64::MAX - 3;
const RETRY_MS: f64 = 500.0;

struct Submit {
    txn: Rc<Transaction>,
    entry: ServerId,
}

/// Global batch as seen by one region: only the transactions touching it.
struct GlobalBatch {
    number: u64,
    last_seq: u64,
    items: Vec<(u64, Rc<Transaction>, ServerId)>,
}

struct LogEntry {
    index: u64,
    items: Vec<(CommitPosition, Rc<Transaction>, ServerId)>,
}

struct Done {
    txn: TxnId,
}

struct Catchup {
    from: u64,
}

struct Replicate {
    writes: Vec<(Key, Value, CommitPosition)>,
}

struct OrdererBatch {
    number: u64,
    last_seq: u64,
    items: Vec<(u64, Rc<Transaction>, ServerId, BTreeSet<RegionId>)>,
}

#[derive(Default)]
struct Orderer {
    pending: Vec<(Rc<Transaction>, ServerId)>,
    armed: bool,
    next_batch: u64,
    next_seq: u64,
    history: Vec<Rc<OrdererBatch>>,
}

#[derive(Default)]
struct Leader {
    pending: Vec<(Rc<Transaction>, ServerId)>,
    armed: bool,
    next_global: u64,
    global_buf: BTreeMap<u64, Rc<GlobalBatch>>,
    last_seq: u64,
    k: u64,
    /// The region log; entry `i` has index `i + 1`.
    log: Vec<Rc<LogEntry>>,
    retry_armed: bool,
    stuck_at: u64,
}

#[derive(Default)]
struct Node {
    store: Store,
    next_log: u64,
    buf: BTreeMap<u64, Rc<LogEntry>>,
    executing: HashMap<u64, (TxnId, ServerId)>,
    next_tag: u64,
    awaiting: HashMap<TxnId, usize>,
    retry_armed: bool,
    stuck_at: u64,
}

pub struct HomeAware {
    topology: Topology,
    placement: PlacementMap,
    orderer_region: RegionId,
    local_epoch: SimTime,
    global_epoch: SimTime,
    async_replication: bool,
    orderer: Orderer,
    leaders: Vec<Leader>,
    nodes: Vec<Node>,
}

fn leader_of(region: RegionId) -> ServerId {
    ServerId { region, slot: 0 }
}

fn txn_bytes(t: &Transaction) -> u64 {
    message_bytes(t.keys().len(), t.write_bytes())
}

impl HomeAware {
    pub fn new(env: &ProtocolEnv) -> Result<Self> {
        let regions = env.topology.regions() as usize;
        Ok(HomeAware {
            topology: env.topology.clone(),
            placement: env.placement.clone(),
            orderer_region: RegionId(env.params.orderer_region),
            local_epoch: millis(env.params.region_epoch_ms),
            global_epoch: millis(env.params.sequencer_epoch_ms),
            async_replication: env.params.async_replication,
            orderer: Orderer {
                next_batch: 1,
                next_seq: 1,
                ..Default::default()
            },
            leaders: (0..regions)
                .map(|_| Leader {
                    next_global: 1,
                    ..Default::default()
                })
                .collect(),
            nodes: (0..env.topology.server_count())
                .map(|_| Node {
                    next_log: 1,
                    ..Default::default()
                })
                .collect(),
        })
    }

    fn orderer(&self) -> ServerId {
        leader_of(self.orderer_region)
    }

    fn homes(&self, txn: &Transaction) -> BTreeSet<RegionId> {
        txn.partitions()
            .into_iter()
            .map(|p| self.placement.home(p).expect("validated partition"))
            .collect()
    }

    fn home_servers(&self, txn: &Transaction) -> BTreeSet<ServerId> {
        txn.partitions()
            .into_iter()
            .map(|p| {
                self.topology
                    .home_server(p, &self.placement)
                    .expect("validated partition")
            })
            .collect()
    }

    /// Keys of `txn` whose home copy lives on `server`.
    fn local_part(&self, server: ServerId, txn: &Transaction) -> (u64, Vec<(Key, Value)>) {
        let mine =
            |k: &Key| self.topology.home_server(k.partition, &self.placement).ok() == Some(server);
        let reads = txn.read_set.iter().filter(|k| mine(k)).count() as u64;
        let writes: Vec<(Key, Value)> = txn
            .write_set
            .iter()
            .filter(|(k, _)| mine(k))
            .map(|(k, v)| (*k, *v))
            .collect();
        (reads + writes.len() as u64, writes)
    }

    fn close_global(&mut self, ctx: &mut Context) {
        let o = &mut self.orderer;
        o.armed = false;
        if o.pending.is_empty() {
            return;
        }
        let mut items = Vec::with_capacity(o.pending.len());
        for (txn, entry) in std::mem::take(&mut o.pending) {
            let seq = o.next_seq;
            o.next_seq += 1;
            ctx.decide_commit(&txn, CommitPosition::new(seq, 0));
            let regions = txn
                .partitions()
                .into_iter()
                .map(|p| self.placement.home(p).expect("validated partition"))
                .collect();
            items.push((seq, txn, entry, regions));
        }
        let batch = Rc::new(OrdererBatch {
            number: o.next_batch,
            last_seq: o.next_seq - 1,
            items,
        });
        o.next_batch += 1;
        o.history.push(batch.clone());
        for r in 0..self.topology.regions() {
            self.send_global(ctx, &batch, RegionId(r));
        }
    }

    fn send_global(&self, ctx: &mut Context, batch: &OrdererBatch, region: RegionId) {
        let items: Vec<_> = batch
            .items
            .iter()
            .filter(|(_, _, _, rs)| rs.contains(&region))
            .map(|(s, t, e, _)| (*s, t.clone(), *e))
            .collect();
        let bytes = message_bytes(0, 0) + items.iter().map(|(_, t, _)| txn_bytes(t)).sum::<u64>();
        let gb = GlobalBatch {
            number: batch.number,
            last_seq: batch.last_seq,
            items,
        };
        ctx.send(
            self.orderer(),
            leader_of(region),
            bytes,
            GLOBAL_BATCH,
            Rc::new(gb),
        );
    }

    fn close_local(&mut self, ctx: &mut Context, region: RegionId) {
        let l = &mut self.leaders[region.index()];
        l.armed = false;
        if l.pending.is_empty() {
            return;
        }
        let mut items = Vec::with_capacity(l.pending.len());
        for (txn, entry) in std::mem::take(&mut l.pending) {
            l.k += 1;
            let pos = CommitPosition::new(l.last_seq, l.k * MAX_REGIONS as u64 + region.0 as u64);
            ctx.decide_commit(&txn, pos);
            items.push((pos, txn, entry));
        }
        self.append_log(ctx, region, items);
    }

    fn append_log(
        &mut self,
        ctx: &mut Context,
        region: RegionId,
        items: Vec<(CommitPosition, Rc<Transaction>, ServerId)>,
    ) {
        let l = &mut self.leaders[region.index()];
        let entry = Rc::new(LogEntry {
            index: l.log.len() as u64 + 1,
            items,
        });
        l.log.push(entry.clone());
        let bytes = message_bytes(0, 0)
            + entry
                .items
                .iter()
                .map(|(_, t, _)| txn_bytes(t))
                .sum::<u64>();
        let src = leader_of(region);
        for dst in self.topology.servers_in(region) {
            ctx.send(src, dst, bytes, LOG_APPEND, entry.clone());
        }
    }

    fn merge_global(&mut self, ctx: &mut Context, region: RegionId) {
        loop {
            let l = &mut self.leaders[region.index()];
            let Some(b) = l.global_buf.remove(&l.next_global) else {
                break;
            };
            l.next_global += 1;
            l.last_seq = b.last_seq;
            l.k = 0;
            if !b.items.is_empty() {
                let items = b
                    .items
                    .iter()
                    .map(|(s, t, e)| (CommitPosition::new(*s, 0), t.clone(), *e))
                    .collect();
                self.append_log(ctx, region, items);
            }
        }
        let l = &mut self.leaders[region.index()];
        let gap = l
            .global_buf
            .keys()
            .next()
            .is_some_and(|&n| n > l.next_global);
        if gap && !l.retry_armed {
            l.retry_armed = true;
            l.stuck_at = l.next_global;
            ctx.set_timer(leader_of(region), millis(RETRY_MS), TAG_GLOBAL_RETRY);
        }
    }

    fn apply_log(&mut self, ctx: &mut Context, server: ServerId) {
        let f = self.topology.flat(server);
        let mut replicate: BTreeMap<ServerId, Vec<(Key, Value, CommitPosition)>> = BTreeMap::new();
        loop {
            let node = &mut self.nodes[f];
            let Some(entry) = node.buf.remove(&node.next_log) else {
                break;
            };
            node.next_log += 1;
            for (pos, txn, client) in &entry.items {
                let (ops, writes) = self.local_part(server, txn);
                if ops == 0 {
                    continue;
                }
                if self.async_replication {
                    for (k, v) in &writes {
                        for r in self
                            .placement
                            .replicas(k.partition)
                            .expect("validated partition")
                        {
                            let dst = self.topology.server_for(k.partition, *r);
                            replicate.entry(dst).or_default().push((*k, *v, *pos));
                        }
                    }
                }
                let node = &mut self.nodes[f];
                for (k, v) in writes {
                    node.store.apply(k, v, *pos);
                }
                node.next_tag += 1;
                let tag = node.next_tag;
                node.executing.insert(tag, (txn.id, *client));
                ctx.service_ordered(server, ops, tag);
            }
        }
        for (dst, writes) in replicate {
            let bytes = message_bytes(
                writes.len(),
                writes.iter().map(|(_, v, _)| v.len as u64).sum(),
            );
            ctx.send(server, dst, bytes, REPLICATE, Rc::new(Replicate { writes }));
        }
        let node = &mut self.nodes[f];
        let gap = node.buf.keys().next().is_some_and(|&n| n > node.next_log);
        if gap && !node.retry_armed {
            node.retry_armed = true;
            node.stuck_at = node.next_log;
            ctx.set_timer(server, millis(RETRY_MS), TAG_LOG_RETRY);
        }
    }
}

impl ProtocolModel for HomeAware {
    fn name(&self) -> &str {
        "home_aware"
    }

    fn on_submit(&mut self, ctx: &mut Context, entry: ServerId, txn: Rc<Transaction>) {
        let homes = self.homes(&txn);
        let participants = self.home_servers(&txn).len();
        self.nodes[self.topology.flat(entry)]
            .awaiting
            .insert(txn.id, participants);
        let bytes = txn_bytes(&txn);
        let (dst, tag) = if homes.len() == 1 {
            (
                leader_of(*homes.iter().next().expect("one home")),
                LOCAL_SUBMIT,
            )
        } else {
            (self.orderer(), GLOBAL_SUBMIT)
        };
        ctx.send(entry, dst, bytes, tag, Rc::new(Submit { txn, entry }));
    }

    fn on_message(&mut self, ctx: &mut Context, msg: Message) {
        let me = msg.dst;
        match msg.tag {
            LOCAL_SUBMIT => {
                let s = msg.body::<Submit>().expect("submit body");
                let l = &mut self.leaders[me.region.index()];
                l.pending.push((s.txn.clone(), s.entry));
                if !l.armed {
                    l.armed = true;
                    ctx.set_timer(me, self.local_epoch, TAG_LOCAL_EPOCH);
                }
            }
            GLOBAL_SUBMIT => {
                let s = msg.body::<Submit>().expect("submit body");
                self.orderer.pending.push((s.txn.clone(), s.entry));
                if !self.orderer.armed {
                    self.orderer.armed = true;
                    ctx.set_timer(me, self.global_epoch, TAG_GLOBAL_EPOCH);
                }
            }
            GLOBAL_BATCH => {
                let b = msg
                    .body
                    .clone()
                    .downcast::<GlobalBatch>()
                    .expect("global batch body");
                let l = &mut self.leaders[me.region.index()];
                if b.number >= l.next_global {
                    l.global_buf.insert(b.number, b);
                }
                self.merge_global(ctx, me.region);
            }
            LOG_APPEND => {
                let e = msg.body.clone().downcast::<LogEntry>().expect("log body");
                let node = &mut self.nodes[self.topology.flat(me)];
                if e.index >= node.next_log {
                    node.buf.insert(e.index, e);
                }
                self.apply_log(ctx, me);
            }
            DONE => {
                let d = msg.body::<Done>().expect("done body");
                let aw = &mut self.nodes[self.topology.flat(me)].awaiting;
                if let Some(n) = aw.get_mut(&d.txn) {
                    *n -= 1;
                    if *n == 0 {
                        aw.remove(&d.txn);
                        ctx.respond(d.txn, Verdict::Committed);
                    }
                }
            }
            LOG_CATCHUP => {
                let from = msg.body::<Catchup>().expect("catchup body").from;
                let log = &self.leaders[me.region.index()].log;
                for e in log.iter().skip(from.saturating_sub(1) as usize) {
                    let bytes = message_bytes(0, 0)
                        + e.items.iter().map(|(_, t, _)| txn_bytes(t)).sum::<u64>();
                    ctx.send(me, msg.src, bytes, LOG_APPEND, e.clone());
                }
            }
            GLOBAL_CATCHUP => {
                let from = msg.body::<Catchup>().expect("catchup body").from;
                let history: Vec<_> = self
                    .orderer
                    .history
                    .iter()
                    .skip(from.saturating_sub(1) as usize)
                    .cloned()
                    .collect();
                for b in history {
                    self.send_global(ctx, &b, msg.src.region);
                }
            }
            REPLICATE => {
                let r = msg.body::<Replicate>().expect("replicate body");
                let node = &mut self.nodes[self.topology.flat(me)];
                for (k, v, p) in &r.writes {
                    node.store.apply(*k, *v, *p);
                }
            }
            _ => ctx.fail(format!("home_aware: unknown message tag {}", msg.tag)),
        }
    }

    fn on_timer(&mut self, ctx: &mut Context, server: ServerId, tag: u64) {
        match tag {
            TAG_LOCAL_EPOCH => self.close_local(ctx, server.region),
            TAG_GLOBAL_EPOCH => self.close_global(ctx),
            TAG_LOG_RETRY => {
                let node = &mut self.nodes[self.topology.flat(server)];
                node.retry_armed = false;
                if node.buf.keys().next().is_some_and(|&n| n > node.next_log) {
                    let from = node.next_log;
                    if from == node.stuck_at {
                        ctx.send(
                            server,
                            leader_of(server.region),
                            message_bytes(0, 0),
                            LOG_CATCHUP,
                            Rc::new(Catchup { from }),
                        );
                    }
                    node.retry_armed = true;
                    node.stuck_at = from;
                    ctx.set_timer(server, millis(RETRY_MS), TAG_LOG_RETRY);
                }
            }
            TAG_GLOBAL_RETRY => {
                let orderer = self.orderer();
                let l = &mut self.leaders[server.region.index()];
                l.retry_armed = false;
                if l.global_buf
                    .keys()
                    .next()
                    .is_some_and(|&n| n > l.next_global)
                {
                    let from = l.next_global;
                    if from == l.stuck_at {
                        ctx.send(
                            server,
                            orderer,
                            message_bytes(0, 0),
                            GLOBAL_CATCHUP,
                            Rc::new(Catchup { from }),
                        );
                    }
                    l.retry_armed = true;
                    l.stuck_at = from;
                    ctx.set_timer(server, millis(RETRY_MS), TAG_GLOBAL_RETRY);
                }
            }
            t => {
                let node = &mut self.nodes[self.topology.flat(server)];
                if let Some((txn, entry)) = node.executing.remove(&t) {
                    ctx.send(
                        server,
                        entry,
                        message_bytes(0, 0),
                        DONE,
                        Rc::new(Done { txn }),
                    );
                }
            }
        }
    }

    fn on_crash(&mut self, _ctx: &mut Context, server: ServerId) {
        if server == self.orderer() {
            self.orderer.pending.clear();
            self.orderer.armed = false;
        }
        if server.slot == 0 {
            let l = &mut self.leaders[server.region.index()];
            l.pending.clear();
            l.armed = false;
            l.global_buf.clear();
            l.retry_armed = false;
        }
        let node = &mut self.nodes[self.topology.flat(server)];
        node.buf.clear();
        node.executing.clear();
        node.awaiting.clear();
        node.retry_armed = false;
    }

    fn on_recover(&mut self, ctx: &mut Context, server: ServerId) {
        // the durable logs survive; fetch whatever was missed while down
        if server.slot == 0 {
            let from = self.leaders[server.region.index()].next_global;
            ctx.send(
                server,
                self.orderer(),
                message_bytes(0, 0),
                GLOBAL_CATCHUP,
                Rc::new(Catchup { from }),
            );
        }
        let from = self.nodes[self.topology.flat(server)].next_log;
        ctx.send(
            server,
            leader_of(server.region),
            message_bytes(0, 0),
            LOG_CATCHUP,
            Rc::new(Catchup { from }),
        );
    }

    fn store(&self, server: ServerId) -> Option<&Store> {
        self.topology
            .contains(server)
            .then(|| &self.nodes[self.topology.flat(server)].store)
    }
}
