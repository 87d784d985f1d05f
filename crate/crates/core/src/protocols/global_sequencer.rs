//! Deterministic ordering through one central sequencer with full
//! replication. Every server executes the global log in order over its
//! own copy; there are no aborts.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::rc::Rc;

use super::registry::ProtocolEnv;
use super::{CommitPosition, ProtocolModel, Store, Verdict};
use crate::error::Result;
use crate::model::{Key, PartitionId, ServerId, Topology, Transaction, TxnId, Value};
use crate::netsim::{message_bytes, Context, Message};
use crate::time::{millis, SimTime};

const FORWARD: u32 = 1;
const BATCH: u32 = 2;
const DONE: u32 = 3;
const SYNC_REQ: u32 = 4;
const SYNC_RESP: u32 = 5;

const TAG_EPOCH: u64 = u64::MAX;
const TAG_SYNC_RETRY: u64 = u64::MAX - 1;
const SYNC_RETRY_MS: f64 = 1000.0;

struct Forward {
    txn: Rc<Transaction>,
    entry: ServerId,
}

struct Batch {
    number: u64,
    /// (sequence number, transaction, entry server)
    entries: Vec<(u64, Rc<Transaction>, ServerId)>,
}

struct Done {
    txn: TxnId,
}

struct SyncResp {
    next_batch: u64,
    data: Vec<(Key, Value, CommitPosition)>,
}

#[derive(Default)]
struct Sequencer {
    batch: Vec<(Rc<Transaction>, ServerId)>,
    armed: bool,
    // kept across crashes so the log stays gap-free
    next_batch: u64,
    next_seq: u64,
}

struct Node {
    store: Store,
    next_batch: u64,
    buffer: BTreeMap<u64, Rc<Batch>>,
    /// service tag → (txn id, entry) for participants in the origin region
    executing: HashMap<u64, (TxnId, ServerId)>,
    /// entry-side: txn → origin-region participants still to report
    awaiting: HashMap<TxnId, usize>,
    syncing: bool,
    retry_armed: bool,
    /// `next_batch` when the retry timer was armed.
    stuck_at: u64,
}

impl Node {
    fn new() -> Self {
        Node {
            store: Store::new(),
            next_batch: 1,
            buffer: BTreeMap::new(),
            executing: HashMap::new(),
            awaiting: HashMap::new(),
            syncing: false,
            retry_armed: false,
            stuck_at: 0,
        }
    }
}

pub struct GlobalSequencer {
    topology: Topology,
    sequencer: ServerId,
    epoch: SimTime,
    seq_state: Sequencer,
    nodes: Vec<Node>,
}

impl GlobalSequencer {
    pub fn new(env: &ProtocolEnv) -> Result<Self> {
        Ok(GlobalSequencer {
            topology: env.topology.clone(),
            sequencer: ServerId::new(env.params.orderer_region, 0),
            epoch: millis(env.params.sequencer_epoch_ms),
            seq_state: Sequencer {
                next_batch: 1,
                next_seq: 1,
                ..Default::default()
            },
            nodes: (0..env.topology.server_count())
                .map(|_| Node::new())
                .collect(),
        })
    }

    fn local_keys(ctx: &Context, server: ServerId, txn: &Transaction) -> (u64, Vec<(Key, Value)>) {
        let slot = |p: PartitionId| ctx.topology().slot_of(p);
        let reads = txn
            .read_set
            .iter()
            .filter(|k| slot(k.partition) == server.slot)
            .count() as u64;
        let writes: Vec<(Key, Value)> = txn
            .write_set
            .iter()
            .filter(|(k, _)| slot(k.partition) == server.slot)
            .map(|(k, v)| (*k, *v))
            .collect();
        (reads + writes.len() as u64, writes)
    }

    fn participant_slots(ctx: &Context, txn: &Transaction) -> BTreeSet<u16> {
        txn.partitions()
            .into_iter()
            .map(|p| ctx.topology().slot_of(p))
            .collect()
    }

    fn close_batch(&mut self, ctx: &mut Context) {
        let s = &mut self.seq_state;
        s.armed = false;
        if s.batch.is_empty() {
            return;
        }
        let mut entries = Vec::with_capacity(s.batch.len());
        let mut bytes = 0;
        for (txn, entry) in s.batch.drain(..) {
            let seq = s.next_seq;
            s.next_seq += 1;
            ctx.decide_commit(&txn, CommitPosition::new(seq, 0));
            bytes += message_bytes(txn.keys().len(), txn.write_bytes());
            entries.push((seq, txn, entry));
        }
        let batch = Rc::new(Batch {
            number: s.next_batch,
            entries,
        });
        s.next_batch += 1;
        let servers: Vec<ServerId> = ctx.topology().servers().collect();
        for dst in servers {
            ctx.send(self.sequencer, dst, bytes, BATCH, batch.clone());
        }
    }

    fn drain_batches(&mut self, ctx: &mut Context, server: ServerId) {
        let f = ctx.topology().flat(server);
        if self.nodes[f].syncing {
            return;
        }
        loop {
            let node = &mut self.nodes[f];
            let Some(batch) = node.buffer.remove(&node.next_batch) else {
                break;
            };
            node.next_batch += 1;
            for (seq, txn, entry) in &batch.entries {
                let (ops, writes) = Self::local_keys(ctx, server, txn);
                if ops == 0 {
                    continue;
                }
                let node = &mut self.nodes[f];
                for (k, v) in writes {
                    node.store.apply(k, v, CommitPosition::new(*seq, 0));
                }
                if server.region == txn.origin {
                    node.executing.insert(*seq, (txn.id, *entry));
                }
                ctx.service_ordered(server, ops, *seq);
            }
        }
        // a missing batch (lost message) is fetched from a peer copy
        let node = &mut self.nodes[f];
        let gap = node
            .buffer
            .keys()
            .next()
            .is_some_and(|&b| b > node.next_batch);
        if gap && !node.retry_armed {
            node.retry_armed = true;
            node.stuck_at = node.next_batch;
            ctx.set_timer(server, millis(SYNC_RETRY_MS), TAG_SYNC_RETRY);
        }
    }

    fn request_sync(&mut self, ctx: &mut Context, server: ServerId) {
        let regions = ctx.topology().regions();
        let peers: Vec<ServerId> = (1..regions)
            .map(|d| ServerId::new((server.region.0 + d) % regions, server.slot))
            .filter(|p| ctx.is_up(*p))
            .collect();
        let f = ctx.topology().flat(server);
        match peers.first() {
            Some(&peer) => {
                self.nodes[f].syncing = true;
                ctx.send(server, peer, message_bytes(0, 0), SYNC_REQ, Rc::new(()));
            }
            None => self.nodes[f].syncing = false,
        }
        if !self.nodes[f].retry_armed {
            self.nodes[f].retry_armed = true;
            ctx.set_timer(server, millis(SYNC_RETRY_MS), TAG_SYNC_RETRY);
        }
    }
}

impl ProtocolModel for GlobalSequencer {
    fn name(&self) -> &str {
        "global_sequencer"
    }

    fn on_submit(&mut self, ctx: &mut Context, entry: ServerId, txn: Rc<Transaction>) {
        let f = ctx.topology().flat(entry);
        let slots = Self::participant_slots(ctx, &txn).len();
        self.nodes[f].awaiting.insert(txn.id, slots);
        let bytes = message_bytes(txn.keys().len(), txn.write_bytes());
        ctx.send(
            entry,
            self.sequencer,
            bytes,
            FORWARD,
            Rc::new(Forward { txn, entry }),
        );
    }

    fn on_message(&mut self, ctx: &mut Context, msg: Message) {
        match msg.tag {
            FORWARD => {
                let fw = msg.body::<Forward>().expect("forward body");
                self.seq_state.batch.push((fw.txn.clone(), fw.entry));
                if !self.seq_state.armed {
                    self.seq_state.armed = true;
                    ctx.set_timer(self.sequencer, self.epoch, TAG_EPOCH);
                }
            }
            BATCH => {
                let batch = msg.body.clone().downcast::<Batch>().expect("batch body");
                let f = ctx.topology().flat(msg.dst);
                if batch.number >= self.nodes[f].next_batch {
                    self.nodes[f].buffer.insert(batch.number, batch);
                }
                self.drain_batches(ctx, msg.dst);
            }
            DONE => {
                let d = msg.body::<Done>().expect("done body");
                let f = ctx.topology().flat(msg.dst);
                let aw = &mut self.nodes[f].awaiting;
                if let Some(n) = aw.get_mut(&d.txn) {
                    *n -= 1;
                    if *n == 0 {
                        aw.remove(&d.txn);
                        ctx.respond(d.txn, Verdict::Committed);
                    }
                }
            }
            SYNC_REQ => {
                let f = ctx.topology().flat(msg.dst);
                let node = &self.nodes[f];
                if node.syncing {
                    return;
                }
                let data: Vec<_> = node.store.iter().map(|(k, v, p)| (*k, *v, p)).collect();
                let bytes =
                    message_bytes(data.len(), data.iter().map(|(_, v, _)| v.len as u64).sum());
                let resp = SyncResp {
                    next_batch: node.next_batch,
                    data,
                };
                ctx.send(msg.dst, msg.src, bytes, SYNC_RESP, Rc::new(resp));
            }
            SYNC_RESP => {
                let r = msg.body::<SyncResp>().expect("sync body");
                let f = ctx.topology().flat(msg.dst);
                let node = &mut self.nodes[f];
                if !node.syncing || r.next_batch < node.next_batch {
                    return;
                }
                for (k, v, p) in &r.data {
                    node.store.apply(*k, *v, *p);
                }
                node.next_batch = r.next_batch;
                let stale: Vec<u64> = node.buffer.range(..r.next_batch).map(|(k, _)| *k).collect();
                for k in stale {
                    node.buffer.remove(&k);
                }
                node.syncing = false;
                self.drain_batches(ctx, msg.dst);
            }
            _ => ctx.fail(format!("global_sequencer: unknown message tag {}", msg.tag)),
        }
    }

    fn on_timer(&mut self, ctx: &mut Context, server: ServerId, tag: u64) {
        match tag {
            TAG_EPOCH => self.close_batch(ctx),
            TAG_SYNC_RETRY => {
                let f = ctx.topology().flat(server);
                let node = &mut self.nodes[f];
                node.retry_armed = false;
                let gap = node
                    .buffer
                    .keys()
                    .next()
                    .is_some_and(|&b| b > node.next_batch);
                if node.syncing || (gap && node.next_batch == node.stuck_at) {
                    self.request_sync(ctx, server);
                } else if gap {
                    node.retry_armed = true;
                    node.stuck_at = node.next_batch;
                    ctx.set_timer(server, millis(SYNC_RETRY_MS), TAG_SYNC_RETRY);
                }
            }
            seq => {
                let f = ctx.topology().flat(server);
                if let Some((txn, entry)) = self.nodes[f].executing.remove(&seq) {
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

    fn on_crash(&mut self, ctx: &mut Context, server: ServerId) {
        if server == self.sequencer {
            self.seq_state.batch.clear();
            self.seq_state.armed = false;
        }
        let f = ctx.topology().flat(server);
        let node = &mut self.nodes[f];
        node.buffer.clear();
        node.executing.clear();
        node.awaiting.clear();
        node.syncing = false;
        node.retry_armed = false;
    }

    fn on_recover(&mut self, ctx: &mut Context, server: ServerId) {
        if ctx.topology().regions() > 1 {
            self.request_sync(ctx, server);
        }
    }

    fn store(&self, server: ServerId) -> Option<&Store> {
        self.topology
            .contains(server)
            .then(|| &self.nodes[self.topology.flat(server)].store)
    }
}

#[cfg(test)]
mod tests {
    use super::super::testkit::{assert_consistent, commit_latency_ms, writer, Setup};
    use crate::netsim::{FaultSchedule, FaultTarget};
    use crate::time::millis;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn remote_origin_pays_round_trip_to_sequencer() {
        let s = Setup::new(2);
        let txns = vec![
            writer(0, 1, 0, &[(1, 1)]),
            writer(1, 0, millis(300.0), &[(0, 1)]),
        ];
        let mut e = s.engine("global_sequencer", txns);
        e.run().unwrap();
        // forward 50 + epoch 5 + broadcast 50
        let far = commit_latency_ms(&e, 0).unwrap();
        assert!((105.0..106.5).contains(&far), "{far}");
        let near = commit_latency_ms(&e, 1).unwrap();
        assert!((5.0..6.5).contains(&near), "{near}");
        assert_consistent(&e, false);
    }

    #[test]
    fn every_copy_matches_serial_replay() {
        let s = Setup::new(3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let txns = (0..300)
            .map(|i| {
                let keys: Vec<(u32, u64)> = (0..3)
                    .map(|_| (rng.gen_range(0..8), rng.gen_range(0..10)))
                    .collect();
                writer(i, rng.gen_range(0..3), millis(i as f64 * 2.0), &keys)
            })
            .collect();
        let mut e = s.engine("global_sequencer", txns);
        e.run().unwrap();
        assert_eq!(e.collector().totals().committed, 300);
        assert_consistent(&e, false);
    }

    #[test]
    fn recovered_replica_catches_up() {
        let mut s = Setup::new(3);
        s.faults = FaultSchedule::outage(FaultTarget::Server(2, 1), 0.2, 0.6);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let txns = (0..400)
            .map(|i| {
                let keys: Vec<(u32, u64)> = (0..2)
                    .map(|_| (rng.gen_range(0..8), rng.gen_range(0..10)))
                    .collect();
                writer(i, rng.gen_range(0..2), millis(i as f64 * 2.0), &keys)
            })
            .collect();
        let mut e = s.engine("global_sequencer", txns);
        e.run().unwrap();
        assert_consistent(&e, false);
    }
}
