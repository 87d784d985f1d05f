use std::any::Any;
use std::collections::{BinaryHeap, HashMap};
use std::io::Write;
use std::path::Path;
use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::event::{Event, EventKind, Message};
use super::fault::{FaultAction, FaultEntry, FaultSchedule};
use super::network::Network;
use super::server::{ServerModel, ServerState, ServiceError};
use super::wan::WanProfile;
use crate::error::{Error, Result};
use crate::metrics::{
    Collector, NetworkCounters, Pricing, ReportMeta, RunReport, ServerUtilization,
};
use crate::model::{
    classify, LogicTag, PlacementMap, RegionId, ServerId, Topology, Transaction, TxnClass, TxnId,
};
use crate::protocols::{CommitPosition, Outcome, ProtocolModel, RejectReason, Verdict};
use crate::seed::{derive, streams};
use crate::time::{secs, to_secs, SimTime};

pub const DEFAULT_CLIENT_TIMEOUT_S: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub topology: Topology,
    pub placement: PlacementMap,
    pub wan: WanProfile,
    pub server: ServerModel,
    pub faults: FaultSchedule,
    /// Submissions stop here; it is also the end of the measurement window.
    pub duration: SimTime,
    pub warmup: SimTime,
    /// Extra simulated time after `duration` for outstanding work to finish.
    pub drain: SimTime,
    pub client_timeout: SimTime,
    pub seed: u64,
    /// Keep a newline-delimited JSON line per processed event.
    pub trace: bool,
    pub keep_outcomes: bool,
    /// Keep every committed transaction for oracle replay.
    pub keep_commits: bool,
}

impl EngineConfig {
    pub fn new(
        topology: Topology,
        placement: PlacementMap,
        wan: WanProfile,
        duration: SimTime,
        seed: u64,
    ) -> Self {
        let timeout = secs(DEFAULT_CLIENT_TIMEOUT_S);
        EngineConfig {
            topology,
            placement,
            wan,
            server: ServerModel::default(),
            faults: FaultSchedule::default(),
            duration,
            warmup: 0,
            drain: timeout + secs(1.0),
            client_timeout: timeout,
            seed,
            trace: false,
            keep_outcomes: false,
            keep_commits: false,
        }
    }

    pub fn horizon(&self) -> SimTime {
        self.duration + self.drain
    }

    pub fn validate(&self) -> Result<()> {
        self.wan.validate()?;
        self.server.validate()?;
        let r = self.topology.regions();
        if self.wan.region_count() != r || self.placement.regions() != r {
            return Err(Error::config(format!(
                "region counts disagree: topology {r}, WAN {}, placement {}",
                self.wan.region_count(),
                self.placement.regions()
            )));
        }
        if self.placement.partitions() != self.topology.partitions() {
            return Err(Error::config(
                "placement and topology partition counts differ",
            ));
        }
        if self.duration == 0 || self.warmup >= self.duration {
            return Err(Error::config(
                "warm-up must be shorter than a positive duration",
            ));
        }
        if self.client_timeout == 0 {
            return Err(Error::config("client timeout must be positive"));
        }
        self.faults.validate(&self.topology, self.horizon())
    }
}

struct Client {
    entry: ServerId,
    submit: SimTime,
    origin: RegionId,
    class: TxnClass,
    tag: LogicTag,
    read_only: bool,
    write_bytes: u64,
}

/// A transaction the protocol decided to commit, with its serialization position.
#[derive(Debug, Clone)]
pub struct CommitRecord {
    pub txn: Rc<Transaction>,
    pub position: CommitPosition,
    pub time: SimTime,
}

/// Engine services available to protocol callbacks.
pub struct Context {
    now: SimTime,
    seq: u64,
    queue: BinaryHeap<Event>,
    topology: Topology,
    placement: PlacementMap,
    model: ServerModel,
    servers: Vec<ServerState>,
    network: Network,
    rng: ChaCha8Rng,
    clients: HashMap<TxnId, Client>,
    collector: Collector,
    decided: HashMap<TxnId, CommitPosition>,
    commits: Option<Vec<CommitRecord>>,
    client_timeout: SimTime,
    round_robin: Vec<usize>,
    hasher: Sha256,
    trace: Option<Vec<String>>,
    events: u64,
    error: Option<Error>,
}

impl Context {
    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn placement(&self) -> &PlacementMap {
        &self.placement
    }

    pub fn server_model(&self) -> &ServerModel {
        &self.model
    }

    /// Protocol-owned random stream.
    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn is_up(&self, s: ServerId) -> bool {
        self.topology.contains(s) && self.servers[self.topology.flat(s)].up
    }

    /// Records a protocol bug; the run stops with an engine error.
    pub fn fail(&mut self, msg: impl Into<String>) {
        if self.error.is_none() {
            self.error = Some(Error::Engine(msg.into()));
        }
    }

    fn push(&mut self, time: SimTime, kind: EventKind) {
        if time < self.now {
            self.fail(format!(
                "{} event scheduled at {time} before now {}",
                kind.name(),
                self.now
            ));
            return;
        }
        self.seq += 1;
        self.queue.push(Event {
            time,
            seq: self.seq,
            kind,
        });
    }

    /// Sends a message. Sends from a down server are suppressed.
    pub fn send(&mut self, src: ServerId, dst: ServerId, bytes: u64, tag: u32, body: Rc<dyn Any>) {
        for s in [src, dst] {
            if !self.topology.contains(s) {
                self.error.get_or_insert(Error::UnknownEndpoint {
                    region: s.region.0,
                    slot: s.slot,
                });
                return;
            }
        }
        let fs = self.topology.flat(src);
        if !self.servers[fs].up {
            return;
        }
        let arrive = self.network.transmit(self.now, src, dst, bytes);
        self.servers[fs].bytes_sent += bytes.max(super::network::HEADER_BYTES);
        if let Some(t) = arrive {
            let msg = Message {
                src,
                dst,
                bytes: bytes.max(super::network::HEADER_BYTES),
                tag,
                body,
            };
            self.push(t, EventKind::Deliver(msg));
        }
    }

    fn schedule_work(
        &mut self,
        server: ServerId,
        ops: u64,
        tag: u64,
        check: bool,
    ) -> std::result::Result<SimTime, ServiceError> {
        if ops == 0 {
            self.fail(format!("service request with zero ops at {server}"));
            return Err(ServiceError::Down);
        }
        let f = self.topology.flat(server);
        let st = &mut self.servers[f];
        if !st.up {
            return Err(ServiceError::Down);
        }
        if check && st.in_service >= self.model.inflight_capacity {
            return Err(ServiceError::Overload);
        }
        let done = st.enqueue(self.now, ops * self.model.service_time_per_op_ns);
        let epoch = st.epoch;
        self.push(
            done,
            EventKind::Timer {
                server,
                epoch,
                tag,
                service: true,
            },
        );
        Ok(done)
    }

    /// Queues `ops` operations on `server`; completion arrives as
    /// `on_timer(server, tag)`. Refused when the server is saturated.
    pub fn service(
        &mut self,
        server: ServerId,
        ops: u64,
        tag: u64,
    ) -> std::result::Result<SimTime, ServiceError> {
        self.schedule_work(server, ops, tag, true)
    }

    /// Like [`Context::service`] but never refuses a live server. For
    /// protocols that must execute an already ordered log.
    pub fn service_ordered(&mut self, server: ServerId, ops: u64, tag: u64) -> Option<SimTime> {
        self.schedule_work(server, ops, tag, false).ok()
    }

    pub fn set_timer(&mut self, server: ServerId, delay: SimTime, tag: u64) {
        let f = self.topology.flat(server);
        let st = &self.servers[f];
        if !st.up {
            return;
        }
        let epoch = st.epoch;
        self.push(
            self.now + delay,
            EventKind::Timer {
                server,
                epoch,
                tag,
                service: false,
            },
        );
    }

    /// Fixes the serialization position of a committed transaction.
    pub fn decide_commit(&mut self, txn: &Rc<Transaction>, position: CommitPosition) {
        match self.decided.get(&txn.id) {
            Some(p) if *p == position => {}
            Some(p) => {
                let p = *p;
                self.fail(format!(
                    "txn {} committed at {p:?} and again at {position:?}",
                    txn.id
                ));
            }
            None => {
                self.decided.insert(txn.id, position);
                if let Some(c) = &mut self.commits {
                    c.push(CommitRecord {
                        txn: Rc::clone(txn),
                        position,
                        time: self.now,
                    });
                }
            }
        }
    }

    pub fn decision(&self, txn: TxnId) -> Option<CommitPosition> {
        self.decided.get(&txn).copied()
    }

    /// Whether the client is still waiting for `txn`.
    pub fn awaiting(&self, txn: TxnId) -> bool {
        self.clients.contains_key(&txn)
    }

    /// Delivers the client verdict. Ignored once the client has a verdict
    /// (for instance after its timeout).
    pub fn respond(&mut self, txn: TxnId, verdict: Verdict) {
        let Some(c) = self.clients.remove(&txn) else {
            return;
        };
        let position = self.decided.get(&txn).copied();
        if verdict.is_committed() && position.is_none() {
            self.fail(format!(
                "txn {txn} reported committed without a commit decision"
            ));
        }
        let f = self.topology.flat(c.entry);
        self.servers[f].release();
        let o = Outcome {
            txn_id: txn,
            origin: c.origin,
            class: c.class,
            logic_tag: c.tag,
            read_only: c.read_only,
            verdict,
            submit_time: c.submit,
            commit_time: self.now,
            position: if verdict.is_committed() {
                position
            } else {
                None
            },
        };
        if let Err(e) = self.collector.record(&o, c.write_bytes) {
            self.error.get_or_insert(e);
        }
    }

    fn reject_now(&mut self, txn: &Transaction, class: TxnClass, reason: RejectReason) {
        let o = Outcome {
            txn_id: txn.id,
            origin: txn.origin,
            class,
            logic_tag: txn.logic_tag,
            read_only: txn.is_read_only(),
            verdict: Verdict::Rejected(reason),
            submit_time: txn.submit_time,
            commit_time: self.now,
            position: None,
        };
        if let Err(e) = self.collector.record(&o, 0) {
            self.error.get_or_insert(e);
        }
    }

    fn pick_entry(&mut self, origin: RegionId) -> Option<ServerId> {
        let spr = self.topology.servers_per_region() as usize;
        let start = self.round_robin[origin.index()];
        for k in 0..spr {
            let slot = (start + k) % spr;
            let s = ServerId {
                region: origin,
                slot: slot as u16,
            };
            if self.servers[self.topology.flat(s)].up {
                self.round_robin[origin.index()] = (slot + 1) % spr;
                return Some(s);
            }
        }
        None
    }

    fn log_event(&mut self, ev: &Event) {
        self.events += 1;
        let flat = |s: ServerId| self.topology.flat(s) as u64;
        let (code, a, b, c, d): (u8, u64, u64, u64, u64) = match &ev.kind {
            EventKind::Submit(t) => (1, t.id, t.origin.0 as u64, 0, 0),
            EventKind::Deliver(m) => (2, flat(m.src), flat(m.dst), m.tag as u64, m.bytes),
            EventKind::Timer {
                server,
                tag,
                service,
                ..
            } => (3, flat(*server), *tag, *service as u64, 0),
            EventKind::Fault(i) => (4, *i as u64, 0, 0, 0),
            EventKind::ClientTimeout(id) => (5, *id, 0, 0, 0),
        };
        self.hasher.update(ev.time.to_le_bytes());
        self.hasher.update(ev.seq.to_le_bytes());
        self.hasher.update([code]);
        for x in [a, b, c, d] {
            self.hasher.update(x.to_le_bytes());
        }
        if let Some(lines) = &mut self.trace {
            lines.push(format!(
                "{{\"t\":{},\"seq\":{},\"ev\":\"{}\",\"a\":{a},\"b\":{b},\"c\":{c},\"d\":{d}}}",
                ev.time,
                ev.seq,
                ev.kind.name()
            ));
        }
    }
}

/// One simulation run: the engine services plus the protocol under test
/// and the transaction stream feeding it.
pub struct Engine {
    ctx: Context,
    protocol: Box<dyn ProtocolModel>,
    stream: Box<dyn Iterator<Item = Transaction>>,
    faults: Vec<FaultEntry>,
    horizon: SimTime,
    duration: SimTime,
    started: bool,
}

impl Engine {
    pub fn new(
        cfg: EngineConfig,
        protocol: Box<dyn ProtocolModel>,
        stream: Box<dyn Iterator<Item = Transaction>>,
    ) -> Result<Engine> {
        cfg.validate()?;
        let servers = (0..cfg.topology.server_count())
            .map(|_| ServerState::new(&cfg.server))
            .collect();
        let mut collector = Collector::new(cfg.warmup, cfg.duration);
        if cfg.keep_outcomes {
            collector.keep_outcomes();
        }
        let regions = cfg.topology.regions() as usize;
        let network = Network::new(
            cfg.wan.clone(),
            cfg.topology.servers_per_region(),
            derive(cfg.seed, &[streams::NETWORK]),
            (cfg.warmup, cfg.duration),
        );
        let ctx = Context {
            now: 0,
            seq: 0,
            queue: BinaryHeap::new(),
            model: cfg.server,
            servers,
            network,
            rng: ChaCha8Rng::seed_from_u64(derive(cfg.seed, &[streams::PROTOCOL])),
            clients: HashMap::new(),
            collector,
            decided: HashMap::new(),
            commits: cfg.keep_commits.then(Vec::new),
            client_timeout: cfg.client_timeout,
            round_robin: vec![0; regions],
            hasher: Sha256::new(),
            trace: cfg.trace.then(Vec::new),
            events: 0,
            error: None,
            topology: cfg.topology.clone(),
            placement: cfg.placement.clone(),
        };
        Ok(Engine {
            ctx,
            protocol,
            stream,
            faults: cfg.faults.sorted(),
            horizon: cfg.horizon(),
            duration: cfg.duration,
            started: false,
        })
    }

    fn start(&mut self) {
        self.started = true;
        self.protocol.start(&mut self.ctx);
        for i in 0..self.faults.len() {
            let t = self.faults[i].time();
            self.ctx.push(t, EventKind::Fault(i));
        }
        self.pull_submit();
    }

    fn pull_submit(&mut self) {
        if let Some(t) = self.stream.next() {
            if t.submit_time >= self.duration {
                return;
            }
            if t.submit_time < self.ctx.now {
                self.ctx
                    .fail(format!("stream out of order at txn {}", t.id));
                return;
            }
            self.ctx.push(t.submit_time, EventKind::Submit(Box::new(t)));
        }
    }

    /// Runs until the drain horizon.
    pub fn run(&mut self) -> Result<()> {
        self.run_until(self.horizon)
    }

    /// Processes events with fire time before `until`; the clock then
    /// stands at `until` or later.
    pub fn run_until(&mut self, until: SimTime) -> Result<()> {
        if !self.started {
            self.start();
        }
        while let Some(ev) = self.ctx.queue.peek() {
            if ev.time >= until {
                break;
            }
            let ev = self.ctx.queue.pop().expect("peeked");
            debug_assert!(ev.time >= self.ctx.now);
            self.ctx.now = ev.time;
            self.ctx.log_event(&ev);
            self.dispatch(ev.kind)?;
            if let Some(e) = self.ctx.error.take() {
                return Err(e);
            }
        }
        self.ctx.now = self.ctx.now.max(until);
        Ok(())
    }

    fn dispatch(&mut self, kind: EventKind) -> Result<()> {
        if let EventKind::Submit(txn) = kind {
            self.pull_submit();
            return self.submit(*txn);
        }
        let ctx = &mut self.ctx;
        match kind {
            EventKind::Submit(_) => unreachable!("handled above"),
            EventKind::Deliver(msg) => {
                let f = ctx.topology.flat(msg.dst);
                if ctx.servers[f].up {
                    ctx.network.counters_mut().delivered += 1;
                    self.protocol.on_message(ctx, msg);
                } else {
                    ctx.network.counters_mut().discarded += 1;
                }
            }
            EventKind::Timer {
                server,
                epoch,
                tag,
                service,
            } => {
                let st = &mut ctx.servers[ctx.topology.flat(server)];
                if st.up && st.epoch == epoch {
                    if service {
                        st.complete();
                    }
                    self.protocol.on_timer(ctx, server, tag);
                }
            }
            EventKind::Fault(i) => {
                let e = self.faults[i];
                for s in e.target.servers(&ctx.topology)? {
                    let f = ctx.topology.flat(s);
                    match e.action {
                        FaultAction::Crash => {
                            if ctx.servers[f].up {
                                ctx.servers[f].crash();
                                log::debug!("crash {s} at {:.3}s", to_secs(ctx.now));
                                self.protocol.on_crash(ctx, s);
                            }
                        }
                        FaultAction::Recover => {
                            if ctx.servers[f].up {
                                return Err(Error::Schedule(format!(
                                    "recover of {s}, which is up"
                                )));
                            }
                            ctx.servers[f].recover(ctx.now);
                            log::debug!("recover {s} at {:.3}s", to_secs(ctx.now));
                            self.protocol.on_recover(ctx, s);
                        }
                    }
                }
            }
            EventKind::ClientTimeout(id) => {
                if ctx.clients.contains_key(&id) {
                    ctx.respond(id, Verdict::Rejected(RejectReason::Timeout));
                }
            }
        }
        Ok(())
    }

    fn submit(&mut self, txn: Transaction) -> Result<()> {
        let ctx = &mut self.ctx;
        let class = classify(&txn, &ctx.placement)?;
        ctx.collector.record_submit(txn.submit_time, class);
        let Some(entry) = ctx.pick_entry(txn.origin) else {
            ctx.reject_now(&txn, class, RejectReason::Unavailable);
            return Ok(());
        };
        let f = ctx.topology.flat(entry);
        if ctx.servers[f].admitted >= ctx.model.inflight_capacity {
            ctx.reject_now(&txn, class, RejectReason::Overload);
            return Ok(());
        }
        ctx.servers[f].admit();
        ctx.clients.insert(
            txn.id,
            Client {
                entry,
                submit: txn.submit_time,
                origin: txn.origin,
                class,
                tag: txn.logic_tag,
                read_only: txn.is_read_only(),
                write_bytes: txn.write_bytes(),
            },
        );
        let deadline = ctx.now + ctx.client_timeout;
        ctx.push(deadline, EventKind::ClientTimeout(txn.id));
        self.protocol.on_submit(ctx, entry, Rc::new(txn));
        Ok(())
    }

    pub fn now(&self) -> SimTime {
        self.ctx.now
    }

    pub fn context(&self) -> &Context {
        &self.ctx
    }

    pub fn protocol(&self) -> &dyn ProtocolModel {
        self.protocol.as_ref()
    }

    pub fn collector(&self) -> &Collector {
        &self.ctx.collector
    }

    pub fn counters(&self) -> NetworkCounters {
        self.ctx.network.counters()
    }

    pub fn network(&self) -> &Network {
        &self.ctx.network
    }

    /// Committed transactions in decision order; empty unless
    /// `keep_commits` was set.
    pub fn commits(&self) -> &[CommitRecord] {
        self.ctx.commits.as_deref().unwrap_or(&[])
    }

    pub fn decision(&self, txn: TxnId) -> Option<CommitPosition> {
        self.ctx.decision(txn)
    }

    pub fn events_processed(&self) -> u64 {
        self.ctx.events
    }

    pub fn trace_lines(&self) -> Option<&[String]> {
        self.ctx.trace.as_deref()
    }

    pub fn write_trace(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        for l in self.trace_lines().unwrap_or(&[]) {
            writeln!(f, "{l}").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    /// Hex digest over every processed event.
    pub fn trace_hash(&self) -> String {
        self.ctx
            .hasher
            .clone()
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn utilization(&self) -> Vec<ServerUtilization> {
        let ctx = &self.ctx;
        let elapsed = ctx.now.max(1);
        ctx.topology
            .servers()
            .map(|s| {
                let st = &ctx.servers[ctx.topology.flat(s)];
                ServerUtilization {
                    server: s.to_string(),
                    busy_fraction: (st.busy_ns as f64
                        / (elapsed as f64 * ctx.model.executors as f64))
                        .min(1.0),
                    peak_queue_depth: st.peak_queue,
                    peak_inflight: st.peak_admitted,
                    ram_fraction: st.peak_admitted as f64 / ctx.model.inflight_capacity as f64,
                    bytes_per_sec: st.bytes_sent as f64 / to_secs(elapsed),
                }
            })
            .collect()
    }

    pub fn report(&self, meta: ReportMeta, pricing: &Pricing) -> Result<RunReport> {
        RunReport::build(
            meta,
            &self.ctx.collector,
            self.ctx.network.egress(),
            self.counters(),
            self.utilization(),
            pricing,
            self.trace_hash(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Key, ReplicationScope, Value};
    use crate::netsim::{FaultSchedule, FaultTarget};
    use crate::protocols::echo::Echo;
    use crate::time::millis;

    fn setup(regions: u16, spr: u16) -> EngineConfig {
        let labels: Vec<String> = (0..regions).map(|r| format!("r{r}")).collect();
        let topo = Topology::new(labels.clone(), spr, 8).unwrap();
        let placement = PlacementMap::balanced(8, regions, ReplicationScope::Partial(0)).unwrap();
        let mut wan = WanProfile::uniform(&labels, 100.0);
        wan.jitter_fraction = 0.0;
        EngineConfig::new(topo, placement, wan, secs(2.0), 7)
    }

    fn txns(n: u64, gap: SimTime) -> Vec<Transaction> {
        (0..n)
            .map(|i| {
                let mut t = Transaction::new(i, RegionId(0), LogicTag::Custom);
                t.write_set
                    .insert(Key::new(0, i), Value { seed: i, len: 8 });
                t.submit_time = i * gap;
                t
            })
            .collect()
    }

    #[test]
    fn empty_run_advances_clock() {
        let mut e = Engine::new(
            setup(2, 1),
            Box::new(Echo::new()),
            Box::new(std::iter::empty()),
        )
        .unwrap();
        e.run_until(secs(5.0)).unwrap();
        assert_eq!(e.now(), secs(5.0));
        assert_eq!(e.events_processed(), 0);
    }

    #[test]
    fn echo_commits_everything() {
        let cfg = setup(2, 1);
        let st = cfg.server.service_time_per_op_ns;
        let mut e = Engine::new(
            cfg,
            Box::new(Echo::new()),
            Box::new(txns(100, millis(10.0)).into_iter()),
        )
        .unwrap();
        e.run().unwrap();
        let c = e.collector().totals();
        assert_eq!(c.submitted, 100);
        assert_eq!(c.committed, 100);
        let h = &e.collector().histograms()["lsh/rw/custom"];
        let p50 = h.percentile(0.5).unwrap().unwrap();
        assert!(p50 >= st as f64 && p50 <= st as f64 * 1.02);
        assert!(e.counters().conserved());
    }

    #[test]
    fn same_seed_same_trace() {
        let run = || {
            let mut cfg = setup(2, 2);
            cfg.trace = true;
            let mut e = Engine::new(
                cfg,
                Box::new(Echo::new()),
                Box::new(txns(50, millis(3.0)).into_iter()),
            )
            .unwrap();
            e.run().unwrap();
            (e.trace_hash(), e.trace_lines().unwrap().len())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn region_down_rejects_as_unavailable() {
        let mut cfg = setup(2, 1);
        cfg.faults = FaultSchedule::outage(FaultTarget::Region(0), 0.0, 1.5);
        let mut e = Engine::new(
            cfg,
            Box::new(Echo::new()),
            Box::new(txns(10, millis(100.0)).into_iter()),
        )
        .unwrap();
        e.run().unwrap();
        assert_eq!(e.collector().totals().rejected, 10);
    }

    #[test]
    fn bad_schedule_rejected_up_front() {
        let mut cfg = setup(2, 1);
        cfg.faults = FaultSchedule::outage(FaultTarget::Server(0, 0), 1.0, 0.5);
        assert!(matches!(
            Engine::new(cfg, Box::new(Echo::new()), Box::new(std::iter::empty())),
            Err(Error::Schedule(_))
        ));
    }

    /// Records callbacks per server to check crash isolation.
    type Calls = Rc<std::cell::RefCell<Vec<(SimTime, ServerId, &'static str)>>>;

    struct Probe {
        calls: Calls,
    }

    impl ProtocolModel for Probe {
        fn name(&self) -> &str {
            "probe"
        }
        fn start(&mut self, ctx: &mut Context) {
            ctx.set_timer(ServerId::new(0, 0), millis(1.0), 0);
        }
        fn on_submit(&mut self, _: &mut Context, _: ServerId, _: Rc<Transaction>) {}
        fn on_message(&mut self, ctx: &mut Context, msg: Message) {
            self.calls
                .borrow_mut()
                .push((ctx.now(), msg.dst, "message"));
        }
        fn on_timer(&mut self, ctx: &mut Context, server: ServerId, _: u64) {
            // ping (0,1) every 10 ms
            ctx.send(server, ServerId::new(0, 1), 100, 0, Rc::new(()));
            ctx.set_timer(server, millis(10.0), 0);
        }
        fn on_recover(&mut self, ctx: &mut Context, server: ServerId) {
            self.calls.borrow_mut().push((ctx.now(), server, "recover"));
        }
    }

    #[test]
    fn crashed_server_sees_nothing() {
        let mut cfg = setup(1, 2);
        cfg.wan.rtt_ms[0][0] = 0.5;
        cfg.faults = FaultSchedule::outage(FaultTarget::Server(0, 1), 0.5, 1.0);
        let calls = Calls::default();
        let probe = Probe {
            calls: calls.clone(),
        };
        let mut e = Engine::new(cfg, Box::new(probe), Box::new(std::iter::empty())).unwrap();
        e.run_until(secs(2.0)).unwrap();
        let counters = e.counters();
        assert!(counters.discarded > 0);
        assert!(counters.conserved());
        let calls = calls.borrow();
        let target = ServerId::new(0, 1);
        assert!(calls
            .iter()
            .filter(|(_, s, _)| *s == target)
            .all(|(t, _, kind)| *t <= secs(0.5) || *t >= secs(1.0) || *kind == "recover"));
        let recovers: Vec<_> = calls.iter().filter(|c| c.2 == "recover").collect();
        assert_eq!(recovers.len(), 1);
        assert_eq!(recovers[0].0, secs(1.0));
    }
}
