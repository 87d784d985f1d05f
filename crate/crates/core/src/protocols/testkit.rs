//! Small harness shared by the protocol unit tests.

use std::collections::BTreeMap;

use super::{check_copies, replay, ProtocolEnv, ProtocolParams, Registry};
use crate::model::{Key, LogicTag, PlacementMap, RegionId, Topology, Transaction, Value};
use crate::netsim::{Engine, EngineConfig, FaultSchedule, WanProfile};
use crate::time::{secs, SimTime};

pub struct Setup {
    pub regions: u16,
    pub spr: u16,
    pub partitions: u32,
    pub rtt_ms: f64,
    pub params: ProtocolParams,
    pub faults: FaultSchedule,
    pub duration: SimTime,
}

impl Setup {
    pub fn new(regions: u16) -> Self {
        Setup {
            regions,
            spr: 2,
            partitions: 8,
            rtt_ms: 100.0,
            params: ProtocolParams::default(),
            faults: FaultSchedule::default(),
            duration: secs(2.0),
        }
    }

    pub fn engine(&self, protocol: &str, txns: Vec<Transaction>) -> Engine {
        let labels: Vec<String> = (0..self.regions).map(|r| format!("r{r}")).collect();
        let topo = Topology::new(labels.clone(), self.spr, self.partitions).unwrap();
        let reg = Registry::with_defaults();
        let scope = (reg.get(protocol).unwrap().scope)(self.regions, &self.params);
        let placement = PlacementMap::balanced(self.partitions, self.regions, scope).unwrap();
        let mut wan = WanProfile::uniform(&labels, self.rtt_ms);
        wan.jitter_fraction = 0.0;
        let mut cfg = EngineConfig::new(topo.clone(), placement.clone(), wan, self.duration, 11);
        cfg.faults = self.faults.clone();
        cfg.keep_outcomes = true;
        cfg.keep_commits = true;
        let env = ProtocolEnv {
            topology: &topo,
            placement: &placement,
            params: &self.params,
        };
        let model = reg.build(protocol, &env).unwrap();
        Engine::new(cfg, model, Box::new(txns.into_iter())).unwrap()
    }
}

/// A write-only transaction over `(partition, record)` pairs.
pub fn writer(id: u64, origin: u16, at: SimTime, keys: &[(u32, u64)]) -> Transaction {
    let mut t = Transaction::new(id, RegionId(origin), LogicTag::Custom);
    for &(p, r) in keys {
        t.write_set.insert(
            Key::new(p, r),
            Value {
                seed: id * 1000 + r,
                len: 16,
            },
        );
    }
    t.submit_time = at;
    t
}

/// Replays the engine's commit log and compares every copy the protocol hosts.
pub fn assert_consistent(e: &Engine, homes_only: bool) {
    let expected = replay(
        e.commits().iter().map(|c| (c.position, &*c.txn)),
        &BTreeMap::new(),
    )
    .unwrap();
    let cfg = e.context();
    check_copies(
        e.protocol(),
        cfg.topology(),
        cfg.placement(),
        &expected,
        homes_only,
    )
    .unwrap();
}

/// Latency in ms of the outcome for `txn`, if it committed.
pub fn commit_latency_ms(e: &Engine, txn: u64) -> Option<f64> {
    let o = e.collector().outcomes()?.iter().find(|o| o.txn_id == txn)?;
    o.verdict
        .is_committed()
        .then(|| crate::time::to_millis(o.latency()))
}
