use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::echo::Echo;
use super::global_sequencer::GlobalSequencer;
use super::home_aware::HomeAware;
use super::quorum_commit::QuorumCommit;
use super::ProtocolModel;
use crate::error::{Error, Result};
use crate::model::{PlacementMap, ReplicationScope, Topology};

/// Tuning knobs shared by the reference protocols. Each protocol reads
/// only the fields it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolParams {
    /// Batch interval of the global sequencer.
    pub sequencer_epoch_ms: f64,
    /// Batch interval of per-region logs and of the multi-home orderer.
    pub region_epoch_ms: f64,
    /// Region hosting the sequencer / multi-home orderer.
    pub orderer_region: u16,
    /// Ship committed writes of home-aware transactions to replicas.
    pub async_replication: bool,
    /// Replicas per partition for quorum commit.
    pub quorum_replicas: usize,
    /// Coordinator waits this long for votes before aborting.
    pub vote_timeout_ms: f64,
    /// Prepared participants ask for the decision at this interval.
    pub status_retry_ms: f64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams {
            sequencer_epoch_ms: 5.0,
            region_epoch_ms: 1.0,
            orderer_region: 0,
            async_replication: false,
            quorum_replicas: 2,
            vote_timeout_ms: 2000.0,
            status_retry_ms: 500.0,
        }
    }
}

impl ProtocolParams {
    pub fn validate(&self, regions: u16) -> Result<()> {
        for (name, v) in [
            ("sequencer_epoch_ms", self.sequencer_epoch_ms),
            ("region_epoch_ms", self.region_epoch_ms),
            ("vote_timeout_ms", self.vote_timeout_ms),
            ("status_retry_ms", self.status_retry_ms),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{name} must be positive")));
            }
        }
        if self.orderer_region >= regions {
            return Err(Error::config(format!(
                "orderer_region {} outside {regions} regions",
                self.orderer_region
            )));
        }
        Ok(())
    }
}

/// What a protocol factory sees.
pub struct ProtocolEnv<'a> {
    pub topology: &'a Topology,
    pub placement: &'a PlacementMap,
    pub params: &'a ProtocolParams,
}

pub type Factory = fn(&ProtocolEnv) -> Result<Box<dyn ProtocolModel>>;

#[derive(Clone)]
pub struct ProtocolInfo {
    pub name: String,
    /// Copies each partition needs beyond its home, given the region count.
    pub scope: fn(u16, &ProtocolParams) -> ReplicationScope,
    pub factory: Factory,
}

/// Protocols selectable by name.
#[derive(Clone, Default)]
pub struct Registry {
    entries: BTreeMap<String, ProtocolInfo>,
}

impl Registry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The three reference models plus `echo`.
    pub fn with_defaults() -> Self {
        let mut r = Registry::empty();
        r.register(ProtocolInfo {
            name: "echo".into(),
            scope: |_, _| ReplicationScope::Partial(0),
            factory: |_| Ok(Box::new(Echo::new())),
        })
        .expect("fresh registry");
        r.register(ProtocolInfo {
            name: "global_sequencer".into(),
            scope: |_, _| ReplicationScope::Full,
            factory: |env| Ok(Box::new(GlobalSequencer::new(env)?)),
        })
        .expect("fresh registry");
        r.register(ProtocolInfo {
            name: "home_aware".into(),
            scope: |regions, p| {
                if p.async_replication && regions > 1 {
                    ReplicationScope::Partial(1)
                } else {
                    ReplicationScope::Partial(0)
                }
            },
            factory: |env| Ok(Box::new(HomeAware::new(env)?)),
        })
        .expect("fresh registry");
        r.register(ProtocolInfo {
            name: "quorum_commit".into(),
            scope: |regions, p| {
                ReplicationScope::Partial(p.quorum_replicas.min(regions as usize - 1))
            },
            factory: |env| Ok(Box::new(QuorumCommit::new(env)?)),
        })
        .expect("fresh registry");
        r
    }

    pub fn register(&mut self, info: ProtocolInfo) -> Result<()> {
        if self.entries.contains_key(&info.name) {
            return Err(Error::DuplicateProtocol(info.name));
        }
        self.entries.insert(info.name.clone(), info);
        Ok(())
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }

    pub fn get(&self, name: &str) -> Result<&ProtocolInfo> {
        self.entries
            .get(name)
            .ok_or_else(|| Error::UnknownProtocol {
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }

    pub fn build(&self, name: &str, env: &ProtocolEnv) -> Result<Box<dyn ProtocolModel>> {
        env.params.validate(env.topology.regions())?;
        (self.get(name)?.factory)(env)
    }
}
