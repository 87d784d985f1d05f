use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{RegionId, ServerId, Topology};
use crate::time::{secs, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultTarget {
    /// `[region, slot]`
    Server(u16, u16),
    Region(u16),
}

impl FaultTarget {
    pub fn servers(&self, topo: &Topology) -> Result<Vec<ServerId>> {
        match *self {
            FaultTarget::Server(r, s) => {
                let id = ServerId::new(r, s);
                if !topo.contains(id) {
                    return Err(Error::UnknownEndpoint { region: r, slot: s });
                }
                Ok(vec![id])
            }
            FaultTarget::Region(r) => {
                if r >= topo.regions() {
                    return Err(Error::Schedule(format!("region {r} does not exist")));
                }
                Ok(topo.servers_in(RegionId(r)).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultAction {
    Crash,
    Recover,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultEntry {
    pub time_s: f64,
    pub target: FaultTarget,
    pub action: FaultAction,
}

impl FaultEntry {
    pub fn time(&self) -> SimTime {
        secs(self.time_s)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FaultSchedule {
    pub entries: Vec<FaultEntry>,
}

impl FaultSchedule {
    pub fn new(entries: Vec<FaultEntry>) -> Self {
        FaultSchedule { entries }
    }

    /// Crash `target` at `crash_s`, bring it back at `recover_s`.
    pub fn outage(target: FaultTarget, crash_s: f64, recover_s: f64) -> Self {
        FaultSchedule::new(vec![
            FaultEntry {
                time_s: crash_s,
                target,
                action: FaultAction::Crash,
            },
            FaultEntry {
                time_s: recover_s,
                target,
                action: FaultAction::Recover,
            },
        ])
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries sorted by time, stable for ties.
    pub fn sorted(&self) -> Vec<FaultEntry> {
        let mut v = self.entries.clone();
        v.sort_by(|a, b| a.time_s.total_cmp(&b.time_s));
        v
    }

    /// Checks targets exist, times fall in `[0, horizon]`, and every
    /// recovery follows a crash of the same server.
    pub fn validate(&self, topo: &Topology, horizon: SimTime) -> Result<()> {
        let mut down: HashMap<ServerId, bool> = HashMap::new();
        for e in self.sorted() {
            if !(e.time_s.is_finite() && e.time_s >= 0.0) || e.time() > horizon {
                return Err(Error::Schedule(format!(
                    "fault at {} s outside the run",
                    e.time_s
                )));
            }
            for s in e.target.servers(topo)? {
                let d = down.entry(s).or_insert(false);
                match e.action {
                    FaultAction::Crash => *d = true,
                    FaultAction::Recover => {
                        if !*d {
                            return Err(Error::Schedule(format!(
                                "recover of {s} at {} s without a prior crash",
                                e.time_s
                            )));
                        }
                        *d = false;
                    }
                }
            }
        }
        Ok(())
    }
}
