use serde::{Deserialize, Serialize};

use crate::model::{LogicTag, RegionId, TxnClass, TxnId};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbortReason {
    Conflict,
    /// A participant or coordinator gave up waiting for votes.
    VoteTimeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Overload,
    /// No response before the client timeout.
    Timeout,
    /// No live server in the origin region.
    Unavailable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "reason", rename_all = "snake_case")]
pub enum Verdict {
    Committed,
    Aborted(AbortReason),
    Rejected(RejectReason),
}

impl Verdict {
    pub fn is_committed(self) -> bool {
        self == Verdict::Committed
    }
}

/// Position of a committed transaction in the serialization order.
/// Ordered lexicographically by (major, minor).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CommitPosition {
    pub major: u64,
    pub minor: u64,
}

impl CommitPosition {
    pub fn new(major: u64, minor: u64) -> Self {
        CommitPosition { major, minor }
    }
}

/// The client-visible terminal result of one transaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub txn_id: TxnId,
    pub origin: RegionId,
    pub class: TxnClass,
    pub logic_tag: LogicTag,
    pub read_only: bool,
    pub verdict: Verdict,
    pub submit_time: SimTime,
    /// Time the client observed the verdict.
    pub commit_time: SimTime,
    pub position: Option<CommitPosition>,
}

impl Outcome {
    pub fn latency(&self) -> SimTime {
        self.commit_time - self.submit_time
    }
}
