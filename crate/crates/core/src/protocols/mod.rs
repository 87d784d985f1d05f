//! Protocol interface, reference protocol models and the serial oracle.

use std::rc::Rc;

use crate::model::{ServerId, Transaction};
use crate::netsim::{Context, Message};

pub mod echo;
pub mod global_sequencer;
pub mod home_aware;
pub mod oracle;
pub mod outcome;
pub mod quorum_commit;
pub mod registry;
pub mod store;
#[cfg(test)]
mod testkit;

pub use oracle::{check_copies, hosted_servers, replay, replay_outcomes};
pub use outcome::{AbortReason, CommitPosition, Outcome, RejectReason, Verdict};
pub use registry::{ProtocolEnv, ProtocolInfo, ProtocolParams, Registry};
pub use store::Store;

/// A system under test. All state is kept per server and every
/// interaction between servers goes through [`Context::send`].
pub trait ProtocolModel {
    fn name(&self) -> &str;

    /// Called once before the first event.
    fn start(&mut self, _ctx: &mut Context) {}

    /// A client hands `txn` to `entry`, a live server in its origin region.
    fn on_submit(&mut self, ctx: &mut Context, entry: ServerId, txn: Rc<Transaction>);

    fn on_message(&mut self, ctx: &mut Context, msg: Message);

    /// Timer expiry or completion of work queued with `service`.
    fn on_timer(&mut self, ctx: &mut Context, server: ServerId, tag: u64);

    /// Volatile state of `server` should be dropped here.
    fn on_crash(&mut self, _ctx: &mut Context, _server: ServerId) {}

    fn on_recover(&mut self, _ctx: &mut Context, _server: ServerId) {}

    /// Data held by `server`, if the protocol keeps any.
    fn store(&self, _server: ServerId) -> Option<&Store> {
        None
    }
}
