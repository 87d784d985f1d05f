use std::collections::HashMap;
use std::rc::Rc;

use super::{CommitPosition, ProtocolModel, RejectReason, Verdict};
use crate::model::{ServerId, Transaction, TxnId};
use crate::netsim::{Context, Message};

/// Executes each transaction at its entry server and commits it. Useful as
/// a plumbing check: latency is the local service time.
#[derive(Default)]
pub struct Echo {
    pending: HashMap<ServerId, HashMap<TxnId, Rc<Transaction>>>,
    applied: HashMap<ServerId, u64>,
}

impl Echo {
    pub fn new() -> Self {
        Self::default()
    }
}

impl ProtocolModel for Echo {
    fn name(&self) -> &str {
        "echo"
    }

    fn on_submit(&mut self, ctx: &mut Context, entry: ServerId, txn: Rc<Transaction>) {
        match ctx.service(entry, txn.op_count().max(1), txn.id) {
            Ok(_) => {
                self.pending.entry(entry).or_default().insert(txn.id, txn);
            }
            Err(_) => ctx.respond(txn.id, Verdict::Rejected(RejectReason::Overload)),
        }
    }

    fn on_message(&mut self, _ctx: &mut Context, _msg: Message) {}

    fn on_timer(&mut self, ctx: &mut Context, server: ServerId, tag: u64) {
        if let Some(txn) = self.pending.get_mut(&server).and_then(|m| m.remove(&tag)) {
            let n = self.applied.entry(server).or_insert(0);
            *n += 1;
            let flat = ctx.topology().flat(server) as u64;
            ctx.decide_commit(&txn, CommitPosition::new(*n, flat));
            ctx.respond(txn.id, Verdict::Committed);
        }
    }

    fn on_crash(&mut self, _ctx: &mut Context, server: ServerId) {
        self.pending.remove(&server);
        self.applied.remove(&server);
    }
}
