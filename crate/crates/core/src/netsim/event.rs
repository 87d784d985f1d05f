use std::any::Any;
use std::cmp::Ordering;
use std::fmt;
use std::rc::Rc;

use crate::model::{ServerId, Transaction, TxnId};
use crate::time::SimTime;

/// A protocol message. `body` is opaque to the engine; protocols downcast it.
#[derive(Clone)]
pub struct Message {
    pub src: ServerId,
    pub dst: ServerId,
    pub bytes: u64,
    pub tag: u32,
    pub body: Rc<dyn Any>,
}

impl Message {
    pub fn body<T: 'static>(&self) -> Option<&T> {
        self.body.downcast_ref::<T>()
    }
}

impl fmt::Debug for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Message")
            .field("src", &self.src)
            .field("dst", &self.dst)
            .field("bytes", &self.bytes)
            .field("tag", &self.tag)
            .finish_non_exhaustive()
    }
}

#[derive(Debug)]
pub enum EventKind {
    Submit(Box<Transaction>),
    Deliver(Message),
    Timer {
        server: ServerId,
        epoch: u32,
        tag: u64,
        service: bool,
    },
    /// Index into the sorted fault schedule.
    Fault(usize),
    ClientTimeout(TxnId),
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::Submit(_) => "submit",
            EventKind::Deliver(_) => "deliver",
            EventKind::Timer { service: true, .. } => "service",
            EventKind::Timer { .. } => "timer",
            EventKind::Fault(_) => "fault",
            EventKind::ClientTimeout(_) => "timeout",
        }
    }
}

/// Queue entry ordered by `(time, seq)`; `seq` is the insertion counter.
#[derive(Debug)]
pub struct Event {
    pub time: SimTime,
    pub seq: u64,
    pub kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, o: &Self) -> bool {
        self.time == o.time && self.seq == o.seq
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Event {
    // reversed so BinaryHeap pops the earliest event
    fn cmp(&self, o: &Self) -> Ordering {
        (o.time, o.seq).cmp(&(self.time, self.seq))
    }
}
