use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::SimTime;

/// Capacity of one database server.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerModel {
    /// Parallel execution lanes.
    pub executors: u32,
    pub service_time_per_op_ns: u64,
    /// Work items, and client transactions admitted at the server, allowed
    /// in flight before new ones are turned away.
    pub inflight_capacity: u64,
}

impl Default for ServerModel {
    fn default() -> Self {
        ServerModel {
            executors: 8,
            service_time_per_op_ns: 20_000,
            inflight_capacity: 32_000,
        }
    }
}

impl ServerModel {
    pub fn validate(&self) -> Result<()> {
        if self.executors == 0 {
            return Err(Error::config("executors must be at least 1"));
        }
        if self.inflight_capacity == 0 {
            return Err(Error::config("inflight_capacity must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServiceError {
    Down,
    Overload,
}

/// Runtime state of one server.
#[derive(Debug, Clone)]
pub struct ServerState {
    pub up: bool,
    /// Bumped on every crash; timers from an older epoch are dropped.
    pub epoch: u32,
    lanes: Vec<SimTime>,
    pub in_service: u64,
    pub peak_queue: u64,
    pub busy_ns: u64,
    /// Client transactions entered here and not yet answered.
    pub admitted: u64,
    pub peak_admitted: u64,
    pub bytes_sent: u64,
}

impl ServerState {
    pub fn new(model: &ServerModel) -> Self {
        ServerState {
            up: true,
            epoch: 0,
            lanes: vec![0; model.executors as usize],
            in_service: 0,
            peak_queue: 0,
            busy_ns: 0,
            admitted: 0,
            peak_admitted: 0,
            bytes_sent: 0,
        }
    }

    /// Queues `cost` ns of work on the earliest free lane and returns its
    /// completion time. Work is FIFO per lane.
    pub fn enqueue(&mut self, now: SimTime, cost: SimTime) -> SimTime {
        let (i, free) = self
            .lanes
            .iter()
            .copied()
            .enumerate()
            .min_by_key(|&(i, t)| (t, i))
            .expect("at least one lane");
        let done = free.max(now) + cost;
        self.lanes[i] = done;
        self.busy_ns += cost;
        self.in_service += 1;
        self.peak_queue = self.peak_queue.max(self.in_service);
        done
    }

    pub fn complete(&mut self) {
        self.in_service = self.in_service.saturating_sub(1);
    }

    pub fn crash(&mut self) {
        self.up = false;
        self.epoch += 1;
        self.in_service = 0;
    }

    pub fn recover(&mut self, now: SimTime) {
        self.up = true;
        for l in &mut self.lanes {
            *l = now;
        }
    }

    pub fn admit(&mut self) {
        self.admitted += 1;
        self.peak_admitted = self.peak_admitted.max(self.admitted);
    }

    pub fn release(&mut self) {
        self.admitted = self.admitted.saturating_sub(1);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(executors: u32) -> ServerModel {
        ServerModel {
            executors,
            service_time_per_op_ns: 50_000,
            inflight_capacity: 10,
        }
    }

    #[test]
    fn idle_single_lane() {
        let m = model(1);
        let mut s = ServerState::new(&m);
        assert_eq!(
            s.enqueue(1_000, 10 * m.service_time_per_op_ns),
            1_000 + 500_000
        );
    }

    #[test]
    fn fifo_on_one_lane() {
        let mut s = ServerState::new(&model(1));
        s.enqueue(0, 500_000);
        assert_eq!(s.enqueue(0, 500_000), 1_000_000);
        assert_eq!(s.peak_queue, 2);
    }

    #[test]
    fn lanes_run_in_parallel() {
        let mut s = ServerState::new(&model(2));
        assert_eq!(s.enqueue(0, 100), 100);
        assert_eq!(s.enqueue(0, 100), 100);
        assert_eq!(s.enqueue(0, 100), 200);
    }

    #[test]
    fn zero_capacity_rejected() {
        let mut m = model(1);
        m.inflight_capacity = 0;
        assert!(m.validate().is_err());
        m.inflight_capacity = 1;
        m.executors = 0;
        assert!(m.validate().is_err());
    }
}
