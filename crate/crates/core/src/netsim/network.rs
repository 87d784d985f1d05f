use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::wan::WanProfile;
use crate::metrics::{EgressLedger, NetworkCounters};
use crate::model::ServerId;
use crate::time::{millis, SimTime, NANOS_PER_SEC};

/// Fixed per-message overhead in bytes.
pub const HEADER_BYTES: u64 = 64;
/// Bytes per key reference carried in a message.
pub const KEY_BYTES: u64 = 32;

/// Size of a message carrying `keys` key references and `payload` value bytes.
pub fn message_bytes(keys: usize, payload: u64) -> u64 {
    HEADER_BYTES + KEY_BYTES * keys as u64 + payload
}

/// The wide-area link model: decides the fate and arrival time of each
/// message and bills every send.
#[derive(Debug, Clone)]
pub struct Network {
    wan: WanProfile,
    rng: ChaCha8Rng,
    uplink_free: Vec<SimTime>,
    servers_per_region: u16,
    egress: EgressLedger,
    counters: NetworkCounters,
}

impl Network {
    pub fn new(
        wan: WanProfile,
        servers_per_region: u16,
        seed: u64,
        window: (SimTime, SimTime),
    ) -> Self {
        let regions = wan.region_count();
        Network {
            uplink_free: vec![0; regions as usize * servers_per_region as usize],
            rng: ChaCha8Rng::seed_from_u64(seed),
            servers_per_region,
            egress: EgressLedger::with_window(regions, window.0, window.1),
            counters: NetworkCounters::default(),
            wan,
        }
    }

    pub fn wan(&self) -> &WanProfile {
        &self.wan
    }

    pub fn egress(&self) -> &EgressLedger {
        &self.egress
    }

    pub fn counters(&self) -> NetworkCounters {
        self.counters
    }

    pub fn counters_mut(&mut self) -> &mut NetworkCounters {
        &mut self.counters
    }

    /// Bills the message and returns its arrival time, or `None` if lost.
    /// `bytes` is raised to the header size.
    pub fn transmit(
        &mut self,
        now: SimTime,
        src: ServerId,
        dst: ServerId,
        bytes: u64,
    ) -> Option<SimTime> {
        let bytes = bytes.max(HEADER_BYTES);
        self.counters.sent += 1;
        self.counters.sent_bytes += bytes;
        self.egress.record(now, src.region, dst.region, bytes);
        if self.wan.loss_prob > 0.0 && self.rng.gen::<f64>() < self.wan.loss_prob {
            self.counters.dropped += 1;
            return None;
        }
        let depart = match self.wan.bandwidth {
            Some(bw) => {
                let i = src.region.index() * self.servers_per_region as usize + src.slot as usize;
                let ser = (bytes as f64 / bw * NANOS_PER_SEC as f64).ceil() as SimTime;
                let start = self.uplink_free[i].max(now);
                self.uplink_free[i] = start + ser;
                start + ser
            }
            None => now,
        };
        let mean_ms = self.wan.rtt(src.region, dst.region) / 2.0;
        let j = self.wan.jitter_fraction;
        let factor = if j > 0.0 {
            1.0 + self.rng.gen_range(-j..=j)
        } else {
            1.0
        };
        Some(depart + millis((mean_ms * factor).max(0.0)))
    }
}
