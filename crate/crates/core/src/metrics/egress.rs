use serde::{Deserialize, Serialize};

use crate::model::RegionId;
use crate::time::SimTime;

pub const BYTES_PER_GB: f64 = 1e9;

/// Bytes emitted between regions. The network layer writes every send here,
/// including messages later lost, so this is the only byte count in a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgressLedger {
    regions: u16,
    bytes: Vec<u64>,
    window_bytes: Vec<u64>,
    window_start: SimTime,
    window_end: SimTime,
}

impl EgressLedger {
    pub fn new(regions: u16) -> Self {
        Self::with_window(regions, 0, SimTime::MAX)
    }

    /// Sends at `now` in `[start, end)` are also counted in the window matrix.
    pub fn with_window(regions: u16, start: SimTime, end: SimTime) -> Self {
        let n = regions as usize * regions as usize;
        EgressLedger {
            regions,
            bytes: vec![0; n],
            window_bytes: vec![0; n],
            window_start: start,
            window_end: end,
        }
    }

    pub fn regions(&self) -> u16 {
        self.regions
    }

    fn idx(&self, src: RegionId, dst: RegionId) -> usize {
        src.index() * self.regions as usize + dst.index()
    }

    pub fn record(&mut self, now: SimTime, src: RegionId, dst: RegionId, bytes: u64) {
        let i = self.idx(src, dst);
        self.bytes[i] += bytes;
        if now >= self.window_start && now < self.window_end {
            self.window_bytes[i] += bytes;
        }
    }

    pub fn get(&self, src: RegionId, dst: RegionId) -> u64 {
        self.bytes[self.idx(src, dst)]
    }

    /// All bytes, billed or not.
    pub fn total_bytes(&self) -> u64 {
        self.bytes.iter().sum()
    }

    fn billed(&self, m: &[u64]) -> u64 {
        let r = self.regions as usize;
        m.iter()
            .enumerate()
            .filter(|(i, _)| i / r != i % r)
            .map(|(_, b)| b)
            .sum()
    }

    /// Cross-region bytes; traffic inside a region is free.
    pub fn billed_bytes(&self) -> u64 {
        self.billed(&self.bytes)
    }

    pub fn billed_gb(&self) -> f64 {
        self.billed_bytes() as f64 / BYTES_PER_GB
    }

    pub fn window_billed_bytes(&self) -> u64 {
        self.billed(&self.window_bytes)
    }

    pub fn window_billed_gb(&self) -> f64 {
        self.window_billed_bytes() as f64 / BYTES_PER_GB
    }

    /// Row-major `src × dst` byte matrix.
    pub fn matrix(&self) -> Vec<Vec<u64>> {
        self.bytes
            .chunks(self.regions as usize)
            .map(|c| c.to_vec())
            .collect()
    }

    pub fn merge(&mut self, other: &EgressLedger) {
        assert_eq!(self.regions, other.regions, "ledger shapes differ");
        for (a, b) in self.bytes.iter_mut().zip(&other.bytes) {
            *a += b;
        }
        for (a, b) in self.window_bytes.iter_mut().zip(&other.window_bytes) {
            *a += b;
        }
    }
}

/// Billed GB and the per-pair byte matrix.
pub fn egress_totals(ledger: &EgressLedger) -> (f64, Vec<Vec<u64>>) {
    (ledger.billed_gb(), ledger.matrix())
}
