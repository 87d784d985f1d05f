//! Simulated time, in nanoseconds.

pub type SimTime = u64;

pub const NANOS_PER_MICRO: u64 = 1_000;
pub const NANOS_PER_MILLI: u64 = 1_000_000;
pub const NANOS_PER_SEC: u64 = 1_000_000_000;

pub fn millis(ms: f64) -> SimTime {
    (ms * NANOS_PER_MILLI as f64).round() as SimTime
}

pub fn secs(s: f64) -> SimTime {
    (s * NANOS_PER_SEC as f64).round() as SimTime
}

pub fn to_millis(t: SimTime) -> f64 {
    t as f64 / NANOS_PER_MILLI as f64
}

pub fn to_secs(t: SimTime) -> f64 {
    t as f64 / NANOS_PER_SEC as f64
}
