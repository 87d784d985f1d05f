use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::SimTime;

/// Lower edge of the tracked range, in ns (1 µs).
pub const MIN_NS: f64 = 1_000.0;
/// Upper edge of the tracked range, in ns (1000 s).
pub const MAX_NS: f64 = 1e12;
/// Ratio between consecutive bucket upper bounds.
pub const GROWTH: f64 = 1.01;

fn bounds() -> &'static [f64] {
    static B: OnceLock<Vec<f64>> = OnceLock::new();
    B.get_or_init(|| {
        let mut v = vec![MIN_NS];
        while *v.last().unwrap() < MAX_NS {
            let next = v.last().unwrap() * GROWTH;
            v.push(next);
        }
        v
    })
}

/// Number of buckets; values above the last bound land in the last bucket.
pub fn bucket_count() -> usize {
    bounds().len()
}

/// Index of the first bucket whose upper bound is at least `ns`.
pub fn bucket_of(ns: SimTime) -> u32 {
    let b = bounds();
    let v = ns as f64;
    b.partition_point(|&ub| ub < v).min(b.len() - 1) as u32
}

/// Upper bound of bucket `i` in ns.
pub fn bucket_upper(i: u32) -> f64 {
    bounds()[i as usize]
}

/// Log-bucketed latency histogram with bounded relative error.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencyHistogram {
    counts: BTreeMap<u32, u64>,
    total: u64,
    sum_ns: u128,
    max_ns: SimTime,
}

impl LatencyHistogram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, ns: SimTime) {
        *self.counts.entry(bucket_of(ns)).or_insert(0) += 1;
        self.total += 1;
        self.sum_ns += ns as u128;
        self.max_ns = self.max_ns.max(ns);
    }

    pub fn count(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn mean_ns(&self) -> Option<f64> {
        (self.total > 0).then(|| self.sum_ns as f64 / self.total as f64)
    }

    pub fn max_ns(&self) -> SimTime {
        self.max_ns
    }

    /// Nearest-rank percentile, reported as the upper bound of the bucket
    /// holding the rank. `None` for an empty histogram.
    pub fn percentile(&self, q: f64) -> Result<Option<f64>> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::config(format!("percentile {q} outside (0, 1)")));
        }
        if self.total == 0 {
            return Ok(None);
        }
        let rank = ((q * self.total as f64).ceil() as u64).clamp(1, self.total);
        let mut seen = 0;
        for (&i, &c) in &self.counts {
            seen += c;
            if seen >= rank {
                return Ok(Some(bucket_upper(i)));
            }
        }
        unreachable!("rank never exceeds total")
    }

    /// Percentile in milliseconds; `None` when empty or `q` is invalid.
    pub fn percentile_ms(&self, q: f64) -> Option<f64> {
        self.percentile(q).ok().flatten().map(|ns| ns / 1e6)
    }

    pub fn merge(&mut self, other: &LatencyHistogram) {
        for (&i, &c) in &other.counts {
            *self.counts.entry(i).or_insert(0) += c;
        }
        self.total += other.total;
        self.sum_ns += other.sum_ns;
        self.max_ns = self.max_ns.max(other.max_ns);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::millis;

    #[test]
    fn single_sample_every_quantile() {
        let mut h = LatencyHistogram::new();
        h.record(millis(42.0));
        for q in [0.01, 0.5, 0.99] {
            let v = h.percentile(q).unwrap().unwrap();
            assert!((42e6..=42e6 * 1.01).contains(&v), "{v}");
        }
    }

    #[test]
    fn one_to_hundred_ms() {
        let mut h = LatencyHistogram::new();
        for ms in 1..=100 {
            h.record(millis(ms as f64));
        }
        let p50 = h.percentile_ms(0.5).unwrap();
        let p99 = h.percentile_ms(0.99).unwrap();
        assert!((p50 - 50.0).abs() <= 0.5, "{p50}");
        assert!((p99 - 100.0).abs() <= 1.0, "{p99}");
    }

    #[test]
    fn empty_and_bad_quantile() {
        let h = LatencyHistogram::new();
        assert_eq!(h.percentile(0.5).unwrap(), None);
        assert!(h.percentile(0.0).is_err());
        assert!(h.percentile(1.0).is_err());
    }

    #[test]
    fn bucket_width_is_bounded() {
        let n = bucket_count();
        for i in 1..n as u32 {
            let r = bucket_upper(i) / bucket_upper(i - 1);
            assert!(r <= 1.0100001);
        }
        assert!(bucket_upper(n as u32 - 1) >= MAX_NS);
        assert_eq!(bucket_of(0), 0);
        assert_eq!(bucket_of(u64::MAX), n as u32 - 1);
    }

    #[test]
    fn merge_adds_counts() {
        let mut a = LatencyHistogram::new();
        let mut b = LatencyHistogram::new();
        a.record(1_000_000);
        b.record(2_000_000);
        b.record(3_000_000);
        a.merge(&b);
        assert_eq!(a.count(), 3);
        assert_eq!(a.max_ns(), 3_000_000);
    }

    #[test]
    fn serde_round_trip() {
        let mut h = LatencyHistogram::new();
        h.record(5_000);
        h.record(7_000_000);
        let back: LatencyHistogram =
            serde_json::from_str(&serde_json::to_string(&h).unwrap()).unwrap();
        assert_eq!(back, h);
    }
}
