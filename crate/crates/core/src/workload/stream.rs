use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tpcc::{TpccConfig, TpccGenerator};
use super::ycsb::{YcsbConfig, YcsbGenerator};
use crate::error::{Error, Result};
use crate::model::{validate_weights, PlacementMap, RegionId, Transaction, TxnClass};
use crate::seed::{derive, streams};
use crate::time::{SimTime, NANOS_PER_SEC};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WorkloadConfig {
    Ycsb(YcsbConfig),
    Tpcc(TpccConfig),
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig::Ycsb(YcsbConfig::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Fixed,
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Arrival {
    /// Aggregate rate in transactions per second.
    Open {
        rate: f64,
        #[serde(default)]
        spacing: Spacing,
    },
    /// Asynchronous clients, each submitting at a fixed rate without
    /// waiting for responses.
    Closed { clients: u32, per_client_rate: f64 },
}

impl Arrival {
    pub fn total_rate(&self) -> f64 {
        match self {
            Arrival::Open { rate, .. } => *rate,
            Arrival::Closed {
                clients,
                per_client_rate,
            } => *clients as f64 * per_client_rate,
        }
    }

    fn validate(&self) -> Result<()> {
        let rate = self.total_rate();
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::config(format!(
                "arrival rate {rate} must be positive"
            )));
        }
        Ok(())
    }
}

enum Generator {
    Ycsb(YcsbGenerator),
    Tpcc(TpccGenerator),
}

impl Generator {
    /// The class (or transaction type) comes from `mix_rng` so that the mix
    /// sequence does not depend on how many draws the keys consumed.
    fn generate(
        &self,
        id: u64,
        origin: RegionId,
        mix_rng: &mut ChaCha8Rng,
        rng: &mut ChaCha8Rng,
    ) -> Result<Transaction> {
        match self {
            Generator::Ycsb(g) => g.generate_class(id, origin, g.draw_class(mix_rng), rng),
            Generator::Tpcc(g) => g.generate_tagged(id, origin, g.draw_tag(mix_rng), rng),
        }
    }

    fn check_origin(&self, origin: RegionId) -> Result<()> {
        match self {
            Generator::Ycsb(g) => g.check_origin(origin),
            Generator::Tpcc(g) => g.check_origin(origin),
        }
    }
}

/// A lazily generated, timestamped transaction sequence. Identical
/// (config, placement, arrival, seed) always yields the identical stream.
pub struct WorkloadStream {
    generator: Generator,
    arrival: Arrival,
    duration: SimTime,
    origin_weights: Vec<f64>,
    client_origins: Vec<RegionId>,
    workload_rng: ChaCha8Rng,
    mix_rng: ChaCha8Rng,
    arrival_rng: ChaCha8Rng,
    next_id: u64,
    next_time: f64,
    seed: u64,
}

impl WorkloadStream {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn arrival(&self) -> &Arrival {
        &self.arrival
    }

    fn draw_origin(&mut self, id: u64) -> RegionId {
        match &self.arrival {
            Arrival::Closed { clients, .. } => self.client_origins[(id % *clients as u64) as usize],
            Arrival::Open { .. } => {
                let u: f64 = self.arrival_rng.gen();
                pick_weighted(&self.origin_weights, u)
            }
        }
    }
}

fn pick_weighted(w: &[f64], u: f64) -> RegionId {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, x) in w.iter().enumerate() {
        if *x > 0.0 {
            acc += x;
            last = i;
            if u < acc {
                return RegionId(i as u16);
            }
        }
    }
    RegionId(last as u16)
}

impl Iterator for WorkloadStream {
    type Item = Transaction;

    fn next(&mut self) -> Option<Transaction> {
        let t = self.next_time.floor() as SimTime;
        if t >= self.duration {
            return None;
        }
        let id = self.next_id;
        let origin = self.draw_origin(id);
        let mut txn = self
            .generator
            .generate(id, origin, &mut self.mix_rng, &mut self.workload_rng)
            .expect("origins are validated when the stream is built");
        txn.submit_time = t;
        self.next_id += 1;
        let gap = NANOS_PER_SEC as f64 / self.arrival.total_rate();
        self.next_time = match self.arrival {
            Arrival::Open {
                spacing: Spacing::Exponential,
                ..
            } => {
                let u: f64 = self.arrival_rng.gen();
                self.next_time - gap * (1.0 - u).ln()
            }
            _ => self.next_id as f64 * gap,
        };
        Some(txn)
    }
}

/// Builds a stream over `[0, duration)`. `origin_weights` defaults to uniform.
pub fn build_stream(
    workload: &WorkloadConfig,
    placement: &PlacementMap,
    arrival: &Arrival,
    origin_weights: Option<&[f64]>,
    duration: SimTime,
    seed: u64,
) -> Result<WorkloadStream> {
    if duration == 0 {
        return Err(Error::config("stream duration must be positive"));
    }
    arrival.validate()?;
    let regions = placement.regions();
    let weights = match origin_weights {
        Some(w) => {
            validate_weights(w, regions)?;
            w.to_vec()
        }
        None => vec![1.0 / regions as f64; regions as usize],
    };
    let generator = match workload {
        WorkloadConfig::Ycsb(c) => Generator::Ycsb(YcsbGenerator::new(c, placement)?),
        WorkloadConfig::Tpcc(c) => Generator::Tpcc(TpccGenerator::new(c, placement)?),
    };
    for (r, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            generator.check_origin(RegionId(r as u16))?;
        }
    }
    let client_origins = match arrival {
        Arrival::Closed { clients, .. } => {
            if *clients == 0 {
                return Err(Error::config("closed arrivals need at least one client"));
            }
            crate::model::quota_assign(*clients, &weights)
        }
        Arrival::Open { .. } => Vec::new(),
    };
    let mut arrival_rng = ChaCha8Rng::seed_from_u64(derive(seed, &[streams::ARRIVALS]));
    let first = match arrival {
        Arrival::Open {
            spacing: Spacing::Exponential,
            rate,
        } => -(NANOS_PER_SEC as f64 / rate) * (1.0 - arrival_rng.gen::<f64>()).ln(),
        _ => 0.0,
    };
    Ok(WorkloadStream {
        generator,
        arrival: arrival.clone(),
        duration,
        origin_weights: weights,
        client_origins,
        workload_rng: ChaCha8Rng::seed_from_u64(derive(seed, &[streams::WORKLOAD])),
        mix_rng: ChaCha8Rng::seed_from_u64(derive(seed, &[streams::MIX])),
        arrival_rng,
        next_id: 0,
        next_time: first,
        seed,
    })
}

/// One line of the newline-delimited stream dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamRecord {
    pub id: u64,
    pub origin: u16,
    pub class: TxnClass,
    pub logic_tag: crate::model::LogicTag,
    /// `[partition, record]` pairs.
    pub read_set: Vec<(u32, u64)>,
    /// `[partition, record, value seed, value length]` tuples.
    pub write_set: Vec<(u32, u64, u64, u32)>,
    pub submit_time_ns: u64,
}

impl StreamRecord {
    pub fn from_txn(txn: &Transaction, class: TxnClass) -> Self {
        StreamRecord {
            id: txn.id,
            origin: txn.origin.0,
            class,
            logic_tag: txn.logic_tag,
            read_set: txn
                .read_set
                .iter()
                .map(|k| (k.partition.0, k.record))
                .collect(),
            write_set: txn
                .write_set
                .iter()
                .map(|(k, v)| (k.partition.0, k.record, v.seed, v.len))
                .collect(),
            submit_time_ns: txn.submit_time,
        }
    }

    pub fn to_txn(&self) -> Transaction {
        use crate::model::{Key, Value};
        let mut t = Transaction::new(self.id, RegionId(self.origin), self.logic_tag);
        t.submit_time = self.submit_time_ns;
        t.read_set = self.read_set.iter().map(|&(p, r)| Key::new(p, r)).collect();
        t.write_set = self
            .write_set
            .iter()
            .map(|&(p, r, seed, len)| (Key::new(p, r), Value { seed, len }))
            .collect();
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{assign_homes, ReplicationScope};
    use crate::time::secs;

    fn pm() -> PlacementMap {
        assign_homes(64, 4, None, ReplicationScope::Partial(0), 1).unwrap()
    }

    #[test]
    fn closed_schedule_is_exact() {
        let arrival = Arrival::Closed {
            clients: 4,
            per_client_rate: 2.0,
        };
        let s = build_stream(
            &WorkloadConfig::default(),
            &pm(),
            &arrival,
            None,
            secs(10.0),
            3,
        )
        .unwrap();
        let txns: Vec<_> = s.collect();
        assert_eq!(txns.len(), 80);
        assert!(txns
            .windows(2)
            .all(|w| w[0].submit_time <= w[1].submit_time));
        // every region hosts exactly one client
        for r in 0..4 {
            assert_eq!(txns.iter().filter(|t| t.origin == RegionId(r)).count(), 20);
        }
    }

    #[test]
    fn open_exponential_count_is_poisson() {
        let arrival = Arrival::Open {
            rate: 1000.0,
            spacing: Spacing::Exponential,
        };
        let n = build_stream(
            &WorkloadConfig::default(),
            &pm(),
            &arrival,
            None,
            secs(10.0),
            4,
        )
        .unwrap()
        .count();
        assert!((n as i64 - 10_000).abs() <= 300, "{n}");
    }

    #[test]
    fn open_fixed_count_is_exact() {
        let arrival = Arrival::Open {
            rate: 1000.0,
            spacing: Spacing::Fixed,
        };
        let n = build_stream(
            &WorkloadConfig::default(),
            &pm(),
            &arrival,
            None,
            secs(10.0),
            4,
        )
        .unwrap()
        .count();
        assert_eq!(n, 10_000);
    }

    #[test]
    fn non_positive_rate_rejected() {
        let arrival = Arrival::Open {
            rate: 0.0,
            spacing: Spacing::Fixed,
        };
        assert!(build_stream(
            &WorkloadConfig::default(),
            &pm(),
            &arrival,
            None,
            secs(1.0),
            1
        )
        .is_err());
        let closed = Arrival::Closed {
            clients: 2,
            per_client_rate: -1.0,
        };
        assert!(build_stream(
            &WorkloadConfig::default(),
            &pm(),
            &closed,
            None,
            secs(1.0),
            1
        )
        .is_err());
    }

    #[test]
    fn zero_weight_regions_submit_nothing() {
        let arrival = Arrival::Open {
            rate: 500.0,
            spacing: Spacing::Fixed,
        };
        let w = [0.5, 0.0, 0.5, 0.0];
        let placement = assign_homes(64, 4, Some(&w), ReplicationScope::Partial(0), 2).unwrap();
        let cfg = WorkloadConfig::Ycsb(YcsbConfig::default());
        let mut s = build_stream(&cfg, &placement, &arrival, Some(&w), secs(2.0), 1).unwrap();
        assert!(s.all(|t| t.origin.0 == 0 || t.origin.0 == 2));
    }
}
