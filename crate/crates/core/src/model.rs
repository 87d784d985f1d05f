//! Regions, partitions, transactions and home placement, plus the
//! access-pattern classifier (SP/MP × LSH/FSH/MH).
//!
//! Classification looks only at *homes*: the region holding the primary
//! copy of each touched partition. Replica sets never influence it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::SimTime;

pub const MAX_REGIONS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegionId(pub u16);

impl RegionId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PartitionId(pub u32);

impl PartitionId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A record key, addressed by its owning partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Key {
    pub partition: PartitionId,
    pub record: u64,
}

impl Key {
    pub fn new(partition: u32, record: u64) -> Self {
        Key {
            partition: PartitionId(partition),
            record,
        }
    }
}

/// A written value. The payload bytes are a pure function of `seed`, so a
/// value is carried around as (seed, length) and expanded on demand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Value {
    pub seed: u64,
    pub len: u32,
}

impl Value {
    pub fn bytes(&self) -> Vec<u8> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = vec![0u8; self.len as usize];
        rng.fill(&mut out[..]);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LogicTag {
    #[serde(rename = "ycsb-rw")]
    YcsbRw,
    NewOrder,
    Payment,
    Delivery,
    OrderStatus,
    StockLevel,
    /// Transactions injected directly by tests or external callers.
    Custom,
}

impl LogicTag {
    pub const TPCC: [LogicTag; 5] = [
        LogicTag::NewOrder,
        LogicTag::Payment,
        LogicTag::Delivery,
        LogicTag::OrderStatus,
        LogicTag::StockLevel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LogicTag::YcsbRw => "ycsb-rw",
            LogicTag::NewOrder => "NewOrder",
            LogicTag::Payment => "Payment",
            LogicTag::Delivery => "Delivery",
            LogicTag::OrderStatus => "OrderStatus",
            LogicTag::StockLevel => "StockLevel",
            LogicTag::Custom => "custom",
        }
    }
}

pub type TxnId = u64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub id: TxnId,
    pub origin: RegionId,
    pub read_set: BTreeSet<Key>,
    pub write_set: BTreeMap<Key, Value>,
    pub logic_tag: LogicTag,
    /// Simulated nanoseconds.
    pub submit_time: SimTime,
}

impl Transaction {
    pub fn new(id: TxnId, origin: RegionId, logic_tag: LogicTag) -> Self {
        Transaction {
            id,
            origin,
            read_set: BTreeSet::new(),
            write_set: BTreeMap::new(),
            logic_tag,
            submit_time: 0,
        }
    }

    pub fn is_read_only(&self) -> bool {
        self.write_set.is_empty()
    }

    /// Distinct partitions touched by reads or writes, ascending.
    pub fn partitions(&self) -> BTreeSet<PartitionId> {
        self.read_set
            .iter()
            .chain(self.write_set.keys())
            .map(|k| k.partition)
            .collect()
    }

    /// Every key touched, reads and writes merged.
    pub fn keys(&self) -> BTreeSet<Key> {
        self.read_set
            .iter()
            .copied()
            .chain(self.write_set.keys().copied())
            .collect()
    }

    pub fn op_count(&self) -> u64 {
        (self.read_set.len() + self.write_set.len()) as u64
    }

    pub fn write_bytes(&self) -> u64 {
        self.write_set.values().map(|v| v.len as u64).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PartitionSpan {
    SP,
    MP,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum HomeSpan {
    LSH,
    FSH,
    MH,
}

impl HomeSpan {
    pub const ALL: [HomeSpan; 3] = [HomeSpan::LSH, HomeSpan::FSH, HomeSpan::MH];

    pub fn name(self) -> &'static str {
        match self {
            HomeSpan::LSH => "lsh",
            HomeSpan::FSH => "fsh",
            HomeSpan::MH => "mh",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TxnClass {
    pub partition_span: PartitionSpan,
    pub home_span: HomeSpan,
}

impl fmt::Display for TxnClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}-{:?}", self.partition_span, self.home_span)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplicationScope {
    Full,
    Partial(usize),
}

/// Partition → home region and partition → replica regions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlacementMap {
    regions: u16,
    homes: Vec<RegionId>,
    replicas: Vec<Vec<RegionId>>,
    scope: ReplicationScope,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlacementJson {
    partitions: u32,
    homes: Vec<u16>,
    replicas: Vec<Vec<u16>>,
}

impl PlacementMap {
    /// Builds a placement from explicit homes, deriving replica sets from
    /// `scope` round-robin over the non-home regions.
    pub fn from_homes(regions: u16, homes: Vec<RegionId>, scope: ReplicationScope) -> Result<Self> {
        check_region_count(regions)?;
        if let Some(bad) = homes.iter().find(|h| h.0 >= regions) {
            return Err(Error::config(format!(
                "home {bad} outside {regions} regions"
            )));
        }
        let k = match scope {
            ReplicationScope::Full => regions as usize - 1,
            ReplicationScope::Partial(k) => {
                if k >= regions as usize {
                    return Err(Error::config(format!(
                        "partial replication k={k} needs more than {regions} regions"
                    )));
                }
                k
            }
        };
        let replicas = homes
            .iter()
            .enumerate()
            .map(|(p, &h)| replica_regions(p, h, regions, k, scope))
            .collect();
        Ok(PlacementMap {
            regions,
            homes,
            replicas,
            scope,
        })
    }

    /// Warehouse-style placement: partition `p` is homed at `p mod regions`.
    pub fn balanced(partitions: u32, regions: u16, scope: ReplicationScope) -> Result<Self> {
        let homes = (0..partitions)
            .map(|p| RegionId((p % regions as u32) as u16))
            .collect();
        Self::from_homes(regions, homes, scope)
    }

    pub fn regions(&self) -> u16 {
        self.regions
    }

    pub fn partitions(&self) -> u32 {
        self.homes.len() as u32
    }

    pub fn scope(&self) -> ReplicationScope {
        self.scope
    }

    pub fn home(&self, p: PartitionId) -> Result<RegionId> {
        self.homes
            .get(p.index())
            .copied()
            .ok_or(Error::UnknownPartition(p.0))
    }

    pub fn homes(&self) -> &[RegionId] {
        &self.homes
    }

    pub fn replicas(&self, p: PartitionId) -> Result<&[RegionId]> {
        self.replicas
            .get(p.index())
            .map(Vec::as_slice)
            .ok_or(Error::UnknownPartition(p.0))
    }

    /// Overrides one partition's replica set, keeping its home.
    pub fn set_replicas(&mut self, p: PartitionId, replicas: Vec<RegionId>) -> Result<()> {
        let home = self.home(p)?;
        let distinct: BTreeSet<_> = replicas.iter().collect();
        if distinct.len() != replicas.len()
            || replicas.contains(&home)
            || replicas.iter().any(|r| r.0 >= self.regions)
        {
            return Err(Error::config(format!(
                "invalid replica set for partition {}",
                p.0
            )));
        }
        self.replicas[p.index()] = replicas;
        self.scope =
            ReplicationScope::Partial(self.replicas.iter().map(Vec::len).max().unwrap_or(0));
        Ok(())
    }

    /// Partitions homed in `region`, ascending.
    pub fn partitions_homed_at(&self, region: RegionId) -> Vec<PartitionId> {
        self.homes
            .iter()
            .enumerate()
            .filter(|(_, &h)| h == region)
            .map(|(p, _)| PartitionId(p as u32))
            .collect()
    }

    /// Partitions indexed by home region.
    pub fn partitions_by_home(&self) -> Vec<Vec<PartitionId>> {
        let mut out = vec![Vec::new(); self.regions as usize];
        for (p, h) in self.homes.iter().enumerate() {
            out[h.index()].push(PartitionId(p as u32));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let doc = PlacementJson {
            partitions: self.partitions(),
            homes: self.homes.iter().map(|h| h.0).collect(),
            replicas: self
                .replicas
                .iter()
                .map(|rs| rs.iter().map(|r| r.0).collect())
                .collect(),
        };
        serde_json::to_string(&doc).expect("placement serializes")
    }

    pub fn from_json(regions: u16, json: &str) -> Result<Self> {
        let doc: PlacementJson = serde_json::from_str(json)
            .map_err(|e| Error::config(format!("placement JSON: {e}")))?;
        check_region_count(regions)?;
        if doc.homes.len() != doc.partitions as usize
            || doc.replicas.len() != doc.partitions as usize
        {
            return Err(Error::config(
                "placement JSON: homes/replicas length mismatch",
            ));
        }
        let homes: Vec<RegionId> = doc.homes.into_iter().map(RegionId).collect();
        let k = doc.replicas.iter().map(Vec::len).max().unwrap_or(0);
        let full = doc.replicas.iter().all(|r| r.len() + 1 == regions as usize);
        let scope = if full && regions > 1 {
            ReplicationScope::Full
        } else {
            ReplicationScope::Partial(k)
        };
        let mut map = Self::from_homes(regions, homes, ReplicationScope::Partial(0))?;
        for (p, rs) in doc.replicas.into_iter().enumerate() {
            map.set_replicas(
                PartitionId(p as u32),
                rs.into_iter().map(RegionId).collect(),
            )?;
        }
        map.scope = scope;
        Ok(map)
    }
}

fn check_region_count(regions: u16) -> Result<()> {
    if regions == 0 || regions as usize > MAX_REGIONS {
        return Err(Error::config(format!(
            "region count {regions} outside 1..={MAX_REGIONS}"
        )));
    }
    Ok(())
}

fn replica_regions(
    p: usize,
    home: RegionId,
    regions: u16,
    k: usize,
    scope: ReplicationScope,
) -> Vec<RegionId> {
    let r = regions as usize;
    match scope {
        ReplicationScope::Full => (0..r)
            .filter(|&x| x != home.index())
            .map(|x| RegionId(x as u16))
            .collect(),
        ReplicationScope::Partial(_) => (0..k)
            .map(|j| {
                let offset = 1 + (p + j) % (r - 1);
                RegionId(((home.index() + offset) % r) as u16)
            })
            .collect(),
    }
}

/// Assigns partition homes.
///
/// Without `weights` every home is an independent uniform draw. With an
/// explicit weight vector each region receives its largest-remainder quota
/// of partitions and the quota list is shuffled, so shares are exact and
/// zero-weight regions receive nothing.
pub fn assign_homes(
    partition_count: u32,
    regions: u16,
    weights: Option<&[f64]>,
    scope: ReplicationScope,
    seed: u64,
) -> Result<PlacementMap> {
    check_region_count(regions)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let homes = match weights {
        None => {
            if partition_count < regions as u32 {
                return Err(Error::config(format!(
                    "{partition_count} partitions cannot cover {regions} regions"
                )));
            }
            (0..partition_count)
                .map(|_| RegionId(rng.gen_range(0..regions)))
                .collect()
        }
        Some(w) => {
            validate_weights(w, regions)?;
            let mut homes = quota_homes(partition_count, w);
            homes.shuffle(&mut rng);
            homes
        }
    };
    PlacementMap::from_homes(regions, homes, scope)
}

pub fn validate_weights(w: &[f64], regions: u16) -> Result<()> {
    if w.len() != regions as usize {
        return Err(Error::config(format!(
            "weight vector has {} entries for {regions} regions",
            w.len()
        )));
    }
    if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::config("weights must be finite and non-negative"));
    }
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!("weights sum to {sum}, expected 1")));
    }
    Ok(())
}

/// Splits `n` items across regions by largest-remainder quotas of `w`.
/// The result is grouped by region in ascending order.
pub fn quota_assign(n: u32, w: &[f64]) -> Vec<RegionId> {
    quota_homes(n, w)
}

fn quota_homes(n: u32, w: &[f64]) -> Vec<RegionId> {
    let exact: Vec<f64> = w.iter().map(|x| x * n as f64).collect();
    let mut counts: Vec<u32> = exact.iter().map(|x| x.floor() as u32).collect();
    let mut left = n - counts.iter().sum::<u32>();
    let mut order: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
        .iter()
        .enumerate()
        .flat_map(|(r, &c)| std::iter::repeat_n(RegionId(r as u16), c as usize))
        .collect()
}

/// The set of home regions of every partition the transaction touches.
pub fn region_set(txn: &Transaction, placement: &PlacementMap) -> Result<BTreeSet<RegionId>> {
    if txn.read_set.is_empty() && txn.write_set.is_empty() {
        return Err(Error::EmptyTransaction(txn.id));
    }
    txn.partitions()
        .into_iter()
        .map(|p| placement.home(p))
        .collect()
}

pub fn classify(txn: &Transaction, placement: &PlacementMap) -> Result<TxnClass> {
    let regions = region_set(txn, placement)?;
    let partition_span = if txn.partitions().len() == 1 {
        PartitionSpan::SP
    } else {
        PartitionSpan::MP
    };
    let home_span = home_span_of(&regions, txn.origin);
    Ok(TxnClass {
        partition_span,
        home_span,
    })
}

pub fn home_span_of(regions: &BTreeSet<RegionId>, origin: RegionId) -> HomeSpan {
    match regions.len() {
        1 if regions.contains(&origin) => HomeSpan::LSH,
        1 => HomeSpan::FSH,
        _ => HomeSpan::MH,
    }
}

/// Endpoint of a database server: a region plus a slot within it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ServerId {
    pub region: RegionId,
    pub slot: u16,
}

impl ServerId {
    pub fn new(region: u16, slot: u16) -> Self {
        ServerId {
            region: RegionId(region),
            slot,
        }
    }
}

impl fmt::Display for ServerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.region.0, self.slot)
    }
}

/// Regions, servers per region, and which server hosts each partition copy.
///
/// A partition's copy in region `r` always lives on slot `p mod servers_per_region`,
/// so the home server is in the home region by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    labels: Vec<String>,
    servers_per_region: u16,
    partitions: u32,
}

impl Topology {
    pub fn new(labels: Vec<String>, servers_per_region: u16, partitions: u32) -> Result<Self> {
        check_region_count(labels.len() as u16)?;
        if servers_per_region == 0 {
            return Err(Error::config("servers_per_region must be positive"));
        }
        let distinct: BTreeSet<&String> = labels.iter().collect();
        if distinct.len() != labels.len() {
            return Err(Error::config("region labels must be unique"));
        }
        Ok(Topology {
            labels,
            servers_per_region,
            partitions,
        })
    }

    pub fn regions(&self) -> u16 {
        self.labels.len() as u16
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn servers_per_region(&self) -> u16 {
        self.servers_per_region
    }

    pub fn partitions(&self) -> u32 {
        self.partitions
    }

    pub fn server_count(&self) -> usize {
        self.labels.len() * self.servers_per_region as usize
    }

    pub fn contains(&self, s: ServerId) -> bool {
        s.region.0 < self.regions() && s.slot < self.servers_per_region
    }

    /// Dense index for per-server arrays.
    pub fn flat(&self, s: ServerId) -> usize {
        s.region.index() * self.servers_per_region as usize + s.slot as usize
    }

    pub fn server_at(&self, flat: usize) -> ServerId {
        let spr = self.servers_per_region as usize;
        ServerId::new((flat / spr) as u16, (flat % spr) as u16)
    }

    pub fn servers(&self) -> impl Iterator<Item = ServerId> + '_ {
        (0..self.server_count()).map(|i| self.server_at(i))
    }

    pub fn servers_in(&self, region: RegionId) -> impl Iterator<Item = ServerId> {
        (0..self.servers_per_region).map(move |slot| ServerId { region, slot })
    }

    pub fn slot_of(&self, p: PartitionId) -> u16 {
        (p.0 % self.servers_per_region as u32) as u16
    }

    /// Server holding partition `p`'s copy in `region`.
    pub fn server_for(&self, p: PartitionId, region: RegionId) -> ServerId {
        ServerId {
            region,
            slot: self.slot_of(p),
        }
    }

    pub fn home_server(&self, p: PartitionId, placement: &PlacementMap) -> Result<ServerId> {
        Ok(self.server_for(p, placement.home(p)?))
    }
}
