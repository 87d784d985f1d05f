//! TPC-C reduced to key-set generation. Warehouse id doubles as partition
//! id; records are keyed by (table, warehouse, record id).

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Key, LogicTag, PartitionId, PlacementMap, RegionId, Transaction, TxnId, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[repr(u8)]
pub enum Table {
    Warehouse = 0,
    District = 1,
    Customer = 2,
    Item = 3,
    Stock = 4,
    Orders = 5,
    OrderLine = 6,
    NewOrder = 7,
    History = 8,
}

impl Table {
    /// Approximate row sizes of the standard schema, in bytes.
    pub fn row_bytes(self) -> u32 {
        match self {
            Table::Warehouse => 89,
            Table::District => 95,
            Table::Customer => 655,
            Table::Item => 82,
            Table::Stock => 306,
            Table::Orders => 24,
            Table::OrderLine => 54,
            Table::NewOrder => 8,
            Table::History => 46,
        }
    }

    pub fn key(self, warehouse: u32, id: u64) -> Key {
        Key::new(warehouse, ((self as u64) << 56) | (id & ((1 << 56) - 1)))
    }

    pub fn of(key: &Key) -> u8 {
        (key.record >> 56) as u8
    }
}

pub const DISTRICTS: u64 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TpccConfig {
    pub warehouses: u32,
    /// Per-item (NewOrder) and per-payment probability of a remote warehouse.
    pub remote_prob: f64,
    /// Weights over NewOrder, Payment, Delivery, OrderStatus, StockLevel.
    pub txn_mix: [f64; 5],
    pub items_per_order: usize,
    pub item_pool: u64,
    pub customer_pool: u64,
    /// Overrides `remote_prob` for Payment.
    pub payment_remote_prob: Option<f64>,
    /// When set, a NewOrder sources every item from one remote warehouse
    /// with this probability and is fully local otherwise.
    pub new_order_remote_prob: Option<f64>,
}

impl Default for TpccConfig {
    fn default() -> Self {
        TpccConfig {
            warehouses: 1200,
            remote_prob: 0.01,
            txn_mix: [0.44, 0.44, 0.04, 0.04, 0.04],
            items_per_order: 10,
            item_pool: 100_000,
            customer_pool: 3_000,
            payment_remote_prob: None,
            new_order_remote_prob: None,
        }
    }
}

/// Structural ceiling of the FSH+MH share: Delivery, OrderStatus and
/// StockLevel are always local.
pub const MAX_GEO_PCT: f64 = 0.88;

impl TpccConfig {
    pub fn validate(&self, regions: u16) -> Result<()> {
        let probs = [
            Some(self.remote_prob),
            self.payment_remote_prob,
            self.new_order_remote_prob,
        ];
        if probs.iter().flatten().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::config(
                "tpcc remote probabilities must lie in [0, 1]",
            ));
        }
        if self.txn_mix.iter().any(|w| *w < 0.0) {
            return Err(Error::config("tpcc mix weights must be non-negative"));
        }
        let sum: f64 = self.txn_mix.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("tpcc mix sums to {sum}, expected 1")));
        }
        if self.warehouses == 0 || self.items_per_order == 0 {
            return Err(Error::config("tpcc needs warehouses and items per order"));
        }
        if self.item_pool == 0 || self.customer_pool == 0 {
            return Err(Error::config("tpcc pool size must be at least 1"));
        }
        let any_remote = probs.iter().flatten().any(|p| *p > 0.0);
        if any_remote && regions < 2 {
            return Err(Error::config(
                "remote warehouse access needs at least 2 regions",
            ));
        }
        Ok(())
    }

    /// Reconfigures the remote knobs so that FSH and MH each make up
    /// `geo_pct / 2` of the stream: remote Payments drive FSH and fully
    /// remote NewOrders drive MH.
    pub fn sweep_geo_pct(&self, geo_pct: f64) -> Result<Self> {
        if !(0.0..=MAX_GEO_PCT + 1e-12).contains(&geo_pct) {
            return Err(Error::config(format!(
                "geo-distribution {geo_pct} outside [0, {MAX_GEO_PCT}]"
            )));
        }
        let half = geo_pct / 2.0;
        let [new_order, payment, ..] = self.txn_mix;
        let q_no = if half == 0.0 { 0.0 } else { half / new_order };
        let q_pay = if half == 0.0 { 0.0 } else { half / payment };
        if q_no > 1.0 + 1e-9 || q_pay > 1.0 + 1e-9 {
            return Err(Error::config(format!(
                "geo-distribution {geo_pct} unreachable with mix {:?}",
                self.txn_mix
            )));
        }
        Ok(TpccConfig {
            remote_prob: 0.0,
            payment_remote_prob: Some(q_pay.min(1.0)),
            new_order_remote_prob: Some(q_no.min(1.0)),
            ..self.clone()
        })
    }
}

/// Free-function form of [`TpccConfig::sweep_geo_pct`].
pub fn sweep_geo_pct(cfg: &TpccConfig, geo_pct: f64) -> Result<TpccConfig> {
    cfg.sweep_geo_pct(geo_pct)
}

#[derive(Debug, Clone)]
pub struct TpccGenerator {
    cfg: TpccConfig,
    by_home: Vec<Vec<PartitionId>>,
    /// Warehouses homed outside each region.
    foreign: Vec<Vec<PartitionId>>,
}

impl TpccGenerator {
    pub fn new(cfg: &TpccConfig, placement: &PlacementMap) -> Result<Self> {
        cfg.validate(placement.regions())?;
        if placement.partitions() != cfg.warehouses {
            return Err(Error::config(format!(
                "placement has {} partitions for {} warehouses",
                placement.partitions(),
                cfg.warehouses
            )));
        }
        let by_home = placement.partitions_by_home();
        let foreign = (0..placement.regions())
            .map(|r| {
                placement
                    .homes()
                    .iter()
                    .enumerate()
                    .filter(|(_, h)| h.0 != r)
                    .map(|(p, _)| PartitionId(p as u32))
                    .collect()
            })
            .collect();
        Ok(TpccGenerator {
            cfg: cfg.clone(),
            by_home,
            foreign,
        })
    }

    pub fn config(&self) -> &TpccConfig {
        &self.cfg
    }

    pub fn check_origin(&self, origin: RegionId) -> Result<()> {
        if self.by_home[origin.index()].is_empty() {
            return Err(Error::Generation {
                class: "LSH".into(),
                reason: format!("origin {origin} homes no warehouse"),
            });
        }
        let remote = self.cfg.remote_prob > 0.0
            || self.cfg.payment_remote_prob.unwrap_or(0.0) > 0.0
            || self.cfg.new_order_remote_prob.unwrap_or(0.0) > 0.0;
        if remote && self.foreign[origin.index()].is_empty() {
            return Err(Error::config(format!(
                "no warehouse outside region {origin}"
            )));
        }
        Ok(())
    }

    pub fn draw_tag<R: Rng + ?Sized>(&self, rng: &mut R) -> LogicTag {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (tag, w) in LogicTag::TPCC.iter().zip(self.cfg.txn_mix) {
            acc += w;
            if u < acc {
                return *tag;
            }
        }
        *LogicTag::TPCC
            .iter()
            .zip(self.cfg.txn_mix)
            .rev()
            .find(|(_, w)| *w > 0.0)
            .map(|(t, _)| t)
            .expect("mix has positive weight")
    }

    pub fn generate<R: Rng + ?Sized>(
        &self,
        id: TxnId,
        origin: RegionId,
        rng: &mut R,
    ) -> Result<Transaction> {
        let tag = self.draw_tag(rng);
        self.generate_tagged(id, origin, tag, rng)
    }

    /// Generates one transaction of the given type.
    pub fn generate_tagged<R: Rng + ?Sized>(
        &self,
        id: TxnId,
        origin: RegionId,
        tag: LogicTag,
        rng: &mut R,
    ) -> Result<Transaction> {
        self.check_origin(origin)?;
        let home = self.by_home[origin.index()].choose(rng).expect("checked").0;
        let mut b = Builder {
            txn: Transaction::new(id, origin, tag),
            rng,
        };
        let district = b.rng.gen_range(0..DISTRICTS);
        let customer = b.rng.gen_range(0..self.cfg.customer_pool);
        match tag {
            LogicTag::NewOrder => {
                b.read(Table::Warehouse, home, 0);
                b.read(
                    Table::Customer,
                    home,
                    district * self.cfg.customer_pool + customer,
                );
                b.write(Table::District, home, district);
                b.write(Table::Orders, home, id);
                b.write(Table::NewOrder, home, id);
                let whole_order_remote = self
                    .cfg
                    .new_order_remote_prob
                    .map(|q| b.rng.gen::<f64>() < q);
                let order_supplier = match whole_order_remote {
                    Some(true) => Some(self.remote_warehouse(origin, b.rng)),
                    _ => None,
                };
                for line in 0..self.cfg.items_per_order {
                    let item = b.rng.gen_range(0..self.cfg.item_pool);
                    let supplier = match whole_order_remote {
                        Some(_) => order_supplier.unwrap_or(home),
                        None if b.rng.gen::<f64>() < self.cfg.remote_prob => {
                            self.remote_warehouse(origin, b.rng)
                        }
                        None => home,
                    };
                    b.read(Table::Item, home, item);
                    b.write(Table::Stock, supplier, item);
                    b.write(Table::OrderLine, home, id * 16 + line as u64);
                }
            }
            LogicTag::Payment => {
                let q = self.cfg.payment_remote_prob.unwrap_or(self.cfg.remote_prob);
                let w = if b.rng.gen::<f64>() < q {
                    self.remote_warehouse(origin, b.rng)
                } else {
                    home
                };
                b.write(Table::Warehouse, w, 0);
                b.write(Table::District, w, district);
                b.write(
                    Table::Customer,
                    w,
                    district * self.cfg.customer_pool + customer,
                );
                b.write(Table::History, w, id);
            }
            LogicTag::Delivery => {
                for d in 0..DISTRICTS {
                    let c = b.rng.gen_range(0..self.cfg.customer_pool);
                    b.write(Table::NewOrder, home, d);
                    b.write(Table::Customer, home, d * self.cfg.customer_pool + c);
                }
            }
            LogicTag::OrderStatus => {
                b.read(
                    Table::Customer,
                    home,
                    district * self.cfg.customer_pool + customer,
                );
                let order = b.rng.gen_range(0..1u64 << 40);
                b.read(Table::Orders, home, order);
                b.read(Table::OrderLine, home, order * 16);
            }
            LogicTag::StockLevel => {
                b.read(Table::District, home, district);
                for _ in 0..20 {
                    let item = b.rng.gen_range(0..self.cfg.item_pool);
                    b.read(Table::Stock, home, item);
                }
            }
            LogicTag::YcsbRw | LogicTag::Custom => unreachable!("not a TPC-C tag"),
        }
        Ok(b.txn)
    }

    fn remote_warehouse<R: Rng + ?Sized>(&self, origin: RegionId, rng: &mut R) -> u32 {
        self.foreign[origin.index()].choose(rng).expect("checked").0
    }
}

struct Builder<'r, R: Rng + ?Sized> {
    txn: Transaction,
    rng: &'r mut R,
}

impl<R: Rng + ?Sized> Builder<'_, R> {
    fn read(&mut self, table: Table, w: u32, id: u64) {
        let k = table.key(w, id);
        if !self.txn.write_set.contains_key(&k) {
            self.txn.read_set.insert(k);
        }
    }

    fn write(&mut self, table: Table, w: u32, id: u64) {
        let k = table.key(w, id);
        self.txn.read_set.remove(&k);
        let v = Value {
            seed: self.rng.gen(),
            len: table.row_bytes(),
        };
        self.txn.write_set.insert(k, v);
    }
}

pub fn gen_tpcc_txn<R: Rng + ?Sized>(
    cfg: &TpccConfig,
    placement: &PlacementMap,
    origin: RegionId,
    id: TxnId,
    rng: &mut R,
) -> Result<Transaction> {
    TpccGenerator::new(cfg, placement)?.generate(id, origin, rng)
}
