//! Geo-aware YCSB: one table, hash-partitioned, with explicit control over
//! the LSH/FSH/MH mix and the multi-partition share.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::zipf::Zipf;
use crate::error::{Error, Result};
use crate::model::{
    HomeSpan, Key, LogicTag, PartitionId, PlacementMap, RegionId, Transaction, TxnId, Value,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct YcsbConfig {
    pub lsh_pct: f64,
    pub fsh_pct: f64,
    pub mh_pct: f64,
    /// Overall share of multi-partition transactions. MH transactions are
    /// always multi-partition, so this must be at least `mh_pct`.
    pub mp_pct: f64,
    pub partitions_per_mp_txn: usize,
    /// Distinct home regions an MH transaction spans.
    pub mh_regions: usize,
    pub hot_keys_per_txn: usize,
    pub cold_keys_per_txn: usize,
    pub theta: f64,
    pub hot_set_size: u64,
    pub table_size: u64,
    pub value_bytes: u32,
    pub columns: u32,
    pub read_fraction: f64,
}

impl Default for YcsbConfig {
    fn default() -> Self {
        YcsbConfig {
            lsh_pct: 0.5,
            fsh_pct: 0.25,
            mh_pct: 0.25,
            mp_pct: 0.5,
            partitions_per_mp_txn: 2,
            mh_regions: 2,
            hot_keys_per_txn: 2,
            cold_keys_per_txn: 8,
            theta: 0.0,
            hot_set_size: 1_000,
            table_size: 100_000,
            value_bytes: 100,
            columns: 10,
            read_fraction: 0.5,
        }
    }
}

impl YcsbConfig {
    pub fn validate(&self) -> Result<()> {
        let parts = [
            self.lsh_pct,
            self.fsh_pct,
            self.mh_pct,
            self.mp_pct,
            self.read_fraction,
        ];
        if parts.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::config("ycsb fractions must lie in [0, 1]"));
        }
        let sum = self.lsh_pct + self.fsh_pct + self.mh_pct;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!(
                "ycsb lsh+fsh+mh = {sum}, expected 1"
            )));
        }
        if self.mh_pct > 0.0 && self.mp_pct + 1e-12 < self.mh_pct {
            return Err(Error::config(format!(
                "mp_pct {} below mh_pct {}: MH transactions are multi-partition",
                self.mp_pct, self.mh_pct
            )));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::config(format!(
                "theta {} outside [0, 1]",
                self.theta
            )));
        }
        if self.hot_keys_per_txn + self.cold_keys_per_txn == 0 {
            return Err(Error::config("a transaction needs at least one key"));
        }
        if self.hot_set_size == 0 && self.hot_keys_per_txn > 0 {
            return Err(Error::config("hot keys requested with an empty hot set"));
        }
        if self.hot_set_size >= self.table_size && self.cold_keys_per_txn > 0 {
            return Err(Error::config(
                "cold keys requested but hot set covers the table",
            ));
        }
        if self.partitions_per_mp_txn < 2 || self.mh_regions < 2 {
            return Err(Error::config(
                "multi-partition and MH fan-out must be at least 2",
            ));
        }
        Ok(())
    }

    /// Geo-distribution percentage `g` split evenly into FSH and MH.
    pub fn with_geo_pct(&self, g: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&g) {
            return Err(Error::config(format!(
                "geo-distribution {g} outside [0, 1]"
            )));
        }
        Ok(YcsbConfig {
            lsh_pct: 1.0 - g,
            fsh_pct: g / 2.0,
            mh_pct: g / 2.0,
            ..self.clone()
        })
    }

    fn row_bytes(&self) -> u32 {
        self.value_bytes * self.columns
    }
}

/// Stateful generator bound to one placement.
#[derive(Debug, Clone)]
pub struct YcsbGenerator {
    cfg: YcsbConfig,
    by_home: Vec<Vec<PartitionId>>,
    hot: Option<Zipf>,
    regions: u16,
}

impl YcsbGenerator {
    pub fn new(cfg: &YcsbConfig, placement: &PlacementMap) -> Result<Self> {
        cfg.validate()?;
        let hot = if cfg.hot_keys_per_txn > 0 {
            Some(Zipf::new(cfg.hot_set_size, cfg.theta)?)
        } else {
            None
        };
        Ok(YcsbGenerator {
            cfg: cfg.clone(),
            by_home: placement.partitions_by_home(),
            hot,
            regions: placement.regions(),
        })
    }

    pub fn config(&self) -> &YcsbConfig {
        &self.cfg
    }

    fn mp_given_single_home(&self) -> f64 {
        if self.cfg.mh_pct >= 1.0 {
            0.0
        } else {
            ((self.cfg.mp_pct - self.cfg.mh_pct) / (1.0 - self.cfg.mh_pct)).clamp(0.0, 1.0)
        }
    }

    /// Checks that every class with positive weight can be produced for
    /// transactions submitted from `origin`.
    pub fn check_origin(&self, origin: RegionId) -> Result<()> {
        let mp = self.mp_given_single_home() > 0.0;
        let sp = self.mp_given_single_home() < 1.0;
        let widths: Vec<usize> = [
            sp.then_some(1),
            mp.then_some(self.cfg.partitions_per_mp_txn),
        ]
        .into_iter()
        .flatten()
        .collect();
        for &w in &widths {
            if self.cfg.lsh_pct > 0.0 && self.by_home[origin.index()].len() < w {
                return Err(gen_err(
                    HomeSpan::LSH,
                    format!("origin {origin} homes fewer than {w} partitions"),
                ));
            }
            if self.cfg.fsh_pct > 0.0 && self.foreign_with(origin, w).is_empty() {
                return Err(gen_err(
                    HomeSpan::FSH,
                    format!("no foreign region homes {w} partitions"),
                ));
            }
        }
        if self.cfg.mh_pct > 0.0 {
            let fanout = self.cfg.mh_regions.min(self.regions as usize);
            let populated = self.by_home.iter().filter(|v| !v.is_empty()).count();
            if populated < 2 || populated < fanout {
                return Err(gen_err(
                    HomeSpan::MH,
                    format!("fewer than {} regions home any partition", fanout.max(2)),
                ));
            }
        }
        Ok(())
    }

    fn foreign_with(&self, origin: RegionId, min: usize) -> Vec<RegionId> {
        (0..self.regions)
            .map(RegionId)
            .filter(|&r| r != origin && self.by_home[r.index()].len() >= min)
            .collect()
    }

    pub fn draw_class<R: Rng + ?Sized>(&self, rng: &mut R) -> HomeSpan {
        let u: f64 = rng.gen();
        if u < self.cfg.lsh_pct {
            HomeSpan::LSH
        } else if u < self.cfg.lsh_pct + self.cfg.fsh_pct {
            HomeSpan::FSH
        } else {
            HomeSpan::MH
        }
    }

    pub fn generate<R: Rng + ?Sized>(
        &self,
        id: TxnId,
        origin: RegionId,
        rng: &mut R,
    ) -> Result<Transaction> {
        let class = self.draw_class(rng);
        self.generate_class(id, origin, class, rng)
    }

    /// Generates a transaction that classifies as `class` under the bound placement.
    pub fn generate_class<R: Rng + ?Sized>(
        &self,
        id: TxnId,
        origin: RegionId,
        class: HomeSpan,
        rng: &mut R,
    ) -> Result<Transaction> {
        let partitions = match class {
            HomeSpan::MH => self.mh_partitions(origin, rng)?,
            single => {
                let width = if rng.gen::<f64>() < self.mp_given_single_home() {
                    self.cfg.partitions_per_mp_txn
                } else {
                    1
                };
                let region = if single == HomeSpan::LSH {
                    origin
                } else {
                    *self
                        .foreign_with(origin, width)
                        .choose(rng)
                        .ok_or_else(|| {
                            gen_err(
                                single,
                                format!("no foreign region homes {width} partitions"),
                            )
                        })?
                };
                let pool = &self.by_home[region.index()];
                if pool.len() < width {
                    return Err(gen_err(
                        single,
                        format!("region {region} homes fewer than {width} partitions"),
                    ));
                }
                pool.choose_multiple(rng, width).copied().collect()
            }
        };
        Ok(self.fill_keys(id, origin, &partitions, rng))
    }

    fn mh_partitions<R: Rng + ?Sized>(
        &self,
        origin: RegionId,
        rng: &mut R,
    ) -> Result<Vec<PartitionId>> {
        let fanout = self.cfg.mh_regions.min(self.regions as usize);
        let others = self.foreign_with(origin, 1);
        let include_origin = !self.by_home[origin.index()].is_empty()
            && (others.len() < fanout || rng.gen_bool(0.5));
        let mut regions = Vec::with_capacity(fanout);
        if include_origin {
            regions.push(origin);
        }
        let need = fanout - regions.len();
        if others.len() < need || fanout < 2 {
            return Err(gen_err(
                HomeSpan::MH,
                format!("cannot span {fanout} populated regions"),
            ));
        }
        regions.extend(others.choose_multiple(rng, need).copied());

        let width = self.cfg.partitions_per_mp_txn.max(regions.len());
        let mut chosen: Vec<PartitionId> = regions
            .iter()
            .map(|r| {
                *self.by_home[r.index()]
                    .choose(rng)
                    .expect("populated region")
            })
            .collect();
        let mut cursor = 0;
        let mut stalled = 0;
        while chosen.len() < width && stalled < regions.len() {
            let pool = &self.by_home[regions[cursor % regions.len()].index()];
            cursor += 1;
            let fresh: Vec<_> = pool.iter().filter(|p| !chosen.contains(p)).collect();
            match fresh.choose(rng) {
                Some(&&p) => {
                    chosen.push(p);
                    stalled = 0;
                }
                None => stalled += 1,
            }
        }
        Ok(chosen)
    }

    fn fill_keys<R: Rng + ?Sized>(
        &self,
        id: TxnId,
        origin: RegionId,
        parts: &[PartitionId],
        rng: &mut R,
    ) -> Transaction {
        let mut txn = Transaction::new(id, origin, LogicTag::YcsbRw);
        let total = self.cfg.hot_keys_per_txn + self.cfg.cold_keys_per_txn;
        let cold_span = self.cfg.table_size - self.cfg.hot_set_size;
        for i in 0..total {
            let partition = parts[i % parts.len()];
            let record = if i < self.cfg.hot_keys_per_txn {
                self.hot.as_ref().expect("hot sampler").sample(rng) - 1
            } else {
                self.cfg.hot_set_size + rng.gen_range(0..cold_span)
            };
            let key = Key { partition, record };
            if rng.gen::<f64>() < self.cfg.read_fraction {
                if !txn.write_set.contains_key(&key) {
                    txn.read_set.insert(key);
                }
            } else {
                txn.read_set.remove(&key);
                txn.write_set.insert(
                    key,
                    Value {
                        seed: rng.gen(),
                        len: self.cfg.row_bytes(),
                    },
                );
            }
        }
        txn
    }
}

fn gen_err(class: HomeSpan, reason: String) -> Error {
    Error::Generation {
        class: format!("{class:?}"),
        reason,
    }
}

/// Generates one YCSB transaction for `origin`.
pub fn gen_ycsb_txn<R: Rng + ?Sized>(
    cfg: &YcsbConfig,
    placement: &PlacementMap,
    origin: RegionId,
    id: TxnId,
    rng: &mut R,
) -> Result<Transaction> {
    YcsbGenerator::new(cfg, placement)?.generate(id, origin, rng)
}
