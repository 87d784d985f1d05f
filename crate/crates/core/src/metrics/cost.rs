use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SECONDS_PER_HOUR: f64 = 3600.0;
/// Default price per billed inter-region GB.
pub const DEFAULT_TRANSFER_PRICE: f64 = 0.02;
/// Default price per stored GB-hour.
pub const DEFAULT_STORAGE_PRICE: f64 = 0.0001;

/// Inputs to the per-transaction cost model. All rates are per hour except
/// `throughput`, which is committed transactions per second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostInputs {
    pub servers: f64,
    pub server_price_per_hour: f64,
    pub transfer_gb_per_hour: f64,
    pub transfer_price_per_gb: f64,
    pub stored_gb: f64,
    pub storage_price_per_gb_hour: f64,
    pub throughput: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    /// Server rent per transaction.
    pub fixed: f64,
    /// Inter-region transfer per transaction.
    pub transfer: f64,
    /// Durable storage per transaction.
    pub storage: f64,
    pub per_txn: f64,
}

impl CostBreakdown {
    pub fn per_10k(&self) -> f64 {
        self.per_txn * 1e4
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Cost {
    Finite(CostBreakdown),
    Infinite { reason: String },
}

impl Cost {
    pub fn finite(&self) -> Option<&CostBreakdown> {
        match self {
            Cost::Finite(b) => Some(b),
            Cost::Infinite { .. } => None,
        }
    }

    /// Per-10k cost, `f64::INFINITY` when no work completed.
    pub fn per_10k_or_inf(&self) -> f64 {
        self.finite().map_or(f64::INFINITY, |b| b.per_10k())
    }
}

/// Hourly spend divided by hourly committed transactions.
pub fn cost_per_txn(i: &CostInputs) -> Result<Cost> {
    let fields = [
        i.servers,
        i.server_price_per_hour,
        i.transfer_gb_per_hour,
        i.transfer_price_per_gb,
        i.stored_gb,
        i.storage_price_per_gb_hour,
        i.throughput,
    ];
    if fields.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::config("cost inputs must be finite and non-negative"));
    }
    if i.throughput == 0.0 {
        return Ok(Cost::Infinite {
            reason: "no transactions committed in the measurement window".into(),
        });
    }
    let per_hour = i.throughput * SECONDS_PER_HOUR;
    let fixed = i.servers * i.server_price_per_hour / per_hour;
    let transfer = i.transfer_gb_per_hour * i.transfer_price_per_gb / per_hour;
    let storage = i.stored_gb * i.storage_price_per_gb_hour / per_hour;
    Ok(Cost::Finite(CostBreakdown {
        fixed,
        transfer,
        storage,
        per_txn: (i.servers * i.server_price_per_hour
            + i.transfer_gb_per_hour * i.transfer_price_per_gb
            + i.stored_gb * i.storage_price_per_gb_hour)
            / per_hour,
    }))
}
