//! Latency histograms, egress accounting, cost model and run reports.

pub mod collector;
pub mod cost;
pub mod egress;
pub mod histogram;
pub mod report;

pub use collector::{ClassMix, Collector, Counts};
pub use cost::{cost_per_txn, Cost, CostBreakdown, CostInputs};
pub use egress::{egress_totals, EgressLedger};
pub use histogram::LatencyHistogram;
pub use report::{NetworkCounters, Pricing, ReportMeta, RunReport, ServerUtilization};
