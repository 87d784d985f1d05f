use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::collector::{merged_histogram, ClassMix, Collector, Counts};
use super::cost::{cost_per_txn, Cost, CostInputs, SECONDS_PER_HOUR};
use super::egress::{EgressLedger, BYTES_PER_GB};
use super::histogram::LatencyHistogram;
use crate::error::Result;
use crate::model::HomeSpan;
use crate::time::{to_secs, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pricing {
    pub servers: f64,
    pub server_price_per_hour: f64,
    pub transfer_price_per_gb: f64,
    pub storage_price_per_gb_hour: f64,
    /// Copies kept of every written byte.
    pub replication_factor: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkCounters {
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub discarded: u64,
    pub sent_bytes: u64,
}

impl NetworkCounters {
    /// Every sent message is delivered, lost, or discarded at a down server.
    pub fn conserved(&self) -> bool {
        self.sent == self.delivered + self.dropped + self.discarded
    }

    pub fn merge(&mut self, o: &NetworkCounters) {
        self.sent += o.sent;
        self.delivered += o.delivered;
        self.dropped += o.dropped;
        self.discarded += o.discarded;
        self.sent_bytes += o.sent_bytes;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerUtilization {
    pub server: String,
    /// Executor busy time over executor capacity for the run.
    pub busy_fraction: f64,
    pub peak_queue_depth: u64,
    pub peak_inflight: u64,
    /// Peak in-flight transactions over admission capacity.
    pub ram_fraction: f64,
    pub bytes_per_sec: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassLatency {
    pub count: u64,
    pub p50_ms: Option<f64>,
    pub p99_ms: Option<f64>,
}

impl ClassLatency {
    fn of(h: &LatencyHistogram) -> Self {
        ClassLatency {
            count: h.count(),
            p50_ms: h.percentile_ms(0.5),
            p99_ms: h.percentile_ms(0.99),
        }
    }
}

/// Everything measured for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub protocol: String,
    pub param: f64,
    /// Axis value as written in the scenario.
    pub label: String,
    pub seed: u64,
    pub duration_s: f64,
    pub warmup_s: f64,
    /// Runs folded into this report.
    pub repetitions: u32,
    pub pricing: Pricing,
    pub totals: Counts,
    pub window: Counts,
    pub in_flight: u64,
    pub committed_tps: f64,
    pub abort_rate: f64,
    pub mix: ClassMix,
    pub window_mix: ClassMix,
    /// Commits per 1 s bin over the whole run, including any drain period.
    pub throughput_series: Vec<u64>,
    /// Keyed by `lsh`, `fsh`, `mh`, and `all`.
    pub latency: BTreeMap<String, ClassLatency>,
    pub histograms: BTreeMap<String, LatencyHistogram>,
    pub egress: EgressLedger,
    pub billed_gb: f64,
    pub window_billed_gb: f64,
    pub committed_write_bytes: u64,
    pub cost_inputs: CostInputs,
    pub cost: Cost,
    pub network: NetworkCounters,
    pub utilization: Vec<ServerUtilization>,
    pub trace_hash: String,
}

/// Run identity carried into the report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportMeta {
    pub scenario: String,
    pub protocol: String,
    pub param: f64,
    pub label: String,
    pub seed: u64,
}

impl RunReport {
    pub fn build(
        meta: ReportMeta,
        collector: &Collector,
        egress: &EgressLedger,
        network: NetworkCounters,
        utilization: Vec<ServerUtilization>,
        pricing: &Pricing,
        trace_hash: String,
    ) -> Result<RunReport> {
        let window_s = to_secs(collector.end() - collector.warmup());
        let window = collector.window();
        let committed_tps = window.committed as f64 / window_s;
        let decided = window.committed + window.aborted;
        let abort_rate = if decided == 0 {
            0.0
        } else {
            window.aborted as f64 / decided as f64
        };
        let hists = collector.histograms();
        let mut latency = BTreeMap::new();
        for h in HomeSpan::ALL {
            let m = merged_histogram(hists, &format!("{}/", h.name()));
            latency.insert(h.name().to_string(), ClassLatency::of(&m));
        }
        latency.insert("all".into(), ClassLatency::of(&merged_histogram(hists, "")));
        let cost_inputs = CostInputs {
            servers: pricing.servers,
            server_price_per_hour: pricing.server_price_per_hour,
            transfer_gb_per_hour: egress.window_billed_gb() / (window_s / SECONDS_PER_HOUR),
            transfer_price_per_gb: pricing.transfer_price_per_gb,
            stored_gb: collector.window_write_bytes() as f64 * pricing.replication_factor
                / BYTES_PER_GB,
            storage_price_per_gb_hour: pricing.storage_price_per_gb_hour,
            throughput: committed_tps,
        };
        Ok(RunReport {
            scenario: meta.scenario,
            protocol: meta.protocol,
            param: meta.param,
            label: meta.label,
            seed: meta.seed,
            duration_s: to_secs(collector.end()),
            warmup_s: to_secs(collector.warmup()),
            repetitions: 1,
            pricing: *pricing,
            totals: collector.totals(),
            window,
            in_flight: collector.in_flight(),
            committed_tps,
            abort_rate,
            mix: collector.mix(),
            window_mix: collector.window_mix(),
            throughput_series: collector.series().to_vec(),
            latency,
            histograms: hists.clone(),
            egress: egress.clone(),
            billed_gb: egress.billed_gb(),
            window_billed_gb: egress.window_billed_gb(),
            committed_write_bytes: collector.window_write_bytes(),
            cost: cost_per_txn(&cost_inputs)?,
            cost_inputs,
            network,
            utilization,
            trace_hash,
        })
    }

    pub fn p50_ms(&self, class: &str) -> Option<f64> {
        self.latency.get(class).and_then(|l| l.p50_ms)
    }

    pub fn p99_ms(&self, class: &str) -> Option<f64> {
        self.latency.get(class).and_then(|l| l.p99_ms)
    }

    /// Mean commits per second over whole 1 s bins in `[from, to)`.
    pub fn mean_tps(&self, from: SimTime, to: SimTime) -> f64 {
        let a = (from / crate::time::NANOS_PER_SEC) as usize;
        let b = ((to / crate::time::NANOS_PER_SEC) as usize).min(self.throughput_series.len());
        if b <= a {
            return 0.0;
        }
        self.throughput_series[a..b].iter().sum::<u64>() as f64 / (b - a) as f64
    }

    pub fn csv_header() -> &'static str {
        "scenario,protocol,param,committed_tps,p50_ms_lsh,p50_ms_fsh,p50_ms_mh,p99_ms_lsh,p99_ms_fsh,p99_ms_mh,abort_rate,billed_gb,cost_fixed,cost_transfer,cost_per_10k_txn"
    }

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_default();
        let (fixed, transfer, per_10k) = match &self.cost {
            Cost::Finite(b) => (
                format!("{:.6e}", b.fixed),
                format!("{:.6e}", b.transfer),
                format!("{:.6}", b.per_10k()),
            ),
            Cost::Infinite { .. } => ("inf".into(), "inf".into(), "inf".into()),
        };
        format!(
            "{},{},{},{:.3},{},{},{},{},{},{},{:.6},{:.6},{},{},{}",
            self.scenario,
            self.protocol,
            self.param,
            self.committed_tps,
            opt(self.p50_ms("lsh")),
            opt(self.p50_ms("fsh")),
            opt(self.p50_ms("mh")),
            opt(self.p99_ms("lsh")),
            opt(self.p99_ms("fsh")),
            opt(self.p99_ms("mh")),
            self.abort_rate,
            self.billed_gb,
            fixed,
            transfer,
            per_10k
        )
    }

    /// Folds a repetition of the same point into this report. Counts,
    /// series, histograms and ledgers add; rates are recomputed.
    pub fn merge(&mut self, o: &RunReport) -> Result<()> {
        self.totals.merge(&o.totals);
        self.window.merge(&o.window);
        self.in_flight += o.in_flight;
        self.mix.merge(&o.mix);
        self.window_mix.merge(&o.window_mix);
        if self.throughput_series.len() < o.throughput_series.len() {
            self.throughput_series.resize(o.throughput_series.len(), 0);
        }
        for (a, b) in self.throughput_series.iter_mut().zip(&o.throughput_series) {
            *a += b;
        }
        for (k, h) in &o.histograms {
            self.histograms.entry(k.clone()).or_default().merge(h);
        }
        for h in HomeSpan::ALL {
            let m = merged_histogram(&self.histograms, &format!("{}/", h.name()));
            self.latency
                .insert(h.name().to_string(), ClassLatency::of(&m));
        }
        let all = merged_histogram(&self.histograms, "");
        self.latency.insert("all".into(), ClassLatency::of(&all));
        self.egress.merge(&o.egress);
        self.billed_gb = self.egress.billed_gb();
        self.window_billed_gb = self.egress.window_billed_gb();
        self.committed_write_bytes += o.committed_write_bytes;
        self.network.merge(&o.network);
        self.repetitions += o.repetitions;
        self.recompute()
    }

    fn recompute(&mut self) -> Result<()> {
        let window_s = (self.duration_s - self.warmup_s) * self.repetitions as f64;
        self.committed_tps = self.window.committed as f64 / window_s;
        let decided = self.window.committed + self.window.aborted;
        self.abort_rate = if decided == 0 {
            0.0
        } else {
            self.window.aborted as f64 / decided as f64
        };
        self.cost_inputs.throughput = self.committed_tps;
        self.cost_inputs.transfer_gb_per_hour =
            self.window_billed_gb / (window_s / SECONDS_PER_HOUR);
        self.cost_inputs.stored_gb = self.committed_write_bytes as f64
            * self.pricing.replication_factor
            / BYTES_PER_GB
            / self.repetitions as f64;
        self.cost = cost_per_txn(&self.cost_inputs)?;
        Ok(())
    }
}
