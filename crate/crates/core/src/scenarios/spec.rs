use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::instance::{instance, DEFAULT_INSTANCE};
use crate::error::{Error, Result};
use crate::metrics::cost::{DEFAULT_STORAGE_PRICE, DEFAULT_TRANSFER_PRICE};
use crate::model::validate_weights;
use crate::netsim::{FaultSchedule, FaultTarget, WanProfile, DEFAULT_CLIENT_TIMEOUT_S};
use crate::protocols::ProtocolParams;
use crate::workload::{Arrival, Spacing, WorkloadConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// In-flight slots per GiB of RAM at full scale.
pub const FULL_CAPACITY_PER_GIB: f64 = 1000.0;
/// Desk runs offer roughly a hundredth of the full-scale load; the RAM proxy
/// is scaled so the default desk rate fits under the in-flight limit at
/// the default WAN delay but not at the top of the delay axis.
pub const DESK_CAPACITY_PER_GIB: f64 = 0.25;

/// Fault trace timing in seconds: crash, recover, end of run.
pub const FAULT_CRASH_S: f64 = 15.0;
pub const FAULT_RECOVER_S: f64 = 45.0;
pub const FAULT_END_S: f64 = 75.0;

/// Rows of the server geo-distribution table: shares of us-west, us-east,
/// eu-west and ap-northeast.
pub const GEO_ROWS: [(&str, [f64; 4]); 5] = [
    ("uniform", [0.25, 0.25, 0.25, 0.25]),
    ("usw+", [0.375, 0.25, 0.25, 0.125]),
    ("usw+eu+", [0.375, 0.125, 0.375, 0.125]),
    ("usw++", [0.625, 0.125, 0.125, 0.125]),
    ("usw++eu++", [0.5, 0.0, 0.5, 0.0]),
];

pub fn geo_row(name: &str) -> Result<[f64; 4]> {
    GEO_ROWS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, w)| *w)
        .ok_or_else(|| {
            let known: Vec<&str> = GEO_ROWS.iter().map(|(n, _)| *n).collect();
            Error::config(format!(
                "unknown distribution {name:?} (known: {})",
                known.join(", ")
            ))
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WanSource {
    Desk4,
    Synthetic8,
    /// Same RTT between every pair of regions.
    Uniform(f64),
    File(PathBuf),
}

impl WanSource {
    pub fn load(&self, regions: u16) -> Result<WanProfile> {
        let mut w = match self {
            WanSource::Desk4 => WanProfile::desk4(),
            WanSource::Synthetic8 => WanProfile::synthetic8(),
            WanSource::Uniform(rtt) => {
                let labels: Vec<String> = (0..regions).map(|r| format!("region-{r}")).collect();
                WanProfile::uniform(&labels, *rtt)
            }
            WanSource::File(path) => WanProfile::load(path)?,
        };
        if w.region_count() < regions {
            return Err(Error::config(format!(
                "WAN profile has {} regions, {regions} requested",
                w.region_count()
            )));
        }
        w.truncate(regions as usize);
        w.validate()?;
        Ok(w)
    }
}

/// Everything one run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaseConfig {
    pub workload: WorkloadConfig,
    pub arrival: Arrival,
    pub regions: u16,
    pub servers_per_region: u16,
    /// YCSB partition count; TPC-C uses one partition per warehouse.
    pub partitions: u32,
    pub wan: WanSource,
    pub jitter_fraction: Option<f64>,
    pub loss_prob: Option<f64>,
    /// Rescales inter-region RTTs so their mean equals this value.
    pub mean_rtt_ms: Option<f64>,
    pub instance: String,
    pub capacity_per_gib: f64,
    pub service_time_us: f64,
    /// Cap each server's uplink at the instance network rate.
    pub bandwidth_cap: bool,
    /// Shares of partitions, servers and clients per region.
    pub region_weights: Option<Vec<f64>>,
    pub protocol_params: ProtocolParams,
    pub duration_s: f64,
    pub warmup_s: f64,
    pub client_timeout_s: f64,
    pub faults: FaultSchedule,
    pub transfer_price_per_gb: f64,
    pub storage_price_per_gb_hour: f64,
}

impl Default for BaseConfig {
    fn default() -> Self {
        Preset::Desk.base()
    }
}

impl BaseConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("duration_s", self.duration_s),
            ("service_time_us", self.service_time_us),
            ("capacity_per_gib", self.capacity_per_gib),
            ("client_timeout_s", self.client_timeout_s),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.warmup_s >= 0.0 && self.warmup_s < self.duration_s) {
            return Err(Error::config(format!(
                "warmup_s {} must lie in [0, duration_s {})",
                self.warmup_s, self.duration_s
            )));
        }
        if self.regions == 0 || self.servers_per_region == 0 || self.partitions == 0 {
            return Err(Error::config(
                "regions, servers_per_region and partitions must be positive",
            ));
        }
        for (name, v) in [
            ("transfer_price_per_gb", self.transfer_price_per_gb),
            ("storage_price_per_gb_hour", self.storage_price_per_gb_hour),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("{name} must be non-negative")));
            }
        }
        if let Some(w) = &self.region_weights {
            validate_weights(w, self.regions)?;
        }
        if let Some(m) = self.mean_rtt_ms {
            if !(m.is_finite() && m >= 0.0) {
                return Err(Error::config(format!(
                    "mean_rtt_ms {m} must be non-negative"
                )));
            }
        }
        instance(&self.instance)?;
        self.protocol_params.validate(self.regions)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    ThroughputRamp,
    ResourceAllocation,
    ServerGeoDistribution,
    AccessPatterns,
    AccessSkew,
    LatencyJitter,
    PacketLoss,
    FaultTolerance,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 8] = [
        ScenarioKind::ThroughputRamp,
        ScenarioKind::ResourceAllocation,
        ScenarioKind::ServerGeoDistribution,
        ScenarioKind::AccessPatterns,
        ScenarioKind::AccessSkew,
        ScenarioKind::LatencyJitter,
        ScenarioKind::PacketLoss,
        ScenarioKind::FaultTolerance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::ThroughputRamp => "throughput_ramp",
            ScenarioKind::ResourceAllocation => "resource_allocation",
            ScenarioKind::ServerGeoDistribution => "server_geo_distribution",
            ScenarioKind::AccessPatterns => "access_patterns",
            ScenarioKind::AccessSkew => "access_skew",
            ScenarioKind::LatencyJitter => "latency_jitter",
            ScenarioKind::PacketLoss => "packet_loss",
            ScenarioKind::FaultTolerance => "fault_tolerance",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = ScenarioKind::ALL.iter().map(|k| k.name()).collect();
                Error::config(format!(
                    "unknown scenario {s:?} (known: {})",
                    names.join(", ")
                ))
            })
    }
}

/// One value on a sweep axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisValue {
    Number(f64),
    Name(String),
}

impl fmt::Display for AxisValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AxisValue::Number(x) => write!(f, "{x}"),
            AxisValue::Name(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    #[default]
    Desk,
    /// Full-scale deployment; selected as `paper` on the command line.
    #[serde(rename = "paper")]
    Full,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Full),
            _ => Err(Error::config(format!(
                "unknown preset {s:?} (known: desk, paper)"
            ))),
        }
    }
}

impl Preset {
    pub fn base(self) -> BaseConfig {
        let desk = BaseConfig {
            workload: WorkloadConfig::default(),
            arrival: Arrival::Open {
                rate: 1000.0,
                spacing: Spacing::Fixed,
            },
            regions: 4,
            servers_per_region: 2,
            partitions: 64,
            wan: WanSource::Desk4,
            jitter_fraction: None,
            loss_prob: None,
            mean_rtt_ms: None,
            instance: DEFAULT_INSTANCE.into(),
            capacity_per_gib: DESK_CAPACITY_PER_GIB,
            service_time_us: 20.0,
            bandwidth_cap: false,
            region_weights: None,
            protocol_params: ProtocolParams::default(),
            duration_s: 60.0,
            warmup_s: 10.0,
            client_timeout_s: DEFAULT_CLIENT_TIMEOUT_S,
            faults: FaultSchedule::default(),
            transfer_price_per_gb: DEFAULT_TRANSFER_PRICE,
            storage_price_per_gb_hour: DEFAULT_STORAGE_PRICE,
        };
        match self {
            Preset::Desk => desk,
            Preset::Full => BaseConfig {
                arrival: Arrival::Open {
                    rate: 20_000.0,
                    spacing: Spacing::Fixed,
                },
                regions: 8,
                servers_per_region: 4,
                partitions: 256,
                wan: WanSource::Synthetic8,
                capacity_per_gib: FULL_CAPACITY_PER_GIB,
                bandwidth_cap: true,
                ..desk
            },
        }
    }

    /// The default sweep for `kind` at this scale.
    pub fn axis(self, kind: ScenarioKind) -> Vec<AxisValue> {
        let nums = |xs: &[f64]| xs.iter().map(|&x| AxisValue::Number(x)).collect();
        let names = |xs: &[&str]| xs.iter().map(|&x| AxisValue::Name(x.into())).collect();
        match kind {
            ScenarioKind::ThroughputRamp => match self {
                Preset::Desk => nums(&[250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0]),
                Preset::Full => nums(&[1e3, 5e3, 1e4, 2.5e4, 5e4, 1e5, 1.5e5, 2e5]),
            },
            ScenarioKind::ResourceAllocation => names(&[
                "m5.2xlarge",
                "r5.2xlarge",
                "m5.4xlarge",
                "r5.4xlarge",
                "m6i.8xlarge",
            ]),
            ScenarioKind::ServerGeoDistribution => names(&GEO_ROWS.map(|(n, _)| n)),
            ScenarioKind::AccessPatterns => {
                nums(&(0..=10).map(|i| i as f64 / 10.0).collect::<Vec<_>>())
            }
            ScenarioKind::AccessSkew => nums(&[0.0, 0.25, 0.5, 0.75, 0.9, 0.99]),
            ScenarioKind::LatencyJitter => nums(&[0.0, 50.0, 111.0, 200.0, 400.0, 600.0]),
            ScenarioKind::PacketLoss => nums(&[0.0, 0.01, 0.02, 0.05, 0.1]),
            ScenarioKind::FaultTolerance => names(&["server", "region"]),
        }
    }

    /// A ready-to-run scenario with this preset's base config and axis.
    pub fn scenario(self, kind: ScenarioKind) -> ScenarioSpec {
        let mut base = self.base();
        match kind {
            ScenarioKind::ThroughputRamp => {
                if self == Preset::Desk {
                    base.duration_s = 20.0;
                    base.warmup_s = 5.0;
                }
            }
            ScenarioKind::ServerGeoDistribution => {
                // the distribution table has four regions
                base.regions = 4;
                base.wan = WanSource::Desk4;
                if self == Preset::Full {
                    base.servers_per_region = 8;
                }
            }
            ScenarioKind::FaultTolerance => {
                base.duration_s = FAULT_END_S;
                base.warmup_s = 5.0;
            }
            _ => {}
        }
        ScenarioSpec {
            schema_version: SCHEMA_VERSION,
            kind,
            protocols: default_protocols(),
            base,
            axis: self.axis(kind),
            repetitions: 1,
            seed: 42,
        }
    }
}

fn default_protocols() -> Vec<String> {
    ["global_sequencer", "home_aware", "quorum_commit"]
        .map(String::from)
        .to_vec()
}

fn default_repetitions() -> u32 {
    1
}

/// A sweep over one parameter of a base config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub schema_version: u32,
    pub kind: ScenarioKind,
    #[serde(default = "default_protocols")]
    pub protocols: Vec<String>,
    #[serde(default)]
    pub base: BaseConfig,
    pub axis: Vec<AxisValue>,
    #[serde(default = "default_repetitions")]
    pub repetitions: u32,
    #[serde(default)]
    pub seed: u64,
}

/// One sweep point, fully resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub index: usize,
    pub label: String,
    /// Numeric axis value; the point index for named values.
    pub param: f64,
    pub config: BaseConfig,
}

impl ScenarioSpec {
    pub fn validate_shape(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "schema_version {} unsupported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.axis.is_empty() {
            return Err(Error::config(format!("{} sweep axis is empty", self.kind)));
        }
        if self.protocols.is_empty() {
            return Err(Error::config("no protocols listed"));
        }
        if self.repetitions == 0 {
            return Err(Error::config("repetitions must be at least 1"));
        }
        Ok(())
    }

    /// Resolves every point; the first bad one is reported by index.
    pub fn points(&self) -> Result<Vec<Point>> {
        self.validate_shape()?;
        self.axis
            .iter()
            .enumerate()
            .map(|(i, v)| {
                self.point(i, v)
                    .map_err(|e| Error::config(format!("{} point {i} ({v}): {e}", self.kind)))
            })
            .collect()
    }

    fn point(&self, index: usize, value: &AxisValue) -> Result<Point> {
        let mut c = self.base.clone();
        let num = || match value {
            AxisValue::Number(x) => Ok(*x),
            AxisValue::Name(s) => Err(Error::config(format!("expected a number, got {s:?}"))),
        };
        let name = || match value {
            AxisValue::Name(s) => Ok(s.clone()),
            AxisValue::Number(x) => Err(Error::config(format!("expected a name, got {x}"))),
        };
        match self.kind {
            ScenarioKind::ThroughputRamp => {
                let x = num()?;
                match &mut c.arrival {
                    Arrival::Open { rate, .. } => *rate = x,
                    Arrival::Closed { clients, .. } => {
                        if x < 1.0 || x.fract() != 0.0 {
                            return Err(Error::config(format!(
                                "client count {x} must be a positive integer"
                            )));
                        }
                        *clients = x as u32;
                    }
                }
            }
            ScenarioKind::ResourceAllocation => c.instance = name()?,
            ScenarioKind::ServerGeoDistribution => {
                if c.regions != 4 {
                    return Err(Error::config(
                        "server geo-distribution needs exactly 4 regions",
                    ));
                }
                c.region_weights = Some(geo_row(&name()?)?.to_vec());
            }
            ScenarioKind::AccessPatterns => {
                let g = num()?;
                c.workload = match &c.workload {
                    WorkloadConfig::Ycsb(y) => WorkloadConfig::Ycsb(y.with_geo_pct(g)?),
                    WorkloadConfig::Tpcc(t) => WorkloadConfig::Tpcc(t.sweep_geo_pct(g)?),
                };
            }
            ScenarioKind::AccessSkew => {
                let x = num()?;
                match &mut c.workload {
                    WorkloadConfig::Ycsb(y) => y.theta = x,
                    WorkloadConfig::Tpcc(t) => {
                        if x < 1.0 {
                            return Err(Error::config(format!("pool size {x} must be at least 1")));
                        }
                        t.item_pool = x as u64;
                        t.customer_pool = t.customer_pool.min(x as u64);
                    }
                }
            }
            ScenarioKind::LatencyJitter => c.mean_rtt_ms = Some(num()?),
            ScenarioKind::PacketLoss => c.loss_prob = Some(num()?),
            ScenarioKind::FaultTolerance => {
                let target = match name()?.as_str() {
                    "server" => FaultTarget::Server(1, c.servers_per_region - 1),
                    "region" => FaultTarget::Region(c.protocol_params.orderer_region),
                    other => {
                        return Err(Error::config(format!(
                            "unknown fault trace {other:?} (known: server, region)"
                        )))
                    }
                };
                c.faults = FaultSchedule::outage(target, FAULT_CRASH_S, FAULT_RECOVER_S);
                if c.duration_s < FAULT_END_S {
                    c.duration_s = FAULT_END_S;
                }
            }
        }
        c.validate()?;
        let param = match value {
            AxisValue::Number(x) => *x,
            AxisValue::Name(_) => index as f64,
        };
        Ok(Point {
            index,
            label: value.to_string(),
            param,
            config: c,
        })
    }
}
