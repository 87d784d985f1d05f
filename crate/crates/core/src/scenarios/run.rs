use rayon::prelude::*;

use super::instance::instance;
use super::spec::{BaseConfig, Point, ScenarioKind, ScenarioSpec};
use crate::error::{Error, Result};
use crate::metrics::{Pricing, ReportMeta, RunReport};
use crate::model::{assign_homes, classify, PlacementMap, ReplicationScope, Topology, Transaction};
use crate::netsim::{Engine, EngineConfig, ServerModel, WanProfile};
use crate::protocols::{ProtocolEnv, Registry};
use crate::seed::{derive, label, streams};
use crate::time::secs;
use crate::workload::{build_stream, StreamRecord, WorkloadConfig};

/// Engine seed of one repetition of one point.
pub fn point_seed(base: u64, kind: ScenarioKind, index: usize, repetition: u32) -> u64 {
    derive(base, &[label(kind.name()), index as u64, repetition as u64])
}

/// Workload seed, shared by every point of a scenario so that points
/// differ only in the swept parameter.
pub fn workload_seed(base: u64, kind: ScenarioKind, repetition: u32) -> u64 {
    derive(
        base,
        &[label(kind.name()), streams::WORKLOAD, repetition as u64],
    )
}

/// The physical setup a config describes.
#[derive(Debug, Clone)]
pub struct Deployment {
    pub topology: Topology,
    pub placement: PlacementMap,
    pub wan: WanProfile,
    pub server: ServerModel,
    /// Client origin shares over the deployed regions.
    pub origin_weights: Option<Vec<f64>>,
    pub pricing: Pricing,
}

impl Deployment {
    /// Regions with zero weight are left out; their servers move to the
    /// remaining regions so the server count stays the same.
    pub fn build(
        c: &BaseConfig,
        scope: impl Fn(u16) -> ReplicationScope,
        workload_seed: u64,
    ) -> Result<Self> {
        c.validate()?;
        let mut wan = c.wan.load(c.regions)?;
        let mut spr = c.servers_per_region;
        let mut weights = c.region_weights.clone();
        if let Some(w) = &c.region_weights {
            let keep: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
            if keep.len() < w.len() {
                let total = c.regions as usize * c.servers_per_region as usize;
                spr = (total / keep.len()) as u16;
                wan = wan.select(&keep);
                weights = Some(keep.iter().map(|&i| w[i]).collect());
            }
        }
        if let Some(m) = c.mean_rtt_ms {
            let cur = wan.mean_inter_rtt();
            if m == 0.0 || cur == 0.0 {
                wan.set_inter(m);
            } else {
                wan.scale_inter(m / cur);
            }
        }
        if let Some(j) = c.jitter_fraction {
            wan.jitter_fraction = j;
        }
        if let Some(l) = c.loss_prob {
            wan.loss_prob = l;
        }
        let inst = instance(&c.instance)?;
        if c.bandwidth_cap {
            wan.bandwidth = Some(inst.bandwidth_bytes());
        }
        wan.validate()?;
        let regions = wan.region_count();
        let partitions = match &c.workload {
            WorkloadConfig::Tpcc(t) => t.warehouses,
            WorkloadConfig::Ycsb(_) => c.partitions,
        };
        let topology = Topology::new(wan.regions.clone(), spr, partitions)?;
        let scope = scope(regions);
        let placement = assign_homes(
            partitions,
            regions,
            weights.as_deref(),
            scope,
            derive(workload_seed, &[streams::PLACEMENT]),
        )?;
        let service = (c.service_time_us * 1000.0).round() as u64;
        let server = inst.server_model(service, c.capacity_per_gib)?;
        let copies = match scope {
            ReplicationScope::Full => regions as f64,
            ReplicationScope::Partial(k) => 1.0 + k as f64,
        };
        let pricing = Pricing {
            servers: topology.server_count() as f64,
            server_price_per_hour: inst.price_per_hour,
            transfer_price_per_gb: c.transfer_price_per_gb,
            storage_price_per_gb_hour: c.storage_price_per_gb_hour,
            replication_factor: copies,
        };
        Ok(Deployment {
            topology,
            placement,
            wan,
            server,
            origin_weights: weights,
            pricing,
        })
    }
}

/// Identity and seeds of one run.
#[derive(Debug, Clone)]
pub struct RunSpec<'a> {
    pub scenario: &'a str,
    pub label: &'a str,
    pub param: f64,
    pub protocol: &'a str,
    pub seed: u64,
    pub workload_seed: u64,
    /// Keep per-transaction outcomes and the commit log for auditing.
    pub audit: bool,
    /// Record a line per event.
    pub trace: bool,
}

/// Builds an engine for one run without running it.
pub fn prepare(c: &BaseConfig, run: &RunSpec, registry: &Registry) -> Result<(Engine, Pricing)> {
    prepare_source(c, run, registry, None)
}

/// Like [`prepare`], but submits a recorded stream. Each record's class
/// must match what the deployment's placement gives it.
pub fn prepare_replay(
    c: &BaseConfig,
    run: &RunSpec,
    registry: &Registry,
    records: &[StreamRecord],
) -> Result<(Engine, Pricing)> {
    prepare_source(c, run, registry, Some(records))
}

fn prepare_source(
    c: &BaseConfig,
    run: &RunSpec,
    registry: &Registry,
    records: Option<&[StreamRecord]>,
) -> Result<(Engine, Pricing)> {
    let info = registry.get(run.protocol)?;
    let d = Deployment::build(
        c,
        |r| (info.scope)(r, &c.protocol_params),
        run.workload_seed,
    )?;
    let duration = secs(c.duration_s);
    let stream: Box<dyn Iterator<Item = Transaction>> = match records {
        None => Box::new(build_stream(
            &c.workload,
            &d.placement,
            &c.arrival,
            d.origin_weights.as_deref(),
            duration,
            run.workload_seed,
        )?),
        Some(recs) => {
            let mut txns = Vec::with_capacity(recs.len());
            for r in recs {
                let t = r.to_txn();
                let class = classify(&t, &d.placement)?;
                if class != r.class {
                    return Err(Error::config(format!(
                        "recorded txn {} is {} but classifies as {} under this deployment",
                        r.id, r.class, class
                    )));
                }
                txns.push(t);
            }
            Box::new(txns.into_iter())
        }
    };
    let env = ProtocolEnv {
        topology: &d.topology,
        placement: &d.placement,
        params: &c.protocol_params,
    };
    let model = registry.build(run.protocol, &env)?;
    let mut cfg = EngineConfig::new(d.topology, d.placement, d.wan, duration, run.seed);
    cfg.server = d.server;
    cfg.warmup = secs(c.warmup_s);
    cfg.faults = c.faults.clone();
    cfg.client_timeout = secs(c.client_timeout_s);
    cfg.drain = cfg.client_timeout + secs(1.0);
    cfg.keep_outcomes = run.audit;
    cfg.keep_commits = run.audit;
    cfg.trace = run.trace;
    let engine = Engine::new(cfg, model, stream)?;
    Ok((engine, d.pricing))
}

/// Runs one configuration to completion.
pub fn run_single(c: &BaseConfig, run: &RunSpec, registry: &Registry) -> Result<RunReport> {
    let (mut engine, pricing) = prepare(c, run, registry)?;
    engine.run()?;
    let meta = ReportMeta {
        scenario: run.scenario.to_string(),
        protocol: run.protocol.to_string(),
        param: run.param,
        label: run.label.to_string(),
        seed: run.seed,
    };
    engine.report(meta, &pricing)
}

/// All repetitions of one point under one protocol, merged.
pub fn run_point(
    spec: &ScenarioSpec,
    point: &Point,
    protocol: &str,
    registry: &Registry,
) -> Result<RunReport> {
    let mut merged: Option<RunReport> = None;
    for rep in 0..spec.repetitions {
        let run = RunSpec {
            scenario: spec.kind.name(),
            label: &point.label,
            param: point.param,
            protocol,
            seed: point_seed(spec.seed, spec.kind, point.index, rep),
            workload_seed: workload_seed(spec.seed, spec.kind, rep),
            audit: false,
            trace: false,
        };
        let r = run_single(&point.config, &run, registry)?;
        match &mut merged {
            None => merged = Some(r),
            Some(m) => m.merge(&r)?,
        }
    }
    Ok(merged.expect("at least one repetition"))
}

/// Runs every point (or only `only`) under every listed protocol, in
/// parallel over at most `workers` threads. Reports come back in
/// point-major, protocol-minor order.
pub fn run_scenario(
    spec: &ScenarioSpec,
    registry: &Registry,
    only: Option<usize>,
    workers: Option<usize>,
) -> Result<Vec<RunReport>> {
    let points = spec.points()?;
    for p in &spec.protocols {
        registry.get(p)?;
    }
    let points: Vec<&Point> = match only {
        Some(i) => vec![points.get(i).ok_or_else(|| {
            Error::config(format!("point {i} outside axis of {} values", points.len()))
        })?],
        None => points.iter().collect(),
    };
    // validate every deployment before spending time on any run
    for p in &points {
        for proto in &spec.protocols {
            let info = registry.get(proto)?;
            Deployment::build(&p.config, |r| (info.scope)(r, &p.config.protocol_params), 0)
                .map_err(|e| {
                    Error::config(format!(
                        "{} point {} ({}): {e}",
                        spec.kind, p.index, p.label
                    ))
                })?;
        }
    }
    let jobs: Vec<(&Point, &str)> = points
        .iter()
        .flat_map(|p| spec.protocols.iter().map(move |proto| (*p, proto.as_str())))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::config(format!("worker pool: {e}")))?;
    pool.install(|| {
        jobs.par_iter()
            .map(|(p, proto)| run_point(spec, p, proto, registry))
            .collect()
    })
}
