//! The `geobench` command line.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{info, Level};

use crate::config::{load_scenario, RunConfig};
use crate::error::{Error, Result};
use crate::metrics::{ClassMix, ReportMeta, RunReport};
use crate::model::{classify, PlacementMap};
use crate::netsim::Engine;
use crate::protocols::Registry;
use crate::scenarios::{
    prepare, prepare_replay, run_scenario, Deployment, Preset, RunSpec, ScenarioKind, ScenarioSpec,
};
use crate::seed::{derive, streams};
use crate::workload::{build_stream, StreamRecord};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_INTERNAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "geobench",
    version,
    about = "Geo-distributed OLTP protocol benchmark"
)]
pub struct Cli {
    /// Run config file (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Defaults used when no config file is given, and for named scenarios.
    #[arg(long, global = true, default_value = "desk")]
    pub preset: Preset,
    /// Worker threads for sweeps; defaults to the number of cores.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output file (generate) or directory (run, report).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a transaction stream as newline-delimited JSON.
    Generate {
        /// Stop after this many transactions.
        #[arg(long)]
        count: Option<u64>,
    },
    /// Re-derive the class of every transaction in a stream file.
    Classify { stream: PathBuf },
    /// Execute a scenario sweep or a single run.
    Run {
        /// Scenario kind name or scenario file.
        #[arg(long)]
        scenario: Option<String>,
        /// Run only this sweep point.
        #[arg(long)]
        point: Option<usize>,
        /// Protocol for a single run; overrides the config.
        #[arg(long)]
        protocol: Option<String>,
    },
    /// Turn a directory of run reports into per-scenario plot data.
    Report { dir: PathBuf },
    /// List registered protocols.
    ListProtocols,
}

/// Parses arguments, runs, and maps errors onto exit codes.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("GEOBENCH_LOG"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match execute(&cli, &Registry::with_defaults()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Engine(_) => EXIT_INTERNAL,
        _ => EXIT_CONFIG,
    }
}

pub fn execute(cli: &Cli, registry: &Registry) -> Result<ExitCode> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::preset(cli.preset),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match &cli.command {
        Command::Generate { count } => {
            let out = cli
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from("stream.ndjson"));
            let mix = generate(&cfg, registry, *count, &out)?;
            println!("{}", mix_summary(&mix));
            Ok(ExitCode::SUCCESS)
        }
        Command::Classify { stream } => {
            let (mix, mismatches) = classify_file(&cfg, registry, stream)?;
            println!("{}", mix_summary(&mix));
            if mismatches > 0 {
                eprintln!(
                    "error: {mismatches} transactions classify differently from their record"
                );
                return Ok(ExitCode::from(EXIT_INTERNAL));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Run {
            scenario,
            point,
            protocol,
        } => {
            if let Some(p) = protocol {
                cfg.protocol = p.clone();
            }
            let out = cli
                .out
                .clone()
                .or_else(|| cfg.out.clone())
                .unwrap_or_else(|| PathBuf::from("geobench-out"));
            let spec = match scenario {
                Some(s) => Some(resolve_scenario(s, cli.preset, cfg.seed)?),
                None => cfg.scenario_spec(cli.preset)?,
            };
            let reports = match spec {
                Some(mut spec) => {
                    if let Some(s) = cli.seed {
                        spec.seed = s;
                    }
                    run_sweep(&spec, registry, *point, cli.workers, &out)?
                }
                None => {
                    if point.is_some() {
                        return Err(Error::config("--point needs a scenario"));
                    }
                    vec![run_one(&cfg, registry, &out)?]
                }
            };
            for r in &reports {
                println!(
                    "{} {} {}: {:.1} txn/s, p50 {}, {:.4} GB billed",
                    r.scenario,
                    r.label,
                    r.protocol,
                    r.committed_tps,
                    fmt_ms(r.p50_ms("all")),
                    r.billed_gb
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { dir } => {
            let out = cli.out.clone().unwrap_or_else(|| dir.clone());
            for path in report_dir(dir, &out)? {
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::ListProtocols => {
            for name in registry.names() {
                println!("{name}");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn fmt_ms(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.1} ms"))
        .unwrap_or_else(|| "-".into())
}

fn resolve_scenario(s: &str, preset: Preset, seed: u64) -> Result<ScenarioSpec> {
    match s.parse::<ScenarioKind>() {
        Ok(kind) => {
            let mut spec = preset.scenario(kind);
            spec.seed = seed;
            Ok(spec)
        }
        Err(_) if Path::new(s).exists() => load_scenario(Path::new(s)),
        Err(e) => Err(Error::config(format!(
            "{e}, and no scenario file {s:?} exists"
        ))),
    }
}

/// Workload seed of a single run; `generate` uses the same one so a
/// recorded stream replays under the same placement.
pub fn single_workload_seed(seed: u64) -> u64 {
    derive(seed, &[streams::WORKLOAD])
}

fn deployment(cfg: &RunConfig, registry: &Registry) -> Result<Deployment> {
    let info = registry.get(&cfg.protocol)?;
    Deployment::build(
        &cfg.setup,
        |r| (info.scope)(r, &cfg.setup.protocol_params),
        single_workload_seed(cfg.seed),
    )
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(
        File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

/// Writes the configured stream to `out` and returns its composition.
pub fn generate(
    cfg: &RunConfig,
    registry: &Registry,
    count: Option<u64>,
    out: &Path,
) -> Result<ClassMix> {
    let d = deployment(cfg, registry)?;
    let mut duration_s = cfg.setup.duration_s;
    if let Some(n) = count {
        duration_s = duration_s.max((n + 1) as f64 / cfg.setup.arrival.total_rate());
    }
    let stream = build_stream(
        &cfg.setup.workload,
        &d.placement,
        &cfg.setup.arrival,
        d.origin_weights.as_deref(),
        crate::time::secs(duration_s),
        single_workload_seed(cfg.seed),
    )?;
    let mut w = create(out)?;
    let mut mix = ClassMix::default();
    for txn in stream.take(count.unwrap_or(u64::MAX) as usize) {
        let class = classify(&txn, &d.placement)?;
        mix.add(class);
        let line =
            serde_json::to_string(&StreamRecord::from_txn(&txn, class)).expect("records serialize");
        writeln!(w, "{line}").map_err(|e| Error::io(out, e))?;
    }
    w.flush().map_err(|e| Error::io(out, e))?;
    info!("wrote {} transactions to {}", mix.total(), out.display());
    Ok(mix)
}

/// Reads a stream file; a bad line is reported with its number.
pub fn read_stream(path: &Path) -> Result<Vec<StreamRecord>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let r: StreamRecord = serde_json::from_str(&line)
            .map_err(|e| Error::config(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(r);
    }
    Ok(out)
}

/// Composition of a recorded stream under the configured placement, and
/// the number of records whose stored class disagrees.
pub fn classify_file(cfg: &RunConfig, registry: &Registry, path: &Path) -> Result<(ClassMix, u64)> {
    let d = deployment(cfg, registry)?;
    classify_records(&read_stream(path)?, &d.placement)
}

fn classify_records(records: &[StreamRecord], placement: &PlacementMap) -> Result<(ClassMix, u64)> {
    let mut mix = ClassMix::default();
    let mut mismatches = 0;
    for r in records {
        let class = classify(&r.to_txn(), placement)?;
        mix.add(class);
        if class != r.class {
            mismatches += 1;
        }
    }
    Ok((mix, mismatches))
}

pub fn mix_summary(mix: &ClassMix) -> String {
    let [lsh, fsh, mh] = mix.percentages();
    format!(
        "{} transactions: LSH {lsh:.2}%  FSH {fsh:.2}%  MH {mh:.2}%  (SP {}, MP {})",
        mix.total(),
        mix.sp,
        mix.mp
    )
}

fn report_name(r: &RunReport, index: Option<usize>) -> String {
    match index {
        Some(i) => format!("{}-{i:02}-{}.json", r.scenario, r.protocol),
        None => format!("{}-{}.json", r.scenario, r.protocol),
    }
}

fn write_reports(out: &Path, reports: &[(Option<usize>, RunReport)]) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let csv = out.join("aggregate.csv");
    let mut w = create(&csv)?;
    writeln!(w, "{}", RunReport::csv_header()).map_err(|e| Error::io(&csv, e))?;
    for (i, r) in reports {
        let path = out.join(report_name(r, *i));
        let json = serde_json::to_string_pretty(r).expect("reports serialize");
        std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
        writeln!(w, "{}", r.csv_row()).map_err(|e| Error::io(&csv, e))?;
    }
    w.flush().map_err(|e| Error::io(&csv, e))
}

/// Runs a sweep and writes one JSON report per (point, protocol) plus
/// `aggregate.csv`.
pub fn run_sweep(
    spec: &ScenarioSpec,
    registry: &Registry,
    point: Option<usize>,
    workers: Option<usize>,
    out: &Path,
) -> Result<Vec<RunReport>> {
    let reports = run_scenario(spec, registry, point, workers).map_err(|e| match e {
        Error::Engine(m) => Error::Engine(format!(
            "{m} (rerun the point alone with --point and GEOBENCH_LOG=trace to record its event trace)"
        )),
        other => other,
    })?;
    let per_point = spec.protocols.len();
    let indexed: Vec<(Option<usize>, RunReport)> = reports
        .into_iter()
        .enumerate()
        .map(|(k, r)| (Some(point.unwrap_or(k / per_point)), r))
        .collect();
    write_reports(out, &indexed)?;
    Ok(indexed.into_iter().map(|(_, r)| r).collect())
}

/// Optional files a single run writes.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimOptions<'a> {
    /// One line per processed event.
    pub trace_to: Option<&'a Path>,
    /// One JSON line per transaction outcome.
    pub outcomes_to: Option<&'a Path>,
}

fn write_outcomes(engine: &Engine, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    for o in engine.collector().outcomes().unwrap_or(&[]) {
        let line = serde_json::to_string(o).expect("outcomes serialize");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Runs the config once; only the files named in `opts` are written.
pub fn simulate(cfg: &RunConfig, registry: &Registry, opts: SimOptions) -> Result<RunReport> {
    let trace_to = opts.trace_to;
    let run = RunSpec {
        scenario: "single",
        label: &cfg.protocol,
        param: 0.0,
        protocol: &cfg.protocol,
        seed: cfg.seed,
        workload_seed: single_workload_seed(cfg.seed),
        audit: opts.outcomes_to.is_some(),
        trace: trace_to.is_some(),
    };
    let (mut engine, pricing) = match &cfg.stream {
        Some(path) => prepare_replay(&cfg.setup, &run, registry, &read_stream(path)?)?,
        None => prepare(&cfg.setup, &run, registry)?,
    };
    let result = engine.run();
    if let Some(path) = trace_to {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        engine.write_trace(path)?;
    }
    if let Err(e) = result {
        return Err(match (e, trace_to) {
            (Error::Engine(m), Some(p)) => Error::Engine(format!("{m} (trace: {})", p.display())),
            (Error::Engine(m), None) => Error::Engine(format!(
                "{m} (rerun with GEOBENCH_LOG=trace to record the trace)"
            )),
            (other, _) => other,
        });
    }
    if let Some(path) = opts.outcomes_to {
        write_outcomes(&engine, path)?;
    }
    let meta = ReportMeta {
        scenario: run.scenario.to_string(),
        protocol: cfg.protocol.clone(),
        param: run.param,
        label: run.label.to_string(),
        seed: cfg.seed,
    };
    engine.report(meta, &pricing)
}

/// Runs the config once and writes its report and `outcomes.ndjson` into
/// `out`. With `GEOBENCH_LOG=trace` the event trace goes to `out/trace.log`.
pub fn run_one(cfg: &RunConfig, registry: &Registry, out: &Path) -> Result<RunReport> {
    let trace = out.join("trace.log");
    let outcomes = out.join("outcomes.ndjson");
    let opts = SimOptions {
        trace_to: log::log_enabled!(Level::Trace).then_some(trace.as_path()),
        outcomes_to: Some(&outcomes),
    };
    let report = simulate(cfg, registry, opts)?;
    write_reports(out, &[(None, report.clone())])?;
    Ok(report)
}

/// One plot-data row.
fn plot_row(r: &RunReport) -> String {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_default();
    format!(
        "{},{},{},{:.3},{},{},{:.6},{:.6}",
        r.param,
        r.label,
        r.protocol,
        r.committed_tps,
        opt(r.p50_ms("all")),
        opt(r.p99_ms("all")),
        r.billed_gb,
        r.cost.per_10k_or_inf()
    )
}

pub const PLOT_HEADER: &str = "x,label,protocol,throughput,p50_ms,p99_ms,billed_gb,cost_per_10k";

/// Reads every `*.json` report in `dir` and writes `<scenario>.plot.csv`
/// files into `out`, rows sorted by axis value then protocol.
pub fn report_dir(dir: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::config(format!("no reports in {}", dir.display())));
    }
    let mut groups: BTreeMap<String, Vec<RunReport>> = BTreeMap::new();
    for p in &paths {
        let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        let r: RunReport = serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("{}: not a run report: {e}", p.display())))?;
        groups.entry(r.scenario.clone()).or_default().push(r);
    }
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut written = Vec::new();
    for (scenario, mut rows) in groups {
        rows.sort_by(|a, b| {
            a.param
                .total_cmp(&b.param)
                .then_with(|| a.protocol.cmp(&b.protocol))
        });
        let path = out.join(format!("{scenario}.plot.csv"));
        let mut w = create(&path)?;
        writeln!(w, "{PLOT_HEADER}").map_err(|e| Error::io(&path, e))?;
        for r in &rows {
            writeln!(w, "{}", plot_row(r)).map_err(|e| Error::io(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
