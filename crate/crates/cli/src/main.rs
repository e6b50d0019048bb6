//! Command-line front end for the node simulator: daily scenario runs,
//! parameter sweeps, figures of merit, radio frame decoding, config
//! validation and the built-in acceptance suite.
//!
//! Exit codes: 0 on success, 2 for configuration problems, 3 for
//! simulation or I/O failures, 4 when the acceptance suite fails.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use samurai_core::config::SimConfig;
use samurai_core::pneuro::{sustained_gops, LayerKind};
use samurai_core::power::{comparison_rows, compute_foms, matches_printed, PowerMode};
use samurai_core::scenario::{self, RunArtifacts, ScenarioError, TraceOptions, Variant};
use samurai_core::selftest::run_acceptance;
use samurai_core::wur::{decode_frame, parse_sample_text};

const EXIT_CONFIG: u8 = 2;
const EXIT_SIM: u8 = 3;
const EXIT_ACCEPTANCE: u8 = 4;

#[derive(Parser)]
#[command(
    name = "samurai-sim",
    version,
    about = "Deterministic power and timing simulator for a dual-subsystem sensor node"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one day and write the report and traces.
    Run(RunArgs),
    /// Simulate one day per value of a swept parameter.
    Sweep(SweepArgs),
    /// Print figures of merit alongside the published comparison.
    Fom(FomArgs),
    /// Decode an on-off-keyed sample stream from a text file.
    DecodeOok(DecodeArgs),
    /// Check a configuration file, or write out the defaults.
    Validate(ValidateArgs),
    /// Run the built-in acceptance suite.
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct Common {
    /// Configuration file (JSON); built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for generated files.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Seed for the jitter and estimation random streams.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TraceKind {
    Power,
    Handshake,
    Events,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Edge,
    Cloud,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Variant {
        match v {
            VariantArg::Edge => Variant::Edge,
            VariantArg::Cloud => Variant::Cloud,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Which end of the system classifies the frames.
    #[arg(long, value_enum, default_value_t = VariantArg::Edge)]
    variant: VariantArg,
    /// Trace streams to record (repeatable).
    #[arg(long, value_enum)]
    trace: Vec<TraceKind>,
    /// Stdout format for the report.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value_t = VariantArg::Edge)]
    variant: VariantArg,
    /// Dotted parameter name, e.g. scenario.filter.pass_rate.
    #[arg(long)]
    parameter: String,
    /// Comma-separated values to sweep over.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    /// Output format for the sweep table.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct FomArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct DecodeArgs {
    #[command(flatten)]
    common: Common,
    /// Text file of 0/1 samples, whitespace separated or contiguous.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    common: Common,
    /// Write the built-in defaults to configs/default.json and exit.
    #[arg(long)]
    write_default: bool,
}

#[derive(Args)]
struct SelftestArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

/// Failure carrying its process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl ToString) -> Self {
        Failure {
            code: EXIT_CONFIG,
            message: message.to_string(),
        }
    }

    fn sim(message: impl ToString) -> Self {
        Failure {
            code: EXIT_SIM,
            message: message.to_string(),
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Invalid { .. }
            | ScenarioError::UnknownParameter(_)
            | ScenarioError::UnknownNetwork(_) => Failure::config(e),
            other => Failure::sim(other),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Fom(args) => cmd_fom(args),
        Command::DecodeOok(args) => cmd_decode(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Selftest(args) => cmd_selftest(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_config(common: &Common) -> Result<SimConfig, Failure> {
    match &common.config {
        Some(path) => SimConfig::load(path).map_err(Failure::config),
        None => Ok(SimConfig::default()),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Failure::sim(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| Failure::sim(format!("{}: {e}", path.display())))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn breakdown_csv(report: &samurai_core::DailyReport) -> String {
    let mut out = String::from("section,name,seconds,energy_j,fraction\n");
    for c in &report.components {
        let _ = writeln!(out, "component,{},,{:.9e},{:.6}", c.name, c.energy_j, c.fraction);
    }
    for m in &report.mode_residency {
        let _ = writeln!(out, "mode,{},{:.6},{:.9e},", m.mode, m.seconds, m.energy_j);
    }
    for d in &report.node_domains {
        let _ = writeln!(out, "domain,{},,{:.9e},", d.domain, d.energy_j);
    }
    out
}

fn write_traces(args: &RunArgs, artifacts: &RunArtifacts) -> Result<(), Failure> {
    let dir = &args.common.out_dir;
    if args.trace.contains(&TraceKind::Power) {
        let mut csv = String::from("time_ps,mode,domain,voltage_V,power_W\n");
        for r in &artifacts.power_trace {
            let _ = writeln!(csv, "{},{},{},{:.6},{:.9e}", r.time_ps, r.mode, r.domain, r.voltage_v, r.power_w);
        }
        write_file(&dir.join("power.csv"), &csv)?;
    }
    if args.trace.contains(&TraceKind::Handshake) {
        let mut csv = String::from("time_ps,signal,level\n");
        for r in &artifacts.handshake_trace {
            let _ = writeln!(csv, "{},{},{}", r.time_ps, r.signal.name(), r.level as u8);
        }
        write_file(&dir.join("handshake.csv"), &csv)?;
    }
    if args.trace.contains(&TraceKind::Events) {
        let mut csv = String::from("time_ps,seq,target,payload_kind\n");
        for r in &artifacts.event_trace {
            let _ = writeln!(csv, "{},{},{},{}", r.time_ps, r.seq, r.target, r.payload_kind);
        }
        write_file(&dir.join("events.csv"), &csv)?;
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.common)?;
    let traces = TraceOptions {
        power: args.trace.contains(&TraceKind::Power),
        handshake: args.trace.contains(&TraceKind::Handshake),
        events: args.trace.contains(&TraceKind::Events),
    };
    let variant: Variant = args.variant.into();
    let artifacts = scenario::run_day_with(&cfg, variant, args.common.seed, traces)?;
    let report = &artifacts.report;

    let json = serde_json::to_string_pretty(report).map_err(Failure::sim)?;
    let base = format!("report-{}", variant.name());
    write_file(&args.common.out_dir.join(format!("{base}.json")), &json)?;
    let csv = breakdown_csv(report);
    write_file(&args.common.out_dir.join(format!("{base}-breakdown.csv")), &csv)?;
    write_traces(&args, &artifacts)?;

    match args.format {
        Format::Json => println!("{json}"),
        Format::Csv => print!("{csv}"),
    }
    Ok(())
}

fn sweep_threads(n_values: usize) -> Result<usize, Failure> {
    match std::env::var("SAMURAI_SIM_THREADS") {
        Ok(raw) => {
            let cap: usize = raw
                .trim()
                .parse()
                .map_err(|_| Failure::config(format!("SAMURAI_SIM_THREADS is not a count: {raw:?}")))?;
            if cap == 0 {
                return Err(Failure::config("SAMURAI_SIM_THREADS must be at least 1"));
            }
            Ok(cap.min(n_values.max(1)))
        }
        Err(_) => Ok(n_values.max(1)),
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.common)?;
    let threads = sweep_threads(args.values.len())?;
    let reports = scenario::sweep(
        &cfg,
        args.variant.into(),
        &args.parameter,
        &args.values,
        args.common.seed,
        threads,
    )?;

    let (path, payload) = match args.format {
        Format::Json => {
            let rows: Vec<serde_json::Value> = args
                .values
                .iter()
                .zip(&reports)
                .map(|(v, r)| {
                    serde_json::json!({
                        "value": v,
                        "report": r,
                    })
                })
                .collect();
            let body = serde_json::to_string_pretty(&serde_json::json!({
                "parameter": args.parameter,
                "rows": rows,
            }))
            .map_err(Failure::sim)?;
            (args.common.out_dir.join("sweep.json"), body)
        }
        Format::Csv => {
            let mut csv = String::from(
                "value,avg_power_w,total_energy_j,detections,classifications,transmissions,messages\n",
            );
            for (v, r) in args.values.iter().zip(&reports) {
                let _ = writeln!(
                    csv,
                    "{},{:.9e},{:.9e},{},{},{},{}",
                    v,
                    r.avg_power_w,
                    r.total_energy_j,
                    r.counts.detections,
                    r.counts.classifications,
                    r.counts.transmissions,
                    r.counts.messages
                );
            }
            (args.common.out_dir.join("sweep.csv"), csv)
        }
    };
    write_file(&path, &payload)?;
    print!("{payload}");
    if args.format == Format::Json {
        println!();
    }
    Ok(())
}

fn cmd_fom(args: FomArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.common)?;
    let idle_w = cfg.power.mode_power_w(PowerMode::Idle);
    let peak_gops = sustained_gops(
        &cfg.cluster,
        LayerKind::Fc,
        &cfg.efficiency,
        cfg.power.peak_freq_hz,
    );
    // Retentive storage: the dedicated data memory plus the shared
    // memory, which also holds state through sleep.
    let retention_kb =
        (cfg.power.retention_bytes + samurai_core::tpsram::MEM_BYTES as u64) as f64 / 1024.0;
    let (fom1, fom2, fom3) = compute_foms(cfg.power.peak_w, idle_w, peak_gops, retention_kb)
        .map_err(Failure::config)?;

    #[derive(serde::Serialize)]
    struct Row {
        label: &'static str,
        idle_w: f64,
        peak_gops: f64,
        retention_kb: f64,
        fom2: f64,
        fom3: f64,
        printed_fom2: f64,
        printed_fom3: f64,
        matches: bool,
    }
    let rows: Vec<Row> = comparison_rows()
        .into_iter()
        .map(|r| {
            let (_, f2, f3) = compute_foms(1.0, r.idle_w, r.peak_gops, r.retention_kb)
                .expect("published rows have positive idle power");
            Row {
                label: r.label,
                idle_w: r.idle_w,
                peak_gops: r.peak_gops,
                retention_kb: r.retention_kb,
                fom2: f2,
                fom3: f3,
                printed_fom2: r.printed_fom2.0,
                printed_fom3: r.printed_fom3.0,
                matches: matches_printed(f2, r.printed_fom2) && matches_printed(f3, r.printed_fom3),
            }
        })
        .collect();

    match args.format {
        Format::Json => {
            let body = serde_json::json!({
                "this_config": {
                    "peak_w": cfg.power.peak_w,
                    "idle_w": idle_w,
                    "peak_gops": peak_gops,
                    "retention_kb": retention_kb,
                    "fom1_peak_to_idle": fom1,
                    "fom2_gops_per_uw_idle": fom2,
                    "fom3_fom2_x_retention_kb": fom3,
                },
                "comparison": rows,
            });
            println!(
                "{}",
                serde_json::to_string_pretty(&body).map_err(Failure::sim)?
            );
        }
        Format::Csv => {
            let mut csv =
                String::from("label,idle_w,peak_gops,retention_kb,fom2,fom3,printed_fom2,printed_fom3,matches\n");
            let _ = writeln!(
                csv,
                "this_config,{idle_w:.9e},{peak_gops:.4},{retention_kb},{fom2:.4},{fom3:.4},,,"
            );
            for r in rows {
                let _ = writeln!(
                    csv,
                    "{},{:.9e},{},{},{:.4},{:.4},{},{},{}",
                    r.label,
                    r.idle_w,
                    r.peak_gops,
                    r.retention_kb,
                    r.fom2,
                    r.fom3,
                    r.printed_fom2,
                    r.printed_fom3,
                    r.matches
                );
            }
            print!("{csv}");
        }
    }
    Ok(())
}

fn cmd_decode(args: DecodeArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.common)?;
    let text = fs::read_to_string(&args.input)
        .map_err(|e| Failure::config(format!("{}: {e}", args.input.display())))?;
    let samples = parse_sample_text(&text).map_err(Failure::config)?;
    match decode_frame(&cfg.ook, &samples) {
        Some((id, payload)) => {
            let matches_wake_id = id == cfg.ook.wake_id;
            match args.format {
                Format::Json => println!(
                    "{}",
                    serde_json::json!({
                        "id": id,
                        "payload": payload,
                        "matches_wake_id": matches_wake_id,
                    })
                ),
                Format::Csv => {
                    println!("id,payload,matches_wake_id");
                    println!("{id},{payload},{matches_wake_id}");
                }
            }
            Ok(())
        }
        None => Err(Failure::sim("no frame found in the sample stream")),
    }
}

fn cmd_validate(args: ValidateArgs) -> Result<(), Failure> {
    if args.write_default {
        let cfg = SimConfig::default();
        let path = PathBuf::from("configs/default.json");
        write_file(&path, &(cfg.to_json_pretty() + "\n"))?;
        println!("ok {}", cfg.sha256_hex());
        return Ok(());
    }
    let cfg = load_config(&args.common)?;
    println!("ok {}", cfg.sha256_hex());
    Ok(())
}

fn cmd_selftest(args: SelftestArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.common)?;
    let results = run_acceptance(&cfg);
    let failed: Vec<u32> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    match args.format {
        Format::Json => println!(
            "{}",
            serde_json::to_string_pretty(&results).map_err(Failure::sim)?
        ),
        Format::Csv => {
            println!("id,name,passed");
            for r in &results {
                println!("{},{},{}", r.id, r.name, r.passed);
            }
        }
    }
    for r in &results {
        eprintln!(
            "criterion {:2} {:32} {}",
            r.id,
            r.name,
            if r.passed { "PASS" } else { "FAIL" }
        );
        if !r.passed {
            for c in r.checks.iter().filter(|c| !c.passed) {
                eprintln!("    {}: {}", c.label, c.detail);
            }
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_ACCEPTANCE,
            message: format!("acceptance criteria failed: {failed:?}"),
        })
    }
}
