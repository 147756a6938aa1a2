//! Command-line surface: generate instances, solve and validate schedules,
//! compare methods against the exhaustive oracle, run Monte Carlo sweeps,
//! and render Gantt charts.
//!
//! Every randomized command takes an explicit `--seed` or derives one from
//! the config's master seed; nothing is ever seeded from the clock.
//!
//! Exit codes: 0 success, 2 parse/config error, 3 infeasible schedule,
//! 4 size guard exceeded.

mod render;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dqc_sched_core::bench::{
    self, generate_instance, instance_hash, run_sweep, table2_experiment, BenchError,
    ExperimentConfig,
};
use dqc_sched_core::cutter::CutError;
use dqc_sched_core::feasibility::validate;
use dqc_sched_core::model::{Instance, ModelError};
use dqc_sched_core::rational::Rational;
use dqc_sched_core::seed::derive_seed;
use dqc_sched_core::solvers::{run_variant, SolveError, SolverConfig, Variant};
use dqc_sched_core::timeline::ScheduleDocument;

#[derive(Parser)]
#[command(
    name = "dqc-sched",
    about = "Deadline-aware scheduling of cut quantum circuits on heterogeneous QPU fleets",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic instance from an experiment config.
    Generate(GenerateArgs),
    /// Solve an instance with one scheduling variant.
    Solve(SolveArgs),
    /// Check a schedule against every constraint; exit 0 iff feasible.
    Validate(ValidateArgs),
    /// Run all eight methods on one seeded instance and tabulate them.
    Compare(CompareArgs),
    /// Monte Carlo sweep over request counts (and deadline factors).
    Sweep(SweepArgs),
    /// Render a schedule as an SVG Gantt chart or a fragment CSV.
    Render(RenderArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Experiment config JSON; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of circuit requests (default: first configured count).
    #[arg(long)]
    requests: Option<usize>,
    /// Monte Carlo run index used in seed derivation.
    #[arg(long, default_value_t = 0)]
    run_index: u64,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output instance path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    /// proposed | shot-agnostic | dependency-agnostic |
    /// dependency-and-shot-agnostic | greedy | list | random | exhaustive
    #[arg(long)]
    variant: String,
    /// Solver seed; derived from the instance seed when omitted.
    #[arg(long)]
    seed: Option<u64>,
    /// Experiment config (compiler settings for re-cutting variants,
    /// annealer defaults).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Objective weight for the earliness bonus, e.g. "0.1" or "1/7".
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    sa_tau0: Option<f64>,
    #[arg(long)]
    sa_taumin: Option<f64>,
    #[arg(long)]
    sa_cooling: Option<f64>,
    #[arg(long)]
    sa_iters: Option<u32>,
    /// Schedule output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where to write the re-cut instance when the variant regenerates one.
    #[arg(long)]
    emit_instance: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    schedule: PathBuf,
    /// Violations JSON output (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Experiment config describing the seeded comparison instance.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for table2.csv and the instance document.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for raw.csv and agg.csv.
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated variant list (default: all but exhaustive).
    #[arg(long)]
    variants: Option<String>,
    /// Worker threads for Monte Carlo runs (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    schedule: PathBuf,
    /// svg | csv
    #[arg(long, default_value = "svg")]
    format: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Error carrying the process exit code.
struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn parse(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }

    fn infeasible(message: impl Into<String>) -> Self {
        CliError { code: 3, message: message.into() }
    }

    fn guard(message: impl Into<String>) -> Self {
        CliError { code: 4, message: message.into() }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::parse(e.to_string())
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Cut(CutError::RejectionCapExceeded { .. }) => {
                CliError::guard(e.to_string())
            }
            _ => CliError::parse(e.to_string()),
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::Guard(_) => CliError::guard(e.to_string()),
            SolveError::Cut(CutError::RejectionCapExceeded { .. }) => {
                CliError::guard(e.to_string())
            }
            _ => CliError::parse(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::parse(format!("io error: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(args) => generate(args),
        Command::Solve(args) => solve(args),
        Command::Validate(args) => validate_cmd(args),
        Command::Compare(args) => compare(args),
        Command::Sweep(args) => sweep(args),
        Command::Render(args) => render_cmd(args),
    }
}

fn log_level() -> u8 {
    match std::env::var("DQC_SCHED_LOG").as_deref() {
        Ok("debug") => 2,
        Ok("info") => 1,
        _ => 0,
    }
}

fn info(msg: impl AsRef<str>) {
    if log_level() >= 1 {
        eprintln!("info: {}", msg.as_ref());
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<ExperimentConfig, CliError> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p)?;
            Ok(ExperimentConfig::from_json(&text)?)
        }
    }
}

fn load_instance(path: &Path) -> Result<Instance, CliError> {
    let text = fs::read_to_string(path)?;
    Ok(Instance::from_json(&text)?)
}

fn write_or_print(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent() {
                if !dir.as_os_str().is_empty() {
                    fs::create_dir_all(dir)?;
                }
            }
            fs::write(path, content)?;
            Ok(())
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn generate(args: GenerateArgs) -> Result<(), CliError> {
    let mut cfg = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    let requests = args
        .requests
        .or_else(|| cfg.request_counts.first().copied())
        .ok_or_else(|| CliError::parse("no request count configured"))?;
    let dspec = cfg
        .deadline_cells()
        .first()
        .copied()
        .ok_or_else(|| CliError::parse("no deadline cell configured"))?;
    let inst = generate_instance(&cfg, requests, &dspec, args.run_index)?;
    info(format!("instance hash {}", instance_hash(&inst)));
    write_or_print(&args.out, &inst.to_json())
}

fn variant_position(variant: Variant) -> u64 {
    Variant::ALL.iter().position(|&v| v == variant).unwrap_or(0) as u64
}

fn solve(args: SolveArgs) -> Result<(), CliError> {
    let variant = Variant::from_name(&args.variant)
        .ok_or_else(|| CliError::parse(format!("unknown variant {:?}", args.variant)))?;
    let inst = load_instance(&args.instance)?;
    let cfg = load_config(&args.config)?;

    let seed = args
        .seed
        .unwrap_or_else(|| derive_seed(inst.seed, &[0x50, variant_position(variant)]));
    let mut scfg: SolverConfig = cfg.solver_config(seed);
    if let Some(alpha) = &args.alpha {
        let r: Rational = alpha
            .parse()
            .map_err(|e: String| CliError::parse(format!("--alpha: {e}")))?;
        scfg.alpha = Some(r);
    }
    if let Some(v) = args.sa_tau0 {
        scfg.sa.tau0 = v;
    }
    if let Some(v) = args.sa_taumin {
        scfg.sa.tau_min = v;
    }
    if let Some(v) = args.sa_cooling {
        scfg.sa.cooling = v;
    }
    if let Some(v) = args.sa_iters {
        scfg.sa.iters_per_temp = v;
    }

    let result = run_variant(&inst, variant, &scfg, &cfg.compiler)?;
    let target = result.instance.as_ref().unwrap_or(&inst);

    println!(
        "variant {} served {}/{} objective {} makespan {} wall {}ms",
        variant.name(),
        result.metrics.served_count,
        target.circuit_count(),
        result.metrics.objective,
        result.metrics.makespan,
        result.wall_time_ms
    );

    if let Some(regen) = &result.instance {
        match &args.emit_instance {
            Some(path) => {
                fs::write(path, regen.to_json())?;
                info(format!("re-cut instance written to {}", path.display()));
            }
            None => info(
                "this variant re-cut the instance; pass --emit-instance to keep the regenerated workload",
            ),
        }
    }

    let doc = ScheduleDocument::new(result.schedule, Some(result.report));
    write_or_print(&args.out, &doc.to_json())
}

fn validate_cmd(args: ValidateArgs) -> Result<(), CliError> {
    let inst = load_instance(&args.instance)?;
    let text = fs::read_to_string(&args.schedule)?;
    let doc = ScheduleDocument::from_json(&text)?;
    let violations = validate(&inst, &doc.schedule);
    let body =
        serde_json::to_string_pretty(&violations).map_err(|e| CliError::parse(e.to_string()))?;
    write_or_print(&args.out, &format!("{body}\n"))?;
    if violations.is_empty() {
        Ok(())
    } else {
        Err(CliError::infeasible(format!(
            "{} violations found",
            violations.len()
        )))
    }
}

fn compare(args: CompareArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.config)?;
    let (inst, rows) = table2_experiment(&cfg)?;
    print!("{}", bench::table2_text(&rows));
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("table2.csv"), bench::table2_csv(&rows))?;
        fs::write(dir.join("instance.json"), inst.to_json())?;
        info(format!("comparison written to {}", dir.display()));
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), CliError> {
    let mut cfg = load_config(&args.config)?;
    if let Some(workers) = args.workers {
        cfg.workers = workers;
    }
    let variants: Vec<Variant> = match &args.variants {
        None => Variant::ALL
            .into_iter()
            .filter(|v| *v != Variant::Exhaustive)
            .collect(),
        Some(spec) => spec
            .split(',')
            .map(|name| {
                Variant::from_name(name.trim())
                    .ok_or_else(|| CliError::parse(format!("unknown variant {name:?}")))
            })
            .collect::<Result<_, _>>()?,
    };
    let result = run_sweep(&cfg, &variants)?;
    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("raw.csv"), result.raw_csv())?;
    fs::write(args.out.join("agg.csv"), result.agg_csv())?;
    let failures = result.rows.iter().filter(|r| r.error.is_some()).count();
    println!(
        "sweep complete: {} rows, {} cells, {} failures -> {}",
        result.rows.len(),
        result.cells.len(),
        failures,
        args.out.display()
    );
    Ok(())
}

fn render_cmd(args: RenderArgs) -> Result<(), CliError> {
    let inst = load_instance(&args.instance)?;
    let text = fs::read_to_string(&args.schedule)?;
    let doc = ScheduleDocument::from_json(&text)?;
    let format = match args.format.as_str() {
        "svg" => render::RenderFormat::Svg,
        "csv" => render::RenderFormat::Csv,
        other => return Err(CliError::parse(format!("unknown format {other:?}"))),
    };
    let body = render::render(&inst, &doc, format).map_err(CliError::infeasible)?;
    write_or_print(&args.out, &body)
}
