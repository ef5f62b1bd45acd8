//! Command-line front-end: validate inputs, run single simulations,
//! sweep batches of mappings and generate the eScience case study.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 validation/argument failure,
//! 3 simulation failure. Logging is controlled by `TASKMAPPER_LOG`
//! (off|info|debug, default off).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use taskmapper_core::appmodel::{normalize_application, parse_application, ApplicationModel};
use taskmapper_core::error::Error;
use taskmapper_core::escience::{generate_escience, EscienceProfile};
use taskmapper_core::mapping::{serialize_mapping, Mapping, StrategySpec};
use taskmapper_core::metrics::{csv_header, csv_row, format_sig9, render_batch_csv, BatchRow};
use taskmapper_core::platform::{parse_platform, PlatformModel};
use taskmapper_core::simkernel::{simulate_with, SimulateOptions};
use taskmapper_core::trace::emit_paje;
use taskmapper_core::write_application;

#[derive(Debug, Parser)]
#[command(
    name = "taskmapper",
    about = "Simulate static mappings of task-graph applications onto cloud platforms",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and validate an application, a platform and optionally a mapping.
    Validate(ValidateArgs),
    /// Simulate one mapping and write result files.
    Simulate(SimulateArgs),
    /// Evaluate a batch of seeded mappings and write a CSV table.
    Batch(BatchArgs),
    /// Generate an application model file.
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// Application file.
    #[arg(long)]
    app: PathBuf,
    /// Platform file.
    #[arg(long)]
    platform: PathBuf,
    /// Mapping strategy or `file:<path>` to validate against the pair.
    #[arg(long)]
    mapping: Option<String>,
    /// Seed for seeded strategies.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Let built-in strategies place work on the frontend host.
    #[arg(long, default_value_t = false)]
    allow_frontend: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    app: PathBuf,
    #[arg(long)]
    platform: PathBuf,
    /// Mapping strategy: random, round-robin, greedy-load,
    /// all-on:<host> or file:<path>.
    #[arg(long)]
    mapping: String,
    /// Seed for seeded strategies.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Also write a Paje timeline trace.
    #[arg(long, default_value_t = false)]
    trace: bool,
    #[arg(long, default_value_t = false)]
    allow_frontend: bool,
}

#[derive(Debug, Args)]
struct BatchArgs {
    #[arg(long)]
    app: PathBuf,
    #[arg(long)]
    platform: PathBuf,
    /// Mapping strategy evaluated once per seed.
    #[arg(long, default_value = "random")]
    strategy: String,
    /// Number of mappings (seeds seed..seed+n-1).
    #[arg(long)]
    n: u64,
    /// First seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path.
    #[arg(long)]
    csv: PathBuf,
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, default_value_t = false)]
    allow_frontend: bool,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Generate the eScience pipeline model.
    #[arg(long, default_value_t = false)]
    escience: bool,
    /// Number of parallel MS2 tasks.
    #[arg(long)]
    ms2: u64,
    /// Output application file.
    #[arg(long)]
    out: PathBuf,
    /// Per-stage work override: eight comma-separated values
    /// (AdaptState, GenerateIndividuals, GenerateInputDataSets, MS2,
    /// CalculateFitness, RankIndividuals, CheckTermination, WriteResults).
    #[arg(long)]
    works: Option<String>,
    /// Per-edge label size override: seven comma-separated byte counts
    /// (stage edges in pipeline order; fan-out/fan-in sizes apply per
    /// MS2 task).
    #[arg(long)]
    label_sizes: Option<String>,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io { .. } => 1,
        Error::Deadlock(_) => 3,
        _ => 2,
    }
}

fn load_app(path: &PathBuf) -> Result<ApplicationModel, Error> {
    let app = parse_application(path)?;
    normalize_application(app)
}

fn load_inputs(
    app: &PathBuf,
    platform: &PathBuf,
) -> Result<(ApplicationModel, PlatformModel), Error> {
    Ok((load_app(app)?, parse_platform(platform)?))
}

fn resolve_mapping(
    spec_str: &str,
    app: &ApplicationModel,
    platform: &PlatformModel,
    seed: u64,
    allow_frontend: bool,
) -> Result<(StrategySpec, Mapping), Error> {
    let spec: StrategySpec = spec_str.parse()?;
    let mapping = spec.resolve(app, platform, seed, allow_frontend)?;
    Ok((spec, mapping))
}

fn mapping_id(spec: &StrategySpec, seed: u64) -> String {
    match spec {
        StrategySpec::Random => format!("random-{seed}"),
        other => other.to_string(),
    }
}

fn cmd_validate(args: &ValidateArgs) -> Result<(), Error> {
    let (app, platform) = load_inputs(&args.app, &args.platform)?;
    println!(
        "application: ok ({} tasks, {} runnables, {} labels)",
        app.task_count(),
        app.runnable_count(),
        app.labels.len()
    );
    println!(
        "platform: ok ({} hosts, {} links, frontend {})",
        platform.hosts.len(),
        platform.links.len(),
        platform.frontend().id
    );
    if let Some(spec_str) = &args.mapping {
        let (spec, mapping) =
            resolve_mapping(spec_str, &app, &platform, args.seed, args.allow_frontend)?;
        println!(
            "mapping: ok ({} via {spec}, {} runnables, {} labels mapped)",
            mapping_id(&spec, args.seed),
            mapping.runnable_to_host.len(),
            mapping.label_to_host.len()
        );
    }
    Ok(())
}

fn write_file(path: &std::path::Path, contents: String) -> Result<(), Error> {
    std::fs::write(path, contents)
        .map_err(|e| Error::Io { path: path.display().to_string(), source: e })
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), Error> {
    let (app, platform) = load_inputs(&args.app, &args.platform)?;
    let (spec, mapping) =
        resolve_mapping(&args.mapping, &app, &platform, args.seed, args.allow_frontend)?;

    let options = SimulateOptions { record_timeline: true, keep_intervals: false };
    let (result, diag) = simulate_with(&app, &platform, &mapping, options)?;
    log::info!(
        "kernel: {} events in {:?} (conservation err {:.2e}, capacity err {:.2e})",
        diag.event_count,
        result.sim_wall_time,
        diag.max_conservation_error,
        diag.max_capacity_overshoot
    );

    std::fs::create_dir_all(&args.out)
        .map_err(|e| Error::Io { path: args.out.display().to_string(), source: e })?;

    let row = BatchRow {
        mapping_id: mapping_id(&spec, args.seed),
        seed: args.seed,
        strategy: spec.to_string(),
        result,
    };
    let mut csv = csv_header(&platform);
    csv.push_str(&csv_row(&row, &platform));
    write_file(&args.out.join("result.csv"), csv)?;

    let mut energy = String::new();
    for (host, joules) in &row.result.per_host_energy {
        energy.push_str(&format!("{host} {}\n", format_sig9(*joules)));
    }
    energy.push_str(&format!("total {}\n", format_sig9(row.result.total_energy)));
    write_file(&args.out.join("energy.txt"), energy)?;

    write_file(&args.out.join("mapping.json"), serialize_mapping(&mapping))?;

    if args.trace {
        emit_paje(&row.result, &platform, &mapping, args.out.join("trace.paje"))?;
    }

    println!("makespan_s {}", format_sig9(row.result.makespan));
    println!("total_energy_j {}", format_sig9(row.result.total_energy));
    Ok(())
}

fn cmd_batch(args: &BatchArgs) -> Result<(), Error> {
    if args.n < 1 {
        return Err(Error::Argument("--n must be >= 1".into()));
    }
    let (app, platform) = load_inputs(&args.app, &args.platform)?;
    let spec: StrategySpec = args.strategy.parse()?;

    let jobs = args
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
        .max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Argument(format!("cannot build worker pool: {e}")))?;

    let started = std::time::Instant::now();
    let seeds: Vec<u64> = (args.seed..args.seed + args.n).collect();
    let options = SimulateOptions { record_timeline: false, keep_intervals: false };
    let rows: Result<Vec<BatchRow>, Error> = pool.install(|| {
        use rayon::prelude::*;
        seeds
            .par_iter()
            .map(|&seed| {
                let mapping = spec.resolve(&app, &platform, seed, args.allow_frontend)?;
                let (result, _) = simulate_with(&app, &platform, &mapping, options)?;
                Ok(BatchRow {
                    mapping_id: mapping_id(&spec, seed),
                    seed,
                    strategy: spec.to_string(),
                    result,
                })
            })
            .collect()
    });
    let rows = rows?;
    log::info!("{} simulations in {:?} on {jobs} workers", rows.len(), started.elapsed());

    write_file(&args.csv, render_batch_csv(&rows, &platform)?)?;

    let summary = taskmapper_core::summarize_batch(&rows)?;
    println!("wrote {} ({} rows)", args.csv.display(), rows.len());
    println!(
        "min_makespan_s {} id={}",
        format_sig9(summary.makespan.min),
        summary.makespan.argmin_id
    );
    println!(
        "max_makespan_s {} id={}",
        format_sig9(summary.makespan.max),
        summary.makespan.argmax_id
    );
    Ok(())
}

fn parse_list<const N: usize>(raw: &str, what: &str) -> Result<[f64; N], Error> {
    let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(Error::Argument(format!(
            "{what} expects {N} comma-separated values, got {}",
            parts.len()
        )));
    }
    let mut out = [0.0; N];
    for (i, p) in parts.iter().enumerate() {
        out[i] = p
            .parse()
            .map_err(|_| Error::Argument(format!("{what}: `{p}` is not a number")))?;
    }
    Ok(out)
}

fn cmd_generate(args: &GenerateArgs) -> Result<(), Error> {
    if !args.escience {
        return Err(Error::Argument("only --escience generation is available".into()));
    }
    if args.ms2 < 1 {
        return Err(Error::Argument(format!("--ms2 must be >= 1, got {}", args.ms2)));
    }
    let mut profile = EscienceProfile::default();
    if let Some(raw) = &args.works {
        profile.stage_works = parse_list::<8>(raw, "--works")?;
    }
    if let Some(raw) = &args.label_sizes {
        let sizes = parse_list::<7>(raw, "--label-sizes")?;
        for (i, s) in sizes.iter().enumerate() {
            if *s < 0.0 || s.fract() != 0.0 {
                return Err(Error::Argument(format!(
                    "--label-sizes: `{s}` is not a non-negative integer"
                )));
            }
            profile.label_sizes[i] = *s as u64;
        }
    }
    let model = generate_escience(args.ms2 as usize, &profile)?;
    write_application(&model, &args.out)?;
    println!(
        "wrote {} ({} tasks, {} labels)",
        args.out.display(),
        model.task_count(),
        model.labels.len()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TASKMAPPER_LOG", "off"))
        .init();

    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Validate(args) => cmd_validate(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Batch(args) => cmd_batch(args),
        Command::Generate(args) => cmd_generate(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
