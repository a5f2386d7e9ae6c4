//! `bkquake`: run spring-block simulations, compute magnitude statistics and
//! drive the block-doubling study from the command line.
//!
//! Exit codes: 2 usage, 3 unreadable config, 4 invalid parameters, 5 I/O
//! failure, 6 simulation or analysis failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bkquake::io::{
    fmt_f64, provenance, read_catalog, write_catalog_csv, write_catalog_json, write_center_of_mass_csv,
    write_cumulative_csv, write_distance_csv, write_distribution_csv, write_fit_json, write_levels_csv, write_rate_csv,
    write_table, write_trajectory_csv, RunConfig, TOOL_VERSION,
};
use bkquake::run::{simulate, simulate_batch, RecordOptions, RunOutput};
use bkquake::scaling::run_scaling_suite;
use bkquake::stats::{build_distribution, fit_gr_slope, LogBase, MagnitudeDistribution, DEFAULT_FIT_WINDOW};
use bkquake::{EventCatalog, IntegratorConfig, ModelParams};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

const DEFAULT_SWEEP: [f64; 5] = [1.0, 1.5, 2.0, 3.0, 4.0];

#[derive(Parser)]
#[command(
    name = "bkquake",
    version,
    about = "Burridge-Knopoff spring-block earthquake simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Warm up, integrate and write the event catalog (plus optional trajectory).
    Run(RunArgs),
    /// Magnitude distributions and slope fit for one or more catalogs.
    GrStats(GrStatsArgs),
    /// Block-doubling continuum study.
    Scaling(ScalingArgs),
    /// Independent runs over a list of alpha values.
    Sweep(SweepArgs),
}

/// Overrides shared by every simulating subcommand.
#[derive(Args)]
struct Common {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    t_end: Option<f64>,
    /// Integration step.
    #[arg(long)]
    step: Option<f64>,
    /// Override the number of blocks.
    #[arg(long)]
    blocks: Option<usize>,
    /// Magnitude bin width.
    #[arg(long)]
    dm: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    alpha: Option<f64>,
    /// Also write the stride-sampled trajectory.
    #[arg(long)]
    trajectory: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated alpha values (default: the config's sweep, else 1,1.5,2,3,4).
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct ScalingArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 3)]
    n_max: u32,
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Base {
    Ten,
    Natural,
}

#[derive(Args)]
struct GrStatsArgs {
    /// Catalog files (.csv or .json).
    #[arg(required = true)]
    catalogs: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.2)]
    dm: f64,
    /// Fit window lower edge.
    #[arg(long, default_value_t = DEFAULT_FIT_WINDOW.0, allow_hyphen_values = true)]
    fit_lo: f64,
    /// Fit window upper edge.
    #[arg(long, default_value_t = DEFAULT_FIT_WINDOW.1, allow_hyphen_values = true)]
    fit_hi: f64,
    /// Magnitude used for the binned rate table.
    #[arg(long, value_enum, default_value_t = Base::Natural)]
    log_base: Base,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Config(bkquake::Error),
    Core(bkquake::Error),
}

impl From<bkquake::Error> for CliError {
    fn from(e: bkquake::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use bkquake::Error as E;
        match self {
            CliError::Config(E::InvalidParams(_)) => 4,
            CliError::Config(_) => 3,
            CliError::Core(E::InvalidParams(_) | E::FrictionDomain(_) | E::BlockIndex { .. }) => 4,
            CliError::Core(E::Io { .. } | E::Json { .. } | E::Csv { .. }) => 5,
            CliError::Core(_) => 6,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "config: {e}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

/// Loads the config (or `default`) and applies the flag overrides.
fn resolve(common: &Common, default: impl FnOnce() -> RunConfig) -> CliResult<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path).map_err(CliError::Config)?,
        None => default(),
    };
    if let Some(seed) = common.seed {
        cfg.integrator.seed = seed;
    }
    if let Some(t) = common.t_end {
        cfg.integrator.t_end = t;
    }
    if let Some(h) = common.step {
        cfg.integrator.step_size = h;
    }
    if let Some(n) = common.blocks {
        cfg.model.n_blocks = n;
    }
    if let Some(dm) = common.dm {
        cfg.outputs.bin_width = dm;
    }
    Ok(cfg)
}

fn validated(cfg: RunConfig) -> CliResult<RunConfig> {
    cfg.validate().map_err(CliError::Config)?;
    Ok(cfg)
}

fn write_statistics(dir: &Path, catalog: &EventCatalog, cfg: &RunConfig, comment: &str) -> CliResult {
    if catalog.is_empty() {
        warn!("no events; skipping statistics in {}", dir.display());
        return Ok(());
    }
    let ten = build_distribution(catalog, cfg.outputs.bin_width, LogBase::Ten)?;
    let natural = build_distribution(catalog, cfg.outputs.bin_width, LogBase::Natural)?;
    write_cumulative_csv(&dir.join("cumulative.csv"), &ten, comment)?;
    write_rate_csv(&dir.join("rate.csv"), &natural, comment)?;
    match fit_gr_slope(&ten, cfg.outputs.fit_window) {
        Ok(fit) => write_fit_json(&dir.join("fit.json"), &fit, &ten, comment)?,
        Err(e) => warn!("slope fit skipped: {e}"),
    }
    Ok(())
}

fn write_run(dir: &Path, out: &RunOutput, cfg: &RunConfig) -> CliResult {
    let comment = provenance(&out.params, &out.config);
    write_catalog_csv(&dir.join("catalog.csv"), &out.catalog, &comment)?;
    if cfg.outputs.catalog_json {
        write_catalog_json(
            &dir.join("catalog.json"),
            &out.catalog,
            &comment,
            cfg.outputs.include_slips,
        )?;
    }
    if let Some(traj) = &out.trajectory {
        write_trajectory_csv(&dir.join("trajectory.csv"), traj, &comment)?;
    }
    if let Some(com) = &out.center_of_mass {
        write_center_of_mass_csv(&dir.join("center_of_mass.csv"), com, &comment)?;
    }
    if cfg.outputs.statistics {
        write_statistics(dir, &out.catalog, cfg, &comment)?;
    }
    let summary = serde_json::json!({
        "provenance": comment,
        "events": out.catalog.total_events(),
        "magnitude_range": out.catalog.magnitude_range(),
        "wall_seconds": out.wall_time.as_secs_f64(),
        "mean_slip_rate": out.mean_slip_rate(),
    });
    let path = dir.join("summary.json");
    std::fs::create_dir_all(dir)
        .and_then(|_| std::fs::write(&path, format!("{summary:#}\n")))
        .map_err(|source| bkquake::Error::Io { path, source })?;
    info!("wrote outputs to {}", dir.display());
    Ok(())
}

fn summary_line(label: &str, out: &RunOutput) -> String {
    let range = match out.catalog.magnitude_range() {
        Some((lo, hi)) => format!("M in [{lo:.3}, {hi:.3}]"),
        None => "no magnitudes".to_string(),
    };
    format!(
        "{label}: {} events, {range}, wall time {:.2}s",
        out.catalog.total_events(),
        out.wall_time.as_secs_f64()
    )
}

fn record_options(cfg: &RunConfig) -> RecordOptions {
    RecordOptions {
        trajectory_stride: cfg.outputs.trajectory.then_some(cfg.outputs.trajectory_stride),
        center_of_mass_stride: cfg.outputs.trajectory.then_some(cfg.outputs.trajectory_stride),
    }
}

fn cmd_run(args: &RunArgs) -> CliResult {
    let mut cfg = resolve(&args.common, || {
        RunConfig::new(ModelParams::single_block(), IntegratorConfig::new(10_000.0))
    })?;
    if let Some(a) = args.alpha {
        cfg.model = cfg.model.with_alpha(a);
    }
    cfg.outputs.trajectory |= args.trajectory;
    let cfg = validated(cfg)?;
    let out = simulate(&cfg.model, &cfg.integrator, record_options(&cfg))?;
    write_run(&args.common.out, &out, &cfg)?;
    println!("{}", summary_line(&format!("N={}", cfg.model.n_blocks), &out));
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> CliResult {
    let cfg = resolve(&args.common, || {
        RunConfig::new(ModelParams::long_chain(1.0), IntegratorConfig::new(10_000.0))
    })?;
    let alphas = args
        .alpha
        .clone()
        .or_else(|| cfg.sweep.clone())
        .unwrap_or_else(|| DEFAULT_SWEEP.to_vec());
    let mut cfg = cfg;
    cfg.sweep = Some(alphas.clone());
    let cfg = validated(cfg)?;
    let jobs: Vec<ModelParams> = alphas.iter().map(|&a| cfg.model.with_alpha(a)).collect();
    let runs = simulate_batch(&jobs, &cfg.integrator, record_options(&cfg), args.workers)?;

    let mut overlay = Vec::new();
    for (alpha, out) in alphas.iter().zip(&runs) {
        let dir = args.common.out.join(format!("alpha_{alpha}"));
        write_run(&dir, out, &cfg)?;
        if !out.catalog.is_empty() {
            let dist = build_distribution(&out.catalog, cfg.outputs.bin_width, LogBase::Ten)?;
            overlay.extend(
                dist.cumulative_curve()
                    .into_iter()
                    .map(|(m, lp)| vec![fmt_f64(*alpha), fmt_f64(m), fmt_f64(lp)]),
            );
        }
        println!("{}", summary_line(&format!("alpha={alpha}"), out));
    }
    let comment = format!("{} sweep alpha={alphas:?}", provenance(&cfg.model, &cfg.integrator));
    write_table(
        &args.common.out.join("overlay_cumulative.csv"),
        &comment,
        &["alpha", "magnitude", "log10_p"],
        overlay,
    )?;
    Ok(())
}

fn cmd_scaling(args: &ScalingArgs) -> CliResult {
    let mut cfg = resolve(&args.common, || {
        RunConfig::new(ModelParams::scaling_base(), IntegratorConfig::new(10_000.0))
    })?;
    if let Some(a) = args.alpha {
        cfg.model = cfg.model.with_alpha(a);
    }
    let cfg = validated(cfg)?;
    let report = run_scaling_suite(
        &cfg.model,
        args.n_max,
        &cfg.integrator,
        cfg.outputs.bin_width,
        args.workers,
    )?;

    let out = &args.common.out;
    let comment = format!(
        "{} n_max={} dM={}",
        provenance(&cfg.model, &cfg.integrator),
        args.n_max,
        cfg.outputs.bin_width
    );
    write_levels_csv(&out.join("levels.csv"), &report.levels, &comment)?;
    write_distance_csv(&out.join("distances.csv"), &report.distances, &comment)?;
    for (level, dist) in report.levels.iter().zip(&report.distributions) {
        let c = format!(
            "{} level={}",
            provenance(&level.level.params, &cfg.integrator),
            level.level.n
        );
        write_distribution_csv(&out.join(format!("level_{}_distribution.csv", level.level.n)), dist, &c)?;
        write_rate_csv(&out.join(format!("level_{}_rate.csv", level.level.n)), dist, &c)?;
        println!(
            "level {} (N={}): {} events, wall time {:.2}s",
            level.level.n,
            level.level.n_blocks(),
            level.events,
            level.wall_seconds
        );
    }
    for row in &report.distances {
        println!(
            "||f{} - f{}||: euclidean {:.4}, max {:.4}",
            row.from,
            row.from + 1,
            row.euclidean,
            row.max
        );
    }
    Ok(())
}

/// Output prefix for a catalog: its path without extension, components joined
/// by `_`, so `alpha_1/catalog.csv` and `alpha_2/catalog.csv` stay apart.
fn output_prefix(path: &Path) -> String {
    let parts: Vec<String> = path
        .with_extension("")
        .components()
        .filter_map(|c| match c {
            std::path::Component::Normal(s) => Some(s.to_string_lossy().into_owned()),
            _ => None,
        })
        .collect();
    if parts.is_empty() {
        "catalog".to_string()
    } else {
        parts.join("_")
    }
}

fn stats_for(path: &Path, args: &GrStatsArgs, base: LogBase) -> CliResult<MagnitudeDistribution> {
    let catalog = read_catalog(path)?;
    let stem = output_prefix(path);
    let comment = format!(
        "{TOOL_VERSION} gr-stats source={} dM={} window=[{}, {}]",
        path.display(),
        args.dm,
        args.fit_lo,
        args.fit_hi
    );
    let ten = build_distribution(&catalog, args.dm, LogBase::Ten)?;
    let binned = build_distribution(&catalog, args.dm, base)?;
    write_cumulative_csv(&args.out.join(format!("{stem}_cumulative.csv")), &ten, &comment)?;
    write_rate_csv(&args.out.join(format!("{stem}_rate.csv")), &binned, &comment)?;
    let fit = fit_gr_slope(&ten, (args.fit_lo, args.fit_hi))?;
    write_fit_json(&args.out.join(format!("{stem}_fit.json")), &fit, &ten, &comment)?;
    println!(
        "{}: {} events, B = {:.4}, b = {:.4} ({} bins, rms {:.3})",
        path.display(),
        ten.total,
        fit.slope_b,
        fit.b_value,
        fit.points_used,
        fit.residual_rms
    );
    Ok(ten)
}

fn cmd_gr_stats(args: &GrStatsArgs) -> CliResult {
    if !(args.dm > 0.0) || !(args.fit_lo < args.fit_hi) {
        return Err(CliError::Config(bkquake::Error::InvalidParams(format!(
            "need dM > 0 and fit_lo < fit_hi (got dM={}, window [{}, {}])",
            args.dm, args.fit_lo, args.fit_hi
        ))));
    }
    let base = match args.log_base {
        Base::Ten => LogBase::Ten,
        Base::Natural => LogBase::Natural,
    };
    let mut overlay = Vec::new();
    for path in &args.catalogs {
        let dist = stats_for(path, args, base)?;
        let source = path.display().to_string();
        overlay.extend(
            dist.cumulative_curve()
                .into_iter()
                .map(|(m, lp)| vec![source.clone(), fmt_f64(m), fmt_f64(lp)]),
        );
    }
    if args.catalogs.len() > 1 {
        let comment = format!("{TOOL_VERSION} gr-stats overlay dM={}", args.dm);
        write_table(
            &args.out.join("overlay_cumulative.csv"),
            &comment,
            &["source", "magnitude", "log10_p"],
            overlay,
        )?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::GrStats(a) => cmd_gr_stats(a),
        Command::Scaling(a) => cmd_scaling(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
