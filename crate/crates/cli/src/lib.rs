//! `edca-perf`: analytic sweeps, simulations, oracle verification and
//! comparisons for saturated EDCA networks.
//!
//! Exit codes: 0 success, 2 invalid arguments, 3 I/O, 4 configuration,
//! 5 no requested point converged, 6 table key mismatch, 7 verification
//! failure, 1 anything else.

pub mod svg;
pub mod table;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use edca_core::chain::ChainShape;
use edca_core::config::{self, ConfigError};
use edca_core::params::{default_table1, AccessMode, ScenarioConfig, NUM_ACS};
use edca_core::{metrics, oracle, sim, Error};
use thiserror::Error;

use table::{OutputRow, Source};

pub const THREADS_ENV: &str = "EDCA_PERF_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Convergence(String),
    #[error("{0}")]
    KeyMismatch(String),
    #[error("verification failed: {0}")]
    VerifyFailed(String),
    #[error("malformed table: {0}")]
    Csv(String),
    #[error(transparent)]
    Model(Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Config(ConfigError::Io { .. }) => 3,
            CliError::Config(_) | CliError::Csv(_) => 4,
            CliError::Convergence(_) => 5,
            CliError::KeyMismatch(_) => 6,
            CliError::VerifyFailed(_) => 7,
            CliError::Model(Error::InvalidConfig(_)) => 4,
            CliError::Model(Error::NonConvergence { .. }) => 5,
            CliError::Model(Error::InvalidArgument(_) | Error::InvalidStationCount(_)) => 2,
            CliError::Model(_) => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Model(e)
    }
}

#[derive(Debug, Parser)]
#[command(name = "edca-perf", version, about = "Delay and jitter of saturated IEEE 802.11e EDCA access categories")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analytic delay and jitter over a range of station counts.
    Analyze(AnalyzeArgs),
    /// Simulated delay and jitter over a range of station counts.
    Simulate(SimulateArgs),
    /// Relative gaps between two result tables.
    Compare(CompareArgs),
    /// Check the closed forms against the explicit chain.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Scenario file; Table I defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one setting, e.g. `--set ac0.cw_min=15`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long, value_name = "basic|rtscts")]
    pub mode: Option<String>,
    #[arg(long, default_value_t = 5)]
    pub n_min: u32,
    #[arg(long, default_value_t = 50)]
    pub n_max: u32,
    #[arg(long, default_value_t = 5)]
    pub n_step: u32,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write `<stem>_delay.svg` and `<stem>_jitter.svg` next to `--out`.
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[arg(long, default_value_t = 1_000_000)]
    pub horizon_slots: u64,
    /// Comma-separated seeds, one run each.
    #[arg(long, default_value = "1,2")]
    pub seeds: String,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Reference table (usually analytic).
    pub reference: PathBuf,
    /// Table compared against the reference (usually simulated).
    pub other: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Comma-separated collision probabilities.
    #[arg(long)]
    pub p_grid: Option<String>,
    /// Comma-separated `w0:m:f:l` chain shapes.
    #[arg(long)]
    pub shapes: Option<String>,
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
    #[arg(long, hide = true, default_value_t = 0.0, allow_negative_numbers = true)]
    pub perturb_b00: f64,
}

/// Parse arguments, run the command and return the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("edca-perf: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let pool = thread_pool()?;
    pool.install(|| match cli.command {
        Command::Analyze(args) => cmd_analyze(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Compare(args) => cmd_compare(&args),
        Command::Verify(args) => cmd_verify(&args),
    })
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        let threads: usize = raw
            .trim()
            .parse()
            .ok()
            .filter(|&t| t >= 1)
            .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
        builder = builder.num_threads(threads);
    }
    builder
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker threads: {e}")))
}

pub fn load_scenario(args: &ScenarioArgs) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => config::load_config(path)?,
        None => default_table1(),
    };
    for assignment in &args.set {
        config::apply_override(&mut cfg, assignment)?;
    }
    if let Some(mode) = &args.mode {
        cfg.access_mode = mode.parse::<AccessMode>().map_err(CliError::Usage)?;
    }
    cfg.validate().into_result()?;
    Ok(cfg)
}

pub fn station_range(args: &ScenarioArgs) -> Result<Vec<u32>, CliError> {
    if args.n_min < 1 {
        return Err(CliError::Usage("--n-min must be at least 1".into()));
    }
    if args.n_step < 1 {
        return Err(CliError::Usage("--n-step must be at least 1".into()));
    }
    if args.n_max < args.n_min {
        return Err(CliError::Usage("--n-max must not be below --n-min".into()));
    }
    Ok((args.n_min..=args.n_max).step_by(args.n_step as usize).collect())
}

fn parse_list<T: std::str::FromStr>(raw: &str, what: &str) -> Result<Vec<T>, CliError> {
    let items: Vec<&str> = raw.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(CliError::Usage(format!("{what} is empty")));
    }
    items
        .iter()
        .map(|s| s.parse().map_err(|_| CliError::Usage(format!("invalid {what} entry `{s}`"))))
        .collect()
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn emit(output: &OutputArgs, rows: &[OutputRow], what: &str) -> Result<(), CliError> {
    let text = table::write_rows(rows)?;
    match &output.out {
        Some(path) => write_file(path, &text)?,
        None => print!("{text}"),
    }
    if output.plot {
        let out = output
            .out
            .as_ref()
            .ok_or_else(|| CliError::Usage("--plot needs --out to name the SVG files".into()))?;
        for (path, svg) in plot_files(out, rows, what) {
            write_file(&path, &svg)?;
        }
    }
    Ok(())
}

/// `<stem>_delay.svg` and `<stem>_jitter.svg` beside `out`.
pub fn plot_paths(out: &Path) -> [PathBuf; 2] {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("edca");
    ["delay", "jitter"].map(|metric| out.with_file_name(format!("{stem}_{metric}.svg")))
}

fn plot_files(out: &Path, rows: &[OutputRow], what: &str) -> Vec<(PathBuf, String)> {
    let [delay_path, jitter_path] = plot_paths(out);
    let series = |value: fn(&OutputRow) -> f64| -> Vec<svg::Series> {
        (0..NUM_ACS)
            .map(|ac| svg::Series {
                label: format!("AC{ac}"),
                points: rows
                    .iter()
                    .filter(|r| r.ac == ac)
                    .map(|r| (f64::from(r.n), value(r) / 1000.0))
                    .collect(),
            })
            .collect()
    };
    vec![
        (
            delay_path,
            svg::line_chart(
                &format!("{what} frame transmission delay"),
                "number of stations",
                "delay (ms)",
                &series(|r| r.e_delay_us),
            ),
        ),
        (
            jitter_path,
            svg::line_chart(
                &format!("{what} jitter"),
                "number of stations",
                "jitter (ms)",
                &series(|r| r.jitter_us),
            ),
        ),
    ]
}

pub fn analytic_rows(cfg: &ScenarioConfig, stations: &[u32]) -> Result<Vec<OutputRow>, CliError> {
    let sweep = metrics::sweep(cfg, stations)?;
    let mut rows = Vec::with_capacity(sweep.len() * NUM_ACS);
    let mut failures = Vec::new();
    for point in &sweep {
        match &point.outcome {
            Ok(eval) => rows.extend(eval.acs.iter().map(|m| OutputRow {
                e_delay_us: m.e_delay,
                jitter_us: m.jitter,
                p_coll: m.p_coll,
                p_drop: m.p_drop,
                tau: m.tau,
                ..OutputRow::empty(point.n, m.ac, Source::Analytic, "ok")
            })),
            Err(e) => {
                let status = match e {
                    Error::NonConvergence { .. } => "nonconvergence",
                    _ => "error",
                };
                failures.push(format!("n={}: {e}", point.n));
                rows.extend((0..NUM_ACS).map(|ac| OutputRow::empty(point.n, ac, Source::Analytic, status)));
            }
        }
    }
    for f in &failures {
        eprintln!("edca-perf: {f}");
    }
    if failures.len() == sweep.len() {
        return Err(CliError::Convergence(format!(
            "no requested station count converged ({})",
            failures.join("; ")
        )));
    }
    Ok(rows)
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<(), CliError> {
    let cfg = load_scenario(&args.scenario)?;
    let stations = station_range(&args.scenario)?;
    let rows = analytic_rows(&cfg, &stations)?;
    emit(&args.output, &rows, "analytic")
}

pub fn simulated_rows(
    cfg: &ScenarioConfig,
    stations: &[u32],
    horizon_slots: u64,
    seeds: &[u64],
) -> Result<Vec<OutputRow>, CliError> {
    use rayon::prelude::*;
    if horizon_slots == 0 {
        return Err(CliError::Usage("--horizon-slots must be at least 1".into()));
    }
    let per_n = stations
        .par_iter()
        .map(|&n| simulate_point(&cfg.with_stations(n), horizon_slots, seeds))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(per_n.into_iter().flatten().collect())
}

fn simulate_point(cfg: &ScenarioConfig, horizon_slots: u64, seeds: &[u64]) -> Result<Vec<OutputRow>, CliError> {
    let n = cfg.n_stations;
    if let [seed] = seeds {
        let report = sim::simulate(cfg, horizon_slots, *seed)?;
        return Ok(report
            .acs
            .iter()
            .enumerate()
            .map(|(ac, s)| {
                let censored = s.packets_delivered == 0;
                OutputRow {
                    e_delay_us: s.mean_access_delay,
                    jitter_us: s.delay_stddev,
                    p_coll: s.collision_rate(),
                    p_drop: s.drop_count as f64 / (s.success_count + s.drop_count) as f64,
                    tau: s.attempt_rate(),
                    ..OutputRow::empty(n, ac, Source::Simulated, if censored { "censored" } else { "ok" })
                }
            })
            .collect());
    }
    let rep = sim::replicate(cfg, horizon_slots, seeds)?;
    Ok(rep
        .acs
        .iter()
        .enumerate()
        .map(|(ac, s)| {
            let rates: Vec<f64> = rep
                .runs
                .iter()
                .map(|r| r.acs[ac].attempt_rate())
                .filter(|x| x.is_finite())
                .collect();
            let tau = sim::Estimate::from_samples(&rates).mean;
            OutputRow {
                e_delay_us: s.mean_access_delay.mean,
                jitter_us: s.delay_stddev.mean,
                p_coll: s.collision_rate.mean,
                p_drop: s.drop_rate.mean,
                tau,
                delay_ci_us: s.mean_access_delay.ci_half_width,
                jitter_ci_us: s.delay_stddev.ci_half_width,
                ..OutputRow::empty(n, ac, Source::Simulated, if s.censored() { "censored" } else { "ok" })
            }
        })
        .collect())
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let cfg = load_scenario(&args.scenario)?;
    let stations = station_range(&args.scenario)?;
    let seeds: Vec<u64> = parse_list(&args.seeds, "--seeds")?;
    let rows = simulated_rows(&cfg, &stations, args.horizon_slots, &seeds)?;
    emit(&args.output, &rows, "simulated")
}

/// Human-readable gap report.
pub fn comparison_report(c: &table::Comparison) -> String {
    let mut out = String::new();
    let pct = |x: f64| {
        if x.is_finite() {
            format!("{:+.1}%", 100.0 * x)
        } else {
            "n/a".to_string()
        }
    };
    let ms = |x: f64| {
        if x.is_finite() {
            format!("{:.3}", x / 1000.0)
        } else {
            "none".to_string()
        }
    };
    for g in &c.gaps {
        out.push_str(&format!(
            "n={:<3} AC{}  delay {} ms vs {} ms ({})  jitter {} ms vs {} ms ({})\n",
            g.n,
            g.ac,
            ms(g.delay_ref),
            ms(g.delay_other),
            pct(g.delay_rel()),
            ms(g.jitter_ref),
            ms(g.jitter_other),
            pct(g.jitter_rel()),
        ));
    }
    let verdict = if c.ordering_agrees() { "yes" } else { "no" };
    out.push_str(&format!("ordering agreement: {verdict}"));
    if !c.ordering_agrees() {
        let ns: Vec<String> = c.ordering_mismatches.iter().map(u32::to_string).collect();
        out.push_str(&format!(" (differs at n = {})", ns.join(", ")));
    }
    out.push('\n');
    out
}

pub fn cmd_compare(args: &CompareArgs) -> Result<(), CliError> {
    let reference = table::read_rows(&read_file(&args.reference)?)?;
    let other = table::read_rows(&read_file(&args.other)?)?;
    let comparison = table::compare(&reference, &other)?;
    if let Some(path) = &args.out {
        write_file(path, &comparison.to_csv()?)?;
    }
    print!("{}", comparison_report(&comparison));
    Ok(())
}

fn parse_shape(raw: &str) -> Result<ChainShape, CliError> {
    let parts: Vec<u32> = raw
        .split(':')
        .map(|p| p.trim().parse::<u32>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("invalid shape `{raw}` (expected w0:m:f:l)")))?;
    match parts[..] {
        [w0, m, f, l] => ChainShape::new(w0, m, f, l).map_err(|e| CliError::Usage(format!("shape `{raw}`: {e}"))),
        _ => Err(CliError::Usage(format!("invalid shape `{raw}` (expected w0:m:f:l)"))),
    }
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<(), CliError> {
    let p_grid = match &args.p_grid {
        Some(raw) => parse_list::<f64>(raw, "--p-grid")?,
        None => oracle::default_p_grid(),
    };
    let shapes = match &args.shapes {
        Some(raw) => {
            let items: Vec<&str> = raw.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
            if items.is_empty() {
                return Err(CliError::Usage("--shapes is empty".into()));
            }
            items.into_iter().map(parse_shape).collect::<Result<Vec<_>, _>>()?
        }
        None => oracle::default_shapes(),
    };
    if let Some(bad) = p_grid.iter().find(|p| !(0.0..1.0).contains(*p)) {
        return Err(CliError::Usage(format!("--p-grid entry {bad} outside [0, 1)")));
    }
    let report = oracle::verify_grid(&shapes, &p_grid, args.perturb_b00)?;
    let max = |f: fn(&oracle::GridPoint) -> f64| report.points.iter().map(f).fold(0.0, f64::max);
    let lines = [
        ("b00", max(|p| p.b00_dev)),
        ("tau", max(|p| p.tau_dev)),
        ("stage heads b(i,0) = b00 p^i", max(|p| p.stage_head_dev)),
        ("counters b(i,k)", max(|p| p.counter_dev)),
        ("E(N), Var(N) (relative)", report.max_moment_dev()),
        ("balance residual", report.max_balance_residual()),
    ];
    println!("grid points: {} (shapes {}, p values {})", report.points.len(), shapes.len(), p_grid.len());
    for (name, value) in lines {
        println!("max deviation {name}: {value:.3e}");
    }
    let worst = report.max_distribution_dev().max(report.max_moment_dev());
    if worst <= args.tolerance {
        println!("result: pass (tolerance {:.0e})", args.tolerance);
        Ok(())
    } else {
        println!("result: fail (tolerance {:.0e})", args.tolerance);
        Err(CliError::VerifyFailed(format!(
            "max deviation {worst:.3e} exceeds {:.0e}",
            args.tolerance
        )))
    }
}
