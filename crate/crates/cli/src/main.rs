use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use windobs::estimator::write_estimates;
use windobs::simulator::{gnuplot_script, write_csv};
use windobs_cli::reproduce::{self, Selection};
use windobs_cli::scenario::{resolve, Scenario};
use windobs_cli::{all_pass, analyze, exit, run, CommandError};

#[derive(Parser)]
#[command(name = "windobs", version, about = "Wind direction observability analyses, simulations and filter runs")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// Scenario file or bundled scenario name.
    scenario: String,
    /// Primary output: rank report JSON (analyze), trajectory CSV (simulate)
    /// or estimates CSV (filter).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Metrics JSON output.
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Overrides the measurement noise seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct ReproduceArgs {
    /// A single scenario; omit when using --all, --table or --figure.
    scenario: Option<String>,
    #[arg(long, conflicts_with_all = ["table", "figure", "scenario"])]
    all: bool,
    #[arg(long, conflicts_with_all = ["figure", "scenario"])]
    table: Option<u32>,
    #[arg(long, conflicts_with = "scenario")]
    figure: Option<u32>,
    /// Directory for report.md; the report goes to stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Subcommand)]
enum Cmd {
    /// Rank tests at the base point and probes.
    Analyze(Common),
    /// Simulate, measure and classify a trajectory.
    Simulate(Common),
    /// Run the square-root UKF on a simulated trajectory.
    Filter(Common),
    /// Check bundled scenarios against their golden values.
    Reproduce(ReproduceArgs),
}

fn create(path: &Path) -> Result<BufWriter<File>, CommandError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CommandError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CommandError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CommandError> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| CommandError::Invalid(e.to_string()))?;
    writeln!(f).and_then(|_| f.flush()).map_err(|e| CommandError::io(path, e))
}

fn load(arg: &str) -> Result<Scenario, CommandError> {
    Ok(Scenario::load(&resolve(arg))?)
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, CommandError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CommandError::Invalid(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn verdict_code(checks: &[windobs_cli::Check]) -> i32 {
    if all_pass(checks) {
        exit::OK
    } else {
        exit::MISMATCH
    }
}

fn cmd_analyze(a: Common) -> Result<i32, CommandError> {
    let sc = load(&a.scenario)?;
    let report = with_pool(a.workers, || analyze::analyze(&sc))??;
    print!("{}", analyze::render(&sc, &report));
    if let Some(p) = &a.out {
        write_json(p, &report.base)?;
    }
    if let Some(p) = &a.metrics {
        write_json(p, &report)?;
    }
    Ok(verdict_code(&report.checks))
}

fn cmd_simulate(a: Common) -> Result<i32, CommandError> {
    let sc = load(&a.scenario)?;
    let (traj, report) = with_pool(a.workers, || run::simulate(&sc, a.seed))??;
    print!("{}", run::render_simulation(&report));
    if let Some(p) = &a.out {
        let mut f = create(p)?;
        write_csv(&traj, &mut f)?;
        f.flush().map_err(|e| CommandError::io(p, e))?;
        let gp = p.with_extension("gp");
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("trajectory.csv");
        std::fs::write(&gp, gnuplot_script(&traj, name, &sc.name)).map_err(|e| CommandError::io(&gp, e))?;
    }
    if let Some(p) = &a.metrics {
        write_json(p, &report)?;
    }
    Ok(verdict_code(&report.checks))
}

fn cmd_filter(a: Common) -> Result<i32, CommandError> {
    let sc = load(&a.scenario)?;
    let (run, report) = run::filter(&sc, a.seed)?;
    print!("{}", run::render_filter(&report));
    if let Some(p) = &a.out {
        let mut f = create(p)?;
        write_estimates(&run, &mut f).and_then(|_| f.flush()).map_err(|e| CommandError::io(p, e))?;
    }
    if let Some(p) = &a.metrics {
        write_json(p, &report.metrics)?;
    }
    if report.metrics.diverged {
        eprintln!("windobs: filter diverged");
        return Ok(exit::DIVERGED);
    }
    Ok(verdict_code(&report.checks))
}

fn cmd_reproduce(a: ReproduceArgs) -> Result<i32, CommandError> {
    let sel = match (a.all, a.table, a.figure, a.scenario) {
        (true, ..) => Selection::All,
        (_, Some(n), ..) => Selection::Table(n),
        (_, _, Some(n), _) => Selection::Figure(n),
        (_, _, _, Some(s)) => Selection::One(s),
        _ => return Err(CommandError::Invalid("give a scenario, --all, --table N or --figure N".into())),
    };
    let paths = reproduce::select(&sel)?;
    let items = reproduce::reproduce(&paths, a.workers)?;
    let cross = reproduce::cross_checks(&items);
    let text = reproduce::render_report(&items, &cross);
    match &a.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| CommandError::io(dir, e))?;
            let p = dir.join("report.md");
            std::fs::write(&p, &text).map_err(|e| CommandError::io(&p, e))?;
            for i in &items {
                println!("{} {}", if i.pass() { "PASS" } else { "FAIL" }, i.name);
            }
            for c in &cross {
                println!("{} {}", if c.pass { "PASS" } else { "FAIL" }, c.item);
            }
            println!("report written to {}", p.display());
        }
        None => print!("{text}"),
    }
    Ok(if reproduce::all_items_pass(&items, &cross) { exit::OK } else { exit::MISMATCH })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::PARSE as u8 } else { 0 });
        }
    };
    let result = match cli.command {
        Cmd::Analyze(a) => cmd_analyze(a),
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Filter(a) => cmd_filter(a),
        Cmd::Reproduce(a) => cmd_reproduce(a),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("windobs: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
