use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qmem_core::runner::{self, ConfigTemplate, FitWindow, Task};

#[derive(Parser)]
#[command(name = "qmem", version, about = "Qubit memory in a structured bosonic bath")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration; list-valued keys expand into a sweep.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides run.out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweep points (overrides run.threads, 0 = auto).
    #[arg(long)]
    threads: Option<usize>,
    /// `section.key=value`, value parsed as TOML; may be repeated.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Rotating-wave model: Volterra solve, traces, NM scan, audits.
    RwaEvolve(Common),
    /// Full model: chain mapping plus MPS evolution of the probe states.
    FullEvolve(Common),
    /// Chain coefficients of the discretized bath.
    ChainMap(Common),
    /// Direction scan of the non-Markovianity measure.
    NmScan(Common),
    /// Exponential decay fits of D_x, D_y, D_z.
    FitRates {
        #[command(flatten)]
        common: Common,
        /// Fit an existing snapshot CSV instead of running the model.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Audit of the gain and loss inequalities.
    AuditBounds(Common),
    /// Exact state-vector evolution of a small chain.
    OracleEd(Common),
}

fn template(common: &Common, task: Task) -> qmem_core::Result<ConfigTemplate> {
    let mut t = match &common.config {
        Some(p) => ConfigTemplate::from_file(p)?,
        None => ConfigTemplate::empty(),
    };
    match task {
        Task::RwaEvolve => t.apply_override("model.kind=\"rwa\"")?,
        Task::FullEvolve | Task::OracleEd => t.apply_override("model.kind=\"full\"")?,
        _ => {}
    }
    for o in &common.overrides {
        t.apply_override(o)?;
    }
    Ok(t)
}

fn fit_input(common: &Common, input: &Path) -> qmem_core::Result<()> {
    let points = template(common, Task::FitRates)?.expand()?;
    let cfg = &points[0].config;
    let window = FitWindow { t_start: cfg.fit.t_start, t_end: cfg.fit.t_end, noise_floor: cfg.fit.noise_floor };
    let fits = runner::fit_snapshot(input, window)?;
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.run.out));
    std::fs::create_dir_all(&out)?;
    runner::write_fits_file(&out.join("fits.csv"), &fits)?;
    for (label, f) in &fits {
        match f {
            Ok(f) => println!("D_{label}: rate {:.6e}  residual {:.3e}  window [{:.3}, {:.3}]", f.rate, f.residual, f.fit_window.0, f.fit_window.1),
            Err(e) => println!("D_{label}: {e}"),
        }
    }
    Ok(())
}

fn run(task: Task, common: &Common) -> qmem_core::Result<Option<i32>> {
    let points = template(common, task)?.expand()?;
    let first = &points[0].config;
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from(&first.run.out));
    let threads = common.threads.unwrap_or(first.run.threads);
    let statuses = runner::run_sweep(task, &points, &out, threads)?;
    let mut code = None;
    for s in &statuses {
        match &s.outcome {
            Ok(None) => println!("{}: ok", s.point.dir_name()),
            Ok(Some(m)) => println!(
                "{}: ok  F_opt(T) = {:.6}  N(T) = {:.6}  violations = {}",
                s.point.dir_name(),
                m.fopt_final,
                m.nm_final,
                m.violations
            ),
            Err(e) => {
                eprintln!("{}: {e}", s.point.dir_name());
                code = Some(code.map_or(e.exit_code(), |c: i32| c.max(e.exit_code())));
            }
        }
    }
    println!("summary written to {}", out.join("summary.csv").display());
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::RwaEvolve(c) => run(Task::RwaEvolve, c),
        Command::FullEvolve(c) => run(Task::FullEvolve, c),
        Command::ChainMap(c) => run(Task::ChainMap, c),
        Command::NmScan(c) => run(Task::NmScan, c),
        Command::AuditBounds(c) => run(Task::AuditBounds, c),
        Command::OracleEd(c) => run(Task::OracleEd, c),
        Command::FitRates { common, input: Some(p) } => fit_input(common, p).map(|_| None),
        Command::FitRates { common, input: None } => run(Task::FitRates, common),
    };
    match result {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(code)) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
