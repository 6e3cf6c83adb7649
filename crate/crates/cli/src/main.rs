use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{Args, Parser, Subcommand};
use jmsos::ClarabelBackend;
use jmsos_cli::{parse_problem_file, run_compare, run_oracle, run_solve, RunOptions, SolveReport};

#[derive(Parser)]
#[command(name = "jmsos", version, about = "Joint+marginal moment-SOS relaxations for parametric polynomial optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the relaxation hierarchy and write the CSV tables.
    Solve(Common),
    /// Solve J(y) pointwise on a grid and write oracle.csv.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Grid points per parameter.
        #[arg(long, default_value_t = 101)]
        grid: usize,
    },
    /// Run solve and oracle, then write compare.csv and compare_rho.csv.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 101)]
        grid: usize,
    },
}

#[derive(Args)]
struct Common {
    file: PathBuf,
    /// Order range `a..b` (inclusive); defaults to the minimum order up to the file's order.
    #[arg(long, value_parser = parse_orders)]
    orders: Option<(usize, usize)>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Solver feasibility and gap tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
}

fn parse_orders(s: &str) -> Result<(usize, usize)> {
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (a.parse()?, b.trim_start_matches('=').parse()?),
        None => {
            let v = s.parse()?;
            (v, v)
        }
    };
    if a > b {
        return Err(anyhow!("empty range {s}"));
    }
    Ok((a, b))
}

fn options(c: &Common, grid: usize) -> RunOptions {
    RunOptions {
        orders: c.orders,
        out: c.out.clone(),
        seed: c.seed,
        grid,
    }
}

fn finish(report: &SolveReport) -> ExitCode {
    for line in &report.log {
        eprintln!("note: {line}");
    }
    for s in &report.solutions {
        match s.rho {
            Some(rho) => println!("order {}: rho = {rho:.10}", s.order),
            None => println!("order {}: {}", s.order, s.status.as_str()),
        }
    }
    if let Some(msg) = report.message() {
        eprintln!("{msg}");
    }
    ExitCode::from(report.status.exit_code() as u8)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Solve(c) => {
            let pf = parse_problem_file(&c.file)?;
            let backend = ClarabelBackend::new(c.tolerance);
            Ok(finish(&run_solve(&pf, &backend, &options(&c, 101))?))
        }
        Command::Oracle { common: c, grid } => {
            let pf = parse_problem_file(&c.file)?;
            let result = run_oracle(&pf, &options(&c, grid))?;
            let ties = result.points.iter().filter(|p| p.tie).count();
            println!("{} points solved, {ties} with non-unique minimizers", result.points.len());
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare { common: c, grid } => {
            let pf = parse_problem_file(&c.file)?;
            let backend = ClarabelBackend::new(c.tolerance);
            Ok(finish(&run_compare(&pf, &backend, &options(&c, grid))?))
        }
    }
}

// OpenBLAS selects its kernels when the library is loaded. The AVX-512
// kernels of some distribution builds return wrong eigendecompositions for
// blocks larger than 32, so on such CPUs restart once with a pinned core type.
#[cfg(all(unix, target_arch = "x86_64"))]
fn pin_blas_kernel() {
    use std::os::unix::process::CommandExt;
    if std::env::var_os("OPENBLAS_CORETYPE").is_some() || !std::arch::is_x86_feature_detected!("avx512f") {
        return;
    }
    if let Ok(exe) = std::env::current_exe() {
        let err = std::process::Command::new(exe)
            .args(std::env::args_os().skip(1))
            .env("OPENBLAS_CORETYPE", "Haswell")
            .exec();
        eprintln!("warning: could not pin the OpenBLAS kernel: {err}");
    }
}

#[cfg(not(all(unix, target_arch = "x86_64")))]
fn pin_blas_kernel() {}

fn main() -> ExitCode {
    pin_blas_kernel();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
