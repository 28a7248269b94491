use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hydromac_bench::compare::{compare_dirs, format_rows};
use hydromac_bench::config::parse_list;
use hydromac_bench::run::mesh_text;
use hydromac_bench::tables::{format_table1, format_table2, table1, table2, TABLE2_MESHES, TABLE_EPS};
use hydromac_bench::{run_case, sweep, CaseConfig, RunError, RunStatus, SweepAxis};

#[derive(Parser)]
#[command(name = "hydromac", version, about = "Well-balanced low-Mach Euler benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configured case
    Run {
        #[arg(long)]
        config: PathBuf,
        /// `key=value` or `section.key=value`, applied after the file
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run a case once per value of `eps` or `mesh`
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated values
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Field-wise L1 distances between the final snapshots of two runs
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Well-balancing table: three potentials, three Mach numbers
    Table1 {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stationary vortex mesh-convergence table
    Table2 {
        #[arg(long, value_delimiter = ',')]
        meshes: Option<Vec<usize>>,
        #[arg(long)]
        eps: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_CRASH_EXPECTED: u8 = 4;

fn status_code(s: RunStatus) -> ExitCode {
    match s {
        RunStatus::Completed => ExitCode::SUCCESS,
        RunStatus::Failed => ExitCode::from(EXIT_SOLVER),
        RunStatus::CrashedAsExpected => ExitCode::from(EXIT_CRASH_EXPECTED),
    }
}

fn error_code(e: &RunError) -> ExitCode {
    match e {
        RunError::Config(_) => ExitCode::from(EXIT_CONFIG),
        _ => ExitCode::from(EXIT_SOLVER),
    }
}

fn read_config(path: &PathBuf) -> Result<String, ExitCode> {
    fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        ExitCode::from(EXIT_CONFIG)
    })
}

fn write_out(out: Option<&PathBuf>, text: &str) -> Result<(), ExitCode> {
    if let Some(path) = out {
        fs::write(path, text).map_err(|e| {
            eprintln!("error: cannot write {}: {e}", path.display());
            ExitCode::from(EXIT_SOLVER)
        })?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, overrides } => cmd_run(&config, &overrides),
        Command::Sweep { config, axis, values, overrides } => cmd_sweep(&config, axis, &values, &overrides),
        Command::Compare { a, b } => match compare_dirs(&a, &b) {
            Ok(rows) => {
                print!("{}", format_rows(&rows));
                Ok(ExitCode::SUCCESS)
            }
            Err(e) => Err(e),
        },
        Command::Table1 { out } => table1().map(|rows| {
            let text = format_table1(&rows);
            print!("{text}");
            write_out(out.as_ref(), &text).err().unwrap_or(ExitCode::SUCCESS)
        }),
        Command::Table2 { meshes, eps, out } => {
            let eps_list = match eps.as_deref().map(|s| parse_list("eps", s)) {
                None => Ok(TABLE_EPS.to_vec()),
                Some(r) => r,
            };
            match eps_list {
                Err(e) => Err(e.into()),
                Ok(eps_list) => table2(meshes.as_deref().unwrap_or(&TABLE2_MESHES), &eps_list).map(|rows| {
                    let text = format_table2(&rows);
                    print!("{text}");
                    write_out(out.as_ref(), &text).err().unwrap_or(ExitCode::SUCCESS)
                }),
            }
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            error_code(&e)
        }
    }
}

fn cmd_run(path: &PathBuf, overrides: &[String]) -> Result<ExitCode, RunError> {
    let text = match read_config(path) {
        Ok(t) => t,
        Err(code) => return Ok(code),
    };
    let mut cfg = CaseConfig::parse(&text, overrides)?;
    if cfg.output.is_none() {
        cfg.output = Some(PathBuf::from("out"));
    }
    let report = run_case(&cfg)?;
    println!("case {} ({}), mesh {}: {}", cfg.case, cfg.scheme.name(), mesh_text(&cfg.mesh), report.status.name());
    for row in &report.errors {
        let norms: Vec<String> = row.norms.iter().map(|(n, v)| format!("{n} = {v:e}")).collect();
        println!("  eps = {:e}: {}", row.eps, norms.join(", "));
    }
    if let Some((med, max)) = report.newton_stats().filter(|_| cfg.scheme == hydromac_bench::SchemeKind::Wb) {
        println!("  newton iterations: median {med}, max {max}");
    }
    if let Some(m) = &report.message {
        println!("  {m}");
    }
    if let Some(dir) = &report.dir {
        println!("  output in {}", dir.display());
    }
    Ok(status_code(report.status))
}

fn cmd_sweep(path: &PathBuf, axis: SweepAxis, values: &[String], overrides: &[String]) -> Result<ExitCode, RunError> {
    let text = match read_config(path) {
        Ok(t) => t,
        Err(code) => return Ok(code),
    };
    let result = sweep(&text, overrides, axis, values)?;
    print!("{}", result.summary());
    Ok(status_code(result.status()))
}
