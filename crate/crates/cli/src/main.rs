//! `stirap`: decomposition, transfer and verification reports from JSON job files.

mod compare;
mod config;
mod error;
mod report;
mod run;

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use config::{Command, JobConfig, Profile};
use error::CliError;

#[derive(Parser)]
#[command(name = "stirap", version, about = "Multi-level adiabatic passage analysis")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Subspace decomposition, lambda pairs and bright-state witnesses.
    Decompose(RunArgs),
    /// Adiabatic transfer map.
    Transfer(RunArgs),
    /// Darkness residuals and direct Schrödinger checks.
    Verify(RunArgs),
    /// Bare-state populations along the sweep.
    Trajectory(RunArgs),
    /// Infidelity against the adiabatic prediction over several sweep durations.
    Convergence(RunArgs),
    /// Compare the results of two reports.
    Compare {
        r1: PathBuf,
        r2: PathBuf,
        /// Largest tolerated absolute deviation.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Job file; repeat for a batch run.
    #[arg(long = "config", required = true)]
    configs: Vec<PathBuf>,
    /// Report file, or output directory for a batch.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    rank_tol: Option<f64>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
    #[arg(long)]
    omega_t: Option<f64>,
    #[arg(long, value_enum)]
    profile: Option<Profile>,
}

impl RunArgs {
    fn apply(&self, command: Command, config: &mut JobConfig) {
        config.command = Some(command);
        if let Some(v) = self.rank_tol {
            config.rank_tol = v;
        }
        if let Some(v) = self.rtol {
            config.rtol = v;
        }
        if let Some(v) = self.atol {
            config.atol = v;
        }
        if let Some(v) = self.omega_t {
            config.omega_t = v;
        }
        if let Some(p) = self.profile {
            config.profile = p;
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io { path: path.display().to_string(), message: e.to_string() })
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io { path: path.display().to_string(), message: e.to_string() })
}

fn render(report: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

fn report_error(err: &CliError, source: Option<&Path>) {
    let source = source.map(|p| p.display().to_string());
    let line = serde_json::to_string(&err.to_json(source.as_deref())).expect("error serializes");
    let _ = writeln!(std::io::stderr(), "{line}");
}

/// Produce the report text for one job file.
fn job(path: &Path, command: Command, args: &RunArgs) -> Result<(JobConfig, String), CliError> {
    let mut config = JobConfig::parse(&read(path)?)?;
    args.apply(command, &mut config);
    let report = run::run(&config)?;
    Ok((config, render(&report)))
}

fn run_single(command: Command, args: &RunArgs) -> Result<(), (CliError, Option<PathBuf>)> {
    let path = &args.configs[0];
    let (config, text) = job(path, command, args).map_err(|e| (e, Some(path.clone())))?;
    let target = args.out.clone().or_else(|| config.output.as_ref().map(PathBuf::from));
    match target {
        Some(out) => write(&out, &text).map_err(|e| (e, Some(path.clone()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("STIRAP_THREADS") {
        let n: usize =
            v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| CliError::Usage {
                message: format!("STIRAP_THREADS='{v}' is not a positive integer"),
            })?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| CliError::Usage { message: e.to_string() })
}

/// Run every job; returns the largest exit code among failures.
fn run_batch(command: Command, args: &RunArgs) -> u8 {
    let out_dir = args.out.clone();
    if let Some(dir) = &out_dir {
        if let Err(e) = fs::create_dir_all(dir) {
            report_error(&CliError::Io { path: dir.display().to_string(), message: e.to_string() }, None);
            return 2;
        }
        let mut stems = HashSet::new();
        for p in &args.configs {
            if !stems.insert(p.file_stem().map(|s| s.to_os_string())) {
                report_error(
                    &CliError::Usage { message: format!("two configs share the file name of {}", p.display()) },
                    None,
                );
                return 2;
            }
        }
    }
    let pool = match thread_pool() {
        Ok(p) => p,
        Err(e) => {
            report_error(&e, None);
            return 2;
        }
    };
    let results: Vec<Result<String, CliError>> = pool.install(|| {
        args.configs
            .par_iter()
            .map(|path| {
                let (_, text) = job(path, command, args)?;
                match &out_dir {
                    Some(dir) => {
                        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                        write(&dir.join(format!("{stem}.json")), &text)?;
                        Ok(String::new())
                    }
                    None => Ok(text),
                }
            })
            .collect()
    });
    let mut code = 0;
    for (path, r) in args.configs.iter().zip(results) {
        match r {
            Ok(text) => print!("{text}"),
            Err(e) => {
                report_error(&e, Some(path));
                code = code.max(e.exit_code());
            }
        }
    }
    code
}

fn compare(r1: &Path, r2: &Path, tol: f64) -> Result<bool, (CliError, Option<PathBuf>)> {
    let load = |p: &Path| -> Result<serde_json::Value, (CliError, Option<PathBuf>)> {
        let text = read(p).map_err(|e| (e, None))?;
        serde_json::from_str(&text).map_err(|e| {
            (
                CliError::Parse { message: e.to_string(), field: None, line: e.line(), column: e.column() },
                Some(p.to_path_buf()),
            )
        })
    };
    let (a, b) = (load(r1)?, load(r2)?);
    let cmp = compare::compare_reports(&a, &b, tol).map_err(|e| (e, None))?;
    println!("{}", serde_json::to_string_pretty(&cmp.to_json()).expect("comparison serializes"));
    Ok(cmp.equal())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            e.exit()
        }
        Err(e) => {
            report_error(&CliError::Usage { message: e.to_string().trim().to_string() }, None);
            return ExitCode::from(2);
        }
    };
    let (command, args) = match cli.command {
        Cmd::Decompose(a) => (Command::Decompose, a),
        Cmd::Transfer(a) => (Command::Transfer, a),
        Cmd::Verify(a) => (Command::Verify, a),
        Cmd::Trajectory(a) => (Command::Trajectory, a),
        Cmd::Convergence(a) => (Command::Convergence, a),
        Cmd::Compare { r1, r2, tol } => {
            return match compare(&r1, &r2, tol) {
                Ok(true) => ExitCode::SUCCESS,
                Ok(false) => ExitCode::from(1),
                Err((e, src)) => {
                    report_error(&e, src.as_deref());
                    ExitCode::from(e.exit_code())
                }
            };
        }
    };
    if args.configs.len() == 1 {
        match run_single(command, &args) {
            Ok(()) => ExitCode::SUCCESS,
            Err((e, src)) => {
                report_error(&e, src.as_deref());
                ExitCode::from(e.exit_code())
            }
        }
    } else {
        ExitCode::from(run_batch(command, &args))
    }
}
