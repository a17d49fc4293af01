//! `nonlocal`: run one experiment config or a directory of them.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nonlocal_core::experiment::{exit_code_for, run, verify_suite, ExperimentConfig, RunOptions, Task};

#[derive(Parser, Debug)]
#[command(name = "nonlocal", version, about = "Nonlocal operator experiments")]
struct Cli {
    /// Experiment file (TOML).
    #[arg(long, conflicts_with = "suite", required_unless_present = "suite")]
    config: Option<PathBuf>,
    /// Directory of experiment files; prints a pass/fail matrix.
    #[arg(long)]
    suite: Option<PathBuf>,
    /// Output directory (overrides the config's `output_dir`).
    #[arg(long, env = "NONLOCAL_OUTPUT_DIR")]
    output: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, default_value_t = default_jobs())]
    jobs: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Task name, e.g. `solve_ball` or `SolveBall`.
    #[arg(long)]
    task: Option<String>,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn fail(e: nonlocal_core::Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_code_for(&e) as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(dir) = &cli.suite {
        let out = cli.output.clone().unwrap_or_else(|| PathBuf::from("suite_output"));
        return match verify_suite(dir, &out, cli.jobs) {
            Ok(s) => {
                let _ = write!(std::io::stdout(), "{}", s.table());
                ExitCode::from(s.exit_code() as u8)
            }
            Err(e) => fail(e),
        };
    }
    let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs.max(1)).build_global();
    let task = match cli.task.as_deref().map(str::parse::<Task>).transpose() {
        Ok(t) => t,
        Err(e) => return fail(e),
    };
    let cfg = match ExperimentConfig::load(cli.config.as_ref().unwrap()) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let opts = RunOptions { output_dir: cli.output.clone(), seed: cli.seed, task };
    match run(&cfg, &opts) {
        Ok(s) => {
            // a closed pipe is not an error
            let mut out = std::io::stdout().lock();
            let _ = writeln!(out, "{}: {} ({})", s.task, if s.passed { "pass" } else { "fail" }, s.detail);
            for f in &s.files {
                let _ = writeln!(out, "  {} {}{}", f.sha256, f.path, if f.partial { " (partial)" } else { "" });
            }
            ExitCode::from(s.exit_code() as u8)
        }
        Err(e) => fail(e),
    }
}
