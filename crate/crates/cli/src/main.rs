use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dynheight_cli::run::{resolve_precision, write_outputs};
use dynheight_cli::{run, ProblemConfig, RunOptions};

#[derive(Parser)]
#[command(name = "dynheight", version, about = "Height growth and orbit intersections for maps of products of projective spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the tasks of a problem file.
    Run {
        config: PathBuf,
        /// Task name or kind to run (repeatable); all tasks by default.
        #[arg(long = "task", value_name = "NAME")]
        tasks: Vec<String>,
        #[arg(long, default_value = "dynheight-out")]
        out: PathBuf,
        /// Fractional bits for canonical heights; defaults to $DYNHEIGHT_PRECISION.
        #[arg(long, value_name = "BITS")]
        precision: Option<u32>,
        /// Search horizon for dml tasks.
        #[arg(long, value_name = "N")]
        horizon: Option<usize>,
        /// Canonical-height tolerance.
        #[arg(long, value_name = "X")]
        tol: Option<f64>,
    },
}

fn main() -> ExitCode {
    let Command::Run { config, tasks, out, precision, horizon, tol } = Cli::parse().command;
    let precision = match resolve_precision(precision) {
        Ok(p) => p,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    let problem = match ProblemConfig::load(&config).and_then(|c| c.validate()) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(1);
        }
    };
    let opts = RunOptions { select: tasks, out_dir: Some(out.clone()), precision, horizon, tol };
    let report = run(&problem, &opts);
    for t in &report.tasks {
        let status = match &t.failure {
            Some(e) => format!("error: {e}"),
            None if t.horizon_limited => "ok (horizon-limited)".into(),
            None => "ok".into(),
        };
        eprintln!("{:<24} {:<12} {:>10.1} ms  {status}", t.name, t.kind, t.elapsed_ms);
    }
    match write_outputs(&report, &out) {
        Ok(path) => println!("{}", path.display()),
        Err(e) => {
            eprintln!("error: cannot write outputs to {}: {e}", out.display());
            return ExitCode::from(3);
        }
    }
    ExitCode::from(report.exit_code() as u8)
}
