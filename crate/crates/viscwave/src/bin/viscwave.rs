use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use viscwave::commands;
use viscwave::config::load_config;
use viscwave::runner::{self, all_mandatory_hold, output_dir, Verdict};

/// Viscous gravity-wave simulator and validation suites.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a configured run.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare the solver against the closed-form linear propagator.
    LinearValidate {
        #[arg(long, default_value_t = 3.0)]
        alpha: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 3])]
        modes: Vec<usize>,
        #[arg(long, default_value_t = 1.0)]
        t_final: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value = "out/linear")]
        out: PathBuf,
    },
    /// Manufactured solution, elliptic estimates and kernel bounds.
    EllipticValidate {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "out/elliptic")]
        out: PathBuf,
    },
    /// Randomized trials of the Wiener-space inequalities.
    LintInequalities {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "out/lint")]
        out: PathBuf,
    },
}

fn report(verdicts: &[Verdict], dir: &Path) -> ExitCode {
    for v in verdicts {
        println!("{}", serde_json::to_string(v).expect("verdicts serialize"));
    }
    eprintln!("outputs in {}", dir.display());
    if all_mandatory_hold(verdicts) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn execute(cmd: Command) -> viscwave::Result<ExitCode> {
    match cmd {
        Command::Run { config } => {
            let cfg = load_config(&config)?;
            let dir = output_dir(&cfg.output.dir);
            let traj = runner::run(&cfg, &dir)?;
            Ok(report(&traj.verdicts, &dir))
        }
        Command::LinearValidate { alpha, modes, t_final, dt, out } => {
            let dir = output_dir(&out);
            let rows = commands::linear_validate(alpha, &modes, t_final, dt)?;
            std::fs::create_dir_all(&dir)?;
            runner::write_csv(&dir.join("linear.csv"), &rows)?;
            let verdicts = commands::linear_verdicts(&rows);
            runner::write_jsonl(&dir.join("verdicts.jsonl"), &verdicts)?;
            Ok(report(&verdicts, &dir))
        }
        Command::EllipticValidate { trials, seed, out } => {
            let dir = output_dir(&out);
            let rep = commands::elliptic_validate(trials, seed)?;
            commands::write_elliptic(&dir, &rep)?;
            Ok(report(&rep.verdicts, &dir))
        }
        Command::LintInequalities { trials, seed, out } => {
            let dir = output_dir(&out);
            let rep = commands::lint_inequalities(trials, seed)?;
            commands::write_lint(&dir, &rep)?;
            Ok(report(&rep.verdicts, &dir))
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
