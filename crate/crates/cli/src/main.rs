use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mtsvm::Problem;
use mtsvm_cli::bench::{bench, render, write_report, BenchOptions};
use mtsvm_cli::calibrate::{calibrate, write_calibration, CalibrationOptions};
use mtsvm_cli::experiment::{run_command, Command, Overrides};
use mtsvm_cli::timing::parse_grid;
use mtsvm_cli::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "mtsvm", version, about = "Federated multi-task SVM experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment configuration (TOML).
    config: PathBuf,
    /// Output directory; defaults to `<output_dir>/<name>` from the config.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Run this single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory with the UCI HAR `train/` and `test/` folders.
    #[arg(long)]
    ucihar_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProblemArg {
    Classification,
    Regression,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the configured modes and responder fractions.
    Run(RunArgs),
    /// Run the Bernoulli and Beta masking grid on full and light data.
    MaskStudy(RunArgs),
    /// Fit the compute-delay model to timed sweeps.
    CalibrateDelays {
        /// Comma-separated `NxD` grid.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long, default_value_t = 10)]
        repetitions: usize,
        #[arg(long, value_enum, default_value = "classification")]
        problem: ProblemArg,
        #[arg(long, default_value = "delay_calibration.toml")]
        output: PathBuf,
    },
    /// Time classification and regression sweeps and check linear scaling.
    Bench {
        /// Comma-separated `LxD` sizes.
        #[arg(long)]
        sizes: Option<String>,
        #[arg(long, default_value_t = 9)]
        repetitions: usize,
        /// Also write the report as JSON.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn overrides(args: &RunArgs) -> Overrides {
    Overrides { output_dir: args.output_dir.clone(), seed: args.seed, ucihar_dir: args.ucihar_dir.clone() }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Cmd::Run(args) => {
            let dir = run_command(Command::Run, &args.config, &overrides(&args))?;
            println!("wrote {}", dir.display());
        }
        Cmd::MaskStudy(args) => {
            let dir = run_command(Command::MaskStudy, &args.config, &overrides(&args))?;
            println!("wrote {}", dir.display());
        }
        Cmd::CalibrateDelays { grid, repetitions, problem, output } => {
            let mut options = CalibrationOptions { repetitions, ..CalibrationOptions::default() };
            if let Some(g) = grid {
                options.grid = parse_grid(&g)?;
            }
            options.problem = match problem {
                ProblemArg::Classification => Problem::Classification,
                ProblemArg::Regression => Problem::Regression,
            };
            let c = calibrate(&options)?;
            write_calibration(&output, &c)?;
            println!(
                "c_nd={:e} c_n={:e} c_d={:e} c_0={:e} sigma_ratio={:.4} r2={:.5}",
                c.delay.c_nd, c.delay.c_n, c.delay.c_d, c.delay.c_0, c.delay.sigma_ratio, c.fit.r_squared
            );
            for p in &c.fit.points {
                println!("n={:>6} d={:>6} mean={:.4e} residual={:+.3e}", p.n, p.d, p.mean_seconds, p.residual_seconds);
            }
            println!("wrote {}", output.display());
        }
        Cmd::Bench { sizes, repetitions, output } => {
            let mut options = BenchOptions { repetitions, ..BenchOptions::default() };
            if let Some(s) = sizes {
                options.sizes = parse_grid(&s)?;
            }
            let report = bench(&options)?;
            print!("{}", render(&report));
            if let Some(path) = output {
                write_report(&path, &report)?;
            }
            if !report.passed {
                return Err(CliError::Assertion("benchmark checks failed".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
