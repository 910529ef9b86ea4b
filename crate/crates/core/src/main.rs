use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use slide_ds::cli::{self, CliError};
use slide_ds::geometry::Vec2;
use slide_ds::kinematics::DEFAULT_SINGULAR_ANGLE;
use slide_ds::simulator::MetricsConfig;

#[derive(Parser)]
#[command(
    name = "slide-ds",
    version,
    about = "Force-limited sliding controller simulator"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write trace.csv, metrics.json and plot_data.csv.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the Cartesian product of parameter axes, with repetitions.
    Sweep {
        scenario: PathBuf,
        /// `dotted.key=v1,v2,...`; may be repeated.
        #[arg(long = "axis", required = true)]
        axes: Vec<String>,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Recompute metrics from a trace file and print them as JSON.
    Metrics {
        trace: PathBuf,
        #[arg(long = "f-n", default_value_t = 45.0)]
        f_n: f64,
        /// Attractor as `x,y`.
        #[arg(long, value_parser = parse_point)]
        attractor: Option<Vec2>,
        #[arg(long, default_value_t = 0.15)]
        planner_offset: f64,
        #[arg(long, default_value_t = DEFAULT_SINGULAR_ANGLE)]
        singular_angle: f64,
    },
}

fn parse_point(s: &str) -> anyhow::Result<Vec2> {
    let (x, y) = s.split_once(',').context("expected x,y")?;
    Ok(Vec2::new(x.trim().parse()?, y.trim().parse()?))
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { scenario, out } => {
            let runs = cli::run_scenario(&scenario, &out)?;
            eprintln!("{} run(s) written to {}", runs.len(), out.display());
        }
        Command::Sweep {
            scenario,
            axes,
            reps,
            out,
        } => {
            let axes = axes
                .iter()
                .map(|a| cli::parse_axis(a))
                .collect::<Result<Vec<_>, _>>()?;
            let runs = cli::sweep(&scenario, &axes, reps, &out)?;
            eprintln!("{} run(s) written to {}", runs.len(), out.display());
        }
        Command::Metrics {
            trace,
            f_n,
            attractor,
            planner_offset,
            singular_angle,
        } => {
            let cfg = MetricsConfig {
                f_n_limit: f_n,
                attractor,
                planner_offset,
                singular_angle,
            };
            let m = cli::metrics_from_file(&trace, &cfg)?;
            cli::print_json(&m)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
