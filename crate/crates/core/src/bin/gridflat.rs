use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gridflat::commands::{cmd_run, cmd_sweep, cmd_tune, cmd_verify, RunOverrides};
use gridflat::tuning::DEFAULT_BAND_FACTOR;

/// Flatness-based grid-following inverter simulator.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a configuration and write the record as CSV.
    Run {
        /// Configuration file (defaults to the bundled weak-grid experiment).
        #[arg(long)]
        config: Option<PathBuf>,
        /// CSV output path.
        #[arg(long, short)]
        output: PathBuf,
        /// Integration step override (s).
        #[arg(long)]
        dt: Option<f64>,
        /// End time override (s).
        #[arg(long)]
        t_end: Option<f64>,
        /// Log every Nth step.
        #[arg(long)]
        decimation: Option<usize>,
    },
    /// Compute controller gains from two settling-time/damping pairs.
    Tune {
        #[arg(long)]
        ts1: f64,
        #[arg(long)]
        zeta1: f64,
        #[arg(long)]
        ts2: f64,
        #[arg(long)]
        zeta2: f64,
        #[arg(long, default_value_t = DEFAULT_BAND_FACTOR)]
        band_factor: f64,
    },
    /// Run the acceptance suite.
    Verify {
        /// Configuration file (defaults to the bundled weak-grid experiment).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Sweep grid resistance and inductance and report stability per point.
    Sweep {
        /// Base configuration whose grid impedance is replaced per point.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Grid resistance in ohm, `value` or `start:stop`.
        #[arg(long, allow_hyphen_values = true)]
        rg: String,
        /// Grid inductance in H, `value` or `start:stop`.
        #[arg(long, allow_hyphen_values = true)]
        lg: String,
        /// Points per axis.
        #[arg(long, default_value_t = 1)]
        steps: usize,
        /// CSV output path (standard output if omitted).
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are validation failures; help and version succeed
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let (mut out, mut err) = (io::stdout().lock(), io::stderr().lock());
    let status = match cli.command {
        Command::Run {
            config,
            output,
            dt,
            t_end,
            decimation,
        } => {
            let ov = RunOverrides {
                dt,
                t_end,
                decimation,
            };
            cmd_run(config.as_deref(), &output, ov, &mut out, &mut err)
        }
        Command::Tune {
            ts1,
            zeta1,
            ts2,
            zeta2,
            band_factor,
        } => cmd_tune(ts1, zeta1, ts2, zeta2, band_factor, &mut out, &mut err),
        Command::Verify { config } => cmd_verify(config.as_deref(), &mut out, &mut err),
        Command::Sweep {
            config,
            rg,
            lg,
            steps,
            output,
        } => cmd_sweep(
            config.as_deref(),
            &rg,
            &lg,
            steps,
            output.as_deref(),
            &mut out,
            &mut err,
        ),
    };
    ExitCode::from(status.code() as u8)
}
