use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qht::harness::{self, Overrides, Status};

/// Optimize, sweep and inspect controlled qubit hypothesis tests.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; overrides `output_dir`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `optimizer.restarts`.
    #[arg(long)]
    restarts: Option<usize>,
    /// Worker threads for restarts and sweep points (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides { out: self.out.clone(), seed: self.seed, restarts: self.restarts, jobs: self.jobs }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one pulse and write record, pulse and trace.
    Optimize(Common),
    /// Optimize (or evaluate zero control) over a parameter list.
    Sweep(Common),
    /// Train optimal and robust pulses and compare them over a detuning window.
    Robust(Common),
    /// Compare analytic gradients with finite differences.
    Gradcheck(Common),
    /// Write Bloch-vector time series of both hypotheses.
    Trajectory {
        #[command(flatten)]
        common: Common,
        /// Pulse CSV to apply; zero control if absent.
        #[arg(long, value_name = "PATH")]
        controls: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Optimize(c) => harness::cmd_optimize(&c.config, &c.overrides()).map(|(status, record)| {
            let r = &record.result;
            println!(
                "P_e^H = {:.6}  P_e(fixed) = {:.6}  uncontrolled = {:.6}  iterations = {}  converged = {}",
                r.helstrom_error, r.fixed_local_error, record.outputs.pe_uncontrolled, r.iterations, r.converged
            );
            status
        }),
        Command::Sweep(c) => harness::cmd_sweep(&c.config, &c.overrides()),
        Command::Robust(c) => harness::cmd_robust(&c.config, &c.overrides()).map(|(status, s)| {
            let a = &s.report.average;
            println!(
                "<P_e^H> over [{:.4}, {:.4}]: uncontrolled = {:.6}  optimal = {:.6}  robust = {:.6}  reduction = {:.1}%",
                s.report.window.0,
                s.report.window.1,
                a.uncontrolled,
                a.optimal,
                a.robust,
                100.0 * s.robust_reduction
            );
            status
        }),
        Command::Gradcheck(c) => harness::cmd_gradcheck(&c.config, &c.overrides()).map(|(status, r)| {
            println!("exact      max relative error {:.3e}", r.exact);
            println!("truncated  max relative error {:.3e}", r.truncated);
            println!("truncated  at half step       {:.3e}  (ratio {:.2})", r.truncated_half_step, r.truncated_ratio);
            println!("max |gradient| {:.3e}", r.max_abs_gradient);
            status
        }),
        Command::Trajectory { common, controls } => {
            harness::cmd_trajectory(&common.config, controls.as_deref(), &common.overrides())
        }
    };
    match outcome {
        Ok(status) => {
            if status == Status::NotConverged {
                eprintln!("warning: optimization did not converge");
            }
            if status == Status::CheckFailed {
                eprintln!("error: exact gradient outside tolerance");
            }
            ExitCode::from(status.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
