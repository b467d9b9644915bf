use clap::{Parser, Subcommand};
use quadriclab::{
    render_bounds, render_decompose, run_suite, run_verify, ExitClass, RunConfig,
};
use quadriclab_core::theta::Precision;
use std::path::PathBuf;
use std::process::ExitCode;

/// Laboratory for the quadrics through abelian surfaces embedded by a
/// polarization of type (1, n): exact Heisenberg decompositions, counting
/// bounds, and independent numerical verification via theta functions.
#[derive(Parser)]
#[command(name = "quadriclab", version, disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the decomposition of Sym^2 V into Heisenberg modules.
    Decompose {
        #[arg(long)]
        n: u32,
    },
    /// Print admissible kernel dimensions, base-quadric counts and the
    /// enumerated ideal tuples for a range of levels.
    Bounds {
        #[arg(long, default_value_t = 5)]
        from: u32,
        #[arg(long, default_value_t = 13)]
        to: u32,
    },
    /// Run the numerical verification pipeline for one level and check the
    /// results against the counting predictions.
    Verify {
        #[arg(long)]
        n: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Sample points for the kernel computation; default 2n(n+1).
        #[arg(long)]
        samples: Option<usize>,
        /// Relative singular-value tolerance for the kernel cut.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Certified truncation target for theta evaluation.
        #[arg(long, default_value_t = 1e-13)]
        tail: f64,
        /// Summation mode: f64 (compensated) or dd (double-double).
        #[arg(long, default_value = "f64")]
        precision: String,
        /// Period matrix file instead of seeded sampling.
        #[arg(long)]
        omega: Option<PathBuf>,
        /// Report path; the JSON twin lands next to it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full verification matrix n = 5..13.
    Suite {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Directory for the per-run report files.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version through the error path with exit 0
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(ExitClass::Usage.code() as u8);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let (output, class) = dispatch(cli.command);
    match class {
        ExitClass::Ok | ExitClass::ExpectationFailed => print!("{output}"),
        _ => eprint!("{output}"),
    }
    ExitCode::from(class.code() as u8)
}

fn dispatch(command: Command) -> (String, ExitClass) {
    match command {
        Command::Decompose { n } => match render_decompose(n) {
            Ok(table) => (table, ExitClass::Ok),
            Err(e) => (format!("error: {}\n", e.message()), e.exit_class()),
        },
        Command::Bounds { from, to } => match render_bounds(from, to) {
            Ok(table) => (table, ExitClass::Ok),
            Err(e) => (format!("error: {}\n", e.message()), e.exit_class()),
        },
        Command::Verify {
            n,
            seed,
            samples,
            tol,
            tail,
            precision,
            omega,
            out,
        } => {
            let Some(precision) = Precision::parse(&precision) else {
                return (
                    format!("error: unknown precision mode `{precision}` (f64 or dd)\n"),
                    ExitClass::Usage,
                );
            };
            let cfg = RunConfig {
                n,
                seed,
                samples,
                tolerance: tol,
                target_tail: tail,
                precision,
                omega_file: omega,
                out,
            };
            match run_verify(&cfg) {
                Ok(outcome) => {
                    let class = outcome.exit_class();
                    (outcome.summary(), class)
                }
                Err(e) => (format!("error: {}\n", e.message()), e.exit_class()),
            }
        }
        Command::Suite { seed, out } => match run_suite(seed, out.as_deref()) {
            Ok((summary, class)) => (summary, class),
            Err(e) => (format!("error: {}\n", e.message()), e.exit_class()),
        },
    }
}
