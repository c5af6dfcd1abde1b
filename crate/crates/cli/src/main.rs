//! `tlcu`: simulate, verify and cost Hamiltonian evolutions with the
//! truncated-Taylor-series LCU method.
//!
//! Exit codes: 0 on success, 1 on invalid input, 2 when a run breaks one of
//! the simulator's invariants (kept probability floor, identity residual,
//! accuracy against the oracle).

mod input;
mod report;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tlcu_core::resources::CostModel;
use tlcu_core::Limits;

#[derive(Debug, Parser)]
#[command(name = "tlcu", version, about = "Hamiltonian simulation by truncated Taylor series and robust oblivious amplitude amplification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate exp(-iHt)|ψ⟩ for a time-independent Hamiltonian (.ham).
    Simulate(SimulateArgs),
    /// Simulate the time-ordered evolution of a polynomial H(t) (.thm).
    SimulateTd(SimulateArgs),
    /// Qubit and gate counts of the circuit construction.
    Estimate(EstimateArgs),
    /// Check the amplified closed form on random states for the planned tables.
    VerifyOaa(VerifyArgs),
    /// Resource estimates over a list of error budgets.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct Caps {
    /// Largest qubit count for dense oracle matrices.
    #[arg(long, env = "TLCU_DENSE_CAP", default_value_t = Limits::default().dense_qubits)]
    dense_cap: usize,
    /// Largest truncation order K.
    #[arg(long, default_value_t = Limits::default().max_order)]
    max_order: usize,
    /// Largest coefficient table length m.
    #[arg(long, default_value_t = Limits::default().max_table_len)]
    max_table_len: usize,
    /// Largest number of time samples M per segment.
    #[arg(long, default_value_t = Limits::default().max_time_steps)]
    max_time_steps: usize,
}

impl Caps {
    fn limits(&self) -> Limits {
        Limits {
            dense_qubits: self.dense_cap,
            max_order: self.max_order,
            max_table_len: self.max_table_len,
            max_time_steps: self.max_time_steps,
            ..Limits::default()
        }
    }
}

#[derive(Debug, Args)]
struct Common {
    /// Hamiltonian file (.ham, or .thm for time-dependent input).
    #[arg(long)]
    ham: PathBuf,
    /// Evolution time t.
    #[arg(long, allow_hyphen_values = true)]
    time: f64,
    /// Error budget ε in (0, 1).
    #[arg(long, allow_hyphen_values = true)]
    eps: f64,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    caps: Caps,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Initial state: a basis index, `plus`, or a file of amplitudes
    /// (`re [im]` per line).
    #[arg(long, default_value = "0")]
    state: String,
    /// Skip the dense oracle comparison.
    #[arg(long)]
    no_oracle: bool,
    /// Record wall-clock time in the report (makes the output
    /// non-reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, Args)]
struct CostArgs {
    /// Gates per amplitude of an L-dimensional state preparation.
    #[arg(long, default_value_t = CostModel::default().c_prep)]
    c_prep: u64,
    /// Gates per control qubit of a generalized Toffoli.
    #[arg(long, default_value_t = CostModel::default().c_toffoli)]
    c_toffoli: u64,
}

impl CostArgs {
    fn model(&self) -> CostModel {
        CostModel {
            c_prep: self.c_prep,
            c_toffoli: self.c_toffoli,
        }
    }
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    cost: CostArgs,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// Random states per table.
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long, default_value_t = tlcu_core::engine::DEFAULT_SEED)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Hamiltonian file (.ham).
    #[arg(long)]
    ham: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    time: f64,
    /// Comma-separated error budgets.
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    eps_list: Vec<f64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    caps: Caps,
    #[command(flatten)]
    cost: CostArgs,
}

/// A failed run, with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    pub fn invariant(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<tlcu_core::Error> for Failure {
    fn from(err: tlcu_core::Error) -> Self {
        let code = if err.is_invariant_violation() { 2 } else { 1 };
        Self {
            code,
            message: err.to_string(),
        }
    }
}

/// Output of a command: the report text and, when an invariant broke after
/// the report was produced, the failure to signal.
pub struct Outcome {
    pub text: String,
    pub failure: Option<Failure>,
}

fn check_time(t: f64) -> Result<(), Failure> {
    if !t.is_finite() || t < 0.0 {
        return Err(Failure::invalid("time must be nonnegative"));
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<(), Failure> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Failure::invalid("epsilon must lie in (0, 1)"));
    }
    Ok(())
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| Failure::invalid(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Failure::invalid(format!("cannot write output: {e}")))
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (outcome, out) = match cli.command {
        Command::Simulate(args) => {
            check_time(args.common.time)?;
            check_eps(args.common.eps)?;
            let o = report::simulate(&args, false)?;
            (o, args.common.out)
        }
        Command::SimulateTd(args) => {
            check_time(args.common.time)?;
            check_eps(args.common.eps)?;
            let o = report::simulate(&args, true)?;
            (o, args.common.out)
        }
        Command::Estimate(args) => {
            check_time(args.common.time)?;
            check_eps(args.common.eps)?;
            let o = report::estimate(&args)?;
            (o, args.common.out)
        }
        Command::VerifyOaa(args) => {
            check_time(args.common.time)?;
            check_eps(args.common.eps)?;
            let o = report::verify(&args)?;
            (o, args.common.out)
        }
        Command::Sweep(args) => {
            check_time(args.time)?;
            for &e in &args.eps_list {
                check_eps(e)?;
            }
            let o = report::sweep(&args)?;
            (o, args.out)
        }
    };
    emit(&outcome.text, out.as_ref())?;
    match outcome.failure {
        Some(f) => Err(f),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tlcu_core::Error;

    #[test]
    fn core_errors_map_to_exit_codes() {
        let floor = Error::KeptProbabilityFloor {
            segment: 3,
            kept: 0.1,
            floor: 0.5,
        };
        assert_eq!(Failure::from(floor).code, 2);
        let budget = Error::TableBudgetExceeded { m: 10, budget: 5 };
        assert_eq!(Failure::from(budget).code, 1);
        assert_eq!(Failure::from(Error::EmptyInput).code, 1);
    }
}
