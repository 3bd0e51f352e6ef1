//! `qdsim`: command-line front end for the qudit decoherence toolkit.
//!
//! Exit codes: 0 on success, 1 on invalid input, 2 when a reproduce command
//! completes but a row misses its acceptance threshold.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use qudit_decoherence::dynamics::DampingConvention;
use qudit_decoherence::state::Subsystem;

use report::Format;

#[derive(Parser)]
#[command(
    name = "qdsim",
    version,
    about = "Simulate dephasing and amplitude damping on photonic path qudits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a slit-entangled pair state and print its concurrence.
    Prepare(PrepareArgs),
    /// Apply uniform dephasing to the slit density matrix of a state.
    Dephase(DephaseArgs),
    /// Compile the SLM film realizing uniform dephasing.
    Film(FilmArgs),
    /// No-jump amplitude-damping evolution of a qutrit pair state.
    Damp(DampArgs),
    /// Monte Carlo trajectories of amplitude damping from a Fock state.
    Trajectories(TrajectoriesArgs),
    /// Synthesize a conditional interference scan.
    Pattern(PatternArgs),
    /// Fit the dephasing parameter to a scan.
    FitP(FitPArgs),
    /// Recover p from synthetic scans for every film on the ququart grid.
    ReproduceTable1(Table1Args),
    /// Concurrence, uncertainty and populations from coincidence counts.
    ReproduceTable2(Table2Args),
}

/// Reading of the damping rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Convention {
    /// Amplitude of level n decays as exp(-n γt).
    Eq17,
    /// Population of level n decays as exp(-n γt).
    Table2,
}

impl Convention {
    pub fn damping(self) -> DampingConvention {
        match self {
            Convention::Eq17 => DampingConvention::AmplitudeDecay,
            Convention::Table2 => DampingConvention::PopulationDecay,
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Convention::Eq17 => "eq17 (amplitude decay)",
            Convention::Table2 => "table2 (population decay)",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Arm {
    Signal,
    Idler,
}

impl From<Arm> for Subsystem {
    fn from(a: Arm) -> Self {
        match a {
            Arm::Signal => Subsystem::Signal,
            Arm::Idler => Subsystem::Idler,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Noise {
    Noiseless,
    Poisson,
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["uniform", "amps", "table2"])))]
pub struct PrepareArgs {
    /// Number of slits.
    #[arg(long, required_unless_present = "table2")]
    pub d: Option<usize>,
    /// Equal amplitudes on every slit.
    #[arg(long)]
    pub uniform: bool,
    /// Real slit amplitudes, comma separated; normalized on use.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub amps: Option<Vec<f64>>,
    /// Schmidt-form state estimated from the shipped γt = 0 counts.
    #[arg(long)]
    pub table2: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct DephaseArgs {
    /// State file (pure Schmidt-form or slit density matrix).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub p: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct FilmArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long, allow_hyphen_values = true)]
    pub p: f64,
    #[arg(long, default_value_t = qudit_decoherence::film::DEFAULT_FRAMES)]
    pub n_frames: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct DampArgs {
    /// Qutrit pair state file in Schmidt form.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma_t: f64,
    #[arg(long, value_enum, default_value_t = Convention::Eq17)]
    pub convention: Convention,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct TrajectoriesArgs {
    /// Oscillator truncation.
    #[arg(long, default_value_t = 3)]
    pub dim: usize,
    /// Initial Fock level; defaults to the top level.
    #[arg(long)]
    pub level: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma_t: f64,
    #[arg(long, default_value_t = 10_000)]
    pub n_trajectories: usize,
    /// Time step in units of 1/γ; defaults to the largest stable step.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Convention::Eq17)]
    pub convention: Convention,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("position").args(["fixed_position", "at_xpi"])))]
pub struct PatternArgs {
    /// Slit state file; defaults to the uniform state on `--d` slits.
    #[arg(long)]
    pub state: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub d: usize,
    #[arg(long, allow_hyphen_values = true)]
    pub p: f64,
    #[arg(long, value_enum, default_value_t = Arm::Signal)]
    pub fixed_arm: Arm,
    /// Position of the fixed detector in mm.
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub fixed_position: f64,
    /// Place the fixed detector at x_π.
    #[arg(long)]
    pub at_xpi: bool,
    #[arg(long, value_enum, default_value_t = Noise::Poisson)]
    pub noise: Noise,
    #[arg(long, default_value_t = 500.0)]
    pub peak_counts: f64,
    /// Required for Poisson noise.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Structured writes a scan file; tabular writes position/counts TSV.
    #[arg(long, value_enum, default_value_t = Format::Structured)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct FitPArgs {
    #[arg(long)]
    pub scan: PathBuf,
    /// Slit state file; defaults to the uniform state on `--d` slits.
    #[arg(long)]
    pub state: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub d: usize,
}

#[derive(Args)]
pub struct Table1Args {
    #[arg(long, required_unless_present = "noiseless")]
    pub seed: Option<u64>,
    /// Use exact expected counts instead of Poisson draws.
    #[arg(long)]
    pub noiseless: bool,
    #[arg(long, default_value_t = 500.0)]
    pub peak_counts: f64,
    #[arg(long, value_enum, default_value_t = Format::Structured)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct Table2Args {
    /// Counts file; defaults to the shipped table.
    #[arg(long)]
    pub counts: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = qudit_decoherence::experiment::BOOTSTRAP_RESAMPLES)]
    pub resamples: usize,
    #[arg(long, value_enum, default_value_t = Format::Structured)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli.command) {
        Ok(outcome) => {
            if let Some((path, text)) = &outcome.file {
                if let Err(e) = std::fs::write(path, text) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return ExitCode::from(1);
                }
            }
            print!("{}", outcome.stdout);
            if outcome.threshold_failed {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
