use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use berrylab_core::bpe::AlphaMode;
use berrylab_core::dynamics::Integrator;

#[derive(Debug, Parser)]
#[command(name = "berrylab", version, about = "Berry phase estimation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    /// Wilson-loop Berry phase and spectral sweep of an instance.
    Oracle(OracleArgs),
    /// Two-speed Berry phase estimation.
    Bpe(BpeArgs),
    /// Forward/backward baseline that only resolves the phase modulo pi.
    Murta(MurtaArgs),
    /// Compile a circuit into a certified hardness instance.
    Genhard(GenhardArgs),
    /// Run the energy-threshold verifier on a witness.
    Verify(VerifyArgs),
    /// Spectral sweep `(lambda, E0, E1, gap, iA)` as CSV.
    Sweep(SweepArgs),
    /// Replay a run from its manifest.
    #[serde(skip)]
    Rerun(RerunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Oracle(_) => "oracle",
            Command::Bpe(_) => "bpe",
            Command::Murta(_) => "murta",
            Command::Genhard(_) => "genhard",
            Command::Verify(_) => "verify",
            Command::Sweep(_) => "sweep",
            Command::Rerun(_) => "rerun",
        }
    }

    pub fn out(&self) -> Option<&PathBuf> {
        match self {
            Command::Oracle(a) => Some(&a.out),
            Command::Bpe(a) => Some(&a.common.out),
            Command::Murta(a) => Some(&a.common.out),
            Command::Genhard(a) => Some(&a.out),
            Command::Verify(a) => Some(&a.out),
            Command::Sweep(a) => Some(&a.out),
            Command::Rerun(_) => None,
        }
    }

    /// Moves the main output; secondary outputs follow it.
    pub fn redirect(&mut self, out: PathBuf) {
        match self {
            Command::Oracle(a) => {
                a.out = out;
                a.sweep_csv = None;
            }
            Command::Bpe(a) => a.common.out = out,
            Command::Murta(a) => a.common.out = out,
            Command::Genhard(a) => {
                a.out = out;
                a.provenance = None;
            }
            Command::Verify(a) => {
                a.out = out;
                a.csv = None;
            }
            Command::Sweep(a) => a.out = out,
            Command::Rerun(_) => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorArg {
    /// `split` for hardness instances, `trotter2` otherwise.
    Auto,
    Trotter1,
    Trotter2,
    Exact,
    Split,
}

impl IntegratorArg {
    pub fn resolve(self, hardness: bool) -> Integrator {
        match self {
            IntegratorArg::Auto if hardness => Integrator::SplitStatic,
            IntegratorArg::Auto | IntegratorArg::Trotter2 => Integrator::Trotter(2),
            IntegratorArg::Trotter1 => Integrator::Trotter(1),
            IntegratorArg::Exact => Integrator::ExactSlices,
            IntegratorArg::Split => Integrator::SplitStatic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaArg {
    Integer,
    Formula,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindArg {
    Bqp,
    Duqma,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct OracleArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// Wilson-loop grid size.
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Sweep CSV; defaults to the output path with extension `csv`.
    #[arg(long)]
    pub sweep_csv: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    pub sweep_points: usize,
}

/// Options shared by `bpe` and `murta`.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EstimationArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub epsilon_b: f64,
    #[arg(long)]
    pub eta: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Independent runs; run `i` uses seed `seed + i`.
    #[arg(long, default_value_t = 1)]
    pub runs: u64,
    /// Fixed base runtime instead of calibration.
    #[arg(long)]
    pub runtime: Option<f64>,
    #[arg(long, value_enum, default_value_t = IntegratorArg::Auto)]
    pub integrator: IntegratorArg,
    /// Guiding-state overlap required for hardness instances.
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
    /// Wilson grid for an oracle value in the report.
    #[arg(long)]
    pub oracle_n: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BpeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: EstimationArgs,
    #[arg(long, value_enum, default_value_t = AlphaArg::Integer)]
    pub alpha_mode: AlphaArg,
    /// Cap on `(alpha - 1) T H_max` for the integer mode.
    #[arg(long)]
    pub alpha_cap: Option<f64>,
    #[arg(long, requires_all = ["interval_b", "delta"])]
    pub interval_a: Option<f64>,
    #[arg(long, requires_all = ["interval_a", "delta"])]
    pub interval_b: Option<f64>,
    #[arg(long, requires_all = ["interval_a", "interval_b"])]
    pub delta: Option<f64>,
}

impl BpeArgs {
    pub fn alpha(&self) -> AlphaMode {
        match self.alpha_mode {
            AlphaArg::Integer => AlphaMode::IntegerReciprocal { cap: self.alpha_cap },
            AlphaArg::Formula => AlphaMode::Formula,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MurtaArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: EstimationArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GenhardArgs {
    #[arg(long)]
    pub circuit: PathBuf,
    #[arg(long, value_enum)]
    pub kind: KindArg,
    /// Perturbation strength; `gap / 8` when absent.
    #[arg(long)]
    pub r: Option<f64>,
    /// Idle steps appended to the circuit.
    #[arg(long = "m")]
    pub m: usize,
    /// Output-penalty strength for `duqma`.
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    /// Witness bit string over the witness qubits, first character first.
    #[arg(long)]
    pub witness: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    /// Provenance JSON; defaults to `<out>.provenance.json`.
    #[arg(long)]
    pub provenance: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct VerifyArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// `true` (stored witness), `ground`, `excited`, or a witness bit string.
    #[arg(long)]
    pub witness: String,
    #[arg(long)]
    pub runs: u64,
    #[arg(long)]
    pub seed: u64,
    /// Transcripts as a JSON array.
    #[arg(long)]
    pub out: PathBuf,
    /// Aggregate accept rates; defaults to the output path with extension `csv`.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// BPE precision; half the certified delta when absent.
    #[arg(long)]
    pub epsilon_b: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub eta: f64,
    #[arg(long, value_enum, default_value_t = IntegratorArg::Auto)]
    pub integrator: IntegratorArg,
    #[arg(long)]
    pub energy_precision: Option<f64>,
    /// `Delta(|x|)` of the rejection branch.
    #[arg(long, default_value_t = 1.0 / 12.0)]
    pub delta_x: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub points: usize,
    /// Finite-difference step of the connection.
    #[arg(long, default_value_t = 1e-4)]
    pub h: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RerunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Write the main output here instead of the recorded path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
