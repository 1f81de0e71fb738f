use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "bornlab",
    version,
    about = "Born-rule test laboratory for a driven qubit"
)]
pub struct Cli {
    /// Master seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Output directory (run directory for `simulate`, report directory otherwise).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Replace existing outputs.
    #[arg(long, global = true)]
    pub overwrite: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic run: manifest plus one counts file per job.
    Simulate(SimulateArgs),
    /// Fit `A sin theta + B cos theta + C` to a run and report residuals.
    Fit(FitArgs),
    /// Per-angle difference between two runs.
    Compare(CompareArgs),
    /// Error per gate from the amplitude decay over odd-n runs.
    Benchmark(BenchmarkArgs),
    /// Harmonic content of a run's residuals.
    Harmonics(FitArgs),
    /// Analytic formulas against brute-force propagation.
    OracleCheck(OracleArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Ideal,
    Epsilon,
    Iq,
    Transmon,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value_t = ModelKind::Ideal)]
    pub model: ModelKind,

    /// TOML model document; replaces every other model flag.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Real part of a constant epsilon (epsilon model).
    #[arg(long, allow_hyphen_values = true)]
    pub eps_re: Option<f64>,
    /// Imaginary part of a constant epsilon (epsilon model).
    #[arg(long, allow_hyphen_values = true)]
    pub eps_im: Option<f64>,

    /// Real part of the mixer imbalance (iq model).
    #[arg(long, allow_hyphen_values = true)]
    pub iq_re: Option<f64>,
    /// Imaginary part of the mixer imbalance (iq model).
    #[arg(long, allow_hyphen_values = true)]
    pub iq_im: Option<f64>,
    /// Pulse duration in ns (iq model).
    #[arg(long)]
    pub pulse_ns: Option<f64>,

    /// Drive frequency in rad/ns (transmon model).
    #[arg(long)]
    pub omega: Option<f64>,
    /// Anharmonicity in rad/ns (transmon model).
    #[arg(long)]
    pub omega_prime: Option<f64>,
    /// Propagate in the rotating-wave approximation (transmon model).
    #[arg(long)]
    pub rwa: bool,

    /// P(read 1 | true 0).
    #[arg(long)]
    pub readout_p01: Option<f64>,
    /// P(read 0 | true 1).
    #[arg(long)]
    pub readout_p10: Option<f64>,
    /// Per-gate contraction rate r.
    #[arg(long)]
    pub decoherence: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    /// Number of S_theta gates after the initial S.
    #[arg(long)]
    pub n: u32,
    #[arg(long, default_value_t = 1)]
    pub jobs: u32,
    /// Shots per circuit.
    #[arg(long, default_value_t = 8192)]
    pub shots: u64,
    /// Circuits per angle in each job.
    #[arg(long, default_value_t = 1)]
    pub circuits: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReferenceKind {
    /// Residuals against the fitted curve.
    Fitted,
    /// Residuals against the ideal Born curve.
    Ideal,
    /// Ideal curve with a fitted global phase offset.
    IdealPhased,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    pub run: PathBuf,
    #[arg(long, value_enum, default_value_t = ReferenceKind::Fitted)]
    pub reference: ReferenceKind,
    /// Inverse-variance weights instead of the unweighted fit.
    #[arg(long)]
    pub weighted: bool,
    /// |z| above which an angle is flagged.
    #[arg(long, default_value_t = 5.0)]
    pub threshold: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CompareOn {
    Residual,
    Probability,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub run_a: PathBuf,
    pub run_b: PathBuf,
    #[arg(long, value_enum, default_value_t = CompareOn::Residual)]
    pub on: CompareOn,
    #[arg(long, value_enum, default_value_t = ReferenceKind::Fitted)]
    pub reference: ReferenceKind,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    /// Nonlinear refinement after the log-linear fit.
    #[arg(long)]
    pub refine: bool,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Magnitude of the test imperfections.
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
    /// Test hook: negate the analytic result for this n mod 4 branch.
    #[arg(long, hide = true)]
    pub corrupt_branch: Option<u32>,
}
