//! Run configuration. Every subcommand's arguments serialize into the
//! sidecar so that `replay` can reproduce the run.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use phasesync::bvp::{BvpOptions, BvpOrder};
use phasesync::{Error, Prc};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "phasesync", version, about = "Noise-induced synchronization of phase oscillators")]
#[command(after_help = "\
Canonical PRCs (--prc) have unit L2 norm:
  type2    -sqrt(2) sin(2 pi theta)
  type1    sqrt(2/3) (1 - cos(2 pi theta))
  optimal  order-sigma^2 optimum for the weights --a --b --c (default 1 0 0)
Any other value is read as a JSON file or inline object {\"cos\": [...], \"sin\": [...]}.

Exit codes: 0 success, 2 invalid or inadmissible parameters, 3 solver did not converge, 1 other.
PHASESYNC_THREADS sets the number of worker threads.")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, Subcommand, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    /// Analytic and numeric optimal PRC for the weights (a, b, c).
    Optimize(OptimizeArgs),
    /// Lyapunov exponent by every available method.
    Lyapunov(LyapunovArgs),
    /// Stationary phase density.
    Density(DensityArgs),
    /// Phase trajectory, or order parameter of an ensemble.
    Simulate(SimulateArgs),
    /// Optimal PRC metrics over a list of noise amplitudes or family parameters.
    Sweep(SweepArgs),
    /// Re-run the configuration stored in a sidecar file.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
pub struct OutputArgs {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output file (default: standard output).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Sidecar file (default: `<out>.meta.json`; none when writing to standard output).
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Args, Serialize, Deserialize)]
pub struct Weights {
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub a: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub b: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub c: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Order {
    #[default]
    Auto,
    Fourth,
    Second,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct SolverArgs {
    /// Initial number of Fourier modes.
    #[arg(long, default_value_t = 32)]
    pub modes: usize,
    /// Largest number of Fourier modes tried.
    #[arg(long, default_value_t = 256)]
    pub max_modes: usize,
    /// Collocation grid size.
    #[arg(long, default_value_t = 256)]
    pub grid: usize,
    /// Newton tolerance.
    #[arg(long, default_value_t = 1e-11)]
    pub tol: f64,
    #[arg(long, default_value_t = 50)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value_t = Order::Auto)]
    pub order: Order,
}

impl SolverArgs {
    pub fn options(&self) -> BvpOptions {
        BvpOptions {
            modes: self.modes,
            grid: self.grid,
            tol: self.tol,
            max_iter: self.max_iter,
            max_modes: self.max_modes,
            order: match self.order {
                Order::Auto => BvpOrder::Auto,
                Order::Fourth => BvpOrder::Fourth,
                Order::Second => BvpOrder::Second,
            },
            ..BvpOptions::default()
        }
    }
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub weights: Weights,
    #[arg(long, default_value_t = 0.05)]
    pub sigma: f64,
    /// Points of the output curves.
    #[arg(long, default_value_t = 256)]
    pub points: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct PrcArgs {
    /// type1 | type2 | optimal | JSON file | inline JSON.
    #[arg(long, default_value = "type2")]
    pub prc: String,
    /// Weights used by `--prc optimal`.
    #[command(flatten)]
    pub weights: Weights,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct LyapunovArgs {
    #[command(flatten)]
    pub prc: PrcArgs,
    #[arg(long, default_value_t = 0.05)]
    pub sigma: f64,
    /// Grid of the exact density used by the analytic method.
    #[arg(long, default_value_t = 256)]
    pub grid: usize,
    /// Horizon of each Monte Carlo realization.
    #[arg(long = "T", default_value_t = 1000.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Monte Carlo realizations (0 skips the simulation).
    #[arg(long, default_value_t = 16)]
    pub realizations: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityKind {
    Exact,
    /// Small-noise series through σ².
    Perturbative2,
    /// Small-noise series through σ⁴.
    Perturbative4,
    /// Histogram of a simulated trajectory.
    Empirical,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct DensityArgs {
    #[command(flatten)]
    pub prc: PrcArgs,
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    #[arg(long, value_enum, default_value_t = DensityKind::Exact)]
    pub method: DensityKind,
    /// Grid points, or bins for the empirical method.
    #[arg(long, default_value_t = 256)]
    pub grid: usize,
    /// Empirical method: horizon, step, burn-in and seed.
    #[arg(long = "T", default_value_t = 2100.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 100.0)]
    pub burn_in: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub prc: PrcArgs,
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    #[arg(long = "T", default_value_t = 100.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Keep every n-th step.
    #[arg(long, default_value_t = 1)]
    pub record_every: usize,
    /// Simulate this many oscillators sharing the noise and emit `t,R`.
    #[arg(long = "N")]
    pub ensemble: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub weights: Weights,
    #[arg(long, value_delimiter = ',', required = true)]
    pub sigmas: Vec<f64>,
    /// Family parameters K (requires a = 0, c > 0).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub ks: Option<Vec<f64>>,
    /// Grid of the exact densities used for λ.
    #[arg(long, default_value_t = 256)]
    pub density_grid: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Clone, Debug, Args)]
pub struct ReplayArgs {
    /// Sidecar written by an earlier run.
    pub sidecar_file: PathBuf,
    /// Output file (default: standard output).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Sidecar of the replayed run.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
}

impl Command {
    pub fn output_mut(&mut self) -> Option<&mut OutputArgs> {
        match self {
            Command::Optimize(a) => Some(&mut a.output),
            Command::Lyapunov(a) => Some(&mut a.output),
            Command::Density(a) => Some(&mut a.output),
            Command::Simulate(a) => Some(&mut a.output),
            Command::Sweep(a) => Some(&mut a.output),
            Command::Replay(_) => None,
        }
    }

    /// Inlines PRC files so the serialized config does not depend on them.
    pub fn resolve_inputs(&mut self) -> Result<(), Error> {
        let prc = match self {
            Command::Lyapunov(a) => &mut a.prc,
            Command::Density(a) => &mut a.prc,
            Command::Simulate(a) => &mut a.prc,
            _ => return Ok(()),
        };
        if !matches!(prc.prc.as_str(), "type1" | "type2" | "optimal") && !prc.prc.trim_start().starts_with('{') {
            let text = std::fs::read_to_string(&prc.prc)?;
            let curve: Prc = serde_json::from_str(&text)?;
            prc.prc = serde_json::to_string(&curve)?;
        }
        Ok(())
    }
}
