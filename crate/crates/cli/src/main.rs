mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gmmkl::quadrature::QuadratureBudget;
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "gmmkl", version, about = "Gaussian-mixture approximation in KL divergence: constructions and certificates")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Seed for every random draw of the run.
    #[arg(long, global = true, default_value_t = 7)]
    pub seed: u64,
    /// Absolute and relative quadrature tolerance.
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub budget_tol: f64,
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// Worker threads; Monte Carlo streams are split per worker, so results
    /// depend on this value as well as on the seed.
    #[arg(long, global = true, default_value_t = 4)]
    pub workers: usize,
}

impl Common {
    pub fn budget(&self) -> QuadratureBudget {
        QuadratureBudget {
            abs_tol: self.budget_tol,
            rel_tol: self.budget_tol,
            ..QuadratureBudget::default()
        }
    }

    fn to_json(&self) -> serde_json::Value {
        json!({
            "seed": self.seed,
            "budget_tol": self.budget_tol,
            "out_dir": self.out_dir,
            "workers": self.workers,
        })
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build an approximating mixture sequence for a catalog target.
    Approximate(ApproximateArgs),
    /// Estimate KL(f || g) for a target and a mixture file.
    Kl(KlArgs),
    /// Second-moment lower bounds on KL(f || g) over a radius grid.
    Necessity(NecessityArgs),
    /// Check membership of a target in one of the density classes.
    ClassCheck(ClassCheckArgs),
    /// Run one of the counterexample verifiers.
    Counterexample(CounterexampleArgs),
    /// List the catalog targets and their metadata.
    Catalog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    Entropy,
    Support,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct ApproximateArgs {
    #[arg(long)]
    pub target: String,
    #[arg(long, value_enum, default_value_t = Route::Entropy)]
    pub route: Route,
    /// Last index of the entropy-route sequence.
    #[arg(long, default_value_t = 6)]
    pub m_max: u32,
    /// Number of pieces kept by the support route; all of them by default.
    #[arg(long = "L")]
    pub l: Option<usize>,
    /// Target divergence: final-KL check for the entropy route, piece
    /// budget for the support route (default 0.1 there).
    #[arg(long)]
    pub eps: Option<f64>,
    /// Truncation level when the target is `fstar`.
    #[arg(long, default_value_t = gmmkl::densities::FSTAR_N_MAX)]
    pub n_max: usize,
    /// Monte Carlo sample size for the log-ratio profile.
    #[arg(long, default_value_t = 100_000)]
    pub mc_n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KlMethodArg {
    Quadrature,
    Mc,
    Both,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct KlArgs {
    #[arg(long)]
    pub target: String,
    #[arg(long)]
    pub mixture: PathBuf,
    #[arg(long, value_enum, default_value_t = KlMethodArg::Both)]
    pub method: KlMethodArg,
    #[arg(long, default_value_t = 200_000)]
    pub mc_n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Candidate {
    StandardNormal,
    HandFit,
    /// `g_3` of the entropy route for N(0,1).
    EntropyG3,
    All,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct NecessityArgs {
    #[arg(long)]
    pub target: String,
    /// Mixture file; overrides `--candidate`.
    #[arg(long)]
    pub mixture: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Candidate::All)]
    pub candidate: Candidate,
    #[arg(long, default_value_t = 10.0)]
    pub threshold: f64,
    /// Largest radius of the grid `10^{k/2}`.
    #[arg(long, default_value_t = 1e4)]
    pub r_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassArg {
    Ent,
    Fssa,
    Cssa,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct ClassCheckArgs {
    #[arg(long)]
    pub target: String,
    #[arg(long = "class", value_enum)]
    pub class: ClassArg,
    /// Scale for the fixed-scale check.
    #[arg(long, default_value_t = 0.25)]
    pub r: f64,
    /// Probe intervals for the fixed-scale check.
    #[arg(long, default_value_t = 1000)]
    pub probes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Which {
    Star,
    Natural,
    Cantor,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct CounterexampleArgs {
    #[arg(long, value_enum)]
    pub which: Which,
    /// Top index of the partial sums for `natural`.
    #[arg(long = "N", default_value_t = 100)]
    pub n_top: u32,
    /// Construction depth for `cantor`.
    #[arg(long = "K", default_value_t = 8)]
    pub depth: u32,
    #[arg(long, default_value_t = 6)]
    pub m_max: u32,
    #[arg(long, default_value_t = 0.05)]
    pub eps: f64,
    /// Truncation level for `star`.
    #[arg(long, default_value_t = gmmkl::densities::FSTAR_N_MAX)]
    pub n_max: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.common.workers.max(1))
        .build_global()
    {
        eprintln!("error: cannot start worker pool: {e}");
        return ExitCode::from(2);
    }
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Manifest config: the common flags plus the subcommand's own.
pub fn config_json<T: serde::Serialize>(common: &Common, args: &T) -> serde_json::Value {
    json!({
        "common": common.to_json(),
        "args": serde_json::to_value(args).unwrap_or(serde_json::Value::Null),
    })
}
