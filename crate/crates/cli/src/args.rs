use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "quinque",
    version,
    about = "Checks, replays and stability certificates for the degree-25 difference equation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Residual scan and symmetry checks for a mapping.
    Verify(VerifyArgs),
    /// Replays the elimination cascade and diffs it against the printed one.
    Replay(ReplayArgs),
    /// Fixed-point stability certificate, or the omega_0 constants alone.
    Stability(StabilityArgs),
    /// Non-Archimedean fuzzy-norm checks.
    Fuzzy(FuzzyArgs),
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Verify(a) => &a.common,
            Command::Replay(a) => &a.common,
            Command::Stability(a) => &a.common,
            Command::Fuzzy(a) => &a.common,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct Common {
    /// Odd degree n of the equation.
    #[arg(long, default_value_t = 25)]
    pub degree: u32,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Working precision in bits for bigreal mode.
    #[arg(long, default_value_t = 256)]
    pub precision: usize,
    /// Write the report here instead of stdout.
    #[arg(long)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
    /// JSON object of flag values; flags given on the command line win.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Exact,
    Bigreal,
}

impl ModeArg {
    pub fn mode(self) -> quinque_core::numeric::Mode {
        match self {
            ModeArg::Exact => quinque_core::numeric::Mode::Exact,
            ModeArg::Bigreal => quinque_core::numeric::Mode::BigReal,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    /// Terms joined by '+': monomial[:a=..], power:l=..[,eps=..], zero.
    #[arg(long, default_value = "monomial")]
    pub function: String,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
    pub mode: ModeArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReplayMode {
    Auto,
    Scripted,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceSet {
    /// (0,2) and (j,1) for j = s..0.
    Default,
    /// The hand cascade's set, which stops at j = s-1.
    Script,
}

#[derive(Debug, Args, Serialize)]
pub struct ReplayArgs {
    #[arg(long, value_enum, default_value_t = ReplayMode::Auto)]
    pub mode: ReplayMode,
    /// Compare the scripted identities with the printed fixture.
    #[arg(long)]
    pub diff: bool,
    /// Fixture file; the built-in printed cascade when absent.
    #[arg(long)]
    pub fixture: Option<PathBuf>,
    /// Instance set for automatic elimination.
    #[arg(long, value_enum, default_value_t = InstanceSet::Default)]
    pub instances: InstanceSet,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    Power,
    Product,
    Mixed,
}

#[derive(Debug, Args, Serialize)]
pub struct StabilityArgs {
    /// power:l=..[,omega=..], product:a=..,b=..[,omega=..] or mixed:a=..,b=..[,omega=..].
    /// Omega is fitted from the samples when omitted.
    #[arg(long, default_value = "power:l=2")]
    pub control: String,
    #[arg(long, default_value = "monomial+power:l=2")]
    pub function: String,
    #[arg(long, default_value_t = 1, allow_negative_numbers = true)]
    pub q: i64,
    /// Contraction constant, e.g. 1/2 or 2^-23; derived from the control when absent.
    #[arg(long, allow_hyphen_values = true)]
    pub kappa: Option<String>,
    #[arg(long, default_value_t = 20)]
    pub iters: usize,
    #[arg(long, default_value_t = 25)]
    pub samples: usize,
    /// Integer sample range lo:hi.
    #[arg(long, default_value = "-10:10", allow_hyphen_values = true)]
    pub range: String,
    #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
    pub mode: ModeArg,
    /// Only compute the omega_0 constants bundle.
    #[arg(long)]
    pub constants_only: bool,
    #[arg(long, value_enum, default_value_t = Which::Power)]
    pub which: Which,
    #[arg(long, default_value = "2", allow_hyphen_values = true)]
    pub l: String,
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    pub a: String,
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    pub b: String,
    /// Matrix dimension for the lifted bound; 0 skips it.
    #[arg(long, default_value_t = 0)]
    pub matrix_n: usize,
    #[arg(long, default_value_t = 100)]
    pub matrices: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct FuzzyArgs {
    #[arg(long, default_value_t = 29)]
    pub p: u64,
    #[arg(long, default_value = "monomial")]
    pub function: String,
    /// dpow:theta=..,m=..[,p=..], const:theta=.. or zero.
    #[arg(long, default_value = "dpow:theta=1,m=1")]
    pub control: String,
    /// Defaults to 2^-m for dpow and 1 otherwise.
    #[arg(long, allow_hyphen_values = true)]
    pub kappa: Option<String>,
    #[arg(long, default_value_t = 1, allow_negative_numbers = true)]
    pub q: i64,
    #[arg(long, default_value_t = 20)]
    pub iters: usize,
    /// Size of the (x, t) grid per axis.
    #[arg(long, default_value_t = 20)]
    pub grid: usize,
    /// Matrix dimension.
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 50)]
    pub matrices: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}
