//! Flag grammar. Parsing is clap's job; resolution of a `FieldSource` into a
//! certified field lives in [`crate::commands`].

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "loewner",
    version,
    about = "Herglotz fields, evolution families, semigroups, and Loewner chains on the unit disc"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the evolution family phi_{s,t} to the given target times
    Evolve(EvolveArgs),
    /// Classify a generator: kind, Denjoy-Wolff point, spectral value
    Classify(ClassifyArgs),
    /// Koenigs conjugation of a generator, tabulated on points
    Koenigs(KoenigsArgs),
    /// Evaluate the affine Loewner chain of a splitting field
    Chain(ChainArgs),
    /// Run property checks; exit 2 when any verdict is false
    Check(CheckArgs),
    /// Built-in demonstration fields with predicted check outcomes
    Demo(DemoArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Where the field comes from: a config file, a built-in demo, or a bare
/// autonomous generator expression. Exactly one must be given.
#[derive(Debug, Args)]
pub struct FieldSource {
    /// JSON run configuration (see the README for the schema)
    #[arg(long, value_name = "PATH", conflicts_with_all = ["demo", "expr"])]
    pub config: Option<PathBuf>,

    /// Built-in demo field; names via `loewner demo --list`
    #[arg(long, value_name = "NAME", conflicts_with = "expr")]
    pub demo: Option<String>,

    /// Autonomous generator expression in z, e.g. "-z*(2+z)"
    #[arg(long, value_name = "EXPR", allow_hyphen_values = true)]
    pub expr: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    #[command(flatten)]
    pub source: FieldSource,

    /// Start time s of phi_{s,t}
    #[arg(long, default_value_t = 0.0)]
    pub s: f64,

    /// Comma-separated target times t (each >= s)
    #[arg(long, value_name = "T1,T2,...")]
    pub times: String,

    /// Comma-separated start points, e.g. "0,0.3+0.2*i,-0.5*i"
    #[arg(long, value_name = "Z1,Z2,...", allow_hyphen_values = true)]
    pub points: Option<String>,

    /// Polar grid of start points: radii, then angle count
    #[arg(long, value_name = "R1,R2,.../ANGLES", conflicts_with = "points")]
    pub grid: Option<String>,

    /// Integrator relative tolerance (absolute follows at 1/100 of it)
    #[arg(long, value_name = "REAL")]
    pub tol: Option<f64>,

    /// Write the table here instead of stdout
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub source: FieldSource,

    /// Time at which to freeze a non-autonomous field before classifying
    #[arg(long, default_value_t = 0.0)]
    pub time: f64,

    /// Write the result here instead of stdout
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Machine-readable output; omit for the one-line text form
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct KoenigsArgs {
    #[command(flatten)]
    pub source: FieldSource,

    /// Time at which to freeze a non-autonomous field
    #[arg(long, default_value_t = 0.0)]
    pub time: f64,

    /// Comma-separated evaluation points
    #[arg(long, value_name = "Z1,Z2,...", allow_hyphen_values = true)]
    pub points: Option<String>,

    /// Polar grid of evaluation points: radii, then angle count
    #[arg(long, value_name = "R1,R2,.../ANGLES", conflicts_with = "points")]
    pub grid: Option<String>,

    /// Write the table here instead of stdout
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ChainArgs {
    #[command(flatten)]
    pub source: FieldSource,

    /// Comma-separated chain times s; defaults to 0, horizon/2, horizon
    #[arg(long, value_name = "S1,S2,...")]
    pub times: Option<String>,

    /// Comma-separated evaluation points
    #[arg(long, value_name = "Z1,Z2,...", allow_hyphen_values = true)]
    pub points: Option<String>,

    /// Polar grid of evaluation points: radii, then angle count
    #[arg(long, value_name = "R1,R2,.../ANGLES", conflicts_with = "points")]
    pub grid: Option<String>,

    /// Write the table here instead of stdout
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub source: FieldSource,

    /// Comma-separated check names, or "all" (the default); see README
    #[arg(long, value_name = "NAME1,NAME2,...")]
    pub checks: Option<String>,

    /// Override the sampled times (at least 3, ascending)
    #[arg(long, value_name = "T1,T2,...")]
    pub times: Option<String>,

    /// Polar grid for composition-style checks: radii, then angle count
    #[arg(long, value_name = "R1,R2,.../ANGLES")]
    pub grid: Option<String>,

    /// Integrator relative tolerance (verdict tolerances scale with it)
    #[arg(long, value_name = "REAL")]
    pub tol: Option<f64>,

    /// Write the full report artifact here
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Artifact format for --out
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    /// Demo name; omit together with --list
    pub name: Option<String>,

    /// List the built-in demos
    #[arg(long)]
    pub list: bool,

    /// Print the demo's JSON run configuration instead of running it
    #[arg(long)]
    pub emit_config: bool,

    /// Write the expected-vs-observed report here (JSON)
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}
