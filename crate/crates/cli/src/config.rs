//! Command-line parsing into a validated [`RunConfig`].

use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use cyclefix::cycles::{DEFAULT_MAX_SWEEPS, DEFAULT_TOL};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "cyclefix", version, about = "Limit cycles of under-relaxed cyclic compositions of nonexpansive operators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Iterate the cycle at a single ε and report the limit cycle.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, allow_hyphen_values = true)]
        eps: f64,
    },
    /// Run the cycle over a decreasing ε grid.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        eps_grid: Option<Vec<f64>>,
    },
    /// Randomized check of the composition-versus-average bound.
    Bounds {
        #[command(flatten)]
        common: CommonArgs,
        /// Defaults to 1,0.5,0.1,0.01.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        eps_grid: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 5.0, allow_hyphen_values = true)]
        radius: f64,
        /// Reference point of the bound; defaults to the origin.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        z: Option<Vec<f64>>,
        /// Multiplies both envelopes. Negative controls only.
        #[arg(long, default_value_t = 1.0, hide = true, allow_hyphen_values = true)]
        envelope_scale: f64,
    },
    /// Compare the piecewise-linear iterate path with the flow x' = Tx − x.
    FlowCompare {
        #[command(flatten)]
        common: CommonArgs,
        /// Defaults to 2^-3, …, 2^-8.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        eps_grid: Option<Vec<f64>>,
        #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
        t_end: f64,
        /// Integrator step; comparisons use min(h, ε/10).
        #[arg(long, allow_hyphen_values = true)]
        h: Option<f64>,
        /// Also write the integrated trajectory (CSV) here.
        #[arg(long)]
        trajectory_out: Option<PathBuf>,
    },
    /// Distance from a fixed point of T to the limit cycle endpoint, per ε.
    Stability {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        eps_grid: Option<Vec<f64>>,
        /// Point to test; defaults to a fixed point of T chosen per scenario.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        z: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioName {
    /// Lines ξ₂ = α, ξ₂ = β and the region ξ₁ξ₂ ≥ γ in the plane.
    Hyperbola,
    /// Three-set counterexample on its symmetric plane, coordinates (ξ₂, ξ₃).
    Parabola,
    /// The lines ξ₂ = −1 and ξ₂ = 1.
    ParallelLines,
    /// The line ξ₂ = 0 and the disjoint unit ball around (1, 3).
    LineBall,
    /// Translates of random subspaces.
    Affine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["scenario", "scenario_file"])))]
pub struct CommonArgs {
    #[arg(long, value_enum)]
    scenario: Option<ScenarioName>,
    /// Scenario description in JSON.
    #[arg(long)]
    scenario_file: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    /// Ambient dimension of the affine scenario.
    #[arg(long)]
    dim: Option<usize>,
    /// Subspace dimensions of the affine scenario, one per set.
    #[arg(long, value_delimiter = ',')]
    subspace_dims: Option<Vec<usize>>,
    /// Standard deviation of the affine shifts' entries; defaults to 1/√dim.
    #[arg(long, allow_hyphen_values = true)]
    shift_scale: Option<f64>,
    /// Anchor of the iteration, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    y0: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Defaults to json for a .json output path and csv otherwise.
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long, default_value_t = DEFAULT_TOL, allow_hyphen_values = true)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_SWEEPS)]
    max_sweeps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScenarioSource {
    Builtin { name: ScenarioName, params: BuiltinParams },
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct BuiltinParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subspace_dims: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shift_scale: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub tol: f64,
    pub max_sweeps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum CommandParams {
    Run {
        eps: f64,
    },
    Sweep {
        eps_grid: Option<Vec<f64>>,
    },
    Bounds {
        eps_grid: Vec<f64>,
        samples: usize,
        radius: f64,
        z: Option<Vec<f64>>,
        envelope_scale: f64,
    },
    FlowCompare {
        eps_grid: Vec<f64>,
        t_end: f64,
        h: Option<f64>,
        trajectory_out: Option<PathBuf>,
    },
    Stability {
        eps_grid: Option<Vec<f64>>,
        z: Option<Vec<f64>>,
    },
}

impl CommandParams {
    pub fn name(&self) -> &'static str {
        match self {
            CommandParams::Run { .. } => "run",
            CommandParams::Sweep { .. } => "sweep",
            CommandParams::Bounds { .. } => "bounds",
            CommandParams::FlowCompare { .. } => "flow-compare",
            CommandParams::Stability { .. } => "stability",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub params: CommandParams,
    pub source: ScenarioSource,
    pub y0: Option<Vec<f64>>,
    /// As given on the command line; the effective seed is in the report.
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub tolerances: Tolerances,
}

pub const DEFAULT_BOUNDS_GRID: [f64; 4] = [1.0, 0.5, 0.1, 0.01];

pub fn default_flow_grid() -> Vec<f64> {
    (3..=8).map(|k| 0.5f64.powi(k)).collect()
}

/// Parses the arguments that follow the program name.
pub fn parse_config<I, T>(args: I) -> Result<RunConfig, ConfigError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv = std::iter::once(std::ffi::OsString::from("cyclefix")).chain(args.into_iter().map(Into::into));
    let cli = Cli::try_parse_from(argv).map_err(ConfigError::Clap)?;
    RunConfig::from_cli(cli).map_err(ConfigError::Invalid)
}

#[derive(Debug)]
pub enum ConfigError {
    /// Also covers `--help` and `--version`, which are not errors.
    Clap(clap::Error),
    Invalid(String),
}

fn positive(name: &str, v: f64) -> Result<(), String> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(format!("--{name} must be positive, got {v}"))
    }
}

impl RunConfig {
    fn from_cli(cli: Cli) -> Result<Self, String> {
        let (common, params) = match cli.command {
            Command::Run { common, eps } => {
                if !(eps > 0.0 && eps <= 1.0) {
                    return Err(format!("--eps must lie in (0, 1], got {eps}"));
                }
                (common, CommandParams::Run { eps })
            }
            Command::Sweep { common, eps_grid } => (common, CommandParams::Sweep { eps_grid }),
            Command::Bounds { common, eps_grid, samples, radius, z, envelope_scale } => {
                if samples == 0 {
                    return Err("--samples must be at least 1".into());
                }
                if !(radius >= 0.0 && radius.is_finite()) {
                    return Err(format!("--radius must be nonnegative, got {radius}"));
                }
                positive("envelope-scale", envelope_scale)?;
                let eps_grid = eps_grid.unwrap_or_else(|| DEFAULT_BOUNDS_GRID.to_vec());
                (common, CommandParams::Bounds { eps_grid, samples, radius, z, envelope_scale })
            }
            Command::FlowCompare { common, eps_grid, t_end, h, trajectory_out } => {
                positive("t-end", t_end)?;
                if let Some(h) = h {
                    positive("h", h)?;
                }
                let eps_grid = eps_grid.unwrap_or_else(default_flow_grid);
                (common, CommandParams::FlowCompare { eps_grid, t_end, h, trajectory_out })
            }
            Command::Stability { common, eps_grid, z } => (common, CommandParams::Stability { eps_grid, z }),
        };
        positive("tol", common.tol)?;
        if common.max_sweeps == 0 {
            return Err("--max-sweeps must be at least 1".into());
        }
        let builtin = BuiltinParams {
            alpha: common.alpha,
            beta: common.beta,
            gamma: common.gamma,
            dim: common.dim,
            subspace_dims: common.subspace_dims,
            shift_scale: common.shift_scale,
        };
        let source = match (common.scenario, common.scenario_file) {
            (Some(name), None) => {
                check_params(name, &builtin)?;
                ScenarioSource::Builtin { name, params: builtin }
            }
            (None, Some(path)) => {
                if builtin != BuiltinParams::default() {
                    return Err("builder parameters cannot be combined with --scenario-file".into());
                }
                ScenarioSource::File { path }
            }
            _ => return Err("exactly one of --scenario and --scenario-file is required".into()),
        };
        let format = common.format.unwrap_or(match &common.out {
            Some(p) if p.extension().is_some_and(|e| e == "json") => Format::Json,
            _ => Format::Csv,
        });
        Ok(RunConfig {
            params,
            source,
            y0: common.y0,
            seed: common.seed,
            out: common.out,
            format,
            tolerances: Tolerances { tol: common.tol, max_sweeps: common.max_sweeps },
        })
    }
}

fn check_params(name: ScenarioName, p: &BuiltinParams) -> Result<(), String> {
    let hyperbola = p.alpha.is_some() || p.beta.is_some() || p.gamma.is_some();
    let affine = p.dim.is_some() || p.subspace_dims.is_some() || p.shift_scale.is_some();
    match name {
        ScenarioName::Hyperbola if affine => Err("--dim, --subspace-dims and --shift-scale apply to the affine scenario".into()),
        ScenarioName::Affine if hyperbola => Err("--alpha, --beta and --gamma apply to the hyperbola scenario".into()),
        ScenarioName::Hyperbola | ScenarioName::Affine => Ok(()),
        _ if hyperbola || affine => Err(format!("scenario {name:?} takes no builder parameters")),
        _ => Ok(()),
    }
}
