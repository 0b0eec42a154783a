//! Run configuration: entry selection, parameter overrides, grid parsing and
//! the point cap. Every malformed input is reported as a config error that
//! names the offending field.

use std::path::PathBuf;

use rank_solutions::catalog::{build_entry, CatalogEntry, ParamSet, ParamValue};
use rank_solutions::error::Error;
use rank_solutions::verify::{GridAxis, GridSpec};

pub const POINT_CAP_ENV: &str = "RANK_SOLUTIONS_POINT_CAP";
const DEFAULT_POINT_CAP: usize = 1_000_000;

#[derive(Debug, Clone, clap::Args)]
pub struct RunArgs {
    /// Catalog entry id (see `list`).
    #[arg(long)]
    pub entry: String,
    /// Parameter override `name=value`; value is a real or a nested-array
    /// matrix literal like `[[0,1],[0,0]]`. Repeatable.
    #[arg(long = "set", value_name = "NAME=VALUE")]
    pub set: Vec<String>,
    /// Grid `label=min:max:n,...`, axes in the system's variable order.
    /// Defaults to the entry's built-in grid.
    #[arg(long)]
    pub grid: Option<String>,
    /// Tolerance override: Newton tolerance for `eval`, residual gate for
    /// `verify`, trace threshold for `trace-check`.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Central-difference step for residual checks.
    #[arg(long, default_value_t = 1e-5)]
    pub fd_step: f64,
    /// Output format: `csv` or `json`.
    #[arg(long, default_value = "csv")]
    pub format: String,
    /// Output path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for deterministic sampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Adds the given value to one wave-covector entry (negative control).
    #[arg(long, default_value_t = 0.0)]
    pub perturb_lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

pub struct RunConfig {
    pub entry: CatalogEntry,
    pub grid: GridSpec,
    pub format: OutputFormat,
    pub out: Option<PathBuf>,
    pub tol: Option<f64>,
    pub fd_step: f64,
    pub seed: u64,
}

/// A config-level failure; always maps to exit code 1.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

fn parse_sets(pairs: &[String]) -> Result<ParamSet, ConfigError> {
    let mut params = ParamSet::new();
    for pair in pairs {
        let (name, value) = pair
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("--set `{pair}` is not NAME=VALUE")))?;
        let value = value.trim();
        let parsed = if value.starts_with('[') {
            let rows: Vec<Vec<f64>> = serde_json::from_str(value).map_err(|e| {
                ConfigError(format!("--set {name}: bad matrix literal: {e}"))
            })?;
            ParamValue::Matrix(rows)
        } else {
            ParamValue::Real(value.parse::<f64>().map_err(|_| {
                ConfigError(format!("--set {name}: `{value}` is not a number"))
            })?)
        };
        if params.insert(name.to_string(), parsed).is_some() {
            return Err(ConfigError(format!("--set {name}: given twice")));
        }
    }
    Ok(params)
}

fn parse_grid(spec: &str, x_names: &[String]) -> Result<GridSpec, ConfigError> {
    let mut axes = Vec::new();
    for part in spec.split(',') {
        let (label, rest) = part
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("--grid axis `{part}` is not LABEL=MIN:MAX:N")))?;
        let fields: Vec<&str> = rest.split(':').collect();
        if fields.len() != 3 {
            return Err(ConfigError(format!(
                "--grid axis `{part}` needs MIN:MAX:N"
            )));
        }
        let min: f64 = fields[0]
            .parse()
            .map_err(|_| ConfigError(format!("--grid {label}: bad min `{}`", fields[0])))?;
        let max: f64 = fields[1]
            .parse()
            .map_err(|_| ConfigError(format!("--grid {label}: bad max `{}`", fields[1])))?;
        let n: usize = fields[2]
            .parse()
            .map_err(|_| ConfigError(format!("--grid {label}: bad count `{}`", fields[2])))?;
        axes.push(GridAxis {
            label: label.to_string(),
            min,
            max,
            n,
        });
    }
    if axes.len() != x_names.len() {
        return Err(ConfigError(format!(
            "--grid: expected {} axes ({}), got {}",
            x_names.len(),
            x_names.join(","),
            axes.len()
        )));
    }
    for (ax, name) in axes.iter().zip(x_names) {
        if &ax.label != name {
            return Err(ConfigError(format!(
                "--grid: axis `{}` does not match variable `{name}`",
                ax.label
            )));
        }
    }
    GridSpec::new(axes).map_err(|e| ConfigError(format!("--grid: {e}")))
}

pub fn point_cap() -> Result<usize, ConfigError> {
    match std::env::var(POINT_CAP_ENV) {
        Ok(v) => v
            .parse::<usize>()
            .map_err(|_| ConfigError(format!("{POINT_CAP_ENV}=`{v}` is not a count"))),
        Err(_) => Ok(DEFAULT_POINT_CAP),
    }
}

impl RunConfig {
    pub fn from_args(args: &RunArgs) -> Result<RunConfig, ConfigError> {
        let params = parse_sets(&args.set)?;
        let entry = build_entry(&args.entry, &params, args.perturb_lambda).map_err(|e| {
            match e {
                Error::NotFound(_) => ConfigError(format!("--entry: {e}")),
                other => ConfigError(format!("--entry/--set: {other}")),
            }
        })?;
        let grid = match &args.grid {
            Some(spec) => parse_grid(spec, entry.system.x_names())?,
            None => entry.grid.clone(),
        };
        let cap = point_cap()?;
        if grid.total_points() > cap {
            return Err(ConfigError(format!(
                "--grid: {} points exceeds the cap of {cap} (override with {POINT_CAP_ENV})",
                grid.total_points()
            )));
        }
        let format = match args.format.as_str() {
            "csv" => OutputFormat::Csv,
            "json" => OutputFormat::Json,
            other => {
                return Err(ConfigError(format!(
                    "--format: `{other}` is neither csv nor json"
                )))
            }
        };
        Ok(RunConfig {
            entry,
            grid,
            format,
            out: args.out.clone(),
            tol: args.tol,
            fd_step: args.fd_step,
            seed: args.seed,
        })
    }
}
