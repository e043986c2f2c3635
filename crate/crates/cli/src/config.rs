//! Run configuration: command-line flags, optionally overridden by a
//! `key = value` config file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};
use saddleflow::integrate::{IntegratorConfig, Scheme};
use saddleflow::lp::DEFAULT_RHO;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Flow {
    Plain,
    Regularized,
    Projected,
    ProjectedRegularized,
    Proximal,
    Distributed,
}

impl Flow {
    pub fn is_projected(self) -> bool {
        matches!(self, Flow::Projected | Flow::ProjectedRegularized | Flow::Distributed)
    }
}

impl fmt::Display for Flow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.to_possible_value().expect("no skipped variants").get_name())
    }
}

impl FromStr for Flow {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        <Flow as ValueEnum>::from_str(s, false)
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct Options {
    /// Builtin problem name, or path to an LP or control instance file
    #[arg(long, global = true)]
    pub problem: Option<String>,
    #[arg(long, global = true, value_enum)]
    pub flow: Option<Flow>,
    /// Regularization coefficient
    #[arg(long, global = true)]
    pub rho: Option<f64>,
    /// euler or rk4
    #[arg(long, global = true)]
    pub scheme: Option<Scheme>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long = "t-max", global = true)]
    pub t_max: Option<f64>,
    /// Convergence tolerance on the field residual
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Record every n-th step
    #[arg(long, global = true)]
    pub stride: Option<usize>,
    /// Comma-separated initial state
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub init: Option<Vec<f64>>,
    /// Output path prefix
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// key = value file whose entries override the flags
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

/// Fully merged settings. Unset fields fall back to per-command defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: Option<String>,
    pub flow: Option<Flow>,
    pub rho: Option<f64>,
    pub scheme: Option<Scheme>,
    pub dt: Option<f64>,
    pub t_max: Option<f64>,
    pub tol: Option<f64>,
    pub stride: Option<usize>,
    pub init: Option<Vec<f64>>,
    pub out: PathBuf,
}

pub const DEFAULT_OUT: &str = "saddleflow";

impl RunConfig {
    /// Merges `opts` with the config file it names, if any.
    pub fn from_options(opts: &Options) -> Result<Self> {
        let mut cfg = RunConfig {
            problem: opts.problem.clone(),
            flow: opts.flow,
            rho: opts.rho,
            scheme: opts.scheme,
            dt: opts.dt,
            t_max: opts.t_max,
            tol: opts.tol,
            stride: opts.stride,
            init: opts.init.clone(),
            out: opts.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
        };
        if let Some(path) = &opts.config {
            let text =
                std::fs::read_to_string(path).with_context(|| format!("config: cannot read {}", path.display()))?;
            cfg.apply_file(&text)?;
        }
        Ok(cfg)
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_file(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("config line {}: expected `key = value`, got `{line}`", lineno + 1))?;
            let (key, value) = (key.trim(), value.trim());
            self.set(key, value)
                .with_context(|| format!("config line {}", lineno + 1))?;
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "problem" => self.problem = Some(value.to_string()),
            "flow" => self.flow = Some(parse_field(key, value)?),
            "rho" => self.rho = Some(parse_field(key, value)?),
            "scheme" => self.scheme = Some(parse_field(key, value)?),
            "dt" => self.dt = Some(parse_field(key, value)?),
            "t_max" | "t-max" => self.t_max = Some(parse_field("t_max", value)?),
            "tol" => self.tol = Some(parse_field(key, value)?),
            "stride" => self.stride = Some(parse_field(key, value)?),
            "init" => {
                let init = value
                    .split(',')
                    .map(|v| parse_field::<f64>(key, v.trim()))
                    .collect::<Result<_>>()?;
                self.init = Some(init);
            }
            "out" => self.out = PathBuf::from(value),
            _ => bail!("unknown field `{key}`"),
        }
        Ok(())
    }

    pub fn rho_or(&self, default: f64) -> Result<f64> {
        let rho = self.rho.unwrap_or(default);
        if !(rho > 0.0 && rho.is_finite()) {
            bail!("field `rho` must be positive and finite, got {rho}");
        }
        Ok(rho)
    }

    pub fn rho(&self) -> Result<f64> {
        self.rho_or(DEFAULT_RHO)
    }

    /// Overlays the set integrator fields on `base` and validates the result.
    pub fn integrator(&self, base: IntegratorConfig) -> Result<IntegratorConfig> {
        let cfg = IntegratorConfig {
            scheme: self.scheme.unwrap_or(base.scheme),
            dt: self.dt.unwrap_or(base.dt),
            t_max: self.t_max.unwrap_or(base.t_max),
            conv_tol: self.tol.unwrap_or(base.conv_tol),
            record_stride: self.stride.unwrap_or(base.record_stride),
            ..base
        };
        for (name, v) in [("dt", cfg.dt), ("t_max", cfg.t_max), ("tol", cfg.conv_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                bail!("field `{name}` must be positive and finite, got {v}");
            }
        }
        if cfg.record_stride == 0 {
            bail!("field `stride` must be at least 1");
        }
        cfg.validate().map_err(|e| anyhow!("integrator settings: {e}"))?;
        Ok(cfg)
    }

    pub fn trajectory_path(&self) -> PathBuf {
        with_suffix(&self.out, "trajectory.csv")
    }

    pub fn report_path(&self) -> PathBuf {
        with_suffix(&self.out, "report.txt")
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

fn parse_field<T>(key: &str, value: &str) -> Result<T>
where
    T: FromStr,
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow!("field `{key}`: invalid value `{value}`: {e}"))
}
