//! Resolving `--problem` to a builtin or an instance file.

use std::path::Path;

use anyhow::{bail, Context, Result};
use saddleflow::control::{build_lp, ControlProblem, VariableMap};
use saddleflow::lp::LinearProgram;
use saddleflow::problem::{builtin, Builtin, BUILTIN_NAMES};

/// Builtins whose `y` block is a multiplier vector and may be projected.
pub const ORTHANT_BUILTINS: [&str; 1] = ["lp-small"];

pub enum ProblemSource {
    Builtin(Builtin),
    Lp(LinearProgram),
    Control {
        problem: ControlProblem,
        lp: LinearProgram,
        map: VariableMap,
    },
}

impl ProblemSource {
    pub fn describe(&self) -> String {
        match self {
            ProblemSource::Builtin(b) => format!("builtin {}", b.name),
            ProblemSource::Lp(lp) => format!("LP with n = {}, m = {}", lp.n(), lp.m()),
            ProblemSource::Control { problem, lp, .. } => format!(
                "control instance N = {}, T = {} (LP with n = {}, m = {})",
                problem.agents(),
                problem.horizon,
                lp.n(),
                lp.m()
            ),
        }
    }

    pub fn linear_program(&self) -> Option<&LinearProgram> {
        match self {
            ProblemSource::Builtin(_) => None,
            ProblemSource::Lp(lp) | ProblemSource::Control { lp, .. } => Some(lp),
        }
    }

    pub fn has_orthant(&self) -> bool {
        match self {
            ProblemSource::Builtin(b) => ORTHANT_BUILTINS.contains(&b.name),
            _ => true,
        }
    }
}

/// A builtin name, else a file whose first data line holds `n m` (LP) or
/// `N M T` (control instance).
pub fn load_problem(spec: &str) -> Result<ProblemSource> {
    if let Some(b) = builtin(spec) {
        return Ok(ProblemSource::Builtin(b));
    }
    let path = Path::new(spec);
    if !path.exists() {
        bail!(
            "field `problem`: `{spec}` is neither a builtin ({}) nor an existing file",
            BUILTIN_NAMES.join(", ")
        );
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("field `problem`: cannot read {spec}"))?;
    let header = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .find(|l| !l.is_empty());
    match header.map(|l| l.split_whitespace().count()) {
        Some(2) => {
            let lp = text.parse().with_context(|| format!("field `problem`: {spec}"))?;
            Ok(ProblemSource::Lp(lp))
        }
        Some(3) => {
            let problem: ControlProblem = text.parse().with_context(|| format!("field `problem`: {spec}"))?;
            let (lp, map) = build_lp(&problem);
            Ok(ProblemSource::Control { problem, lp, map })
        }
        _ => bail!("field `problem`: {spec} does not start with an `n m` or `N M T` dimensions line"),
    }
}
