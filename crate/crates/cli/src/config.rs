//! Argument parsing beyond clap's reach: problem specs, grid strings,
//! norm lists, the worker cap, and the usage/runtime failure split that
//! drives the exit code.

use anyhow::anyhow;
use clap::ValueEnum;

use radau_dae::analysis::Norm;
use radau_dae::dae_model::{
    parse_problem_spec, register_builtin_problems, DaeProblem, ProblemError, ProblemSpec,
};
use radau_dae::predictor::{NewtonOptions, Reduction};
use radau_dae::stepper::GridSpec;

/// A failed run: usage errors exit 2, everything else exits 1.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

pub fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

pub fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

/// Newton flags shared by the solving subcommands.
#[derive(clap::Args, Debug)]
pub struct NewtonFlags {
    /// Convergence threshold on the Newton increment; the default scales
    /// 1e-13 with the entering node state per cell.
    #[arg(long = "newton-tol")]
    pub newton_tol: Option<f64>,
    /// Newton iteration cap per cell.
    #[arg(long = "newton-max-iters", default_value_t = 50)]
    pub newton_max_iters: usize,
    /// Linear-system formulation for the Newton step.
    #[arg(long, value_enum, default_value_t = ReductionArg::Auto)]
    pub reduction: ReductionArg,
}

impl NewtonFlags {
    pub fn options(&self) -> NewtonOptions {
        NewtonOptions {
            tolerance: self.newton_tol,
            max_iterations: self.newton_max_iters,
            reduction: self.reduction.into(),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReductionArg {
    /// Full block system, no elimination.
    Full,
    /// Eliminate the differential increments (needs square blocks).
    ViaR,
    /// Eliminate the algebraic increments.
    ViaS,
    /// Probe via-S then via-R per cell, else fall back to the full system.
    Auto,
}

impl From<ReductionArg> for Reduction {
    fn from(a: ReductionArg) -> Self {
        match a {
            ReductionArg::Full => Reduction::FullBlock,
            ReductionArg::ViaR => Reduction::ViaR,
            ReductionArg::ViaS => Reduction::ViaS,
            ReductionArg::Auto => Reduction::Auto,
        }
    }
}

impl ReductionArg {
    pub fn as_str(self) -> &'static str {
        match self {
            ReductionArg::Full => "full",
            ReductionArg::ViaR => "via-r",
            ReductionArg::ViaS => "via-s",
            ReductionArg::Auto => "auto",
        }
    }
}

/// Parses `--problem` and instantiates it once to validate name and
/// parameters; unknown names list the registry in the message.
pub fn load_problem(spec_str: &str) -> Result<(ProblemSpec, DaeProblem), Failure> {
    let registry = register_builtin_problems();
    let spec = parse_problem_spec(spec_str).map_err(usage)?;
    match registry.create(&spec.name, &spec.params) {
        Ok(p) => Ok((spec, p)),
        Err(ProblemError::UnknownProblem { name }) => Err(usage(anyhow!(
            "unknown problem `{}`; available: {}",
            name,
            registry.names().join(", ")
        ))),
        Err(e) => Err(usage(e)),
    }
}

/// Re-instantiates a validated spec, for worker threads that cannot share
/// the problem object.
pub fn instantiate(spec: &ProblemSpec) -> DaeProblem {
    register_builtin_problems()
        .create(&spec.name, &spec.params)
        .expect("spec was validated at startup")
}

/// Parses `start:end:cells[,start:end:cells...]` into a grid.
pub fn parse_grid(input: &str) -> Result<GridSpec, Failure> {
    let mut segments = Vec::new();
    for token in input.split(',') {
        let parts: Vec<&str> = token.split(':').collect();
        if parts.len() != 3 {
            return Err(usage(anyhow!(
                "grid segment `{}` is not start:end:cells",
                token
            )));
        }
        let start: f64 = parts[0]
            .trim()
            .parse()
            .map_err(|_| usage(anyhow!("bad segment start `{}`", parts[0])))?;
        let end: f64 = parts[1]
            .trim()
            .parse()
            .map_err(|_| usage(anyhow!("bad segment end `{}`", parts[1])))?;
        let cells: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| usage(anyhow!("bad segment cell count `{}`", parts[2])))?;
        segments.push((start, end, cells));
    }
    GridSpec::from_segments(&segments).map_err(usage)
}

/// Parses the semicolon-separated `--grids` list.
pub fn parse_grids(input: &str) -> Result<Vec<(String, GridSpec)>, Failure> {
    input
        .split(';')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| Ok((s.to_owned(), parse_grid(s)?)))
        .collect()
}

/// Maps norm names (case-insensitive) onto the analysis norms.
pub fn parse_norms(names: &[String]) -> Result<Vec<Norm>, Failure> {
    let all = [Norm::L1, Norm::L2, Norm::Linf, Norm::Final];
    names
        .iter()
        .map(|name| {
            all.iter()
                .copied()
                .find(|n| n.as_str().eq_ignore_ascii_case(name))
                .ok_or_else(|| {
                    usage(anyhow!(
                        "unknown norm `{}`; expected one of L1, L2, Linf, final",
                        name
                    ))
                })
        })
        .collect()
}

/// Worker cap: `RADAU_DAE_THREADS` when set, else the machine parallelism.
pub fn worker_cap() -> Result<usize, Failure> {
    match std::env::var("RADAU_DAE_THREADS") {
        Err(std::env::VarError::NotPresent) => Ok(std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)),
        Err(e) => Err(usage(anyhow!("RADAU_DAE_THREADS: {e}"))),
        Ok(s) => s
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| {
                usage(anyhow!(
                    "RADAU_DAE_THREADS must be a positive integer, got `{s}`"
                ))
            }),
    }
}
