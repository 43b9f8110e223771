//! One entry point for every solver, shared by the sweep and the CLI.

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use crate::admm::{self, SolveOptions, SolveReport, Termination};
use crate::baselines::{self, default_soft_impute_tau};
use crate::bench::timers::SubproblemTimers;
use crate::error::{Error, Result};
use crate::model::{Hyperparams, PartialMatrix, SideInfo};
use crate::objective::Estimate;
use crate::scalar::Real;

/// Soft-Impute relative-change threshold.
pub const SOFT_IMPUTE_EPS: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Admm,
    IterativeSvd,
    SoftImpute,
    ScaledGd,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Admm, Method::IterativeSvd, Method::SoftImpute, Method::ScaledGd];

    pub fn name(self) -> &'static str {
        match self {
            Method::Admm => "admm",
            Method::IterativeSvd => "iterative_svd",
            Method::SoftImpute => "soft_impute",
            Method::ScaledGd => "scaled_gd",
        }
    }

    /// Iteration cap when the caller gives none. ADMM uses `Hyperparams`.
    pub fn default_max_iters(self) -> Option<usize> {
        match self {
            Method::Admm => None,
            Method::IterativeSvd => Some(500),
            Method::SoftImpute => Some(100),
            Method::ScaledGd => Some(1000),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    /// Accepts `iterative_svd` and `iterative-svd` alike.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().replace('-', "_").as_str() {
            "admm" => Ok(Method::Admm),
            "iterative_svd" => Ok(Method::IterativeSvd),
            "soft_impute" => Ok(Method::SoftImpute),
            "scaled_gd" => Ok(Method::ScaledGd),
            other => Err(Error::param(format!(
                "unknown method `{other}` (expected admm, iterative_svd, soft_impute or scaled_gd)"
            ))),
        }
    }
}

/// What a single solve produced.
#[derive(Clone, Debug)]
pub struct MethodRun<T> {
    pub method: Method,
    pub estimate: Estimate<T>,
    pub iterations: usize,
    pub wall_time: Duration,
    pub termination: Termination,
    /// ADMM only.
    pub subproblem_times: Option<SubproblemTimers>,
    /// ADMM only.
    pub report: Option<SolveReport<T>>,
    pub flags: Vec<String>,
}

/// Runs `method` with `hp.k` as target rank. `max_iters` overrides the
/// method's cap (for ADMM, `hp.max_iters`).
pub fn run_method<T: Real>(
    method: Method,
    data: &PartialMatrix<T>,
    y: &SideInfo<T>,
    hp: &Hyperparams<T>,
    max_iters: Option<usize>,
    opts: &SolveOptions<T>,
) -> Result<MethodRun<T>> {
    hp.validate()?;
    y.check_rows(data.nrows())?;
    let cap = max_iters.or(method.default_max_iters());
    let b = match method {
        Method::Admm => {
            let hp = Hyperparams {
                max_iters: cap.unwrap_or(hp.max_iters),
                ..hp.clone()
            };
            let (s, report) = admm::solve_with(data, y, &hp, opts, |_, _| {})?;
            return Ok(MethodRun {
                method,
                estimate: Estimate::Factored { u: s.u, v: s.v },
                iterations: report.iterations,
                wall_time: report.total_time,
                termination: report.termination,
                subproblem_times: Some(report.subproblem_times),
                flags: report.warnings.clone(),
                report: Some(report),
            });
        }
        Method::IterativeSvd => baselines::iterative_svd(data, hp.k, cap.unwrap_or(500))?,
        Method::SoftImpute => {
            let tau = default_soft_impute_tau(data)?;
            baselines::soft_impute(data, tau, T::lit(SOFT_IMPUTE_EPS), hp.k, cap.unwrap_or(100))?
        }
        Method::ScaledGd => baselines::scaled_gd(data, y.matrix(), hp.lambda, hp.gamma, hp.k, cap.unwrap_or(1000))?,
    };
    Ok(MethodRun {
        method,
        estimate: b.estimate,
        iterations: b.iterations,
        wall_time: b.wall_time,
        termination: b.termination,
        subproblem_times: None,
        report: None,
        flags: b.flags,
    })
}
