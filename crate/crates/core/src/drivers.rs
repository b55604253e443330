//! Bisection over a parameter that enters nonconvexly, and support-function
//! sweeps for tracing two-dimensional feasible sets.

use std::collections::BTreeMap;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::inner::{build_inner_sdp, solve_inner, InnerOptions};
use crate::model::{Problem, ProblemSpec};
use crate::outer::{build_outer, solve_outer};
use crate::sdp::{self, ConicProgram, RelaxationResult, Status};

/// Shift applied inside every LMI of a feasibility oracle.
pub const FEASIBILITY_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Inner,
    Outer,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inner" => Ok(Mode::Inner),
            "outer" => Ok(Mode::Outer),
            _ => Err(Error::Schema(format!("unknown mode `{s}`, expected inner or outer"))),
        }
    }
}

/// Relaxation settings shared by the drivers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Relaxation {
    pub mode: Mode,
    pub n: usize,
    /// S-procedure multiplier degree (inner mode only); `None` means `min(N−2, 6)`.
    pub deg_t: Option<usize>,
    pub tol: f64,
}

impl Relaxation {
    pub fn new(mode: Mode, n: usize) -> Self {
        Self { mode, n, deg_t: None, tol: sdp::DEFAULT_TOL }
    }

    pub fn solve(&self, problem: &Problem) -> Result<RelaxationResult> {
        match self.mode {
            Mode::Outer => solve_outer(problem, self.n, self.tol),
            Mode::Inner => solve_inner(problem, &InnerOptions { n: self.n, deg_t: self.deg_t }, self.tol),
        }
    }

    /// The relaxation as a pure feasibility program with a margin inside each LMI.
    pub fn feasibility_program(&self, problem: &Problem) -> Result<ConicProgram> {
        let mut prog = match self.mode {
            Mode::Outer => build_outer(problem, self.n)?.program,
            Mode::Inner => build_inner_sdp(problem, &InnerOptions { n: self.n, deg_t: self.deg_t })?.0,
        };
        prog.objective = vec![0.0; prog.nvars];
        Ok(prog.with_margin(FEASIBILITY_MARGIN))
    }

    /// Only an optimal solve counts as feasible.
    pub fn is_feasible(&self, problem: &Problem) -> Result<bool> {
        let prog = self.feasibility_program(problem)?;
        if prog.psd_blocks.is_empty() && prog.lin_ineqs.is_empty() && prog.lin_eqs.is_empty() {
            return Ok(true);
        }
        Ok(sdp::solve(&prog, self.tol)?.status == Status::Optimal)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BisectResult {
    pub param: String,
    /// Bracket end on the feasible side after the last step.
    pub value: f64,
    /// Final bracket `(feasible end, infeasible end)`.
    pub feasible: f64,
    pub infeasible: f64,
    pub iterations: usize,
}

/// Locates the feasibility transition of `param` in `[lo, hi]` to within `tol`.
/// Every other parameter of `spec` stays a decision variable of the oracle.
pub fn bisect(spec: &ProblemSpec, param: &str, lo: f64, hi: f64, tol: f64, relax: &Relaxation) -> Result<BisectResult> {
    if !spec.parameters().iter().any(|p| p == param) {
        return Err(Error::Schema(format!("unknown parameter `{param}`")));
    }
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::Bracket(format!("need lo < hi and tol > 0, got [{lo}, {hi}] with tol {tol}")));
    }
    let oracle = |v: f64| -> Result<bool> {
        let problem = spec.instantiate(&BTreeMap::from([(param.to_string(), v)]))?;
        relax.is_feasible(&problem)
    };
    let (f_lo, f_hi) = (oracle(lo)?, oracle(hi)?);
    if f_lo == f_hi {
        let which = if f_lo { "feasible" } else { "infeasible" };
        return Err(Error::Bracket(format!("oracle is {which} at both {lo} and {hi}")));
    }
    let (mut good, mut bad) = if f_lo { (lo, hi) } else { (hi, lo) };
    let mut iterations = 0;
    while (good - bad).abs() > tol {
        let mid = 0.5 * (good + bad);
        if oracle(mid)? {
            good = mid;
        } else {
            bad = mid;
        }
        iterations += 1;
    }
    Ok(BisectResult { param: param.to_string(), value: good, feasible: good, infeasible: bad, iterations })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportPoint {
    pub theta: f64,
    pub status: Status,
    /// `max sinθ γ₁ + cosθ γ₂`; `+∞` when unbounded, `−∞` when infeasible.
    pub support: f64,
    pub gamma: Vec<f64>,
    /// Solver or assembly failure for this direction.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub kind: Mode,
    pub n: usize,
    pub directions: Vec<f64>,
    pub support_points: Vec<SupportPoint>,
}

/// Maximizes `sinθ γ₁ + cosθ γ₂` over `ndirs` equispaced angles in `[0, 2π)`.
pub fn sweep(problem: &Problem, ndirs: usize, relax: &Relaxation) -> Result<SweepResult> {
    if problem.s() != 2 {
        return Err(Error::Schema(format!("sweep needs exactly two parameters, found {}", problem.s())));
    }
    let directions: Vec<f64> =
        (0..ndirs).map(|i| 2.0 * std::f64::consts::PI * i as f64 / ndirs as f64).collect();
    let support_points = directions
        .par_iter()
        .map(|&theta| {
            let mut p = problem.clone();
            p.cost = vec![-theta.sin(), -theta.cos()];
            match relax.solve(&p) {
                Ok(r) => SupportPoint { theta, status: r.status, support: -r.bound, gamma: r.gamma, error: None },
                Err(e) => SupportPoint {
                    theta,
                    status: Status::Inaccurate,
                    support: f64::NAN,
                    gamma: Vec::new(),
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(SweepResult { kind: relax.mode, n: relax.n, directions, support_points })
}
