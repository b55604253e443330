//! Semidefinite relaxations of optimization problems constrained by
//! one-dimensional affine homogeneous quadratic integral inequalities.
//!
//! Outer relaxations restrict the test functions to polynomials and give lower
//! bounds on the optimal cost. Inner relaxations bound the functional from below
//! through Legendre tail estimates and give upper bounds with feasible points.

use openblas_src as _;

pub mod drivers;
pub mod error;
pub mod inner;
pub mod legendre;
pub mod linalg;
pub mod model;
pub mod outer;
pub mod sdp;
pub mod sos;

pub use drivers::{bisect, sweep, BisectResult, Mode, Relaxation, SupportPoint, SweepResult};
pub use error::{Error, Result};
pub use inner::{build_inner_sdp, solve_inner, InnerAssembly, InnerOptions};
pub use legendre::LegendrePoly;
pub use model::{
    parse_problem, AffinePoly, AffinePolyMatrix, CoefficientLayout, Factor, IntegralInequality,
    Location, Problem, ProblemSpec, Term, Variable,
};
pub use outer::{build_outer, solve_outer, OuterRelaxation};
pub use sdp::{AffineMatrix, ConicProgram, LinExpr, RelaxationResult, Status};
