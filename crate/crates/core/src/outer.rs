//! Outer relaxation: restrict test functions to polynomials of degree `N`.
//!
//! Each inequality becomes `Π_N^T Q_N(γ) Π_N ⪰ 0`, where `Q_N` is the exact
//! Gram matrix of the functional on Legendre coefficients and `Π_N` spans the
//! coefficient vectors that satisfy the boundary conditions.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::legendre::{self, LegendrePoly};
use crate::linalg;
use crate::model::{AffinePoly, Factor, IntegralInequality, Location, Problem};
use crate::sdp::{self, AffineMatrix, ConicProgram, RelaxationResult};

/// Assembled outer relaxation of degree `N`.
#[derive(Debug, Clone)]
pub struct OuterRelaxation {
    pub degree: usize,
    pub program: ConicProgram,
    /// `Q_N(γ)` per inequality.
    pub grams: Vec<AffineMatrix>,
    /// `Π_N` per inequality; columns span the coefficient vectors meeting the BCs.
    pub bases: Vec<DMatrix<f64>>,
    /// Rescaled problem the relaxation was built from.
    pub problem: Problem,
}

impl OuterRelaxation {
    /// Polynomials `w = Π_N ζ` for inequality `ineq`.
    pub fn functions(&self, ineq: usize, zeta: &[f64]) -> Vec<LegendrePoly> {
        let c = &self.bases[ineq] * DVector::from_column_slice(zeta);
        let n1 = self.degree + 1;
        (0..c.len() / n1)
            .map(|i| LegendrePoly::new(c.rows(i * n1, n1).iter().copied().collect()))
            .collect()
    }

    /// True when no inequality admits a nonzero polynomial test function.
    pub fn is_vacuous(&self) -> bool {
        self.bases.iter().all(|b| b.ncols() == 0)
    }
}

/// Adds `sym(build(p))` for every component `p` of an affine coefficient.
pub(crate) fn accumulate(
    gram: &mut AffineMatrix,
    coeff: &AffinePoly,
    build: impl Fn(&LegendrePoly) -> DMatrix<f64>,
) {
    let sym = |m: DMatrix<f64>| (&m + m.transpose()) * 0.5;
    if !coeff.base.is_zero() {
        gram.constant += sym(build(&coeff.base));
    }
    for (i, p) in &coeff.params {
        let m = sym(build(p));
        gram.add_expr_times(&crate::sdp::LinExpr::var(*i), &m);
    }
}

/// Maps the stacked coefficient vector to the coefficients of `∂^d w_var`.
fn factor_map(q: usize, n: usize, var: usize, d: usize) -> DMatrix<f64> {
    let mut e = DMatrix::zeros(n + 1, q * (n + 1));
    e.view_mut((0, var * (n + 1)), (n + 1, n + 1)).copy_from(&legendre::derivative_matrix(n, d));
    e
}

fn boundary_row(q: usize, n: usize, f: Factor) -> DMatrix<f64> {
    let vals = DMatrix::from_fn(1, n + 1, |_, j| match f.loc {
        Location::Lower if j % 2 == 1 => -1.0,
        _ => 1.0,
    });
    vals * factor_map(q, n, f.var, f.deriv)
}

/// `Q_N(γ)` on the stacked Legendre coefficients of all variables.
pub fn outer_gram(ineq: &IntegralInequality, n: usize) -> AffineMatrix {
    let q = ineq.q();
    let mut gram = AffineMatrix::zeros(q * (n + 1));
    for t in &ineq.terms {
        match (t.a.loc.is_boundary(), t.b.loc.is_boundary()) {
            (false, false) => {
                let ea = factor_map(q, n, t.a.var, t.a.deriv);
                let eb = factor_map(q, n, t.b.var, t.b.deriv);
                accumulate(&mut gram, &t.coeff, |f| {
                    ea.transpose() * legendre::triple_product_matrix(f, 0..=n, 0..=n) * &eb
                });
            }
            (true, true) => {
                let ra = boundary_row(q, n, t.a);
                let rb = boundary_row(q, n, t.b);
                accumulate(&mut gram, &t.coeff, |f| ra.transpose() * &rb * f.integral());
            }
            _ => {
                let (bf, inf) = if t.a.loc.is_boundary() { (t.a, t.b) } else { (t.b, t.a) };
                let r = boundary_row(q, n, bf);
                let e = factor_map(q, n, inf.var, inf.deriv);
                accumulate(&mut gram, &t.coeff, |f| {
                    let m = DMatrix::from_fn(1, n + 1, |_, j| legendre::moment(f, j));
                    r.transpose() * (m * &e)
                });
            }
        }
    }
    gram
}

/// `A_N`: boundary conditions acting on the stacked Legendre coefficients.
pub fn outer_bc_matrix(ineq: &IntegralInequality, n: usize) -> DMatrix<f64> {
    let q = ineq.q();
    let lay = ineq.layout(0);
    let mut map = DMatrix::zeros(lay.bnd_len(), q * (n + 1));
    for (var, v) in ineq.vars.iter().enumerate() {
        for d in 0..=v.l {
            for loc in [Location::Lower, Location::Upper] {
                let row = boundary_row(q, n, Factor::boundary(var, d, loc));
                map.set_row(lay.boundary_index(var, d, loc), &row.row(0));
            }
        }
    }
    &ineq.bc_matrix * map
}

/// Builds the degree-`n` outer relaxation.
pub fn build_outer(problem: &Problem, n: usize) -> Result<OuterRelaxation> {
    let problem = problem.rescale_domain();
    let mut prog = ConicProgram::new();
    for name in &problem.param_names {
        prog.add_var(name.clone());
    }
    prog.objective = problem.cost.clone();
    let mut grams = Vec::new();
    let mut bases = Vec::new();
    for ineq in &problem.inequalities {
        let lmax = ineq.vars.iter().map(|v| v.l).max().unwrap_or(0);
        if n < lmax {
            return Err(Error::Degree(format!(
                "outer degree {n} is below the highest boundary order {lmax}"
            )));
        }
        let gram = outer_gram(ineq, n);
        // null space taken in coordinates where Q_N has a unit-size diagonal;
        // the raw Legendre Gram diagonal grows like a power of the degree
        let d = DMatrix::from_diagonal(&DVector::from_iterator(
            gram.dim(),
            (0..gram.dim()).map(|i| {
                let m = std::iter::once(&gram.constant)
                    .chain(gram.coeffs.values())
                    .fold(0.0_f64, |acc, m| acc.max(m[(i, i)].abs()));
                if m > 0.0 { 1.0 / m.sqrt() } else { 1.0 }
            }),
        ));
        let pi = &d * linalg::null_space(&(outer_bc_matrix(ineq, n) * &d));
        // directions the form never touches are dropped from the LMI only
        let projected = gram.congruence(&pi);
        prog.add_psd(projected.congruence(&projected.active_basis()));
        grams.push(gram);
        bases.push(pi);
    }
    Ok(OuterRelaxation { degree: n, program: prog, grams, bases, problem })
}

/// Solves the degree-`n` outer relaxation; the bound is a lower bound on the
/// optimal cost.
pub fn solve_outer(problem: &Problem, n: usize, tol: f64) -> Result<RelaxationResult> {
    let outer = build_outer(problem, n)?;
    let s = problem.s();
    if outer.program.psd_blocks.is_empty() && problem.cost.iter().any(|c| *c != 0.0) {
        return Ok(RelaxationResult::unbounded(s));
    }
    let out = sdp::solve(&outer.program, tol)?;
    Ok(RelaxationResult::from_outcome(out, s))
}
