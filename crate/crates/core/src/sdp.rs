//! Block-structured semidefinite programs: modeling types, a Clarabel backend,
//! equality elimination, and SDPA sparse-format export and import.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;

/// Default solver tolerance on gap and feasibility residuals.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Largest relative duality gap reported as optimal.
pub const OPTIMAL_GAP: f64 = 1e-6;

/// Affine scalar expression `constant + Σ coeffs[i] x_i`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub constant: f64,
    pub coeffs: BTreeMap<usize, f64>,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        Self { constant: c, coeffs: BTreeMap::new() }
    }

    pub fn var(i: usize) -> Self {
        Self::term(i, 1.0)
    }

    pub fn term(i: usize, c: f64) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(i, c);
        Self { constant: 0.0, coeffs }
    }

    pub fn add_term(&mut self, i: usize, c: f64) {
        *self.coeffs.entry(i).or_insert(0.0) += c;
    }

    pub fn add_scaled(&mut self, other: &LinExpr, s: f64) {
        self.constant += s * other.constant;
        for (i, c) in &other.coeffs {
            self.add_term(*i, s * c);
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = Self::default();
        out.add_scaled(self, s);
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.coeffs.iter().map(|(i, c)| c * x[*i]).sum::<f64>()
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.coeffs.values().all(|c| *c == 0.0)
    }

    fn prune(&mut self) {
        self.coeffs.retain(|_, c| *c != 0.0);
    }
}

/// Symmetric matrix `C + Σ x_i A_i` with dense blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMatrix {
    dim: usize,
    pub constant: DMatrix<f64>,
    pub coeffs: BTreeMap<usize, DMatrix<f64>>,
}

impl AffineMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, constant: DMatrix::zeros(dim, dim), coeffs: BTreeMap::new() }
    }

    pub fn from_constant(c: DMatrix<f64>) -> Self {
        assert_eq!(c.nrows(), c.ncols());
        let mut out = Self::zeros(c.nrows());
        out.constant = symmetrize(&c);
        out
    }

    pub fn from_var(var: usize, a: DMatrix<f64>) -> Self {
        let mut out = Self::zeros(a.nrows());
        out.coeffs.insert(var, symmetrize(&a));
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn slot(&mut self, var: Option<usize>) -> &mut DMatrix<f64> {
        let dim = self.dim;
        match var {
            None => &mut self.constant,
            Some(v) => self.coeffs.entry(v).or_insert_with(|| DMatrix::zeros(dim, dim)),
        }
    }

    /// Adds `v` to entries `(i, j)` and `(j, i)`; a diagonal entry receives `v` once.
    pub fn add_sym(&mut self, var: Option<usize>, i: usize, j: usize, v: f64) {
        let m = self.slot(var);
        m[(i, j)] += v;
        if i != j {
            m[(j, i)] += v;
        }
    }

    /// Adds the expression `e` to entries `(i, j)` and `(j, i)`.
    pub fn add_expr_sym(&mut self, i: usize, j: usize, e: &LinExpr) {
        if e.constant != 0.0 {
            self.add_sym(None, i, j, e.constant);
        }
        for (var, c) in &e.coeffs {
            if *c != 0.0 {
                self.add_sym(Some(*var), i, j, *c);
            }
        }
    }

    /// Adds `e * m` for a symmetric constant matrix `m`.
    pub fn add_expr_times(&mut self, e: &LinExpr, m: &DMatrix<f64>) {
        if e.constant != 0.0 {
            self.constant += m * e.constant;
        }
        for (var, c) in &e.coeffs {
            if *c != 0.0 {
                *self.slot(Some(*var)) += m * *c;
            }
        }
    }

    pub fn add_scaled(&mut self, other: &AffineMatrix, s: f64) {
        assert_eq!(self.dim, other.dim);
        self.constant += &other.constant * s;
        for (var, m) in &other.coeffs {
            *self.slot(Some(*var)) += m * s;
        }
    }

    /// `T^T X T`.
    pub fn congruence(&self, t: &DMatrix<f64>) -> AffineMatrix {
        assert_eq!(t.nrows(), self.dim);
        let tt = t.transpose();
        let f = |m: &DMatrix<f64>| symmetrize(&(&tt * m * t));
        AffineMatrix {
            dim: t.ncols(),
            constant: f(&self.constant),
            coeffs: self.coeffs.iter().map(|(v, m)| (*v, f(m))).collect(),
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> LinExpr {
        let mut e = LinExpr::constant(self.constant[(i, j)]);
        for (v, m) in &self.coeffs {
            if m[(i, j)] != 0.0 {
                e.add_term(*v, m[(i, j)]);
            }
        }
        e
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        let mut out = self.constant.clone();
        for (v, m) in &self.coeffs {
            out += m * x[*v];
        }
        out
    }

    pub fn vars(&self) -> impl Iterator<Item = usize> + '_ {
        self.coeffs.keys().copied()
    }

    /// Drops variable matrices that are identically zero.
    pub fn prune(&mut self) {
        self.coeffs.retain(|_, m| m.iter().any(|v| *v != 0.0));
    }

    /// Orthonormal basis of the directions on which some component acts.
    /// A vector killed by the constant and every coefficient matrix carries
    /// an identically zero quadratic form and can be dropped from an LMI.
    pub fn active_basis(&self) -> DMatrix<f64> {
        let n = self.dim();
        let parts: Vec<DMatrix<f64>> = std::iter::once(&self.constant)
            .chain(self.coeffs.values())
            .filter_map(|m| {
                let s = linalg::max_abs(m);
                (s > 0.0).then(|| m / s)
            })
            .collect();
        let mut stacked = DMatrix::zeros(parts.len() * n, n);
        for (i, m) in parts.iter().enumerate() {
            stacked.view_mut((i * n, 0), (n, n)).copy_from(m);
        }
        linalg::row_space(&stacked)
    }

    pub fn is_symmetric(&self) -> bool {
        std::iter::once(&self.constant)
            .chain(self.coeffs.values())
            .all(|m| m == &m.transpose())
    }
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Solver-facing program: minimize `objective · x + offset` subject to
/// `psd_blocks[i](x) ⪰ 0`, `lin_ineqs[j](x) ≥ 0`, and `lin_eqs[k](x) = 0`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConicProgram {
    pub nvars: usize,
    pub var_names: Vec<String>,
    pub objective: Vec<f64>,
    pub offset: f64,
    pub psd_blocks: Vec<AffineMatrix>,
    pub lin_ineqs: Vec<LinExpr>,
    pub lin_eqs: Vec<LinExpr>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> usize {
        self.var_names.push(name.into());
        self.objective.push(0.0);
        self.nvars += 1;
        self.nvars - 1
    }

    pub fn add_vars(&mut self, prefix: &str, n: usize) -> Vec<usize> {
        (0..n).map(|i| self.add_var(format!("{prefix}[{i}]"))).collect()
    }

    pub fn add_psd(&mut self, mut block: AffineMatrix) {
        if block.dim() == 0 {
            return;
        }
        block.prune();
        self.psd_blocks.push(block);
    }

    pub fn add_ineq(&mut self, mut e: LinExpr) {
        e.prune();
        self.lin_ineqs.push(e);
    }

    pub fn add_eq(&mut self, mut e: LinExpr) {
        e.prune();
        self.lin_eqs.push(e);
    }

    pub fn constraint_count(&self) -> usize {
        self.psd_blocks.len() + self.lin_ineqs.len() + self.lin_eqs.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.objective.len() != self.nvars {
            return Err(Error::Inconsistent("objective length differs from variable count".into()));
        }
        let check = |v: usize| {
            if v >= self.nvars {
                Err(Error::Inconsistent(format!("constraint references undeclared variable {v}")))
            } else {
                Ok(())
            }
        };
        for b in &self.psd_blocks {
            if b.dim() == 0 {
                return Err(Error::Inconsistent("PSD block of dimension 0".into()));
            }
            if !b.is_symmetric() {
                return Err(Error::Inconsistent("PSD block is not symmetric".into()));
            }
            for v in b.vars() {
                check(v)?;
            }
        }
        for e in self.lin_ineqs.iter().chain(&self.lin_eqs) {
            for v in e.coeffs.keys() {
                check(*v)?;
            }
        }
        Ok(())
    }

    /// Copy with `mu * I` subtracted from every PSD block, so that feasibility
    /// requires a strictly positive definite point.
    pub fn with_margin(&self, mu: f64) -> Self {
        let mut out = self.clone();
        for b in &mut out.psd_blocks {
            for i in 0..b.dim() {
                b.constant[(i, i)] -= mu;
            }
        }
        out
    }

    /// Largest constraint violation at `x`: negative eigenvalues, negative
    /// inequality values, and absolute equality residuals.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut v: f64 = 0.0;
        for b in &self.psd_blocks {
            v = v.max(-linalg::min_eigenvalue(&b.eval(x)));
        }
        for e in &self.lin_ineqs {
            v = v.max(-e.eval(x));
        }
        for e in &self.lin_eqs {
            v = v.max(e.eval(x).abs());
        }
        v
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.offset + self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    Inaccurate,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::Unbounded => "unbounded",
            Status::Inaccurate => "inaccurate",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

/// Raw solver output for a [`ConicProgram`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub status: Status,
    pub objective: f64,
    pub x: Vec<f64>,
    pub residuals: Residuals,
    pub iterations: u32,
}

/// Outcome of an outer or inner relaxation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelaxationResult {
    pub status: Status,
    /// Optimal cost; `-∞` when unbounded, `+∞` when infeasible.
    pub bound: f64,
    pub gamma: Vec<f64>,
    pub residuals: Residuals,
    /// Values of every program variable (decision parameters first).
    pub certificates: Vec<f64>,
    pub iterations: u32,
}

impl RelaxationResult {
    pub fn from_outcome(out: SolveOutcome, nparams: usize) -> Self {
        let bound = match out.status {
            Status::Unbounded => f64::NEG_INFINITY,
            Status::Infeasible => f64::INFINITY,
            _ => out.objective,
        };
        let gamma = out.x.iter().take(nparams).copied().collect();
        Self {
            status: out.status,
            bound,
            gamma,
            residuals: out.residuals,
            certificates: out.x,
            iterations: out.iterations,
        }
    }

    pub fn unbounded(nparams: usize) -> Self {
        Self {
            status: Status::Unbounded,
            bound: f64::NEG_INFINITY,
            gamma: vec![0.0; nparams],
            residuals: Residuals::default(),
            certificates: vec![0.0; nparams],
            iterations: 0,
        }
    }
}

/// Solves `prog` with the Clarabel interior-point method.
pub fn solve(prog: &ConicProgram, tol: f64) -> Result<SolveOutcome> {
    prog.validate()?;
    let n = prog.nvars;
    if prog.constraint_count() == 0 || n == 0 {
        return Ok(trivial_outcome(prog));
    }

    let mut rows: Vec<usize> = Vec::new();
    let mut cols: Vec<usize> = Vec::new();
    let mut vals: Vec<f64> = Vec::new();
    let mut b: Vec<f64> = Vec::new();
    let mut cones: Vec<SupportedConeT<f64>> = Vec::new();

    // s = b - A x, so an affine row `e(x) ∈ K` becomes b = e.constant, A = -e.coeffs.
    let mut push_row = |e: &LinExpr, rows: &mut Vec<usize>, b: &mut Vec<f64>, scale: f64| {
        let r = b.len();
        b.push(scale * e.constant);
        for (v, c) in &e.coeffs {
            if *c != 0.0 {
                rows.push(r);
                cols.push(*v);
                vals.push(-scale * c);
            }
        }
    };

    if !prog.lin_eqs.is_empty() {
        for e in &prog.lin_eqs {
            push_row(e, &mut rows, &mut b, 1.0);
        }
        cones.push(SupportedConeT::ZeroConeT(prog.lin_eqs.len()));
    }
    let scalar_blocks: Vec<&AffineMatrix> = prog.psd_blocks.iter().filter(|blk| blk.dim() == 1).collect();
    let nonneg = prog.lin_ineqs.len() + scalar_blocks.len();
    if nonneg > 0 {
        for e in &prog.lin_ineqs {
            push_row(e, &mut rows, &mut b, 1.0);
        }
        for blk in &scalar_blocks {
            push_row(&blk.entry(0, 0), &mut rows, &mut b, 1.0);
        }
        cones.push(SupportedConeT::NonnegativeConeT(nonneg));
    }
    let sqrt2 = std::f64::consts::SQRT_2;
    for blk in prog.psd_blocks.iter().filter(|blk| blk.dim() > 1) {
        let blk = &diagonal_scaling(blk);
        let d = blk.dim();
        // Clarabel's triangular vectorization: upper triangle, column by column,
        // off-diagonal entries scaled by √2.
        for j in 0..d {
            for i in 0..=j {
                let s = if i == j { 1.0 } else { sqrt2 };
                push_row(&blk.entry(i, j), &mut rows, &mut b, s);
            }
        }
        cones.push(SupportedConeT::PSDTriangleConeT(d));
    }

    let m = b.len();
    let a = CscMatrix::new_from_triplets(m, n, rows, cols, vals);
    let p = CscMatrix::<f64>::zeros((n, n));
    // Ruiz equilibration hurts the inner programs but rescues some outer ones
    // stalled at rank-deficient optima, so it is tried second.
    let first = clarabel_solve(prog, &p, &a, &b, &cones, tol, false)?;
    if first.status != Status::Inaccurate {
        return Ok(first);
    }
    let second = clarabel_solve(prog, &p, &a, &b, &cones, tol, true)?;
    Ok(if second.status == Status::Inaccurate { first } else { second })
}

fn clarabel_solve(
    prog: &ConicProgram,
    p: &CscMatrix<f64>,
    a: &CscMatrix<f64>,
    b: &[f64],
    cones: &[SupportedConeT<f64>],
    tol: f64,
    equilibrate: bool,
) -> Result<SolveOutcome> {
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(400)
        .tol_gap_abs(tol)
        .tol_gap_rel(tol)
        .tol_feas(tol)
        .chordal_decomposition_enable(false)
        .equilibrate_enable(equilibrate)
        .direct_solve_method("faer".to_string())
        .build()
        .map_err(|e| Error::Solver(format!("{e:?}")))?;
    let mut solver = DefaultSolver::new(p, &prog.objective, a, b, cones, settings)
        .map_err(|e| Error::Solver(format!("{e:?}")))?;
    solver.solve();
    let sol = &solver.solution;
    let gap = (sol.obj_val - sol.obj_val_dual).abs() / (1.0 + sol.obj_val.abs());
    let status = match sol.status {
        SolverStatus::Solved => Status::Optimal,
        // stalled one step short of the gap target, but residuals are within
        // tolerance and the gap is far below the accepted 1e-6
        SolverStatus::AlmostSolved
            if sol.r_prim <= tol && sol.r_dual <= tol && gap <= OPTIMAL_GAP =>
        {
            Status::Optimal
        }
        SolverStatus::PrimalInfeasible => Status::Infeasible,
        SolverStatus::DualInfeasible => Status::Unbounded,
        _ => Status::Inaccurate,
    };
    let x = sol.x.clone();
    let objective = prog.objective_value(&x);
    Ok(SolveOutcome {
        status,
        objective,
        x,
        residuals: Residuals { primal: sol.r_prim, dual: sol.r_dual, gap },
        iterations: sol.iterations,
    })
}

/// `D X D` with `D_ii = 1/√(max_k |X_k[i,i]|)`, a congruence that leaves
/// semidefiniteness unchanged but evens out the diagonal across Legendre orders.
fn diagonal_scaling(blk: &AffineMatrix) -> AffineMatrix {
    let d = blk.dim();
    let scale: Vec<f64> = (0..d)
        .map(|i| {
            let m = std::iter::once(&blk.constant)
                .chain(blk.coeffs.values())
                .fold(0.0_f64, |acc, m| acc.max(m[(i, i)].abs()));
            if m > 0.0 { 1.0 / m.sqrt() } else { 1.0 }
        })
        .collect();
    blk.congruence(&DMatrix::from_diagonal(&DVector::from_vec(scale)))
}

fn trivial_outcome(prog: &ConicProgram) -> SolveOutcome {
    let x = vec![0.0; prog.nvars];
    // with no variables every constraint is a constant to check directly
    let status = if prog.nvars == 0 && prog.max_violation(&x) > 1e-12 {
        Status::Infeasible
    } else if prog.objective.iter().any(|c| *c != 0.0) {
        Status::Unbounded
    } else {
        Status::Optimal
    };
    SolveOutcome {
        status,
        objective: prog.offset,
        x,
        residuals: Residuals::default(),
        iterations: 0,
    }
}

/// Affine substitution `x = x0 + Z y` produced by equality elimination.
#[derive(Debug, Clone, PartialEq)]
pub struct Substitution {
    pub x0: DVector<f64>,
    pub z: DMatrix<f64>,
}

impl Substitution {
    pub fn recover(&self, y: &[f64]) -> Vec<f64> {
        let y = DVector::from_column_slice(y);
        (&self.x0 + &self.z * y).iter().copied().collect()
    }
}

/// Removes the equality constraints by parameterizing their solution set.
///
/// Fails with an inconsistency error when the equalities have no solution.
pub fn eliminate_equalities(prog: &ConicProgram) -> Result<(ConicProgram, Substitution)> {
    prog.validate()?;
    let n = prog.nvars;
    let neq = prog.lin_eqs.len();
    let mut e = DMatrix::zeros(neq, n);
    let mut rhs = DVector::zeros(neq);
    for (r, eq) in prog.lin_eqs.iter().enumerate() {
        rhs[r] = -eq.constant;
        for (v, c) in &eq.coeffs {
            e[(r, *v)] = *c;
        }
    }
    let (x0, z) = if neq == 0 {
        (DVector::zeros(n), DMatrix::identity(n, n))
    } else {
        let svd = e.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let x0 = svd
            .solve(&rhs, linalg::RANK_TOL * smax)
            .map_err(|m| Error::Solver(m.to_string()))?;
        let resid = (&e * &x0 - &rhs).norm();
        if resid > 1e-9 * (1.0 + rhs.norm()) {
            return Err(Error::Inconsistent(format!("equality constraints are inconsistent (residual {resid:e})")));
        }
        (x0, linalg::null_space(&e))
    };

    let m = z.ncols();
    let mut out = ConicProgram::new();
    for j in 0..m {
        out.add_var(format!("y[{j}]"));
    }
    let c = DVector::from_column_slice(&prog.objective);
    out.offset = prog.offset + c.dot(&x0);
    let zc = z.transpose() * &c;
    out.objective = zc.iter().copied().collect();

    let subst_expr = |e: &LinExpr| -> LinExpr {
        let mut out = LinExpr::constant(e.constant);
        for (v, a) in &e.coeffs {
            out.constant += a * x0[*v];
            for j in 0..m {
                let w = a * z[(*v, j)];
                if w != 0.0 {
                    out.add_term(j, w);
                }
            }
        }
        out.prune();
        out
    };
    for ineq in &prog.lin_ineqs {
        out.lin_ineqs.push(subst_expr(ineq));
    }
    for blk in &prog.psd_blocks {
        let d = blk.dim();
        let mut nb = AffineMatrix::zeros(d);
        nb.constant = blk.constant.clone();
        for (v, a) in &blk.coeffs {
            nb.constant += a * x0[*v];
            for j in 0..m {
                let w = z[(*v, j)];
                if w != 0.0 {
                    *nb.slot(Some(j)) += a * w;
                }
            }
        }
        nb.prune();
        out.psd_blocks.push(nb);
    }
    Ok((out, Substitution { x0, z }))
}

/// Writes `prog` in the sparse SDPA format.
///
/// Linear inequalities are collected into one diagonal block (negative size).
/// The constant matrix is stored as `F_0 = -C`, following the SDPA convention
/// `Σ F_i x_i - F_0 ⪰ 0`.
pub fn export_sdpa(prog: &ConicProgram) -> Result<String> {
    prog.validate()?;
    if !prog.lin_eqs.is_empty() {
        return Err(Error::Unsupported(format!(
            "{} equality constraints remain; eliminate them before export",
            prog.lin_eqs.len()
        )));
    }
    let mut out = String::new();
    if prog.offset != 0.0 {
        writeln!(out, "* offset {:?}", prog.offset).unwrap();
    }
    let mut sizes: Vec<i64> = prog.psd_blocks.iter().map(|b| b.dim() as i64).collect();
    if !prog.lin_ineqs.is_empty() {
        sizes.push(-(prog.lin_ineqs.len() as i64));
    }
    writeln!(out, "{}", prog.nvars).unwrap();
    writeln!(out, "{}", sizes.len()).unwrap();
    writeln!(out, "{}", sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ")).unwrap();
    writeln!(out, "{}", prog.objective.iter().map(|c| format!("{c:?}")).collect::<Vec<_>>().join(" ")).unwrap();

    let mut entry = |mat: usize, blk: usize, i: usize, j: usize, v: f64| {
        if v != 0.0 {
            writeln!(out, "{mat} {blk} {i} {j} {v:?}").unwrap();
        }
    };
    for (bi, b) in prog.psd_blocks.iter().enumerate() {
        let d = b.dim();
        for i in 0..d {
            for j in i..d {
                entry(0, bi + 1, i + 1, j + 1, -b.constant[(i, j)]);
            }
        }
        for (v, a) in &b.coeffs {
            for i in 0..d {
                for j in i..d {
                    entry(v + 1, bi + 1, i + 1, j + 1, a[(i, j)]);
                }
            }
        }
    }
    if !prog.lin_ineqs.is_empty() {
        let bi = prog.psd_blocks.len() + 1;
        for (r, e) in prog.lin_ineqs.iter().enumerate() {
            entry(0, bi, r + 1, r + 1, -e.constant);
        }
        // variable-major order, matching the PSD blocks
        let mut by_var: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
        for (r, e) in prog.lin_ineqs.iter().enumerate() {
            for (v, c) in &e.coeffs {
                by_var.entry(*v).or_default().push((r, *c));
            }
        }
        for (v, list) in by_var {
            for (r, c) in list {
                entry(v + 1, bi, r + 1, r + 1, c);
            }
        }
    }
    Ok(out)
}

pub fn write_sdpa(prog: &ConicProgram, path: &Path) -> Result<()> {
    std::fs::write(path, export_sdpa(prog)?)?;
    Ok(())
}

/// Parses a sparse SDPA document back into a [`ConicProgram`].
pub fn read_sdpa(text: &str) -> Result<ConicProgram> {
    let mut offset = 0.0;
    let mut lines = Vec::new();
    for line in text.lines() {
        let t = line.trim();
        if let Some(rest) = t.strip_prefix("* offset") {
            offset = parse_f64(rest.trim())?;
            continue;
        }
        if t.is_empty() || t.starts_with('*') || t.starts_with('"') {
            continue;
        }
        lines.push(t);
    }
    let tokens = |s: &str| -> Vec<String> {
        s.split(|c: char| c.is_whitespace() || ",{}()".contains(c))
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect()
    };
    let mut it = lines.into_iter();
    let mut next = |what: &str| it.next().ok_or_else(|| Error::Parse(format!("missing {what}")));
    let m: usize = parse_usize(&tokens(next("variable count")?)[0])?;
    let nblocks: usize = parse_usize(&tokens(next("block count")?)[0])?;
    let size_tokens = tokens(next("block sizes")?);
    if size_tokens.len() < nblocks {
        return Err(Error::Parse("too few block sizes".into()));
    }
    let sizes: Vec<i64> = size_tokens[..nblocks]
        .iter()
        .map(|t| t.parse::<i64>().map_err(|e| Error::Parse(e.to_string())))
        .collect::<Result<_>>()?;
    let obj_tokens = tokens(next("objective")?);
    if obj_tokens.len() < m {
        return Err(Error::Parse("objective vector too short".into()));
    }
    let objective: Vec<f64> = obj_tokens[..m].iter().map(|t| parse_f64(t)).collect::<Result<_>>()?;

    let mut prog = ConicProgram::new();
    for i in 0..m {
        prog.add_var(format!("x[{i}]"));
    }
    prog.objective = objective;
    prog.offset = offset;

    enum Blk {
        Psd(AffineMatrix),
        Diag(Vec<LinExpr>),
    }
    let mut blocks: Vec<Blk> = sizes
        .iter()
        .map(|&s| {
            if s < 0 {
                Blk::Diag(vec![LinExpr::default(); (-s) as usize])
            } else {
                Blk::Psd(AffineMatrix::zeros(s as usize))
            }
        })
        .collect();
    for line in it {
        let t = tokens(line);
        if t.len() < 5 {
            return Err(Error::Parse(format!("malformed entry line `{line}`")));
        }
        let mat = parse_usize(&t[0])?;
        let blk = parse_usize(&t[1])?;
        let i = parse_usize(&t[2])?;
        let j = parse_usize(&t[3])?;
        let v = parse_f64(&t[4])?;
        if mat > m || blk == 0 || blk > nblocks || i == 0 || j == 0 {
            return Err(Error::Parse(format!("entry out of range `{line}`")));
        }
        let (i, j) = (i.min(j) - 1, i.max(j) - 1);
        match &mut blocks[blk - 1] {
            Blk::Psd(b) => {
                if j >= b.dim() {
                    return Err(Error::Parse(format!("entry out of range `{line}`")));
                }
                let var = if mat == 0 { None } else { Some(mat - 1) };
                let v = if mat == 0 { -v } else { v };
                b.add_sym(var, i, j, v);
            }
            Blk::Diag(list) => {
                if i != j || i >= list.len() {
                    return Err(Error::Parse(format!("off-diagonal entry in diagonal block `{line}`")));
                }
                if mat == 0 {
                    list[i].constant -= v;
                } else {
                    list[i].add_term(mat - 1, v);
                }
            }
        }
    }
    for b in blocks {
        match b {
            Blk::Psd(b) => prog.add_psd(b),
            Blk::Diag(list) => {
                for e in list {
                    prog.add_ineq(e);
                }
            }
        }
    }
    Ok(prog)
}

fn parse_usize(t: &str) -> Result<usize> {
    t.parse::<usize>().map_err(|e| Error::Parse(format!("`{t}`: {e}")))
}

fn parse_f64(t: &str) -> Result<f64> {
    t.parse::<f64>().map_err(|e| Error::Parse(format!("`{t}`: {e}")))
}
