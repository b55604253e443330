//! Inner relaxation: Legendre expansions of the highest derivatives truncated
//! at `M = N + 2k + d_F`, exact treatment of low modes, and estimates for the
//! tails. A feasible point of the resulting SDP is feasible for the original
//! problem.
//!
//! Every coefficient `û^α_n` is carried as a linear functional on the vector
//! `z = [ψ_M; e]`, where `ψ_M` stacks the blocks `ǔ` of all variables and `e`
//! holds boundary values of orders `k_i..=l_i` not determined by `ψ_M`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::legendre::{self, LegendrePoly};
use crate::linalg;
use crate::model::{CoefficientLayout, IntegralInequality, Location, Problem, Term};
use crate::outer::accumulate;
use crate::sdp::{self, AffineMatrix, ConicProgram, LinExpr, RelaxationResult};
use crate::sos::{self, PolyMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InnerOptions {
    pub n: usize,
    /// Degree of the S-procedure multiplier; `None` picks `min(N-2, 6)`.
    pub deg_t: Option<usize>,
}

impl InnerOptions {
    pub fn new(n: usize) -> Self {
        Self { n, deg_t: None }
    }

    pub fn deg_t(&self) -> usize {
        self.deg_t.unwrap_or_else(|| self.n.saturating_sub(2).min(6))
    }
}

/// Per-inequality pieces of the inner relaxation, kept for diagnostics and
/// for checking representations against quadrature.
#[derive(Debug, Clone)]
pub struct InnerAssembly {
    pub n: usize,
    pub m: usize,
    pub d_f: usize,
    pub layout: CoefficientLayout,
    /// `Q^tot_M` over `z = [ψ_M; e]`.
    pub q_tot: AffineMatrix,
    /// Diagonal of `Σ_M`.
    pub sigma: Vec<LinExpr>,
    /// Boundary conditions over `z`.
    pub k_matrix: DMatrix<f64>,
    /// Basis of admissible `z`.
    pub lambda: DMatrix<f64>,
    /// Number of auxiliary blocks `Ω` and their dimensions.
    pub omega_dims: Vec<usize>,
    /// `(f̂_n(γ), slack variable)` pairs with `-t ≤ f̂_n ≤ t`.
    pub abs_lifts: Vec<(LinExpr, usize)>,
    /// Whether the pointwise condition used the S-procedure.
    pub s_procedure: bool,
    /// Prepared inequality (rescaled, integrated by parts).
    pub inequality: IntegralInequality,
}

impl InnerAssembly {
    pub fn z_len(&self) -> usize {
        self.layout.psi_len() + self.layout.ext_len()
    }

    /// `z` for polynomial test functions. Only exact when each `∂^{k_i} w_i`
    /// has degree at most `M`.
    pub fn coefficients(&self, w: &[LegendrePoly]) -> DVector<f64> {
        let lay = &self.layout;
        let mut z = DVector::zeros(self.z_len());
        for (i, wi) in w.iter().enumerate() {
            let k = lay.k[i];
            let mut d = wi.clone();
            for alpha in 0..k {
                z[lay.boundary_value_index(i, alpha)] = d.at_lower();
                d = d.derivative();
            }
            for n in 0..=lay.m {
                z[lay.top_coeff_index(i, n)] = d.coeff(n);
            }
            let mut d = wi.clone();
            for order in 0..=lay.l[i] {
                if order >= k {
                    z[lay.psi_len() + lay.ext_index(i, order, Location::Lower)] = d.at_lower();
                    z[lay.psi_len() + lay.ext_index(i, order, Location::Upper)] = d.at_upper();
                }
                d = d.derivative();
            }
        }
        z
    }
}

/// Rows of `û^α_n` as functionals on `ǔ = [∂^0..∂^{k-1} u(-1), û^k_0..û^k_M]`,
/// indexed `[α][n]` for `n ≤ M + α − k`.
pub fn coefficient_rows(k: usize, m: usize) -> Vec<Vec<DVector<f64>>> {
    let len = k + m + 1;
    let mut rows: Vec<Vec<DVector<f64>>> = vec![Vec::new(); k + 1];
    rows[k] = (0..=m)
        .map(|n| {
            let mut r = DVector::zeros(len);
            r[k + n] = 1.0;
            r
        })
        .collect();
    for alpha in (0..k).rev() {
        let up = &rows[alpha + 1];
        let top = m + alpha - k;
        let mut cur = Vec::with_capacity(top + 1);
        for n in 0..=top {
            let r = if n == 0 {
                let mut r = &up[0] - &up[1] / 3.0;
                r[alpha] += 1.0;
                r
            } else {
                &up[n - 1] / (2 * n - 1) as f64 - &up[n + 1] / (2 * n + 3) as f64
            };
            cur.push(r);
        }
        rows[alpha] = cur;
    }
    rows
}

/// `û^α_{[r,s]} = B·B^{k-1}u|_{-1} + D·û^k_{[0,M]}`.
pub fn integration_matrices(
    alpha: usize,
    r: usize,
    s: usize,
    k: usize,
    m: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if alpha > k || r > s || s + k > m + alpha {
        return Err(Error::Index(format!(
            "coefficient range [{r}, {s}] of order {alpha} is outside [0, M + α − k] with M = {m}, k = {k}"
        )));
    }
    let rows = coefficient_rows(k, m);
    let nr = s - r + 1;
    let b = DMatrix::from_fn(nr, k, |i, j| rows[alpha][r + i][j]);
    let d = DMatrix::from_fn(nr, m + 1, |i, j| rows[alpha][r + i][k + j]);
    Ok((b, d))
}

/// `G` with `B^{k-1}u = G ǔ`: rows for `x = -1` (orders `0..k`) then `x = +1`.
pub fn boundary_matrix(k: usize, m: usize) -> DMatrix<f64> {
    let rows = coefficient_rows(k, m);
    let mut g = DMatrix::zeros(2 * k, k + m + 1);
    for alpha in 0..k {
        g[(alpha, alpha)] = 1.0;
        let mut r = &rows[alpha + 1][0] * 2.0;
        r[alpha] += 1.0;
        g.set_row(k + alpha, &r.transpose());
    }
    g
}

/// `ω_η` for `η = 1..=k`.
fn omega(m: usize, k: usize, eta: usize) -> f64 {
    let a = (2 * (m - k + eta) + 1) as f64;
    4.0 / (a * (a + 4.0))
}

struct Builder<'a> {
    ineq: &'a IntegralInequality,
    lay: CoefficientLayout,
    n: usize,
    m: usize,
    d_f: usize,
    nz: usize,
    /// `[var][α][n]`, functionals on `z`.
    rows: Vec<Vec<Vec<DVector<f64>>>>,
    q_tot: AffineMatrix,
    sigma: Vec<LinExpr>,
    omega_dims: Vec<usize>,
    abs_lifts: Vec<(LinExpr, usize)>,
}

impl<'a> Builder<'a> {
    fn new(ineq: &'a IntegralInequality, n: usize) -> Result<Self> {
        let k_max = ineq.k_max();
        let d_f = ineq.d_f();
        if n + 1 < d_f + k_max {
            return Err(Error::Degree(format!(
                "N = {n} is below d_F + k − 1 = {}",
                d_f + k_max - 1
            )));
        }
        let m = n + 2 * k_max + d_f;
        let lay = ineq.layout(m);
        let nz = lay.psi_len() + lay.ext_len();
        let rows = (0..ineq.q())
            .map(|i| {
                let off = lay.psi_offset(i);
                coefficient_rows(lay.k[i], m)
                    .into_iter()
                    .map(|per_alpha| {
                        per_alpha
                            .into_iter()
                            .map(|r| {
                                let mut g = DVector::zeros(nz);
                                g.rows_mut(off, r.len()).copy_from(&r);
                                g
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            ineq,
            lay,
            n,
            m,
            d_f,
            nz,
            rows,
            q_tot: AffineMatrix::zeros(nz),
            sigma: vec![LinExpr::default(); ineq.q()],
            omega_dims: Vec::new(),
            abs_lifts: Vec::new(),
        })
    }

    fn coef(&self, var: usize, alpha: usize, n: usize) -> &DVector<f64> {
        &self.rows[var][alpha][n]
    }

    /// Stacked functionals `û^α_n`, `n ∈ 0..=top`, as rows.
    fn coef_block(&self, var: usize, alpha: usize, top: usize) -> DMatrix<f64> {
        DMatrix::from_fn(top + 1, self.nz, |n, j| self.rows[var][alpha][n][j])
    }

    fn boundary_value(&self, var: usize, d: usize, loc: Location) -> DVector<f64> {
        let k = self.lay.k[var];
        if d < k {
            let off = self.lay.psi_offset(var);
            let mut r = DVector::zeros(self.nz);
            r[off + d] = 1.0;
            if loc == Location::Upper {
                r += self.coef(var, d + 1, 0) * 2.0;
            }
            r
        } else {
            let mut r = DVector::zeros(self.nz);
            r[self.lay.psi_len() + self.lay.ext_index(var, d, loc)] = 1.0;
            r
        }
    }

    fn top(&self, var: usize, alpha: usize) -> usize {
        self.m + alpha - self.lay.k[var]
    }

    fn add_term(&mut self, prog: &mut ConicProgram, t: &Term) {
        let (a, b) = (t.a, t.b);
        if t.is_boundary() {
            let ra = self.boundary_value(a.var, a.deriv, a.loc);
            let rb = self.boundary_value(b.var, b.deriv, b.loc);
            accumulate(&mut self.q_tot, &t.coeff, |f| &ra * rb.transpose() * f.integral());
            return;
        }
        if t.is_mixed() {
            let ra = self.boundary_value(a.var, a.deriv, a.loc);
            let deg = t.coeff.degree();
            let block = self.coef_block(b.var, b.deriv, deg);
            accumulate(&mut self.q_tot, &t.coeff, |f| {
                let w = DMatrix::from_fn(1, deg + 1, |_, n| legendre::moment(f, n));
                &ra * (w * &block)
            });
            return;
        }
        let (ka, kb) = (self.lay.k[a.var], self.lay.k[b.var]);
        if a.deriv == ka && b.deriv == kb {
            self.add_top_term(prog, t);
        } else {
            self.add_lower_term(prog, t);
        }
    }

    /// Both factors at their highest order: exact over `[0, M]²`, remainder
    /// coupling bounded by an auxiliary block when the coefficient depends on `x`.
    fn add_top_term(&mut self, prog: &mut ConicProgram, t: &Term) {
        let (a, b) = (t.a, t.b);
        let m = self.m;
        let ea = self.coef_block(a.var, a.deriv, m);
        let eb = self.coef_block(b.var, b.deriv, m);
        accumulate(&mut self.q_tot, &t.coeff, |f| {
            ea.transpose() * legendre::triple_product_matrix(f, 0..=m, 0..=m) * &eb
        });
        if t.coeff.degree() == 0 {
            return;
        }
        let d = self.d_f;
        let lo = m + 1 - d;
        let phi = |f: &LegendrePoly| legendre::triple_product_matrix(f, lo..=m, m + 1..=m + d);
        let delta: Vec<f64> = (1..=d).map(|j| 2.0 / (2 * (m + j) + 1) as f64).collect();
        let same = a.var == b.var;
        let vars = if same { vec![a.var] } else { vec![a.var, b.var] };
        let nq = d * vars.len();
        let dim = 2 * nq;
        let mut omega = AffineMatrix::zeros(dim);

        // Q^{kk}: free symmetric block acting on the top modes (u_lo[, v_lo])
        let mut qkk = AffineMatrix::zeros(self.nz);
        let sel: Vec<DVector<f64>> = vars
            .iter()
            .flat_map(|v| (lo..=m).map(move |n| (*v, n)))
            .map(|(v, n)| self.coef(v, self.lay.k[v], n).clone())
            .collect();
        for c in 0..nq {
            for r in 0..=c {
                let x = prog.add_var(format!("Qkk[{r},{c}]"));
                omega.add_sym(Some(x), r, c, 1.0);
                let outer = (&sel[r] * sel[c].transpose() + &sel[c] * sel[r].transpose())
                    * if r == c { 0.5 } else { 1.0 };
                qkk.add_expr_times(&LinExpr::var(x), &outer);
            }
        }
        self.q_tot.add_scaled(&qkk, -1.0);

        // Y: couples low modes to the first d tail modes
        let mut y = AffineMatrix::zeros(dim);
        let place = |y: &mut AffineMatrix, p: &LegendrePoly, var: Option<usize>| {
            let ph = phi(p);
            if same {
                for i in 0..d {
                    for j in 0..d {
                        y.add_sym(var, i, nq + j, ph[(i, j)]);
                    }
                }
            } else {
                // rows (u_lo, v_lo), cols (u_hi, v_hi): u_lo–v_hi and v_lo–u_hi
                for i in 0..d {
                    for j in 0..d {
                        y.add_sym(var, i, nq + d + j, 0.5 * ph[(i, j)]);
                        y.add_sym(var, d + i, nq + j, 0.5 * ph[(i, j)]);
                    }
                }
            }
        };
        if !t.coeff.base.is_zero() {
            place(&mut y, &t.coeff.base, None);
        }
        for (i, p) in &t.coeff.params {
            place(&mut y, p, Some(*i));
        }
        omega.add_scaled(&y, 1.0);

        for (slot, v) in vars.iter().enumerate() {
            let s = prog.add_var(format!("sigma_kk[{v}]"));
            prog.add_ineq(LinExpr::var(s));
            for (j, dj) in delta.iter().enumerate() {
                let r = nq + slot * d + j;
                omega.add_sym(Some(s), r, r, *dj);
            }
            self.sigma[*v].add_term(s, 1.0);
        }
        self.omega_dims.push(dim);
        prog.add_psd(omega);
    }

    /// `Z_α` (quadratic form on `z`) and `λ_α` with
    /// `½ Σ_{n>N+α} (û^α_n)² ‖L_n‖² ≤ z^T Z_α z + λ_α ‖U^k_M‖²`.
    fn tail_estimate(&self, var: usize, alpha: usize) -> (DMatrix<f64>, f64) {
        let (n, m, k) = (self.n, self.m, self.lay.k[var]);
        let mut z = DMatrix::zeros(self.nz, self.nz);
        let mut add_sq = |r: &DVector<f64>, w: f64| z += r * r.transpose() * w;
        if alpha == k {
            for j in n + k + 1..=m {
                add_sq(self.coef(var, k, j), 1.0 / (2 * j + 1) as f64);
            }
            return (z, 0.5);
        }
        for j in n + alpha + 1..=m + alpha - k {
            add_sq(self.coef(var, alpha, j), 1.0 / (2 * j + 1) as f64);
        }
        let mut weight = 1.0;
        for j in alpha + 1..=k {
            for mm in [m + j - k - 1, m + j - k] {
                let a = (2 * mm + 1) as f64;
                let c = 2.0 / ((2 * mm + 3) as f64 * a * a);
                add_sq(self.coef(var, j, mm), weight * c);
            }
            weight *= omega(m, k, j);
        }
        (z, 0.5 * weight)
    }

    /// At least one factor below its highest order: exact outside the block of
    /// two tails, whose coupling is bounded by `‖f̂‖₁` times tail norms.
    fn add_lower_term(&mut self, prog: &mut ConicProgram, t: &Term) {
        let (a, b) = (t.a, t.b);
        let (na, nb) = (self.n + a.deriv, self.n + b.deriv);
        let (ta, tb) = (self.top(a.var, a.deriv), self.top(b.var, b.deriv));
        let ea = self.coef_block(a.var, a.deriv, ta);
        let eb = self.coef_block(b.var, b.deriv, tb);
        accumulate(&mut self.q_tot, &t.coeff, |f| {
            let mut phi = legendre::triple_product_matrix(f, 0..=ta, 0..=tb);
            for i in na + 1..=ta {
                for j in nb + 1..=tb {
                    phi[(i, j)] = 0.0;
                }
            }
            ea.transpose() * phi * &eb
        });

        // ‖f̂‖₁ ≤ Σ t_n
        let mut norm = LinExpr::default();
        for e in t.coeff.coeffs() {
            if e.coeffs.values().all(|c| *c == 0.0) {
                norm.constant += e.constant.abs();
            } else {
                let s = prog.add_var("abs");
                let mut up = LinExpr::var(s);
                up.add_scaled(&e, -1.0);
                let mut dn = LinExpr::var(s);
                dn.add_scaled(&e, 1.0);
                prog.add_ineq(up);
                prog.add_ineq(dn);
                norm.add_term(s, 1.0);
                self.abs_lifts.push((e, s));
            }
        }
        if norm.is_zero() {
            return;
        }
        let eps = ((self.n + 1) as f64).powi(b.deriv as i32 - a.deriv as i32);
        let (za, la) = self.tail_estimate(a.var, a.deriv);
        let (zb, lb) = self.tail_estimate(b.var, b.deriv);
        let r = za * eps + zb / eps;
        self.q_tot.add_expr_times(&norm.scaled(-1.0), &r);
        self.sigma[a.var].add_scaled(&norm, eps * la);
        self.sigma[b.var].add_scaled(&norm, lb / eps);
    }

    /// Boundary conditions as functionals on `z`.
    fn k_matrix(&self) -> DMatrix<f64> {
        let lay0 = self.ineq.layout(0);
        let mut map = DMatrix::zeros(lay0.bnd_len(), self.nz);
        for (var, v) in self.ineq.vars.iter().enumerate() {
            for d in 0..=v.l {
                for loc in [Location::Lower, Location::Upper] {
                    let r = self.boundary_value(var, d, loc);
                    map.set_row(lay0.boundary_index(var, d, loc), &r.transpose());
                }
            }
        }
        &self.ineq.bc_matrix * map
    }
}

/// Basis of `{z : K z = 0}` restricted to the coordinates the quadratic form
/// touches; the other coordinates are free and eliminated from `K` first.
fn admissible_basis(k: &DMatrix<f64>, q: &AffineMatrix) -> DMatrix<f64> {
    let nz = q.dim();
    let used: Vec<bool> = (0..nz)
        .map(|i| {
            std::iter::once(&q.constant)
                .chain(q.coeffs.values())
                .any(|m| m.row(i).iter().any(|v| *v != 0.0))
        })
        .collect();
    let keep: Vec<usize> = (0..nz).filter(|i| used[*i]).collect();
    let drop: Vec<usize> = (0..nz).filter(|i| !used[*i]).collect();
    let k1 = k.select_columns(&keep);
    let k2 = k.select_columns(&drop);
    let w = if drop.is_empty() {
        DMatrix::identity(k.nrows(), k.nrows())
    } else {
        linalg::null_space(&k2.transpose())
    };
    let reduced = if k.nrows() == 0 { DMatrix::zeros(0, keep.len()) } else { w.transpose() * k1 };
    let basis = linalg::null_space(&reduced);
    let mut out = DMatrix::zeros(nz, basis.ncols());
    for (r, i) in keep.iter().enumerate() {
        out.set_row(*i, &basis.row(r));
    }
    out
}

fn build_inequality(
    prog: &mut ConicProgram,
    ineq: &IntegralInequality,
    opts: &InnerOptions,
) -> Result<InnerAssembly> {
    let mut b = Builder::new(ineq, opts.n)?;
    for t in &ineq.terms {
        b.add_term(prog, t);
    }

    let k = b.k_matrix();
    let lambda = admissible_basis(&k, &b.q_tot);
    let projected = b.q_tot.congruence(&lambda);
    let active = projected.active_basis();
    let lambda = lambda * &active;
    prog.add_psd(projected.congruence(&active));

    // S(x; γ) − Σ_M ⪰ 0 on [-1, 1]
    let s = ineq.highest_derivative_block();
    let mut smat = PolyMatrix::from_affine(&s);
    for (i, sig) in b.sigma.iter().enumerate() {
        smat.add_coeff(i, i, 0, sig, -1.0);
    }
    let s_procedure = s.degree() > 0;
    if s_procedure {
        for c in sos::s_procedure_interval(prog, &smat, opts.deg_t())? {
            c.emit(prog);
        }
    } else {
        let q = ineq.q();
        let mut lmi = AffineMatrix::zeros(q);
        for i in 0..q {
            for j in i..q {
                lmi.add_expr_sym(i, j, &smat.coeff(i, j, 0));
            }
        }
        prog.add_psd(lmi);
    }

    Ok(InnerAssembly {
        n: opts.n,
        m: b.m,
        d_f: b.d_f,
        layout: b.lay.clone(),
        q_tot: b.q_tot,
        sigma: b.sigma,
        k_matrix: k,
        lambda,
        omega_dims: b.omega_dims,
        abs_lifts: b.abs_lifts,
        s_procedure,
        inequality: ineq.clone(),
    })
}

/// Builds the inner SDP. Decision parameters are the first `s` program variables.
pub fn build_inner_sdp(problem: &Problem, opts: &InnerOptions) -> Result<(ConicProgram, Vec<InnerAssembly>)> {
    let prepared = problem.prepared()?;
    let mut prog = ConicProgram::new();
    for name in &prepared.param_names {
        prog.add_var(name.clone());
    }
    let mut assemblies = Vec::new();
    for ineq in &prepared.inequalities {
        assemblies.push(build_inequality(&mut prog, ineq, opts)?);
    }
    let mut objective = vec![0.0; prog.nvars];
    objective[..prepared.cost.len()].copy_from_slice(&prepared.cost);
    prog.objective = objective;
    Ok((prog, assemblies))
}

/// Solves the inner relaxation; an optimal point is feasible for the original
/// problem and the bound is an upper bound on its optimal cost.
pub fn solve_inner(problem: &Problem, opts: &InnerOptions, tol: f64) -> Result<RelaxationResult> {
    let (prog, _) = build_inner_sdp(problem, opts)?;
    let out = sdp::solve(&prog, tol)?;
    Ok(RelaxationResult::from_outcome(out, problem.s()))
}

/// Coefficient of a single-parameter affine polynomial, used by the tests.
#[cfg(test)]
fn poly(c: &[f64]) -> crate::model::AffinePoly {
    crate::model::AffinePoly::from_poly(LegendrePoly::new(c.to_vec()))
}
