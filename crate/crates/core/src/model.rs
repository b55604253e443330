//! Problem representation: variables, derivative orders, integrand terms,
//! boundary conditions, domain rescaling, and integration by parts.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::legendre::{self, LegendrePoly};
use crate::linalg;
use crate::sdp::LinExpr;

/// Where a factor of a quadratic term is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Location {
    Interior,
    Lower,
    Upper,
}

impl Location {
    pub fn is_boundary(&self) -> bool {
        !matches!(self, Location::Interior)
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "interior" => Ok(Location::Interior),
            "boundary:-1" => Ok(Location::Lower),
            "boundary:+1" | "boundary:1" => Ok(Location::Upper),
            other => Err(Error::Schema(format!("unknown factor location `{other}`"))),
        }
    }
}

/// `∂^deriv w_var`, either as a function on the interval or as a boundary value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Factor {
    pub var: usize,
    pub deriv: usize,
    pub loc: Location,
}

impl Factor {
    pub fn interior(var: usize, deriv: usize) -> Self {
        Self { var, deriv, loc: Location::Interior }
    }

    pub fn boundary(var: usize, deriv: usize, loc: Location) -> Self {
        Self { var, deriv, loc }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    /// Highest derivative order appearing in the integrand.
    pub k: usize,
    /// Highest derivative order appearing in the boundary conditions.
    pub l: usize,
}

/// Polynomial in `x` whose Legendre coefficients are affine in the decision
/// parameters: `base(x) + Σ_i γ_i params[i](x)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AffinePoly {
    pub base: LegendrePoly,
    pub params: BTreeMap<usize, LegendrePoly>,
}

impl AffinePoly {
    pub fn new(base: LegendrePoly, params: BTreeMap<usize, LegendrePoly>) -> Self {
        let params = params.into_iter().filter(|(_, p)| !p.is_zero()).collect();
        Self { base, params }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(LegendrePoly::constant(c), BTreeMap::new())
    }

    pub fn from_poly(p: LegendrePoly) -> Self {
        Self::new(p, BTreeMap::new())
    }

    /// `γ_i p(x)`.
    pub fn param(i: usize, p: LegendrePoly) -> Self {
        Self::new(LegendrePoly::zero(), BTreeMap::from([(i, p)]))
    }

    pub fn from_lin(e: &LinExpr) -> Self {
        let params = e.coeffs.iter().map(|(i, c)| (*i, LegendrePoly::constant(*c))).collect();
        Self::new(LegendrePoly::constant(e.constant), params)
    }

    pub fn is_zero(&self) -> bool {
        self.base.is_zero() && self.params.is_empty()
    }

    /// Degree in `x` over all parameter values.
    pub fn degree(&self) -> usize {
        self.params.values().map(|p| p.degree()).fold(self.base.degree(), usize::max)
    }

    /// Legendre coefficient `n` as an affine expression in the parameters.
    pub fn coeff(&self, n: usize) -> LinExpr {
        let mut e = LinExpr::constant(self.base.coeff(n));
        for (i, p) in &self.params {
            let c = p.coeff(n);
            if c != 0.0 {
                e.add_term(*i, c);
            }
        }
        e
    }

    /// Legendre coefficients `0..=degree` as affine expressions.
    pub fn coeffs(&self) -> Vec<LinExpr> {
        (0..=self.degree()).map(|n| self.coeff(n)).collect()
    }

    pub fn at(&self, gamma: &[f64]) -> LegendrePoly {
        let mut p = self.base.clone();
        for (i, q) in &self.params {
            p = p.axpy(gamma[*i], q);
        }
        p
    }

    pub fn eval(&self, x: f64, gamma: &[f64]) -> f64 {
        self.base.eval(x) + self.params.iter().map(|(i, p)| gamma[*i] * p.eval(x)).sum::<f64>()
    }

    pub fn value_upper(&self) -> LinExpr {
        let mut e = LinExpr::constant(self.base.at_upper());
        for (i, p) in &self.params {
            e.add_term(*i, p.at_upper());
        }
        e
    }

    pub fn value_lower(&self) -> LinExpr {
        let mut e = LinExpr::constant(self.base.at_lower());
        for (i, p) in &self.params {
            e.add_term(*i, p.at_lower());
        }
        e
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut params = self.params.clone();
        for (i, p) in &other.params {
            let cur = params.remove(i).unwrap_or_default();
            params.insert(*i, cur.add(p));
        }
        Self::new(self.base.add(&other.base), params)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|p| p.scale(s))
    }

    pub fn map(&self, f: impl Fn(&LegendrePoly) -> LegendrePoly) -> Self {
        Self::new(f(&self.base), self.params.iter().map(|(i, p)| (*i, f(p))).collect())
    }

    pub fn derivative(&self) -> Self {
        self.map(|p| p.derivative())
    }
}

/// Matrix of [`AffinePoly`] entries. Square integrand blocks are symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinePolyMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<AffinePoly>,
}

impl AffinePolyMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, entries: vec![AffinePoly::default(); rows * cols] }
    }

    pub fn get(&self, i: usize, j: usize) -> &AffinePoly {
        &self.entries[i * self.cols + j]
    }

    pub fn add_to(&mut self, i: usize, j: usize, p: &AffinePoly) {
        let e = &mut self.entries[i * self.cols + j];
        *e = e.add(p);
    }

    /// Adds `p` to a symmetric matrix: diagonal entries receive `p`,
    /// off-diagonal pairs receive `p/2` each.
    pub fn add_sym(&mut self, i: usize, j: usize, p: &AffinePoly) {
        if i == j {
            self.add_to(i, i, p);
        } else {
            let h = p.scale(0.5);
            self.add_to(i, j, &h);
            self.add_to(j, i, &h);
        }
    }

    pub fn eval(&self, x: f64, gamma: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).eval(x, gamma))
    }

    pub fn degree(&self) -> usize {
        self.entries.iter().map(|e| e.degree()).max().unwrap_or(0)
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

/// One quadratic contribution `∫ coeff(x) · A · B dx`, where a boundary factor
/// contributes its (constant) boundary value.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coeff: AffinePoly,
    pub a: Factor,
    pub b: Factor,
}

impl Term {
    pub fn new(coeff: AffinePoly, a: Factor, b: Factor) -> Self {
        Self { coeff, a, b }
    }

    pub fn is_interior(&self) -> bool {
        !self.a.loc.is_boundary() && !self.b.loc.is_boundary()
    }

    pub fn is_boundary(&self) -> bool {
        self.a.loc.is_boundary() && self.b.loc.is_boundary()
    }

    pub fn is_mixed(&self) -> bool {
        !self.is_interior() && !self.is_boundary()
    }

    /// Canonical factor order: boundary factor first in mixed terms, otherwise
    /// ascending `(var, deriv, loc)`.
    fn canonical(mut self) -> Self {
        let swap = if self.is_mixed() { !self.a.loc.is_boundary() } else { self.b < self.a };
        if swap {
            std::mem::swap(&mut self.a, &mut self.b);
        }
        self
    }
}

/// One integral inequality `F_γ{w} ≥ 0` over a function space defined by
/// homogeneous boundary conditions `A B^l w = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralInequality {
    pub vars: Vec<Variable>,
    pub terms: Vec<Term>,
    /// Rows act on the boundary vector laid out by [`CoefficientLayout::boundary_index`].
    pub bc_matrix: DMatrix<f64>,
}

impl IntegralInequality {
    pub fn q(&self) -> usize {
        self.vars.len()
    }

    pub fn k(&self) -> Vec<usize> {
        self.vars.iter().map(|v| v.k).collect()
    }

    pub fn l(&self) -> Vec<usize> {
        self.vars.iter().map(|v| v.l).collect()
    }

    pub fn k_max(&self) -> usize {
        self.vars.iter().map(|v| v.k).max().unwrap_or(0)
    }

    pub fn layout(&self, m: usize) -> CoefficientLayout {
        CoefficientLayout::new(&self.k(), &self.l(), m)
    }

    /// Maximum coefficient degree over terms with at least one interior factor.
    pub fn d_f(&self) -> usize {
        self.terms.iter().filter(|t| !t.is_boundary()).map(|t| t.coeff.degree()).max().unwrap_or(0)
    }

    /// Sums duplicate factor pairs, drops zero terms, and orders factors canonically.
    pub fn normalize(&mut self) {
        let mut merged: BTreeMap<(Factor, Factor), AffinePoly> = BTreeMap::new();
        for t in self.terms.drain(..) {
            let t = t.canonical();
            let e = merged.entry((t.a, t.b)).or_default();
            *e = e.add(&t.coeff);
        }
        self.terms = merged
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|((a, b), c)| Term::new(c, a, b))
            .collect();
    }

    /// `F_int`: symmetric matrix over `D^k w`.
    pub fn integrand_int(&self) -> AffinePolyMatrix {
        let lay = self.layout(0);
        let n = lay.dk_len();
        let mut f = AffinePolyMatrix::zeros(n, n);
        for t in self.terms.iter().filter(|t| t.is_interior()) {
            f.add_sym(lay.dk_index(t.a.var, t.a.deriv), lay.dk_index(t.b.var, t.b.deriv), &t.coeff);
        }
        f
    }

    /// `F_mix`: rows indexed by `B^l w`, columns by `D^k w`.
    pub fn integrand_mix(&self) -> AffinePolyMatrix {
        let lay = self.layout(0);
        let mut f = AffinePolyMatrix::zeros(lay.bnd_len(), lay.dk_len());
        for t in self.terms.iter().filter(|t| t.is_mixed()) {
            let r = lay.boundary_index(t.a.var, t.a.deriv, t.a.loc);
            f.add_to(r, lay.dk_index(t.b.var, t.b.deriv), &t.coeff);
        }
        f
    }

    /// `F_bnd`: symmetric matrix over `B^l w`.
    pub fn integrand_bnd(&self) -> AffinePolyMatrix {
        let lay = self.layout(0);
        let n = lay.bnd_len();
        let mut f = AffinePolyMatrix::zeros(n, n);
        for t in self.terms.iter().filter(|t| t.is_boundary()) {
            let i = lay.boundary_index(t.a.var, t.a.deriv, t.a.loc);
            let j = lay.boundary_index(t.b.var, t.b.deriv, t.b.loc);
            f.add_sym(i, j, &t.coeff);
        }
        f
    }

    /// `S(x; γ)`: rows and columns of `F_int` at each variable's highest derivative.
    pub fn highest_derivative_block(&self) -> AffinePolyMatrix {
        let q = self.q();
        let mut s = AffinePolyMatrix::zeros(q, q);
        for t in self.terms.iter().filter(|t| t.is_interior()) {
            if t.a.deriv == self.vars[t.a.var].k && t.b.deriv == self.vars[t.b.var].k {
                s.add_sym(t.a.var, t.b.var, &t.coeff);
            }
        }
        s
    }

    /// Direct quadrature of `F_γ{w}` for polynomial `w`.
    pub fn functional_value(&self, gamma: &[f64], w: &[LegendrePoly]) -> f64 {
        let q = self.q();
        let maxd = self
            .terms
            .iter()
            .flat_map(|t| [t.a.deriv, t.b.deriv])
            .max()
            .unwrap_or(0);
        // derivs[var][d] = ∂^d w_var
        let derivs: Vec<Vec<LegendrePoly>> = (0..q)
            .map(|i| {
                let mut v = vec![w[i].clone()];
                for d in 0..maxd {
                    let next = v[d].derivative();
                    v.push(next);
                }
                v
            })
            .collect();
        let mut total = 0.0;
        for t in &self.terms {
            let f = t.coeff.at(gamma);
            let fa = &derivs[t.a.var][t.a.deriv];
            let fb = &derivs[t.b.var][t.b.deriv];
            let bval = |p: &LegendrePoly, loc: Location| match loc {
                Location::Lower => p.at_lower(),
                Location::Upper => p.at_upper(),
                Location::Interior => unreachable!(),
            };
            total += match (t.a.loc.is_boundary(), t.b.loc.is_boundary()) {
                (false, false) => quad3(&f, fa, fb),
                (true, false) => bval(fa, t.a.loc) * quad2(&f, fb),
                (false, true) => bval(fb, t.b.loc) * quad2(&f, fa),
                (true, true) => bval(fa, t.a.loc) * bval(fb, t.b.loc) * f.integral(),
            };
        }
        total
    }

    fn recompute_k(&mut self) {
        for (i, v) in self.vars.iter_mut().enumerate() {
            v.k = self
                .terms
                .iter()
                .filter(|t| t.is_interior())
                .flat_map(|t| [t.a, t.b])
                .filter(|f| f.var == i)
                .map(|f| f.deriv)
                .max()
                .unwrap_or(0);
        }
    }
}

fn quad2(f: &LegendrePoly, a: &LegendrePoly) -> f64 {
    let (x, w) = legendre::gauss_legendre(legendre::nodes_for_degree(f.degree() + a.degree()));
    x.iter().zip(&w).map(|(xi, wi)| wi * f.eval(*xi) * a.eval(*xi)).sum()
}

fn quad3(f: &LegendrePoly, a: &LegendrePoly, b: &LegendrePoly) -> f64 {
    let deg = f.degree() + a.degree() + b.degree();
    let (x, w) = legendre::gauss_legendre(legendre::nodes_for_degree(deg));
    x.iter()
        .zip(&w)
        .map(|(xi, wi)| wi * f.eval(*xi) * a.eval(*xi) * b.eval(*xi))
        .sum()
}

/// Linear optimization problem `min c·γ` subject to one or more integral
/// inequalities sharing the decision vector `γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub param_names: Vec<String>,
    pub cost: Vec<f64>,
    pub domain: (f64, f64),
    pub inequalities: Vec<IntegralInequality>,
}

impl Problem {
    pub fn s(&self) -> usize {
        self.param_names.len()
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.param_names.iter().position(|n| n == name)
    }

    pub fn is_standard_domain(&self) -> bool {
        self.domain == (-1.0, 1.0)
    }

    /// Maps the problem onto `(-1, 1)` with `y = ((b-a)x + a + b)/2`.
    pub fn rescale_domain(&self) -> Problem {
        if self.is_standard_domain() {
            return self.clone();
        }
        let (a, b) = self.domain;
        let half = (b - a) / 2.0;
        let mid = (a + b) / 2.0;
        let dscale = 1.0 / half;
        let mut out = self.clone();
        out.domain = (-1.0, 1.0);
        for ineq in &mut out.inequalities {
            for t in &mut ineq.terms {
                let s = half * dscale.powi((t.a.deriv + t.b.deriv) as i32);
                t.coeff = t.coeff.map(|p| p.compose_affine(half, mid).scale(s));
            }
            let lay = ineq.layout(0);
            for var in 0..ineq.q() {
                for d in 0..=ineq.vars[var].l {
                    for loc in [Location::Lower, Location::Upper] {
                        let c = lay.boundary_index(var, d, loc);
                        let s = dscale.powi(d as i32);
                        for r in 0..ineq.bc_matrix.nrows() {
                            ineq.bc_matrix[(r, c)] *= s;
                        }
                    }
                }
            }
        }
        out
    }

    /// Integrates interior terms by parts until the two derivative orders of
    /// every interior term differ by at most one, then lowers each `k_i` to the
    /// highest interior order that remains.
    pub fn integrate_by_parts(&self) -> Result<Problem> {
        if !self.is_standard_domain() {
            return Err(Error::Domain("integration by parts expects the domain (-1, 1)".into()));
        }
        let mut out = self.clone();
        for ineq in &mut out.inequalities {
            let mut work: Vec<Term> = std::mem::take(&mut ineq.terms);
            let mut done: Vec<Term> = Vec::new();
            while let Some(t) = work.pop() {
                if !t.is_interior() || t.a.deriv.abs_diff(t.b.deriv) < 2 {
                    done.push(t);
                    continue;
                }
                let (hi, lo) = if t.a.deriv > t.b.deriv { (t.a, t.b) } else { (t.b, t.a) };
                let hi1 = Factor::interior(hi.var, hi.deriv - 1);
                let lo1 = Factor::interior(lo.var, lo.deriv + 1);
                for f in [hi1, lo1] {
                    if f.deriv > ineq.vars[f.var].l {
                        return Err(Error::Reduction(format!(
                            "order {} of `{}` exceeds its boundary order {}",
                            f.deriv, ineq.vars[f.var].name, ineq.vars[f.var].l
                        )));
                    }
                }
                // [f ∂^{α-1}u ∂^β v] at ±1, as constant-coefficient boundary terms
                let up = AffinePoly::from_lin(&t.coeff.value_upper().scaled(0.5));
                let dn = AffinePoly::from_lin(&t.coeff.value_lower().scaled(-0.5));
                done.push(Term::new(
                    up,
                    Factor::boundary(hi.var, hi.deriv - 1, Location::Upper),
                    Factor::boundary(lo.var, lo.deriv, Location::Upper),
                ));
                done.push(Term::new(
                    dn,
                    Factor::boundary(hi.var, hi.deriv - 1, Location::Lower),
                    Factor::boundary(lo.var, lo.deriv, Location::Lower),
                ));
                let df = t.coeff.derivative().scale(-1.0);
                if !df.is_zero() {
                    work.push(Term::new(df, hi1, lo));
                }
                work.push(Term::new(t.coeff.scale(-1.0), hi1, lo1));
            }
            ineq.terms = done;
            ineq.normalize();
            ineq.recompute_k();
        }
        Ok(out)
    }

    /// Rescaling followed by integration by parts.
    pub fn prepared(&self) -> Result<Problem> {
        self.rescale_domain().integrate_by_parts()
    }
}

/// Index arithmetic for every coefficient vector used by the relaxations.
///
/// * `D^k w`: per variable, orders `0..=k_i`.
/// * `B^l w`: per variable, orders `0..=l_i` at `-1`, then the same at `+1`.
/// * `ψ_M`: per variable, `∂^0..∂^{k_i-1} w_i(-1)` followed by `û^{k_i}_0..û^{k_i}_M`.
/// * extra boundary vector: per variable, orders `k_i..=l_i` at `-1`, then at `+1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoefficientLayout {
    pub k: Vec<usize>,
    pub l: Vec<usize>,
    pub m: usize,
    psi_offsets: Vec<usize>,
    ext_offsets: Vec<usize>,
    dk_offsets: Vec<usize>,
    bnd_offsets: Vec<usize>,
    psi_len: usize,
    ext_len: usize,
    dk_len: usize,
    bnd_len: usize,
}

impl CoefficientLayout {
    pub fn new(k: &[usize], l: &[usize], m: usize) -> Self {
        let mut psi_offsets = Vec::new();
        let mut ext_offsets = Vec::new();
        let mut dk_offsets = Vec::new();
        let mut bnd_offsets = Vec::new();
        let (mut p, mut e, mut d, mut b) = (0, 0, 0, 0);
        for (ki, li) in k.iter().zip(l) {
            psi_offsets.push(p);
            ext_offsets.push(e);
            dk_offsets.push(d);
            bnd_offsets.push(b);
            p += ki + m + 1;
            e += 2 * (li + 1 - ki.min(&(li + 1)));
            d += ki + 1;
            b += 2 * (li + 1);
        }
        Self {
            k: k.to_vec(),
            l: l.to_vec(),
            m,
            psi_offsets,
            ext_offsets,
            dk_offsets,
            bnd_offsets,
            psi_len: p,
            ext_len: e,
            dk_len: d,
            bnd_len: b,
        }
    }

    pub fn q(&self) -> usize {
        self.k.len()
    }

    pub fn psi_len(&self) -> usize {
        self.psi_len
    }

    pub fn ext_len(&self) -> usize {
        self.ext_len
    }

    pub fn dk_len(&self) -> usize {
        self.dk_len
    }

    pub fn bnd_len(&self) -> usize {
        self.bnd_len
    }

    /// Start of variable `var`'s block `ǔ` inside `ψ_M`.
    pub fn psi_offset(&self, var: usize) -> usize {
        self.psi_offsets[var]
    }

    pub fn check_len(&self, var: usize) -> usize {
        self.k[var] + self.m + 1
    }

    /// Position of `∂^α w_var(-1)` in `ψ_M`, `α < k_var`.
    pub fn boundary_value_index(&self, var: usize, alpha: usize) -> usize {
        debug_assert!(alpha < self.k[var]);
        self.psi_offsets[var] + alpha
    }

    /// Position of `û^{k_var}_n` in `ψ_M`.
    pub fn top_coeff_index(&self, var: usize, n: usize) -> usize {
        debug_assert!(n <= self.m);
        self.psi_offsets[var] + self.k[var] + n
    }

    /// Position of `∂^d w_var(loc)`, `k_var ≤ d ≤ l_var`, in the extra boundary vector.
    pub fn ext_index(&self, var: usize, d: usize, loc: Location) -> usize {
        let width = self.l[var] + 1 - self.k[var];
        let side = if loc == Location::Upper { width } else { 0 };
        self.ext_offsets[var] + side + d - self.k[var]
    }

    pub fn dk_index(&self, var: usize, d: usize) -> usize {
        self.dk_offsets[var] + d
    }

    pub fn boundary_index(&self, var: usize, d: usize, loc: Location) -> usize {
        let side = if loc == Location::Upper { self.l[var] + 1 } else { 0 };
        self.bnd_offsets[var] + side + d
    }
}

// ---------------------------------------------------------------------------
// JSON documents

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVariable {
    name: String,
    k: usize,
    l: usize,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawCoeff {
    #[serde(default, rename = "const")]
    constant: Vec<f64>,
    #[serde(default)]
    params: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFactor {
    var: String,
    deriv: usize,
    #[serde(default = "interior_str", rename = "where")]
    location: String,
}

fn interior_str() -> String {
    "interior".to_string()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTerm {
    coeff: RawCoeff,
    factors: Vec<RawFactor>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawInequality {
    variables: Option<Vec<RawVariable>>,
    #[serde(default)]
    terms: Vec<RawTerm>,
    bcs: Option<Vec<BTreeMap<String, f64>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    #[serde(default)]
    parameters: Vec<String>,
    #[serde(default)]
    cost: Vec<f64>,
    #[serde(default = "default_domain")]
    domain: [f64; 2],
    #[serde(default)]
    constants: BTreeMap<String, f64>,
    variables: Option<Vec<RawVariable>>,
    terms: Option<Vec<RawTerm>>,
    bcs: Option<Vec<BTreeMap<String, f64>>>,
    inequalities: Option<Vec<RawInequality>>,
}

fn default_domain() -> [f64; 2] {
    [-1.0, 1.0]
}

/// A validated problem document whose coefficients may still reference
/// parameters that are fixed later (bisection) or products of parameters.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    raw: RawProblem,
    inequalities: Vec<RawInequality>,
}

impl ProblemSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawProblem = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawProblem) -> Result<Self> {
        if raw.cost.len() != raw.parameters.len() {
            return Err(Error::Schema(format!(
                "cost has {} entries but there are {} parameters",
                raw.cost.len(),
                raw.parameters.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for p in &raw.parameters {
            if !seen.insert(p.as_str()) || raw.constants.contains_key(p) {
                return Err(Error::Schema(format!("duplicate parameter name `{p}`")));
            }
        }
        if !(raw.domain[0] < raw.domain[1]) {
            return Err(Error::Inconsistent(format!("domain [{}, {}] is empty", raw.domain[0], raw.domain[1])));
        }
        let inequalities = match &raw.inequalities {
            Some(list) => {
                if raw.terms.is_some() {
                    return Err(Error::Schema("use either top-level `terms` or `inequalities`".into()));
                }
                list.iter()
                    .map(|ineq| RawInequality {
                        variables: ineq.variables.clone().or_else(|| raw.variables.clone()),
                        terms: ineq.terms.clone(),
                        bcs: ineq.bcs.clone().or_else(|| raw.bcs.clone()),
                    })
                    .collect()
            }
            None => vec![RawInequality {
                variables: raw.variables.clone(),
                terms: raw.terms.clone().unwrap_or_default(),
                bcs: raw.bcs.clone(),
            }],
        };
        for ineq in &inequalities {
            if ineq.variables.is_none() {
                return Err(Error::Schema("missing field `variables`".into()));
            }
        }
        let spec = Self { raw, inequalities };
        // validate structure once with every parameter free
        spec.instantiate_inner(&BTreeMap::new(), true)?;
        Ok(spec)
    }

    pub fn parameters(&self) -> &[String] {
        &self.raw.parameters
    }

    /// Builds a [`Problem`], substituting the parameters listed in `fixed`.
    /// The remaining parameters become the decision vector.
    pub fn instantiate(&self, fixed: &BTreeMap<String, f64>) -> Result<Problem> {
        self.instantiate_inner(fixed, false)
    }

    fn instantiate_inner(&self, fixed: &BTreeMap<String, f64>, structural: bool) -> Result<Problem> {
        for name in fixed.keys() {
            if !self.raw.parameters.contains(name) {
                return Err(Error::Schema(format!("unknown parameter `{name}`")));
            }
        }
        let free: Vec<String> = self.raw.parameters.iter().filter(|p| !fixed.contains_key(*p)).cloned().collect();
        let cost: Vec<f64> = self
            .raw
            .parameters
            .iter()
            .zip(&self.raw.cost)
            .filter(|(p, _)| !fixed.contains_key(*p))
            .map(|(_, c)| *c)
            .collect();
        let mut values = self.raw.constants.clone();
        values.extend(fixed.iter().map(|(k, v)| (k.clone(), *v)));

        let mut inequalities = Vec::new();
        for raw in &self.inequalities {
            inequalities.push(build_inequality(raw, &free, &values, &self.raw.parameters, structural)?);
        }
        Ok(Problem {
            param_names: free,
            cost,
            domain: (self.raw.domain[0], self.raw.domain[1]),
            inequalities,
        })
    }
}

fn build_inequality(
    raw: &RawInequality,
    free: &[String],
    values: &BTreeMap<String, f64>,
    all_params: &[String],
    structural: bool,
) -> Result<IntegralInequality> {
    let raw_vars = raw.variables.as_ref().expect("checked");
    let mut vars = Vec::new();
    let mut names = BTreeMap::new();
    for (i, v) in raw_vars.iter().enumerate() {
        if v.k > v.l {
            return Err(Error::Inconsistent(format!(
                "variable `{}` has k = {} > l = {}",
                v.name, v.k, v.l
            )));
        }
        if names.insert(v.name.clone(), i).is_some() {
            return Err(Error::Schema(format!("duplicate variable `{}`", v.name)));
        }
        vars.push(Variable { name: v.name.clone(), k: v.k, l: v.l });
    }
    let var_of = |name: &str| {
        names.get(name).copied().ok_or_else(|| Error::Schema(format!("unknown variable `{name}`")))
    };

    let mut terms = Vec::new();
    for t in &raw.terms {
        if t.factors.len() != 2 {
            return Err(Error::Schema(format!("a term needs exactly two factors, got {}", t.factors.len())));
        }
        let mut fs = Vec::new();
        for f in &t.factors {
            let var = var_of(&f.var)?;
            let loc = Location::parse(&f.location)?;
            let limit = if loc.is_boundary() { vars[var].l } else { vars[var].k };
            if f.deriv > limit {
                return Err(Error::Inconsistent(format!(
                    "derivative order {} of `{}` exceeds its declared order {}",
                    f.deriv, f.var, limit
                )));
            }
            fs.push(Factor { var, deriv: f.deriv, loc });
        }
        let coeff = resolve_coeff(&t.coeff, free, values, all_params, structural)?;
        terms.push(Term::new(coeff, fs[0], fs[1]));
    }

    let lay = CoefficientLayout::new(
        &vars.iter().map(|v| v.k).collect::<Vec<_>>(),
        &vars.iter().map(|v| v.l).collect::<Vec<_>>(),
        0,
    );
    let bcs = raw.bcs.clone().unwrap_or_default();
    let mut a = DMatrix::zeros(bcs.len(), lay.bnd_len());
    for (r, row) in bcs.iter().enumerate() {
        for (key, val) in row {
            let parts: Vec<&str> = key.split(':').collect();
            if parts.len() != 3 {
                return Err(Error::Schema(format!("boundary key `{key}` is not `var:deriv:endpoint`")));
            }
            let var = var_of(parts[0])?;
            let d: usize = parts[1].parse().map_err(|_| Error::Schema(format!("bad derivative in `{key}`")))?;
            let loc = match parts[2] {
                "-1" => Location::Lower,
                "1" | "+1" => Location::Upper,
                _ => return Err(Error::Schema(format!("bad endpoint in `{key}`"))),
            };
            if d > vars[var].l {
                return Err(Error::Inconsistent(format!(
                    "boundary condition uses order {d} of `{}` above l = {}",
                    parts[0], vars[var].l
                )));
            }
            a[(r, lay.boundary_index(var, d, loc))] += val;
        }
    }
    let mut ineq = IntegralInequality { vars, terms, bc_matrix: linalg::independent_rows(&a) };
    ineq.normalize();
    Ok(ineq)
}

/// Resolves coefficient keys. A key is a parameter, a constant, or a product
/// `a*b*...` of those with at most one free parameter.
fn resolve_coeff(
    raw: &RawCoeff,
    free: &[String],
    values: &BTreeMap<String, f64>,
    all_params: &[String],
    structural: bool,
) -> Result<AffinePoly> {
    let mut out = AffinePoly::from_poly(legendre::project(&raw.constant));
    for (key, mono) in &raw.params {
        let mut scale = 1.0;
        let mut free_idx: Option<usize> = None;
        for name in key.split('*').map(str::trim) {
            if let Some(v) = values.get(name) {
                scale *= v;
            } else if let Some(i) = free.iter().position(|p| p == name) {
                if free_idx.is_some() && !structural {
                    return Err(Error::Inconsistent(format!(
                        "coefficient `{key}` is a product of two free parameters; fix one of them"
                    )));
                }
                free_idx = Some(i);
            } else if all_params.iter().any(|p| p == name) {
                unreachable!("parameter is either fixed or free");
            } else {
                return Err(Error::Schema(format!("unknown parameter or constant `{name}`")));
            }
        }
        let p = legendre::project(mono).scale(scale);
        out = match free_idx {
            Some(i) => out.add(&AffinePoly::param(i, p)),
            None => out.add(&AffinePoly::from_poly(p)),
        };
    }
    Ok(out)
}

/// Parses a problem document with every parameter treated as a decision variable.
pub fn parse_problem(text: &str) -> Result<Problem> {
    ProblemSpec::from_json(text)?.instantiate(&BTreeMap::new())
}
