//! Legendre-basis arithmetic on `[-1, 1]`.
//!
//! Every integral in this module is evaluated with a Gauss–Legendre rule whose
//! node count makes it exact for the polynomial integrand at hand, so results
//! carry only floating-point rounding error.

use std::ops::RangeInclusive;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Trailing coefficients below this magnitude do not count towards the degree.
pub const DEGREE_TOL: f64 = 1e-14;

/// Polynomial stored by its coefficients in the Legendre basis, `p = Σ c_n L_n`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LegendrePoly {
    coeffs: Vec<f64>,
}

impl LegendrePoly {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last().is_some_and(|c| c.abs() <= DEGREE_TOL) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    /// The single basis polynomial `L_n`.
    pub fn basis(n: usize) -> Self {
        let mut coeffs = vec![0.0; n + 1];
        coeffs[n] = 1.0;
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of `L_n` (zero past the stored degree).
    pub fn coeff(&self, n: usize) -> f64 {
        self.coeffs.get(n).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree of the polynomial; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Evaluates `p(x)` with Clenshaw's recurrence. Defined for any real `x`.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.coeffs.len();
        if n == 0 {
            return 0.0;
        }
        // b_k = c_k + alpha_k(x) b_{k+1} + beta_{k+1} b_{k+2}
        // with alpha_k = (2k+1)x/(k+1), beta_k = -k/(k+1)
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for k in (1..n).rev() {
            let kf = k as f64;
            let alpha = (2.0 * kf + 1.0) * x / (kf + 1.0);
            let beta = -(kf + 1.0) / (kf + 2.0);
            let b0 = self.coeffs[k] + alpha * b1 + beta * b2;
            b2 = b1;
            b1 = b0;
        }
        self.coeffs[0] + x * b1 - 0.5 * b2
    }

    /// `p(1) = Σ c_n`.
    pub fn at_upper(&self) -> f64 {
        self.coeffs.iter().sum()
    }

    /// `p(-1) = Σ (-1)^n c_n`.
    pub fn at_lower(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(n, c)| if n % 2 == 0 { *c } else { -*c })
            .sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..n).map(|i| self.coeff(i) + other.coeff(i)).collect())
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..n).map(|i| self.coeff(i) + s * other.coeff(i)).collect())
    }

    /// Exact product, projected back onto the Legendre basis by quadrature.
    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let deg = self.degree() + other.degree();
        project_fn(deg, |x| self.eval(x) * other.eval(x))
    }

    /// Derivative, using `(2n+1) L_n = (L_{n+1} - L_{n-1})'`.
    pub fn derivative(&self) -> Self {
        Self::new(derivative_coeffs(&self.coeffs))
    }

    /// `∫_{-1}^{1} p dx = 2 c_0`.
    pub fn integral(&self) -> f64 {
        2.0 * self.coeff(0)
    }

    /// Conversion to ascending monomial coefficients.
    pub fn to_monomial(&self) -> Vec<f64> {
        let n = self.coeffs.len();
        let mut out = vec![0.0; n];
        // monomial coefficients of L_{j-1}, L_j
        let mut prev: Vec<f64> = Vec::new();
        let mut cur: Vec<f64> = vec![1.0];
        for (j, c) in self.coeffs.iter().enumerate() {
            for (i, m) in cur.iter().enumerate() {
                out[i] += c * m;
            }
            // L_{j+1} = ((2j+1) x L_j - j L_{j-1}) / (j+1)
            let jf = j as f64;
            let mut next = vec![0.0; j + 2];
            for (i, m) in cur.iter().enumerate() {
                next[i + 1] += (2.0 * jf + 1.0) * m / (jf + 1.0);
            }
            for (i, m) in prev.iter().enumerate() {
                next[i] -= jf * m / (jf + 1.0);
            }
            prev = cur;
            cur = next;
        }
        while out.last().is_some_and(|c| c.abs() <= DEGREE_TOL) {
            out.pop();
        }
        out
    }

    /// Exact change of basis from ascending monomial coefficients.
    pub fn from_monomial(mono: &[f64]) -> Self {
        project(mono)
    }

    /// Composition `p(s x + t)`, used for affine changes of variable.
    pub fn compose_affine(&self, s: f64, t: f64) -> Self {
        let mono = self.to_monomial();
        let mut out = vec![0.0; mono.len()];
        // (s x + t)^j by repeated multiplication
        let mut pow = vec![1.0];
        for c in &mono {
            for (i, m) in pow.iter().enumerate() {
                out[i] += c * m;
            }
            let mut next = vec![0.0; pow.len() + 1];
            for (i, m) in pow.iter().enumerate() {
                next[i] += t * m;
                next[i + 1] += s * m;
            }
            pow = next;
        }
        Self::from_monomial(&out)
    }
}

/// Legendre coefficients of the derivative of `Σ c_n L_n`.
pub fn derivative_coeffs(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    if n <= 1 {
        return Vec::new();
    }
    let mut d = vec![0.0; n - 1];
    // d_m = (2m+1) Σ_{j > m, j - m odd} c_j, accumulated from the top.
    let mut odd_sum = 0.0; // sums over j with parity opposite to m, j > m
    let mut even_sum = 0.0;
    for m in (0..n - 1).rev() {
        // c_{m+1} joins the sum whose parity differs from m
        if (m + 1) % 2 == 0 {
            even_sum += c[m + 1];
        } else {
            odd_sum += c[m + 1];
        }
        let s = if m % 2 == 0 { odd_sum } else { even_sum };
        d[m] = (2.0 * m as f64 + 1.0) * s;
    }
    d
}

/// `L_n(x)` by the three-term recurrence.
///
/// Returns a domain error for `|x| > 1`.
pub fn eval(n: usize, x: f64) -> Result<f64> {
    if !(x.abs() <= 1.0) {
        return Err(Error::Domain(format!("Legendre evaluation at x = {x} outside [-1, 1]")));
    }
    Ok(eval_unchecked(n, x))
}

pub(crate) fn eval_unchecked(n: usize, x: f64) -> f64 {
    match n {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            p1
        }
    }
}

/// Values `L_0(x), …, L_nmax(x)`.
pub fn values(nmax: usize, x: f64) -> Vec<f64> {
    let mut v = Vec::with_capacity(nmax + 1);
    v.push(1.0);
    if nmax >= 1 {
        v.push(x);
    }
    for k in 2..=nmax {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0) * x * v[k - 1] - (kf - 1.0) * v[k - 2]) / kf;
        v.push(next);
    }
    v
}

/// `∫_{-1}^{1} L_m L_n dx = 2 δ_mn / (2n + 1)`.
pub fn pair_integral(m: usize, n: usize) -> f64 {
    if m == n {
        2.0 / (2.0 * n as f64 + 1.0)
    } else {
        0.0
    }
}

/// Gauss–Legendre nodes and weights with `n` points, exact to degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    if n == 0 {
        return (nodes, weights);
    }
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, refined by Newton on L_n.
        let theta = std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5);
        let mut x = (1.0 - (nf - 1.0) / (8.0 * nf * nf * nf)) * theta.cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = value_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = value_and_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = x;
        weights[i] = w;
        nodes[n - 1 - i] = -x;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

fn value_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    // (1 - x^2) L_n' = n (L_{n-1} - x L_n)
    let d = nf * (p0 - x * p1) / (1.0 - x * x);
    (p1, d)
}

/// Number of Gauss nodes that integrates a polynomial of degree `deg` exactly.
pub fn nodes_for_degree(deg: usize) -> usize {
    (deg + 2).div_ceil(2)
}

/// Projects `f` onto `L_0..L_deg`, assuming `f` is a polynomial of degree ≤ `deg`.
pub fn project_fn(deg: usize, f: impl Fn(f64) -> f64) -> LegendrePoly {
    let (x, w) = gauss_legendre(nodes_for_degree(2 * deg));
    let fx: Vec<f64> = x.iter().map(|&xi| f(xi)).collect();
    let mut coeffs = vec![0.0; deg + 1];
    for (i, &xi) in x.iter().enumerate() {
        let l = values(deg, xi);
        for n in 0..=deg {
            coeffs[n] += w[i] * fx[i] * l[n];
        }
    }
    for (n, c) in coeffs.iter_mut().enumerate() {
        *c *= (2.0 * n as f64 + 1.0) / 2.0;
    }
    LegendrePoly::new(coeffs)
}

/// Exact conversion of ascending monomial coefficients to the Legendre basis.
pub fn project(mono: &[f64]) -> LegendrePoly {
    // x^j in the Legendre basis, built with x L_n = ((n+1) L_{n+1} + n L_{n-1}) / (2n+1)
    let mut out = vec![0.0; mono.len()];
    let mut pow = vec![1.0];
    for (j, c) in mono.iter().enumerate() {
        for (n, p) in pow.iter().enumerate() {
            out[n] += c * p;
        }
        if j + 1 == mono.len() {
            break;
        }
        let mut next = vec![0.0; pow.len() + 1];
        for (n, p) in pow.iter().enumerate() {
            let nf = n as f64;
            next[n + 1] += p * (nf + 1.0) / (2.0 * nf + 1.0);
            if n > 0 {
                next[n - 1] += p * nf / (2.0 * nf + 1.0);
            }
        }
        pow = next;
    }
    LegendrePoly::new(out)
}

/// Matrix of `∫ f L_m L_n dx` for `m ∈ rows`, `n ∈ cols`.
///
/// Entries with `|m - n| > deg f` are exact zeros.
pub fn triple_product_matrix(
    f: &LegendrePoly,
    rows: RangeInclusive<usize>,
    cols: RangeInclusive<usize>,
) -> DMatrix<f64> {
    let (r0, r1) = (*rows.start(), *rows.end());
    let (c0, c1) = (*cols.start(), *cols.end());
    let nr = (r1 + 1).saturating_sub(r0);
    let nc = (c1 + 1).saturating_sub(c0);
    let mut out = DMatrix::zeros(nr, nc);
    if nr == 0 || nc == 0 || f.is_zero() {
        return out;
    }
    let df = f.degree();
    let top = r1.max(c1);
    let (x, w) = gauss_legendre(nodes_for_degree(r1 + c1 + df));
    for (xi, wi) in x.iter().zip(&w) {
        let l = values(top, *xi);
        let fw = f.eval(*xi) * wi;
        for i in 0..nr {
            let m = r0 + i;
            let fl = fw * l[m];
            for j in 0..nc {
                let n = c0 + j;
                if m.abs_diff(n) <= df {
                    out[(i, j)] += fl * l[n];
                }
            }
        }
    }
    out
}

/// Legendre coefficients of `∫ f L_n dx` weights: `∫ f L_n = 2 f̂_n / (2n+1)`.
pub fn moment(f: &LegendrePoly, n: usize) -> f64 {
    f.coeff(n) * pair_integral(n, n)
}

/// Matrix mapping Legendre coefficients `c_0..c_n` of `p` to those of `p^(order)`.
pub fn derivative_matrix(n: usize, order: usize) -> DMatrix<f64> {
    let mut d = DMatrix::identity(n + 1, n + 1);
    for _ in 0..order {
        let mut next = DMatrix::zeros(n + 1, n + 1);
        for col in 0..=n {
            let c: Vec<f64> = d.column(col).iter().copied().collect();
            let dc = derivative_coeffs(&c);
            for (row, v) in dc.iter().enumerate() {
                next[(row, col)] = *v;
            }
        }
        d = next;
    }
    d
}
