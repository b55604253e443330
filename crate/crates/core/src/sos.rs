//! Matrix polynomial nonnegativity on `[-1, 1]` through Gram matrices and the
//! S-procedure. Polynomials are kept in the Legendre basis throughout.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::legendre::{self, LegendrePoly};
use crate::model::AffinePolyMatrix;
use crate::sdp::{AffineMatrix, ConicProgram, LinExpr};

/// Symmetric `q×q` matrix of polynomials in `x` whose Legendre coefficients are
/// affine expressions in program variables. Represents `z^T P(x) z`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMatrix {
    pub dim: usize,
    entries: Vec<Vec<LinExpr>>,
}

impl PolyMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, entries: vec![Vec::new(); dim * dim] }
    }

    /// Copies an integrand block; parameter `i` maps to program variable `i`.
    pub fn from_affine(m: &AffinePolyMatrix) -> Self {
        assert_eq!(m.rows, m.cols);
        let mut out = Self::zeros(m.rows);
        for i in 0..m.rows {
            for j in 0..m.cols {
                out.entries[i * m.rows + j] = m.get(i, j).coeffs();
            }
        }
        out
    }

    pub fn get(&self, i: usize, j: usize) -> &[LinExpr] {
        &self.entries[i * self.dim + j]
    }

    pub fn coeff(&self, i: usize, j: usize, n: usize) -> LinExpr {
        self.get(i, j).get(n).cloned().unwrap_or_default()
    }

    /// Adds `s·e` to coefficient `n` of entries `(i, j)` and `(j, i)`.
    pub fn add_coeff(&mut self, i: usize, j: usize, n: usize, e: &LinExpr, s: f64) {
        let dim = self.dim;
        for idx in if i == j { vec![i * dim + j] } else { vec![i * dim + j, j * dim + i] } {
            let v = &mut self.entries[idx];
            if v.len() <= n {
                v.resize(n + 1, LinExpr::default());
            }
            v[n].add_scaled(e, s);
        }
    }

    /// Degree in `x`, ignoring coefficients that are identically zero.
    pub fn degree(&self) -> usize {
        self.entries
            .iter()
            .filter_map(|v| v.iter().rposition(|e| !e.is_zero()))
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, x: f64, vars: &[f64]) -> DMatrix<f64> {
        let deg = self.entries.iter().map(|v| v.len()).max().unwrap_or(0);
        let l = legendre::values(deg, x);
        DMatrix::from_fn(self.dim, self.dim, |i, j| {
            self.get(i, j).iter().zip(&l).map(|(e, li)| e.eval(vars) * li).sum()
        })
    }
}

/// One sum-of-squares certificate: Gram block over `basis` plus the
/// equalities matching `basis^T G basis` to the polynomial coefficient-wise.
#[derive(Debug, Clone)]
pub struct SosConstraint {
    /// `(z index, Legendre degree)` for each basis entry `L_j(x) z_i`.
    pub basis: Vec<(usize, usize)>,
    pub gram: AffineMatrix,
    pub equalities: Vec<LinExpr>,
}

impl SosConstraint {
    pub fn emit(self, prog: &mut ConicProgram) {
        prog.add_psd(self.gram);
        for e in self.equalities {
            prog.add_eq(e);
        }
    }
}

/// Linearization coefficients: `L_j L_j' = Σ_n c[n][(j, j')] L_n` for `j, j' ≤ h`.
fn linearization(h: usize) -> Vec<DMatrix<f64>> {
    (0..=2 * h)
        .map(|n| {
            let w = (2 * n + 1) as f64 / 2.0;
            legendre::triple_product_matrix(&LegendrePoly::basis(n), 0..=h, 0..=h) * w
        })
        .collect()
}

/// Introduces a Gram matrix for `z^T P(x) z` with basis `{L_j(x) z_i : j ≤ max_x_degree/2}`.
pub fn gram_parameterize(
    prog: &mut ConicProgram,
    poly: &PolyMatrix,
    max_x_degree: usize,
) -> Result<SosConstraint> {
    if max_x_degree % 2 == 1 {
        return Err(Error::Degree(format!("Gram degree bound {max_x_degree} must be even")));
    }
    let deg = poly.degree();
    if deg > max_x_degree {
        return Err(Error::Degree(format!(
            "polynomial degree {deg} exceeds the Gram degree bound {max_x_degree}"
        )));
    }
    let q = poly.dim;
    let h = max_x_degree / 2;
    let nb = q * (h + 1);
    let idx = |i: usize, j: usize| i * (h + 1) + j;
    let basis = (0..q).flat_map(|i| (0..=h).map(move |j| (i, j))).collect();

    let mut gram = AffineMatrix::zeros(nb);
    let mut var = vec![vec![0; nb]; nb];
    for c in 0..nb {
        for r in 0..=c {
            let v = prog.add_var(format!("gram[{r},{c}]"));
            gram.add_sym(Some(v), r, c, 1.0);
            var[r][c] = v;
            var[c][r] = v;
        }
    }
    let lin = linearization(h);
    let mut equalities = Vec::new();
    for i in 0..q {
        for i2 in i..q {
            for (n, cn) in lin.iter().enumerate() {
                let mut e = poly.coeff(i, i2, n).scaled(-1.0);
                for j in 0..=h {
                    for j2 in 0..=h {
                        let c = cn[(j, j2)];
                        if c != 0.0 {
                            e.add_term(var[idx(i, j)][idx(i2, j2)], c);
                        }
                    }
                }
                equalities.push(e);
            }
        }
    }
    Ok(SosConstraint { basis, gram, equalities })
}

fn round_even(d: usize) -> usize {
    d + d % 2
}

/// S-procedure certificate of `z^T Smat(x) z ≥ 0` for `x ∈ [-1, 1]`:
/// `z^T [Smat − (1−x²)T(x)] z` and `z^T T(x) z` are both sums of squares,
/// with `T` a fresh symmetric polynomial matrix of degree `deg_t`.
pub fn s_procedure_interval(
    prog: &mut ConicProgram,
    smat: &PolyMatrix,
    deg_t: usize,
) -> Result<[SosConstraint; 2]> {
    let q = smat.dim;
    let one_minus_x2 = LegendrePoly::new(vec![2.0 / 3.0, 0.0, -2.0 / 3.0]);
    let mut t = PolyMatrix::zeros(q);
    let mut p1 = smat.clone();
    for i in 0..q {
        for j in i..q {
            for d in 0..=deg_t {
                let v = LinExpr::var(prog.add_var(format!("T[{i},{j}]_{d}")));
                t.add_coeff(i, j, d, &v, 1.0);
                let prod = LegendrePoly::basis(d).mul(&one_minus_x2);
                for (n, c) in prod.coeffs().iter().enumerate() {
                    if *c != 0.0 {
                        p1.add_coeff(i, j, n, &v, -c);
                    }
                }
            }
        }
    }
    let d1 = round_even(smat.degree().max(deg_t + 2));
    let c1 = gram_parameterize(prog, &p1, d1)?;
    let c2 = gram_parameterize(prog, &t, round_even(deg_t))?;
    Ok([c1, c2])
}
