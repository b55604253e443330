//! Small dense linear-algebra helpers shared by the relaxation builders.

use nalgebra::DMatrix;

/// Relative threshold on singular values below which a direction counts as null.
pub const RANK_TOL: f64 = 1e-10;

/// Orthonormal basis of the null space of `a`, as columns.
///
/// Singular values at or below `RANK_TOL * σ_max` are treated as zero.
pub fn null_space(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    if a.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    let m = a.nrows().max(n);
    let mut padded = DMatrix::zeros(m, n);
    padded.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.max();
    let cut = RANK_TOL * smax;
    let null_rows: Vec<usize> = (0..n)
        .filter(|&i| smax == 0.0 || svd.singular_values[i] <= cut)
        .collect();
    let mut out = DMatrix::zeros(n, null_rows.len());
    for (j, &i) in null_rows.iter().enumerate() {
        for r in 0..n {
            out[(r, j)] = v_t[(i, r)];
        }
    }
    out
}

/// Orthonormal basis of the row space of `a`, as columns; the orthogonal
/// complement of [`null_space`].
pub fn row_space(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols();
    if a.nrows() == 0 || n == 0 {
        return DMatrix::zeros(n, 0);
    }
    let m = a.nrows().max(n);
    let mut padded = DMatrix::zeros(m, n);
    padded.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.max();
    let rows: Vec<usize> = (0..n).filter(|&i| smax > 0.0 && svd.singular_values[i] > RANK_TOL * smax).collect();
    DMatrix::from_fn(n, rows.len(), |r, j| v_t[(rows[j], r)])
}

/// Numerical rank with the shared relative tolerance.
pub fn rank(a: &DMatrix<f64>) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = a.clone().singular_values();
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOL * smax).count()
}

/// Keeps a maximal linearly independent subset of rows, in their original order.
pub fn independent_rows(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut kept: Vec<usize> = Vec::new();
    for i in 0..a.nrows() {
        if a.row(i).iter().all(|v| *v == 0.0) {
            continue;
        }
        let mut rows = kept.clone();
        rows.push(i);
        let sub = a.select_rows(&rows);
        if rank(&sub) == rows.len() {
            kept.push(i);
        }
    }
    a.select_rows(&kept)
}

/// Smallest eigenvalue of a symmetric matrix (`+∞` for an empty matrix).
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return f64::INFINITY;
    }
    let sym = (a + a.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

/// Largest absolute entry.
pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}
