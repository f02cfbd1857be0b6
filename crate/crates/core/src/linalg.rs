//! Dense linear-algebra helpers shared by the modules.
//!
//! Singular value decompositions go through faer: nalgebra's SVD can return
//! inaccurate factors for rank-deficient inputs.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Thin SVD `a = u diag(s) v^T` with `s` nonincreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

fn to_faer(a: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// `None` when the input has non-finite entries or the iteration fails.
pub fn svd(a: &DMatrix<f64>) -> Option<Svd> {
    let (m, n) = (a.nrows(), a.ncols());
    let k = m.min(n);
    if k == 0 {
        return Some(Svd { u: DMatrix::zeros(m, 0), s: DVector::zeros(0), v: DMatrix::zeros(n, 0) });
    }
    if a.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let f = to_faer(a).thin_svd().ok()?;
    let (u, s, v) = (f.U(), f.S().column_vector(), f.V());
    Some(Svd {
        u: DMatrix::from_fn(m, k, |i, j| u[(i, j)]),
        s: DVector::from_fn(k, |i, _| s[i]),
        v: DMatrix::from_fn(n, k, |i, j| v[(i, j)]),
    })
}

/// Singular values, nonincreasing; `None` as for [`svd`].
pub fn singular_values(a: &DMatrix<f64>) -> Option<Vec<f64>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Some(Vec::new());
    }
    if a.iter().any(|x| !x.is_finite()) {
        return None;
    }
    to_faer(a).singular_values().ok()
}

/// Largest singular value; zero for empty matrices and NaN for non-finite input.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    match singular_values(a) {
        Some(sv) => sv.first().copied().unwrap_or(0.0),
        None => f64::NAN,
    }
}

/// Number of singular values above `rel_tol` times the largest one.
pub fn numerical_rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = singular_values(a).unwrap_or_default();
    let smax = sv.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Minimum-norm least-squares solution of `a x = b`, dropping singular values
/// below `rel_tol * sigma_max`. Also returns the numerical rank; non-finite
/// input gives a NaN solution of rank zero.
pub fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> (DVector<f64>, usize) {
    let Some(f) = svd(a) else {
        return (DVector::from_element(a.ncols(), f64::NAN), 0);
    };
    let smax = f.s.iter().copied().fold(0.0, f64::max);
    let mut x = DVector::zeros(a.ncols());
    let mut rank = 0;
    for (k, &s) in f.s.iter().enumerate() {
        if smax > 0.0 && s > rel_tol * smax {
            rank += 1;
            let coef = f.u.column(k).dot(b) / s;
            x.axpy(coef, &f.v.column(k), 1.0);
        }
    }
    (x, rank)
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Eigenvalues of the symmetric part of `a`, ascending.
pub fn sym_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(symmetrize(a)).eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(a).first().copied().unwrap_or(f64::INFINITY)
}

pub fn max_eigenvalue(a: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(a).last().copied().unwrap_or(f64::NEG_INFINITY)
}

/// Projection onto the PSD cone: negative eigenvalues are clipped to zero.
pub fn project_psd(a: &DMatrix<f64>) -> DMatrix<f64> {
    if a.nrows() == 0 {
        return a.clone();
    }
    let eig = SymmetricEigen::new(symmetrize(a));
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    let v = &eig.eigenvectors;
    symmetrize(&(v * DMatrix::from_diagonal(&clipped) * v.transpose()))
}

/// Length of the svec of an `n x n` symmetric matrix.
pub fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Row-major upper triangle with off-diagonals scaled by sqrt(2), so that
/// `svec(a) . svec(b) == <a, b>`.
pub fn svec(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut out = Vec::with_capacity(svec_len(n));
    for i in 0..n {
        for j in i..n {
            if i == j {
                out.push(a[(i, i)]);
            } else {
                out.push(std::f64::consts::SQRT_2 * 0.5 * (a[(i, j)] + a[(j, i)]));
            }
        }
    }
    out
}

/// Inverse of [`svec`].
pub fn smat(v: &[f64], n: usize) -> DMatrix<f64> {
    assert_eq!(v.len(), svec_len(n), "svec length");
    let mut a = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            if i == j {
                a[(i, i)] = v[k];
            } else {
                let x = v[k] / std::f64::consts::SQRT_2;
                a[(i, j)] = x;
                a[(j, i)] = x;
            }
            k += 1;
        }
    }
    a
}

/// The symmetric basis matrix whose svec is the `k`-th unit vector.
pub fn svec_basis(k: usize, n: usize) -> DMatrix<f64> {
    let mut e = vec![0.0; svec_len(n)];
    e[k] = 1.0;
    smat(&e, n)
}

/// Square orthogonal matrix whose first `rank(u)` columns span the column
/// space of `u` (in Householder order) and whose remaining columns span its
/// orthogonal complement. Computed from the QR factorization of `[u | I]`.
pub fn full_orthogonal_basis(u: &DMatrix<f64>) -> DMatrix<f64> {
    let m = u.nrows();
    let mut aug = DMatrix::zeros(m, u.ncols() + m);
    aug.view_mut((0, 0), (m, u.ncols())).copy_from(u);
    aug.view_mut((0, u.ncols()), (m, m)).fill_with_identity();
    aug.qr().q()
}

pub fn hstack(blocks: &[&DMatrix<f64>], nrows: usize) -> DMatrix<f64> {
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(nrows, cols);
    let mut off = 0;
    for b in blocks {
        out.view_mut((0, off), (nrows, b.ncols())).copy_from(*b);
        off += b.ncols();
    }
    out
}

pub fn vstack(blocks: &[&DMatrix<f64>], ncols: usize) -> DMatrix<f64> {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, ncols);
    let mut off = 0;
    for b in blocks {
        out.view_mut((off, 0), (b.nrows(), ncols)).copy_from(*b);
        off += b.nrows();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svec_preserves_inner_product() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0]);
        let b = DMatrix::from_row_slice(3, 3, &[0.5, -1.0, 0.0, -1.0, 2.0, 1.5, 0.0, 1.5, -3.0]);
        let lhs: f64 = svec(&a).iter().zip(svec(&b)).map(|(x, y)| x * y).sum();
        assert!((lhs - a.dot(&b)).abs() < 1e-12);
        assert_eq!(smat(&svec(&a), 3), a);
    }

    #[test]
    fn orthogonal_basis_spans_input_first() {
        let u = DMatrix::from_column_slice(3, 1, &[1.0, 1.0, 0.0]);
        let q = full_orthogonal_basis(&u);
        assert_eq!(q.shape(), (3, 3));
        assert!((q.transpose() * &q - DMatrix::identity(3, 3)).norm() < 1e-12);
        // complement columns are orthogonal to u
        assert!((q.columns(1, 2).transpose() * &u).norm() < 1e-12);
    }

    #[test]
    fn min_norm_solve_drops_null_directions() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, 3.0]);
        let (x, rank) = min_norm_solve(&a, &b, 1e-10);
        assert_eq!(rank, 1);
        assert_eq!(x, DVector::from_vec(vec![0.0, 3.0]));
    }
}
