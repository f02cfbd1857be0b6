//! Factoring dense design terms as `A_i = U_i V_i^T` and stacking the
//! `U` blocks for the full-column-rank test.

use std::ops::Range;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::FactoredTerm;

/// Relative singular-value cutoff used for the stacked rank test.
pub const STACK_RANK_TOL: f64 = 1e-10;

/// Horizontal concatenation `U = [U_1 ... U_d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedU {
    pub u: DMatrix<f64>,
    pub block_offsets: Vec<Range<usize>>,
    pub rank: usize,
    pub full_column_rank: bool,
}

impl StackedU {
    pub fn total_width(&self) -> usize {
        self.u.ncols()
    }

    pub fn block(&self, i: usize) -> DMatrix<f64> {
        let r = &self.block_offsets[i];
        self.u.columns(r.start, r.len()).into_owned()
    }
}

/// Reduced-SVD factorization of a dense term. The width is the numerical rank
/// at `tol * sigma_max`; `U_i` gets the orthonormal left singular vectors and
/// `V_i` absorbs the singular values.
pub fn factor_term(a: &DMatrix<f64>, tol: f64) -> Result<FactoredTerm> {
    if a.nrows() == 0 || a.ncols() == 0 || a.iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroTerm);
    }
    let f = linalg::svd(a).ok_or_else(|| Error::InvalidArgument("term has non-finite entries".into()))?;
    let smax = f.s.iter().copied().fold(0.0, f64::max);
    let k = f.s.iter().filter(|&&s| s > tol * smax).count();
    let u = f.u.columns(0, k).into_owned();
    let v = f.v.columns(0, k) * DMatrix::from_diagonal(&f.s.rows(0, k));
    Ok(FactoredTerm::new(u, v))
}

pub fn stack_terms(terms: &[FactoredTerm]) -> Result<StackedU> {
    stack_terms_with(terms, STACK_RANK_TOL)
}

pub fn stack_terms_with(terms: &[FactoredTerm], rel_tol: f64) -> Result<StackedU> {
    let m = terms.first().map(|t| t.u.nrows()).unwrap_or(0);
    for t in terms {
        crate::error::check_len("U rows", m, t.u.nrows())?;
    }
    let blocks: Vec<&DMatrix<f64>> = terms.iter().map(|t| &t.u).collect();
    let u = linalg::hstack(&blocks, m);
    let mut block_offsets = Vec::with_capacity(terms.len());
    let mut off = 0;
    for t in terms {
        block_offsets.push(off..off + t.width());
        off += t.width();
    }
    let rank = linalg::numerical_rank(&u, rel_tol);
    let full_column_rank = u.ncols() <= m && rank == u.ncols();
    Ok(StackedU { u, block_offsets, rank, full_column_rank })
}
