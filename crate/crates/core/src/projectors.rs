//! Construction and verification of the projector set `P_0 ... P_d` and the
//! reconstruction matrices `M_0 ... M_d`.
//!
//! A valid set satisfies
//!
//! * `P_i A_j = 0` for `i != j`, `i, j >= 1` (cross condition),
//! * `P_0 A_j = 0` for `j >= 1` (zero-block condition),
//! * `sum_i M_i P_i = I` (partition condition),
//!
//! and under these conditions the quadratic reformulation is exact.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorization::StackedU;
use crate::linalg;
use crate::model::{FactoredTerm, PhysicsProblem};

/// A projector set is verified when every residual is at most this value.
pub const VERIFY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectorMethod {
    /// Basis completion `[U_0 U]` followed by an explicit inverse.
    InverseCompletion,
    /// `P_i = Q_i^T`, `M_i = Q_i` from the orthogonal factor of `U`.
    QrShortcut,
    /// Closed form for disjoint coordinate selectors.
    MultiScenario,
    /// Closed form for rank-one terms.
    RankOne,
    /// Blocks supplied by the caller.
    Supplied,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionResiduals {
    /// `max_{i != j} ||P_i A_j|| / ||A_j||`
    pub cross: f64,
    /// `max_j ||P_0 A_j|| / ||A_j||`
    pub zero_block: f64,
    /// `||sum_i M_i P_i - I||`
    pub partition: f64,
}

impl ConditionResiduals {
    pub fn max(&self) -> f64 {
        self.cross.max(self.zero_block).max(self.partition)
    }

    pub fn is_verified(&self) -> bool {
        self.within(VERIFY_TOL)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.cross <= tol && self.zero_block <= tol && self.partition <= tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorSet {
    /// `P_0, P_1, ..., P_d`; `P_0` may have zero rows.
    pub p_blocks: Vec<DMatrix<f64>>,
    /// `M_0, M_1, ..., M_d`
    pub m_blocks: Vec<DMatrix<f64>>,
    pub method: ProjectorMethod,
    pub residuals: ConditionResiduals,
}

impl ProjectorSet {
    /// Wraps caller-provided blocks and computes their residuals.
    pub fn from_blocks(
        p_blocks: Vec<DMatrix<f64>>,
        m_blocks: Vec<DMatrix<f64>>,
        method: ProjectorMethod,
        terms: &[FactoredTerm],
    ) -> Result<Self> {
        if p_blocks.len() != terms.len() + 1 || m_blocks.len() != p_blocks.len() {
            return Err(Error::DimensionMismatch {
                what: "projector block count".into(),
                expected: terms.len() + 1,
                found: p_blocks.len().min(m_blocks.len()),
            });
        }
        let m = terms.first().map(|t| t.u.nrows()).unwrap_or(p_blocks[0].ncols());
        for (i, (p, mm)) in p_blocks.iter().zip(&m_blocks).enumerate() {
            crate::error::check_len(&format!("P_{i} columns"), m, p.ncols())?;
            crate::error::check_len(&format!("M_{i} rows"), m, mm.nrows())?;
            crate::error::check_len(&format!("M_{i} columns"), p.nrows(), mm.ncols())?;
        }
        let residuals = residuals_for(&p_blocks, &m_blocks, terms);
        Ok(Self { p_blocks, m_blocks, method, residuals })
    }

    /// Number of rows of `P_0`.
    pub fn m0(&self) -> usize {
        self.p_blocks[0].nrows()
    }

    pub fn d(&self) -> usize {
        self.p_blocks.len() - 1
    }

    pub fn p(&self, i: usize) -> &DMatrix<f64> {
        &self.p_blocks[i]
    }

    pub fn is_verified(&self) -> bool {
        self.residuals.is_verified()
    }
}

fn require_full_rank(stacked: &StackedU) -> Result<()> {
    if !stacked.full_column_rank {
        return Err(Error::NotFullColumnRank { rank: stacked.rank, cols: stacked.total_width() });
    }
    Ok(())
}

/// `[P_0; P_1; ...; P_d] = [U_0 U]^{-1}` with `M_i = U_i`, where `U_0` is an
/// orthonormal basis of the complement of `range(U)`.
pub fn construct_inverse(stacked: &StackedU, terms: &[FactoredTerm]) -> Result<ProjectorSet> {
    require_full_rank(stacked)?;
    let m = stacked.u.nrows();
    let k = stacked.total_width();
    let q = linalg::full_orthogonal_basis(&stacked.u);
    let u0 = q.columns(k, m - k).into_owned();
    let u_tilde = linalg::hstack(&[&u0, &stacked.u], m);
    let inv = u_tilde.clone().try_inverse().ok_or(Error::NotFullColumnRank { rank: stacked.rank, cols: k })?;

    let mut p_blocks = vec![inv.rows(0, m - k).into_owned()];
    let mut m_blocks = vec![u0];
    for (i, r) in stacked.block_offsets.iter().enumerate() {
        p_blocks.push(inv.rows(m - k + r.start, r.len()).into_owned());
        m_blocks.push(stacked.block(i));
    }
    ProjectorSet::from_blocks(p_blocks, m_blocks, ProjectorMethod::InverseCompletion, terms)
}

/// `P_i = Q_i^T`, `M_i = Q_i` from a full orthogonal factor `Q = [Q_U Q_0]`
/// of `U`. The partition condition always holds; the cross condition holds
/// only when the `U` blocks are mutually orthogonal, so check `residuals`.
pub fn construct_qr(stacked: &StackedU, terms: &[FactoredTerm]) -> Result<ProjectorSet> {
    require_full_rank(stacked)?;
    let m = stacked.u.nrows();
    let k = stacked.total_width();
    let q = linalg::full_orthogonal_basis(&stacked.u);
    let q0 = q.columns(k, m - k).into_owned();
    let mut p_blocks = vec![q0.transpose()];
    let mut m_blocks = vec![q0];
    for r in &stacked.block_offsets {
        let qi = q.columns(r.start, r.len()).into_owned();
        p_blocks.push(qi.transpose());
        m_blocks.push(qi);
    }
    ProjectorSet::from_blocks(p_blocks, m_blocks, ProjectorMethod::QrShortcut, terms)
}

/// Closed form for terms whose `U_i` columns are distinct coordinate vectors
/// (entries `0` and `+-1`, no coordinate shared between or within terms):
/// `P_i = U_i^T`, `P_0` selects every unused coordinate, `M_i = P_i^T`.
pub fn multi_scenario(terms: &[FactoredTerm]) -> Result<ProjectorSet> {
    let m = terms.first().map(|t| t.u.nrows()).ok_or_else(|| Error::NotMultiScenario("no terms".into()))?;
    let mut used = vec![false; m];
    for (i, t) in terms.iter().enumerate() {
        for c in 0..t.u.ncols() {
            let col = t.u.column(c);
            let nz: Vec<usize> = (0..m).filter(|&r| col[r] != 0.0).collect();
            if nz.len() != 1 || col[nz[0]].abs() != 1.0 {
                return Err(Error::NotMultiScenario(format!("term {} column {} is not a coordinate vector", i + 1, c)));
            }
            if std::mem::replace(&mut used[nz[0]], true) {
                return Err(Error::NotMultiScenario(format!(
                    "coordinate {} is selected more than once (term {})",
                    nz[0],
                    i + 1
                )));
            }
        }
    }
    let unused: Vec<usize> = (0..m).filter(|&r| !used[r]).collect();
    let mut p0 = DMatrix::zeros(unused.len(), m);
    for (row, &r) in unused.iter().enumerate() {
        p0[(row, r)] = 1.0;
    }
    let mut p_blocks = vec![p0];
    p_blocks.extend(terms.iter().map(|t| t.u.transpose()));
    let m_blocks = p_blocks.iter().map(|p| p.transpose()).collect();
    ProjectorSet::from_blocks(p_blocks, m_blocks, ProjectorMethod::MultiScenario, terms)
}

/// Closed form for rank-one terms `A_i = u_i v_i^T`: `p_i^T` are the rows of
/// the left inverse `(U^T U)^{-1} U^T`, `P_0` has orthonormal rows spanning the
/// complement of `range(U)`, `M_0 = P_0^T` and `M_i = u_i`.
pub fn rank_one(stacked: &StackedU, terms: &[FactoredTerm]) -> Result<ProjectorSet> {
    if let Some((i, t)) = terms.iter().enumerate().find(|(_, t)| t.width() != 1) {
        return Err(Error::NotRankOne(i + 1, t.width()));
    }
    require_full_rank(stacked)?;
    let u = &stacked.u;
    let (m, k) = (u.nrows(), u.ncols());
    let gram_inv = (u.transpose() * u).try_inverse().ok_or(Error::NotFullColumnRank { rank: stacked.rank, cols: k })?;
    let left_inv = gram_inv * u.transpose();
    let q = linalg::full_orthogonal_basis(u);
    let p0 = q.columns(k, m - k).transpose();
    let mut m_blocks = vec![p0.transpose()];
    let mut p_blocks = vec![p0];
    for i in 0..k {
        p_blocks.push(left_inv.rows(i, 1).into_owned());
        m_blocks.push(u.columns(i, 1).into_owned());
    }
    ProjectorSet::from_blocks(p_blocks, m_blocks, ProjectorMethod::RankOne, terms)
}

/// Recomputes the three condition residuals for `ps` against `problem`.
pub fn verify_conditions(ps: &ProjectorSet, problem: &PhysicsProblem) -> ConditionResiduals {
    residuals_for(&ps.p_blocks, &ps.m_blocks, &problem.terms)
}

fn residuals_for(p: &[DMatrix<f64>], m_blocks: &[DMatrix<f64>], terms: &[FactoredTerm]) -> ConditionResiduals {
    let dense: Vec<DMatrix<f64>> = terms.iter().map(FactoredTerm::dense).collect();
    let norms: Vec<f64> = dense.iter().map(linalg::spectral_norm).collect();
    let scaled = |pi: &DMatrix<f64>, j: usize| {
        let r = linalg::spectral_norm(&(pi * &dense[j]));
        if norms[j] > 0.0 {
            r / norms[j]
        } else {
            r
        }
    };
    let mut cross: f64 = 0.0;
    let mut zero_block: f64 = 0.0;
    for j in 0..terms.len() {
        zero_block = zero_block.max(scaled(&p[0], j));
        for (i, pi) in p.iter().enumerate().skip(1) {
            if i != j + 1 {
                cross = cross.max(scaled(pi, j));
            }
        }
    }
    let m = p[0].ncols();
    let mut sum = -DMatrix::<f64>::identity(m, m);
    for (mi, pi) in m_blocks.iter().zip(p) {
        sum += mi * pi;
    }
    ConditionResiduals { cross, zero_block, partition: linalg::spectral_norm(&sum) }
}
