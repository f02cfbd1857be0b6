//! Problem data model: the affine physics matrix `A(theta) = A0 + sum theta_i U_i V_i^T`,
//! the excitation `b` and the parameter domain.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};
use crate::linalg;

/// Relative rank cutoff used for term-rank and field-solve checks.
pub const RANK_TOL: f64 = 1e-10;
/// Relative residual tolerance for `A(theta) z = b`.
pub const SOLVE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    /// `-1 <= theta_i <= 1`
    Interval,
    /// `theta_i in {-1, +1}`
    Boolean,
}

/// One design term `A_i = U_i V_i^T` kept in factored form.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredTerm {
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

impl FactoredTerm {
    pub fn new(u: DMatrix<f64>, v: DMatrix<f64>) -> Self {
        Self { u, v }
    }

    /// Rank-one term `u v^T`.
    pub fn rank_one(u: DVector<f64>, v: DVector<f64>) -> Self {
        let (m, n) = (u.len(), v.len());
        Self { u: DMatrix::from_column_slice(m, 1, u.as_slice()), v: DMatrix::from_column_slice(n, 1, v.as_slice()) }
    }

    /// Number of columns `m_i` shared by `U_i` and `V_i`.
    pub fn width(&self) -> usize {
        self.u.ncols()
    }

    /// Materializes `U_i V_i^T`.
    pub fn dense(&self) -> DMatrix<f64> {
        &self.u * self.v.transpose()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicsProblem {
    pub a0: DMatrix<f64>,
    pub terms: Vec<FactoredTerm>,
    pub b: DVector<f64>,
    pub domain: Domain,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptyDimension(&'static str),
    NoTerms,
    ExcitationLength { expected: usize, found: usize },
    TermURows { term: usize, expected: usize, found: usize },
    TermVRows { term: usize, expected: usize, found: usize },
    TermWidthMismatch { term: usize, u_cols: usize, v_cols: usize },
    TermEmpty { term: usize },
    TermRankDeficient { term: usize, rank: usize, cols: usize },
    NonFinite(&'static str),
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::EmptyDimension(w) => write!(f, "dimension {w} must be at least 1"),
            Violation::NoTerms => write!(f, "problem has no design terms (d = 0)"),
            Violation::ExcitationLength { expected, found } => {
                write!(f, "b has length {found}, expected m = {expected}")
            }
            Violation::TermURows { term, expected, found } => {
                write!(f, "term {term}: U has {found} rows, expected m = {expected}")
            }
            Violation::TermVRows { term, expected, found } => {
                write!(f, "term {term}: V has {found} rows, expected n = {expected}")
            }
            Violation::TermWidthMismatch { term, u_cols, v_cols } => {
                write!(f, "term {term}: U has {u_cols} columns but V has {v_cols}")
            }
            Violation::TermEmpty { term } => write!(f, "term {term}: zero columns"),
            Violation::TermRankDeficient { term, rank, cols } => {
                write!(f, "term {term}: U has rank {rank} < {cols} columns")
            }
            Violation::NonFinite(w) => write!(f, "{w} contains non-finite entries"),
        }
    }
}

/// Result of a field solve `A(theta) z = b`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSolution {
    pub z: DVector<f64>,
    /// `||A(theta) z - b||_2`
    pub residual: f64,
    pub solvable: bool,
}

impl PhysicsProblem {
    pub fn new(a0: DMatrix<f64>, terms: Vec<FactoredTerm>, b: DVector<f64>, domain: Domain) -> Self {
        Self { a0, terms, b, domain }
    }

    pub fn m(&self) -> usize {
        self.a0.nrows()
    }

    pub fn n(&self) -> usize {
        self.a0.ncols()
    }

    pub fn d(&self) -> usize {
        self.terms.len()
    }

    /// Column counts `m_1, ..., m_d`.
    pub fn term_widths(&self) -> Vec<usize> {
        self.terms.iter().map(FactoredTerm::width).collect()
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate_problem(self)
    }

    pub fn assemble(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        assemble_physics(self, theta)
    }

    pub fn solve(&self, theta: &[f64]) -> Result<FieldSolution> {
        solve_field(self, theta)
    }
}

/// Checks dimension and rank invariants. Returns every violation found;
/// an empty list means the problem is well formed.
pub fn validate_problem(p: &PhysicsProblem) -> Vec<Violation> {
    let mut out = Vec::new();
    let (m, n) = (p.m(), p.n());
    if m == 0 {
        out.push(Violation::EmptyDimension("m"));
    }
    if n == 0 {
        out.push(Violation::EmptyDimension("n"));
    }
    if p.terms.is_empty() {
        out.push(Violation::NoTerms);
    }
    if p.b.len() != m {
        out.push(Violation::ExcitationLength { expected: m, found: p.b.len() });
    }
    if p.a0.iter().any(|x| !x.is_finite()) {
        out.push(Violation::NonFinite("A0"));
    }
    if p.b.iter().any(|x| !x.is_finite()) {
        out.push(Violation::NonFinite("b"));
    }
    for (i, t) in p.terms.iter().enumerate() {
        let term = i + 1;
        if t.u.nrows() != m {
            out.push(Violation::TermURows { term, expected: m, found: t.u.nrows() });
        }
        if t.v.nrows() != n {
            out.push(Violation::TermVRows { term, expected: n, found: t.v.nrows() });
        }
        if t.u.ncols() != t.v.ncols() {
            out.push(Violation::TermWidthMismatch { term, u_cols: t.u.ncols(), v_cols: t.v.ncols() });
        }
        if t.u.ncols() == 0 {
            out.push(Violation::TermEmpty { term });
            continue;
        }
        if t.u.iter().chain(t.v.iter()).any(|x| !x.is_finite()) {
            out.push(Violation::NonFinite("term factors"));
            continue;
        }
        let rank = linalg::numerical_rank(&t.u, RANK_TOL);
        if rank < t.u.ncols() {
            out.push(Violation::TermRankDeficient { term, rank, cols: t.u.ncols() });
        }
    }
    out
}

/// `A0 + sum_i theta_i U_i V_i^T`, summed left to right over `i`.
pub fn assemble_physics(p: &PhysicsProblem, theta: &[f64]) -> Result<DMatrix<f64>> {
    check_len("theta", p.d(), theta.len())?;
    let mut a = p.a0.clone();
    for (t, &th) in p.terms.iter().zip(theta) {
        a += t.dense() * th;
    }
    Ok(a)
}

/// Minimum-norm least-squares field for the given parameters. A rank-deficient
/// `A(theta)` or an inconsistent system is reported as `solvable = false`.
pub fn solve_field(p: &PhysicsProblem, theta: &[f64]) -> Result<FieldSolution> {
    solve_field_with(p, theta, SOLVE_TOL)
}

pub fn solve_field_with(p: &PhysicsProblem, theta: &[f64], tol: f64) -> Result<FieldSolution> {
    let a = assemble_physics(p, theta)?;
    let (z, rank) = linalg::min_norm_solve(&a, &p.b, RANK_TOL);
    let residual = (&a * &z - &p.b).norm();
    let solvable = rank == p.n() && residual <= tol * (1.0 + p.b.norm());
    Ok(FieldSolution { z, residual, solvable })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(i: usize, n: usize) -> DVector<f64> {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        v
    }

    fn toy(b: &[f64]) -> PhysicsProblem {
        PhysicsProblem::new(
            DMatrix::identity(2, 2),
            vec![FactoredTerm::rank_one(e(0, 2), e(0, 2))],
            DVector::from_row_slice(b),
            Domain::Interval,
        )
    }

    #[test]
    fn well_formed_instance_validates() {
        assert!(validate_problem(&toy(&[1.0, 0.0])).is_empty());
    }

    #[test]
    fn row_dimension_violation_reported() {
        let mut p = toy(&[1.0, 0.0]);
        p.terms[0].u = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let v = validate_problem(&p);
        assert!(v.contains(&Violation::TermURows { term: 1, expected: 2, found: 3 }), "{v:?}");
    }

    #[test]
    fn rank_deficient_factor_reported() {
        let mut p = toy(&[1.0, 0.0]);
        p.terms[0].u = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        p.terms[0].v = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let v = validate_problem(&p);
        assert!(v.iter().any(|x| matches!(x, Violation::TermRankDeficient { term: 1, rank: 1, cols: 2 })));
    }

    #[test]
    fn assemble_zero_theta_is_a0() {
        let p = toy(&[1.0, 0.0]);
        assert_eq!(assemble_physics(&p, &[0.0]).unwrap(), p.a0);
    }

    #[test]
    fn assemble_hand_expansion() {
        let p = toy(&[1.0, 0.0]);
        let a = assemble_physics(&p, &[1.0]).unwrap();
        assert_eq!(a, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]));
    }

    #[test]
    fn assemble_rejects_wrong_length() {
        assert!(assemble_physics(&toy(&[1.0, 0.0]), &[1.0, 2.0]).is_err());
    }

    #[test]
    fn diagonal_solve() {
        let p = toy(&[2.0, 0.0]);
        let s = solve_field(&p, &[1.0]).unwrap();
        assert!(s.solvable);
        assert!((s.z - DVector::from_vec(vec![1.0, 0.0])).norm() < 1e-15);
    }

    #[test]
    fn singular_inconsistent_solve_flagged() {
        let p = toy(&[2.0, 0.0]);
        let s = solve_field(&p, &[-1.0]).unwrap();
        assert!(!s.solvable);
        assert!(s.residual > 1.0);
    }
}
