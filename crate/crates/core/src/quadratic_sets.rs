//! The collinearity characterization and membership tests for the quadratic
//! constraint sets that replace the physics equation.
//!
//! For each term `i`, with `x_i = P_i (b - A_0 z)` and `y_i = P_i A_i z`, the
//! field `z` is consistent with some `theta_i in [-1, 1]` iff
//! `x_i^T N x_i <= y_i^T N y_i` for every PSD `N`, and with `theta_i in {-1, 1}`
//! iff equality holds for every PSD `N`. The worst case over unit-norm `N` is
//! an extreme eigenvalue of `x_i x_i^T - y_i y_i^T`, which is what we report.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Result};
use crate::model::{assemble_physics, Domain, PhysicsProblem};
use crate::projectors::ProjectorSet;

/// Relative tolerance for deciding `x = alpha y`.
pub const COLLINEAR_TOL: f64 = 1e-10;
/// Scale-free tolerance factor for a zero set violation.
pub const VIOLATION_TOL: f64 = 1e-9;
/// Relative threshold below which `||P_i A_i z||` leaves `theta_i` undetermined.
pub const DEGENERATE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CollinearityCertificate {
    pub collinear: bool,
    /// Scale factor with `x = alpha y`, present iff `collinear`.
    pub alpha: Option<f64>,
    /// PSD matrix `N` with `x^T N x > y^T N y`, present iff the pair is not
    /// admissible.
    pub witness: Option<DMatrix<f64>>,
}

impl CollinearityCertificate {
    /// `x = alpha y` with `|alpha| <= 1`.
    pub fn admissible(&self) -> bool {
        self.witness.is_none()
    }

    /// `x^T N x - y^T N y` for the witness, if any.
    pub fn margin(&self, x: &DVector<f64>, y: &DVector<f64>) -> Option<f64> {
        self.witness.as_ref().map(|n| (x.transpose() * n * x)[(0, 0)] - (y.transpose() * n * y)[(0, 0)])
    }
}

/// Decides whether `x = alpha y` with `-1 <= alpha <= 1`. A rejected pair
/// carries a witness: the rank-one `v v^T / ||v||^2` with
/// `v = (y^T y) x - (x^T y) y` when the vectors are not collinear, or the
/// identity when they are collinear with `|alpha| > 1`.
pub fn collinearity_check(x: &DVector<f64>, y: &DVector<f64>) -> Result<CollinearityCertificate> {
    check_len("x", y.len(), x.len())?;
    let n = x.len();
    let (xx, yy, xy) = (x.dot(x), y.dot(y), x.dot(y));
    if yy == 0.0 {
        if xx == 0.0 {
            return Ok(CollinearityCertificate { collinear: true, alpha: Some(0.0), witness: None });
        }
        return Ok(CollinearityCertificate { collinear: false, alpha: None, witness: Some(DMatrix::identity(n, n)) });
    }
    let alpha = xy / yy;
    let off = (x - y * alpha).norm();
    if off <= COLLINEAR_TOL * x.norm().max(alpha.abs() * yy.sqrt()) {
        let witness = (alpha.abs() > 1.0 + COLLINEAR_TOL).then(|| DMatrix::identity(n, n));
        return Ok(CollinearityCertificate { collinear: true, alpha: Some(alpha), witness });
    }
    let v = x * yy - y * xy;
    let vn = v.norm_squared();
    Ok(CollinearityCertificate { collinear: false, alpha: None, witness: Some(&v * v.transpose() / vn) })
}

/// Extreme eigenvalues `(lambda_min, lambda_max)` of `x x^T - y y^T`.
///
/// The nonzero spectrum lives in `span{x, y}`; the product of the two
/// eigenvalues is `-(|x|^2 |y|^2 - (x.y)^2)`, evaluated through the Lagrange
/// identity so that nearly collinear pairs keep full relative accuracy.
pub fn rank_two_extremes(x: &DVector<f64>, y: &DVector<f64>) -> (f64, f64) {
    let (xx, yy) = (x.norm_squared(), y.norm_squared());
    let mut cross = 0.0;
    for j in 0..x.len() {
        for k in (j + 1)..x.len() {
            let w = x[j] * y[k] - x[k] * y[j];
            cross += w * w;
        }
    }
    let diff = xx - yy;
    let root = (diff * diff + 4.0 * cross).sqrt();
    if diff >= 0.0 {
        let hi = 0.5 * (diff + root);
        let lo = if hi > 0.0 { -cross / hi } else { 0.0 };
        (lo, hi)
    } else {
        let lo = 0.5 * (diff - root);
        (lo, -cross / lo)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetViolation {
    pub per_term: Vec<f64>,
    /// `||P_0 A_0 z - P_0 b||`
    pub affine_residual: f64,
    /// Zero threshold `1e-9 (1 + ||b||^2 + ||z||^2)` for this point.
    pub tolerance: f64,
}

impl SetViolation {
    pub fn is_zero(&self) -> bool {
        self.affine_residual <= self.tolerance && self.per_term.iter().all(|&v| v <= self.tolerance)
    }

    pub fn total(&self) -> f64 {
        self.per_term.iter().sum::<f64>() + self.affine_residual
    }
}

/// `x_i = P_i (b - A_0 z)` and `y_i = P_i A_i z` for every term.
pub fn term_vectors(
    z: &DVector<f64>,
    problem: &PhysicsProblem,
    ps: &ProjectorSet,
) -> Vec<(DVector<f64>, DVector<f64>)> {
    let r = &problem.b - &problem.a0 * z;
    problem
        .terms
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let p = ps.p(i + 1);
            (p * &r, p * (&t.u * (t.v.transpose() * z)))
        })
        .collect()
}

fn violation_with(
    z: &DVector<f64>,
    problem: &PhysicsProblem,
    ps: &ProjectorSet,
    score: impl Fn(f64, f64) -> f64,
) -> Result<SetViolation> {
    check_len("z", problem.n(), z.len())?;
    let per_term = term_vectors(z, problem, ps)
        .iter()
        .map(|(x, y)| {
            let (lo, hi) = rank_two_extremes(x, y);
            score(lo, hi)
        })
        .collect();
    let p0 = ps.p(0);
    let affine_residual = (p0 * (&problem.a0 * z) - p0 * &problem.b).norm();
    let tolerance = VIOLATION_TOL * (1.0 + problem.b.norm_squared() + z.norm_squared());
    Ok(SetViolation { per_term, affine_residual, tolerance })
}

/// Worst violation of the interval-domain inequalities over unit-norm PSD `N_i`.
pub fn s_violation(z: &DVector<f64>, problem: &PhysicsProblem, ps: &ProjectorSet) -> Result<SetViolation> {
    violation_with(z, problem, ps, |_, hi| hi.max(0.0))
}

/// Worst violation of the Boolean-domain equalities over unit-norm symmetric `N_i`.
pub fn s_violation_boolean(z: &DVector<f64>, problem: &PhysicsProblem, ps: &ProjectorSet) -> Result<SetViolation> {
    violation_with(z, problem, ps, |lo, hi| hi.abs().max(lo.abs()))
}

/// Violation for the problem's own domain.
pub fn domain_violation(z: &DVector<f64>, problem: &PhysicsProblem, ps: &ProjectorSet) -> Result<SetViolation> {
    match problem.domain {
        Domain::Interval => s_violation(z, problem, ps),
        Domain::Boolean => s_violation_boolean(z, problem, ps),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaRecovery {
    pub theta: Vec<f64>,
    /// `||A(theta) z - b||`
    pub residual: f64,
    /// Coordinates where `P_i A_i z` vanished and `theta_i` was set by convention.
    pub degenerate: Vec<bool>,
}

/// Least-squares parameters from `P_i (b - A_0 z) = theta_i P_i A_i z`.
/// Undetermined coordinates are set to `0` (interval) or `+1` (Boolean).
pub fn recover_theta(z: &DVector<f64>, problem: &PhysicsProblem, ps: &ProjectorSet) -> Result<ThetaRecovery> {
    check_len("z", problem.n(), z.len())?;
    let cutoff = DEGENERATE_TOL * (1.0 + z.norm());
    let fallback = match problem.domain {
        Domain::Interval => 0.0,
        Domain::Boolean => 1.0,
    };
    let mut theta = Vec::with_capacity(problem.d());
    let mut degenerate = Vec::with_capacity(problem.d());
    for (x, y) in term_vectors(z, problem, ps) {
        let yn = y.norm();
        if yn > cutoff {
            theta.push(y.dot(&x) / (yn * yn));
            degenerate.push(false);
        } else {
            theta.push(fallback);
            degenerate.push(true);
        }
    }
    let residual = (assemble_physics(problem, &theta)? * z - &problem.b).norm();
    Ok(ThetaRecovery { theta, residual, degenerate })
}
