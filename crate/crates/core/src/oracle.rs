//! Ground-truth primal values at desk scale by enumeration over `theta`.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dual::{BoundReport, QuadraticObjective};
use crate::error::{Error, Result};
use crate::model::{solve_field, PhysicsProblem};

pub const MAX_BOOLEAN_TERMS: usize = 24;
pub const MAX_GRID_TERMS: usize = 3;
/// Weak-duality slack factor: pass iff `d* <= p* + WEAK_DUALITY_TOL (1 + |p*|)`.
pub const WEAK_DUALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// `+inf` when no enumerated `theta` gives a solvable system.
    pub p_star: f64,
    pub argmin_theta: Vec<f64>,
    pub argmin_z: DVector<f64>,
    pub evaluated_count: usize,
}

/// Evaluates every candidate, then reduces in candidate order so the result
/// does not depend on thread scheduling. Ties keep the earliest candidate.
fn minimize_over(
    problem: &PhysicsProblem,
    obj: &QuadraticObjective,
    candidates: Vec<Vec<f64>>,
) -> Result<OracleResult> {
    let values: Vec<Option<(f64, DVector<f64>)>> = candidates
        .par_iter()
        .map(|theta| {
            let sol = solve_field(problem, theta).ok()?;
            sol.solvable.then(|| (obj.eval(&sol.z), sol.z))
        })
        .collect();
    let mut best: Option<(usize, f64, DVector<f64>)> = None;
    for (i, v) in values.into_iter().enumerate() {
        if let Some((f, z)) = v {
            if best.as_ref().is_none_or(|(_, bf, _)| f < *bf) {
                best = Some((i, f, z));
            }
        }
    }
    let evaluated_count = candidates.len();
    Ok(match best {
        Some((i, f, z)) => {
            OracleResult { p_star: f, argmin_theta: candidates[i].clone(), argmin_z: z, evaluated_count }
        }
        None => OracleResult {
            p_star: f64::INFINITY,
            argmin_theta: Vec::new(),
            argmin_z: DVector::zeros(0),
            evaluated_count,
        },
    })
}

/// Sign pattern `k` as a parameter vector; bit `i` set means `theta_i = -1`.
pub fn sign_pattern(k: u64, d: usize) -> Vec<f64> {
    (0..d).map(|i| if (k >> i) & 1 == 1 { -1.0 } else { 1.0 }).collect()
}

/// Exact minimum of `f` over all `2^d` sign patterns with solvable systems.
pub fn brute_force_boolean(problem: &PhysicsProblem, obj: &QuadraticObjective) -> Result<OracleResult> {
    let d = problem.d();
    if d > MAX_BOOLEAN_TERMS {
        return Err(Error::Guard { what: "d", value: d, limit: MAX_BOOLEAN_TERMS });
    }
    let candidates = (0..1u64 << d).map(|k| sign_pattern(k, d)).collect();
    minimize_over(problem, obj, candidates)
}

/// Minimum over the uniform grid on `[-1, 1]^d` with `points_per_axis`
/// points per axis, endpoints included. This is an upper bound on the
/// interval-domain optimum.
pub fn grid_search_interval(
    problem: &PhysicsProblem,
    obj: &QuadraticObjective,
    points_per_axis: usize,
) -> Result<OracleResult> {
    let d = problem.d();
    if d > MAX_GRID_TERMS {
        return Err(Error::Guard { what: "d", value: d, limit: MAX_GRID_TERMS });
    }
    if points_per_axis < 2 {
        return Err(Error::InvalidArgument(format!("points_per_axis must be at least 2, got {points_per_axis}")));
    }
    let axis: Vec<f64> = (0..points_per_axis).map(|k| -1.0 + 2.0 * k as f64 / (points_per_axis - 1) as f64).collect();
    let total = points_per_axis.pow(d as u32);
    let candidates = (0..total)
        .map(|mut idx| {
            (0..d)
                .map(|_| {
                    let v = axis[idx % points_per_axis];
                    idx /= points_per_axis;
                    v
                })
                .collect()
        })
        .collect();
    minimize_over(problem, obj, candidates)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakDualityCheck {
    pub pass: bool,
    /// `p* + tol (1 + |p*|) - d*`; negative on failure.
    #[serde(with = "crate::io::lenient_f64")]
    pub margin: f64,
    /// `p* = +inf`: no feasible design, so any bound passes.
    pub vacuous: bool,
}

pub fn verify_weak_duality(bound: &BoundReport, oracle: &OracleResult) -> WeakDualityCheck {
    check_weak_duality(bound.d_star, oracle.p_star)
}

pub fn check_weak_duality(d_star: f64, p_star: f64) -> WeakDualityCheck {
    if p_star == f64::INFINITY {
        return WeakDualityCheck { pass: true, margin: f64::INFINITY, vacuous: true };
    }
    let margin = p_star + WEAK_DUALITY_TOL * (1.0 + p_star.abs()) - d_star;
    WeakDualityCheck { pass: margin >= 0.0, margin, vacuous: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Domain, FactoredTerm};
    use nalgebra::DMatrix;

    fn toy() -> PhysicsProblem {
        let e1 = DVector::from_vec(vec![1.0, 0.0]);
        PhysicsProblem::new(
            DMatrix::identity(2, 2),
            vec![FactoredTerm::rank_one(e1.clone(), e1)],
            DVector::from_vec(vec![2.0, 0.0]),
            Domain::Boolean,
        )
    }

    #[test]
    fn two_case_enumeration() {
        let r = brute_force_boolean(&toy(), &QuadraticObjective::squared_norm(2)).unwrap();
        assert_eq!(r.p_star, 1.0);
        assert_eq!(r.argmin_theta, vec![1.0]);
        assert_eq!(r.evaluated_count, 2);
    }

    #[test]
    fn zero_objective() {
        let r = brute_force_boolean(&toy(), &QuadraticObjective::zero(2)).unwrap();
        assert_eq!(r.p_star, 0.0);
    }

    #[test]
    fn grid_definition() {
        let r = grid_search_interval(&toy(), &QuadraticObjective::zero(2), 3).unwrap();
        assert_eq!(r.evaluated_count, 3);
        // theta = -1 is singular, theta = 0 is the first solvable grid point
        assert_eq!(r.argmin_theta, vec![0.0]);
    }

    #[test]
    fn grid_guards() {
        assert!(grid_search_interval(&toy(), &QuadraticObjective::zero(2), 1).is_err());
        let mut p = toy();
        p.terms = vec![p.terms[0].clone(); 4];
        assert!(matches!(grid_search_interval(&p, &QuadraticObjective::zero(2), 3), Err(Error::Guard { .. })));
    }

    #[test]
    fn boolean_guard() {
        let mut p = toy();
        p.terms = vec![p.terms[0].clone(); 25];
        assert!(matches!(brute_force_boolean(&p, &QuadraticObjective::zero(2)), Err(Error::Guard { .. })));
    }

    #[test]
    fn weak_duality_sentinel() {
        assert!(check_weak_duality(0.0, 0.0).pass);
        assert_eq!(check_weak_duality(0.0, 0.0).margin, 1e-6);
        assert!(!check_weak_duality(1.0 + 4.0 / 9.0, 4.0 / 9.0).pass);
        let v = check_weak_duality(5.0, f64::INFINITY);
        assert!(v.pass && v.vacuous);
    }

    #[test]
    fn all_unsolvable_gives_infinity() {
        let e1 = DVector::from_vec(vec![1.0, 0.0]);
        let p = PhysicsProblem::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            vec![FactoredTerm::rank_one(e1.clone(), e1)],
            DVector::from_vec(vec![1.0, 1.0]),
            Domain::Boolean,
        );
        let r = brute_force_boolean(&p, &QuadraticObjective::zero(2)).unwrap();
        assert_eq!(r.p_star, f64::INFINITY);
    }
}
