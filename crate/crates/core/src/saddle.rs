//! Gradient descent-ascent on the Lagrangian.
//!
//! A cheap heuristic next to the exact bound: it produces candidate fields
//! and dual points whose `eval_dual` values are valid (if loose) bounds.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dual::{assemble_quadratic, eval_lagrangian, DualMode, DualPoint, QuadraticObjective};
use crate::error::{check_len, Error, Result};
use crate::linalg;
use crate::model::PhysicsProblem;
use crate::projectors::ProjectorSet;
use crate::quadratic_sets::{domain_violation, term_vectors};

/// Lagrangian magnitude treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaddleConfig {
    pub step_primal: f64,
    pub step_dual: f64,
    pub iterations: usize,
    /// Eigenvalues of `N_i` are clipped at `-psd_projection_tol` in interval mode.
    pub psd_projection_tol: f64,
    pub seed: u64,
    /// Half-width of the uniform random initial field; zero starts at `z = 0`.
    pub init_scale: f64,
    /// Weight of the set violation when ranking primal candidates.
    pub penalty: f64,
}

impl Default for SaddleConfig {
    fn default() -> Self {
        Self {
            step_primal: 0.05,
            step_dual: 0.05,
            iterations: 4000,
            psd_projection_tol: 0.0,
            seed: 0,
            init_scale: 0.0,
            penalty: 10.0,
        }
    }
}

impl SaddleConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.step_primal) || !ok(self.step_dual) {
            return Err(Error::InvalidArgument("saddle steps must be positive".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidArgument("saddle iterations must be positive".into()));
        }
        if !(self.psd_projection_tol >= 0.0 && self.init_scale >= 0.0 && self.penalty >= 0.0) {
            return Err(Error::InvalidArgument("saddle tolerances must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub z: DVector<f64>,
    pub n_blocks: Vec<DMatrix<f64>>,
    pub nu: DVector<f64>,
}

/// Partial derivatives of `L(z, N, nu)`:
/// `2 T z + 2 u`, `x_i x_i^T - y_i y_i^T` and `P_0 A_0 z - P_0 b`.
pub fn gradients(
    z: &DVector<f64>,
    dp: &DualPoint,
    problem: &PhysicsProblem,
    ps: &ProjectorSet,
    obj: &QuadraticObjective,
) -> Result<Gradients> {
    check_len("z", problem.n(), z.len())?;
    let q = assemble_quadratic(dp, problem, ps, obj)?;
    let gz = (&q.t * z + &q.u) * 2.0;
    let gn = term_vectors(z, problem, ps).into_iter().map(|(x, y)| &x * x.transpose() - &y * y.transpose()).collect();
    let p0 = ps.p(0);
    let gnu = p0 * (&problem.a0 * z) - p0 * &problem.b;
    Ok(Gradients { z: gz, n_blocks: gn, nu: gnu })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleResult {
    /// Iterate with the smallest `f(z) + penalty * violation(z)`.
    pub z_best: DVector<f64>,
    pub best_objective: f64,
    pub best_violation: f64,
    /// Last dual iterate.
    pub dual_point: DualPoint,
    /// `L` at every iterate, starting from the initial point.
    pub l_trace: Vec<f64>,
    pub diverged: bool,
}

pub fn run_saddle(
    problem: &PhysicsProblem,
    ps: &ProjectorSet,
    obj: &QuadraticObjective,
    cfg: &SaddleConfig,
) -> Result<SaddleResult> {
    cfg.validate()?;
    if !ps.is_verified() {
        return Err(Error::InvalidArgument("projector set is not verified".into()));
    }
    check_len("objective", problem.n(), obj.dim())?;
    let mode = DualMode::from(problem.domain);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut z = DVector::from_fn(problem.n(), |_, _| cfg.init_scale * rng.random_range(-1.0..=1.0));
    let mut dp = DualPoint::zero(ps, mode);

    let score = |z: &DVector<f64>| -> Result<(f64, f64)> {
        let viol = domain_violation(z, problem, ps)?.total();
        Ok((obj.eval(z) + cfg.penalty * viol, viol))
    };
    let (s0, v0) = score(&z)?;
    let mut best = (s0, v0, z.clone());
    let mut l_trace = vec![eval_lagrangian(&z, &dp, problem, ps, obj)?];
    let mut diverged = false;

    for _ in 0..cfg.iterations {
        let g = gradients(&z, &dp, problem, ps, obj)?;
        z -= &g.z * cfg.step_primal;
        for (n, gn) in dp.n_blocks.iter_mut().zip(&g.n_blocks) {
            *n += gn * cfg.step_dual;
            if mode == DualMode::IntervalPsd {
                *n = clip_below(n, -cfg.psd_projection_tol);
            }
        }
        dp.nu += &g.nu * cfg.step_dual;

        let l = eval_lagrangian(&z, &dp, problem, ps, obj)?;
        l_trace.push(l);
        if !l.is_finite() || l.abs() > DIVERGENCE_LIMIT {
            diverged = true;
            break;
        }
        let (s, v) = score(&z)?;
        if s < best.0 {
            best = (s, v, z.clone());
        }
    }
    let (_, best_violation, z_best) = best;
    Ok(SaddleResult { best_objective: obj.eval(&z_best), z_best, best_violation, dual_point: dp, l_trace, diverged })
}

/// Raises every eigenvalue of the symmetric matrix `a` to at least `floor`.
fn clip_below(a: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    if linalg::min_eigenvalue(a) >= floor {
        return linalg::symmetrize(a);
    }
    let floor_eye = DMatrix::identity(a.nrows(), a.ncols()) * floor;
    linalg::project_psd(&(a - &floor_eye)) + floor_eye
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::eval_dual;
    use crate::factorization::stack_terms;
    use crate::model::{Domain, FactoredTerm};
    use crate::projectors::construct_inverse;

    fn instance(b: f64) -> (PhysicsProblem, ProjectorSet) {
        let a0 = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, -0.2, 2.5]);
        let terms =
            vec![FactoredTerm::rank_one(DVector::from_row_slice(&[1.0, 0.5]), DVector::from_row_slice(&[0.4, -0.3]))];
        let p = PhysicsProblem::new(a0, terms, DVector::from_row_slice(&[b, 0.5 * b]), Domain::Interval);
        let ps = construct_inverse(&stack_terms(&p.terms).unwrap(), &p.terms).unwrap();
        (p, ps)
    }

    #[test]
    fn zero_dual_point_gives_objective_gradient() {
        let (p, ps) = instance(1.0);
        let obj = QuadraticObjective::new(
            DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
            DVector::from_row_slice(&[0.3, -0.1]),
            0.0,
        );
        let z = DVector::from_row_slice(&[0.7, -1.2]);
        let g = gradients(&z, &DualPoint::zero(&ps, DualMode::IntervalPsd), &p, &ps, &obj).unwrap();
        let expected = (&obj.qmat * &z + &obj.qvec) * 2.0;
        assert!((g.z - expected).norm() < 1e-12);
    }

    #[test]
    fn zero_load_converges_to_origin() {
        let (p, ps) = instance(0.0);
        let cfg = SaddleConfig { init_scale: 0.5, seed: 4, ..SaddleConfig::default() };
        let r = run_saddle(&p, &ps, &QuadraticObjective::squared_norm(2), &cfg).unwrap();
        assert!(!r.diverged);
        assert!(r.z_best.norm() < 1e-6, "{}", r.z_best);
        assert!(r.l_trace.last().unwrap().abs() < 1e-8);
    }

    #[test]
    fn psd_clipping_respects_floor() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, -1.0]);
        let c = clip_below(&a, -0.1);
        assert!(linalg::min_eigenvalue(&c) >= -0.1 - 1e-12);
        assert_eq!(clip_below(&DMatrix::identity(2, 2), 0.0), DMatrix::identity(2, 2));
    }

    #[test]
    fn interval_run_keeps_dual_feasible() {
        let (p, ps) = instance(1.0);
        let cfg = SaddleConfig { iterations: 200, ..SaddleConfig::default() };
        let obj = QuadraticObjective::squared_norm(2);
        let r = run_saddle(&p, &ps, &obj, &cfg).unwrap();
        assert!(r.dual_point.min_eigenvalue() >= 0.0);
        assert!(eval_dual(&r.dual_point, &p, &ps, &obj).unwrap().is_finite());
    }

    #[test]
    fn rejects_nonpositive_steps() {
        let (p, ps) = instance(1.0);
        let cfg = SaddleConfig { step_dual: 0.0, ..SaddleConfig::default() };
        assert!(run_saddle(&p, &ps, &QuadraticObjective::squared_norm(2), &cfg).is_err());
    }
}
