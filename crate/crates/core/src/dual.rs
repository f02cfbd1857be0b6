//! Lagrangian relaxation of the quadratic reformulation and the dual bound.
//!
//! With `G_i = P_i^T N_i P_i` the Lagrangian
//!
//! ```text
//! L(z, N, nu) = f(z) + sum_i [ (b - A_0 z)^T G_i (b - A_0 z) - z^T A_i^T G_i A_i z ]
//!             + nu^T (P_0 A_0 z - P_0 b)
//! ```
//!
//! is a quadratic `z^T T z + 2 u^T z + v` in `z`, so the dual function is
//! `g = v - u^T T^+ u` when `T` is PSD and `u` lies in its range, and `-inf`
//! otherwise. Maximizing `g` is the LMI
//!
//! ```text
//! maximize v - s   subject to   [[T, u], [u^T, s]] PSD  (and N_i PSD)
//! ```
//!
//! whose optimal value `d*` is a lower bound on the design problem.

use std::ops::Range;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{self, svec_basis, svec_len};
use crate::model::{Domain, PhysicsProblem};
use crate::projectors::ProjectorSet;
use crate::quadratic_sets::term_vectors;
use crate::sdp::{LmiProblem, LmiSolution, SolveStatus, SolverConfig, SparseBlocks};

/// Eigenvalues below this fraction of the largest are dropped from `T^+`.
pub const PINV_CUTOFF: f64 = 1e-10;
/// `T` counts as PSD when its smallest eigenvalue is at least `-PSD_TOL (1 + ||T||)`.
pub const PSD_TOL: f64 = 1e-10;
/// `u` is in the range of `T` when `||(I - T T^+) u|| <= RANGE_TOL (1 + ||u||)`.
pub const RANGE_TOL: f64 = 1e-8;

/// `f(z) = z^T Q z + 2 q^T z + r`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticObjective {
    pub qmat: DMatrix<f64>,
    pub qvec: DVector<f64>,
    pub r: f64,
}

impl QuadraticObjective {
    /// Symmetrizes `qmat`.
    pub fn new(qmat: DMatrix<f64>, qvec: DVector<f64>, r: f64) -> Self {
        Self { qmat: linalg::symmetrize(&qmat), qvec, r }
    }

    /// `||z||^2`
    pub fn squared_norm(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n), DVector::zeros(n), 0.0)
    }

    pub fn zero(n: usize) -> Self {
        Self::new(DMatrix::zeros(n, n), DVector::zeros(n), 0.0)
    }

    pub fn dim(&self) -> usize {
        self.qvec.len()
    }

    pub fn eval(&self, z: &DVector<f64>) -> f64 {
        z.dot(&(&self.qmat * z)) + 2.0 * self.qvec.dot(z) + self.r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DualMode {
    /// `N_i` PSD: bounds the interval-domain problem.
    IntervalPsd,
    /// `N_i` symmetric: bounds the Boolean-domain problem.
    BooleanSymmetric,
}

impl From<Domain> for DualMode {
    fn from(d: Domain) -> Self {
        match d {
            Domain::Interval => DualMode::IntervalPsd,
            Domain::Boolean => DualMode::BooleanSymmetric,
        }
    }
}

/// Multipliers `(N_1, ..., N_d, nu)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPoint {
    pub n_blocks: Vec<DMatrix<f64>>,
    pub nu: DVector<f64>,
    pub mode: DualMode,
}

impl DualPoint {
    pub fn zero(ps: &ProjectorSet, mode: DualMode) -> Self {
        Self {
            n_blocks: ps.p_blocks[1..].iter().map(|p| DMatrix::zeros(p.nrows(), p.nrows())).collect(),
            nu: DVector::zeros(ps.m0()),
            mode,
        }
    }

    /// Smallest eigenvalue over all `N_i`.
    pub fn min_eigenvalue(&self) -> f64 {
        self.n_blocks.iter().map(linalg::min_eigenvalue).fold(f64::INFINITY, f64::min)
    }

    /// `N_i` symmetric, and PSD within `-1e-10` in interval mode.
    pub fn is_feasible(&self) -> bool {
        let sym = self.n_blocks.iter().all(|n| (n - n.transpose()).norm() <= 1e-12 * (1.0 + n.norm()));
        sym && (self.mode == DualMode::BooleanSymmetric || self.min_eigenvalue() >= -PSD_TOL)
    }

    /// `lambda a + (1 - lambda) b`, blockwise.
    pub fn lerp(a: &DualPoint, b: &DualPoint, lambda: f64) -> DualPoint {
        DualPoint {
            n_blocks: a.n_blocks.iter().zip(&b.n_blocks).map(|(x, y)| x * lambda + y * (1.0 - lambda)).collect(),
            nu: &a.nu * lambda + &b.nu * (1.0 - lambda),
            mode: a.mode,
        }
    }
}

/// Coefficients of `L(z) = z^T t z + 2 u^T z + v` for a fixed dual point.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianQuadratic {
    pub t: DMatrix<f64>,
    pub u: DVector<f64>,
    pub v: f64,
}

fn check_dual_dims(dp: &DualPoint, problem: &PhysicsProblem, ps: &ProjectorSet) -> Result<()> {
    check_len("dual blocks", problem.d(), dp.n_blocks.len())?;
    check_len("nu", ps.m0(), dp.nu.len())?;
    for (i, n) in dp.n_blocks.iter().enumerate() {
        check_len(&format!("N_{}", i + 1), ps.p(i + 1).nrows(), n.nrows())?;
    }
    Ok(())
}

/// Direct evaluation of the Lagrangian.
pub fn eval_lagrangian(
    z: &DVector<f64>,
    dp: &DualPoint,
    problem: &PhysicsProblem,
    ps: &ProjectorSet,
    obj: &QuadraticObjective,
) -> Result<f64> {
    check_len("z", problem.n(), z.len())?;
    check_dual_dims(dp, problem, ps)?;
    let mut l = obj.eval(z);
    for ((x, y), n) in term_vectors(z, problem, ps).iter().zip(&dp.n_blocks) {
        l += x.dot(&(n * x)) - y.dot(&(n * y));
    }
    let p0 = ps.p(0);
    l += dp.nu.dot(&(p0 * (&problem.a0 * z) - p0 * &problem.b));
    Ok(l)
}

/// Per-term data `W_i = P_i A_0`, `Y_i = P_i A_i`, `c_i = P_i b`.
struct TermData {
    w: DMatrix<f64>,
    y: DMatrix<f64>,
    c: DVector<f64>,
}

fn term_data(problem: &PhysicsProblem, ps: &ProjectorSet) -> Vec<TermData> {
    problem
        .terms
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let p = ps.p(i + 1);
            TermData { w: p * &problem.a0, y: (p * &t.u) * t.v.transpose(), c: p * &problem.b }
        })
        .collect()
}

/// Coefficients of the Lagrangian as a quadratic in `z`:
/// `T = Q + sum_i (W_i^T N_i W_i - Y_i^T N_i Y_i)`,
/// `u = q - sum_i W_i^T N_i c_i + (P_0 A_0)^T nu / 2`,
/// `v = r + sum_i c_i^T N_i c_i - nu^T P_0 b`.
pub fn assemble_quadratic(
    dp: &DualPoint,
    problem: &PhysicsProblem,
    ps: &ProjectorSet,
    obj: &QuadraticObjective,
) -> Result<LagrangianQuadratic> {
    check_dual_dims(dp, problem, ps)?;
    let mut t = obj.qmat.clone();
    let mut u = obj.qvec.clone();
    let mut v = obj.r;
    for (td, n) in term_data(problem, ps).iter().zip(&dp.n_blocks) {
        t += td.w.transpose() * n * &td.w - td.y.transpose() * n * &td.y;
        u -= td.w.transpose() * (n * &td.c);
        v += td.c.dot(&(n * &td.c));
    }
    let p0 = ps.p(0);
    u += (p0 * &problem.a0).transpose() * &dp.nu * 0.5;
    v -= dp.nu.dot(&(p0 * &problem.b));
    Ok(LagrangianQuadratic { t: linalg::symmetrize(&t), u, v })
}

/// `inf_z z^T t z + 2 u^T z + v`, or `-inf` when unbounded below.
pub fn quadratic_infimum(q: &LagrangianQuadratic) -> f64 {
    let n = q.u.len();
    if n == 0 {
        return q.v;
    }
    let eig = SymmetricEigen::new(q.t.clone());
    let lmax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let lmin = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if lmin < -PSD_TOL * (1.0 + lmax) {
        return f64::NEG_INFINITY;
    }
    let mut quad = 0.0;
    let mut outside = 0.0;
    for k in 0..n {
        let c = eig.eigenvectors.column(k).dot(&q.u);
        let l = eig.eigenvalues[k];
        if lmax > 0.0 && l > PINV_CUTOFF * lmax {
            quad += c * c / l;
        } else {
            outside += c * c;
        }
    }
    if outside.sqrt() > RANGE_TOL * (1.0 + q.u.norm()) {
        return f64::NEG_INFINITY;
    }
    q.v - quad
}

/// The dual function `g(N, nu) = inf_z L(z, N, nu)`.
pub fn eval_dual(dp: &DualPoint, problem: &PhysicsProblem, ps: &ProjectorSet, obj: &QuadraticObjective) -> Result<f64> {
    Ok(quadratic_infimum(&assemble_quadratic(dp, problem, ps, obj)?))
}

/// The bound problem written as an LMI over `y = (svec N_1, ..., svec N_d, nu, s)`.
///
/// Block 0 is the Schur block `[[T, u], [u^T, s]]` of order `n + 1`; in
/// interval mode blocks `1..=d` hold `N_i`. The objective is
/// `constant + b^T y = v - s`.
#[derive(Debug, Clone)]
pub struct DualSdp {
    pub lmi: LmiProblem,
    pub constant: f64,
    pub mode: DualMode,
    pub n_ranges: Vec<Range<usize>>,
    pub nu_range: Range<usize>,
    pub s_index: usize,
    pub n: usize,
}

fn schur_coefficient(t: &DMatrix<f64>, u: &DVector<f64>, corner: f64) -> DMatrix<f64> {
    let n = t.nrows();
    let mut m = DMatrix::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(t);
    for i in 0..n {
        m[(i, n)] = u[i];
        m[(n, i)] = u[i];
    }
    m[(n, n)] = corner;
    m
}

pub fn build_dual_sdp(
    problem: &PhysicsProblem,
    ps: &ProjectorSet,
    obj: &QuadraticObjective,
    mode: DualMode,
) -> DualSdp {
    let n = problem.n();
    let widths: Vec<usize> = ps.p_blocks[1..].iter().map(|p| p.nrows()).collect();
    let mut block_sizes = vec![n + 1];
    if mode == DualMode::IntervalPsd {
        block_sizes.extend(&widths);
    }
    let mut c = vec![schur_coefficient(&obj.qmat, &obj.qvec, 0.0)];
    if mode == DualMode::IntervalPsd {
        c.extend(widths.iter().map(|&w| DMatrix::zeros(w, w)));
    }

    let mut f: Vec<SparseBlocks> = Vec::new();
    let mut b = Vec::new();
    let mut n_ranges = Vec::new();
    for (i, td) in term_data(problem, ps).iter().enumerate() {
        let w = widths[i];
        let start = f.len();
        for k in 0..svec_len(w) {
            let e = svec_basis(k, w);
            let t = td.w.transpose() * &e * &td.w - td.y.transpose() * &e * &td.y;
            let u = -(td.w.transpose() * (&e * &td.c));
            let mut fj: SparseBlocks = vec![(0, -schur_coefficient(&t, &u, 0.0))];
            if mode == DualMode::IntervalPsd {
                fj.push((i + 1, -e.clone()));
            }
            f.push(fj);
            b.push(td.c.dot(&(&e * &td.c)));
        }
        n_ranges.push(start..f.len());
    }
    let p0 = ps.p(0);
    let p0a0 = p0 * &problem.a0;
    let p0b = p0 * &problem.b;
    let nu_start = f.len();
    for k in 0..ps.m0() {
        let u = p0a0.row(k).transpose() * 0.5;
        f.push(vec![(0, -schur_coefficient(&DMatrix::zeros(n, n), &u, 0.0))]);
        b.push(-p0b[k]);
    }
    let nu_range = nu_start..f.len();
    let s_index = f.len();
    f.push(vec![(0, -schur_coefficient(&DMatrix::zeros(n, n), &DVector::zeros(n), 1.0))]);
    b.push(-1.0);

    DualSdp { lmi: LmiProblem { block_sizes, c, f, b }, constant: obj.r, mode, n_ranges, nu_range, s_index, n }
}

impl DualSdp {
    pub fn num_vars(&self) -> usize {
        self.lmi.num_vars()
    }

    /// `constant + b^T y`
    pub fn objective(&self, y: &[f64]) -> f64 {
        self.constant + self.lmi.b.iter().zip(y).map(|(b, y)| b * y).sum::<f64>()
    }

    pub fn dual_point(&self, y: &[f64]) -> DualPoint {
        let n_blocks = self
            .n_ranges
            .iter()
            .map(|r| {
                let w = ((((8 * r.len() + 1) as f64).sqrt() as usize) - 1) / 2;
                linalg::smat(&y[r.clone()], w)
            })
            .collect();
        DualPoint { n_blocks, nu: DVector::from_row_slice(&y[self.nu_range.clone()]), mode: self.mode }
    }

    /// Inverse of [`DualSdp::dual_point`] together with the Schur scalar `s`.
    pub fn variables(&self, dp: &DualPoint, s: f64) -> Vec<f64> {
        let mut y = Vec::with_capacity(self.num_vars());
        for n in &dp.n_blocks {
            y.extend(linalg::svec(n));
        }
        y.extend(dp.nu.iter());
        y.push(s);
        y
    }

    /// The Schur block `[[T, u], [u^T, s]]` at `y`.
    pub fn schur_block(&self, y: &[f64]) -> DMatrix<f64> {
        self.lmi.slack(y).swap_remove(0)
    }

    /// Plain-text export in SDPA sparse format with a descriptive header.
    pub fn to_text(&self) -> String {
        let mut comments = vec![
            "physbound dual bound program".to_string(),
            format!("mode {:?}", self.mode),
            format!("maximize {:e} + b^T y subject to C - sum_j y_j F_j PSD", self.constant),
            format!("objective constant {:e}", self.constant),
        ];
        for (i, r) in self.n_ranges.iter().enumerate() {
            comments.push(format!("variables {}..{}: svec N_{}", r.start + 1, r.end, i + 1));
        }
        if !self.nu_range.is_empty() {
            comments.push(format!("variables {}..{}: nu", self.nu_range.start + 1, self.nu_range.end));
        }
        comments.push(format!("variable {}: s", self.s_index + 1));
        self.lmi.to_sdpa(&comments)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundStatus {
    Optimal,
    /// The bound is `+inf`: the relaxation has no feasible point.
    Unbounded,
    /// The bound is `-inf`: no dual point has a finite dual function.
    Infeasible,
    MaxIter,
    NumericalTrouble,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub d_star: f64,
    pub dual_point: DualPoint,
    pub solver_status: BoundStatus,
    /// Smallest eigenvalue of the Schur block at the returned point.
    pub schur_slack: f64,
    /// `eval_dual(dual_point)`
    pub certified: f64,
    pub p_star: Option<f64>,
    pub gap: Option<f64>,
    pub iterations: usize,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub relative_gap: f64,
}

impl BoundReport {
    /// Records an oracle value and the gap `p* - d*`.
    pub fn with_oracle(mut self, p_star: f64) -> Self {
        self.p_star = Some(p_star);
        self.gap = Some(p_star - self.d_star);
        self
    }
}

/// Maximizes the dual function. Requires a verified projector set.
pub fn solve_bound(
    problem: &PhysicsProblem,
    ps: &ProjectorSet,
    obj: &QuadraticObjective,
    mode: DualMode,
    cfg: &SolverConfig,
) -> Result<BoundReport> {
    if !ps.is_verified() {
        return Err(Error::InvalidArgument(format!("projector set is not verified (residuals {:?})", ps.residuals)));
    }
    check_len("objective", problem.n(), obj.dim())?;
    let sdp = build_dual_sdp(problem, ps, obj, mode);

    let mut best: Option<(f64, DVector<f64>)> = None;
    let sol = sdp.lmi.solve_observed(cfg, &mut |y| {
        let g = certify(&sdp, y.as_slice(), problem, ps, obj);
        if g.is_finite() && best.as_ref().is_none_or(|(b, _)| g > *b) {
            best = Some((g, y.clone()));
        }
    });
    Ok(report_from(&sdp, &sol, best, problem, ps, obj))
}

fn clean_point(sdp: &DualSdp, y: &[f64]) -> DualPoint {
    let mut dp = sdp.dual_point(y);
    if dp.mode == DualMode::IntervalPsd {
        for n in dp.n_blocks.iter_mut() {
            if linalg::min_eigenvalue(n) < 0.0 {
                *n = linalg::project_psd(n);
            }
        }
    }
    dp
}

fn certify(sdp: &DualSdp, y: &[f64], problem: &PhysicsProblem, ps: &ProjectorSet, obj: &QuadraticObjective) -> f64 {
    eval_dual(&clean_point(sdp, y), problem, ps, obj).unwrap_or(f64::NEG_INFINITY)
}

fn report_from(
    sdp: &DualSdp,
    sol: &LmiSolution,
    best: Option<(f64, DVector<f64>)>,
    problem: &PhysicsProblem,
    ps: &ProjectorSet,
    obj: &QuadraticObjective,
) -> BoundReport {
    let (status, d_star, y) = match sol.status {
        SolveStatus::Optimal => (BoundStatus::Optimal, sdp.objective(sol.y.as_slice()), sol.y.clone()),
        SolveStatus::PrimalInfeasible => (BoundStatus::Unbounded, f64::INFINITY, sol.y.clone()),
        SolveStatus::DualInfeasible => (BoundStatus::Infeasible, f64::NEG_INFINITY, sol.y.clone()),
        other => {
            let status =
                if other == SolveStatus::MaxIter { BoundStatus::MaxIter } else { BoundStatus::NumericalTrouble };
            match best {
                Some((g, y)) => (status, g, y),
                None => (status, f64::NEG_INFINITY, sol.y.clone()),
            }
        }
    };
    let dual_point = clean_point(sdp, y.as_slice());
    let certified = eval_dual(&dual_point, problem, ps, obj).unwrap_or(f64::NEG_INFINITY);
    let schur_slack = linalg::min_eigenvalue(&sdp.schur_block(y.as_slice()));
    BoundReport {
        d_star,
        dual_point,
        solver_status: status,
        schur_slack,
        certified,
        p_star: None,
        gap: None,
        iterations: sol.iterations,
        primal_infeasibility: sol.primal_infeasibility,
        dual_infeasibility: sol.dual_infeasibility,
        relative_gap: sol.relative_gap,
    }
}
