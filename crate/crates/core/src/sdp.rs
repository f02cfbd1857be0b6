//! Dense primal-dual interior-point solver for block-diagonal linear matrix
//! inequalities.
//!
//! Dual (LMI) form, which is the one the bound problem is written in:
//!
//! ```text
//! maximize    b^T y
//! subject to  Z = C - sum_j y_j F_j  is PSD
//! ```
//!
//! and its primal `minimize <C, X> s.t. <F_j, X> = b_j, X PSD`. The iteration
//! is an infeasible-start Nesterov-Todd path-following method with a Mehrotra
//! predictor-corrector step.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::linalg::symmetrize;

/// One coefficient matrix `F_j` restricted to the blocks it touches.
pub type SparseBlocks = Vec<(usize, DMatrix<f64>)>;

#[derive(Debug, Clone, PartialEq)]
pub struct LmiProblem {
    pub block_sizes: Vec<usize>,
    /// `C`, one dense matrix per block.
    pub c: Vec<DMatrix<f64>>,
    /// `F_j` for every variable `j`.
    pub f: Vec<SparseBlocks>,
    /// Objective coefficients `b`.
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    /// The LMI primal is infeasible; `b^T y` is unbounded above.
    PrimalInfeasible,
    /// No `y` makes `Z` PSD.
    DualInfeasible,
    MaxIter,
    NumericalTrouble,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iter: usize,
    /// Relative duality gap `|p - d| / (1 + |p| + |d|)`.
    pub gap_tol: f64,
    /// Relative primal and dual residual norms.
    pub feas_tol: f64,
    /// Smallest fraction of the step to the boundary that is taken; raised
    /// towards 0.99 when both steps are long.
    pub step_fraction: f64,
    /// Objective magnitude beyond which an infeasibility certificate is accepted.
    pub divergence: f64,
    /// Iterations without a 10% drop in the worst residual before giving up.
    pub stall_window: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { max_iter: 150, gap_tol: 1e-8, feas_tol: 1e-8, step_fraction: 0.95, divergence: 1e10, stall_window: 20 }
    }
}

#[derive(Debug, Clone)]
pub struct LmiSolution {
    pub status: SolveStatus,
    pub y: DVector<f64>,
    pub x: Vec<DMatrix<f64>>,
    pub z: Vec<DMatrix<f64>>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub relative_gap: f64,
    pub iterations: usize,
}

impl LmiProblem {
    pub fn num_vars(&self) -> usize {
        self.b.len()
    }

    /// `sum_j y_j F_j`
    pub fn apply_adjoint(&self, y: &[f64]) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = self.block_sizes.iter().map(|&s| DMatrix::zeros(s, s)).collect();
        for (fj, &yj) in self.f.iter().zip(y) {
            if yj != 0.0 {
                for (blk, m) in fj {
                    out[*blk] += m * yj;
                }
            }
        }
        out
    }

    /// `<F_j, X>` for every `j`.
    pub fn apply(&self, x: &[DMatrix<f64>]) -> DVector<f64> {
        DVector::from_iterator(self.f.len(), self.f.iter().map(|fj| fj.iter().map(|(blk, m)| m.dot(&x[*blk])).sum()))
    }

    /// `C - sum_j y_j F_j`
    pub fn slack(&self, y: &[f64]) -> Vec<DMatrix<f64>> {
        let ay = self.apply_adjoint(y);
        self.c.iter().zip(ay).map(|(c, a)| c - a).collect()
    }

    /// Solves with the given configuration. Deterministic.
    pub fn solve(&self, cfg: &SolverConfig) -> LmiSolution {
        Ipm::new(self).run(cfg, &mut |_| {})
    }

    /// As [`LmiProblem::solve`], calling `observer` with the unscaled `y` of
    /// every iterate.
    pub fn solve_observed(&self, cfg: &SolverConfig, observer: &mut dyn FnMut(&DVector<f64>)) -> LmiSolution {
        Ipm::new(self).run(cfg, observer)
    }

    /// SDPA sparse text format (`minimize c^T x s.t. sum_i F_i x_i - F_0 PSD`),
    /// obtained with `x = y`, `c = -b`, `F_0 = -C` and `F_i = -F_j`.
    pub fn to_sdpa(&self, comments: &[String]) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        for c in comments {
            let _ = writeln!(s, "* {c}");
        }
        let _ = writeln!(s, "{} = mDIM", self.num_vars());
        let _ = writeln!(s, "{} = nBLOCK", self.block_sizes.len());
        let sizes: Vec<String> = self.block_sizes.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(s, "{} = bLOCKsTRUCT", sizes.join(" "));
        let obj: Vec<String> = self.b.iter().map(|x| format!("{:e}", -x)).collect();
        let _ = writeln!(s, "{}", obj.join(" "));
        let mut emit = |mat_no: usize, blk: usize, m: &DMatrix<f64>, sign: f64| {
            for i in 0..m.nrows() {
                for j in i..m.ncols() {
                    let v = m[(i, j)];
                    if v != 0.0 {
                        let _ = writeln!(s, "{} {} {} {} {:e}", mat_no, blk + 1, i + 1, j + 1, sign * v);
                    }
                }
            }
        };
        for (blk, c) in self.c.iter().enumerate() {
            emit(0, blk, c, -1.0);
        }
        for (j, fj) in self.f.iter().enumerate() {
            for (blk, m) in fj {
                emit(j + 1, *blk, m, -1.0);
            }
        }
        s
    }
}

fn inner(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn frob(a: &[DMatrix<f64>]) -> f64 {
    a.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt()
}

/// Largest `alpha` with `x + alpha dx` PSD, or infinity. Zero if `x` is already singular.
fn max_step(x: &[DMatrix<f64>], dx: &[DMatrix<f64>]) -> f64 {
    let mut alpha = f64::INFINITY;
    for (xb, db) in x.iter().zip(dx) {
        if xb.nrows() == 0 {
            continue;
        }
        let w = match Cholesky::new(xb.clone()).and_then(|c| c.unpack().try_inverse()) {
            Some(linv) => symmetrize(&(&linv * db * linv.transpose())),
            None => {
                let e = SymmetricEigen::new(xb.clone());
                let lmin = e.eigenvalues.min();
                if lmin <= 0.0 {
                    return 0.0;
                }
                let s = DMatrix::from_diagonal(&e.eigenvalues.map(|l| 1.0 / l.sqrt()));
                let r = &e.eigenvectors * s * e.eigenvectors.transpose();
                symmetrize(&(&r * db * &r))
            }
        };
        let lmin = SymmetricEigen::new(w).eigenvalues.min();
        if lmin < 0.0 {
            alpha = alpha.min(-1.0 / lmin);
        }
    }
    alpha
}

struct Ipm<'a> {
    p: &'a LmiProblem,
    /// Scaled copies of the data.
    c: Vec<DMatrix<f64>>,
    f: Vec<SparseBlocks>,
    b: DVector<f64>,
    c_scale: f64,
    b_scale: f64,
    f_scale: Vec<f64>,
}

impl<'a> Ipm<'a> {
    fn new(p: &'a LmiProblem) -> Self {
        let f_scale: Vec<f64> =
            p.f.iter()
                .map(|fj| {
                    let n = fj.iter().map(|(_, m)| m.norm_squared()).sum::<f64>().sqrt();
                    if n > 0.0 {
                        n
                    } else {
                        1.0
                    }
                })
                .collect();
        let f: Vec<SparseBlocks> =
            p.f.iter().zip(&f_scale).map(|(fj, s)| fj.iter().map(|(b, m)| (*b, m / *s)).collect()).collect();
        let b0 = DVector::from_iterator(p.b.len(), p.b.iter().zip(&f_scale).map(|(b, s)| b / s));
        let b_scale = b0.norm().max(1.0);
        let c_scale = frob(&p.c).max(1.0);
        let c = p.c.iter().map(|m| m / c_scale).collect();
        Self { p, c, f, b: b0 / b_scale, c_scale, b_scale, f_scale }
    }

    fn a_op(&self, x: &[DMatrix<f64>]) -> DVector<f64> {
        DVector::from_iterator(self.f.len(), self.f.iter().map(|fj| fj.iter().map(|(blk, m)| m.dot(&x[*blk])).sum()))
    }

    fn a_adj(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = self.p.block_sizes.iter().map(|&s| DMatrix::zeros(s, s)).collect();
        for (fj, &yj) in self.f.iter().zip(y.iter()) {
            for (blk, m) in fj {
                out[*blk] += m * yj;
            }
        }
        out
    }

    /// Cholesky factor of the Gram matrix `<F_j, F_k>`, if the constraints are independent.
    fn gram(&self) -> Option<Cholesky<f64, Dyn>> {
        let k = self.f.len();
        let mut g = DMatrix::zeros(k, k);
        for j in 0..k {
            for i in 0..=j {
                let mut s = 0.0;
                for (bi, fi) in &self.f[i] {
                    for (bj, fj) in &self.f[j] {
                        if bi == bj {
                            s += fi.dot(fj);
                        }
                    }
                }
                g[(i, j)] = s;
                g[(j, i)] = s;
            }
        }
        let (lo, hi) = {
            let e = SymmetricEigen::new(g.clone()).eigenvalues;
            (e.min(), e.max())
        };
        if k == 0 || lo <= 1e-12 * hi {
            return None;
        }
        Cholesky::new(g)
    }

    fn unscale(
        &self,
        status: SolveStatus,
        it: usize,
        x: &[DMatrix<f64>],
        y: &DVector<f64>,
        z: &[DMatrix<f64>],
    ) -> LmiSolution {
        let y_out = self.unscale_y(y);
        let x_out: Vec<DMatrix<f64>> = x.iter().map(|m| m * self.b_scale).collect();
        let z_out: Vec<DMatrix<f64>> = z.iter().map(|m| m * self.c_scale).collect();
        let pobj = inner(&self.p.c, &x_out);
        let dobj: f64 = self.p.b.iter().zip(y_out.iter()).map(|(b, y)| b * y).sum();
        let bnorm = DVector::from_row_slice(&self.p.b).norm();
        let pinf = (DVector::from_row_slice(&self.p.b) - self.p.apply(&x_out)).norm() / (1.0 + bnorm);
        let slack = self.p.slack(y_out.as_slice());
        let rd: Vec<DMatrix<f64>> = slack.iter().zip(&z_out).map(|(s, z)| s - z).collect();
        let dinf = frob(&rd) / (1.0 + frob(&self.p.c));
        LmiSolution {
            status,
            y: y_out,
            x: x_out,
            z: z_out,
            primal_objective: pobj,
            dual_objective: dobj,
            primal_infeasibility: pinf,
            dual_infeasibility: dinf,
            relative_gap: (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()),
            iterations: it,
        }
    }

    fn unscale_y(&self, y: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(y.len(), y.iter().zip(&self.f_scale).map(|(v, s)| v * self.c_scale / s))
    }

    fn run(&self, cfg: &SolverConfig, observer: &mut dyn FnMut(&DVector<f64>)) -> LmiSolution {
        let sizes = &self.p.block_sizes;
        let nt: usize = sizes.iter().sum();
        let k = self.f.len();
        let ntf = nt as f64;
        let xi = 10f64.max(ntf.sqrt());
        let eta = 10f64.max(ntf.sqrt());
        let mut x: Vec<DMatrix<f64>> = sizes.iter().map(|&s| DMatrix::identity(s, s) * xi).collect();
        let mut z: Vec<DMatrix<f64>> = sizes.iter().map(|&s| DMatrix::identity(s, s) * eta).collect();
        let mut y = DVector::zeros(k);
        let mut stalls = 0;
        let gram = self.gram();
        // Lowest max(pinf, dinf, gap) seen so far, returned when the iteration fails.
        let mut best = (f64::INFINITY, 0, x.clone(), y.clone(), z.clone());

        for it in 0..=cfg.max_iter {
            let rp = &self.b - self.a_op(&x);
            let ay = self.a_adj(&y);
            let rd: Vec<DMatrix<f64>> = self.c.iter().zip(&ay).zip(&z).map(|((c, a), zz)| c - a - zz).collect();
            let pobj = inner(&self.c, &x);
            let dobj = self.b.dot(&y);
            let mu = inner(&x, &z) / ntf;
            let pinf = rp.norm() / (1.0 + self.b.norm());
            let dinf = frob(&rd) / (1.0 + frob(&self.c));
            let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
            observer(&self.unscale_y(&y));
            if pinf <= cfg.feas_tol && dinf <= cfg.feas_tol && gap <= cfg.gap_tol {
                return self.unscale(SolveStatus::Optimal, it, &x, &y, &z);
            }
            let merit = pinf.max(dinf).max(gap);
            if merit < best.0 {
                if merit < 0.9 * best.0 {
                    best.1 = it;
                }
                best = (merit, best.1, x.clone(), y.clone(), z.clone());
            } else if it >= best.1 + cfg.stall_window {
                return self.unscale(SolveStatus::NumericalTrouble, it, &best.2, &best.3, &best.4);
            }
            // Infeasibility certificates along a diverging path.
            if dobj > cfg.divergence && frob(&rd) * y.norm() <= 1e-6 * dobj {
                let slack_dir: Vec<DMatrix<f64>> = self.a_adj(&y).iter().map(|m| -m / dobj).collect();
                if slack_dir.iter().all(|m| m.nrows() == 0 || crate::linalg::min_eigenvalue(m) >= -1e-8) {
                    return self.unscale(SolveStatus::PrimalInfeasible, it, &x, &y, &z);
                }
            }
            if -pobj > cfg.divergence && self.a_op(&x).norm() <= 1e-6 * (-pobj) {
                return self.unscale(SolveStatus::DualInfeasible, it, &x, &y, &z);
            }
            if it == cfg.max_iter {
                break;
            }

            let Some(nt) = x.iter().zip(&z).map(|(xb, zb)| NtScaling::new(xb, zb)).collect::<Option<Vec<_>>>() else {
                return self.unscale(SolveStatus::NumericalTrouble, it, &best.2, &best.3, &best.4);
            };

            // Schur complement M_jk = <F_j, W F_k W>.
            let mut m = DMatrix::zeros(k, k);
            for kk in 0..k {
                let w: Vec<(usize, DMatrix<f64>)> =
                    self.f[kk].iter().map(|(blk, fk)| (*blk, &nt[*blk].w * fk * &nt[*blk].w)).collect();
                for j in 0..=kk {
                    let mut s = 0.0;
                    for (bj, fj) in &self.f[j] {
                        for (bk, wk) in &w {
                            if bj == bk {
                                s += fj.dot(wk);
                            }
                        }
                    }
                    m[(j, kk)] = s;
                    m[(kk, j)] = s;
                }
            }
            let Some(chol) = factor_schur(m.clone()) else {
                return self.unscale(SolveStatus::NumericalTrouble, it, &best.2, &best.3, &best.4);
            };

            let w_rd_w: Vec<DMatrix<f64>> = nt.iter().zip(&rd).map(|(s, r)| &s.w * r * &s.w).collect();
            let base_rhs = &rp + self.a_op(&w_rd_w);

            // Given the complementarity target rc, dX = rc - W dZ W.
            let direction = |rc: &[DMatrix<f64>]| {
                let rhs = &base_rhs - self.a_op(rc);
                let mut dy = chol.solve(&rhs);
                for _ in 0..2 {
                    let r = &rhs - &m * &dy;
                    dy += chol.solve(&r);
                }
                let ady = self.a_adj(&dy);
                let dz: Vec<DMatrix<f64>> = rd.iter().zip(&ady).map(|(r, a)| symmetrize(&(r - a))).collect();
                let mut dx: Vec<DMatrix<f64>> =
                    (0..sizes.len()).map(|i| symmetrize(&(&rc[i] - &nt[i].w * &dz[i] * &nt[i].w))).collect();
                // Remove the drift in A(dX) = rp left by round-off in the Schur solve.
                if let Some(g) = &gram {
                    let fix = self.a_adj(&g.solve(&(&rp - self.a_op(&dx))));
                    for (d, f) in dx.iter_mut().zip(&fix) {
                        *d += f;
                    }
                }
                (dx, dy, dz)
            };

            let rc_pred: Vec<DMatrix<f64>> = nt.iter().map(|s| s.target(0.0, None)).collect();
            let (dxa, _dya, dza) = direction(&rc_pred);
            let (ap, ad) = (max_step(&x, &dxa).min(1.0), max_step(&z, &dza).min(1.0));
            let xa: Vec<DMatrix<f64>> = x.iter().zip(&dxa).map(|(a, d)| a + d * ap).collect();
            let za: Vec<DMatrix<f64>> = z.iter().zip(&dza).map(|(a, d)| a + d * ad).collect();
            let ratio = (inner(&xa, &za) / (mu * ntf)).clamp(0.0, 1.0);
            let sigma = ratio.powi(3);

            let rc: Vec<DMatrix<f64>> =
                (0..sizes.len()).map(|i| nt[i].target(sigma * mu, Some((&dxa[i], &dza[i])))).collect();
            let (dx, dy, dz) = direction(&rc);
            let (ap, ad) = (max_step(&x, &dx), max_step(&z, &dz));
            let gamma = cfg.step_fraction.max(0.9 + 0.09 * ap.min(ad).min(1.0)).min(0.99);
            let ap = (gamma * ap).min(1.0);
            let ad = (gamma * ad).min(1.0);
            if ap.max(ad) < 1e-10 {
                stalls += 1;
                if stalls >= 3 {
                    return self.unscale(SolveStatus::NumericalTrouble, it, &best.2, &best.3, &best.4);
                }
            }
            for i in 0..sizes.len() {
                x[i] = symmetrize(&(&x[i] + &dx[i] * ap));
                z[i] = symmetrize(&(&z[i] + &dz[i] * ad));
            }
            y += dy * ad;
        }
        self.unscale(SolveStatus::MaxIter, cfg.max_iter, &best.2, &best.3, &best.4)
    }
}

/// Nesterov-Todd scaling of one block: `W Z W = X`, `W = G G^T`, and
/// `G^T Z G = G^{-1} X G^{-T} = diag(lambda)`.
struct NtScaling {
    g: DMatrix<f64>,
    g_inv: DMatrix<f64>,
    w: DMatrix<f64>,
    lambda: DVector<f64>,
}

impl NtScaling {
    fn new(x: &DMatrix<f64>, z: &DMatrix<f64>) -> Option<Self> {
        let n = x.nrows();
        if n == 0 {
            let e = DMatrix::zeros(0, 0);
            return Some(Self { g: e.clone(), g_inv: e.clone(), w: e, lambda: DVector::zeros(0) });
        }
        let lx = Cholesky::new(x.clone())?.unpack();
        let lz = Cholesky::new(z.clone())?.unpack();
        let f = crate::linalg::svd(&(lz.transpose() * &lx))?;
        let (v, lambda) = (f.v, f.s);
        if lambda.min() <= 0.0 {
            return None;
        }
        let g = &lx * &v * DMatrix::from_diagonal(&lambda.map(|l| 1.0 / l.sqrt()));
        let lx_inv = lx.solve_lower_triangular(&DMatrix::identity(n, n))?;
        let g_inv = DMatrix::from_diagonal(&lambda.map(f64::sqrt)) * v.transpose() * lx_inv;
        let w = symmetrize(&(&g * g.transpose()));
        Some(Self { g, g_inv, w, lambda })
    }

    /// `G Y G^T` where `Y` solves `Lambda Y + Y Lambda = 2 R` for the scaled
    /// complementarity residual `R = sigma_mu I - Lambda^2 - sym(D_X D_Z)`.
    fn target(&self, sigma_mu: f64, corr: Option<(&DMatrix<f64>, &DMatrix<f64>)>) -> DMatrix<f64> {
        let n = self.lambda.len();
        let mut r = DMatrix::from_diagonal(&self.lambda.map(|l| sigma_mu - l * l));
        if let Some((dx, dz)) = corr {
            let sx = &self.g_inv * dx * self.g_inv.transpose();
            let sz = self.g.transpose() * dz * &self.g;
            r -= symmetrize(&(sx * sz));
        }
        let y = DMatrix::from_fn(n, n, |i, j| 2.0 * r[(i, j)] / (self.lambda[i] + self.lambda[j]));
        symmetrize(&(&self.g * y * self.g.transpose()))
    }
}

fn factor_schur(m: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    if m.nrows() == 0 {
        return Cholesky::new(m);
    }
    if let Some(c) = Cholesky::new(m.clone()) {
        return Some(c);
    }
    let scale = m.diagonal().iter().copied().fold(0.0, f64::max).max(1e-300);
    let mut reg = 1e-14 * scale;
    for _ in 0..6 {
        let mut mr = m.clone();
        for i in 0..mr.nrows() {
            mr[(i, i)] += reg;
        }
        if let Some(c) = Cholesky::new(mr) {
            return Some(c);
        }
        reg *= 100.0;
    }
    None
}
