//! Seeded generators for desk-scale test instances.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dual::QuadraticObjective;
use crate::error::{Error, Result};
use crate::model::{Domain, FactoredTerm, PhysicsProblem};

pub const MAX_SIZE: usize = 64;
pub const MAX_TERMS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstanceKind {
    /// Diagonal terms with disjoint supports.
    MultiScenarioDiag,
    /// Rank-one terms `u_i v_i^T` with generic `u_i`.
    RankOneLoads,
    /// Tridiagonal 1-D Helmholtz-like operator with single-cell design terms.
    Helmholtz1d,
}

impl InstanceKind {
    pub const ALL: [InstanceKind; 3] =
        [InstanceKind::MultiScenarioDiag, InstanceKind::RankOneLoads, InstanceKind::Helmholtz1d];
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub problem: PhysicsProblem,
    pub objective: QuadraticObjective,
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| scale * uniform(rng, -1.0, 1.0))
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| scale * uniform(rng, -1.0, 1.0))
}

/// A strictly convex objective `z^T Q z + 2 q^T z + r`.
fn convex_objective(rng: &mut ChaCha8Rng, n: usize) -> QuadraticObjective {
    let l = random_matrix(rng, n, n, 1.0);
    let q = &l * l.transpose() / n as f64 + DMatrix::identity(n, n) * 0.5;
    QuadraticObjective::new(q, random_vector(rng, n, 0.5), uniform(rng, -0.5, 0.5))
}

fn selector(m: usize, rows: &[usize]) -> DMatrix<f64> {
    let mut u = DMatrix::zeros(m, rows.len());
    for (c, &r) in rows.iter().enumerate() {
        u[(r, c)] = 1.0;
    }
    u
}

/// Deterministic in `(kind, m, d, seed, domain)`. Every instance is square
/// (`n = m`) and satisfies the full-column-rank condition.
pub fn generate(kind: InstanceKind, m: usize, d: usize, seed: u64, domain: Domain) -> Result<Instance> {
    if m == 0 || m > MAX_SIZE {
        return Err(Error::Guard { what: "m", value: m, limit: MAX_SIZE });
    }
    if d == 0 || d > MAX_TERMS {
        return Err(Error::Guard { what: "d", value: d, limit: MAX_TERMS });
    }
    if d > m {
        return Err(Error::Guard { what: "d", value: d, limit: m });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = m;
    let (a0, terms, b, objective) = match kind {
        InstanceKind::MultiScenarioDiag => {
            let mut rows: Vec<usize> = (0..m).collect();
            rows.shuffle(&mut rng);
            let total = rng.random_range(d..=m);
            // split the first `total` rows into d nonempty groups
            let mut cuts: Vec<usize> = (1..total).collect();
            cuts.shuffle(&mut rng);
            let mut cuts: Vec<usize> = cuts.into_iter().take(d - 1).collect();
            cuts.sort_unstable();
            cuts.insert(0, 0);
            cuts.push(total);
            let terms = cuts
                .windows(2)
                .map(|w| {
                    let sel = selector(m, &rows[w[0]..w[1]]);
                    let scale = DVector::from_fn(w[1] - w[0], |_, _| {
                        let s = uniform(&mut rng, 0.3, 1.0);
                        if rng.random_bool(0.5) {
                            s
                        } else {
                            -s
                        }
                    });
                    let v = &sel * DMatrix::from_diagonal(&scale);
                    FactoredTerm::new(sel, v)
                })
                .collect();
            let diag = DVector::from_fn(m, |_, _| uniform(&mut rng, 2.0, 3.0));
            let a0 = DMatrix::from_diagonal(&diag) + random_matrix(&mut rng, m, m, 0.3 / (m as f64).sqrt());
            (a0, terms, random_vector(&mut rng, m, 1.0), convex_objective(&mut rng, n))
        }
        InstanceKind::RankOneLoads => {
            let a0 = DMatrix::identity(m, m) * 3.0 + random_matrix(&mut rng, m, m, 0.3 / (m as f64).sqrt());
            let terms = (0..d)
                .map(|_| {
                    let u = random_vector(&mut rng, m, 1.0).normalize();
                    let v = random_vector(&mut rng, n, 1.0).normalize() * uniform(&mut rng, 0.3, 1.0);
                    FactoredTerm::rank_one(u, v)
                })
                .collect();
            (a0, terms, random_vector(&mut rng, m, 1.0), convex_objective(&mut rng, n))
        }
        InstanceKind::Helmholtz1d => {
            let kappa = uniform(&mut rng, 0.5, 1.5);
            let a0 = DMatrix::from_fn(m, m, |i, j| match i.abs_diff(j) {
                0 => 2.0 + kappa,
                1 => -1.0,
                _ => 0.0,
            });
            let mut cells: Vec<usize> = (0..m).collect();
            cells.shuffle(&mut rng);
            let terms = cells[..d]
                .iter()
                .map(|&c| {
                    let delta = uniform(&mut rng, 0.2, 0.45);
                    let sel = selector(m, &[c]);
                    FactoredTerm::new(sel.clone(), sel * delta)
                })
                .collect();
            let mut b = DVector::zeros(m);
            b[0] = 1.0;
            let target = random_vector(&mut rng, n, 0.3);
            let objective = QuadraticObjective::new(DMatrix::identity(n, n), -&target, target.norm_squared());
            (a0, terms, b, objective)
        }
    };
    Ok(Instance { problem: PhysicsProblem::new(a0, terms, b, domain), objective })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorization::stack_terms;
    use crate::projectors::multi_scenario;

    #[test]
    fn generated_instances_are_valid_and_full_rank() {
        for kind in InstanceKind::ALL {
            for seed in 0..10 {
                let inst = generate(kind, 6, 3, seed, Domain::Interval).unwrap();
                assert!(inst.problem.validate().is_empty(), "{kind:?} {seed}");
                assert!(stack_terms(&inst.problem.terms).unwrap().full_column_rank);
            }
        }
    }

    #[test]
    fn multi_scenario_kind_has_selector_form() {
        let inst = generate(InstanceKind::MultiScenarioDiag, 4, 2, 7, Domain::Interval).unwrap();
        assert!(multi_scenario(&inst.problem.terms).unwrap().is_verified());
    }

    #[test]
    fn rank_one_loads_stack_is_full_rank() {
        let inst = generate(InstanceKind::RankOneLoads, 5, 3, 1, Domain::Interval).unwrap();
        let s = stack_terms(&inst.problem.terms).unwrap();
        assert_eq!(s.u.shape(), (5, 3));
        assert!(s.full_column_rank);
    }

    #[test]
    fn guards() {
        assert!(generate(InstanceKind::RankOneLoads, 65, 2, 0, Domain::Interval).is_err());
        assert!(generate(InstanceKind::RankOneLoads, 4, 9, 0, Domain::Interval).is_err());
        assert!(generate(InstanceKind::RankOneLoads, 2, 3, 0, Domain::Interval).is_err());
    }

    #[test]
    fn deterministic_in_seed() {
        let a = generate(InstanceKind::Helmholtz1d, 8, 3, 42, Domain::Boolean).unwrap();
        let b = generate(InstanceKind::Helmholtz1d, 8, 3, 42, Domain::Boolean).unwrap();
        assert_eq!(a, b);
    }
}
