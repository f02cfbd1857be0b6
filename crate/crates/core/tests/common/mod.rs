#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use physbound::dual::{DualMode, DualPoint, QuadraticObjective};
use physbound::factorization::stack_terms;
use physbound::generate::{generate, Instance, InstanceKind};
use physbound::model::{Domain, FactoredTerm, PhysicsProblem};
use physbound::projectors::{construct_inverse, ProjectorSet};
use rand::Rng;

pub fn with_projectors(inst: &Instance) -> ProjectorSet {
    let p = &inst.problem;
    construct_inverse(&stack_terms(&p.terms).unwrap(), &p.terms).unwrap()
}

/// Instance `i` of a deterministic mixed-kind family.
pub fn mixed(i: u64, max_m: usize, max_d: usize, domain: Domain) -> Instance {
    let kind = InstanceKind::ALL[(i % 3) as usize];
    let m = 2 + (i as usize * 7 % (max_m - 1));
    let d = 1 + (i as usize % max_d).min(m - 1);
    generate(kind, m, d, 1000 + i, domain).unwrap()
}

/// `A_0 = 1`, `A_1 = 0.5`, `b = 1`, `f(z) = z^2`.
pub fn scalar_instance(domain: Domain) -> (PhysicsProblem, ProjectorSet, QuadraticObjective) {
    let p = PhysicsProblem::new(
        DMatrix::from_element(1, 1, 1.0),
        vec![FactoredTerm::rank_one(DVector::from_element(1, 1.0), DVector::from_element(1, 0.5))],
        DVector::from_element(1, 1.0),
        domain,
    );
    let ps = construct_inverse(&stack_terms(&p.terms).unwrap(), &p.terms).unwrap();
    (p, ps, QuadraticObjective::squared_norm(1))
}

pub fn random_symmetric(rng: &mut impl Rng, n: usize, scale: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-scale..scale));
    (&a + a.transpose()) * 0.5
}

/// Random dual point; PSD blocks in interval mode.
pub fn random_dual_point(rng: &mut impl Rng, ps: &ProjectorSet, mode: DualMode, scale: f64) -> DualPoint {
    let mut dp = DualPoint::zero(ps, mode);
    for n in dp.n_blocks.iter_mut() {
        let k = n.nrows();
        *n = match mode {
            DualMode::BooleanSymmetric => random_symmetric(rng, k, scale),
            DualMode::IntervalPsd => {
                let g = DMatrix::from_fn(k, k, |_, _| rng.random_range(-scale..scale));
                &g * g.transpose()
            }
        };
    }
    dp.nu = DVector::from_fn(dp.nu.len(), |_, _| rng.random_range(-scale..scale));
    dp
}
