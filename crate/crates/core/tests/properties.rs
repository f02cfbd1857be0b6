mod common;

use common::{random_dual_point, with_projectors};
use nalgebra::{DMatrix, DVector};
use physbound::dual::{eval_dual, DualMode, DualPoint};
use physbound::factorization::{factor_term, stack_terms};
use physbound::generate::{generate, Instance, InstanceKind};
use physbound::model::{assemble_physics, solve_field, Domain};
use physbound::oracle::{brute_force_boolean, check_weak_duality, grid_search_interval, sign_pattern};
use physbound::projectors::{ProjectorMethod, ProjectorSet};
use physbound::quadratic_sets::{collinearity_check, domain_violation, s_violation, term_vectors};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn instance_strategy(max_m: usize, max_d: usize) -> impl Strategy<Value = Instance> {
    (0usize..3, 2..=max_m, 1..=max_d, any::<u64>(), any::<bool>()).prop_map(|(k, m, d, seed, boolean)| {
        let domain = if boolean { Domain::Boolean } else { Domain::Interval };
        generate(InstanceKind::ALL[k], m, d.min(m - 1), seed, domain).unwrap()
    })
}

fn theta_in(rng: &mut ChaCha8Rng, d: usize, domain: Domain) -> Vec<f64> {
    (0..d)
        .map(|_| match domain {
            Domain::Interval => rng.random_range(-1.0..=1.0),
            Domain::Boolean => {
                if rng.random_bool(0.5) {
                    1.0
                } else {
                    -1.0
                }
            }
        })
        .collect()
}

proptest! {
    #[test]
    fn assembly_is_affine_in_theta(inst in instance_strategy(10, 4), seed in any::<u64>()) {
        let p = &inst.problem;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t1 = theta_in(&mut rng, p.d(), Domain::Interval);
        let t2 = theta_in(&mut rng, p.d(), Domain::Interval);
        let lambda: f64 = rng.random_range(0.0..=1.0);
        let mix: Vec<f64> = t1.iter().zip(&t2).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
        let lhs = assemble_physics(p, &mix).unwrap();
        let rhs = assemble_physics(p, &t1).unwrap() * lambda + assemble_physics(p, &t2).unwrap() * (1.0 - lambda);
        prop_assert!((lhs - rhs).amax() <= 1e-12);
    }

    #[test]
    fn solved_fields_reproduce_the_excitation(inst in instance_strategy(10, 4), seed in any::<u64>()) {
        let p = &inst.problem;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = theta_in(&mut rng, p.d(), p.domain);
        let sol = solve_field(p, &theta).unwrap();
        prop_assume!(sol.solvable);
        let a = assemble_physics(p, &theta).unwrap();
        prop_assert!((&a * &sol.z - &p.b).norm() <= 1e-10 * (1.0 + p.b.norm()));
    }

    #[test]
    fn factoring_reproduces_the_product(m in 1usize..8, n in 1usize..8, r in 1usize..4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = r.min(m).min(n);
        let u = DMatrix::from_fn(m, r, |_, _| rng.random_range(-1.0..1.0));
        let v = DMatrix::from_fn(n, r, |_, _| rng.random_range(-1.0..1.0));
        let a = &u * v.transpose();
        prop_assume!(a.amax() > 1e-6);
        let t = factor_term(&a, 1e-10).unwrap();
        prop_assert!((t.dense() - &a).amax() <= 1e-12 * (1.0 + a.amax()));
        prop_assert!(t.width() <= r);
    }

    #[test]
    fn stacked_basis_spans_the_raw_blocks(inst in instance_strategy(12, 5)) {
        let terms = &inst.problem.terms;
        let s = stack_terms(terms).unwrap();
        let raw = DMatrix::from_fn(s.u.nrows(), terms.iter().map(|t| t.width()).sum(), |i, j| {
            let mut j = j;
            for t in terms {
                if j < t.width() {
                    return t.u[(i, j)];
                }
                j -= t.width();
            }
            unreachable!()
        });
        // Mutual projection residuals through least squares on both sides.
        let proj = |basis: &DMatrix<f64>, x: &DMatrix<f64>| {
            let pinv = basis.clone().pseudo_inverse(1e-12).unwrap();
            (basis * (pinv * x) - x).amax()
        };
        prop_assert!(proj(&s.u, &raw) <= 1e-10);
        prop_assert!(proj(&raw, &s.u) <= 1e-10);
    }

    #[test]
    fn inverse_projectors_invert_the_completed_basis(inst in instance_strategy(12, 5)) {
        let ps = with_projectors(&inst);
        prop_assert_eq!(ps.method, ProjectorMethod::InverseCompletion);
        let p_stack = DMatrix::from_fn(inst.problem.m(), inst.problem.m(), |i, j| {
            let mut i = i;
            for p in &ps.p_blocks {
                if i < p.nrows() {
                    return p[(i, j)];
                }
                i -= p.nrows();
            }
            unreachable!()
        });
        let m_stack = DMatrix::from_fn(inst.problem.m(), inst.problem.m(), |i, j| {
            let mut j = j;
            for mm in &ps.m_blocks {
                if j < mm.ncols() {
                    return mm[(i, j)];
                }
                j -= mm.ncols();
            }
            unreachable!()
        });
        let eye = DMatrix::<f64>::identity(inst.problem.m(), inst.problem.m());
        prop_assert!((p_stack * m_stack - eye).amax() <= 1e-10);
    }

    #[test]
    fn projectors_pick_out_single_parameters(inst in instance_strategy(10, 4), seed in any::<u64>()) {
        let p = &inst.problem;
        let ps = with_projectors(&inst);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = theta_in(&mut rng, p.d(), p.domain);
        let z = solve_field(p, &theta).unwrap().z;
        let a = assemble_physics(p, &theta).unwrap();
        let tol = 1e-9 * (1.0 + z.norm());
        let base = &p.a0 * &z;
        prop_assert!((ps.p(0) * (&a * &z) - ps.p(0) * &base).norm() <= tol);
        for (i, t) in p.terms.iter().enumerate() {
            let own = &base + t.dense() * &z * theta[i];
            let pi = ps.p(i + 1);
            prop_assert!((pi * (&a * &z) - pi * own).norm() <= tol);
        }
    }

    #[test]
    fn set_membership_survives_projector_changes(inst in instance_strategy(8, 3), seed in any::<u64>()) {
        let p = &inst.problem;
        let ps = with_projectors(&inst);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // G_i = I + E with ||E||_2 <= 0.3, so G_i is invertible and well conditioned.
        let mut p_blocks = Vec::new();
        let mut m_blocks = Vec::new();
        for (pb, mb) in ps.p_blocks.iter().zip(&ps.m_blocks) {
            let k = pb.nrows();
            let g = DMatrix::<f64>::identity(k, k) + DMatrix::from_fn(k, k, |_, _| rng.random_range(-0.3..0.3) / k as f64);
            let g_inv = g.clone().try_inverse().unwrap();
            p_blocks.push(&g * pb);
            m_blocks.push(mb * g_inv);
        }
        let other = ProjectorSet::from_blocks(p_blocks, m_blocks, ProjectorMethod::Supplied, &p.terms).unwrap();
        prop_assert!(other.is_verified());

        let feasible = solve_field(p, &theta_in(&mut rng, p.d(), p.domain)).unwrap();
        prop_assume!(feasible.solvable);
        let perturbed = &feasible.z + DVector::from_fn(p.n(), |_, _| rng.random_range(-0.5..0.5));
        for z in [&feasible.z, &perturbed] {
            let a = domain_violation(z, p, &ps).unwrap();
            let b = domain_violation(z, p, &other).unwrap();
            // Compare the classification only where it is not borderline.
            let margin = |v: f64, tol: f64| v <= tol || v > 1e3 * tol;
            if a.per_term.iter().chain(&b.per_term).all(|&v| margin(v, a.tolerance.max(b.tolerance))) {
                prop_assert_eq!(a.is_zero(), b.is_zero());
            }
        }
        prop_assert!(domain_violation(&feasible.z, p, &other).unwrap().is_zero());
    }

    #[test]
    fn set_violation_bounds_sampled_psd_multipliers(inst in instance_strategy(8, 3), seed in any::<u64>()) {
        let p = &inst.problem;
        let ps = with_projectors(&inst);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = DVector::from_fn(p.n(), |_, _| rng.random_range(-1.0..1.0));
        let v = s_violation(&z, p, &ps).unwrap();
        for ((x, y), worst) in term_vectors(&z, p, &ps).iter().zip(&v.per_term) {
            let k = x.len();
            let gap = x * x.transpose() - y * y.transpose();
            let mut sampled: f64 = 0.0;
            for r in 1..=3 {
                for _ in 0..30 {
                    // Random PSD N of rank r with unit trace.
                    let g = DMatrix::from_fn(k, r.min(k), |_, _| rng.random_range(-1.0..1.0));
                    let n = &g * g.transpose();
                    let n = &n / n.trace();
                    sampled = sampled.max((&gap * n).trace());
                }
            }
            prop_assert!(sampled <= worst + 1e-12 * (1.0 + worst));
            // The identity and the top eigenvector are admissible multipliers too.
            prop_assert!(gap.trace() / k as f64 <= worst + 1e-12);
            let top = gap.symmetric_eigen().eigenvalues.max().max(0.0);
            prop_assert!((top - worst).abs() <= 1e-10 * (1.0 + top));
        }
    }

    #[test]
    fn collinearity_verdict_is_scale_invariant(
        y in prop::collection::vec(-1.0f64..1.0, 1..6),
        alpha in -2.0f64..2.0,
        noise in 0usize..2,
        c in prop_oneof![-100.0f64..-0.01, 0.01f64..100.0],
    ) {
        let y = DVector::from_vec(y);
        let mut x = &y * alpha;
        if noise == 1 && y.len() > 1 {
            x[0] += 0.5;
        }
        let a = collinearity_check(&x, &y).unwrap();
        let b = collinearity_check(&(&x * c), &(&y * c)).unwrap();
        prop_assert_eq!(a.collinear, b.collinear);
        prop_assert_eq!(a.admissible(), b.admissible());
        if let (Some(p), Some(q)) = (a.alpha, b.alpha) {
            prop_assert!((p - q).abs() <= 1e-9 * (1.0 + p.abs()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_feasible_dual_point_is_a_lower_bound(inst in instance_strategy(6, 3), seed in any::<u64>()) {
        let (p, obj) = (&inst.problem, &inst.objective);
        let ps = with_projectors(&inst);
        let p_star = match p.domain {
            Domain::Boolean => brute_force_boolean(p, obj).unwrap().p_star,
            Domain::Interval => grid_search_interval(p, obj, 21).unwrap().p_star,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for k in 0..50 {
            let dp = random_dual_point(&mut rng, &ps, DualMode::from(p.domain), [0.05, 0.3, 1.5][k % 3]);
            prop_assert!(dp.is_feasible());
            let g = eval_dual(&dp, p, &ps, obj).unwrap();
            prop_assert!(check_weak_duality(g, p_star).pass, "g = {g}, p* = {p_star}");
        }
    }

    #[test]
    fn dual_function_is_concave(inst in instance_strategy(6, 3), seed in any::<u64>(), lambda in 0.0f64..=1.0) {
        let (p, obj) = (&inst.problem, &inst.objective);
        let ps = with_projectors(&inst);
        let mode = DualMode::from(p.domain);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..10 {
            let a = random_dual_point(&mut rng, &ps, mode, 0.3);
            let b = random_dual_point(&mut rng, &ps, mode, 0.3);
            let mid = DualPoint::lerp(&a, &b, lambda);
            let (ga, gb, gm) = (
                eval_dual(&a, p, &ps, obj).unwrap(),
                eval_dual(&b, p, &ps, obj).unwrap(),
                eval_dual(&mid, p, &ps, obj).unwrap(),
            );
            if ga.is_finite() && gb.is_finite() && gm.is_finite() {
                prop_assert!(gm >= lambda * ga + (1.0 - lambda) * gb - 1e-8, "{gm} < mix of {ga}, {gb}");
            }
        }
    }

    #[test]
    fn enumeration_does_not_depend_on_order(inst in instance_strategy(6, 4)) {
        let (p, obj) = (&inst.problem, &inst.objective);
        let fast = brute_force_boolean(p, obj).unwrap();
        let d = p.d();
        let reversed = (0..1u64 << d)
            .rev()
            .filter_map(|k| {
                let sol = solve_field(p, &sign_pattern(k, d)).unwrap();
                sol.solvable.then(|| obj.eval(&sol.z))
            })
            .fold(f64::INFINITY, f64::min);
        prop_assert_eq!(fast.p_star, reversed);
        prop_assert_eq!(fast.evaluated_count, 1usize << d);
    }
}
