mod common;

use nalgebra::DVector;
use proptest::prelude::*;
use scenopt::lp::{solve_lp, LpStatus, SimplexSolver};
use scenopt::rmpc::{
    build_prediction_operators, inventory, simulate, solve_rmpc, CostWeights, MpcConfig, MpcProblem,
};
use scenopt::rng::StreamRng;
use scenopt::sample_complexity::{
    binomial_tail, min_sample_size_exact, min_sample_size_explicit, SampleSizeQuery,
};
use scenopt::scenario::{
    build_scenario_lp, evaluate_constraint, sample_multisample, AffineConstraint, AffineFn,
    BoxBracket, ConstraintStructure, DomainBox, QuadraticConstraint, RowTag, ScenarioLp,
    UncertaintyDist,
};
use scenopt::support::{preset_family, support_set, support_set_exhaustive, Preset};
use scenopt::validation::{estimate_with_sizes, ValidationConfig};

fn affine_fn(rng: &mut StreamRng, n: usize) -> AffineFn {
    AffineFn::new((0..n).map(|_| rng.normal()).collect(), rng.normal())
}

fn random_affine(rng: &mut StreamRng) -> AffineConstraint {
    let n = 1 + (rng.next_u64() % 4) as usize;
    let d = 1 + (rng.next_u64() % 3) as usize;
    let r = 1 + (rng.next_u64() % 3) as usize;
    let g = (0..r)
        .map(|_| (0..d).map(|_| affine_fn(rng, n)).collect())
        .collect();
    let h = (0..r).map(|_| affine_fn(rng, n)).collect();
    AffineConstraint::new(n, d, g, h).unwrap()
}

fn lp_for(structure: &ConstraintStructure, n_samples: usize, seed: u64) -> ScenarioLp {
    let dims = structure.dims();
    let dist = UncertaintyDist::uniform_cube(-1.0, 1.0, dims.d).unwrap();
    let omega = sample_multisample(&dist, n_samples, seed);
    let cost = vec![1.0; dims.n];
    build_scenario_lp(
        structure,
        &BoxBracket::one_sided(),
        &omega,
        &cost,
        &DomainBox::symmetric(dims.n, 10.0),
    )
    .unwrap()
}

fn random_system(seed: u64) -> MpcProblem {
    let mut rng = StreamRng::new(seed);
    let nx = 1 + (rng.next_u64() % 3) as usize;
    let nu = 1 + (rng.next_u64() % 2) as usize;
    let nd = 1 + (rng.next_u64() % 2) as usize;
    let t = 2 + (rng.next_u64() % 3) as usize;
    let mut mat = |r: usize, c: usize, s: f64| -> Vec<Vec<f64>> {
        (0..r)
            .map(|_| (0..c).map(|_| s * rng.normal()).collect())
            .collect()
    };
    let (a, b, e) = (mat(nx, nx, 0.5), mat(nx, nu, 1.0), mat(nx, nd, 0.3));
    let f_mat = mat(1, nx, 1.0);
    MpcProblem::from_config(&MpcConfig {
        a,
        b,
        e,
        t,
        x0: vec![0.5; nx],
        u_lo: vec![-5.0; nu],
        u_hi: vec![5.0; nu],
        f_mat,
        f: vec![3.0],
        epsilon: 0.2,
        beta: None,
        delta_lo: vec![-1.0; nd],
        delta_hi: vec![1.0; nd],
        cost: CostWeights {
            state: vec![1.0; nx],
            terminal: vec![1.0; nx],
            input: vec![0.1; nu],
            input_stage_weighted: false,
        },
        seed: None,
        w: None,
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sample_size_is_minimal_and_monotone(
        eps in 0.01f64..0.6,
        beta in 1e-8f64..0.6,
        zeta in 1u64..40,
    ) {
        let q = SampleSizeQuery::new(eps, beta, zeta).unwrap();
        let n = min_sample_size_exact(&q);
        prop_assert!(n >= zeta);
        prop_assert!(binomial_tail(n, zeta, eps).unwrap() <= beta * (1.0 + 1e-12));
        if n > zeta {
            prop_assert!(binomial_tail(n - 1, zeta, eps).unwrap() > beta);
        }
        prop_assert!(min_sample_size_explicit(&q) >= n);
        let looser_eps = SampleSizeQuery::new((eps * 1.3).min(0.99), beta, zeta).unwrap();
        let looser_beta = SampleSizeQuery::new(eps, (beta * 2.0).min(0.99), zeta).unwrap();
        let more_zeta = SampleSizeQuery::new(eps, beta, zeta + 1).unwrap();
        prop_assert!(min_sample_size_exact(&looser_eps) <= n);
        prop_assert!(min_sample_size_exact(&looser_beta) <= n);
        prop_assert!(min_sample_size_exact(&more_zeta) > n);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn affine_rows_match_their_separable_form(seed in any::<u64>(), n_samples in 0usize..20) {
        let c = random_affine(&mut StreamRng::new(seed));
        let direct = lp_for(&c.clone().into(), n_samples, seed ^ 1);
        let lifted = lp_for(&c.to_separable().into(), n_samples, seed ^ 1);
        prop_assert_eq!(direct.all_rows(), lifted.all_rows());
    }

    #[test]
    fn quadratic_rows_ignore_transposition(seed in any::<u64>()) {
        let mut rng = StreamRng::new(seed);
        let n = 1 + (rng.next_u64() % 3) as usize;
        let d = 1 + (rng.next_u64() % 3) as usize;
        let r = 1 + (rng.next_u64() % 2) as usize;
        let a: Vec<Vec<Vec<AffineFn>>> = (0..r)
            .map(|_| (0..d).map(|_| (0..d).map(|_| affine_fn(&mut rng, n)).collect()).collect())
            .collect();
        let at: Vec<Vec<Vec<AffineFn>>> = a
            .iter()
            .map(|ai| (0..d).map(|p| (0..d).map(|q| ai[q][p].clone()).collect()).collect())
            .collect();
        let b: Vec<Vec<AffineFn>> = (0..r).map(|_| (0..d).map(|_| affine_fn(&mut rng, n)).collect()).collect();
        let c: Vec<AffineFn> = (0..r).map(|_| affine_fn(&mut rng, n)).collect();
        let q1 = QuadraticConstraint::new(n, d, a, b.clone(), c.clone()).unwrap();
        let q2 = QuadraticConstraint::new(n, d, at, b, c).unwrap();
        let (l1, l2) = (lp_for(&q1.into(), 8, seed), lp_for(&q2.into(), 8, seed));
        for (x, y) in l1.all_rows().iter().zip(l2.all_rows()) {
            prop_assert!((x.rhs - y.rhs).abs() <= 1e-12 * (1.0 + x.rhs.abs()));
            for (p, q) in x.coeffs.iter().zip(&y.coeffs) {
                prop_assert!((p - q).abs() <= 1e-12 * (1.0 + p.abs()));
            }
        }
    }

    #[test]
    fn scenario_optimum_satisfies_every_sample(preset in 0usize..7, seed in any::<u64>()) {
        let p = Preset::ALL[preset];
        let fam = preset_family(p, p.default_dims(), seed % 1000).unwrap();
        let dist = &fam.dist;
        let omega = sample_multisample(dist, 30, seed);
        let lp = build_scenario_lp(&fam.structure, &fam.bracket, &omega, &fam.cost, &fam.domain).unwrap();
        let sol = solve_lp(&lp).unwrap();
        prop_assert_eq!(sol.status, LpStatus::Optimal);
        for delta in &omega.samples {
            let margin = evaluate_constraint(&fam.structure, &fam.bracket, &sol.x, delta).unwrap();
            prop_assert!(margin <= 1e-6, "margin {}", margin);
        }
    }

    #[test]
    fn lp_agrees_with_vertex_enumeration(seed in any::<u64>()) {
        let lp = common::random_lp(&mut StreamRng::new(seed));
        let sol = solve_lp(&lp).unwrap();
        prop_assert_eq!(&sol, &solve_lp(&lp).unwrap());
        match common::vertex_enumeration(&lp) {
            Some(best) => {
                prop_assert_eq!(sol.status, LpStatus::Optimal);
                prop_assert!((sol.objective - best).abs() <= 1e-7 * (1.0 + best.abs()));
                prop_assert!(lp.max_residual(&sol.x) <= 1e-9 * 10.0);
            }
            None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
        }
    }

    #[test]
    fn slack_row_removal_keeps_optimum(seed in any::<u64>()) {
        let lp = common::random_lp(&mut StreamRng::new(seed));
        let sol = solve_lp(&lp).unwrap();
        prop_assume!(sol.is_optimal());
        for j in lp.sample_indices() {
            let slack = lp.rows.iter().filter(|r| r.tag == RowTag::Sample(j)).all(|r| {
                r.coeffs.iter().zip(&sol.x).map(|(a, b)| a * b).sum::<f64>() < r.rhs - 1e-6
            });
            if slack {
                let reduced = solve_lp(&lp.without_sample(j)).unwrap();
                prop_assert!((reduced.objective - sol.objective).abs() <= 1e-9 * (1.0 + sol.objective.abs()));
                for (a, b) in reduced.x.iter().zip(&sol.x) {
                    prop_assert!((a - b).abs() <= 1e-7 * (1.0 + b.abs()), "x moved: {:?} vs {:?}", reduced.x, sol.x);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn support_sets_respect_bounds(preset in 0usize..7, seed in any::<u64>()) {
        let p = Preset::ALL[preset];
        let fam = preset_family(p, p.default_dims(), seed % 1000).unwrap();
        let lp = fam.build_lp(40, seed).unwrap();
        let solver = SimplexSolver::default();
        let screened = support_set(&lp, &solver).unwrap();
        let full = support_set_exhaustive(&lp, &solver).unwrap();
        prop_assert_eq!(&screened.indices, &full.indices);
        prop_assert!(screened.len() <= fam.bound);
        prop_assert!(fam.bound <= fam.n());
        prop_assert!(screened.len() <= 40);
        for &(k, obj) in &full.improved {
            if !screened.indices.contains(&k) {
                prop_assert!((obj - full.base_objective).abs() <= (1e-7 * full.base_objective.abs()).max(1e-9));
            }
        }
    }

    #[test]
    fn rmpc_policy_is_causal_and_consistent(seed in any::<u64>()) {
        let p = random_system(seed);
        let sizes = vec![3; p.horizon];
        let sol = match solve_rmpc(&p, &sizes, seed, &SimplexSolver::default()) {
            Ok(s) => s,
            Err(scenopt::Error::Infeasible) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        prop_assert_eq!(sol.policy.causality_defect(), 0.0);
        let pred = build_prediction_operators(&p);
        let dist = p.trajectory_dist().unwrap();
        for delta in sample_multisample(&dist, 20, seed ^ 7).samples {
            let delta = DVector::from_vec(delta);
            let u = sol.policy.inputs(&delta);
            for (i, v) in u.iter().enumerate() {
                let a = i % p.n_u();
                prop_assert!(*v >= p.u_lo[a] - 1e-6 && *v <= p.u_hi[a] + 1e-6);
            }
            let states = simulate(&p, &sol.policy, &delta);
            prop_assert_eq!(states.len(), p.horizon + 1);
            for (k, state) in states.iter().enumerate().skip(1) {
                let x = pred.state(k, &sol.policy, &delta);
                prop_assert!((&x - state).amax() <= 1e-8 * (1.0 + state.amax()));
            }
        }
    }
}

#[test]
fn validation_is_deterministic_and_monotone_in_n() {
    let p = inventory(3, 1, 0.2).unwrap();
    let cfg = ValidationConfig {
        n_instances: 100,
        n_test_samples: 500,
        ..ValidationConfig::confidence_preset(31)
    };
    let solver = SimplexSolver::default();
    let small = estimate_with_sizes(&cfg, &p, &[10, 10, 10], &solver).unwrap();
    let again = estimate_with_sizes(&cfg, &p, &[10, 10, 10], &solver).unwrap();
    assert_eq!(small.stages, again.stages);
    let large = estimate_with_sizes(&cfg, &p, &[40, 40, 40], &solver).unwrap();
    assert_eq!(small.failed_instances + large.failed_instances, 0);
    for (s, l) in small.stages.iter().zip(&large.stages) {
        let se = (s.epsilon_se.powi(2) + l.epsilon_se.powi(2)).sqrt();
        assert!(
            l.epsilon_hat <= s.epsilon_hat + 3.0 * se,
            "stage {}: {} vs {}",
            s.stage,
            l.epsilon_hat,
            s.epsilon_hat
        );
    }
}
