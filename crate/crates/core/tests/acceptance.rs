//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use scenopt::helly_bounds::{bound_affine, bound_quadratic, mpc_stage_bounds, MpcStageDims};
use scenopt::lp::{solve_lp, LpStatus, SimplexSolver};
use scenopt::rmpc::{
    build_prediction_operators, inventory, realized_cost, simulate, solve_rmpc, AffinePolicy,
    CostWeights, MpcConfig, MpcProblem,
};
use scenopt::rng::StreamRng;
use scenopt::sample_complexity::{
    min_sample_size_exact, min_sample_size_explicit, vc_dim_affine, vc_dim_quadratic,
    vc_sample_size, SampleSizeQuery, VcQuery,
};
use scenopt::scenario::sample_multisample;
use scenopt::support::{preset_family, verify_bound, Preset};
use scenopt::validation::{estimate_beta, stage_sample_sizes, BoundRule, ValidationConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn run(id: usize, name: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let o = f();
    let elapsed = start.elapsed();
    let in_time = elapsed < limit;
    let pass = o.pass && in_time;
    println!(
        "[{}] {id}. {name}: {} ({:.2} s, limit {} s{})",
        if pass { "PASS" } else { "FAIL" },
        o.detail,
        elapsed.as_secs_f64(),
        limit.as_secs(),
        if in_time { "" } else { ", exceeded" }
    );
    pass
}

fn sample_size_inversion() -> Outcome {
    let eps = [0.01, 0.05, 0.1, 0.2, 0.5];
    let betas = [0.5, 0.1, 1e-3, 1e-6];
    let zetas = [1u64, 2, 5, 10, 50];
    let mut mismatches = Vec::new();
    let mut dominance = 0;
    for &e in &eps {
        for &b in &betas {
            for &z in &zetas {
                let q = SampleSizeQuery::new(e, b, z).unwrap();
                let exact = min_sample_size_exact(&q);
                let brute = common::brute_force_size(e, b, z);
                if exact != brute {
                    mismatches.push(format!("({e}, {b}, {z}): {exact} vs {brute}"));
                }
                if min_sample_size_explicit(&q) < exact {
                    dominance += 1;
                }
            }
        }
    }
    let q = SampleSizeQuery::new(0.1, 0.01, 1).unwrap();
    let spot = (min_sample_size_exact(&q), min_sample_size_explicit(&q));
    outcome(
        mismatches.is_empty() && dominance == 0 && spot == (44, 93),
        format!(
            "100 grid points, {} mismatches vs brute-force scan {:?}, {dominance} explicit < exact, spot (0.1, 0.01, 1) = {}/{}",
            mismatches.len(),
            mismatches,
            spot.0,
            spot.1
        ),
    )
}

fn vc_dominance() -> Outcome {
    let (eps, beta) = (0.1, 0.01);
    let mut dim_failures = 0;
    let mut size_failures = 0;
    let mut exact_checked = 0;
    for r in 1..=50u64 {
        for d in 1..=50u64 {
            let pairs = [
                (bound_affine(r as usize, d as usize), vc_dim_affine(r, d)),
                (
                    bound_quadratic(r as usize, d as usize),
                    vc_dim_quadratic(r, d),
                ),
            ];
            for (zeta, xi) in pairs {
                if (zeta as f64) >= xi {
                    dim_failures += 1;
                }
                let vc = vc_sample_size(&VcQuery::new(xi, eps, beta).unwrap());
                let q = SampleSizeQuery::new(eps, beta, zeta as u64).unwrap();
                // explicit >= exact, so vc > explicit settles vc > exact;
                // the exact size is computed directly whenever that fails or is cheap
                let explicit = min_sample_size_explicit(&q);
                if vc <= explicit || zeta <= 400 {
                    exact_checked += 1;
                    let exact = min_sample_size_exact(&q);
                    if vc <= exact || explicit < exact {
                        size_failures += 1;
                    }
                }
            }
        }
    }
    outcome(
        dim_failures == 0 && size_failures == 0,
        format!(
            "r, d in 1..=50: {dim_failures} structured bounds >= VC dimension, {size_failures} VC sizes <= exact scenario size at (0.1, 0.01); {exact_checked} of 5000 exact sizes computed directly, the rest bounded through the explicit size"
        ),
    )
}

fn support_bounds() -> Outcome {
    let solver = SimplexSolver::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, preset) in Preset::ALL.into_iter().enumerate() {
        let dims = preset.default_dims();
        let (n_samples, trials) = if preset == Preset::Example1 {
            (50, 1000)
        } else {
            (100, 500)
        };
        let family = preset_family(preset, dims, 1001).unwrap();
        let rep = verify_bound(&family, n_samples, trials, 77 + i as u64, &solver).unwrap();
        let ok = rep.violations == 0
            && rep.standard_violations == 0
            && rep.failed_trials == 0
            && rep.n <= 10
            && (preset != Preset::Example1 || rep.max_support_count <= 1);
        pass &= ok;
        parts.push(format!(
            "{} max {}/{} over {} trials (n={}, N={}{})",
            rep.family,
            rep.max_support_count,
            rep.bound,
            rep.trials,
            rep.n,
            rep.n_samples,
            if rep.failed_trials > 0 {
                format!(", {} failed", rep.failed_trials)
            } else {
                String::new()
            }
        ));
    }
    outcome(pass, parts.join("; "))
}

fn bound_tables() -> Outcome {
    let mut mismatches = 0;
    let mut new_varies = false;
    for k in 1..=4usize {
        let mut first_new = None;
        for nu in 1..=5usize {
            let b = mpc_stage_bounds(&MpcStageDims::new(k, nu, 1, 1, 1)).unwrap();
            let std = k * nu + nu * k * (k - 1) / 2;
            let srank = 1.min(k * nu) + nu * k * (k - 1) / 2;
            let new = k + 1;
            if (b.std, b.srank, b.new) != (std, srank, new) {
                mismatches += 1;
            }
            new_varies |= *first_new.get_or_insert(b.new) != b.new;
        }
    }
    let cell = mpc_stage_bounds(&MpcStageDims::new(2, 5, 1, 1, 1)).unwrap();
    let cell_ok = (cell.std, cell.srank, cell.new) == (15, 6, 3);
    outcome(
        mismatches == 0 && !new_varies && cell_ok,
        format!(
            "20 cells, {mismatches} mismatches with the closed forms, new bound independent of n_u: {}, (k=2, n_u=5) -> {{{}, {}, {}}}",
            !new_varies, cell.std, cell.srank, cell.new
        ),
    )
}

fn rmpc_reproduction() -> Outcome {
    let p = inventory(8, 2, 0.2).unwrap();
    let solver = SimplexSolver::default();
    let new_cfg = ValidationConfig::confidence_preset(20_240_601);
    let srank_cfg = ValidationConfig {
        rule: BoundRule::Srank,
        ..new_cfg.clone()
    };
    let new = estimate_beta(&new_cfg, &p, &solver).unwrap();
    let srank = estimate_beta(&srank_cfg, &p, &solver).unwrap();
    let n = new_cfg.n_instances as f64;
    let beta_limit = 0.1 + 3.0 * (0.1f64 * 0.9 / n).sqrt();
    let diff_slack = 3.0 * (2.0 * 0.1 * 0.9 / n).sqrt();

    let mut pass = new.failed_instances == 0 && srank.failed_instances == 0;
    let mut beta_line = Vec::new();
    let mut order_line = Vec::new();
    let mut inconclusive = Vec::new();
    for (a, b) in new.stages.iter().zip(&srank.stages) {
        let ok = a.beta_hat <= beta_limit && a.epsilon_hat <= 0.2;
        pass &= ok;
        beta_line.push(format!(
            "k{}: N={} b={:.3} e={:.3}",
            a.stage, a.n_samples, a.beta_hat, a.epsilon_hat
        ));
        // srank is expected to win only at the first stage
        let gap = if a.stage == 1 {
            b.beta_hat - a.beta_hat
        } else {
            a.beta_hat - b.beta_hat
        };
        if gap < -diff_slack {
            pass = false;
            order_line.push(format!("k{} reversed", a.stage));
        } else if gap < 0.0 {
            inconclusive.push(a.stage);
        }
        order_line.push(format!("k{} {:.3}/{:.3}", a.stage, a.beta_hat, b.beta_hat));
    }
    outcome(
        pass,
        format!(
            "inventory T=8 n_u=2, 200 instances x 2000 draws, beta_hat <= {beta_limit:.3} and mean eps_hat <= 0.2 per stage [{}]; new/srank beta_hat [{}] slack {diff_slack:.3}, inconclusive stages {:?}",
            beta_line.join(", "),
            order_line.join(", "),
            inconclusive
        ),
    )
}

fn solver_oracle() -> Outcome {
    let mut rng = StreamRng::derive(6, "acceptance/lp");
    let lps: Vec<_> = (0..1000).map(|_| common::random_lp(&mut rng)).collect();
    let mut mismatches = 0;
    let mut worst = 0.0f64;
    let mut infeasible = 0;
    let mut first = Vec::new();
    for lp in &lps {
        let sol = solve_lp(lp).unwrap();
        let oracle = common::vertex_enumeration(lp);
        match (sol.status, oracle) {
            (LpStatus::Optimal, Some(v)) => {
                let err = (sol.objective - v).abs() / v.abs().max(1.0);
                worst = worst.max(err);
                if err > 1e-7 || lp.max_residual(&sol.x) > 1e-7 {
                    mismatches += 1;
                }
            }
            (LpStatus::Infeasible, None) => infeasible += 1,
            _ => mismatches += 1,
        }
        first.push(sol);
    }
    let identical = lps.iter().zip(&first).all(|(lp, a)| {
        let b = solve_lp(lp).unwrap();
        a.status == b.status
            && a.objective.to_bits() == b.objective.to_bits()
            && a.x
                .iter()
                .zip(&b.x)
                .all(|(p, q)| p.to_bits() == q.to_bits())
            && a.active_rows == b.active_rows
    });
    outcome(
        mismatches == 0 && identical,
        format!(
            "1000 random LPs ({infeasible} infeasible), {mismatches} disagree with vertex enumeration, worst relative gap {worst:.1e}, bit-identical rerun: {identical}"
        ),
    )
}

fn random_system() -> MpcProblem {
    let mut rng = StreamRng::derive(7, "acceptance/system");
    let mut mat = |r: usize, c: usize, s: f64| -> Vec<Vec<f64>> {
        (0..r)
            .map(|_| (0..c).map(|_| s * rng.normal()).collect())
            .collect()
    };
    MpcProblem::from_config(&MpcConfig {
        a: mat(3, 3, 0.5),
        b: mat(3, 2, 1.0),
        e: mat(3, 2, 1.0),
        t: 5,
        x0: vec![1.0, -2.0, 0.5],
        u_lo: vec![-5.0, -5.0],
        u_hi: vec![5.0, 5.0],
        f_mat: vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 1.0]],
        f: vec![4.0, 4.0],
        epsilon: 0.2,
        beta: None,
        delta_lo: vec![-1.0, -0.5],
        delta_hi: vec![1.0, 0.5],
        cost: CostWeights {
            state: vec![1.0, 0.5, 0.0],
            terminal: vec![2.0, 1.0, 1.0],
            input: vec![0.1, 0.2],
            input_stage_weighted: false,
        },
        seed: None,
        w: Some(mat(5, 3, 0.3)),
    })
    .unwrap()
}

fn random_policy(rng: &mut StreamRng, t: usize, nu: usize, nd: usize) -> AffinePolicy {
    let h = DVector::from_fn(t * nu, |_, _| rng.uniform(-50.0, 500.0));
    let m = DMatrix::from_fn(t * nu, t * nd, |i, j| {
        if j / nd < i / nu {
            rng.normal()
        } else {
            0.0
        }
    });
    AffinePolicy {
        n_u: nu,
        n_delta: nd,
        horizon: t,
        h,
        m,
    }
}

fn mpc_invariants() -> Outcome {
    let solver = SimplexSolver::default();
    let p = inventory(8, 2, 0.2).unwrap();
    let cfg = ValidationConfig::confidence_preset(3);
    let (_, sizes) = stage_sample_sizes(&p, &cfg).unwrap();
    let sol = solve_rmpc(&p, &sizes, 11, &solver).unwrap();
    let dist = p.trajectory_dist().unwrap();
    let draws: Vec<DVector<f64>> = sample_multisample(&dist, 10_000, 12)
        .samples
        .into_iter()
        .map(DVector::from_vec)
        .collect();

    let (t, nu) = (p.horizon, p.n_u());
    let mut causal_gap = 0.0f64;
    for base in draws.iter().take(50) {
        let u0 = sol.policy.inputs(base);
        for j in 0..t {
            let mut bumped = base.clone();
            bumped[j] += 1.0;
            let u1 = sol.policy.inputs(&bumped);
            for k in 0..=j {
                for a in 0..nu {
                    causal_gap = causal_gap.max((u1[k * nu + a] - u0[k * nu + a]).abs());
                }
            }
        }
    }

    let mut input_violation = 0.0f64;
    for d in &draws {
        for (i, u) in sol.policy.inputs(d).iter().enumerate() {
            let a = i % nu;
            input_violation = input_violation.max(u - p.u_hi[a]).max(p.u_lo[a] - u);
        }
    }

    let mut rng = StreamRng::derive(7, "acceptance/prediction");
    let mut prediction_gap = 0.0f64;
    for q in [p.clone(), random_system()] {
        let pred = build_prediction_operators(&q);
        let qdist = q.trajectory_dist().unwrap();
        for _ in 0..200 {
            let policy = random_policy(&mut rng, q.horizon, q.n_u(), q.n_delta());
            let d = DVector::from_vec(qdist.draw(&mut rng));
            for (k, x) in simulate(&q, &policy, &d).iter().enumerate() {
                prediction_gap = prediction_gap.max((x - pred.state(k, &policy, &d)).amax());
            }
        }
    }

    let costs: Vec<f64> = sample_multisample(&dist, 100_000, 13)
        .samples
        .into_iter()
        .map(|d| realized_cost(&p, &sol.policy, &DVector::from_vec(d)))
        .collect();
    let n = costs.len() as f64;
    let mean = costs.iter().sum::<f64>() / n;
    let se = (costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    let expected = sol.expected_cost();
    let cost_z = (mean - expected).abs() / se.max(f64::MIN_POSITIVE);

    outcome(
        causal_gap <= 1e-9 && input_violation <= 1e-6 && prediction_gap <= 1e-9 && cost_z <= 3.0,
        format!(
            "causality gap {causal_gap:.1e}, worst input-bound excess over 1e4 draws {input_violation:.1e}, recursion vs operators {prediction_gap:.1e}, Monte Carlo cost {mean:.2} vs {expected:.2} ({cost_z:.2} SE over 1e5 draws)"
        ),
    )
}

type Criterion = (&'static str, u64, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 7] = [
        ("sample-size inversion", 5, sample_size_inversion),
        ("VC dominance", 5, vc_dominance),
        ("support-bound verification", 600, support_bounds),
        ("bound tables", 1, bound_tables),
        ("RMPC confidence and violation", 900, rmpc_reproduction),
        ("solver oracle equivalence", 60, solver_oracle),
        ("MPC structural invariants", 300, mpc_invariants),
    ];
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.into_iter().enumerate() {
        if !run(i + 1, name, Duration::from_secs(limit), f) {
            failed += 1;
        }
    }
    println!("acceptance: {} of 7 criteria passed", 7 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
