//! Monte Carlo estimates of per-stage violation probability and confidence
//! for randomized MPC.

use std::io::Write;
use std::time::{Duration, Instant};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::helly_bounds::{mpc_stage_bounds, MpcStageDims};
use crate::lp::LpBackend;
use crate::rmpc::{
    build_prediction_operators, solve_rmpc, stage_violated, AffinePolicy, MpcProblem,
    StagePrediction,
};
use crate::rng::stream_seed;
use crate::sample_complexity::{min_sample_size_exact, min_sample_size_explicit, SampleSizeQuery};
use crate::scenario::{numerical_rank, sample_multisample};
use crate::table::{fmt_sig, write_csv};

/// Bound on the number of support samples used to size stage `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundRule {
    /// `k n_u + n_u n_delta k (k - 1) / 2`
    Standard,
    /// `min(rank F, k n_u) + n_u n_delta k (k - 1) / 2`
    Srank,
    /// `n_f (k n_delta + 1)`
    New,
    /// `k`, for one state constraint and scalar disturbance.
    Tightened,
}

impl BoundRule {
    pub const ALL: [BoundRule; 4] = [
        BoundRule::Standard,
        BoundRule::Srank,
        BoundRule::New,
        BoundRule::Tightened,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundRule::Standard => "standard",
            BoundRule::Srank => "srank",
            BoundRule::New => "new",
            BoundRule::Tightened => "tightened",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        BoundRule::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::domain(format!("unknown bound rule {s:?}")))
    }
}

/// How a bound `zeta` becomes a sample size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Inversion {
    /// Smallest `N` whose binomial tail is at most `beta`.
    #[default]
    Exact,
    /// `ceil(2/eps (zeta - 1 + ln(1/beta)))`.
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationConfig {
    pub n_instances: usize,
    pub n_test_samples: usize,
    pub epsilon: f64,
    /// Confidence budget of each stage.
    pub beta: f64,
    pub rule: BoundRule,
    pub inversion: Inversion,
    pub seed: u64,
}

impl ValidationConfig {
    /// `eps = 0.2`, `beta = 0.1`, 200 instances of 2000 test draws.
    pub fn confidence_preset(seed: u64) -> Self {
        Self {
            n_instances: 200,
            n_test_samples: 2000,
            epsilon: 0.2,
            beta: 0.1,
            rule: BoundRule::New,
            inversion: Inversion::Exact,
            seed,
        }
    }

    /// `eps = 0.1`, `beta = 1e-7`.
    pub fn violation_preset(seed: u64) -> Self {
        Self {
            epsilon: 0.1,
            beta: 1e-7,
            ..Self::confidence_preset(seed)
        }
    }

    fn check(&self) -> Result<()> {
        if self.n_instances == 0 || self.n_test_samples == 0 {
            return Err(Error::domain(
                "need at least one instance and one test sample",
            ));
        }
        SampleSizeQuery::new(self.epsilon, self.beta, 1).map(|_| ())
    }
}

/// Support bound `zeta_k` of every stage `k = 1..=T` under `rule`.
pub fn stage_bounds(p: &MpcProblem, rule: BoundRule) -> Result<Vec<usize>> {
    let f_rows: Vec<Vec<f64>> = p
        .f_mat
        .row_iter()
        .map(|r| r.iter().copied().collect())
        .collect();
    let rank_f = numerical_rank(&f_rows);
    (1..=p.horizon)
        .map(|k| {
            let mut dims = MpcStageDims::new(k, p.n_u(), p.n_delta(), p.n_f(), rank_f);
            dims.tightened = rule == BoundRule::Tightened;
            let b = mpc_stage_bounds(&dims)?;
            Ok(match rule {
                BoundRule::Standard => b.std,
                BoundRule::Srank => b.srank,
                BoundRule::New | BoundRule::Tightened => b.new,
            })
        })
        .collect()
}

pub fn sample_size(zeta: usize, epsilon: f64, beta: f64, inversion: Inversion) -> Result<usize> {
    let q = SampleSizeQuery::new(epsilon, beta, zeta as u64)?;
    let n = match inversion {
        Inversion::Exact => min_sample_size_exact(&q),
        Inversion::Explicit => min_sample_size_explicit(&q),
    };
    Ok(n as usize)
}

/// `(zeta_k, N_k)` for every stage.
pub fn stage_sample_sizes(
    p: &MpcProblem,
    cfg: &ValidationConfig,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let bounds = stage_bounds(p, cfg.rule)?;
    let sizes = bounds
        .iter()
        .map(|&z| sample_size(z, cfg.epsilon, cfg.beta, cfg.inversion))
        .collect::<Result<_>>()?;
    Ok((bounds, sizes))
}

/// Fraction of `tests` violating `F x_k <= f`.
pub fn estimate_epsilon(
    p: &MpcProblem,
    pred: &StagePrediction,
    policy: &AffinePolicy,
    k: usize,
    tests: &[DVector<f64>],
) -> f64 {
    if tests.is_empty() {
        return 0.0;
    }
    let bad = tests
        .iter()
        .filter(|d| stage_violated(p, pred, policy, k, d))
        .count();
    bad as f64 / tests.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageEstimate {
    pub stage: usize,
    pub n_samples: usize,
    pub bound: usize,
    /// Mean of the per-instance violation estimates.
    pub epsilon_hat: f64,
    /// Standard error of `epsilon_hat` across instances.
    pub epsilon_se: f64,
    /// Fraction of instances with violation estimate strictly above epsilon.
    pub beta_hat: f64,
}

#[derive(Debug, Clone)]
pub struct InstanceRecord {
    pub instance: usize,
    pub seed: u64,
    /// Per-stage violation estimates, or the error that aborted the instance.
    pub epsilons: std::result::Result<Vec<f64>, String>,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub config: ValidationConfig,
    pub rule_name: String,
    pub stages: Vec<StageEstimate>,
    pub instances: Vec<InstanceRecord>,
    /// Instances that solved and entered the estimates.
    pub used_instances: usize,
    pub failed_instances: usize,
    pub wall_clock: Duration,
}

impl ValidationReport {
    pub fn write_csv(&self, out: impl Write) -> std::io::Result<()> {
        let rows: Vec<Vec<String>> = self
            .stages
            .iter()
            .map(|s| {
                vec![
                    s.stage.to_string(),
                    s.n_samples.to_string(),
                    s.bound.to_string(),
                    fmt_sig(s.epsilon_hat),
                    fmt_sig(s.beta_hat),
                    self.used_instances.to_string(),
                    self.config.n_test_samples.to_string(),
                    self.config.seed.to_string(),
                ]
            })
            .collect();
        write_csv(
            out,
            &[
                "stage",
                "N_k",
                "bound_used",
                "epsilon_hat",
                "beta_hat",
                "instances",
                "test_samples",
                "seed",
            ],
            &rows,
        )
    }
}

/// Runs `cfg.n_instances` independent programs with stage sizes from
/// `cfg.rule` and estimates per-stage violation and confidence.
pub fn estimate_beta<S: LpBackend + Sync>(
    cfg: &ValidationConfig,
    p: &MpcProblem,
    solver: &S,
) -> Result<ValidationReport> {
    cfg.check()?;
    let (bounds, sizes) = stage_sample_sizes(p, cfg)?;
    let mut report = estimate_with_sizes(cfg, p, &sizes, solver)?;
    for (s, b) in report.stages.iter_mut().zip(bounds) {
        s.bound = b;
    }
    Ok(report)
}

/// As [`estimate_beta`] with explicit stage sizes. Instance `i` draws its
/// programs from stream `instance/i` and its test trajectories from
/// `test/i`, so test draws do not depend on the sizes.
pub fn estimate_with_sizes<S: LpBackend + Sync>(
    cfg: &ValidationConfig,
    p: &MpcProblem,
    sizes: &[usize],
    solver: &S,
) -> Result<ValidationReport> {
    cfg.check()?;
    if sizes.len() != p.horizon {
        return Err(Error::dim(format!(
            "{} stage sizes for horizon {}",
            sizes.len(),
            p.horizon
        )));
    }
    let start = Instant::now();
    let pred = build_prediction_operators(p);
    let dist = p.trajectory_dist()?;
    let run = |i: usize| {
        let seed = stream_seed(cfg.seed, &format!("instance/{i}"));
        let epsilons = solve_rmpc(p, sizes, seed, solver)
            .map(|sol| {
                let tests: Vec<DVector<f64>> = sample_multisample(
                    &dist,
                    cfg.n_test_samples,
                    stream_seed(cfg.seed, &format!("test/{i}")),
                )
                .samples
                .into_iter()
                .map(DVector::from_vec)
                .collect();
                (1..=p.horizon)
                    .map(|k| estimate_epsilon(p, &pred, &sol.policy, k, &tests))
                    .collect()
            })
            .map_err(|e| e.to_string());
        InstanceRecord {
            instance: i,
            seed,
            epsilons,
        }
    };
    #[cfg(feature = "parallel")]
    let instances: Vec<InstanceRecord> = {
        use rayon::prelude::*;
        (0..cfg.n_instances).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let instances: Vec<InstanceRecord> = (0..cfg.n_instances).map(run).collect();

    let ok: Vec<&Vec<f64>> = instances
        .iter()
        .filter_map(|r| r.epsilons.as_ref().ok())
        .collect();
    let used = ok.len();
    let stages = (0..p.horizon)
        .map(|k| {
            let vals: Vec<f64> = ok.iter().map(|e| e[k]).collect();
            let (mean, se) = mean_se(&vals);
            let above = vals.iter().filter(|&&e| e > cfg.epsilon).count();
            StageEstimate {
                stage: k + 1,
                n_samples: sizes[k],
                bound: 0,
                epsilon_hat: mean,
                epsilon_se: se,
                beta_hat: if used == 0 {
                    0.0
                } else {
                    above as f64 / used as f64
                },
            }
        })
        .collect();
    Ok(ValidationReport {
        config: cfg.clone(),
        rule_name: cfg.rule.name().to_string(),
        stages,
        failed_instances: instances.len() - used,
        used_instances: used,
        instances,
        wall_clock: start.elapsed(),
    })
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
