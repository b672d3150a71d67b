//! Support samples by leave-one-out re-solving, and empirical checks of the
//! structured Helly-dimension bounds.
//!
//! Sample `k` is a support sample when dropping every row it generated
//! strictly lowers the optimal cost. Strictness is judged with the margin
//! `max(1e-9, 1e-7 |v*|)`; a looser margin could only hide support samples,
//! a tighter one could only invent them.

use std::io::Write;

use crate::error::{Error, Result};
use crate::helly_bounds::{self, StructureKind};
use crate::lp::{LpBackend, LpSolution, LpStatus};
use crate::rng::{stream_seed, StreamRng};
use crate::scenario::{
    build_scenario_lp, sample_multisample, AffineConstraint, AffineFn, BoxBracket,
    ConstraintStructure, DomainBox, QuadraticConstraint, RowTag, ScenarioLp, SeparableConstraint,
    UncertaintyDist, UncertaintyMap, FEAS_TOL,
};

#[derive(Debug, Clone, PartialEq)]
pub struct SupportSet {
    /// Support sample indices, ascending.
    pub indices: Vec<usize>,
    pub base_objective: f64,
    /// `(k, objective without sample k)` for every re-solved sample.
    pub improved: Vec<(usize, f64)>,
}

impl SupportSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

fn tol_cost(v: f64) -> f64 {
    (1e-7 * v.abs()).max(1e-9)
}

fn solve_optimal(lp: &ScenarioLp, solver: &impl LpBackend, what: &str) -> Result<LpSolution> {
    let sol = solver.solve(lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol),
        LpStatus::Infeasible => Err(Error::Infeasible),
        LpStatus::Unbounded => Err(Error::domain(format!("{what} is unbounded"))),
    }
}

/// Samples whose rows all hold with slack at `x` cannot be support samples:
/// `x` stays optimal once they are dropped.
fn tight_samples(lp: &ScenarioLp, x: &[f64]) -> Vec<usize> {
    let mut tight: Vec<usize> = lp
        .rows
        .iter()
        .filter_map(|r| match r.tag {
            RowTag::Sample(j) => {
                let lhs: f64 = r.coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
                let scale = r
                    .coeffs
                    .iter()
                    .fold(1.0f64, |s, a| s.max(a.abs()))
                    .max(r.rhs.abs());
                (lhs - r.rhs >= -FEAS_TOL * scale).then_some(j)
            }
            _ => None,
        })
        .collect();
    tight.sort_unstable();
    tight.dedup();
    tight
}

fn leave_one_out(
    lp: &ScenarioLp,
    solver: &impl LpBackend,
    candidates: &[usize],
    base: f64,
) -> Result<SupportSet> {
    let tol = tol_cost(base);
    let mut indices = Vec::new();
    let mut improved = Vec::with_capacity(candidates.len());
    for &k in candidates {
        let reduced = lp.without_sample(k);
        let sol = solve_optimal(&reduced, solver, "leave-one-out program")?;
        if sol.objective < base - tol {
            indices.push(k);
        }
        improved.push((k, sol.objective));
    }
    Ok(SupportSet {
        indices,
        base_objective: base,
        improved,
    })
}

/// Support samples of `lp`, re-solving only for samples tight at the optimum.
pub fn support_set(lp: &ScenarioLp, solver: &impl LpBackend) -> Result<SupportSet> {
    let base = solve_optimal(lp, solver, "scenario program")?;
    let candidates = tight_samples(lp, &base.x);
    leave_one_out(lp, solver, &candidates, base.objective)
}

/// Support samples of `lp`, re-solving once for every sample.
pub fn support_set_exhaustive(lp: &ScenarioLp, solver: &impl LpBackend) -> Result<SupportSet> {
    let base = solve_optimal(lp, solver, "scenario program")?;
    leave_one_out(lp, solver, &lp.sample_indices(), base.objective)
}

/// A random family of scenario programs sharing one structure.
#[derive(Debug, Clone)]
pub struct ScenarioFamily {
    pub name: String,
    pub structure: ConstraintStructure,
    pub bracket: BoxBracket,
    pub dist: UncertaintyDist,
    pub cost: Vec<f64>,
    pub domain: DomainBox,
    /// Bound the support count must respect.
    pub bound: usize,
}

impl ScenarioFamily {
    pub fn n(&self) -> usize {
        self.cost.len()
    }

    pub fn build_lp(&self, n_samples: usize, seed: u64) -> Result<ScenarioLp> {
        let omega = sample_multisample(&self.dist, n_samples, seed);
        build_scenario_lp(
            &self.structure,
            &self.bracket,
            &omega,
            &self.cost,
            &self.domain,
        )
    }
}

/// Outcome of one verification trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    /// Support count, or the error that aborted the trial.
    pub support_count: std::result::Result<usize, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundVerificationReport {
    pub family: String,
    pub n: usize,
    pub n_samples: usize,
    pub trials: usize,
    pub bound: usize,
    pub max_support_count: usize,
    /// Trials whose support count exceeded `bound`.
    pub violations: usize,
    /// Trials whose support count exceeded the standard bound `n`.
    pub standard_violations: usize,
    pub failed_trials: usize,
    pub records: Vec<TrialRecord>,
}

impl BoundVerificationReport {
    /// `trial,seed,support_count` rows; failed trials leave the count empty.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "trial,seed,support_count")?;
        for r in &self.records {
            match &r.support_count {
                Ok(c) => writeln!(out, "{},{},{}", r.trial, r.seed, c)?,
                Err(_) => writeln!(out, "{},{},", r.trial, r.seed)?,
            }
        }
        Ok(())
    }
}

/// Runs `trials` independent scenario programs of `family` with `n_samples`
/// draws each and records their support counts.
pub fn verify_bound<S: LpBackend + Sync>(
    family: &ScenarioFamily,
    n_samples: usize,
    trials: usize,
    seed: u64,
    solver: &S,
) -> Result<BoundVerificationReport> {
    if n_samples == 0 || trials == 0 {
        return Err(Error::domain(
            "verification needs N >= 1 and at least one trial",
        ));
    }
    let run = |trial: usize| {
        let trial_seed = stream_seed(seed, &format!("trial/{trial}"));
        let count = family
            .build_lp(n_samples, trial_seed)
            .and_then(|lp| support_set(&lp, solver))
            .map(|s| s.len())
            .map_err(|e| e.to_string());
        TrialRecord {
            trial,
            seed: trial_seed,
            support_count: count,
        }
    };
    #[cfg(feature = "parallel")]
    let records: Vec<TrialRecord> = {
        use rayon::prelude::*;
        (0..trials).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let records: Vec<TrialRecord> = (0..trials).map(run).collect();

    let counts: Vec<usize> = records
        .iter()
        .filter_map(|r| r.support_count.clone().ok())
        .collect();
    Ok(BoundVerificationReport {
        family: family.name.clone(),
        n: family.n(),
        n_samples,
        trials,
        bound: family.bound,
        max_support_count: counts.iter().copied().max().unwrap_or(0),
        violations: counts.iter().filter(|&&c| c > family.bound).count(),
        standard_violations: counts.iter().filter(|&&c| c > family.n()).count(),
        failed_trials: records.len() - counts.len(),
        records,
    })
}

/// Named random families used by the `verify` command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Additive,
    Multiplicative,
    Separable,
    Affine,
    Quadratic,
    /// Multiplicative structure bracketed from both sides.
    Box,
    /// `min h` s.t. `||A y - b||_inf + delta <= h`.
    Example1,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::Additive,
        Preset::Multiplicative,
        Preset::Separable,
        Preset::Affine,
        Preset::Quadratic,
        Preset::Box,
        Preset::Example1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Additive => "additive",
            Preset::Multiplicative => "multiplicative",
            Preset::Separable => "separable",
            Preset::Affine => "affine",
            Preset::Quadratic => "quadratic",
            Preset::Box => "box",
            Preset::Example1 => "example1",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::domain(format!("unknown preset {s:?}")))
    }

    /// Default `(n, r, d, m)` for the preset.
    pub fn default_dims(self) -> PresetDims {
        let (n, r, d, m) = match self {
            Preset::Additive => (6, 3, 2, 1),
            Preset::Multiplicative => (8, 2, 2, 3),
            Preset::Separable => (10, 2, 2, 3),
            Preset::Affine => (10, 2, 3, 1),
            Preset::Quadratic => (10, 1, 2, 1),
            Preset::Box => (6, 1, 2, 2),
            Preset::Example1 => (4, 5, 1, 1),
        };
        PresetDims { n, r, d, m }
    }
}

/// Size parameters of a preset family. For `example1`, `r` is the number
/// of rows of `A` and `n - 1` its number of columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PresetDims {
    pub n: usize,
    pub r: usize,
    pub d: usize,
    pub m: usize,
}

fn random_affine(rng: &mut StreamRng, n: usize, scale: f64, constant: f64) -> AffineFn {
    AffineFn::new((0..n).map(|_| scale * rng.normal()).collect(), constant)
}

fn random_cost(rng: &mut StreamRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.normal()).collect()
}

/// Cost pushing against the constraint rows at the nominal uncertainty, so
/// that samples bind at the optimum.
fn opposing_cost(structure: &ConstraintStructure, rng: &mut StreamRng) -> Result<Vec<f64>> {
    let dims = structure.dims();
    let mut cost = random_cost(rng, dims.n);
    for row in structure.rows_at(&vec![0.0; dims.d])? {
        for (c, g) in cost.iter_mut().zip(&row.coeffs) {
            *c -= g;
        }
    }
    Ok(cost)
}

fn random_matrix(rng: &mut StreamRng, rows: usize, cols: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| scale * rng.normal()).collect())
        .collect()
}

/// Smooth nonlinear lifting `R^d -> R^m` with values in `[0.5, 2.5]`.
fn random_lifting(rng: &mut StreamRng, d: usize, m: usize) -> UncertaintyMap {
    let w = random_matrix(rng, m, d, 1.0);
    UncertaintyMap::new(m, move |delta| {
        w.iter()
            .map(|row| {
                1.5 + row
                    .iter()
                    .zip(delta)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    .tanh()
            })
            .collect()
    })
}

/// Random family of `preset`. The structure is drawn from `seed`; every
/// family has `x = 0` strictly feasible for all uncertainty values and a
/// bounded decision box, so each sampled program is feasible and bounded.
pub fn preset_family(preset: Preset, dims: PresetDims, seed: u64) -> Result<ScenarioFamily> {
    let PresetDims { n, r, d, m } = dims;
    if n == 0 || r == 0 || d == 0 || m == 0 {
        return Err(Error::domain("preset dimensions must be positive"));
    }
    let mut rng = StreamRng::derive(seed, &format!("preset/{}", preset.name()));
    let cube = UncertaintyDist::uniform_cube(-1.0, 1.0, d)?;
    let domain = DomainBox::symmetric(n, 10.0);
    let mut bracket = BoxBracket::one_sided();
    let structure: ConstraintStructure = match preset {
        Preset::Additive => {
            let h = (0..r)
                .map(|_| random_affine(&mut rng, n, 1.0, -1.0))
                .collect();
            let s = UncertaintyMap::linear(random_matrix(&mut rng, r, d, 0.3));
            SeparableConstraint::additive(n, d, h, s)?.into()
        }
        Preset::Multiplicative | Preset::Box => {
            let boxed = preset == Preset::Box;
            // G(0) q(delta) + s(delta) < 0 (one-sided) or G(0) = 0 inside (-1, 1)
            let g_const = if boxed { 0.0 } else { -1.0 };
            let g = (0..r)
                .map(|_| {
                    (0..m)
                        .map(|_| random_affine(&mut rng, n, 1.0, g_const))
                        .collect()
                })
                .collect();
            let q = random_lifting(&mut rng, d, m);
            let s_scale = if boxed { 0.0 } else { 0.4 / d as f64 };
            let s = UncertaintyMap::linear(random_matrix(&mut rng, r, d, s_scale));
            if boxed {
                bracket = BoxBracket::new(Some(vec![-1.0; r]), Some(vec![1.0; r]))?;
            }
            SeparableConstraint::multiplicative(n, d, g, q, s)?.into()
        }
        Preset::Separable => {
            let g = (0..r)
                .map(|_| {
                    (0..m)
                        .map(|_| random_affine(&mut rng, n, 1.0, 0.0))
                        .collect()
                })
                .collect();
            let h = (0..r)
                .map(|_| random_affine(&mut rng, n, 1.0, -1.0))
                .collect();
            let q = random_lifting(&mut rng, d, m);
            let s = UncertaintyMap::linear(random_matrix(&mut rng, r, d, 0.4 / d as f64));
            SeparableConstraint::separable(n, d, g, h, q, s)?.into()
        }
        Preset::Affine => {
            let g = (0..r)
                .map(|_| {
                    (0..d)
                        .map(|_| {
                            let g0 = 0.1 * rng.normal() / d as f64;
                            random_affine(&mut rng, n, 1.0, g0)
                        })
                        .collect()
                })
                .collect();
            let h = (0..r)
                .map(|_| random_affine(&mut rng, n, 1.0, -1.0))
                .collect();
            AffineConstraint::new(n, d, g, h)?.into()
        }
        Preset::Quadratic => {
            let a = (0..r)
                .map(|_| {
                    (0..d)
                        .map(|_| {
                            (0..d)
                                .map(|_| random_affine(&mut rng, n, 1.0, 0.0))
                                .collect()
                        })
                        .collect()
                })
                .collect();
            let b = (0..r)
                .map(|_| {
                    (0..d)
                        .map(|_| random_affine(&mut rng, n, 1.0, 0.0))
                        .collect()
                })
                .collect();
            let c = (0..r)
                .map(|_| random_affine(&mut rng, n, 1.0, -1.0))
                .collect();
            QuadraticConstraint::new(n, d, a, b, c)?.into()
        }
        Preset::Example1 => return example1_family(n, r, &mut rng),
    };
    let cost = opposing_cost(&structure, &mut rng)?;
    let bound = structure.structured_bound();
    Ok(ScenarioFamily {
        name: preset.name().to_string(),
        structure,
        bracket,
        dist: cube,
        cost,
        domain,
        bound,
    })
}

/// `min h` over `(y, h)` with `||A y - b||_inf + delta <= h`, scalar `delta`.
///
/// Each sample contributes the `2k` affine pieces of the infinity norm; they
/// share one sample index, so the scalarized constraint is additive with a
/// single row.
fn example1_family(n: usize, k: usize, rng: &mut StreamRng) -> Result<ScenarioFamily> {
    if n < 2 {
        return Err(Error::domain("example1 needs n >= 2 (y in R^{n-1} and h)"));
    }
    let ny = n - 1;
    let a = random_matrix(rng, k, ny, 1.0);
    let b: Vec<f64> = (0..k).map(|_| rng.normal()).collect();
    let mut h = Vec::with_capacity(2 * k);
    for (row, bi) in a.iter().zip(&b) {
        for sign in [1.0, -1.0] {
            let mut coeffs: Vec<f64> = row.iter().map(|v| sign * v).collect();
            coeffs.push(-1.0);
            h.push(AffineFn::new(coeffs, -sign * bi));
        }
    }
    let structure: ConstraintStructure = SeparableConstraint::additive(
        n,
        1,
        h,
        UncertaintyMap::new(2 * k, move |delta| vec![delta[0]; 2 * k]),
    )?
    .into();
    let mut cost = vec![0.0; n];
    cost[ny] = 1.0;
    Ok(ScenarioFamily {
        name: Preset::Example1.name().to_string(),
        structure,
        bracket: BoxBracket::one_sided(),
        dist: UncertaintyDist::uniform_cube(-1.0, 1.0, 1)?,
        cost,
        domain: DomainBox::symmetric(n, 1e3),
        bound: helly_bounds::bound_additive(1),
    })
}

/// Structure kind whose bound a preset exercises.
pub fn preset_kind(preset: Preset) -> StructureKind {
    match preset {
        Preset::Additive | Preset::Example1 => StructureKind::Additive,
        Preset::Multiplicative | Preset::Box => StructureKind::Multiplicative,
        Preset::Separable => StructureKind::Separable,
        Preset::Affine => StructureKind::Affine,
        Preset::Quadratic => StructureKind::Quadratic,
    }
}
