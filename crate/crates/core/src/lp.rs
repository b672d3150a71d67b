//! Dense two-phase simplex for [`ScenarioLp`].
//!
//! The tableau is kept in condensed (exchange) form: one row per basic
//! variable, one column per nonbasic variable, so an `m x n` program costs
//! `O(m n)` per pivot regardless of how many slacks it has. Decision
//! variables are free; the domain box enters as ordinary rows. Phase one
//! uses a single artificial variable.
//!
//! Pivoting follows the largest reduced cost and falls back to Bland's rule
//! while pivots are degenerate. Among optimal vertices the lexicographically
//! smallest `x` is returned, by minimizing `x_1, x_2, ...` in turn over the
//! optimal face.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scenario::{LpRow, ScenarioLp};

/// Smallest tableau entry accepted as a pivot.
pub const PIVOT_TOL: f64 = 1e-9;
/// Under Bland's rule, tied pivots smaller than this fraction of the
/// largest tied pivot are passed over.
const STABLE_PIVOT_RATIO: f64 = 1e-3;
const COST_TOL: f64 = 1e-9;
/// All-zero rows with rhs below this are contradictory.
const ZERO_ROW_RHS_TOL: f64 = -1e-9;
const PHASE_ONE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Minimizer; empty unless optimal.
    pub x: Vec<f64>,
    pub objective: f64,
    /// Indices into [`ScenarioLp::all_rows`] of the rows tight in the final basis.
    pub active_rows: Vec<usize>,
    pub pivots: usize,
}

impl LpSolution {
    fn failed(status: LpStatus, pivots: usize) -> Self {
        let objective = match status {
            LpStatus::Unbounded => f64::NEG_INFINITY,
            _ => f64::INFINITY,
        };
        Self {
            status,
            x: Vec::new(),
            objective,
            active_rows: Vec::new(),
            pivots,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimplexOptions {
    /// Break ties among optimal vertices lexicographically.
    pub lexicographic: bool,
    pub max_pivots: Option<usize>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            lexicographic: true,
            max_pivots: None,
        }
    }
}

/// Something that solves scenario LPs.
pub trait LpBackend {
    fn solve(&self, lp: &ScenarioLp) -> Result<LpSolution>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SimplexSolver {
    pub options: SimplexOptions,
}

impl LpBackend for SimplexSolver {
    fn solve(&self, lp: &ScenarioLp) -> Result<LpSolution> {
        solve_lp_with(lp, &self.options)
    }
}

pub fn solve_lp(lp: &ScenarioLp) -> Result<LpSolution> {
    solve_lp_with(lp, &SimplexOptions::default())
}

pub fn solve_lp_with(lp: &ScenarioLp, options: &SimplexOptions) -> Result<LpSolution> {
    let n = lp.n_vars();
    if n == 0 {
        return Err(Error::domain(
            "a linear program needs at least one variable",
        ));
    }
    if lp.domain.dim() != n {
        return Err(Error::dim(
            "domain box does not match the number of variables",
        ));
    }
    if lp
        .domain
        .lower
        .iter()
        .chain(&lp.domain.upper)
        .any(|v| !v.is_finite())
    {
        return Err(Error::domain("domain box must be finite"));
    }
    if lp.cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::domain("cost vector has non-finite entries"));
    }

    let all = lp.all_rows();
    let mut kept: Vec<usize> = Vec::with_capacity(all.len());
    for (i, row) in all.iter().enumerate() {
        if row.coeffs.len() != n {
            return Err(Error::dim(format!(
                "row {i} has {} coefficients",
                row.coeffs.len()
            )));
        }
        if row.coeffs.iter().any(|a| !a.is_finite()) || !row.rhs.is_finite() {
            return Err(Error::domain(format!("row {i} has non-finite entries")));
        }
        if row.coeffs.iter().all(|&a| a == 0.0) {
            if row.rhs < ZERO_ROW_RHS_TOL {
                return Ok(LpSolution::failed(LpStatus::Infeasible, 0));
            }
            continue;
        }
        kept.push(i);
    }

    let max_pivots = options.max_pivots.unwrap_or(50_000 + 50 * (kept.len() + n));
    let mut tab = Tableau::new(n, &all, &kept, max_pivots);

    if !tab.phase_one()? {
        return Ok(LpSolution::failed(LpStatus::Infeasible, tab.pivots));
    }

    let mut cost = vec![0.0; tab.n_labels()];
    cost[..n].copy_from_slice(&lp.cost);
    let cost_scale = lp.cost.iter().fold(1.0f64, |m, c| m.max(c.abs()));
    tab.set_objective(&cost);
    let mut fixed = vec![false; tab.ncols];
    if tab.run(&fixed, cost_scale * COST_TOL, false)? == Outcome::Unbounded {
        return Ok(LpSolution::failed(LpStatus::Unbounded, tab.pivots));
    }

    if options.lexicographic {
        tab.fix_positive_costs(&mut fixed, cost_scale * COST_TOL);
        for v in 0..n {
            if fixed.iter().all(|&f| f) {
                break;
            }
            let mut e = vec![0.0; tab.n_labels()];
            e[v] = 1.0;
            tab.set_objective(&e);
            if tab.run(&fixed, COST_TOL, false)? == Outcome::Unbounded {
                return Ok(LpSolution::failed(LpStatus::Unbounded, tab.pivots));
            }
            tab.fix_positive_costs(&mut fixed, COST_TOL);
        }
    }

    let x = tab.refined_solution(&all, &kept);
    let objective = lp.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
    let mut active_rows: Vec<usize> = tab
        .col_var
        .iter()
        .filter(|&&v| v >= n && v < n + kept.len())
        .map(|&v| kept[v - n])
        .collect();
    active_rows.sort_unstable();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective,
        active_rows,
        pivots: tab.pivots,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Optimal,
    Unbounded,
}

/// Condensed tableau: `basic_i = rhs_i - sum_j t[i][j] * nonbasic_j`,
/// `objective = z0 + sum_j d_j * nonbasic_j`.
///
/// Variable labels: `0..n` decision variables (free), `n..n+m` row slacks,
/// `n+m` the phase-one artificial.
struct Tableau {
    n: usize,
    m: usize,
    nrows: usize,
    ncols: usize,
    t: Vec<f64>,
    rhs: Vec<f64>,
    d: Vec<f64>,
    z0: f64,
    row_var: Vec<usize>,
    col_var: Vec<usize>,
    pivots: usize,
    max_pivots: usize,
}

impl Tableau {
    fn new(n: usize, all: &[LpRow], kept: &[usize], max_pivots: usize) -> Self {
        let m = kept.len();
        let mut t = Vec::with_capacity(m * n);
        let mut rhs = Vec::with_capacity(m);
        for &i in kept {
            let row = &all[i];
            let scale = row.coeffs.iter().fold(0.0f64, |s, a| s.max(a.abs()));
            t.extend(row.coeffs.iter().map(|a| a / scale));
            rhs.push(row.rhs / scale);
        }
        Self {
            n,
            m,
            nrows: m,
            ncols: n,
            t,
            rhs,
            d: vec![0.0; n],
            z0: 0.0,
            row_var: (n..n + m).collect(),
            col_var: (0..n).collect(),
            pivots: 0,
            max_pivots,
        }
    }

    fn n_labels(&self) -> usize {
        self.n + self.m + 1
    }

    fn artificial(&self) -> usize {
        self.n + self.m
    }

    fn is_free(&self, var: usize) -> bool {
        var < self.n
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.ncols + j]
    }

    /// Express `sum_v cost[v] * var_v` over the current nonbasic variables.
    fn set_objective(&mut self, cost: &[f64]) {
        self.d = self.col_var.iter().map(|&v| cost[v]).collect();
        self.z0 = 0.0;
        for i in 0..self.nrows {
            let c = cost[self.row_var[i]];
            if c != 0.0 {
                self.z0 += c * self.rhs[i];
                let row = &self.t[i * self.ncols..(i + 1) * self.ncols];
                for (dj, tij) in self.d.iter_mut().zip(row) {
                    *dj -= c * tij;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, s: usize) {
        let nc = self.ncols;
        let p = self.at(r, s);
        let inv = 1.0 / p;
        {
            let row_r = &mut self.t[r * nc..(r + 1) * nc];
            for v in row_r.iter_mut() {
                *v *= inv;
            }
            row_r[s] = inv;
        }
        self.rhs[r] *= inv;
        let (before, rest) = self.t.split_at_mut(r * nc);
        let (row_r, after) = rest.split_at_mut(nc);
        let rhs_r = self.rhs[r];
        let update = |row_i: &mut [f64], rhs_i: &mut f64| {
            let f = row_i[s];
            if f == 0.0 {
                return;
            }
            for (v, &w) in row_i.iter_mut().zip(row_r.iter()) {
                *v -= f * w;
            }
            row_i[s] = -f * inv;
            *rhs_i -= f * rhs_r;
        };
        for (i, row_i) in before.chunks_exact_mut(nc).enumerate() {
            update(row_i, &mut self.rhs[i]);
        }
        for (k, row_i) in after.chunks_exact_mut(nc).enumerate() {
            update(row_i, &mut self.rhs[r + 1 + k]);
        }
        let f = self.d[s];
        if f != 0.0 {
            for (v, &w) in self.d.iter_mut().zip(row_r.iter()) {
                *v -= f * w;
            }
            self.d[s] = -f * inv;
            self.z0 += f * rhs_r;
        }
        std::mem::swap(&mut self.row_var[r], &mut self.col_var[s]);
        self.pivots += 1;
    }

    fn entering(&self, fixed: &[bool], tol: f64, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (j, &frozen) in fixed.iter().enumerate() {
            if frozen {
                continue;
            }
            let dj = self.d[j];
            let improving = if self.is_free(self.col_var[j]) {
                dj.abs() > tol
            } else {
                dj < -tol
            };
            if !improving {
                continue;
            }
            let better = match best {
                None => true,
                Some((b, _)) if bland => self.col_var[j] < self.col_var[b],
                Some((b, _)) => {
                    let (a, c) = (dj.abs(), self.d[b].abs());
                    a > c || (a == c && self.col_var[j] < self.col_var[b])
                }
            };
            if better {
                best = Some((j, if dj < 0.0 { 1.0 } else { -1.0 }));
            }
        }
        best
    }

    /// Leaving row for entering column `s` moved in direction `dir`.
    ///
    /// Rows attaining the minimum ratio form the tie set. The largest pivot
    /// in it wins; under Bland's rule the smallest label wins among pivots
    /// within `STABLE_PIVOT_RATIO` of the largest. In phase one the
    /// artificial leaves whenever it ties.
    fn leaving(
        &self,
        s: usize,
        dir: f64,
        bland: bool,
        prefer_artificial: bool,
    ) -> Option<(usize, f64)> {
        let eligible = || {
            (0..self.nrows).filter_map(move |i| {
                if self.is_free(self.row_var[i]) {
                    return None;
                }
                let a = dir * self.at(i, s);
                (a > PIVOT_TOL).then(|| (i, a, self.rhs[i].max(0.0) / a))
            })
        };
        let min_ratio = eligible().map(|(_, _, q)| q).min_by(f64::total_cmp)?;
        let tie = |q: f64| q - min_ratio <= 1e-12 * (1.0 + min_ratio.abs());
        let art = self.artificial();
        if prefer_artificial {
            if let Some((i, _, _)) = eligible().find(|&(i, _, q)| tie(q) && self.row_var[i] == art)
            {
                return Some((i, min_ratio));
            }
        }
        let max_pivot = eligible()
            .filter(|&(_, _, q)| tie(q))
            .map(|(_, a, _)| a)
            .fold(0.0f64, f64::max);
        let pick = if bland {
            eligible()
                .filter(|&(_, a, q)| tie(q) && a >= STABLE_PIVOT_RATIO * max_pivot)
                .min_by_key(|&(i, _, _)| self.row_var[i])
        } else {
            eligible().filter(|&(_, _, q)| tie(q)).max_by(|x, y| {
                x.1.total_cmp(&y.1)
                    .then(self.row_var[y.0].cmp(&self.row_var[x.0]))
            })
        };
        pick.map(|(i, _, _)| (i, min_ratio))
    }

    fn run(&mut self, fixed: &[bool], tol: f64, phase_one: bool) -> Result<Outcome> {
        let mut bland = false;
        loop {
            if self.pivots >= self.max_pivots {
                return Err(Error::IterationLimit(self.pivots));
            }
            let Some((s, dir)) = self.entering(fixed, tol, bland) else {
                return Ok(Outcome::Optimal);
            };
            let Some((r, step)) = self.leaving(s, dir, bland, phase_one) else {
                return Ok(Outcome::Unbounded);
            };
            bland = step <= 1e-12;
            self.pivot(r, s);
        }
    }

    fn fix_positive_costs(&self, fixed: &mut [bool], tol: f64) {
        for (j, f) in fixed.iter_mut().enumerate() {
            if !self.is_free(self.col_var[j]) && self.d[j] > tol {
                *f = true;
            }
        }
    }

    /// Drive the basis to a feasible point. Returns false if none exists.
    fn phase_one(&mut self) -> Result<bool> {
        let Some(worst) = (0..self.nrows)
            .filter(|&i| self.rhs[i] < 0.0)
            .min_by(|&a, &b| self.rhs[a].total_cmp(&self.rhs[b]))
        else {
            return Ok(true);
        };

        // append the artificial column: -1 on every violated row
        let old = self.ncols;
        let nc = old + 1;
        let mut t = Vec::with_capacity(self.nrows * nc);
        for i in 0..self.nrows {
            t.extend_from_slice(&self.t[i * old..(i + 1) * old]);
            t.push(if self.rhs[i] < 0.0 { -1.0 } else { 0.0 });
        }
        self.t = t;
        self.ncols = nc;
        self.col_var.push(self.artificial());
        self.d.push(0.0);
        self.pivot(worst, old);
        for v in &mut self.rhs {
            if *v < 0.0 && *v > -1e-12 {
                *v = 0.0;
            }
        }

        let mut cost = vec![0.0; self.n_labels()];
        cost[self.artificial()] = 1.0;
        self.set_objective(&cost);
        let fixed = vec![false; self.ncols];
        self.run(&fixed, COST_TOL, true)?;
        if self.z0 > PHASE_ONE_TOL {
            return Ok(false);
        }

        let art = self.artificial();
        if let Some(r) = self.row_var.iter().position(|&v| v == art) {
            let candidate = (0..self.ncols)
                .filter(|&j| self.col_var[j] != art)
                .max_by(|&a, &b| self.at(r, a).abs().total_cmp(&self.at(r, b).abs()))
                .filter(|&j| self.at(r, j).abs() > 1e-9);
            match candidate {
                Some(j) => self.pivot(r, j),
                None => self.drop_row(r),
            }
        }
        let j = self
            .col_var
            .iter()
            .position(|&v| v == art)
            .expect("artificial is nonbasic");
        self.drop_col(j);
        for v in &mut self.rhs {
            if *v < 0.0 && *v > -1e-9 {
                *v = 0.0;
            }
        }
        Ok(true)
    }

    fn drop_row(&mut self, r: usize) {
        let nc = self.ncols;
        self.t.drain(r * nc..(r + 1) * nc);
        self.rhs.remove(r);
        self.row_var.remove(r);
        self.nrows -= 1;
    }

    fn drop_col(&mut self, j: usize) {
        let old = self.ncols;
        let mut t = Vec::with_capacity(self.nrows * (old - 1));
        for i in 0..self.nrows {
            let row = &self.t[i * old..(i + 1) * old];
            t.extend_from_slice(&row[..j]);
            t.extend_from_slice(&row[j + 1..]);
        }
        self.t = t;
        self.ncols = old - 1;
        self.col_var.remove(j);
        self.d.remove(j);
    }

    fn tableau_solution(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for (i, &v) in self.row_var.iter().enumerate() {
            if v < self.n {
                x[v] = self.rhs[i];
            }
        }
        x
    }

    /// Re-solve the vertex equations of the final basis in the original
    /// (unscaled) data, keeping whichever point is more feasible.
    fn refined_solution(&self, all: &[LpRow], kept: &[usize]) -> Vec<f64> {
        let x_tab = self.tableau_solution();
        if self.ncols != self.n {
            return x_tab;
        }
        let n = self.n;
        let mut a = DMatrix::<f64>::zeros(n, n);
        let mut b = DVector::<f64>::zeros(n);
        for (k, &v) in self.col_var.iter().enumerate() {
            if v < n {
                a[(k, v)] = 1.0;
            } else {
                let row = &all[kept[v - n]];
                for (j, &c) in row.coeffs.iter().enumerate() {
                    a[(k, j)] = c;
                }
                b[k] = row.rhs;
            }
        }
        let Some(sol) = a.lu().solve(&b) else {
            return x_tab;
        };
        let x_ref: Vec<f64> = sol.iter().copied().collect();
        if x_ref.iter().any(|v| !v.is_finite()) {
            return x_tab;
        }
        let worst = |x: &[f64]| {
            kept.iter()
                .map(|&i| {
                    let r = &all[i];
                    r.coeffs.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - r.rhs
                })
                .fold(0.0f64, f64::max)
        };
        if worst(&x_ref) <= worst(&x_tab) {
            x_ref
        } else {
            x_tab
        }
    }
}
