//! Randomized MPC with affine disturbance feedback, compiled to a scenario LP.
//!
//! The input at stage `k` is `u_k = h_k + sum_{j<k} M_{k,j} delta_j`. States
//! follow `x_{k+1} = A x_k + B u_k + E delta_k + w_k`, where `w_k` is a known
//! exogenous term (the negated nominal demand in the inventory model).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{LpBackend, LpSolution, LpStatus};
use crate::rng::stream_seed;
use crate::scenario::{
    sample_multisample, DomainBox, RowTag, ScenarioLp, UncertaintyDist, DEFAULT_DOMAIN_HALF_WIDTH,
};

/// Linear stage cost `sum_{k<T} E[state' x_k + c_k input' u_k] + E[terminal' x_T]`
/// with `c_k = k` when `input_stage_weighted`, else `1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostWeights {
    pub state: Vec<f64>,
    pub terminal: Vec<f64>,
    pub input: Vec<f64>,
    #[serde(default)]
    pub input_stage_weighted: bool,
}

/// JSON form of [`MpcProblem`]. Matrices are lists of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpcConfig {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "E")]
    pub e: Vec<Vec<f64>>,
    #[serde(rename = "T")]
    pub t: usize,
    pub x0: Vec<f64>,
    pub u_lo: Vec<f64>,
    pub u_hi: Vec<f64>,
    #[serde(rename = "F")]
    pub f_mat: Vec<Vec<f64>>,
    pub f: Vec<f64>,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub delta_lo: Vec<f64>,
    pub delta_hi: Vec<f64>,
    pub cost: CostWeights,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Known additive term per stage, `T` vectors of length `n_x`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcProblem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub horizon: usize,
    pub x0: DVector<f64>,
    pub u_lo: DVector<f64>,
    pub u_hi: DVector<f64>,
    pub f_mat: DMatrix<f64>,
    pub f: DVector<f64>,
    /// Per-stage violation level of `F x_k <= f`.
    pub epsilon: f64,
    pub beta: Option<f64>,
    pub delta_lo: DVector<f64>,
    pub delta_hi: DVector<f64>,
    pub cost: CostWeights,
    /// `w_0, ..., w_{T-1}`.
    pub w: Vec<DVector<f64>>,
    pub seed: Option<u64>,
}

fn matrix(
    name: &str,
    rows: &[Vec<f64>],
    n_rows: Option<usize>,
    n_cols: Option<usize>,
) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(Error::dim(format!(
            "{name} must be a non-empty rectangular matrix"
        )));
    }
    if n_rows.is_some_and(|n| n != r) || n_cols.is_some_and(|n| n != c) {
        return Err(Error::dim(format!(
            "{name} is {r}x{c}, expected {}x{}",
            n_rows.map_or("?".into(), |n| n.to_string()),
            n_cols.map_or("?".into(), |n| n.to_string())
        )));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain(format!("{name} has non-finite entries")));
    }
    Ok(DMatrix::from_row_slice(r, c, &flat))
}

fn vector(name: &str, v: &[f64], len: usize) -> Result<DVector<f64>> {
    if v.len() != len {
        return Err(Error::dim(format!(
            "{name} has length {}, expected {len}",
            v.len()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain(format!("{name} has non-finite entries")));
    }
    Ok(DVector::from_column_slice(v))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl MpcProblem {
    pub fn from_config(c: &MpcConfig) -> Result<Self> {
        if c.t == 0 {
            return Err(Error::domain("horizon T must be at least 1"));
        }
        if !(c.epsilon > 0.0 && c.epsilon < 1.0) {
            return Err(Error::domain(format!(
                "epsilon must lie in (0, 1), got {}",
                c.epsilon
            )));
        }
        if let Some(b) = c.beta {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::domain(format!("beta must lie in (0, 1), got {b}")));
            }
        }
        let a = matrix("A", &c.a, None, None)?;
        let nx = a.nrows();
        if a.ncols() != nx {
            return Err(Error::dim("A must be square"));
        }
        let b = matrix("B", &c.b, Some(nx), None)?;
        let e = matrix("E", &c.e, Some(nx), None)?;
        let (nu, nd) = (b.ncols(), e.ncols());
        let f_mat = matrix("F", &c.f_mat, None, Some(nx))?;
        let f = vector("f", &c.f, f_mat.nrows())?;
        let u_lo = vector("u_lo", &c.u_lo, nu)?;
        let u_hi = vector("u_hi", &c.u_hi, nu)?;
        if u_lo.iter().zip(u_hi.iter()).any(|(l, h)| l > h) {
            return Err(Error::domain("u_lo must not exceed u_hi"));
        }
        let delta_lo = vector("delta_lo", &c.delta_lo, nd)?;
        let delta_hi = vector("delta_hi", &c.delta_hi, nd)?;
        if delta_lo.iter().zip(delta_hi.iter()).any(|(l, h)| l > h) {
            return Err(Error::domain("delta_lo must not exceed delta_hi"));
        }
        let w = match &c.w {
            None => vec![DVector::zeros(nx); c.t],
            Some(ws) if ws.len() == c.t => ws
                .iter()
                .enumerate()
                .map(|(k, wk)| vector(&format!("w[{k}]"), wk, nx))
                .collect::<Result<_>>()?,
            Some(ws) => {
                return Err(Error::dim(format!(
                    "w has {} stages, expected {}",
                    ws.len(),
                    c.t
                )))
            }
        };
        let check = |name: &str, v: &[f64], len: usize| vector(name, v, len).map(|_| ());
        check("cost.state", &c.cost.state, nx)?;
        check("cost.terminal", &c.cost.terminal, nx)?;
        check("cost.input", &c.cost.input, nu)?;
        Ok(Self {
            a,
            b,
            e,
            horizon: c.t,
            x0: vector("x0", &c.x0, nx)?,
            u_lo,
            u_hi,
            f_mat,
            f,
            epsilon: c.epsilon,
            beta: c.beta,
            delta_lo,
            delta_hi,
            cost: c.cost.clone(),
            w,
            seed: c.seed,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: MpcConfig = serde_json::from_str(text)
            .map_err(|e| Error::domain(format!("bad MPC config: {e}")))?;
        Self::from_config(&cfg)
    }

    pub fn to_config(&self) -> MpcConfig {
        MpcConfig {
            a: rows_of(&self.a),
            b: rows_of(&self.b),
            e: rows_of(&self.e),
            t: self.horizon,
            x0: self.x0.iter().copied().collect(),
            u_lo: self.u_lo.iter().copied().collect(),
            u_hi: self.u_hi.iter().copied().collect(),
            f_mat: rows_of(&self.f_mat),
            f: self.f.iter().copied().collect(),
            epsilon: self.epsilon,
            beta: self.beta,
            delta_lo: self.delta_lo.iter().copied().collect(),
            delta_hi: self.delta_hi.iter().copied().collect(),
            cost: self.cost.clone(),
            seed: self.seed,
            w: Some(self.w.iter().map(|v| v.iter().copied().collect()).collect()),
        }
    }

    pub fn n_x(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_u(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_delta(&self) -> usize {
        self.e.ncols()
    }

    pub fn n_f(&self) -> usize {
        self.f_mat.nrows()
    }

    /// Distribution of a full disturbance trajectory `(delta_0, ..., delta_{T-1})`.
    pub fn trajectory_dist(&self) -> Result<UncertaintyDist> {
        let t = self.horizon;
        let lo = self
            .delta_lo
            .iter()
            .copied()
            .cycle()
            .take(t * self.n_delta())
            .collect();
        let hi = self
            .delta_hi
            .iter()
            .copied()
            .cycle()
            .take(t * self.n_delta())
            .collect();
        UncertaintyDist::uniform_box(lo, hi)
    }

    pub fn disturbance_is_zero_mean(&self) -> bool {
        self.delta_lo
            .iter()
            .zip(self.delta_hi.iter())
            .all(|(l, h)| (l + h).abs() <= 1e-12 * (h - l).abs().max(1.0))
    }

    fn input_weight(&self, k: usize) -> f64 {
        if self.cost.input_stage_weighted {
            k as f64
        } else {
            1.0
        }
    }
}

/// `v_k = 300 (1 + 0.5 sin(pi k / 12))`.
pub fn nominal_demand(k: usize) -> f64 {
    300.0 * (1.0 + 0.5 * (std::f64::consts::PI * k as f64 / 12.0).sin())
}

/// Initial inventory level of the [`inventory`] preset.
pub const INVENTORY_X0: f64 = 600.0;

/// Warehouse supplied by `n_u` factories over `horizon` periods:
/// `x_{k+1} = x_k + 1'u_k - v_k - delta_k`, `delta_k ~ U[-200, 200]`,
/// `P[x_k >= 500] >= 1 - epsilon`, `0 <= u_k <= 567`.
pub fn inventory(horizon: usize, n_u: usize, epsilon: f64) -> Result<MpcProblem> {
    if n_u == 0 {
        return Err(Error::domain("inventory needs at least one factory"));
    }
    MpcProblem::from_config(&MpcConfig {
        a: vec![vec![1.0]],
        b: vec![vec![1.0; n_u]],
        e: vec![vec![-1.0]],
        t: horizon,
        x0: vec![INVENTORY_X0],
        u_lo: vec![0.0; n_u],
        u_hi: vec![567.0; n_u],
        f_mat: vec![vec![-1.0]],
        f: vec![-500.0],
        epsilon,
        beta: None,
        delta_lo: vec![-200.0],
        delta_hi: vec![200.0],
        cost: CostWeights {
            state: vec![100.0],
            terminal: vec![100.0],
            input: vec![1.0; n_u],
            input_stage_weighted: true,
        },
        seed: None,
        w: Some((0..horizon).map(|k| vec![-nominal_demand(k)]).collect()),
    })
}

/// `x_k(delta) = free_k + B_k u + E_k delta` with `u = h + M delta` the
/// stacked inputs, for `k = 0..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct StagePrediction {
    /// `A^k x0` plus the propagated known terms.
    pub free: Vec<DVector<f64>>,
    /// `n_x x T n_u`.
    pub b: Vec<DMatrix<f64>>,
    /// `n_x x T n_delta`.
    pub e: Vec<DMatrix<f64>>,
}

pub fn build_prediction_operators(p: &MpcProblem) -> StagePrediction {
    let (t, nx, nu, nd) = (p.horizon, p.n_x(), p.n_u(), p.n_delta());
    let mut free = vec![p.x0.clone()];
    let mut b = vec![DMatrix::zeros(nx, t * nu)];
    let mut e = vec![DMatrix::zeros(nx, t * nd)];
    for k in 0..t {
        free.push(&p.a * &free[k] + &p.w[k]);
        let mut bk = &p.a * &b[k];
        let mut blk = bk.view_mut((0, k * nu), (nx, nu));
        blk += &p.b;
        b.push(bk);
        let mut ek = &p.a * &e[k];
        let mut blk = ek.view_mut((0, k * nd), (nx, nd));
        blk += &p.e;
        e.push(ek);
    }
    StagePrediction { free, b, e }
}

impl StagePrediction {
    pub fn state(&self, k: usize, policy: &AffinePolicy, deltas: &DVector<f64>) -> DVector<f64> {
        &self.free[k] + &self.b[k] * policy.inputs(deltas) + &self.e[k] * deltas
    }
}

/// Causal affine disturbance feedback.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinePolicy {
    pub n_u: usize,
    pub n_delta: usize,
    pub horizon: usize,
    /// `T n_u`.
    pub h: DVector<f64>,
    /// `T n_u x T n_delta`, block `(k, j)` zero for `j >= k`.
    pub m: DMatrix<f64>,
}

impl AffinePolicy {
    pub fn open_loop(h: DVector<f64>, n_u: usize, n_delta: usize) -> Result<Self> {
        if n_u == 0 || !h.len().is_multiple_of(n_u) {
            return Err(Error::dim("h length must be a multiple of n_u"));
        }
        let horizon = h.len() / n_u;
        Ok(Self {
            n_u,
            n_delta,
            horizon,
            m: DMatrix::zeros(horizon * n_u, horizon * n_delta),
            h,
        })
    }

    /// Stacked inputs `h + M delta`.
    pub fn inputs(&self, deltas: &DVector<f64>) -> DVector<f64> {
        &self.h + &self.m * deltas
    }

    pub fn input(&self, k: usize, deltas: &DVector<f64>) -> DVector<f64> {
        self.inputs(deltas)
            .rows(k * self.n_u, self.n_u)
            .into_owned()
    }

    /// Largest entry of `M` on or above the block diagonal.
    pub fn causality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..self.horizon {
            for j in k..self.horizon {
                let block = self
                    .m
                    .view((k * self.n_u, j * self.n_delta), (self.n_u, self.n_delta));
                worst = worst.max(block.amax());
            }
        }
        worst
    }
}

/// Positions of `h`, `M+` and `M-` in the LP decision vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionLayout {
    pub horizon: usize,
    pub n_u: usize,
    pub n_delta: usize,
    /// `(k, j, a, b)` of each free entry of `M`, in storage order.
    pub m_entries: Vec<(usize, usize, usize, usize)>,
}

impl DecisionLayout {
    pub fn new(horizon: usize, n_u: usize, n_delta: usize) -> Self {
        let mut m_entries = Vec::new();
        for k in 1..horizon {
            for j in 0..k {
                for a in 0..n_u {
                    for b in 0..n_delta {
                        m_entries.push((k, j, a, b));
                    }
                }
            }
        }
        Self {
            horizon,
            n_u,
            n_delta,
            m_entries,
        }
    }

    pub fn n_h(&self) -> usize {
        self.horizon * self.n_u
    }

    pub fn n_m(&self) -> usize {
        self.m_entries.len()
    }

    pub fn n_vars(&self) -> usize {
        self.n_h() + 2 * self.n_m()
    }

    pub fn h_index(&self, k: usize, a: usize) -> usize {
        k * self.n_u + a
    }

    pub fn m_plus(&self, e: usize) -> usize {
        self.n_h() + e
    }

    pub fn m_minus(&self, e: usize) -> usize {
        self.n_h() + self.n_m() + e
    }

    pub fn policy(&self, z: &[f64]) -> AffinePolicy {
        let (t, nu, nd) = (self.horizon, self.n_u, self.n_delta);
        let h = DVector::from_column_slice(&z[..self.n_h()]);
        let mut m = DMatrix::zeros(t * nu, t * nd);
        for (e, &(k, j, a, b)) in self.m_entries.iter().enumerate() {
            m[(k * nu + a, j * nd + b)] = z[self.m_plus(e)] - z[self.m_minus(e)];
        }
        AffinePolicy {
            n_u: nu,
            n_delta: nd,
            horizon: t,
            h,
            m,
        }
    }

    /// Decision vector realizing `policy`, splitting `M` into its positive
    /// and negative parts.
    pub fn encode(&self, policy: &AffinePolicy) -> Vec<f64> {
        let mut z = vec![0.0; self.n_vars()];
        z[..self.n_h()].copy_from_slice(policy.h.as_slice());
        for (e, &(k, j, a, b)) in self.m_entries.iter().enumerate() {
            let v = policy.m[(k * self.n_u + a, j * self.n_delta + b)];
            z[self.m_plus(e)] = v.max(0.0);
            z[self.m_minus(e)] = (-v).max(0.0);
        }
        z
    }

    /// `c' x_k(delta)` as `(coeffs over z, constant)`.
    fn state_row(
        &self,
        pred: &StagePrediction,
        k: usize,
        c: &DVector<f64>,
        deltas: &DVector<f64>,
    ) -> (Vec<f64>, f64) {
        let cb = c.transpose() * &pred.b[k];
        let constant = c.dot(&pred.free[k]) + (c.transpose() * &pred.e[k] * deltas)[0];
        let mut coeffs = vec![0.0; self.n_vars()];
        coeffs[..self.n_h()].copy_from_slice(cb.as_slice());
        for (e, &(t, j, a, b)) in self.m_entries.iter().enumerate() {
            let v = cb[t * self.n_u + a] * deltas[j * self.n_delta + b];
            coeffs[self.m_plus(e)] = v;
            coeffs[self.m_minus(e)] = -v;
        }
        (coeffs, constant)
    }
}

/// Largest value of `m . delta` over the box `[lo, hi]`.
pub fn worst_case_contribution(m: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    m.iter()
        .zip(lo.iter().zip(hi))
        .map(|(mi, (l, h))| (mi * h).max(mi * l))
        .sum()
}

/// Rows enforcing `u_lo <= u_k(delta) <= u_hi` for every disturbance in the
/// box, as `(coeffs, rhs)` over the decision layout.
pub fn robust_input_rows(p: &MpcProblem, layout: &DecisionLayout) -> Result<Vec<(Vec<f64>, f64)>> {
    if p.delta_lo
        .iter()
        .chain(p.delta_hi.iter())
        .any(|v| !v.is_finite())
    {
        return Err(Error::domain("the disturbance set must be a bounded box"));
    }
    let n = layout.n_vars();
    let mut rows = Vec::with_capacity(2 * layout.n_h());
    for k in 0..p.horizon {
        for a in 0..p.n_u() {
            let mut upper = vec![0.0; n];
            let mut lower = vec![0.0; n];
            upper[layout.h_index(k, a)] = 1.0;
            lower[layout.h_index(k, a)] = -1.0;
            for (e, &(t, _, ai, b)) in layout.m_entries.iter().enumerate() {
                if t == k && ai == a {
                    upper[layout.m_plus(e)] = p.delta_hi[b];
                    upper[layout.m_minus(e)] = -p.delta_lo[b];
                    lower[layout.m_plus(e)] = -p.delta_lo[b];
                    lower[layout.m_minus(e)] = p.delta_hi[b];
                }
            }
            rows.push((upper, p.u_hi[a]));
            rows.push((lower, -p.u_lo[a]));
        }
    }
    Ok(rows)
}

/// Expected cost as a linear function of the decision vector plus a constant.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedCost {
    pub vector: Vec<f64>,
    pub constant: f64,
}

pub fn expected_cost_vector(
    p: &MpcProblem,
    layout: &DecisionLayout,
    pred: &StagePrediction,
) -> Result<ExpectedCost> {
    if !p.disturbance_is_zero_mean() {
        return Err(Error::domain(
            "the expected cost needs a zero-mean disturbance box",
        ));
    }
    let t = p.horizon;
    let state = DVector::from_column_slice(&p.cost.state);
    let terminal = DVector::from_column_slice(&p.cost.terminal);
    let mut vector = vec![0.0; layout.n_vars()];
    let mut constant = 0.0;
    for k in 0..=t {
        let q = if k == t { &terminal } else { &state };
        constant += q.dot(&pred.free[k]);
        let qb = q.transpose() * &pred.b[k];
        for (v, c) in vector.iter_mut().zip(qb.iter()) {
            *v += c;
        }
    }
    for k in 0..t {
        let wk = p.input_weight(k);
        for a in 0..p.n_u() {
            vector[layout.h_index(k, a)] += wk * p.cost.input[a];
        }
    }
    Ok(ExpectedCost { vector, constant })
}

/// The assembled program with its sample bookkeeping.
#[derive(Debug, Clone)]
pub struct RmpcLp {
    pub lp: ScenarioLp,
    pub layout: DecisionLayout,
    pub prediction: StagePrediction,
    pub cost_constant: f64,
    /// Stage `k >= 1` of each global sample index.
    pub sample_stage: Vec<usize>,
    /// Disturbance trajectory of each global sample index.
    pub trajectories: Vec<Vec<f64>>,
}

/// Assembles the scenario LP with `stage_sizes[k-1]` sampled trajectories
/// constraining stage `k`, each stage drawn on stream `stage/k` of `seed`.
pub fn build_rmpc_lp(p: &MpcProblem, stage_sizes: &[usize], seed: u64) -> Result<RmpcLp> {
    if stage_sizes.len() != p.horizon {
        return Err(Error::dim(format!(
            "{} stage sample sizes for horizon {}",
            stage_sizes.len(),
            p.horizon
        )));
    }
    let layout = DecisionLayout::new(p.horizon, p.n_u(), p.n_delta());
    let pred = build_prediction_operators(p);
    let cost = expected_cost_vector(p, &layout, &pred)?;
    let mut lower = vec![-DEFAULT_DOMAIN_HALF_WIDTH; layout.n_vars()];
    lower[layout.n_h()..].fill(0.0);
    let domain = DomainBox::new(lower, vec![DEFAULT_DOMAIN_HALF_WIDTH; layout.n_vars()])?;
    let mut lp = ScenarioLp::new(cost.vector, domain)?;
    for (coeffs, rhs) in robust_input_rows(p, &layout)? {
        lp.push_row(coeffs, rhs, RowTag::Fixed)?;
    }
    let dist = p.trajectory_dist()?;
    let mut sample_stage = Vec::new();
    let mut trajectories = Vec::new();
    for (k, &n_k) in (1..=p.horizon).zip(stage_sizes) {
        let omega = sample_multisample(&dist, n_k, stream_seed(seed, &format!("stage/{k}")));
        for traj in omega.samples {
            let idx = trajectories.len();
            let deltas = DVector::from_column_slice(&traj);
            for i in 0..p.n_f() {
                let c = p.f_mat.row(i).transpose();
                let (coeffs, constant) = layout.state_row(&pred, k, &c, &deltas);
                lp.push_row(coeffs, p.f[i] - constant, RowTag::Sample(idx))?;
            }
            sample_stage.push(k);
            trajectories.push(traj);
        }
    }
    Ok(RmpcLp {
        lp,
        layout,
        prediction: pred,
        cost_constant: cost.constant,
        sample_stage,
        trajectories,
    })
}

#[derive(Debug, Clone)]
pub struct RmpcSolution {
    pub policy: AffinePolicy,
    /// LP objective, without the constant.
    pub objective: f64,
    pub cost_constant: f64,
    pub lp_solution: LpSolution,
}

impl RmpcSolution {
    pub fn expected_cost(&self) -> f64 {
        self.objective + self.cost_constant
    }
}

pub fn solve_rmpc(
    p: &MpcProblem,
    stage_sizes: &[usize],
    seed: u64,
    solver: &impl LpBackend,
) -> Result<RmpcSolution> {
    let built = build_rmpc_lp(p, stage_sizes, seed)?;
    let sol = solver.solve(&built.lp)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(Error::Infeasible),
        LpStatus::Unbounded => return Err(Error::Unbounded),
    }
    Ok(RmpcSolution {
        policy: built.layout.policy(&sol.x),
        objective: sol.objective,
        cost_constant: built.cost_constant,
        lp_solution: sol,
    })
}

/// States `x_0, ..., x_T` by direct recursion.
pub fn simulate(p: &MpcProblem, policy: &AffinePolicy, deltas: &DVector<f64>) -> Vec<DVector<f64>> {
    let nd = p.n_delta();
    let u = policy.inputs(deltas);
    let mut xs = vec![p.x0.clone()];
    for k in 0..p.horizon {
        let uk = u.rows(k * p.n_u(), p.n_u());
        let dk = deltas.rows(k * nd, nd);
        let next = &p.a * &xs[k] + &p.b * uk + &p.e * dk + &p.w[k];
        xs.push(next);
    }
    xs
}

/// Cost of one realized trajectory.
pub fn realized_cost(p: &MpcProblem, policy: &AffinePolicy, deltas: &DVector<f64>) -> f64 {
    let xs = simulate(p, policy, deltas);
    let u = policy.inputs(deltas);
    let t = p.horizon;
    let dot = |w: &[f64], v: &DVector<f64>| w.iter().zip(v.iter()).map(|(a, b)| a * b).sum::<f64>();
    let mut cost = dot(&p.cost.terminal, &xs[t]);
    for (k, x) in xs.iter().enumerate().take(t) {
        let uk = u.rows(k * p.n_u(), p.n_u()).into_owned();
        cost += dot(&p.cost.state, x) + p.input_weight(k) * dot(&p.cost.input, &uk);
    }
    cost
}

/// `true` when some row of `F x_k(delta) <= f` is violated.
pub fn stage_violated(
    p: &MpcProblem,
    pred: &StagePrediction,
    policy: &AffinePolicy,
    k: usize,
    deltas: &DVector<f64>,
) -> bool {
    let x = pred.state(k, policy, deltas);
    (&p.f_mat * x)
        .iter()
        .zip(p.f.iter())
        .any(|(lhs, rhs)| lhs > rhs)
}
