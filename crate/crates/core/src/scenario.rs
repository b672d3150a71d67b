//! Structured constraint functions, multisamples and sampled linear programs.
//!
//! Every structure is affine in the decision `x` for a fixed uncertainty
//! `delta`, so evaluating the uncertainty-dependent coefficients at a sample
//! yields ordinary linear rows.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::helly_bounds::{self, StructureDims, StructureKind};
use crate::rng::StreamRng;

/// Absolute tolerance on constraint margins.
pub const FEAS_TOL: f64 = 1e-7;

/// Default half-width of the compact decision box.
pub const DEFAULT_DOMAIN_HALF_WIDTH: f64 = 1e6;

/// `x -> coeffs . x + constant`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineFn {
    pub coeffs: Vec<f64>,
    pub constant: f64,
}

impl AffineFn {
    pub fn new(coeffs: Vec<f64>, constant: f64) -> Self {
        Self { coeffs, constant }
    }

    pub fn zero(n: usize) -> Self {
        Self::new(vec![0.0; n], 0.0)
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self::new(vec![0.0; n], c)
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.constant
    }

    /// `self += w * other`
    fn add_scaled(&mut self, w: f64, other: &AffineFn) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += w * b;
        }
        self.constant += w * other.constant;
    }

    fn scaled(&self, w: f64) -> AffineFn {
        AffineFn::new(
            self.coeffs.iter().map(|a| w * a).collect(),
            w * self.constant,
        )
    }
}

type MapFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// A function of the uncertainty with a fixed output dimension.
#[derive(Clone)]
pub struct UncertaintyMap {
    out_dim: usize,
    f: Arc<MapFn>,
}

impl fmt::Debug for UncertaintyMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "UncertaintyMap(-> R^{})", self.out_dim)
    }
}

impl UncertaintyMap {
    pub fn new(out_dim: usize, f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Self {
            out_dim,
            f: Arc::new(f),
        }
    }

    pub fn identity(d: usize) -> Self {
        Self::new(d, |delta| delta.to_vec())
    }

    pub fn zero(out_dim: usize) -> Self {
        Self::new(out_dim, move |_| vec![0.0; out_dim])
    }

    /// `delta -> matrix * delta`, with `matrix` given row by row.
    pub fn linear(matrix: Vec<Vec<f64>>) -> Self {
        Self::new(matrix.len(), move |delta| {
            matrix
                .iter()
                .map(|row| row.iter().zip(delta).map(|(a, b)| a * b).sum())
                .collect()
        })
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn eval(&self, delta: &[f64]) -> Result<Vec<f64>> {
        let v = (self.f)(delta);
        if v.len() != self.out_dim {
            return Err(Error::dim(format!(
                "uncertainty map returned {} values, expected {}",
                v.len(),
                self.out_dim
            )));
        }
        Ok(v)
    }
}

fn check_affine_dims(fs: &[AffineFn], n: usize, what: &str) -> Result<()> {
    match fs.iter().find(|f| f.dim() != n) {
        Some(f) => Err(Error::dim(format!(
            "{what}: affine map on R^{} in an R^{n} problem",
            f.dim()
        ))),
        None => Ok(()),
    }
}

/// `g(x, delta) = G(x) q(delta) + H(x) + s(delta)` with `G`, `H` affine in `x`.
///
/// The same type carries the multiplicative (`H = 0`) and additive (`G = 0`)
/// special cases; `kind` records which one it was built as.
#[derive(Debug, Clone)]
pub struct SeparableConstraint {
    kind: StructureKind,
    n: usize,
    d: usize,
    /// Row-major `r x m` grid of affine maps.
    g: Vec<Vec<AffineFn>>,
    h: Vec<AffineFn>,
    q: UncertaintyMap,
    s: UncertaintyMap,
}

impl SeparableConstraint {
    pub fn separable(
        n: usize,
        d: usize,
        g: Vec<Vec<AffineFn>>,
        h: Vec<AffineFn>,
        q: UncertaintyMap,
        s: UncertaintyMap,
    ) -> Result<Self> {
        Self::build(StructureKind::Separable, n, d, g, h, q, s)
    }

    pub fn multiplicative(
        n: usize,
        d: usize,
        g: Vec<Vec<AffineFn>>,
        q: UncertaintyMap,
        s: UncertaintyMap,
    ) -> Result<Self> {
        let h = vec![AffineFn::zero(n); g.len()];
        Self::build(StructureKind::Multiplicative, n, d, g, h, q, s)
    }

    pub fn additive(n: usize, d: usize, h: Vec<AffineFn>, s: UncertaintyMap) -> Result<Self> {
        let g = vec![Vec::new(); h.len()];
        Self::build(
            StructureKind::Additive,
            n,
            d,
            g,
            h,
            UncertaintyMap::zero(0),
            s,
        )
    }

    fn build(
        kind: StructureKind,
        n: usize,
        d: usize,
        g: Vec<Vec<AffineFn>>,
        h: Vec<AffineFn>,
        q: UncertaintyMap,
        s: UncertaintyMap,
    ) -> Result<Self> {
        let r = h.len();
        if r == 0 {
            return Err(Error::domain("a constraint needs at least one row"));
        }
        if g.len() != r || s.out_dim() != r {
            return Err(Error::dim(format!(
                "G has {} rows, H has {r}, s maps to R^{}",
                g.len(),
                s.out_dim()
            )));
        }
        let m = q.out_dim();
        if g.iter().any(|row| row.len() != m) {
            return Err(Error::dim(format!(
                "every row of G must have m = {m} entries"
            )));
        }
        for row in &g {
            check_affine_dims(row, n, "G")?;
        }
        check_affine_dims(&h, n, "H")?;
        Ok(Self {
            kind,
            n,
            d,
            g,
            h,
            q,
            s,
        })
    }

    pub fn kind(&self) -> StructureKind {
        self.kind
    }

    pub fn dims(&self) -> StructureDims {
        StructureDims {
            n: self.n,
            d: self.d,
            r: self.h.len(),
            m: match self.kind {
                StructureKind::Separable | StructureKind::Multiplicative => Some(self.q.out_dim()),
                _ => None,
            },
        }
    }

    fn rows_at(&self, delta: &[f64]) -> Result<Vec<AffineFn>> {
        let q = self.q.eval(delta)?;
        let s = self.s.eval(delta)?;
        Ok(self
            .g
            .iter()
            .zip(&self.h)
            .zip(&s)
            .map(|((g_row, h_i), &s_i)| separable_row(g_row, &q, h_i, s_i))
            .collect())
    }
}

fn separable_row(g_row: &[AffineFn], q: &[f64], h_i: &AffineFn, s_i: f64) -> AffineFn {
    let mut row = AffineFn::zero(h_i.dim());
    for (g_il, &q_l) in g_row.iter().zip(q) {
        row.add_scaled(q_l, g_il);
    }
    row.add_scaled(1.0, h_i);
    row.constant += s_i;
    row
}

/// `g(x, delta) = G(x) delta + H(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineConstraint {
    n: usize,
    d: usize,
    g: Vec<Vec<AffineFn>>,
    h: Vec<AffineFn>,
}

impl AffineConstraint {
    pub fn new(n: usize, d: usize, g: Vec<Vec<AffineFn>>, h: Vec<AffineFn>) -> Result<Self> {
        if h.is_empty() {
            return Err(Error::domain("a constraint needs at least one row"));
        }
        if g.len() != h.len() || g.iter().any(|row| row.len() != d) {
            return Err(Error::dim(format!("G must be {} x {d}", h.len())));
        }
        for row in &g {
            check_affine_dims(row, n, "G")?;
        }
        check_affine_dims(&h, n, "H")?;
        Ok(Self { n, d, g, h })
    }

    /// The same constraint written as `G(x) q(delta) + H(x) + s(delta)` with
    /// `q` the identity and `s = 0`.
    pub fn to_separable(&self) -> SeparableConstraint {
        SeparableConstraint {
            kind: StructureKind::Separable,
            n: self.n,
            d: self.d,
            g: self.g.clone(),
            h: self.h.clone(),
            q: UncertaintyMap::identity(self.d),
            s: UncertaintyMap::zero(self.h.len()),
        }
    }

    pub fn dims(&self) -> StructureDims {
        StructureDims {
            n: self.n,
            d: self.d,
            r: self.h.len(),
            m: None,
        }
    }

    fn rows_at(&self, delta: &[f64]) -> Vec<AffineFn> {
        self.g
            .iter()
            .zip(&self.h)
            .map(|(g_row, h_i)| separable_row(g_row, delta, h_i, 0.0))
            .collect()
    }
}

/// Rows `g_i(x, delta) = delta' A_i(x) delta + b_i(x)' delta + c_i(x)`.
///
/// `A_i(x)` is stored symmetrized, so only its symmetric part matters.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticConstraint {
    n: usize,
    d: usize,
    a: Vec<Vec<Vec<AffineFn>>>,
    b: Vec<Vec<AffineFn>>,
    c: Vec<AffineFn>,
}

impl QuadraticConstraint {
    pub fn new(
        n: usize,
        d: usize,
        a: Vec<Vec<Vec<AffineFn>>>,
        b: Vec<Vec<AffineFn>>,
        c: Vec<AffineFn>,
    ) -> Result<Self> {
        let r = c.len();
        if r == 0 {
            return Err(Error::domain("a constraint needs at least one row"));
        }
        if a.len() != r || b.len() != r {
            return Err(Error::dim(format!("A, b and c must all have {r} rows")));
        }
        if a.iter()
            .any(|ai| ai.len() != d || ai.iter().any(|row| row.len() != d))
            || b.iter().any(|bi| bi.len() != d)
        {
            return Err(Error::dim(format!(
                "A_i must be {d} x {d} and b_i of length {d}"
            )));
        }
        for ai in &a {
            for row in ai {
                check_affine_dims(row, n, "A")?;
            }
        }
        for bi in &b {
            check_affine_dims(bi, n, "b")?;
        }
        check_affine_dims(&c, n, "c")?;
        let a = a
            .iter()
            .map(|ai| {
                (0..d)
                    .map(|p| {
                        (0..d)
                            .map(|q| {
                                let mut sym = ai[p][q].scaled(0.5);
                                sym.add_scaled(0.5, &ai[q][p]);
                                sym
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(Self { n, d, a, b, c })
    }

    pub fn dims(&self) -> StructureDims {
        StructureDims {
            n: self.n,
            d: self.d,
            r: self.c.len(),
            m: None,
        }
    }

    fn rows_at(&self, delta: &[f64]) -> Vec<AffineFn> {
        (0..self.c.len())
            .map(|i| {
                let mut row = self.c[i].clone();
                for p in 0..self.d {
                    row.add_scaled(delta[p], &self.b[i][p]);
                    for q in 0..self.d {
                        row.add_scaled(delta[p] * delta[q], &self.a[i][p][q]);
                    }
                }
                row
            })
            .collect()
    }
}

/// Any of the supported structured constraint functions.
#[derive(Debug, Clone)]
pub enum ConstraintStructure {
    Separable(SeparableConstraint),
    Affine(AffineConstraint),
    Quadratic(QuadraticConstraint),
}

impl From<SeparableConstraint> for ConstraintStructure {
    fn from(c: SeparableConstraint) -> Self {
        ConstraintStructure::Separable(c)
    }
}

impl From<AffineConstraint> for ConstraintStructure {
    fn from(c: AffineConstraint) -> Self {
        ConstraintStructure::Affine(c)
    }
}

impl From<QuadraticConstraint> for ConstraintStructure {
    fn from(c: QuadraticConstraint) -> Self {
        ConstraintStructure::Quadratic(c)
    }
}

impl ConstraintStructure {
    pub fn kind(&self) -> StructureKind {
        match self {
            ConstraintStructure::Separable(c) => c.kind(),
            ConstraintStructure::Affine(_) => StructureKind::Affine,
            ConstraintStructure::Quadratic(_) => StructureKind::Quadratic,
        }
    }

    pub fn dims(&self) -> StructureDims {
        match self {
            ConstraintStructure::Separable(c) => c.dims(),
            ConstraintStructure::Affine(c) => c.dims(),
            ConstraintStructure::Quadratic(c) => c.dims(),
        }
    }

    /// Structured Helly-dimension bound for this constraint.
    pub fn structured_bound(&self) -> usize {
        helly_bounds::bound_box(self.kind(), &self.dims()).expect("dims carry m when required")
    }

    /// Each row `g_i(., delta)` as an affine function of `x`.
    pub fn rows_at(&self, delta: &[f64]) -> Result<Vec<AffineFn>> {
        let dims = self.dims();
        if delta.len() != dims.d {
            return Err(Error::dim(format!(
                "uncertainty has dimension {}, structure expects {}",
                delta.len(),
                dims.d
            )));
        }
        match self {
            ConstraintStructure::Separable(c) => c.rows_at(delta),
            ConstraintStructure::Affine(c) => Ok(c.rows_at(delta)),
            ConstraintStructure::Quadratic(c) => Ok(c.rows_at(delta)),
        }
    }
}

/// Optional bracket `lower <= g(x, delta) <= upper`.
///
/// With neither side present the constraint is the one-sided `g <= 0`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoxBracket {
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
}

impl BoxBracket {
    pub fn one_sided() -> Self {
        Self::default()
    }

    pub fn new(lower: Option<Vec<f64>>, upper: Option<Vec<f64>>) -> Result<Self> {
        if let (Some(lo), Some(hi)) = (&lower, &upper) {
            if lo.len() != hi.len() {
                return Err(Error::dim("bracket sides differ in length"));
            }
            if lo.iter().zip(hi).any(|(l, h)| l > h) {
                return Err(Error::domain("bracket lower side exceeds upper side"));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn is_one_sided(&self) -> bool {
        self.lower.is_none() && self.upper.is_none()
    }

    fn check(&self, r: usize) -> Result<()> {
        for side in [&self.lower, &self.upper].into_iter().flatten() {
            if side.len() != r {
                return Err(Error::dim(format!(
                    "bracket has {} entries for {r} rows",
                    side.len()
                )));
            }
        }
        Ok(())
    }

    /// `(coeffs, rhs)` pairs of `coeffs . x <= rhs` for one row value.
    fn emit(&self, i: usize, g: &AffineFn) -> Vec<(Vec<f64>, f64)> {
        let mut out = Vec::with_capacity(2);
        if self.is_one_sided() {
            out.push((g.coeffs.clone(), -g.constant));
        }
        if let Some(hi) = &self.upper {
            out.push((g.coeffs.clone(), hi[i] - g.constant));
        }
        if let Some(lo) = &self.lower {
            out.push((g.coeffs.iter().map(|a| -a).collect(), g.constant - lo[i]));
        }
        out
    }

    fn margin(&self, i: usize, value: f64) -> f64 {
        if self.is_one_sided() {
            return value;
        }
        let up = self
            .upper
            .as_ref()
            .map_or(f64::NEG_INFINITY, |hi| value - hi[i]);
        let down = self
            .lower
            .as_ref()
            .map_or(f64::NEG_INFINITY, |lo| lo[i] - value);
        up.max(down)
    }
}

/// Distribution of the uncertainty. Only independent uniform coordinates on
/// a box are supported; new variants plug in through [`UncertaintyDist::draw`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum UncertaintyDist {
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
}

impl UncertaintyDist {
    pub fn uniform_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::dim(
                "box bounds must be nonempty and of equal length",
            ));
        }
        if lo.iter().chain(&hi).any(|v| !v.is_finite()) || lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err(Error::domain(
                "uniform support must be a bounded box with lo <= hi",
            ));
        }
        Ok(UncertaintyDist::UniformBox { lo, hi })
    }

    /// Uniform on `[lo, hi]^d`.
    pub fn uniform_cube(lo: f64, hi: f64, d: usize) -> Result<Self> {
        Self::uniform_box(vec![lo; d], vec![hi; d])
    }

    pub fn dim(&self) -> usize {
        match self {
            UncertaintyDist::UniformBox { lo, .. } => lo.len(),
        }
    }

    /// Whether every coordinate has mean zero.
    pub fn is_zero_mean(&self) -> bool {
        match self {
            UncertaintyDist::UniformBox { lo, hi } => lo.iter().zip(hi).all(|(l, h)| l + h == 0.0),
        }
    }

    pub fn bounds(&self) -> (&[f64], &[f64]) {
        match self {
            UncertaintyDist::UniformBox { lo, hi } => (lo, hi),
        }
    }

    pub fn draw(&self, rng: &mut StreamRng) -> Vec<f64> {
        match self {
            UncertaintyDist::UniformBox { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(&l, &h)| rng.uniform(l, h))
                .collect(),
        }
    }

    pub fn contains(&self, delta: &[f64]) -> bool {
        match self {
            UncertaintyDist::UniformBox { lo, hi } => {
                delta.len() == lo.len()
                    && delta
                        .iter()
                        .zip(lo.iter().zip(hi))
                        .all(|(v, (l, h))| *l <= *v && v <= h)
            }
        }
    }
}

/// Parses `uniform[lo,hi]^d`.
impl FromStr for UncertaintyDist {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::domain(format!("unsupported distribution descriptor {s:?}"));
        let body = s.trim().strip_prefix("uniform[").ok_or_else(bad)?;
        let (interval, power) = body.split_once(']').ok_or_else(bad)?;
        let (lo, hi) = interval.split_once(',').ok_or_else(bad)?;
        let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
        let d = match power.strip_prefix('^') {
            Some(p) => p.parse().map_err(|_| bad())?,
            None if power.is_empty() => 1,
            None => return Err(bad()),
        };
        Self::uniform_cube(lo, hi, d)
    }
}

/// An ordered collection of i.i.d. draws.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiSample {
    pub samples: Vec<Vec<f64>>,
    pub seed: u64,
    pub dist: UncertaintyDist,
}

impl MultiSample {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// A multisample with given draws, e.g. for hand-built fixtures.
    pub fn from_samples(samples: Vec<Vec<f64>>, dist: UncertaintyDist) -> Result<Self> {
        if let Some(bad) = samples.iter().find(|s| !dist.contains(s)) {
            return Err(Error::domain(format!(
                "sample {bad:?} lies outside the support"
            )));
        }
        Ok(Self {
            samples,
            seed: 0,
            dist,
        })
    }
}

pub fn sample_multisample(dist: &UncertaintyDist, n_samples: usize, seed: u64) -> MultiSample {
    let mut rng = StreamRng::new(seed);
    MultiSample {
        samples: (0..n_samples).map(|_| dist.draw(&mut rng)).collect(),
        seed,
        dist: dist.clone(),
    }
}

/// Origin of an LP row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RowTag {
    /// Row generated by sample `j` of the multisample.
    Sample(usize),
    /// Deterministic row shared by every scenario (never a support candidate).
    Fixed,
    /// Bound of the compact decision box.
    Domain,
}

impl fmt::Display for RowTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowTag::Sample(j) => write!(f, "sample:{j}"),
            RowTag::Fixed => f.write_str("fixed"),
            RowTag::Domain => f.write_str("domain"),
        }
    }
}

/// `coeffs . x <= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
    pub tag: RowTag,
}

/// Compact box `lower <= x <= upper` realizing the decision set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl DomainBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::dim("domain bounds differ in length"));
        }
        if lower.iter().chain(&upper).any(|v| !v.is_finite())
            || lower.iter().zip(&upper).any(|(l, u)| l > u)
        {
            return Err(Error::domain(
                "domain box must be finite with lower <= upper",
            ));
        }
        Ok(Self { lower, upper })
    }

    pub fn symmetric(n: usize, half_width: f64) -> Self {
        Self {
            lower: vec![-half_width; n],
            upper: vec![half_width; n],
        }
    }

    /// `|x_i| <= 1e6`.
    pub fn default_for(n: usize) -> Self {
        Self::symmetric(n, DEFAULT_DOMAIN_HALF_WIDTH)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }
}

/// A sampled linear program `min cost . x` over the domain box and rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioLp {
    pub cost: Vec<f64>,
    pub rows: Vec<LpRow>,
    pub domain: DomainBox,
}

impl ScenarioLp {
    pub fn new(cost: Vec<f64>, domain: DomainBox) -> Result<Self> {
        if cost.len() != domain.dim() {
            return Err(Error::dim(format!(
                "cost has {} entries, domain box {}",
                cost.len(),
                domain.dim()
            )));
        }
        Ok(Self {
            cost,
            rows: Vec::new(),
            domain,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn push_row(&mut self, coeffs: Vec<f64>, rhs: f64, tag: RowTag) -> Result<()> {
        if coeffs.len() != self.n_vars() {
            return Err(Error::dim(format!(
                "row has {} coefficients, program has {} variables",
                coeffs.len(),
                self.n_vars()
            )));
        }
        if tag == RowTag::Domain {
            return Err(Error::domain("domain rows come from the domain box"));
        }
        self.rows.push(LpRow { coeffs, rhs, tag });
        Ok(())
    }

    /// Distinct sample indices present in the rows, ascending.
    pub fn sample_indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = self
            .rows
            .iter()
            .filter_map(|r| match r.tag {
                RowTag::Sample(j) => Some(j),
                _ => None,
            })
            .collect();
        idx.sort_unstable();
        idx.dedup();
        idx
    }

    /// The program with every row of sample `k` removed.
    pub fn without_sample(&self, k: usize) -> ScenarioLp {
        ScenarioLp {
            cost: self.cost.clone(),
            rows: self
                .rows
                .iter()
                .filter(|r| r.tag != RowTag::Sample(k))
                .cloned()
                .collect(),
            domain: self.domain.clone(),
        }
    }

    /// Explicit rows followed by the `2n` domain rows.
    pub fn all_rows(&self) -> Vec<LpRow> {
        let n = self.n_vars();
        let mut rows = self.rows.clone();
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            rows.push(LpRow {
                coeffs: e.clone(),
                rhs: self.domain.upper[i],
                tag: RowTag::Domain,
            });
            e[i] = -1.0;
            rows.push(LpRow {
                coeffs: e,
                rhs: -self.domain.lower[i],
                tag: RowTag::Domain,
            });
        }
        rows
    }

    /// Largest violation `coeffs . x - rhs` over all rows, domain included.
    pub fn max_residual(&self, x: &[f64]) -> f64 {
        self.all_rows()
            .iter()
            .map(|r| r.coeffs.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - r.rhs)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Plain-text dump, one `a_1 ... a_n | rhs | tag` line per row.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        out.push_str("# min ");
        out.push_str(&join(&self.cost));
        out.push('\n');
        for row in self.all_rows() {
            out.push_str(&format!(
                "{} | {} | {}\n",
                join(&row.coeffs),
                row.rhs + 0.0,
                row.tag
            ));
        }
        out
    }
}

fn join(v: &[f64]) -> String {
    v.iter()
        .map(|a| (a + 0.0).to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Sampled program: one row per (sample, constraint row, bracket side).
pub fn build_scenario_lp(
    structure: &ConstraintStructure,
    bracket: &BoxBracket,
    omega: &MultiSample,
    cost: &[f64],
    domain: &DomainBox,
) -> Result<ScenarioLp> {
    let dims = structure.dims();
    if cost.len() != dims.n {
        return Err(Error::dim(format!(
            "cost has {} entries, structure n = {}",
            cost.len(),
            dims.n
        )));
    }
    if omega.dist.dim() != dims.d {
        return Err(Error::dim(format!(
            "samples live in R^{}, structure expects R^{}",
            omega.dist.dim(),
            dims.d
        )));
    }
    bracket.check(dims.r)?;
    let mut lp = ScenarioLp::new(cost.to_vec(), domain.clone())?;
    for (j, delta) in omega.samples.iter().enumerate() {
        for (i, g) in structure.rows_at(delta)?.iter().enumerate() {
            for (coeffs, rhs) in bracket.emit(i, g) {
                lp.push_row(coeffs, rhs, RowTag::Sample(j))?;
            }
        }
    }
    Ok(lp)
}

/// Worst signed margin over rows and bracket sides; `<= 0` iff feasible.
pub fn evaluate_constraint(
    structure: &ConstraintStructure,
    bracket: &BoxBracket,
    x: &[f64],
    delta: &[f64],
) -> Result<f64> {
    let dims = structure.dims();
    if x.len() != dims.n {
        return Err(Error::dim(format!(
            "x has {} entries, structure n = {}",
            x.len(),
            dims.n
        )));
    }
    bracket.check(dims.r)?;
    Ok(structure
        .rows_at(delta)?
        .iter()
        .enumerate()
        .map(|(i, g)| bracket.margin(i, g.eval(x)))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Fraction of `test` draws at which `x` violates the constraint.
pub fn empirical_violation(
    structure: &ConstraintStructure,
    bracket: &BoxBracket,
    x: &[f64],
    test: &MultiSample,
) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::domain(
            "empirical violation needs at least one test sample",
        ));
    }
    let mut violated = 0usize;
    for delta in &test.samples {
        if evaluate_constraint(structure, bracket, x, delta)? > 0.0 {
            violated += 1;
        }
    }
    Ok(violated as f64 / test.len() as f64)
}

/// Numerical rank with singular values below `1e-9 * sigma_max` treated as zero.
pub fn numerical_rank(rows: &[Vec<f64>]) -> usize {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return 0;
    }
    let m = DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]);
    let sv = m.singular_values();
    let top = sv.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-9 * top).count()
}
