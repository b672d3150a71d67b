//! Upper bounds on the Helly dimension of structured scenario programs.
//!
//! `r` always counts constraint rows of the vector-valued constraint. For
//! box-bracketed constraints (`lo <= g <= hi`) it counts bracketed pairs, so
//! the two sides of a bracket are not counted twice.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the constraint function depends on the uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StructureKind {
    /// `G(x) q(delta) + H(x) + s(delta)`
    Separable,
    /// `G(x) q(delta) + s(delta)`
    Multiplicative,
    /// `H(x) + s(delta)`
    Additive,
    /// `G(x) delta + H(x)`
    Affine,
    /// `delta' A_i(x) delta + b_i(x)' delta + c_i(x)` for each row `i`
    Quadratic,
}

impl StructureKind {
    pub const ALL: [StructureKind; 5] = [
        StructureKind::Separable,
        StructureKind::Multiplicative,
        StructureKind::Additive,
        StructureKind::Affine,
        StructureKind::Quadratic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StructureKind::Separable => "separable",
            StructureKind::Multiplicative => "multiplicative",
            StructureKind::Additive => "additive",
            StructureKind::Affine => "affine",
            StructureKind::Quadratic => "quadratic",
        }
    }
}

impl fmt::Display for StructureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StructureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StructureKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::domain(format!("unknown structure kind {s:?}")))
    }
}

/// Problem dimensions relevant to the structured bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StructureDims {
    /// Decision dimension.
    pub n: usize,
    /// Uncertainty dimension.
    pub d: usize,
    /// Constraint rows (bracketed pairs for box constraints).
    pub r: usize,
    /// Dimension of the lifted uncertainty `q(delta)`; separable and
    /// multiplicative structures only.
    pub m: Option<usize>,
}

pub fn bound_standard(n: usize) -> usize {
    n
}

pub fn bound_separable(r: usize, m: usize) -> usize {
    r * (m + 1)
}

pub fn bound_multiplicative(r: usize, m: usize) -> usize {
    r * m
}

pub fn bound_additive(r: usize) -> usize {
    r
}

pub fn bound_affine(r: usize, d: usize) -> usize {
    r * (d + 1)
}

/// `r d (d + 3) / 2 + r`; `d (d + 3)` is always even.
pub fn bound_quadratic(r: usize, d: usize) -> usize {
    r * d * (d + 3) / 2 + r
}

/// Structured bound of `kind` at `dims`.
///
/// Applies unchanged to box-bracketed constraints: a bracket does not double
/// the bound.
pub fn bound_box(kind: StructureKind, dims: &StructureDims) -> Result<usize> {
    let need_m = || {
        dims.m
            .ok_or_else(|| Error::domain(format!("{kind} structure needs the lifted dimension m")))
    };
    Ok(match kind {
        StructureKind::Separable => bound_separable(dims.r, need_m()?),
        StructureKind::Multiplicative => bound_multiplicative(dims.r, need_m()?),
        StructureKind::Additive => bound_additive(dims.r),
        StructureKind::Affine => bound_affine(dims.r, dims.d),
        StructureKind::Quadratic => bound_quadratic(dims.r, dims.d),
    })
}

/// Dimensions of stage `k` of a chance-constrained MPC problem with affine
/// disturbance feedback.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MpcStageDims {
    /// Stage index, `k >= 1`.
    pub k: usize,
    pub n_u: usize,
    pub n_delta: usize,
    /// State-constraint rows; bracketed pairs when `box_states`.
    pub n_f: usize,
    /// Rank of the state-constraint matrix, supplied by the caller.
    pub rank_f: usize,
    /// State constraints are upper and lower bounds; `n_f` counts both sides.
    pub box_states: bool,
    /// Use the tightened bound `k` (single constraint, scalar disturbance).
    pub tightened: bool,
}

impl MpcStageDims {
    pub fn new(k: usize, n_u: usize, n_delta: usize, n_f: usize, rank_f: usize) -> Self {
        Self {
            k,
            n_u,
            n_delta,
            n_f,
            rank_f,
            box_states: false,
            tightened: false,
        }
    }
}

/// The three stage bounds compared for randomized MPC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageBounds {
    pub std: usize,
    pub srank: usize,
    pub new: usize,
}

pub fn mpc_stage_bounds(s: &MpcStageDims) -> Result<StageBounds> {
    if s.k == 0 || s.n_u == 0 || s.n_delta == 0 || s.n_f == 0 {
        return Err(Error::domain("k, n_u, n_delta and n_f must be at least 1"));
    }
    let k = s.k;
    let feedback = s.n_u * s.n_delta * k * (k - 1) / 2;
    let std = k * s.n_u + feedback;
    let srank = s.rank_f.min(k * s.n_u) + feedback;
    let new = if s.tightened {
        if s.n_f != 1 || s.n_delta != 1 || s.box_states {
            return Err(Error::domain(
                "the tightened bound is only available for one state constraint and a scalar disturbance",
            ));
        }
        k
    } else if s.box_states {
        if !s.n_f.is_multiple_of(2) {
            return Err(Error::domain(format!(
                "box state constraints need an even number of rows, got n_f = {}",
                s.n_f
            )));
        }
        s.n_f / 2 * (k * s.n_delta + 1)
    } else {
        s.n_f * (k * s.n_delta + 1)
    };
    Ok(StageBounds { std, srank, new })
}

/// Smallest candidate bound.
pub fn best_bound(candidates: &[usize]) -> Result<usize> {
    candidates
        .iter()
        .copied()
        .min()
        .ok_or_else(|| Error::domain("no candidate bounds"))
}
