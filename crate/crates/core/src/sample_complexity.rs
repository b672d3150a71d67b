//! Scenario sample sizes.
//!
//! The scenario program with `N` samples and Helly dimension at most `zeta`
//! returns, with confidence `1 - beta`, a solution whose violation
//! probability is at most `epsilon` whenever the binomial tail
//!
//! ```text
//! sum_{j=0}^{zeta-1} C(N, j) eps^j (1 - eps)^(N - j) <= beta
//! ```
//!
//! holds. This module evaluates that tail, inverts it for the smallest `N`,
//! provides the closed-form sufficient size `(2/eps)(zeta - 1 + ln(1/beta))`
//! and the VC-dimension sizes used for comparison.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

fn check_open_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must lie in (0, 1), got {v}")))
    }
}

/// Violation level, confidence parameter and Helly-dimension bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSizeQuery {
    epsilon: f64,
    beta: f64,
    zeta: u64,
}

impl SampleSizeQuery {
    pub fn new(epsilon: f64, beta: f64, zeta: u64) -> Result<Self> {
        check_open_unit("epsilon", epsilon)?;
        check_open_unit("beta", beta)?;
        if zeta == 0 {
            return Err(Error::domain("zeta must be at least 1"));
        }
        Ok(Self {
            epsilon,
            beta,
            zeta,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn zeta(&self) -> u64 {
        self.zeta
    }
}

/// Query for the statistical-learning sample size with VC-dimension bound `xi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VcQuery {
    xi: f64,
    epsilon: f64,
    beta: f64,
}

impl VcQuery {
    pub fn new(xi: f64, epsilon: f64, beta: f64) -> Result<Self> {
        if !(xi > 0.0 && xi.is_finite()) {
            return Err(Error::domain(format!("xi must be positive, got {xi}")));
        }
        check_open_unit("epsilon", epsilon)?;
        check_open_unit("beta", beta)?;
        Ok(Self { xi, epsilon, beta })
    }
}

/// `P[Bin(N, eps) < zeta]`, evaluated term by term in log space.
///
/// Terms are accumulated smallest first after factoring out the largest one.
/// Returns exactly 1 when `zeta > n_samples` (the whole distribution).
pub fn binomial_tail(n_samples: u64, zeta: u64, epsilon: f64) -> Result<f64> {
    check_open_unit("epsilon", epsilon)?;
    if zeta > n_samples {
        return Ok(1.0);
    }
    let n = n_samples as f64;
    let ln_eps = epsilon.ln();
    let ln_keep = (-epsilon).ln_1p();
    let ln_n_fact = ln_gamma(n + 1.0);
    let mut logs: Vec<f64> = (0..zeta)
        .map(|j| {
            let j = j as f64;
            let ln_choose = if j == 0.0 {
                0.0
            } else {
                ln_n_fact - ln_gamma(j + 1.0) - ln_gamma(n - j + 1.0)
            };
            ln_choose + j * ln_eps + (n - j) * ln_keep
        })
        .collect();
    logs.sort_by(f64::total_cmp);
    let top = *logs.last().expect("zeta >= 1");
    if top == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    let scaled: f64 = logs.iter().map(|l| (l - top).exp()).sum();
    Ok((top.exp() * scaled).clamp(0.0, 1.0))
}

/// Relative slack when comparing a tail with `beta`. Ties such as
/// `P[Bin(9, 0.5) < 5] = 0.5` are exact, but the log-space sum can land a
/// few ulps above them.
pub const TAIL_RTOL: f64 = 1e-12;

fn tail_ok(q: &SampleSizeQuery, n: u64) -> bool {
    binomial_tail(n, q.zeta, q.epsilon).expect("validated query") <= q.beta * (1.0 + TAIL_RTOL)
}

/// Smallest `N >= zeta` whose binomial tail is at most `beta` (up to
/// [`TAIL_RTOL`]).
///
/// The tail decreases in `N` on `N >= zeta`, so the search gallops upward
/// from `zeta` and then bisects the last bracket.
pub fn min_sample_size_exact(q: &SampleSizeQuery) -> u64 {
    let mut lo = q.zeta;
    if tail_ok(q, lo) {
        return lo;
    }
    let mut step = 1u64;
    let mut hi = lo + step;
    while !tail_ok(q, hi) {
        lo = hi;
        step = step.saturating_mul(2);
        hi = lo.saturating_add(step);
    }
    // invariant: tail(lo) > beta >= tail(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if tail_ok(q, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `ceil((2/eps)(zeta - 1 + ln(1/beta)))`.
pub fn min_sample_size_explicit(q: &SampleSizeQuery) -> u64 {
    let raw = (2.0 / q.epsilon) * ((q.zeta - 1) as f64 + (1.0 / q.beta).ln());
    raw.ceil().max(1.0) as u64
}

/// VC-dimension bound for `r` constraints affine in a `d`-dimensional uncertainty.
pub fn vc_dim_affine(r: u64, d: u64) -> f64 {
    let r = r as f64;
    2.0 * r * (std::f64::consts::E * r).log2() * (d as f64 + 1.0)
}

/// VC-dimension bound for `r` constraints quadratic in a `d`-dimensional uncertainty.
pub fn vc_dim_quadratic(r: u64, d: u64) -> f64 {
    let r = r as f64;
    let d = d as f64;
    2.0 * r * (std::f64::consts::E * r).log2() * (d * (d + 3.0) / 2.0 + 1.0)
}

/// One-sided statistical-learning sample size
/// `ceil((4/eps)(xi log2(12/eps) + log2(2/beta)))`.
pub fn vc_sample_size(q: &VcQuery) -> u64 {
    let raw = (4.0 / q.epsilon) * (q.xi * (12.0 / q.epsilon).log2() + (2.0 / q.beta).log2());
    raw.ceil() as u64
}
