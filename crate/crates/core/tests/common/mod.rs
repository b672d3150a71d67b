//! Independent oracles shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use scenopt::rng::StreamRng;
use scenopt::scenario::{DomainBox, LpRow, RowTag, ScenarioLp};

/// Tail `sum_{j<zeta} C(N,j) eps^j (1-eps)^(N-j)` by the term recurrence.
pub fn direct_tail(n: u64, zeta: u64, eps: f64) -> f64 {
    if zeta > n {
        return 1.0;
    }
    let ratio = eps / (1.0 - eps);
    let mut term = (1.0 - eps).powi(n as i32);
    let mut sum = 0.0;
    for j in 0..zeta {
        sum += term;
        term *= (n - j) as f64 / (j + 1) as f64 * ratio;
    }
    sum
}

/// First `N >= zeta` whose direct tail is at most `beta`, by linear scan.
pub fn brute_force_size(eps: f64, beta: f64, zeta: u64) -> u64 {
    let mut n = zeta;
    while direct_tail(n, zeta, eps) > beta {
        n += 1;
    }
    n
}

const MAX_N: usize = 6;

/// Solves the square system with partial pivoting; `None` if singular.
fn solve_square(rows: &[&LpRow], n: usize) -> Option<[f64; MAX_N]> {
    let mut a = [[0.0f64; MAX_N + 1]; MAX_N];
    for (i, r) in rows.iter().enumerate() {
        let scale = r.coeffs.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        if scale == 0.0 {
            return None;
        }
        for j in 0..n {
            a[i][j] = r.coeffs[j] / scale;
        }
        a[i][n] = r.rhs / scale;
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        for i in 0..n {
            if i != col {
                let f = a[i][col] / a[col][col];
                if f != 0.0 {
                    for j in col..=n {
                        a[i][j] -= f * a[col][j];
                    }
                }
            }
        }
    }
    let mut x = [0.0; MAX_N];
    for i in 0..n {
        x[i] = a[i][n] / a[i][i];
    }
    Some(x)
}

fn combinations(m: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..=m - (k - cur.len()) {
            cur.push(i);
            rec(i + 1, m, k, cur, f);
            cur.pop();
        }
    }
    rec(0, m, k, &mut Vec::with_capacity(k), f);
}

/// Optimal objective over all vertices of the bounded polytope, or `None`
/// when no vertex is feasible.
pub fn vertex_enumeration(lp: &ScenarioLp) -> Option<f64> {
    let n = lp.n_vars();
    assert!(n <= MAX_N);
    let rows = lp.all_rows();
    let scales: Vec<f64> = rows
        .iter()
        .map(|r| {
            r.coeffs
                .iter()
                .fold(r.rhs.abs(), |s, v| s.max(v.abs()))
                .max(1.0)
        })
        .collect();
    let mut best: Option<f64> = None;
    combinations(rows.len(), n, &mut |idx| {
        let pick: Vec<&LpRow> = idx.iter().map(|&i| &rows[i]).collect();
        let Some(x) = solve_square(&pick, n) else {
            return;
        };
        let feasible = rows.iter().zip(&scales).all(|(r, s)| {
            let lhs: f64 = r.coeffs.iter().zip(&x).map(|(a, b)| a * b).sum();
            lhs - r.rhs <= 1e-9 * s
        });
        if feasible {
            let obj: f64 = lp.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
            best = Some(best.map_or(obj, |b: f64| b.min(obj)));
        }
    });
    best
}

/// Random LP with `n <= 6` variables and at most 12 explicit rows. Most
/// instances are feasible by construction; some use small integer data
/// to provoke degenerate vertices and ties, and some have arbitrary
/// right-hand sides that may be infeasible.
pub fn random_lp(rng: &mut StreamRng) -> ScenarioLp {
    let n = 1 + (rng.next_u64() % 6) as usize;
    let m = (rng.next_u64() % 13) as usize;
    let integer = rng.next_f64() < 0.3;
    let arbitrary = rng.next_f64() < 0.15;
    let half: Vec<f64> = (0..n)
        .map(|_| {
            let h = rng.uniform(1.0, 5.0);
            if integer {
                h.round()
            } else {
                h
            }
        })
        .collect();
    let domain = DomainBox::new(half.iter().map(|h| -h).collect(), half.clone()).unwrap();
    let draw = |rng: &mut StreamRng| {
        if integer {
            (rng.next_u64() % 5) as f64 - 2.0
        } else {
            rng.normal()
        }
    };
    let cost: Vec<f64> = (0..n).map(|_| draw(rng)).collect();
    let x0: Vec<f64> = half
        .iter()
        .map(|&h| {
            let v = rng.uniform(-h, h);
            if integer {
                v.trunc()
            } else {
                v
            }
        })
        .collect();
    let mut lp = ScenarioLp::new(cost, domain).unwrap();
    for j in 0..m {
        let a: Vec<f64> = (0..n).map(|_| draw(rng)).collect();
        let rhs = if arbitrary {
            3.0 * rng.normal()
        } else if integer {
            a.iter().zip(&x0).map(|(p, q)| p * q).sum::<f64>() + (rng.next_u64() % 2) as f64
        } else {
            a.iter().zip(&x0).map(|(p, q)| p * q).sum::<f64>() + rng.next_f64()
        };
        lp.push_row(a, rhs, RowTag::Sample(j)).unwrap();
    }
    lp
}
